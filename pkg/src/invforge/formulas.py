"""A small first-order formula AST over relational signatures.

Variables are plain strings.  ``Const`` and ``Func`` terms exist only so that
unsupported input can be recognised and rejected.
"""
from __future__ import annotations

from .errors import UnsupportedFormula


class Const:
    def __init__(self, name):
        self.name = name

    def __repr__(self):
        return f"Const({self.name!r})"


class Func:
    def __init__(self, name, args):
        self.name = name
        self.args = tuple(args)

    def __repr__(self):
        return f"Func({self.name!r}, {self.args!r})"


def _check_term(t):
    if not isinstance(t, str):
        raise UnsupportedFormula(f"only variables are supported as terms, got {t!r}")
    return t


class Formula:
    __slots__ = ()

    def free_vars(self) -> frozenset:
        raise NotImplementedError

    def evaluate(self, s, env) -> bool:
        raise NotImplementedError

    def is_quantifier_free(self) -> bool:
        return all(c.is_quantifier_free() for c in self.children())

    def children(self):
        return ()

    def rename(self, mapping):
        """Substitute free variables according to ``mapping``."""
        raise NotImplementedError

    def _key(self):
        raise NotImplementedError

    def __eq__(self, other):
        return type(self) is type(other) and self._key() == other._key()

    def __hash__(self):
        return hash((type(self).__name__, self._key()))

    def __and__(self, other):
        return And([self, other])

    def __or__(self, other):
        return Or([self, other])

    def __invert__(self):
        return Not(self)


class Top(Formula):
    __slots__ = ()

    def free_vars(self):
        return frozenset()

    def evaluate(self, s, env):
        return True

    def rename(self, mapping):
        return self

    def _key(self):
        return ()

    def __repr__(self):
        return "⊤"


class Bottom(Top):
    __slots__ = ()

    def evaluate(self, s, env):
        return False

    def __repr__(self):
        return "⊥"


class Atom(Formula):
    __slots__ = ("rel", "args")

    def __init__(self, rel: str, args):
        self.rel = rel
        self.args = tuple(args)

    def free_vars(self):
        return frozenset(a for a in self.args if isinstance(a, str))

    def evaluate(self, s, env):
        return s.holds(self.rel, tuple(env[_check_term(a)] for a in self.args))

    def rename(self, mapping):
        return Atom(self.rel, [mapping.get(a, a) if isinstance(a, str) else a for a in self.args])

    def _key(self):
        return (self.rel, tuple(map(repr, self.args)))

    def __repr__(self):
        return f"{self.rel}({','.join(map(str, self.args))})"


class Eq(Formula):
    __slots__ = ("left", "right")

    def __init__(self, left, right):
        self.left = left
        self.right = right

    def free_vars(self):
        return frozenset(a for a in (self.left, self.right) if isinstance(a, str))

    def evaluate(self, s, env):
        return env[_check_term(self.left)] == env[_check_term(self.right)]

    def rename(self, mapping):
        return Eq(mapping.get(self.left, self.left), mapping.get(self.right, self.right))

    def _key(self):
        return (repr(self.left), repr(self.right))

    def __repr__(self):
        return f"{self.left}={self.right}"


class Not(Formula):
    __slots__ = ("sub",)

    def __init__(self, sub):
        self.sub = sub

    def children(self):
        return (self.sub,)

    def free_vars(self):
        return self.sub.free_vars()

    def evaluate(self, s, env):
        return not self.sub.evaluate(s, env)

    def rename(self, mapping):
        return Not(self.sub.rename(mapping))

    def _key(self):
        return (self.sub,)

    def __repr__(self):
        return f"¬{self.sub!r}"


class And(Formula):
    """Finite conjunction.  Anything that is not a list or tuple is refused."""
    __slots__ = ("parts",)

    def __init__(self, parts):
        if not isinstance(parts, (list, tuple)):
            raise UnsupportedFormula("conjunctions must be finite lists of formulas")
        self.parts = tuple(parts)

    def children(self):
        return self.parts

    def free_vars(self):
        out = frozenset()
        for p in self.parts:
            out |= p.free_vars()
        return out

    def evaluate(self, s, env):
        return all(p.evaluate(s, env) for p in self.parts)

    def rename(self, mapping):
        return type(self)([p.rename(mapping) for p in self.parts])

    def _key(self):
        return self.parts

    def __repr__(self):
        return "(" + " ∧ ".join(map(repr, self.parts)) + ")" if self.parts else "⊤"


class Or(And):
    __slots__ = ()

    def evaluate(self, s, env):
        return any(p.evaluate(s, env) for p in self.parts)

    def __repr__(self):
        return "(" + " ∨ ".join(map(repr, self.parts)) + ")" if self.parts else "⊥"


class InfiniteAnd(Formula):
    """Placeholder for a countable conjunction given by a generator; never evaluated."""
    __slots__ = ("family",)

    def __init__(self, family):
        self.family = family

    def free_vars(self):
        raise UnsupportedFormula("infinitary conjunction")

    def evaluate(self, s, env):
        raise UnsupportedFormula("infinitary conjunction")

    def rename(self, mapping):
        raise UnsupportedFormula("infinitary conjunction")

    def _key(self):
        return (id(self.family),)


class Exists(Formula):
    __slots__ = ("var", "body")

    def __init__(self, var: str, body: Formula):
        self.var = var
        self.body = body

    def children(self):
        return (self.body,)

    def is_quantifier_free(self):
        return False

    def free_vars(self):
        return self.body.free_vars() - {self.var}

    def evaluate(self, s, env):
        inner = dict(env)
        for e in s.elements:
            inner[self.var] = e
            if self.body.evaluate(s, inner):
                return True
        return False

    def rename(self, mapping):
        m = {k: v for k, v in mapping.items() if k != self.var}
        if self.var in m.values():
            raise ValueError("renaming would capture the bound variable")
        return Exists(self.var, self.body.rename(m))

    def _key(self):
        return (self.var, self.body)

    def __repr__(self):
        return f"∃{self.var} {self.body!r}"


def Implies(a, b):
    return Or([Not(a), b])


def conj(parts):
    parts = list(parts)
    return parts[0] if len(parts) == 1 else And(parts)


def var_names(count: int):
    return [f"x{i}" for i in range(count)]


def holds_on(s, formula: Formula, assignment) -> bool:
    """Evaluate ``formula`` in ``s`` with ``assignment`` mapping variable names to labels."""
    return formula.evaluate(s, dict(assignment))


def subformulas(formula: Formula):
    """Post-order list of distinct subformulas."""
    seen = []
    seen_set = set()

    def walk(f):
        for c in f.children():
            walk(c)
        if f not in seen_set:
            seen_set.add(f)
            seen.append(f)

    walk(formula)
    return seen
