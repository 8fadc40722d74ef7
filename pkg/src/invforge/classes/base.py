"""Shared machinery for amalgamation-class strategies."""
from __future__ import annotations

from ..errors import NoSplittingDeclared, NotInAge, OrderTooSmall, SignatureMismatch
from ..formulas import And, Atom, Eq, Implies, Not, Top, conj
from ..structures import FinStructure


class ExtensionTemplate:
    """A one-point extension demand ``premise(x) -> (exists y) conclusion(x, y)``.

    ``formula`` is the quantifier-free ``phi(x0..x_{arity-1}, y)`` used by
    schedules; the conclusion always asserts ``y`` differs from every ``x_i``.
    """

    def __init__(self, name, arity, premise, conclusion):
        self.name = name
        self.arity = arity
        self.premise = premise
        distinct = [Not(Eq("y", f"x{i}")) for i in range(arity)]
        self.conclusion = conj(distinct + [conclusion]) if distinct else conclusion
        self.formula = Implies(premise, self.conclusion)
        self.rel = None
        self.premise_edge = None
        self.neighbours = frozenset()

    @property
    def variables(self):
        return [f"x{i}" for i in range(self.arity)]

    def __repr__(self):
        return f"ExtensionTemplate({self.name})"


def adjacency_template(rel, arity, premise_edge, neighbours, tag=""):
    """Template for graph-like relations: y is ``rel``-adjacent exactly to ``neighbours``."""
    if arity == 2:
        e = Atom(rel, ("x0", "x1"))
        premise = And([Not(Eq("x0", "x1")), e if premise_edge else Not(e)])
        pname = "edge" if premise_edge else "nonedge"
    else:
        premise = Top()
        pname = "any"
    parts = []
    for i in range(arity):
        a = Atom(rel, (f"x{i}", "y"))
        parts.append(a if i in neighbours else Not(a))
    name = f"{rel}{tag}:{arity}:{pname}:{''.join(map(str, sorted(neighbours))) or '-'}"
    tpl = ExtensionTemplate(name, arity, premise, conj(parts) if parts else Top())
    tpl.rel = rel
    tpl.premise_edge = premise_edge if arity == 2 else None
    tpl.neighbours = frozenset(neighbours)
    return tpl


class AmalgamationClass:
    """Strategy interface; see the concrete classes for the policies."""

    name = "abstract"
    declared_splitting_order = None
    constant_free = True

    def signature_at(self, layers):
        raise NotImplementedError

    def initial_layers(self):
        """Layer count of the sublanguage with index 1."""
        return 2

    def violations(self, s):
        raise NotImplementedError

    def contains(self, s) -> bool:
        return not self.violations(s)

    def check_signature(self, s):
        sig = s.signature
        # split families make the layer count huge; only explicit relations need naming
        top = max((r.layer for r in sig.relations), default=-1) + 1
        expected = self.signature_at(min(sig.layers, top))
        base = {r.name for r in expected.relations}
        for r in sig.relations:
            if r.name not in base and not self.accepts_relation(r):
                raise SignatureMismatch(f"relation {r.name!r} is foreign to class {self.name}")

    def accepts_relation(self, r):
        return False

    def require_splitting(self, q):
        if self.declared_splitting_order is None:
            raise NoSplittingDeclared(f"class {self.name} declares no splitting order")
        if q.var_count < self.declared_splitting_order:
            raise OrderTooSmall(f"need at least {self.declared_splitting_order} variables")
        if not q.non_redundant:
            raise ValueError("split_type needs a non-redundant type")

    def require_in_age(self, *structures):
        for s in structures:
            bad = self.violations(s)
            if bad:
                raise NotInAge(bad[0])

    def templates(self):
        raise NotImplementedError

    def fresh_label(self, s, label=None):
        if label is not None:
            return label
        n = len(s.elements)
        while n in s:
            n += 1
        return n


def strong_amalgam_labels(m: FinStructure, n: FinStructure, over: FinStructure):
    """Labels for the amalgam: m's labels, then n's private labels (tagged on clashes)."""
    shared = set(over.elements)
    rename = {}
    taken = set(m.elements)
    for x in n.elements:
        if x in shared:
            rename[x] = x
        elif x in taken:
            new = ("n", x)
            while new in taken:
                new = ("n", new)
            rename[x] = new
            taken.add(new)
        else:
            rename[x] = x
            taken.add(x)
    return rename


# Thin functional front-ends with the names used in the documentation.
def contains(c, s):
    return c.contains(s)


def strong_amalgam(c, m, n, over):
    return c.strong_amalgam(m, n, over)


def canonical_witness(c, s, tuple_, demand, label=None):
    return c.canonical_witness(s, tuple_, demand, label=label)


def iterated_duplicate(c, q, multiplicities):
    return c.iterated_duplicate(q, multiplicities)


def extend_language(c, q, to_layers):
    return c.extend_language(q, to_layers)


def split_type(c, q, **kwargs):
    return c.split_type(q, **kwargs)
