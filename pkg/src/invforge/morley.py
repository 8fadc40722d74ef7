"""Definitional expansion of finitary formulas into a pithy Pi-2 theory.

One new relation ``R[psi]`` is added per subformula ``psi``.  Its arguments
are the free variables of ``psi`` in sorted order followed by an inert dummy
variable ``w``.  Atomic subformulas share the relation ``R[P]`` of their
symbol ``P``, applied to their own argument list.
"""
from __future__ import annotations

from itertools import product

from .errors import UnsupportedFormula
from .formulas import (And, Atom, Bottom, Const, Eq, Exists, Formula, Func, InfiniteAnd,
                       Not, Or, Top, subformulas)
from .structures import FinStructure, Signature


class PithyPi2Sentence:
    """``(forall universal_vars)(exists existential) body`` with a quantifier-free body."""

    def __init__(self, body: Formula, universal_vars, existential=None):
        if not body.is_quantifier_free():
            raise ValueError("pithy sentences need a quantifier-free body")
        self.body = body
        self.universal = tuple(universal_vars)
        self.existential = existential
        allowed = set(self.universal) | ({existential} if existential else set())
        if not body.free_vars() <= allowed:
            raise ValueError("body has variables outside the quantifier prefix")

    @property
    def universal_vars(self) -> int:
        return len(self.universal)

    @property
    def has_existential(self) -> bool:
        return self.existential is not None

    def holds_in(self, s) -> bool:
        for values in product(s.elements, repeat=len(self.universal)):
            env = dict(zip(self.universal, values))
            if self.existential is None:
                if not self.body.evaluate(s, env):
                    return False
                continue
            found = False
            for y in s.elements:
                env[self.existential] = y
                if self.body.evaluate(s, env):
                    found = True
                    break
            if not found:
                return False
        return True

    def __repr__(self):
        pre = "".join(f"∀{v}" for v in self.universal)
        if self.existential:
            pre += f"∃{self.existential}"
        return f"{pre} {self.body!r}"


def _iff(a, b):
    return And([Or([Not(a), b]), Or([Not(b), a])])


def _check_supported(f, sig):
    if isinstance(f, InfiniteAnd):
        raise UnsupportedFormula("infinitary conjunction")
    if isinstance(f, Atom):
        for a in f.args:
            if isinstance(a, (Const, Func)) or not isinstance(a, str):
                raise UnsupportedFormula(f"non-variable term {a!r}")
        if not sig.has(f.rel):
            raise UnsupportedFormula(f"unknown relation {f.rel!r}")
        if len(f.args) != sig.arity(f.rel):
            raise UnsupportedFormula(f"arity mismatch in {f!r}")
    if isinstance(f, Eq):
        for a in (f.left, f.right):
            if not isinstance(a, str):
                raise UnsupportedFormula(f"non-variable term {a!r}")
    for c in f.children():
        _check_supported(c, sig)


class Morleyization:
    """Result bundle; iterable as ``(signature, axioms, expand)``."""

    def __init__(self, signature, axioms, expand, names):
        self.signature = signature
        self.axioms = axioms
        self.expand = expand
        self.names = names

    def __iter__(self):
        return iter((self.signature, self.axioms, self.expand))

    def relation_for(self, psi: Formula) -> str:
        return self.names[psi]


def pithy_pi2_expansion(sig: Signature, formulas) -> Morleyization:
    formulas = list(formulas)
    for f in formulas:
        if not isinstance(f, Formula):
            raise UnsupportedFormula(f"not a formula: {f!r}")
        _check_supported(f, sig)
    used = set()
    for f in formulas:
        for g in subformulas(f):
            used |= set(_all_vars(g))
    dummy = "w"
    while dummy in used:
        dummy += "_"

    order = []  # subformulas in post-order, atoms replaced by their symbols
    seen = set()
    for f in formulas:
        for g in subformulas(f):
            key = _atom_key(g)
            if key not in seen:
                seen.add(key)
                order.append(g)

    names = {}
    new_rels = []
    layer_of = {r.name: r.layer for r in sig.relations}
    for g in order:
        key = _atom_key(g)
        if isinstance(g, Atom):
            name, arity = f"R[{g.rel}]", sig.arity(g.rel) + 1
        elif isinstance(g, Eq):
            name, arity = "R[=]", 3
        else:
            name, arity = f"R[{g!r}]", len(g.free_vars()) + 1
        names[key] = name
        layer = max([layer_of.get(a.rel, 0) for a in _atoms(g)] or [0])
        new_rels.append((name, arity, layer))
    names_by_formula = {}
    for g in order:
        names_by_formula[g] = names[_atom_key(g)]
    new_sig = sig.with_layers(sig.layers, extra=new_rels)

    def ratom(g):
        if isinstance(g, Atom):
            return Atom(names[_atom_key(g)], g.args + (dummy,))
        if isinstance(g, Eq):
            return Atom("R[=]", (g.left, g.right, dummy))
        return Atom(names[_atom_key(g)], tuple(sorted(g.free_vars())) + (dummy,))

    axioms = []
    for g in order:
        fv = tuple(sorted(g.free_vars()))
        if isinstance(g, Atom):
            zs = tuple(f"z{i}" for i in range(len(g.args)))
            axioms.append(PithyPi2Sentence(
                _iff(Atom(names[_atom_key(g)], zs + (dummy,)), Atom(g.rel, zs)), zs + (dummy,)))
        elif isinstance(g, Eq):
            axioms.append(PithyPi2Sentence(
                _iff(Atom("R[=]", ("z0", "z1", dummy)), Eq("z0", "z1")), ("z0", "z1", dummy)))
        elif isinstance(g, (Top, Bottom)):
            axioms.append(PithyPi2Sentence(_iff(ratom(g), g), (dummy,)))
        elif isinstance(g, Not):
            axioms.append(PithyPi2Sentence(_iff(ratom(g), Not(ratom(g.sub))), fv + (dummy,)))
        elif isinstance(g, And):
            parts = [ratom(p) for p in g.parts]
            body = Or(parts) if isinstance(g, Or) else And(parts)
            axioms.append(PithyPi2Sentence(_iff(ratom(g), body), fv + (dummy,)))
        elif isinstance(g, Exists):
            inner = ratom(g.body)
            if g.var in g.body.free_vars():
                axioms.append(PithyPi2Sentence(
                    Or([Not(ratom(g)), inner]), fv + (dummy,), existential=g.var))
                axioms.append(PithyPi2Sentence(
                    Or([Not(inner), ratom(g)]), fv + (g.var, dummy)))
            else:
                axioms.append(PithyPi2Sentence(_iff(ratom(g), inner), fv + (dummy,),
                                               existential=g.var))
        else:
            raise UnsupportedFormula(f"unsupported connective {type(g).__name__}")

    def expand(s: FinStructure) -> FinStructure:
        if s.signature != sig:
            raise ValueError("structure signature does not match the expansion base")
        elems = s.elements
        tables = {n: set(t) for n, t in s.explicit_tables().items()}
        current = FinStructure(new_sig, elems, tables, check=False)
        for g in order:
            name = names[_atom_key(g)]
            out = set()
            if isinstance(g, Atom):
                base = s.table(g.rel)
                out = {t + (w,) for t in base for w in elems}
            elif isinstance(g, Eq):
                out = {(a, a, w) for a in elems for w in elems}
            else:
                fv = tuple(sorted(g.free_vars()))
                for values in product(elems, repeat=len(fv) + 1):
                    env = dict(zip(fv + (dummy,), values))
                    if _step(g, current, env, ratom, elems):
                        out.add(values)
            tables[name] = out
            current = FinStructure(new_sig, elems, tables, check=False)
        return current

    return Morleyization(new_sig, axioms, expand, names_by_formula)


def _step(g, current, env, ratom, elems) -> bool:
    """Truth of ``R[g]`` at ``env`` from the already computed tables of its parts."""
    if isinstance(g, Bottom):
        return False
    if isinstance(g, Top):
        return True
    if isinstance(g, Not):
        return not ratom(g.sub).evaluate(current, env)
    if isinstance(g, Or):
        return any(ratom(p).evaluate(current, env) for p in g.parts)
    if isinstance(g, And):
        return all(ratom(p).evaluate(current, env) for p in g.parts)
    if isinstance(g, Exists):
        inner = ratom(g.body)
        e2 = dict(env)
        for y in elems:
            e2[g.var] = y
            if inner.evaluate(current, e2):
                return True
        return False
    raise UnsupportedFormula(type(g).__name__)


def _atom_key(g):
    return ("atom", g.rel) if isinstance(g, Atom) else ("eq",) if isinstance(g, Eq) else g


def _atoms(g):
    if isinstance(g, Atom):
        yield g
    for c in g.children():
        yield from _atoms(c)


def _all_vars(g):
    if isinstance(g, Atom):
        yield from (a for a in g.args if isinstance(a, str))
    elif isinstance(g, Eq):
        yield from (a for a in (g.left, g.right) if isinstance(a, str))
    elif isinstance(g, Exists):
        yield g.var
    for c in g.children():
        yield from _all_vars(c)
