"""Brute-force reference checks, written independently of the code under test."""
from __future__ import annotations

from fractions import Fraction
from itertools import combinations, permutations, product

from invforge.formulas import Atom

from invforge.types import restrict_language, restrict_vars


def brute_density(f, g, rel="E"):
    """Fraction of vertex maps preserving the relation and its complement."""
    good = 0
    fv, gv = list(f.elements), list(g.elements)
    for img in product(gv, repeat=len(fv)):
        h = dict(zip(fv, img))
        if all(f.holds(rel, (a, b)) == g.holds(rel, (h[a], h[b])) for a in fv for b in fv):
            good += 1
    return Fraction(good, len(gv) ** len(fv))


def schema_failures(elements, holds, thresholds):
    """Failures of reflexivity, symmetry, monotonicity and the triangle schema.

    ``holds(q, a, b)`` decides ``d_q(a, b)``.  The triangle schema is checked
    for every listed threshold ``t >= q + r``.
    """
    ts = sorted(thresholds)
    out = []
    for x in elements:
        if 0 in ts and not holds(0, x, x):
            out.append(("reflexive", x))
    for q in ts:
        for a, b in product(elements, repeat=2):
            if holds(q, a, b) != holds(q, b, a):
                out.append(("symmetric", q, a, b))
    for q, r in zip(ts, ts[1:]):
        for a, b in product(elements, repeat=2):
            if holds(q, a, b) and not holds(r, a, b):
                out.append(("monotone", q, r, a, b))
    for x, y, z in product(elements, repeat=3):
        for q in ts:
            if not holds(q, x, y):
                continue
            for r in ts:
                if not holds(r, y, z):
                    continue
                for t in ts:
                    if t >= q + r and not holds(t, x, z):
                        out.append(("triangle", q, r, t, x, y, z))
    return out


def one_per_variable(copies):
    """Every choice of one copy for each original variable."""
    return product(*copies)


def duplicate_law_holds(q, dup, multiplicities):
    copies, nxt = [], 0
    for m in multiplicities:
        copies.append(range(nxt, nxt + m))
        nxt += m
    if dup.var_count != nxt or not dup.non_redundant:
        return False
    return all(restrict_vars(dup, sel) == q for sel in one_per_variable(copies))


def split_law_failures(q, split, order=2):
    """Restriction and distinctness failures of a split type (copy ``b`` of ``i`` is ``2i+b``)."""
    k = q.var_count
    keep = range(q.signature.layers)
    out = []
    for sel in one_per_variable([(2 * i, 2 * i + 1) for i in range(k)]):
        if restrict_language(restrict_vars(split, sel), keep) != q:
            out.append(("restriction", sel))
    subs = list(permutations(range(2 * k), order))
    types = {t: restrict_vars(split, t) for t in subs}
    for a, b in combinations(subs, 2):
        if set(a) != set(b) and types[a] == types[b]:
            out.append(("same type", a, b))
    return out


def stage_mismatches(stage, materialized):
    """Differences between the lazily typed whole stage and a materialized one.

    Compares element order, every explicit relation table, Kaleidoscope split
    indices and (metric) all distances and family levels pair by pair.
    """
    s, order = materialized
    out = []
    if list(order) != list(stage.elements()):
        return ["element order differs"]
    lazy = stage.kernel.address_type(order).structure.relabel(lambda i: order[i])
    if s.signature != lazy.signature:
        return ["signature differs"]
    if s.distances is None:
        for r in s.signature.relations:
            if s.table(r.name) != lazy.table(r.name):
                out.append(("relation", r.name))
    else:
        for a, b in combinations(order, 2):
            if s.dist(a, b) != lazy.dist(a, b):
                out.append(("distance", a, b))
            if (s.levels or {}).get(frozenset((a, b))) != (lazy.levels or {}).get(frozenset((a, b))):
                out.append(("levels", a, b))
    for f in s.signature.kaleidoscope_families():
        if s.split_index.get(f.start) != lazy.split_index.get(f.start):
            out.append(("split index", f.start))
    return out


def expansion_agrees(m, s, formulas):
    """R_psi(a, w) <-> psi(a) for every tuple a and every w, by direct evaluation."""
    t = m.expand(s)
    for psi in formulas:
        name = m.relation_for(psi)
        if isinstance(psi, Atom):
            fv = psi.args
        else:
            fv = tuple(sorted(psi.free_vars()))
        for values in product(s.elements, repeat=len(fv)):
            truth = psi.evaluate(s, dict(zip(fv, values)))
            for w in s.elements:
                if t.holds(name, values + (w,)) != truth:
                    return False
    return True
