"""Threshold-encoded rational metric spaces.

Relation ``d[q]`` holds of ``(x, y)`` when the distance is at most ``q``.
Structures produced by the class carry an exact distance realization, and
every threshold relation is read off it.  Structures given only by tables
are realized through the shortest-path completion ``complete_to_TMS``.
"""
from __future__ import annotations

import math
from fractions import Fraction
from itertools import combinations, product

from ..errors import BadEmbedding, NotAMetricModel, SignatureMismatch, UnsatisfiableDemand
from ..formulas import And, Atom, Eq, Not, Top, conj
from ..structures import (FinStructure, LayerFamily, Signature, pair_key, parse_threshold_name,
                          threshold_name)
from ..types import QfType, induced_substructure
from .base import AmalgamationClass, ExtensionTemplate


def threshold_sequence():
    """0, then every positive rational once (Calkin-Wilf order)."""
    yield Fraction(0)
    q = Fraction(1)
    while True:
        yield q
        q = 1 / (2 * math.floor(q) - q + 1)


def first_thresholds(count):
    out = []
    for q in threshold_sequence():
        if len(out) == count:
            return out
        out.append(q)
    return out


class MetricThresholds:
    """Strictly increasing rationals starting at 0 with at least one positive value."""

    def __init__(self, values):
        vals = [Fraction(v) for v in values]
        if not vals or vals[0] != 0 or len(vals) < 2:
            raise ValueError("thresholds must start at 0 and contain a positive value")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("thresholds must be strictly increasing")
        self.values = vals

    @property
    def top(self):
        return self.values[-1]

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)

    def __repr__(self):
        return f"MetricThresholds({[str(v) for v in self.values]})"


class RationalMetricSpace:
    """Points ``0..size-1`` with exact positive distances satisfying the triangle inequality."""

    def __init__(self, size, dist):
        self.size = size
        self.dist = {}
        for key, v in dist.items():
            a, b = tuple(key) if not isinstance(key, tuple) else key
            self.dist[pair_key(a, b)] = Fraction(v)
        for a, b in combinations(range(size), 2):
            v = self.dist.get(pair_key(a, b))
            if v is None or v <= 0:
                raise ValueError(f"distance between {a} and {b} must be positive")
        for a, b, c in product(range(size), repeat=3):
            if len({a, b, c}) == 3 and self.d(a, c) > self.d(a, b) + self.d(b, c):
                raise ValueError(f"triangle inequality fails on {(a, b, c)}")

    def d(self, a, b):
        return Fraction(0) if a == b else self.dist[pair_key(a, b)]


def threshold_signature(thresholds) -> Signature:
    vals = list(thresholds)
    return Signature([(threshold_name(t), 2, i) for i, t in enumerate(vals)], len(vals))


def metric_to_structure(m: RationalMetricSpace, t) -> FinStructure:
    vals = list(t)
    rels = {}
    for q in vals:
        rels[threshold_name(q)] = {(a, b) for a in range(m.size) for b in range(m.size)
                                   if m.d(a, b) <= q}
    return FinStructure(threshold_signature(vals), range(m.size), rels)


def explicit_thresholds(sig: Signature):
    out = []
    for r in sig.relations:
        t = parse_threshold_name(r.name)
        if t is not None:
            out.append(t)
    return sorted(out)


def top_threshold(sig: Signature):
    vals = explicit_thresholds(sig) + [f.get("ceil") for f in sig.metric_families()]
    return max(vals)


def smallest_positive(sig: Signature):
    vals = [t for t in explicit_thresholds(sig) if t > 0]
    vals += [f.get("floor") for f in sig.metric_families()]
    return min(vals)


def _schema_violations(s: FinStructure, thresholds):
    """Violations of the four metric schemata on the explicit thresholds of ``s``."""
    out = []
    elems = s.elements
    holds = {q: s.table(threshold_name(q)) for q in thresholds}
    for x in elems:
        if (x, x) not in holds[thresholds[0]] and thresholds[0] == 0:
            out.append(f"reflexivity: not d[0]({x},{x})")
    for q in thresholds:
        for a, b in holds[q]:
            if (b, a) not in holds[q]:
                out.append(f"symmetry: d[{q}]({a},{b}) without d[{q}]({b},{a})")
    for q, r in zip(thresholds, thresholds[1:]):
        missing = holds[q] - holds[r]
        out.extend(f"monotonicity: d[{q}]({a},{b}) but not d[{r}]" for a, b in missing)
    least = {}
    for q in thresholds:
        for pair in holds[q]:
            least.setdefault(pair, q)
    for (x, y), q in least.items():
        for z in elems:
            r = least.get((y, z))
            if r is None:
                continue
            for t in thresholds:
                if t >= q + r and (x, z) not in holds[t]:
                    out.append(f"triangle: ({x},{y},{z}) d[{q}], d[{r}] but not d[{t}]")
                    break
    return out


def structure_to_metric(n: FinStructure):
    """Least threshold holding on each ordered pair, or ``math.inf``."""
    thresholds = explicit_thresholds(n.signature)
    bad = _schema_violations(n, thresholds)
    if bad:
        raise NotAMetricModel(bad[0])
    out = {}
    for a in n.elements:
        for b in n.elements:
            out[(a, b)] = next((q for q in thresholds if n.holds(threshold_name(q), (a, b))),
                               math.inf)
    return out


class TMSCompletion:
    """Shortest-path distance ``delta`` extending a finite threshold structure."""

    def __init__(self, elements, delta):
        self.elements = tuple(elements)
        self.delta = delta

    def distance(self, a, b):
        return Fraction(0) if a == b else self.delta[pair_key(a, b)]

    def holds(self, q, a, b) -> bool:
        return self.distance(a, b) <= Fraction(q)

    def __call__(self, q):
        """Relation set of ``d[q]`` for any rational ``q``."""
        return {(a, b) for a in self.elements for b in self.elements if self.holds(q, a, b)}

    def structure(self, thresholds) -> FinStructure:
        vals = list(thresholds)
        return FinStructure(threshold_signature(vals), self.elements,
                            {threshold_name(q): self(q) for q in vals})


def complete_to_TMS(n: FinStructure) -> TMSCompletion:
    thresholds = explicit_thresholds(n.signature)
    bad = _schema_violations(n, thresholds)
    if bad:
        raise NotAMetricModel(bad[0])
    p = max(thresholds)
    elems = list(n.elements)
    idx = {x: i for i, x in enumerate(elems)}
    k = len(elems)
    d = [[Fraction(0)] * k for _ in range(k)]
    for i, a in enumerate(elems):
        for j, b in enumerate(elems):
            if i != j:
                held = [q for q in thresholds if n.holds(threshold_name(q), (a, b))]
                d[i][j] = min([2 * p] + held)
    for m in range(k):
        dm = d[m]
        for i in range(k):
            dim = d[i][m]
            row = d[i]
            for j in range(k):
                v = dim + dm[j]
                if v < row[j]:
                    row[j] = v
    delta = {pair_key(a, b): d[idx[a]][idx[b]] for a, b in combinations(elems, 2)}
    return TMSCompletion(elems, delta)


def _intervals(thresholds, cap):
    """Candidate distance intervals as (lower, upper, lower_closed)."""
    out = [(Fraction(0), Fraction(0), True)]
    for lo, hi in zip(thresholds, thresholds[1:]):
        out.append((lo, hi, False))
    out.append((thresholds[-1], cap, False))
    return out


def _pow2_at_least(x):
    m = 1
    while m < x:
        m *= 2
    return Fraction(m)


def pair_rank(a, b, width):
    """Lexicographic rank of the unordered pair {a, b} among pairs below ``width``."""
    a, b = min(a, b), max(a, b)
    return a * width - a * (a + 1) // 2 + (b - a - 1)


def split_parameters(sig, distances, width):
    """Exact perturbation constants shared by the eager and lazy split routes."""
    denoms = [t.denominator for t in explicit_thresholds(sig)]
    denoms += [f.get("denom") for f in sig.metric_families()]
    denoms += [v.denominator for v in distances]
    D = math.lcm(*denoms)
    p = top_threshold(sig)
    M = _pow2_at_least(max([2 * p] + list(distances)))
    s = smallest_positive(sig)
    lower = min([s] + [v for v in distances if v > 0])
    return {"D": D, "M": M, "lower": lower, "p": p, "width": width}


def split_constants(params):
    D, M, width = params["D"], params["M"], params["width"]
    eta = Fraction(1, 4 * D) / M
    delta = eta / (2 * D)
    pairs = width * (width - 1) // 2
    bits = max(1, (pairs - 1).bit_length()) if pairs > 1 else 1
    floor = (1 - eta) * params["lower"]
    ceil = 2 * params["p"]
    new_denom = 8 * D * D * int(M) * (1 << bits)
    return eta, delta, bits, floor, ceil, new_denom


def perturb(d, eta, delta, bits, rank):
    return (1 - eta) * d + delta * (1 + Fraction(rank, 1 << bits))


class MetricClass(AmalgamationClass):
    """Finite metric spaces seen through threshold relations.

    Policies: a witness sits at the largest feasible distance (capped at 2p)
    from everything the demand leaves free; duplicates sit at the smallest
    positive threshold; new thresholds are read off the realized distances;
    splitting perturbs every distance into a distinct value and adds those
    values as a new family of thresholds.
    """

    name = "metric"
    declared_splitting_order = 2

    def signature_at(self, layers):
        return threshold_signature(first_thresholds(max(layers, 2)))

    def check_signature(self, s):
        for r in s.signature.relations:
            if parse_threshold_name(r.name) is None or r.arity != 2:
                raise SignatureMismatch(f"relation {r.name!r} is not a distance threshold")

    # -- realizations ------------------------------------------------------
    def realize(self, s: FinStructure):
        """Distance dict for ``s`` (its own, or the shortest-path completion)."""
        if s.distances is not None:
            return s.distances
        return complete_to_TMS(s).delta

    def realized(self, s: FinStructure) -> FinStructure:
        if s.distances is not None:
            return s
        return FinStructure(s.signature, s.elements, {}, s.split_index, self.realize(s),
                            check=False)

    def violations(self, s):
        self.check_signature(s)
        if s.distances is None:
            return _schema_violations(s, explicit_thresholds(s.signature))
        out = []
        elems = s.elements
        for a, b in combinations(elems, 2):
            if s.dist(a, b) < 0:
                out.append(f"negative distance on ({a},{b})")
        for a, b, c in product(elems, repeat=3):
            if a != c and b not in (a, c) and s.dist(a, c) > s.dist(a, b) + s.dist(b, c):
                out.append(f"triangle: ({a},{b},{c})")
        return out

    # -- strong amalgamation ----------------------------------------------------
    def strong_amalgam(self, m, n, over):
        if not (m.signature == n.signature == over.signature):
            raise SignatureMismatch("amalgam needs a shared signature")
        self.require_in_age(m, n, over)
        mr, nr = self.realized(m), self.realized(n)
        shared = list(over.elements)
        for side in (m, n):
            if not all(x in side for x in shared):
                raise BadEmbedding("shared part is not contained in both structures")
            if induced_substructure(side, shared).explicit_tables() != over.explicit_tables():
                raise BadEmbedding("shared part does not embed as an induced substructure")
        for a, b in combinations(shared, 2):
            if mr.dist(a, b) != nr.dist(a, b):
                raise BadEmbedding("realized distances disagree on the shared part")
        from .base import strong_amalgam_labels
        rename = strong_amalgam_labels(m, n, over)
        left = [x for x in m.elements if x not in over]
        right = [x for x in n.elements if x not in over]
        dist = dict(mr.distances)
        for a, b in combinations(n.elements, 2):
            dist[pair_key(rename[a], rename[b])] = nr.dist(a, b)
        p = top_threshold(m.signature)
        far = max([2 * p] + list(mr.distances.values()) + list(nr.distances.values()))
        for x in left:
            for y in right:
                via = [mr.dist(x, z) + nr.dist(z, y) for z in shared]
                dist[pair_key(x, rename[y])] = min(via) if via else far
        elems = list(m.elements) + [rename[y] for y in right]
        return FinStructure(m.signature, elems, {}, {}, dist, check=False)

    # -- witnesses ------------------------------------------------------------------
    def witness_pattern(self, s, tuple_, demand):
        """Distances from the fresh element to the distinct anchors (dict label -> rational)."""
        s = self.realized(s)
        sig = s.signature
        anchors = list(dict.fromkeys(tuple_))
        thresholds = explicit_thresholds(sig)
        cap = 2 * top_threshold(sig)
        options = list(reversed(_intervals(thresholds, cap)))
        local = induced_substructure(s, anchors)
        y = ("witness",)
        env = {f"x{i}": v for i, v in enumerate(tuple_)}
        env["y"] = y
        for choice in product(options, repeat=len(anchors)):
            u = {a: iv[1] for a, iv in zip(anchors, choice)}
            relaxed = {a: min(u[b] + local.dist(b, a) for b in anchors) for a in anchors}
            ok = True
            for a, (lo, hi, closed) in zip(anchors, choice):
                v = relaxed[a]
                if (closed and v != lo) or (not closed and v <= lo):
                    ok = False
                    break
            if not ok:
                continue
            if any(relaxed[a] + relaxed[b] < local.dist(a, b) for a, b in combinations(anchors, 2)):
                continue
            cand = self._add_element(local, y, relaxed, cap)
            if demand.evaluate(cand, env):
                return relaxed
        raise UnsatisfiableDemand(f"no fresh point satisfies {demand!r} over {tuple(tuple_)!r}")

    def _add_element(self, s, label, pattern, cap):
        dist = dict(s.distances)
        for z in s.elements:
            if z in pattern:
                v = pattern[z]
            else:
                v = min([cap] + [u + s.dist(a, z) for a, u in pattern.items()])
            dist[pair_key(label, z)] = v
        return FinStructure(s.signature, list(s.elements) + [label], {}, s.split_index, dist,
                            s.levels, check=False)

    def canonical_witness(self, s, tuple_, demand, label=None):
        s = self.realized(s)
        pattern = self.witness_pattern(s, tuple_, demand)
        label = self.fresh_label(s, label)
        return self._add_element(s, label, pattern, 2 * top_threshold(s.signature))

    # -- type constructors ---------------------------------------------------------
    def iterated_duplicate(self, q: QfType, multiplicities) -> QfType:
        from .graphs import _copy_table
        copies = _copy_table(q, multiplicities)
        s = self.realized(q.structure)
        sig = s.signature
        gap = smallest_positive(sig)
        floors = tuple(f.get("floor") for f in sig.metric_families())
        owner = {c: i for i, cs in enumerate(copies) for c in cs}
        total = len(owner)
        dist, levels = {}, {}
        for a, b in combinations(range(total), 2):
            i, j = owner[a], owner[b]
            key = pair_key(a, b)
            if i == j:
                others = [s.dist(i, z) for z in range(q.var_count) if z != i]
                dist[key] = min([gap] + [2 * v for v in others])
                levels[key] = floors
            else:
                dist[key] = s.dist(i, j)
                old = s.levels.get(pair_key(i, j)) if s.levels is not None else None
                levels[key] = old if old is not None else ("?",) * len(floors)
        split = {fid: {c: idx[i] for i in idx for c in copies[i]}
                 for fid, idx in s.split_index.items()}
        return QfType(FinStructure(sig, range(total), {}, split, dist,
                                   levels if floors else None, check=False))

    def extend_language(self, q: QfType, to_layers: int) -> QfType:
        sig = q.signature
        if to_layers < sig.layers:
            raise ValueError("extend_language cannot shrink the language")
        if to_layers == sig.layers:
            return q
        have = set(explicit_thresholds(sig))
        extra = []
        gen = threshold_sequence()
        for layer in range(sig.layers, to_layers):
            t = next(gen)
            while t in have:
                t = next(gen)
            have.add(t)
            extra.append((threshold_name(t), 2, layer))
        new_sig = Signature(sig.relations + tuple(extra), to_layers, sig.families)
        s = self.realized(q.structure)
        return QfType(FinStructure(new_sig, s.elements, {}, s.split_index, s.distances, s.levels,
                                   check=False), q.eq)

    def split_signature(self, sig, width, params):
        """Signature after adding a split family of ``width`` elements to ``sig``."""
        _eta, _delta, _bits, floor, ceil, new_denom = split_constants(params)
        fam = LayerFamily("metric", sig.layers, width * (width - 1) // 2 + 2,
                          (("floor", floor), ("ceil", ceil), ("denom", new_denom),
                           ("width", width)))
        return Signature(sig.relations, sig.layers + fam.count, sig.families + (fam,))

    def split_type(self, q: QfType, index_map=None, width=None, params=None):
        """Duplicate each variable twice and perturb all distances into distinct values.

        Variable ``2*i+b`` is copy ``b`` of variable ``i``.  The perturbation
        ``(1-eta)*d + delta*(1+c)`` keeps each distance inside its interval of
        every existing threshold; ``c`` encodes the rank of the pair of split
        indices so distinct pairs get distinct distances.  The new threshold
        family is the set of perturbed distances plus a floor and a ceiling.
        """
        self.require_splitting(q)
        k = q.var_count
        base = self.realized(q.structure)
        if any(base.dist(a, b) == 0 for a, b in combinations(range(k), 2)):
            raise ValueError("zero distances between distinct variables cannot be split")
        doubled = self.iterated_duplicate(QfType(base, q.eq), [2] * k).structure
        width = width if width is not None else 2 * k
        index = [index_map[v] if index_map is not None else v for v in range(2 * k)]
        if params is None:
            params = split_parameters(base.signature, list(doubled.distances.values()), width)
        eta, delta, bits, floor, ceil, new_denom = split_constants(params)
        sig = base.signature
        new_sig = self.split_signature(sig, width, params)
        dist, levels = {}, {}
        nfam = len(sig.metric_families())
        for a, b in combinations(range(2 * k), 2):
            key = pair_key(a, b)
            v = perturb(doubled.dist(a, b), eta, delta, bits, pair_rank(index[a], index[b], width))
            dist[key] = v
            old = doubled.levels.get(key) if doubled.levels is not None else None
            levels[key] = (old if old is not None else ("?",) * nfam) + (v,)
        split = dict(doubled.split_index)
        out = FinStructure(new_sig, range(2 * k), {}, split, dist, levels, check=False)
        return new_sig.layers, QfType(out)

    # -- schedules --------------------------------------------------------------
    def templates(self):
        one, zero = Fraction(1), Fraction(0)

        def near(x):
            return And([Atom(threshold_name(one), (x, "y")), Not(Atom(threshold_name(zero), (x, "y")))])

        def far(x):
            return Not(Atom(threshold_name(one), (x, "y")))

        close_pair = And([Not(Eq("x0", "x1")), Atom(threshold_name(one), ("x0", "x1")),
                          Not(Atom(threshold_name(zero), ("x0", "x1")))])
        far_pair = And([Not(Eq("x0", "x1")), Not(Atom(threshold_name(one), ("x0", "x1")))])
        out = [ExtensionTemplate("d:1:near", 1, Top(), near("x0")),
               ExtensionTemplate("d:1:far", 1, Top(), far("x0"))]
        for pname, prem, allowed in (("near", close_pair, ("nn", "nf", "fn", "ff")),
                                     ("far", far_pair, ("nf", "fn", "ff"))):
            for code in allowed:
                parts = [near(f"x{i}") if c == "n" else far(f"x{i}") for i, c in enumerate(code)]
                out.append(ExtensionTemplate(f"d:2:{pname}:{code}", 2, prem, conj(parts)))
        out.append(ExtensionTemplate("d:0:any", 0, Top(), Top()))
        return out
