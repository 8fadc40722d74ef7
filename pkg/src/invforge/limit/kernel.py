"""Lazy pairwise type computation for limit stages.

All shipped classes have binary signatures, so the type of a tuple is fixed
by its equality pattern, the atoms on each pair and the per-element split
indices.  Pair data is computed by walking the substages backwards:

* the split (or language extension) at ``n.3`` acts on the ``n.2`` data,
* copies of one element made at ``n.2`` follow the class duplicate policy,
* elements new at ``n.0``/``n.1`` relate to older ones through their recorded
  witness pattern,
* everything else is stage ``n-1`` data.

Pair data is a frozenset of holding relation names for graph-like classes
and ``(distance, levels)`` for the metric class.
"""
from __future__ import annotations

from fractions import Fraction

from ..classes.metric import pair_rank, smallest_positive, top_threshold
from ..structures import FinStructure, pair_key
from ..types import QfType

CACHE_LIMIT = 500_000


class StageConstants:
    """Per-stage data the pair recursion needs over and over."""

    def __init__(self, rec, metric):
        self.dup = frozenset()
        self.unknown = ()
        if not metric:
            return
        sig = rec.sig_before
        floors = tuple(f.get("floor") for f in sig.metric_families())
        self.unknown = ("?",) * len(floors)
        self.dup = (smallest_positive(sig), floors if floors else None)
        self.cap = 2 * top_threshold(sig)
        if rec.split_consts is not None:
            eta, delta, bits, _floor, _ceil, denom = rec.split_consts
            # every term of the perturbation is an integer multiple of 1/denom
            self.denom = denom
            self.eta_n = int(eta * denom)
            self.delta_n = int(delta * denom)
            if Fraction(self.eta_n, denom) != eta or Fraction(self.delta_n, denom) != delta \
                    or denom % (1 << bits):
                raise AssertionError("split constants do not share the denominator")
            self.step_n = self.delta_n >> bits

    def perturb(self, d, rank):
        d = Fraction(d)
        num, den = d.numerator, d.denominator
        if self.denom % den:
            raise AssertionError("distance outside the split lattice")
        scaled = num * (self.denom // den)
        shrink = num * self.eta_n
        if shrink % den:
            raise AssertionError("distance outside the split lattice")
        return Fraction(scaled - shrink // den + self.delta_n + self.step_n * rank, self.denom)


class TypeKernel:
    def __init__(self, stage):
        self.stage = stage
        self.metric = stage.metric
        self.cache = {}
        self.consts = {}

    # -- per-stage constants -----------------------------------------------------
    def _consts(self, rec):
        c = self.consts.get(rec.n)
        if c is None:
            c = self.consts[rec.n] = StageConstants(rec, self.metric)
        return c

    def dup_info(self, rec):
        """Pair data of two copies of one element made at substage ``n.2``."""
        return self._consts(rec).dup

    # -- pair data ---------------------------------------------------------------------
    def _memo(self, key, fn):
        val = self.cache.get(key)
        if val is None:
            if len(self.cache) > CACHE_LIMIT:
                self.cache.clear()
            val = fn()
            self.cache[key] = val
        return val

    def info_final(self, n, x, y):
        """Pair data of distinct addresses ``x``, ``y`` of the complete stage ``n``."""
        if y < x:
            x, y = y, x
        return self._memo(("f", n, x, y), lambda: self._info_final(n, x, y))

    def _info_final(self, n, x, y):
        rec = self.stage.records[n]
        p, q = x[:-1], y[:-1]
        base = self.dup_info(rec) if p == q else self.info2(n, p, q)
        if rec.case != "b" or not self.metric:
            return base
        d, lev = base
        c = self._consts(rec)
        v = c.perturb(d, pair_rank(self.stage.rank(n, x), self.stage.rank(n, y), rec.size))
        return (v, (lev if lev is not None else c.unknown) + (v,))

    def info2(self, n, p, q):
        """Pair data at substage ``n.2`` (addresses of length ``2n-1``)."""
        rec = self.stage.records[n]
        u, v = p[:-1], q[:-1]
        if u == v:
            return self.dup_info(rec)
        base = self.info1(n, u, v)
        if self.metric:
            d, lev = base
            c = self._consts(rec)
            if not c.unknown:
                return (d, None)
            return (d, c.unknown if lev is None else lev)
        return base

    def info1(self, n, u, v):
        """Pair data after substage ``n.1`` (addresses of length ``2n-2``)."""
        if v < u:
            u, v = v, u
        return self._memo(("1", n, u, v), lambda: self._info1(n, u, v))

    def _info1(self, n, u, v):
        rec = self.stage.records[n]
        iu, iv = self.stage.new_index(n, u), self.stage.new_index(n, v)
        if iu is None and iv is None:
            return self.info_final(n - 1, u, v)
        if iu is None or (iv is not None and iv > iu):
            u, v, iu, iv = v, u, iv, iu
        return self.new_info(n, rec.new[iu], v)

    def new_info(self, n, e, z):
        """Pair data between the new element ``e`` and an element ``z`` present before it."""
        rec = self.stage.records[n]
        if not self.metric:
            return frozenset(r for r, anchors in (e.pattern or {}).items() if z in anchors)
        pattern = e.pattern or {}
        if z in pattern:
            return (pattern[z], None)
        cap = self._consts(rec).cap
        via = [u + self.info1(n, a, z)[0] if a != z else u for a, u in pattern.items()]
        return (min([cap] + via), None)

    # -- structures ------------------------------------------------------------------------
    def _structure(self, sig, labels, pair, split_of):
        distinct = list(dict.fromkeys(labels))
        k = len(labels)
        first = [labels.index(x) for x in labels]
        rels = {r.name: set() for r in sig.relations}
        dist = {} if self.metric else None
        lev = {} if self.metric else None
        for i in range(k):
            for j in range(i + 1, k):
                if first[i] == first[j]:
                    if self.metric:
                        dist[pair_key(i, j)] = 0
                    continue
                info = pair(labels[i], labels[j])
                if self.metric:
                    dist[pair_key(i, j)] = info[0]
                    if info[1] is not None:
                        lev[pair_key(i, j)] = info[1]
                else:
                    for name in info:
                        rels[name].add((i, j))
                        rels[name].add((j, i))
        split = {}
        per = {x: split_of(x) for x in distinct}
        for i, x in enumerate(labels):
            for fid, idx in per[x].items():
                split.setdefault(fid, {})[i] = idx
        if self.metric:
            rels = {}
        if self.metric and not lev:
            lev = None
        s = FinStructure(sig, range(k), rels, split, dist, lev, check=False)
        return s, tuple(first)

    def local_structure(self, addrs, level=1):
        """Structure on the distinct ``addrs`` of the stage in progress, after substage ``n.1``."""
        stage = self.stage
        n = stage.n
        rec = stage.record
        addrs = list(dict.fromkeys(addrs))
        s, _ = self._structure(rec.sig_before, addrs, lambda a, b: self.info1(n, a, b),
                               stage.split_index_of)
        return s.relabel(lambda i: addrs[i])

    def address_type(self, addrs) -> QfType:
        stage = self.stage
        n = stage.n
        if not stage.complete:
            raise ValueError("address_type needs a complete stage")
        addrs = [tuple(a) for a in addrs]
        for a in dict.fromkeys(addrs):
            stage.decode(a)
        s, first = self._structure(stage.record.sig, addrs,
                                   lambda a, b: self.info_final(n, a, b), stage.split_index_of)
        return QfType(s, first)


def address_type(stage, addrs) -> QfType:
    return stage.kernel.address_type(addrs)
