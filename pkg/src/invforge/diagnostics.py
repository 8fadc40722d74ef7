"""Monte Carlo diagnostics for staged constructions.

Sampling is with replacement: ``k`` indices get independent uniform elements
of the source, and a relation holds of indices iff it holds of their
elements.  Sources are finite structures or lazy toy stages.  Trials run in
blocks of ``BLOCK`` with one ``random.Random`` per block seeded from
``(seed, tag, block)``, so results do not depend on the worker count.
"""
from __future__ import annotations

import math
import os
from collections import Counter
from fractions import Fraction
from itertools import combinations, product
from multiprocessing import Pool
from random import Random
from typing import NamedTuple

from .errors import EmptySource
from .formulas import Formula
from .structures import FinStructure, graph
from .types import QfType, qf_type_of

BLOCK = 2000


class McEstimate(NamedTuple):
    trials: int
    successes: int
    p_hat: float
    sigma: float

    @classmethod
    def of(cls, successes, trials):
        p = successes / trials
        return cls(trials, successes, p, math.sqrt(p * (1 - p) / trials))


class ReportRow(NamedTuple):
    run_id: str
    n: int
    quantity: str
    type_id: str
    estimate: float
    sigma: float
    bound: float
    passed: bool


def worker_count():
    try:
        return max(1, int(os.environ.get("INVFORGE_THREADS", "1")))
    except ValueError:
        return 1


def block_rng(seed, tag, block):
    return Random(f"{seed}:{tag}:{block}")


def _blocks(trials):
    return [(b, min(BLOCK, trials - b * BLOCK)) for b in range((trials + BLOCK - 1) // BLOCK)]


def run_blocks(fn, payload, trials, seed, tag):
    """Apply ``fn(payload, rng, size)`` per block and return the list of results in block order."""
    jobs = [(fn, payload, seed, tag, b, size) for b, size in _blocks(trials)]
    workers = min(worker_count(), len(jobs))
    if workers > 1:
        with Pool(workers) as pool:
            return pool.map(_run_job, jobs)
    return [_run_job(j) for j in jobs]


def _run_job(job):
    fn, payload, seed, tag, b, size = job
    return fn(payload, block_rng(seed, tag, b), size)


# -- sources --------------------------------------------------------------------
def _draw(g, rng, k):
    if isinstance(g, FinStructure):
        if not len(g):
            raise EmptySource("cannot sample from an empty structure")
        elems = g.elements
        return [elems[rng.randrange(len(elems))] for _ in range(k)]
    return g.sample_elements(rng, k)


def _edge_relation(g):
    if isinstance(g, FinStructure):
        return g.signature.relations[0].name
    return g.construction.rel


def _adjacent(g, rel, a, b):
    if isinstance(g, FinStructure):
        return g.holds(rel, (a, b))
    return g.adjacent(a, b)


def _pullback(g, xs):
    """Structure on ``0..k-1`` pulled back along the sampled elements."""
    k = len(xs)
    if isinstance(g, FinStructure):
        rels = {}
        for r in g.signature.relations:
            rels[r.name] = {t for t in product(range(k), repeat=r.arity)
                            if g.holds(r.name, tuple(xs[i] for i in t))}
        return FinStructure(g.signature, range(k), rels, check=False)
    rel = _edge_relation(g)
    edges = [(i, j) for i, j in combinations(range(k), 2) if g.adjacent(xs[i], xs[j])]
    return FinStructure(g.construction.seed.signature, range(k),
                        {rel: {e for i, j in edges for e in ((i, j), (j, i))}}, check=False)


def sample_GNG(g, k: int, rng_seed) -> FinStructure:
    """``k`` indices sampled uniformly with replacement from ``g``."""
    rng = rng_seed if isinstance(rng_seed, Random) else Random(rng_seed)
    if k == 0:
        sig = g.signature if isinstance(g, FinStructure) else g.construction.seed.signature
        if isinstance(g, FinStructure) and not len(g):
            raise EmptySource("cannot sample from an empty structure")
        return FinStructure(sig, [], {})
    return _pullback(g, _draw(g, rng, k))


def _event_block(payload, rng, size):
    g, event, k = payload
    hits = 0
    env = {f"x{i}": i for i in range(k)}
    labels = list(range(k))
    for _ in range(size):
        s = _pullback(g, _draw(g, rng, k))
        if isinstance(event, QfType):
            hits += qf_type_of(s, labels) == event
        else:
            hits += bool(event.evaluate(s, env))
    return hits


def mc_estimate(g, event, trials: int, seed, k=None) -> McEstimate:
    """Frequency of ``event`` on ``k`` sampled indices (``k`` defaults to the type's arity)."""
    if trials < 1:
        raise ValueError("trials must be positive")
    if k is None:
        if isinstance(event, QfType):
            k = event.var_count
        elif isinstance(event, Formula):
            k = len(event.free_vars())
        else:
            raise TypeError("event must be a QfType or a formula")
    hits = sum(run_blocks(_event_block, (g, event, k), trials, seed, "event"))
    return McEstimate.of(hits, trials)


def erdos_renyi_baseline(k: int, p, seed) -> FinStructure:
    """Graph on ``0..k-1`` with each edge present independently with probability ``p``."""
    p = Fraction(p)
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    rng = Random(seed)
    edges = [(i, j) for i, j in combinations(range(k), 2)
             if rng.randrange(p.denominator) < p.numerator]
    return graph(range(k), edges)


# -- delta: stage-to-stage drift of type frequencies -------------------------------
def edge_pattern(q: QfType):
    """The set of adjacent index pairs ``i<j`` of a graph type."""
    rel = q.signature.relations[0].name
    return frozenset((i, j) for i, j in q.structure.table(rel) if i < j)


def graph_type_catalog(max_vars=3, rel="E"):
    """All types of ``1..max_vars`` distinct vertices for a single symmetric relation."""
    out = []
    for k in range(1, max_vars + 1):
        pairs = list(combinations(range(k), 2))
        for mask in range(1 << len(pairs)):
            edges = [p for b, p in enumerate(pairs) if mask >> b & 1]
            out.append(qf_type_of(graph(range(k), edges), range(k)))
    return out


def type_id(q: QfType):
    edges = sorted(edge_pattern(q))
    return f"l{q.var_count}:" + (",".join(f"{i}{j}" for i, j in edges) or "-")


def _pattern_block(payload, rng, size):
    g, k = payload
    rel = _edge_relation(g)
    tally = Counter()
    pairs = list(combinations(range(k), 2))
    for _ in range(size):
        xs = _draw(g, rng, k)
        adj = {p for p in pairs if _adjacent(g, rel, xs[p[0]], xs[p[1]])}
        for ell in range(1, k + 1):
            tally[(ell, frozenset(p for p in adj if p[1] < ell))] += 1
    return tally


def pattern_frequencies(g, k, trials, seed, tag):
    tally = Counter()
    for part in run_blocks(_pattern_block, (g, k), trials, seed, tag):
        tally.update(part)
    return tally


def delta_bound(ell, n):
    """Drift bound for ``ell``-variable types between stages ``n`` and ``n+1``."""
    return ell * 2.0 ** (-n)


def delta_report(stages, type_catalog=None, trials=10_000, seed=0, run_id="toy"):
    if len(stages) < 2:
        raise ValueError("delta_report needs at least two stages")
    catalog = type_catalog if type_catalog is not None else graph_type_catalog(3)
    k = max(q.var_count for q in catalog)
    est = []
    for n, g in enumerate(stages):
        tally = pattern_frequencies(g, k, trials, seed, "delta")
        est.append({q: McEstimate.of(tally[(q.var_count, edge_pattern(q))], trials) for q in catalog})
    rows = []
    for n in range(len(stages) - 1):
        for q in catalog:
            a, b = est[n][q], est[n + 1][q]
            d = abs(a.p_hat - b.p_hat)
            sigma = a.sigma + b.sigma
            bound = delta_bound(q.var_count, n)
            rows.append(ReportRow(run_id, n + 1, "delta", type_id(q), d, sigma, bound,
                                  d <= bound + 3 * sigma))
    return rows


# -- gamma: extension axioms in the sampled structure -----------------------------
def gamma_bound(ell, zeta):
    """``(1 - ell * 2^-(zeta-1))^2`` clipped at zero, or 0 without a prior occurrence."""
    if zeta is None:
        return 0.0
    base = 1 - ell * 2.0 ** (-(zeta - 1))
    return max(0.0, base) ** 2


def _premise(adj, tpl, xs):
    if tpl.arity < 2:
        return True
    e = adj(xs[0], xs[1])
    return e if tpl.premise_edge else (not e)


def has_witness(stage, tpl, xs):
    """Whether the sampled indices satisfy the extension axiom of ``tpl`` in the sample.

    Decided exactly: the premise fails, or some element of the stage (possibly
    one of the sampled ones, drawn again at a later index) has the demanded
    adjacency to ``xs``.
    """
    c = stage.construction
    if not _premise(c.adjacent, tpl, xs):
        return True
    wanted = [i in tpl.neighbours for i in range(tpl.arity)]
    return c.pattern_count(stage.n, list(xs), wanted) > 0


def _gamma_block(payload, rng, size):
    stage, tpls = payload
    k = max([t.arity for t in tpls] + [1])
    hits = Counter()
    for _ in range(size):
        xs = stage.sample_elements(rng, k)
        for idx, tpl in enumerate(tpls):
            a = xs[:tpl.arity]
            hits[("gamma", idx)] += has_witness(stage, tpl, a)
            hits[("distinct", idx)] += len(set(a)) == len(a)
    return hits


def gamma_report(stages, schedule, trials=10_000, seed=0, max_item=6, run_id="toy"):
    """Rows ``(n, j)`` for schedule items ``j <= max_item`` and stages ``n >= j``."""
    last = stages[-1].n
    items = list(range(1, min(max_item, last) + 1))
    tpls = [schedule.item(j) for j in items]
    rows = []
    for st in stages:
        if st.n < 1:
            continue
        hits = Counter()
        for part in run_blocks(_gamma_block, (st, tpls), trials, seed, f"gamma:{st.n}"):
            hits.update(part)
        for idx, j in enumerate(items):
            if st.n < j:
                continue
            tpl = tpls[idx]
            g = McEstimate.of(hits[("gamma", idx)], trials)
            f = McEstimate.of(hits[("distinct", idx)], trials)
            factor = gamma_bound(tpl.arity, schedule.last_occurrence(st.n, j))
            bound = factor * f.p_hat
            sigma = g.sigma + factor * f.sigma
            rows.append(ReportRow(run_id, st.n, "gamma", f"j{j}:{tpl.name}", g.p_hat, sigma,
                                  bound, g.p_hat >= bound - 3 * sigma))
    return rows


def very_comb_check(c, k, tol=1e-9):
    """Compare ``prod_{i>=k} (1 - c 2^-i)`` with ``(1 - c 2^-k)^2`` for ``0 < c < 2^k``.

    The product is truncated once the next factor differs from 1 by less than ``tol``.
    """
    if not 0 < c < 2 ** k:
        raise ValueError("need 0 < c < 2^k")
    prod, i = 1.0, k
    while c * 2.0 ** (-i) >= tol:
        prod *= 1 - c * 2.0 ** (-i)
        i += 1
    bound = (1 - c * 2.0 ** (-k)) ** 2
    return prod, bound, prod >= bound
