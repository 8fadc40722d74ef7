"""Sampling the truncated invariant measure and checking the construction.

Addresses are drawn top-down through the mass tree: a root with probability
proportional to its base mass, then one duplicate coordinate and one split
bit per stage, each uniform because masses are divided evenly.
"""
from __future__ import annotations

import json
import math
from fractions import Fraction
from random import Random
from typing import NamedTuple

from ..diagnostics import McEstimate, ReportRow, run_blocks
from ..errors import NoSplittingDeclared
from ..structures import FinStructure, pair_key
from ..types import QfType
from .oracle import DEFAULT_CAP


class SampledStructure(NamedTuple):
    structure: FinStructure
    addresses: tuple
    collision_flag: bool


# -- drawing addresses -------------------------------------------------------------
class RootSampler:
    """Exact draw of a root with probability ``m*(root) / total``."""

    def __init__(self, stage):
        roots = sorted((r, t) for r, t in stage.roots().items() if t <= stage.n)
        masses = [stage.m_star(r) for r, _ in roots]
        denom = math.lcm(*(m.denominator for m in masses)) if masses else 1
        self.roots = roots
        self.weights = [int(m * denom) for m in masses]
        self.total = sum(self.weights)

    def draw(self, rng):
        x = rng.randrange(self.total)
        for (r, t), w in zip(self.roots, self.weights):
            if x < w:
                return r, t
            x -= w
        raise AssertionError("unreachable")


def draw_address(stage, rng, roots=None):
    roots = roots or RootSampler(stage)
    r, born = roots.draw(rng)
    addr = (r,) + (0,) * (2 * born - 3)
    for t in range(born, stage.n + 1):
        rec = stage.records[t]
        addr += (rng.randint(1, rec.lam), rng.randrange(rec.branches))
    return addr


def collision_structure(stage, k):
    """All atomic relations hold on all tuples (metric: every distance is 0)."""
    sig = stage.signature
    if stage.metric:
        dist = {pair_key(i, j): 0 for i in range(k) for j in range(i + 1, k)}
        return FinStructure(sig, range(k), {}, {}, dist, None, check=False)
    full = {(i, j) for i in range(k) for j in range(k)}
    return FinStructure(sig, range(k), {r.name: set(full) for r in sig.relations}, check=False)


def sample_invariant(stage, k, seed, roots=None) -> SampledStructure:
    """Draw ``k`` addresses i.i.d. from the normalized stage measure and their structure."""
    rng = seed if isinstance(seed, Random) else Random(seed)
    if k == 0:
        return SampledStructure(collision_structure(stage, 0), (), False)
    roots = roots or RootSampler(stage)
    addrs = tuple(draw_address(stage, rng, roots) for _ in range(k))
    if len(set(addrs)) < k:
        return SampledStructure(collision_structure(stage, k), addrs, True)
    q = stage.kernel.address_type(addrs)
    return SampledStructure(q.structure, addrs, False)


def type_token(stage, addrs):
    """Hashable type of distinct addresses (``"collision"`` when two coincide)."""
    if len(set(addrs)) < len(addrs):
        return "collision"
    return stage.kernel.address_type(addrs).canonical_key()


# -- verification suite ---------------------------------------------------------------
def _exact_row(run_id, n, quantity, value, bound, ok, type_id=""):
    return ReportRow(run_id, n, quantity, type_id, float(value), 0.0, float(bound), bool(ok))


def _fiber_ok(stage, parent, n):
    """Exact check that the children of ``parent`` at stage ``n`` carry its mass.

    Children without an override share one rule mass, so they are summed as a
    product; overridden children are added one by one.
    """
    rec = stage.records[n]
    count = rec.lam * rec.branches
    odd = [c for c in stage.mass_adjust if len(c) == len(parent) + 2 and c[:-2] == parent]
    total = sum((stage.mass_adjust[c] for c in odd), Fraction(0))
    total += (count - len(odd)) * stage.base_mass(parent + (1, 0))
    return total == stage.mass(parent)


def verify_suite(stages, run_id="limit", fibers=1000, seed=0, cap=DEFAULT_CAP):
    """Rows (i) mass preservation, (ii) atom halving, (iii) total mass, (iv) positivity."""
    if len(stages) < 2:
        raise ValueError("verify_suite needs at least two stages")
    rows = []
    rng = Random(f"{seed}:fibers")
    prev_total = Fraction(0)
    for i, s in enumerate(stages):
        n = s.n
        if i > 0:
            p = stages[i - 1]
            size = p.size
            if size == 0:
                ok, checked = True, 0
            elif size <= cap:
                parents = p.elements()
                ok = all(_fiber_ok(s, x, n) for x in parents)
                checked = len(parents)
            else:
                parents = [p.unrank(p.n, rng.randrange(size)) for _ in range(fibers)]
                ok = all(_fiber_ok(s, x, n) for x in parents)
                checked = len(parents)
            rows.append(_exact_row(run_id, n, "mass_preservation", checked, 0, ok, "fibers"))
            g_prev, g = p.max_atom(), s.max_atom()
            if g_prev > 0:
                rows.append(_exact_row(run_id, n, "atom_halving", g, g_prev / 2, g <= g_prev / 2))
        expected = sum((s.m_star(r) for r, t in s.roots().items() if t <= n), Fraction(0))
        if s.size <= cap:
            total = sum((s.mass(x) for x in s.elements()), Fraction(0))
            positive = all(s.mass(x) > 0 for x in s.elements())
        else:
            total = s.total_mass()
            positive = all(s.mass(s.unrank(n, rng.randrange(s.size))) > 0 for _ in range(fibers))
        ok = total == expected and prev_total <= total <= 1
        rows.append(_exact_row(run_id, n, "total_mass", total, expected, ok, "unassigned=%s" % (1 - total)))
        rows.append(_exact_row(run_id, n, "positive_mass", 1 if positive else 0, 1, positive))
        prev_total = total
    return rows


# -- eta decay -------------------------------------------------------------------------------
def eta_bound(ell, g):
    return 2.0 ** -g + (1 - 2.0 ** -ell) ** (g - ell)


def _eta_block(payload, rng, size):
    stage, depths, targets, ell = payload
    subs = [stage.truncate(g) if g != stage.n else stage for g in depths]
    samplers = [RootSampler(sub) for sub in subs]
    hits = [0] * len(depths)
    for _ in range(size):
        for i, (sub, roots) in enumerate(zip(subs, samplers)):
            addrs = [draw_address(sub, rng, roots) for _ in range(ell)]
            if type_token(sub, addrs) == targets[i]:
                hits[i] += 1
    return hits


def eta_target(stage, first_depth, seed, ell):
    """Seeded distinct ``ell``-tuple of the stage whose roots all exist by ``first_depth``."""
    rng = Random(f"{seed}:eta-target")
    roots = RootSampler(stage.truncate(first_depth))
    while True:
        tup = []
        for _ in range(ell):
            r, born = roots.draw(rng)
            addr = (r,) + (0,) * (2 * born - 3)
            for t in range(born, stage.n + 1):
                rec = stage.records[t]
                addr += (rng.randint(1, rec.lam), rng.randrange(rec.branches))
            tup.append(addr)
        if len(set(a[:2 * first_depth] for a in tup)) == ell:
            return tup


def eta_report(stage, depths, trials, seed, target=None, run_id="eta"):
    """Frequency with which a fresh tuple realizes a fixed type, restricted to each depth.

    ``stage`` is built to at least ``max(depths)``.  The target is the type of
    the distinct addresses ``target`` of the deepest stage (default: a seeded
    draw whose roots exist by the first depth), restricted to depth ``g`` by
    projecting the addresses.  Each depth draws its own fresh tuples from the
    normalized stage measure.
    """
    ell = stage.cls.declared_splitting_order
    if ell is None:
        raise NoSplittingDeclared(f"class {stage.cls.name} declares no splitting order")
    depths = sorted(depths)
    deep = stage.truncate(depths[-1]) if depths[-1] != stage.n else stage
    if target is None:
        target = eta_target(deep, depths[0], seed, ell)
    targets = [type_token(deep.truncate(g) if g != deep.n else deep, [a[:2 * g] for a in target])
               for g in depths]
    blocks = run_blocks(_eta_block, (deep, depths, targets, ell), trials, seed, "eta")
    rows = []
    for i, g in enumerate(depths):
        est = McEstimate.of(sum(b[i] for b in blocks), trials)
        bound = eta_bound(ell, g)
        rows.append(ReportRow(run_id, g, "eta", "target", est.p_hat, est.sigma, bound,
                              est.p_hat <= bound + 3 * est.sigma))
    return rows


# -- exchangeability -------------------------------------------------------------------------
def _exchange_block(payload, rng, size):
    stage, k = payload
    roots = RootSampler(stage)
    left, right = {}, {}
    for _ in range(size):
        addrs = [draw_address(stage, rng, roots) for _ in range(k)]
        a = type_token(stage, addrs[0:2])
        b = type_token(stage, addrs[2:4])
        left[a] = left.get(a, 0) + 1
        right[b] = right.get(b, 0) + 1
    return left, right


def exchangeability_report(stage, trials, seed, k=4, run_id="exchange", sigmas=4.0):
    """Compare the 2-type frequencies of positions (0,1) and (2,3) over ``trials`` samples."""
    if k < 4:
        raise ValueError("exchangeability needs k >= 4")
    left, right = {}, {}
    for lb, rb in run_blocks(_exchange_block, (stage, k), trials, seed, "exchange"):
        for src, dst in ((lb, left), (rb, right)):
            for key, c in src.items():
                dst[key] = dst.get(key, 0) + c
    names = {}
    rows = []
    for key in sorted(set(left) | set(right), key=lambda t: -(left.get(t, 0) + right.get(t, 0))):
        names[key] = f"t{len(names)}" if key != "collision" else "collision"
        a = McEstimate.of(left.get(key, 0), trials)
        b = McEstimate.of(right.get(key, 0), trials)
        sigma = math.sqrt(a.sigma ** 2 + b.sigma ** 2)
        diff = abs(a.p_hat - b.p_hat)
        rows.append(ReportRow(run_id, stage.n, "exchange_gap", names[key], diff, sigma,
                              sigmas * sigma, diff <= sigmas * sigma or diff == 0))
    return rows


# -- models proxy ----------------------------------------------------------------------------
def _model_block(payload, rng, size):
    stage, k, templates = payload
    roots = RootSampler(stage)
    tried = met = 0
    for _ in range(size):
        sample = sample_invariant(stage, k, rng, roots)
        if sample.collision_flag:
            continue
        s = sample.structure
        for tpl in templates:
            env = {f"x{i}": i for i in range(tpl.arity)}
            if not tpl.premise.evaluate(s, env):
                continue
            tried += 1
            if any(tpl.conclusion.evaluate(s, dict(env, y=y)) for y in range(tpl.arity, k)):
                met += 1
    return tried, met


def as_model_report(stage, depths, trials, seed, k=4, run_id="as_model"):
    """Fraction of premise-satisfying anchor tuples that have a witness among the other sampled points."""
    templates = [t for t in stage.cls.templates() if 0 < t.arity < k]
    rows = []
    for g in depths:
        sub = stage.truncate(g) if g != stage.n else stage
        blocks = run_blocks(_model_block, (sub, k, templates), trials, seed, f"model:{g}")
        tried = sum(b[0] for b in blocks)
        met = sum(b[1] for b in blocks)
        est = McEstimate.of(met, tried) if tried else McEstimate(0, 0, 0.0, 0.0)
        rows.append(ReportRow(run_id, g, "as_model", "in_sample", est.p_hat, est.sigma, 0.9,
                              est.p_hat >= 0.9))
    return rows


# -- serialization -----------------------------------------------------------------------------
def gen_log_lines(stage):
    return [json.dumps(item, sort_keys=True) for item in stage.gen_log()]


def write_gen_log(stage, path):
    with open(path, "w") as fh:
        for line in gen_log_lines(stage):
            fh.write(line + "\n")
