"""Inverse-limit stages: substages, masses, lazy types, sampling and the verification suite."""
from collections import Counter
from fractions import Fraction
from random import Random

import pytest

from invforge.classes import SHIPPED, get_class
from invforge.classes.graphs import GraphClass
from invforge.errors import ConstantsUnsupported, InvalidAddress, NoSplittingDeclared, StageBudgetExceeded
from invforge.limit import (LimitStage, build_limit, collision_probability, eta_bound, eta_report,
                            exchangeability_report, gen_log_lines, init_stages_01, lambda_min,
                            limit_schedule, m_star, materialize_stage, sample_invariant,
                            substage_add_mass, substage_add_witnesses, substage_duplicate,
                            substage_expand_split, verify_suite)
from invforge.limit.sampling import RootSampler, draw_address
from invforge.types import qf_type_of
from oracles import stage_mismatches

GRAPHS = get_class("graphs")
KALEIDOSCOPE = get_class("kaleidoscope:graphs")


@pytest.fixture(scope="module")
def graph_run():
    return build_limit(GRAPHS, 6, seed=0)


@pytest.fixture(scope="module")
def kaleidoscope_run():
    return build_limit(KALEIDOSCOPE, 4, seed=0)


# -- Lambda ------------------------------------------------------------------------------------
def test_lambda_examples():
    assert lambda_min(2) == 5 and lambda_min(3) == 24
    assert collision_probability(2, 5) == Fraction(1, 5)
    assert collision_probability(3, 24) == Fraction(70, 576)
    assert collision_probability(3, 23) == Fraction(67, 529) > Fraction(1, 8)
    values = [lambda_min(n) for n in range(2, 9)]
    assert values == [5, 24, 95, 317, 955, 2680, 7157]
    assert all(a < b for a, b in zip(values, values[1:]))
    with pytest.raises(ValueError):
        lambda_min(1)


def brute_collision(balls, boxes):
    """Collision probability by counting all placements."""
    from itertools import product
    total = clash = 0
    for placement in product(range(boxes), repeat=balls):
        total += 1
        clash += len(set(placement)) < balls
    return Fraction(clash, total)


def test_collision_probability_matches_counting():
    for balls in range(1, 4):
        for boxes in range(1, 7):
            assert collision_probability(balls, boxes) == brute_collision(balls, boxes)


# -- stages 0, 1 and the substages -----------------------------------------------------------------
def test_initial_stages():
    s = init_stages_01(GRAPHS)
    assert s.n == 1 and s.size == 0 and s.total_mass() == 0
    assert [r.alpha for r in s.records] == [0, 1]
    metric = init_stages_01(get_class("metric"))
    assert metric.alpha_n == 1 and metric.signature == get_class("metric").signature_at(2)


def test_constants_rejected():
    class WithConstants(GraphClass):
        constant_free = False
    with pytest.raises(ConstantsUnsupported):
        init_stages_01(WithConstants())


def test_stage2_substages():
    s = substage_add_mass(init_stages_01(GRAPHS))
    assert [e.address for e in s.record.new] == [(2, 0)]
    assert s.m_star(2) == Fraction(1, 8)
    s = substage_add_witnesses(s)
    witness = s.record.new[-1]
    assert witness.kind == "witness" and witness.root == 0 and witness.anchors == ((2, 0),)
    s = substage_duplicate(s)
    assert s.record.lam == 5
    s = substage_expand_split(s)
    assert s.record.case == "a" and s.size == 10
    assert s.mass((2, 0, 1, 0)) == Fraction(1, 40)
    assert s.alpha_n == 2


def test_mass_root_is_skipped_when_used(graph_run):
    stage3 = graph_run.truncate(3)
    assert 3 not in stage3.roots() or stage3.roots()[3] == 3
    s = substage_add_mass(graph_run.truncate(2))
    roots = graph_run.truncate(2).roots()
    if 3 in roots:
        assert s.record.new == ()


def test_invalid_template_is_identity():
    s = substage_add_mass(init_stages_01(KALEIDOSCOPE))
    schedule = limit_schedule(KALEIDOSCOPE)
    schedule.templates = [t for t in KALEIDOSCOPE.templates() if "E@1" in t.name]
    schedule.prefix = []
    after = substage_add_witnesses(s, schedule)
    assert after.record.new == s.record.new
    assert "not valid" in after.record.notes[0]


def test_split_case_halves_masses(kaleidoscope_run):
    s = kaleidoscope_run
    rec = s.records[2]
    assert rec.case == "b" and rec.branches == 2
    assert rec.sig.layers == rec.sig_before.layers + rec.family.count
    addr = (2, 0, 1, 0)
    assert s.truncate(2).mass(addr) == s.truncate(2).mass((2, 0, 1, 1)) == Fraction(1, 80)


def test_stage_sizes(graph_run, kaleidoscope_run):
    assert graph_run.sizes()[2:4] == [10, 288]
    assert kaleidoscope_run.sizes()[2:4] == [20, 1056]
    for rec in graph_run.records[2:]:
        assert rec.size == (rec.size_prev + len(rec.new)) * rec.lam * rec.branches


def test_every_stage_adds_a_root(graph_run):
    for rec in graph_run.records[2:]:
        assert rec.new


# -- addresses and masses ------------------------------------------------------------------------
def test_invalid_addresses(graph_run):
    s = graph_run.truncate(3)
    with pytest.raises(InvalidAddress):
        s.decode((2, 0, 1))
    with pytest.raises(InvalidAddress):
        s.decode((2, 0, 9, 0, 1, 0))
    with pytest.raises(InvalidAddress):
        s.decode((99, 0, 1, 0, 1, 0))
    with pytest.raises(InvalidAddress):
        s.decode((2, 1, 1, 0, 1, 0))


def test_rank_roundtrip(graph_run):
    s = graph_run.truncate(3)
    for r, addr in enumerate(s.elements()):
        assert s.rank(3, addr) == r and s.unrank(3, r) == addr


def test_exact_mass_bookkeeping(graph_run):
    s = graph_run.truncate(3)
    total = sum((s.mass(x) for x in s.elements()), Fraction(0))
    assert total == s.total_mass() == sum(m_star(r) for r in s.roots())
    for n in range(3, graph_run.n + 1):
        assert graph_run.max_atom(n) <= graph_run.max_atom(n - 1) / 2


def test_gen_log_is_deterministic(graph_run):
    again = build_limit(GRAPHS, 6, seed=0)
    assert gen_log_lines(again) == gen_log_lines(graph_run)
    kinds = Counter(item["kind"] for item in graph_run.gen_log())
    assert kinds["duplicate"] == 5 and kinds["extend"] == 5


# -- lazy types against materialized stages ------------------------------------------------------------
@pytest.mark.parametrize("name", SHIPPED)
def test_stage2_agrees_with_materialized(name):
    stage = build_limit(get_class(name), 2)
    mat = materialize_stage(stage)
    assert stage_mismatches(stage, mat) == []


def test_stage3_graphs_agrees_with_materialized(graph_run):
    stage = graph_run.truncate(3)
    mat = materialize_stage(stage)
    assert stage_mismatches(stage, mat) == []
    rng = Random(0)
    elems = stage.elements()
    for _ in range(200):
        xs = rng.sample(elems, 3)
        assert stage.kernel.address_type(xs) == qf_type_of(mat[0], xs)


def test_materialize_budget(graph_run):
    with pytest.raises(StageBudgetExceeded):
        materialize_stage(graph_run.truncate(4), cap=1000)


def test_duplicate_children_share_one_types(graph_run):
    s = graph_run.truncate(3)
    a, b = (2, 0, 1, 0, 1, 0), (2, 0, 1, 0, 2, 0)
    assert s.kernel.address_type([a]) == s.kernel.address_type([b])


def test_witness_satisfies_its_demand(graph_run):
    cls = GRAPHS
    tpls = {t.name: t for t in cls.templates()}
    for n in range(2, 5):
        s = graph_run.truncate(n)
        for e in s.record.new:
            if e.kind != "witness":
                continue
            tail = (1, 0)
            xs = [a + tail for a in e.anchors] + [e.address + tail]
            q = s.kernel.address_type(xs)
            env = {f"x{i}": i for i in range(len(e.anchors))}
            env["y"] = len(e.anchors)
            assert tpls[e.template].conclusion.evaluate(q.structure, env)


# -- sampling ------------------------------------------------------------------------------------------
def test_sample_sizes(graph_run):
    s = graph_run.truncate(4)
    assert len(sample_invariant(s, 0, 1).structure) == 0
    sample = sample_invariant(s, 5, 1)
    assert len(sample.structure) == 5 and len(sample.addresses) == 5
    for a in sample.addresses:
        s.decode(a)


def test_collision_structure(graph_run):
    s = graph_run.truncate(2)
    hits = 0
    rng = Random(3)
    for _ in range(200):
        sample = sample_invariant(s, 3, rng)
        if sample.collision_flag:
            hits += 1
            t = sample.structure.table("E")
            assert all((i, j) in t for i in range(3) for j in range(3))
    assert hits > 0


def test_root_marginals(graph_run):
    s = graph_run.truncate(5)
    sampler = RootSampler(s)
    rng = Random(11)
    trials = 20_000
    counts = Counter(draw_address(s, rng, sampler)[0] for _ in range(trials))
    total = s.total_mass()
    for r in s.roots():
        p = float(m_star(r) / total)
        sigma = (p * (1 - p) / trials) ** 0.5
        assert abs(counts[r] / trials - p) <= 3 * sigma + 1e-12


def test_exchangeability_small(graph_run):
    rows = exchangeability_report(graph_run.truncate(4), 4000, seed=2)
    assert rows and all(r.passed for r in rows)


# -- verification suite -----------------------------------------------------------------------------
def test_verify_suite_passes(graph_run):
    stages = [graph_run.truncate(n) for n in range(2, 7)]
    rows = verify_suite(stages, run_id="t", seed=1)
    quantities = Counter(r.quantity for r in rows)
    assert quantities["mass_preservation"] == 4 and quantities["atom_halving"] == 4
    assert all(r.passed for r in rows)


def test_corrupted_mass_fails_preservation(graph_run):
    s2, s3 = graph_run.truncate(2), graph_run.truncate(3)
    child = s3.elements()[0]
    bad = LimitStage(s3.cls, s3.records, mass_adjust={child: s3.mass(child) * 2})
    rows = verify_suite([s2, bad], run_id="bad")
    failed = {r.quantity for r in rows if not r.passed}
    assert "mass_preservation" in failed


def test_verify_suite_needs_two_stages(graph_run):
    with pytest.raises(ValueError):
        verify_suite([graph_run.truncate(2)])


# -- eta ----------------------------------------------------------------------------------------------
def test_eta_bound_values():
    assert eta_bound(2, 6) == 0.33203125
    assert eta_bound(2, 2) == 1.25


def test_eta_needs_splitting(graph_run):
    with pytest.raises(NoSplittingDeclared):
        eta_report(graph_run, [3, 4], 10, seed=0)


def test_eta_small_run(kaleidoscope_run):
    rows = eta_report(kaleidoscope_run, [3, 4], 2000, seed=0)
    assert [r.n for r in rows] == [3, 4]
    assert all(r.passed for r in rows)
