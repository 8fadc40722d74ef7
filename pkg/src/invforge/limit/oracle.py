"""Literal materialization of limit stages.

Replays the recorded stage history with the class operations on whole
structures (canonical witnesses, iterated duplication, language extension or
splitting).  Used as the reference for the lazy type kernel on small stages.
"""
from __future__ import annotations

from ..errors import StageBudgetExceeded
from ..formulas import Top
from ..structures import FinStructure
from ..types import qf_type_of

DEFAULT_CAP = 5000


def _empty(sig, metric):
    return FinStructure(sig, [], {} if metric else {r.name: set() for r in sig.relations},
                        {}, {} if metric else None, check=False)


def materialize_stage(stage, cap=DEFAULT_CAP):
    """Return ``(structure, order)`` for a complete limit stage.

    ``order`` lists the addresses in the order the split indices refer to.
    Raises StageBudgetExceeded when some stage would exceed ``cap`` elements.
    """
    if not stage.complete:
        raise ValueError("only complete stages can be materialized")
    cls = stage.cls
    metric = stage.metric
    conclusions = {t.name: t.conclusion for t in cls.templates()}
    recs = stage.records
    s = _empty(recs[1].sig, metric)
    order = []
    for rec in recs[2:]:
        if rec.size > cap:
            raise StageBudgetExceeded(f"stage {rec.n} has {rec.size} elements (cap {cap})")
        if metric:
            s = cls.realized(s)
        for e in rec.new:
            demand = Top() if e.kind == "mass" else conclusions[e.template]
            s = cls.canonical_witness(s, e.anchors, demand, label=e.address)
        order1 = order + [e.address for e in rec.new]
        q = qf_type_of(s, order1)
        lam = rec.lam
        dup = cls.iterated_duplicate(q, [lam] * len(order1))
        order2 = [u + (j,) for u in order1 for j in range(1, lam + 1)]
        if rec.case == "b":
            _layers, out = cls.split_type(dup)
            order = [p + (b,) for p in order2 for b in (0, 1)]
        else:
            out = cls.extend_language(dup, rec.sig.layers)
            order = [p + (0,) for p in order2]
        if out.signature != rec.sig:
            raise AssertionError(f"stage {rec.n}: replayed signature differs from the record")
        s = out.structure.relabel(lambda i: order[i])
    return s, order
