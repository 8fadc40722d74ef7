"""JSON structure files and CSV reports."""
import json
from fractions import Fraction

import pytest
from hypothesis import given

from invforge.classes import get_class
from invforge.diagnostics import ReportRow
from invforge.errors import ParseError
from invforge.io import (dumps_structure, loads_structure, read_report, read_sample,
                         read_structure, write_report, write_structure)
from invforge.limit import build_limit, sample_invariant
from invforge.structures import graph
from strategies import graphs, metric_threshold_structures


def roundtrip(s, addresses=None):
    text = dumps_structure(s, addresses)
    back, addrs = loads_structure(text)
    assert dumps_structure(back, addrs) == text
    return back, addrs


def test_graph_roundtrip(tmp_path):
    g = graph(["a", "b", "c"], [("a", "b")])
    path = tmp_path / "g.json"
    write_structure(g, path)
    back = read_structure(path)
    assert back.elements == g.elements and back.table("E") == g.table("E")


@given(graphs())
def test_graph_roundtrip_property(g):
    roundtrip(g)


@given(metric_threshold_structures())
def test_metric_roundtrip_property(case):
    _m, _t, s = case
    back, _ = roundtrip(s)
    for r in s.signature.relations:
        assert {tuple(map(str, x)) for x in s.table(r.name)} == set(back.table(r.name))


@pytest.mark.parametrize("name", ["kaleidoscope:graphs", "metric"])
def test_sample_roundtrip(name, tmp_path):
    stage = build_limit(get_class(name), 3)
    sample = sample_invariant(stage, 4, 5)
    path = tmp_path / "sample.json"
    write_structure(sample.structure, path, addresses=sample.addresses)
    back, addrs = read_sample(path)
    assert len(addrs) == 4 and len(back) == 4
    assert dumps_structure(back, addrs) == path.read_text()
    assert get_class(name).contains(back)


def test_rational_text():
    text = dumps_structure(graph(["a", "b"], []))
    obj = json.loads(text)
    obj["signature"]["families"] = [{"kind": "metric", "start": 1, "count": 1,
                                     "info": {"thresholds": None, "step": {"q": "1/2"}}}]
    obj["signature"]["layers"] = 2
    s, _ = loads_structure(json.dumps(obj), check=False)
    assert dict(s.signature.families[0].info)["step"] == Fraction(1, 2)


@pytest.mark.parametrize("mutate, message", [
    (lambda o: o["relations"]["E"].append(["a"]), "$.relations.E[0]: expected 2 labels"),
    (lambda o: o["relations"]["E"].append(["a", "z"]), "unknown element 'z'"),
    (lambda o: o.pop("elements"), "missing field 'elements'"),
    (lambda o: o["signature"]["relations"][0].update(arity=0), "arity must be positive"),
    (lambda o: o["relations"].update(F=[]), "relation not in the signature"),
])
def test_malformed_files(mutate, message):
    obj = json.loads(dumps_structure(graph(["a", "b"], [])))
    mutate(obj)
    with pytest.raises(ParseError, match=message.replace("$", r"\$").replace("[", r"\[")):
        loads_structure(json.dumps(obj))


def test_bad_json_and_bad_rational():
    with pytest.raises(ParseError, match="line 1"):
        loads_structure("{")
    obj = json.loads(dumps_structure(graph(["a", "b"], [])))
    obj["distances"] = [["a", "b", "one half"]]
    with pytest.raises(ParseError, match=r"\$.distances\[0\]"):
        loads_structure(json.dumps(obj), check=False)


def test_report_roundtrip(tmp_path):
    rows = [ReportRow("r", 3, "delta", "edge", 0.125, 0.01, 0.25, True),
            ReportRow("r", 4, "gamma", "E:1", 0.5, 0.02, 0.25, False)]
    path = tmp_path / "report.csv"
    write_report(rows, path)
    back = read_report(path)
    assert [r["pass"] for r in back] == ["PASS", "FAIL"]
    assert float(back[0]["estimate"]) == 0.125 and back[1]["type_id"] == "E:1"
    assert list(back[0]) == ["run_id", "n", "quantity", "type_id", "estimate", "sigma", "bound", "pass"]
