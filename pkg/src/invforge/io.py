"""JSON (de)serialization of finite structures and CSV report output.

Layout::

    {"signature": {"relations": [{"name", "arity", "layer"}], "layers": N,
                   "families": [{"kind", "start", "count", "info": {...}}]},
     "elements": [labels],
     "relations": {"name": [[labels...]]},
     "split_index": {"start": {label: index}},
     "distances": [[a, b, "p/q"]],
     "levels": [[a, b, ["p/q" | "?" | null, ...]]],
     "addresses": [labels]}

Everything after "relations" is optional.  Labels are strings; addresses are
"/"-joined naturals; rationals are "p/q" strings.  Writing sorts every table
so the output is canonical.
"""
from __future__ import annotations

import csv
import json
from fractions import Fraction

from .errors import ParseError
from .structures import (FinStructure, LayerFamily, Signature, fmt_rational, label_str,
                         pair_key, parse_rational)

REPORT_COLUMNS = ("run_id", "n", "quantity", "type_id", "estimate", "sigma", "bound", "pass")


# -- writing ---------------------------------------------------------------------------
def _info_value(v):
    if isinstance(v, Fraction):
        return {"q": fmt_rational(v)}
    return v


def _level_value(v):
    if v is None or v == "?":
        return v
    return fmt_rational(v)


def structure_to_dict(s: FinStructure, addresses=None) -> dict:
    lab = label_str
    sig = s.signature
    out = {
        "signature": {
            "relations": [{"name": r.name, "arity": r.arity, "layer": r.layer}
                          for r in sig.relations],
            "layers": sig.layers,
        },
        "elements": [lab(x) for x in s.elements],
        "relations": {name: sorted([lab(x) for x in t] for t in tuples)
                      for name, tuples in sorted(s.relations.items())},
    }
    if sig.families:
        out["signature"]["families"] = [
            {"kind": f.kind, "start": f.start, "count": f.count,
             "info": {k: _info_value(v) for k, v in f.info}} for f in sig.families]
    if s.split_index:
        out["split_index"] = {str(start): {lab(x): i for x, i in sorted(d.items(), key=lambda kv: lab(kv[0]))}
                              for start, d in sorted(s.split_index.items())}
    if s.distances is not None:
        rows = []
        for key, v in s.distances.items():
            a, b = sorted(lab(x) for x in key)
            rows.append([a, b, fmt_rational(v)])
        out["distances"] = sorted(rows)
    if s.levels is not None:
        rows = []
        for key, v in s.levels.items():
            a, b = sorted(lab(x) for x in key)
            rows.append([a, b, [_level_value(x) for x in v]])
        out["levels"] = sorted(rows, key=lambda r: (r[0], r[1]))
    if addresses is not None:
        out["addresses"] = [lab(a) for a in addresses]
    return out


def dumps_structure(s: FinStructure, addresses=None) -> str:
    return json.dumps(structure_to_dict(s, addresses), indent=1, sort_keys=True) + "\n"


def write_structure(s: FinStructure, path, addresses=None):
    with open(path, "w") as fh:
        fh.write(dumps_structure(s, addresses))


# -- reading ---------------------------------------------------------------------------
def _need(obj, key, where, kind):
    if not isinstance(obj, dict) or key not in obj:
        raise ParseError(f"{where}: missing field {key!r}")
    val = obj[key]
    if not isinstance(val, kind):
        raise ParseError(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}")
    return val


def _rational(text, where):
    try:
        return parse_rational(text)
    except ValueError as exc:
        raise ParseError(f"{where}: {exc}") from None


def _read_info(info, where):
    out = []
    for k, v in info.items():
        if isinstance(v, dict):
            v = _rational(_need(v, "q", f"{where}.{k}", str), f"{where}.{k}")
        out.append((k, v))
    return tuple(out)


def structure_from_dict(obj, check=True):
    """Return ``(structure, addresses)``; ``addresses`` is None when absent."""
    sig_obj = _need(obj, "signature", "$", dict)
    rels = []
    for i, r in enumerate(_need(sig_obj, "relations", "$.signature", list)):
        where = f"$.signature.relations[{i}]"
        name = _need(r, "name", where, str)
        arity = _need(r, "arity", where, int)
        layer = _need(r, "layer", where, int)
        if arity < 1:
            raise ParseError(f"{where}.arity: arity must be positive, got {arity}")
        rels.append((name, arity, layer))
    layers = _need(sig_obj, "layers", "$.signature", int)
    fams = []
    for i, f in enumerate(sig_obj.get("families", [])):
        where = f"$.signature.families[{i}]"
        fams.append(LayerFamily(_need(f, "kind", where, str), _need(f, "start", where, int),
                                _need(f, "count", where, int),
                                _read_info(f.get("info", {}), where + ".info")))
    try:
        sig = Signature(rels, layers, fams)
    except ValueError as exc:
        raise ParseError(f"$.signature: {exc}") from None
    elements = _need(obj, "elements", "$", list)
    if not all(isinstance(x, str) for x in elements):
        raise ParseError("$.elements: labels must be strings")
    known = set(elements)
    tables = {}
    for name, tuples in _need(obj, "relations", "$", dict).items():
        where = f"$.relations.{name}"
        if not sig.has(name):
            raise ParseError(f"{where}: relation not in the signature")
        arity = sig.arity(name)
        table = set()
        for j, t in enumerate(tuples):
            if not isinstance(t, list) or len(t) != arity:
                raise ParseError(f"{where}[{j}]: expected {arity} labels, got {t!r}")
            for x in t:
                if x not in known:
                    raise ParseError(f"{where}[{j}]: unknown element {x!r}")
            table.add(tuple(t))
        tables[name] = table
    split = {}
    for start, d in obj.get("split_index", {}).items():
        if not start.isdigit():
            raise ParseError(f"$.split_index: family start {start!r} is not a natural")
        split[int(start)] = {x: int(i) for x, i in d.items()}
    dist = None
    if "distances" in obj:
        dist = {}
        for j, row in enumerate(obj["distances"]):
            where = f"$.distances[{j}]"
            if not isinstance(row, list) or len(row) != 3:
                raise ParseError(f"{where}: expected [a, b, \"p/q\"]")
            dist[pair_key(row[0], row[1])] = _rational(row[2], where)
    levels = None
    if "levels" in obj:
        levels = {}
        for j, row in enumerate(obj["levels"]):
            where = f"$.levels[{j}]"
            if not isinstance(row, list) or len(row) != 3 or not isinstance(row[2], list):
                raise ParseError(f"{where}: expected [a, b, [levels]]")
            levels[pair_key(row[0], row[1])] = tuple(
                v if v is None or v == "?" else _rational(v, where) for v in row[2])
    try:
        s = FinStructure(sig, elements, tables, split, dist, levels, check=check)
    except (ValueError, KeyError) as exc:
        raise ParseError(f"$: {exc}") from None
    return s, obj.get("addresses")


def loads_structure(text, check=True):
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return structure_from_dict(obj, check)


def read_structure(path, check=True) -> FinStructure:
    with open(path) as fh:
        return loads_structure(fh.read(), check)[0]


def read_sample(path):
    """``(structure, addresses)`` of a stored sample."""
    with open(path) as fh:
        return loads_structure(fh.read())


# -- reports ---------------------------------------------------------------------------------
def _cell(v):
    if isinstance(v, bool):
        return "PASS" if v else "FAIL"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_report(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for r in rows:
            w.writerow([_cell(v) for v in r])


def read_report(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
