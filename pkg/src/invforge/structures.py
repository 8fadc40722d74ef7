"""Signatures and finite relational structures.

Relations live in numbered layers; layer ``i`` belongs to the sublanguage with
index ``i``.  Besides explicitly listed relations a signature may carry
*layer families*: long runs of layers whose relations are defined by a rule
instead of a table (the split layers of the Kaleidoscope and metric classes).
A structure stores the data the rule needs (a per-element index for a
Kaleidoscope family, a distance realization for metric thresholds).
"""
from __future__ import annotations

import bisect
import math
import re
from fractions import Fraction
from typing import NamedTuple

from .errors import UnknownElement

INF = None  # sentinel for "no threshold holds" in metric levels

_RATIONAL_RE = re.compile(r"^\s*(-?\d+)\s*(?:/\s*(\d+))?\s*$")


def fmt_rational(q) -> str:
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def parse_rational(text) -> Fraction:
    if isinstance(text, (int, Fraction)):
        return Fraction(text)
    m = _RATIONAL_RE.match(str(text))
    if not m:
        raise ValueError(f"not a rational: {text!r}")
    num = int(m.group(1))
    den = int(m.group(2)) if m.group(2) else 1
    if den == 0:
        raise ValueError(f"zero denominator: {text!r}")
    return Fraction(num, den)


def threshold_name(t) -> str:
    return f"d[{fmt_rational(t)}]"


def parse_threshold_name(name: str):
    """Return the threshold of a ``d[p/q]`` relation name, or None."""
    if not (name.startswith("d[") and name.endswith("]")):
        return None
    try:
        return parse_rational(name[2:-1])
    except ValueError:
        return None


def layered_name(base: str, layer: int) -> str:
    return f"{base}@{layer}"


def parse_layered_name(name: str):
    base, sep, layer = name.rpartition("@")
    if not sep or not layer.isdigit():
        return None
    return base, int(layer)


def address_label(addr) -> str:
    """Serialize an address (tuple of naturals) as a '/'-joined string."""
    return "/".join(str(c) for c in addr)


def parse_address(text: str) -> tuple:
    if text == "":
        return ()
    return tuple(int(c) for c in text.split("/"))


def label_str(label) -> str:
    if isinstance(label, tuple) and all(isinstance(c, int) for c in label):
        return address_label(label)
    return str(label)


class Relation(NamedTuple):
    name: str
    arity: int
    layer: int


def permutation_count(width: int, length: int) -> int:
    return math.perm(width, length)


def unrank_arrangement(rank: int, width: int, length: int) -> tuple:
    """The ``rank``-th ordered ``length``-tuple of distinct values below ``width``, lexicographically."""
    pool = list(range(width))
    out = []
    for pos in range(length):
        block = math.perm(width - pos - 1, length - pos - 1)
        idx, rank = divmod(rank, block)
        out.append(pool.pop(idx))
    return tuple(out)


def rank_arrangement(arr, width: int) -> int:
    pool = list(range(width))
    length = len(arr)
    rank = 0
    for pos, v in enumerate(arr):
        idx = pool.index(v)
        rank += idx * math.perm(width - pos - 1, length - pos - 1)
        pool.pop(idx)
    return rank


class LayerFamily(NamedTuple):
    """A rule-defined run of layers ``start .. start+count-1``.

    kind "kaleidoscope": layer ``start+r`` holds one edge, between the split
    indices at positions ``order..2*order-1`` of the ``r``-th arrangement of
    ``2*order`` distinct indices below ``width``.
    kind "metric": one threshold relation per layer; the thresholds are given
    symbolically by ``info`` and realized distances.
    """
    kind: str
    start: int
    count: int
    info: tuple = ()

    def get(self, key, default=None):
        for k, v in self.info:
            if k == key:
                return v
        return default

    @property
    def stop(self):
        return self.start + self.count


def kaleidoscope_edge(family: LayerFamily, layer: int, ia, ib) -> bool:
    """Whether the split layer ``layer`` relates elements with split indices ia, ib."""
    if ia is None or ib is None or ia == ib:
        return False
    order = family.get("order", 2)
    arr = unrank_arrangement(layer - family.start, family.get("width"), 2 * order)
    return {ia, ib} == {arr[order], arr[order + 1]}


class Signature:
    """Relation symbols with arities and layers, plus optional layer families."""

    __slots__ = ("relations", "layers", "families", "_by_name", "_starts", "_hash")

    def __init__(self, relations, layers: int, families=()):
        rels = tuple(Relation(*r) for r in relations)
        by_name = {}
        for r in rels:
            if r.name in by_name:
                raise ValueError(f"duplicate relation name {r.name!r}")
            if r.arity < 1:
                raise ValueError(f"relation {r.name!r} has arity < 1")
            if not 0 <= r.layer < layers:
                raise ValueError(f"relation {r.name!r} layer {r.layer} outside 0..{layers - 1}")
            by_name[r.name] = r
        fams = tuple(sorted((LayerFamily(*f) for f in families), key=lambda f: f.start))
        for f in fams:
            if f.start < 0 or f.stop > layers:
                raise ValueError(f"family at {f.start} exceeds {layers} layers")
        self.relations = rels
        self.layers = int(layers)
        self.families = fams
        self._by_name = by_name
        self._starts = [f.start for f in fams]
        self._hash = None

    # -- lookup -------------------------------------------------------
    def __contains__(self, name):
        return self.has(name)

    def has(self, name: str) -> bool:
        if name in self._by_name:
            return True
        return self.family_of_name(name) is not None

    def explicit(self, name: str):
        return self._by_name.get(name)

    def arity(self, name: str) -> int:
        r = self._by_name.get(name)
        if r is not None:
            return r.arity
        if self.family_of_name(name) is not None:
            return 2
        raise KeyError(name)

    def family_of_layer(self, layer: int):
        i = bisect.bisect_right(self._starts, layer) - 1
        if i >= 0 and layer < self.families[i].stop:
            return self.families[i]
        return None

    def family_of_name(self, name: str):
        parsed = parse_layered_name(name)
        if parsed is not None:
            fam = self.family_of_layer(parsed[1])
            if fam is not None and fam.kind == "kaleidoscope":
                return fam
            return None
        if parse_threshold_name(name) is not None:
            for f in self.families:
                if f.kind == "metric":
                    return f
        return None

    def metric_families(self):
        return tuple(f for f in self.families if f.kind == "metric")

    def kaleidoscope_families(self):
        return tuple(f for f in self.families if f.kind == "kaleidoscope")

    def names(self):
        return [r.name for r in self.relations]

    def explicit_layers(self):
        return {r.layer for r in self.relations}

    # -- derived signatures ------------------------------------------
    def with_layers(self, layers: int, extra=(), families=()):
        return Signature(self.relations + tuple(extra), layers, self.families + tuple(families))

    def restrict(self, keep_layers):
        keep = set(keep_layers)
        rels = [r for r in self.relations if r.layer in keep]
        fams = []
        for f in self.families:
            inside = sum(1 for x in keep if f.start <= x < f.stop)
            if inside == f.count:
                fams.append(f)
            elif inside:
                raise ValueError("layer families can only be kept or dropped whole")
        # keeping a prefix 0..m-1 gives the sublanguage with m layers
        layers = self.layers
        if keep and keep == set(range(max(keep) + 1)):
            layers = min(layers, max(keep) + 1)
        return Signature(rels, layers, fams)

    # -- identity ------------------------------------------------------
    def _key(self):
        return (self.relations, self.layers, self.families)

    def __eq__(self, other):
        return isinstance(other, Signature) and self._key() == other._key()

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self._key())
        return self._hash

    def __repr__(self):
        fam = f", families={len(self.families)}" if self.families else ""
        return f"Signature({[r.name for r in self.relations]}, layers={self.layers}{fam})"


def pair_key(a, b):
    return frozenset((a, b))


class FinStructure:
    """A finite structure: ordered distinct element labels plus relation data.

    ``relations`` maps explicit relation names to sets of tuples.  When
    ``distances`` is given (metric classes) every threshold relation
    ``d[t]`` is read off the distances instead.  ``split_index`` maps the
    start layer of each Kaleidoscope family to a dict element -> index.
    ``levels`` maps pairs to per-metric-family canonical values (see types).
    """

    __slots__ = ("signature", "elements", "relations", "split_index", "distances",
                 "levels", "_index")

    def __init__(self, signature: Signature, elements, relations=None,
                 split_index=None, distances=None, levels=None, check=True):
        self.signature = signature
        self.elements = tuple(elements)
        self._index = {e: i for i, e in enumerate(self.elements)}
        if len(self._index) != len(self.elements):
            raise ValueError("element labels must be pairwise distinct")
        rels = {}
        for name, tuples in (relations or {}).items():
            rels[name] = frozenset(tuple(t) for t in tuples)
        if distances is None:
            for r in signature.relations:
                rels.setdefault(r.name, frozenset())
        self.relations = rels
        self.split_index = {k: dict(v) for k, v in (split_index or {}).items()}
        self.distances = dict(distances) if distances is not None else None
        self.levels = dict(levels) if levels is not None else None
        if check:
            self._validate()

    def _validate(self):
        for name, tuples in self.relations.items():
            if not self.signature.has(name):
                raise ValueError(f"relation {name!r} not in signature")
            ar = self.signature.arity(name)
            for t in tuples:
                if len(t) != ar:
                    raise ValueError(f"tuple {t!r} has wrong arity for {name!r}")
                for x in t:
                    if x not in self._index:
                        raise UnknownElement(x)

    def __len__(self):
        return len(self.elements)

    def __contains__(self, label):
        return label in self._index

    def index(self, label) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise UnknownElement(label) from None

    def dist(self, a, b) -> Fraction:
        if a == b:
            return Fraction(0)
        return self.distances[pair_key(a, b)]

    def holds(self, name: str, args) -> bool:
        args = tuple(args)
        table = self.relations.get(name)
        if table is not None:
            return args in table
        if self.distances is not None:
            t = parse_threshold_name(name)
            if t is not None:
                return self.dist(args[0], args[1]) <= t
        parsed = parse_layered_name(name)
        if parsed is not None:
            fam = self.signature.family_of_layer(parsed[1])
            if fam is not None and fam.kind == "kaleidoscope":
                idx = self.split_index.get(fam.start, {})
                return kaleidoscope_edge(fam, parsed[1], idx.get(args[0]), idx.get(args[1]))
        if self.signature.has(name):
            return False
        raise KeyError(name)

    def table(self, name: str) -> frozenset:
        """All tuples satisfying an explicit relation (derived for metric thresholds)."""
        t = self.relations.get(name)
        if t is not None:
            return t
        ar = self.signature.arity(name)
        if ar != 2:
            return frozenset()
        return frozenset((a, b) for a in self.elements for b in self.elements
                         if self.holds(name, (a, b)))

    def explicit_tables(self):
        return {r.name: self.table(r.name) for r in self.signature.relations}

    def relabel(self, mapping):
        """Copy with every label ``x`` replaced by ``mapping[x]``."""
        m = mapping.__getitem__ if not callable(mapping) else mapping
        rels = {n: {tuple(m(x) for x in t) for t in ts} for n, ts in self.relations.items()}
        split = {k: {m(x): v for x, v in d.items()} for k, d in self.split_index.items()}
        dist = None
        if self.distances is not None:
            dist = {}
            for key, v in self.distances.items():
                a, b = tuple(key)
                dist[pair_key(m(a), m(b))] = v
        lev = None
        if self.levels is not None:
            lev = {}
            for key, v in self.levels.items():
                a, b = tuple(key)
                lev[pair_key(m(a), m(b))] = v
        return FinStructure(self.signature, [m(x) for x in self.elements], rels, split, dist, lev,
                            check=False)

    def __eq__(self, other):
        if not isinstance(other, FinStructure):
            return NotImplemented
        if self.signature != other.signature or set(self.elements) != set(other.elements):
            return False
        if self.explicit_tables() != other.explicit_tables():
            return False
        if self.signature.families:
            for f in self.signature.kaleidoscope_families():
                if self.split_index.get(f.start, {}) != other.split_index.get(f.start, {}):
                    return False
            if self.signature.metric_families():
                pairs = [(a, b) for i, a in enumerate(self.elements) for b in self.elements[i + 1:]]
                if any(self.dist(a, b) != other.dist(a, b) for a, b in pairs):
                    return False
        return True

    __hash__ = None

    def __repr__(self):
        return f"FinStructure({len(self.elements)} elements, {self.signature!r})"


def graph_signature(layers: int = 1) -> Signature:
    return Signature([("E", 2, 0)], max(layers, 1))


def graph(vertices, edges, signature: Signature | None = None) -> FinStructure:
    """Symmetric irreflexive graph on ``vertices`` from unordered ``edges``."""
    sig = signature or graph_signature()
    tuples = set()
    for a, b in edges:
        tuples.add((a, b))
        tuples.add((b, a))
    return FinStructure(sig, vertices, {"E": tuples})
