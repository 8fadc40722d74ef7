"""Graphs and triangle-free graphs, plus the layered machinery reused by Kaleidoscope."""
from __future__ import annotations

from itertools import combinations, product

from ..errors import BadEmbedding, SignatureMismatch, UnsatisfiableDemand
from ..formulas import Atom, Top
from ..structures import FinStructure, Signature
from ..types import QfType, induced_substructure
from .base import (AmalgamationClass, ExtensionTemplate, adjacency_template,
                   strong_amalgam_labels)


def _atoms_of(formula):
    if isinstance(formula, Atom):
        yield formula
    for c in formula.children():
        yield from _atoms_of(c)


class GraphLikeClass(AmalgamationClass):
    """Every explicit relation is a symmetric irreflexive graph (optionally triangle-free).

    Policies: witnesses and duplicates are non-adjacent to everything the
    demand does not mention; new layers start empty.
    """

    triangle_free = False

    def initial_layers(self):
        return 1

    def relation_names(self, sig):
        return [r.name for r in sig.relations]

    # -- age membership -------------------------------------------------
    def violations(self, s):
        self.check_signature(s)
        out = []
        for name in self.relation_names(s.signature):
            table = s.table(name)
            for a, b in table:
                if a == b:
                    out.append(f"{name}: loop at {a}")
                elif (b, a) not in table:
                    out.append(f"{name}: not symmetric at ({a},{b})")
            if self.triangle_free:
                out.extend(f"forbidden substructure: triangle {t} in {name}"
                           for t in _triangles(s.elements, table))
        return out

    # -- strong amalgamation ---------------------------------------------
    def strong_amalgam(self, m, n, over):
        if not (m.signature == n.signature == over.signature):
            raise SignatureMismatch("amalgam needs a shared signature")
        self.require_in_age(m, n, over)
        for side in (m, n):
            if not all(x in side for x in over.elements):
                raise BadEmbedding("shared part is not contained in both structures")
            if induced_substructure(side, over.elements) != over:
                raise BadEmbedding("shared part does not embed as an induced substructure")
        rename = strong_amalgam_labels(m, n, over)
        elems = list(m.elements) + [rename[x] for x in n.elements if x not in over]
        rels = {}
        for name in self.relation_names(m.signature):
            rels[name] = set(m.table(name)) | {(rename[a], rename[b]) for a, b in n.table(name)}
        split = {}
        for fid in set(m.split_index) | set(n.split_index):
            merged = dict(m.split_index.get(fid, {}))
            for x, v in n.split_index.get(fid, {}).items():
                y = rename[x]
                if y in merged and merged[y] != v:
                    raise BadEmbedding("split indices disagree on the shared part")
                merged[y] = v
            split[fid] = merged
        return FinStructure(m.signature, elems, rels, split)

    # -- witnesses -----------------------------------------------------------
    def witness_pattern(self, s, tuple_, demand):
        """Adjacency of the fresh element: dict relation -> frozenset of anchor labels."""
        anchors = list(dict.fromkeys(tuple_))
        explicit = set(self.relation_names(s.signature))
        rels = sorted({a.rel for a in _atoms_of(demand) if a.rel in explicit and "y" in a.args})
        local = induced_substructure(s, anchors)
        y = ("witness",)
        env = {f"x{i}": v for i, v in enumerate(tuple_)}
        env["y"] = y
        slots = [(r, a) for r in rels for a in anchors]
        for mask in range(1 << len(slots)):
            pattern = {r: set() for r in rels}
            for bit, (r, a) in enumerate(slots):
                if mask >> bit & 1:
                    pattern[r].add(a)
            if self.triangle_free and any(
                    (a, b) in local.table(r) for r in rels for a, b in combinations(sorted(pattern[r], key=repr), 2)):
                continue
            cand = self._add_element(local, y, pattern)
            if demand.evaluate(cand, env):
                return {r: frozenset(v) for r, v in pattern.items() if v}
        raise UnsatisfiableDemand(f"no fresh element satisfies {demand!r} over {tuple(tuple_)!r}")

    def _add_element(self, s, label, pattern):
        rels = {n: set(t) for n, t in s.relations.items()}
        for r, nbrs in pattern.items():
            for a in nbrs:
                rels[r].add((a, label))
                rels[r].add((label, a))
        return FinStructure(s.signature, list(s.elements) + [label], rels, s.split_index,
                            check=False)

    def canonical_witness(self, s, tuple_, demand, label=None):
        pattern = self.witness_pattern(s, tuple_, demand)
        label = self.fresh_label(s, label)
        return self._add_element(s, label, pattern)

    # -- type constructors ---------------------------------------------------
    def iterated_duplicate(self, q: QfType, multiplicities) -> QfType:
        copies = _copy_table(q, multiplicities)
        s = q.structure
        total = sum(len(c) for c in copies)
        rels = {}
        for name, table in s.relations.items():
            rels[name] = _duplicate_tuples(table, copies)
        split = {fid: {c: idx[i] for i in idx for c in copies[i]}
                 for fid, idx in s.split_index.items()}
        return QfType(FinStructure(s.signature, range(total), rels, split, check=False))

    def extend_language(self, q: QfType, to_layers: int) -> QfType:
        if to_layers < q.signature.layers:
            raise ValueError("extend_language cannot shrink the language")
        if to_layers == q.signature.layers:
            return q
        sig = self.extended_signature(q.signature, to_layers)
        s = q.structure
        return QfType(FinStructure(sig, s.elements, s.relations, s.split_index, check=False), q.eq)

    def extended_signature(self, sig, to_layers):
        return Signature(sig.relations, to_layers, sig.families)


def _triangles(elements, table):
    nbrs = {}
    for a, b in table:
        if a != b:
            nbrs.setdefault(a, set()).add(b)
    order = {x: i for i, x in enumerate(elements)}
    for a in nbrs:
        for b in nbrs[a]:
            if order[b] <= order[a]:
                continue
            for c in nbrs[a] & nbrs.get(b, set()):
                if order[c] > order[b]:
                    yield (a, b, c)


def _copy_table(q, multiplicities):
    if not q.non_redundant:
        raise ValueError("iterated_duplicate needs a non-redundant type")
    mults = list(multiplicities)
    if len(mults) != q.var_count:
        raise ValueError("one multiplicity per variable is required")
    copies, nxt = [], 0
    for m in mults:
        if m < 1:
            raise ValueError("multiplicities must be positive")
        copies.append(list(range(nxt, nxt + m)))
        nxt += m
    return copies


def _duplicate_tuples(table, copies):
    out = set()
    for t in table:
        distinct = list(dict.fromkeys(t))
        for choice in product(*(copies[v] for v in distinct)):
            pick = dict(zip(distinct, choice))
            out.add(tuple(pick[v] for v in t))
    return out


class GraphClass(GraphLikeClass):
    name = "graphs"

    def signature_at(self, layers):
        return Signature([("E", 2, 0)], max(layers, 1))

    def templates(self):
        return graph_templates("E", self.triangle_free)


class TriangleFreeClass(GraphClass):
    name = "triangle-free"
    triangle_free = True


def graph_templates(rel, triangle_free, tag=""):
    """One-point extension templates with at most two anchors, interesting ones first."""
    specs = [
        (1, True, {0}), (1, True, set()),
        (2, False, {0, 1}), (2, True, {0}), (2, False, set()), (2, True, set()),
        (2, False, {0}), (2, True, {1}), (2, False, {1}), (2, True, {0, 1}),
    ]
    out = []
    for arity, edge, nb in specs:
        if triangle_free and arity == 2 and edge and nb == {0, 1}:
            continue
        out.append(adjacency_template(rel, arity, edge, nb, tag))
    out.append(ExtensionTemplate(f"{rel}{tag}:0:any:-", 0, Top(), Top()))
    return out
