"""Kaleidoscope classes: independent copies of a graph class, one per layer."""
from __future__ import annotations

from ..structures import FinStructure, LayerFamily, Signature, layered_name, permutation_count
from ..types import QfType
from .graphs import GraphLikeClass, graph_templates


class KaleidoscopeClass(GraphLikeClass):
    """Layer ``i`` carries the graph relation ``E@i``; each layer lies in the base age.

    Splitting (order 2) appends one rule-defined layer per ordered 4-tuple of
    distinct split indices: the layer holds a single edge between the indices
    in positions 2 and 3.  Any two 2-subtuples on different index sets then
    disagree on some layer.
    """

    declared_splitting_order = 2

    def __init__(self, base: str = "graphs"):
        if base not in ("graphs", "triangle-free"):
            raise ValueError(f"unsupported Kaleidoscope base {base!r}")
        self.base = base
        self.triangle_free = base == "triangle-free"
        self.name = f"kaleidoscope:{base}"

    def signature_at(self, layers):
        return Signature([(layered_name("E", i), 2, i) for i in range(layers)], layers)

    def extended_signature(self, sig, to_layers):
        extra = [(layered_name("E", i), 2, i) for i in range(sig.layers, to_layers)]
        return Signature(sig.relations + tuple(extra), to_layers, sig.families)

    def templates(self):
        per_layer = [graph_templates(layered_name("E", i), self.triangle_free) for i in (0, 1)]
        out = []
        for pair in zip(*per_layer):
            out.extend(pair)
        return out

    def split_family(self, start, width):
        return LayerFamily("kaleidoscope", start, permutation_count(width, 4),
                           (("width", width), ("order", 2)))

    def split_type(self, q: QfType, index_map=None, width=None):
        """Duplicate every variable twice and add a fresh family of split layers.

        Variable ``2*i+b`` of the result is copy ``b`` of variable ``i``.
        ``index_map`` (new variable -> split index) and ``width`` let a caller
        place the variables inside a larger split; they default to the identity.
        """
        self.require_splitting(q)
        k = q.var_count
        doubled = self.iterated_duplicate(q, [2] * k)
        width = width if width is not None else 2 * k
        index = {v: (index_map[v] if index_map is not None else v) for v in range(2 * k)}
        sig = q.signature
        fam = self.split_family(sig.layers, width)
        new_sig = Signature(sig.relations, sig.layers + fam.count, sig.families + (fam,))
        s = doubled.structure
        split = dict(s.split_index)
        split[fam.start] = index
        out = QfType(FinStructure(new_sig, s.elements, s.relations, split, check=False))
        return new_sig.layers, out
