"""Complete quantifier-free types, stored as labeled structures on variables 0..k-1."""
from __future__ import annotations

from itertools import product

from .errors import IndexOutOfRange, UnknownElement
from .structures import FinStructure, pair_key


class QfType:
    """A complete quantifier-free type on ``var_count`` ordered variables.

    The type is the structure ``structure`` on labels ``0..k-1`` together with
    the equality pattern ``eq`` (``eq[i]`` is the least variable equal to
    ``i``).  Variables are 0-based throughout the package.
    """

    __slots__ = ("structure", "eq", "_key", "_hash")

    def __init__(self, structure: FinStructure, eq=None):
        k = len(structure.elements)
        if tuple(structure.elements) != tuple(range(k)):
            raise ValueError("type structures must be labeled 0..k-1 in order")
        self.structure = structure
        self.eq = tuple(eq) if eq is not None else tuple(range(k))
        self._key = None
        self._hash = None

    @property
    def signature(self):
        return self.structure.signature

    @property
    def var_count(self) -> int:
        return len(self.structure.elements)

    @property
    def non_redundant(self) -> bool:
        return self.eq == tuple(range(self.var_count))

    def holds(self, name, variables) -> bool:
        return self.structure.holds(name, tuple(variables))

    def atoms(self) -> dict:
        """Total truth table over the explicit relations: (name, var tuple) -> bool."""
        out = {}
        k = self.var_count
        for r in self.signature.relations:
            table = self.structure.table(r.name)
            for t in product(range(k), repeat=r.arity):
                out[(r.name, t)] = t in table
        return out

    def dist(self, i, j):
        return self.structure.dist(i, j)

    def canonical_key(self):
        if self._key is not None:
            return self._key
        s = self.structure
        sig = s.signature
        k = self.var_count
        explicit = tuple(frozenset(s.table(r.name)) for r in sig.relations)
        fam_tokens = []
        for f in sig.kaleidoscope_families():
            idx = s.split_index.get(f.start, {})
            toks = []
            for i in range(k):
                gi = idx.get(i)
                for j in range(i + 1, k):
                    gj = idx.get(j)
                    if gi is not None and gj is not None and gi != gj:
                        toks.append((i, j, min(gi, gj), max(gi, gj)))
            fam_tokens.append(frozenset(toks))
        metric_tokens = ()
        if sig.metric_families():
            toks = []
            for i in range(k):
                for j in range(i + 1, k):
                    toks.append((i, j, top_level(s, i, j)))
            metric_tokens = tuple(toks)
        self._key = (sig, k, self.eq, explicit, tuple(fam_tokens), metric_tokens)
        return self._key

    def __eq__(self, other):
        if not isinstance(other, QfType):
            return NotImplemented
        return self.canonical_key() == other.canonical_key()

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.canonical_key())
        return self._hash

    def __repr__(self):
        return f"QfType(k={self.var_count}, {self.signature!r})"


def top_level(s: FinStructure, a, b):
    """Canonical value deciding the newest metric family's atoms on a pair."""
    if a == b:
        return ("eq",)
    if s.levels is not None:
        lev = s.levels.get(pair_key(a, b))
        if lev is not None and lev[-1] != "?":
            return ("level", lev[-1])
    return ("dist", s.dist(a, b))


def _restrict_tables(s: FinStructure, labels, pos):
    """Explicit relation tables of ``s`` restricted to ``labels`` and renamed by ``pos``."""
    rels = {}
    k = len(labels)
    distinct = len(set(labels)) == k
    for name, table in s.relations.items():
        ar = s.signature.arity(name)
        if distinct and len(table) <= k ** ar:
            rels[name] = {tuple(pos[x] for x in t) for t in table if all(x in pos for x in t)}
        else:
            rels[name] = {t for t in product(range(k), repeat=ar)
                          if tuple(labels[i] for i in t) in table}
    return rels


def _restrict_aux(s: FinStructure, labels):
    k = len(labels)
    split = {}
    for fid, idx in s.split_index.items():
        split[fid] = {i: idx[labels[i]] for i in range(k) if labels[i] in idx}
    dist = lev = None
    if s.distances is not None:
        dist = {}
        for i in range(k):
            for j in range(i + 1, k):
                dist[pair_key(i, j)] = s.dist(labels[i], labels[j])
    if s.levels is not None:
        lev = {}
        for i in range(k):
            for j in range(i + 1, k):
                if labels[i] != labels[j]:
                    v = s.levels.get(pair_key(labels[i], labels[j]))
                    if v is not None:
                        lev[pair_key(i, j)] = v
    return split, dist, lev


def qf_type_of(s: FinStructure, labels) -> QfType:
    """The complete quantifier-free type of the tuple ``labels`` in ``s``."""
    labels = tuple(labels)
    for x in labels:
        if x not in s:
            raise UnknownElement(x)
    pos = {x: i for i, x in enumerate(labels)}
    rels = _restrict_tables(s, labels, pos)
    split, dist, lev = _restrict_aux(s, labels)
    eq = tuple(labels.index(x) for x in labels)
    sub = FinStructure(s.signature, range(len(labels)), rels, split, dist, lev, check=False)
    return QfType(sub, eq)


def restrict_vars(q: QfType, subtuple) -> QfType:
    """Type of the variables ``subtuple`` (0-based indices), in that order."""
    subtuple = tuple(subtuple)
    k = q.var_count
    for i in subtuple:
        if not isinstance(i, int) or not 0 <= i < k:
            raise IndexOutOfRange(i)
    if len(set(subtuple)) != len(subtuple):
        raise ValueError("restrict_vars needs pairwise distinct indices")
    t = qf_type_of(q.structure, subtuple)
    eq_old = q.eq
    eq = []
    for a, i in enumerate(subtuple):
        eq.append(next(b for b, j in enumerate(subtuple) if eq_old[j] == eq_old[i]))
    return QfType(t.structure, eq)


def restrict_language(q: QfType, keep_layers) -> QfType:
    """Drop every atom whose relation lies outside ``keep_layers``.

    Layer families are kept or dropped as a whole.  Metric family levels are
    trimmed to the kept families so the canonical key follows the new top family.
    """
    keep = set(keep_layers)
    sig = q.signature
    if keep >= set(range(sig.layers)):
        return q
    new_sig = sig.restrict(keep)
    s = q.structure
    rels = {n: t for n, t in s.relations.items() if new_sig.explicit(n) is not None}
    kept_k = {f.start for f in new_sig.kaleidoscope_families()}
    split = {fid: idx for fid, idx in s.split_index.items() if fid in kept_k}
    levels = None
    old_metric = sig.metric_families()
    if s.levels is not None and new_sig.metric_families():
        keep_pos = [i for i, f in enumerate(old_metric) if f in new_sig.families]
        levels = {p: tuple(v[i] for i in keep_pos) for p, v in s.levels.items()}
    sub = FinStructure(new_sig, s.elements, rels, split, s.distances, levels, check=False)
    return QfType(sub, q.eq)


def induced_substructure(s: FinStructure, subset) -> FinStructure:
    """The substructure on ``subset``, keeping the element order of ``s``."""
    subset = set(subset)
    for x in subset:
        if x not in s:
            raise UnknownElement(x)
    elems = [e for e in s.elements if e in subset]
    rels = {n: {t for t in table if all(x in subset for x in t)} for n, table in s.relations.items()}
    split = {fid: {x: v for x, v in idx.items() if x in subset} for fid, idx in s.split_index.items()}
    dist = lev = None
    if s.distances is not None:
        dist = {p: v for p, v in s.distances.items() if p <= subset}
    if s.levels is not None:
        lev = {p: v for p, v in s.levels.items() if p <= subset}
    return FinStructure(s.signature, elems, rels, split, dist, lev, check=False)


def type_structure(q: QfType, labels=None) -> FinStructure:
    """The structure underlying ``q``, optionally relabeled."""
    if labels is None:
        return q.structure
    labels = list(labels)
    return q.structure.relabel(lambda i: labels[i])
