"""Staged finite-graph construction whose limit is the generic graph of a class.

Stage ``n`` adds one fresh witness for every tuple of stage ``n-1`` that needs
one, then replaces every old element by ``alpha_n`` interchangeable offshoots
(the element itself is offshoot 0).  Counts are kept exactly, and elements
are handled lazily through ids

    (birth, key, digits)

where ``key`` is ``('s', label)`` for seed elements, ``('w', anchors)`` for
witnesses and ``('x',)`` for the filler used when nothing needs a witness.
``digits`` lists the offshoot chosen at each later stage with trailing zeros
stripped, so the embedding of stage ``n-1`` into stage ``n`` is the identity
on ids.  Adjacency is decided from ids alone, which lets stage 8 (about
10^173 elements) be sampled exactly.
"""
from __future__ import annotations

from .classes.base import ExtensionTemplate
from .errors import NotInAge, StageBudgetExceeded
from .formulas import Top
from .structures import FinStructure
from .types import qf_type_of

DEFAULT_ELEMENT_CAP = 100_000


class AxiomSchedule:
    """Triangular dovetail over the class templates: 0; 0 1; 0 1 2; ...

    Item ``j`` (1-based) is the template index ``j - T(r)`` where ``T(r)`` is
    the largest triangular number below ``j``.  Every template recurs at
    infinitely many indices.  The anchor tuples of an item are all tuples of
    the previous stage, so an item only names its template.
    """

    def __init__(self, templates, prefix=()):
        self.templates = list(templates)
        self.prefix = list(prefix)

    @classmethod
    def neighbours_first(cls, templates):
        """Schedule that runs templates with adjacent witnesses before the others.

        A witness adjacent to nothing is an isolated vertex when it is born, so
        running such templates early makes "has a neighbour" fail on a visible
        fraction of the small early stages.
        """
        templates = list(templates)
        return cls(sorted(templates, key=lambda t: not t.neighbours))

    @staticmethod
    def dovetail_index(j: int) -> int:
        r = 1
        while r * (r + 1) // 2 < j:
            r += 1
        return j - (r - 1) * r // 2 - 1

    def index(self, j: int) -> int:
        if j < 1:
            raise ValueError("schedule items are numbered from 1")
        if j <= len(self.prefix):
            return self.prefix[j - 1]
        return self.dovetail_index(j - len(self.prefix)) % len(self.templates)

    def item(self, j: int) -> ExtensionTemplate:
        return self.templates[self.index(j)]

    def __getitem__(self, j):
        return self.item(j)

    def arity(self, j: int) -> int:
        return self.item(j).arity

    def last_occurrence(self, n: int, j: int):
        """Largest ``k < n`` whose item uses the same template as item ``j``."""
        t = self.index(j)
        for k in range(n - 1, 0, -1):
            if self.index(k) == t:
                return k
        return None


def _strip(digits):
    digits = list(digits)
    while digits and digits[-1] == 0:
        digits.pop()
    return tuple(digits)


class ToyConstruction:
    """Shared exact bookkeeping for all stages built from one seed structure."""

    def __init__(self, seed_structure: FinStructure, cls):
        if not cls.contains(seed_structure):
            raise NotInAge("seed structure is not in the age of the class")
        self.cls = cls
        self.seed = seed_structure
        self.rel = seed_structure.signature.relations[0].name
        self.seed_ids = [(0, ("s", v), ()) for v in seed_structure.elements]
        table = seed_structure.table(self.rel)
        self.seed_edges = {(a, b) for a, b in table}
        self.sizes = [len(self.seed_ids)]
        self.edges = [len(table)]
        self.witnesses = [len(self.seed_ids)]
        self.alphas = [None]
        self.templates = [None]
        self.demand_counts = [None]

    @property
    def depth(self):
        return len(self.sizes) - 1

    def demand_count(self, tpl, n):
        """Number of stage-``n`` tuples satisfying the premise of ``tpl``."""
        m, e = self.sizes[n], self.edges[n]
        if tpl.arity == 0:
            return 1
        if tpl.arity == 1:
            return m
        return e if tpl.premise_edge else m * (m - 1) - e

    def extend(self, tpl: ExtensionTemplate):
        n = self.depth + 1
        if tpl.arity > 2 or (tpl.arity == 2 and tpl.premise_edge is None):
            raise ValueError("toy construction handles adjacency templates of arity at most 2")
        demands = self.demand_count(tpl, n - 1)
        w = demands if demands else 1
        alpha = 2 ** (n - 1) * w
        per_witness = len(tpl.neighbours) if demands else 0
        self.templates.append(tpl)
        self.demand_counts.append(demands)
        self.witnesses.append(w)
        self.alphas.append(alpha)
        self.sizes.append(w + alpha * self.sizes[n - 1])
        self.edges.append(alpha * alpha * self.edges[n - 1] + 2 * alpha * w * per_witness)

    # -- ids ------------------------------------------------------------------
    @staticmethod
    def birth(x):
        return x[0]

    @staticmethod
    def ancestor(x, t):
        """The element of stage ``t`` that ``x`` is an offshoot of (``None`` if born later)."""
        b, key, digits = x
        if t < b:
            return None
        if t - b >= len(digits):
            return x
        return (b, key, _strip(digits[:t - b]))

    @staticmethod
    def existence_stage(x):
        return x[0] + len(x[2])

    def adjacent(self, x, y) -> bool:
        if x == y:
            return False
        if x[0] > y[0]:
            x, y = y, x
        t0 = y[0]
        ax = self.ancestor(x, t0)
        ay = (t0, y[1], ())
        if ax == ay:
            return False
        if t0 == 0:
            return (ax[1][1], ay[1][1]) in self.seed_edges
        if x[0] == t0:
            return False
        key = y[1]
        if key[0] != "w":
            return False
        old = self.ancestor(x, t0 - 1)
        tpl = self.templates[t0]
        return any(old == a and i in tpl.neighbours for i, a in enumerate(key[1]))

    # -- exact neighbourhood counts ----------------------------------------------
    def _premise(self, tpl, a, b):
        if a == b:
            return False
        return self.adjacent(a, b) == bool(tpl.premise_edge)

    def _anchor_set(self, x):
        """Anchors of the new element ``x`` that it is adjacent to at its birth."""
        key = x[1]
        if key[0] != "w":
            return frozenset()
        tpl = self.templates[x[0]]
        return frozenset(a for i, a in enumerate(key[1]) if i in tpl.neighbours)

    def _witnesses_on(self, n, p):
        """Number of stage-``n`` witnesses adjacent to the stage ``n-1`` element ``p``."""
        tpl = self.templates[n]
        if not self.demand_counts[n] or not tpl.neighbours:
            return 0
        if tpl.arity == 1:
            return 1
        deg = self.degree(p, n - 1)
        partners = deg if tpl.premise_edge else self.sizes[n - 1] - 1 - deg
        return len(tpl.neighbours) * partners

    def degree(self, x, n):
        """Number of neighbours of ``x`` in stage ``n``."""
        if n == 0:
            return sum(1 for a, _ in self.seed_edges if a == x[1][1])
        alpha = self.alphas[n]
        if x[0] == n:
            return len(self._anchor_set(x)) * alpha
        p = self.ancestor(x, n - 1)
        return alpha * self.degree(p, n - 1) + self._witnesses_on(n, p)

    def codegree(self, x, y, n):
        """Number of common neighbours of distinct ``x`` and ``y`` in stage ``n``."""
        if n == 0:
            nx = {b for a, b in self.seed_edges if a == x[1][1]}
            ny = {b for a, b in self.seed_edges if a == y[1][1]}
            return len(nx & ny)
        alpha = self.alphas[n]
        if x[0] == n and y[0] == n:
            return alpha * len(self._anchor_set(x) & self._anchor_set(y))
        if y[0] == n:
            x, y = y, x
        if x[0] == n:
            q = self.ancestor(y, n - 1)
            return alpha * sum(1 for a in self._anchor_set(x) if self.adjacent(a, q))
        p, q = self.ancestor(x, n - 1), self.ancestor(y, n - 1)
        if p == q:
            return alpha * self.degree(p, n - 1) + self._witnesses_on(n, p)
        tpl = self.templates[n]
        both = 0
        if tpl.arity == 2 and len(tpl.neighbours) == 2 and self._premise(tpl, p, q):
            both = 2
        return alpha * self.codegree(p, q, n - 1) + both

    def pattern_count(self, n, anchors, wanted):
        """Number of stage-``n`` elements ``v`` with ``adjacent(v, anchors[i]) == wanted[i]``.

        ``v`` may coincide with an anchor (an element is not adjacent to itself).
        """
        size = self.sizes[n]
        if not anchors:
            return size
        if len(anchors) == 1 or anchors[0] == anchors[1]:
            if len(set(wanted)) > 1:
                return 0
            d = self.degree(anchors[0], n)
            return d if wanted[0] else size - d
        d0, d1 = self.degree(anchors[0], n), self.degree(anchors[1], n)
        c = self.codegree(anchors[0], anchors[1], n)
        counts = {(True, True): c, (True, False): d0 - c, (False, True): d1 - c,
                  (False, False): size - d0 - d1 + c}
        return counts[tuple(wanted)]

    # -- exact uniform samplers -------------------------------------------------
    def _offshoot(self, x, n, digit):
        b, key, digits = x
        full = tuple(digits) + (0,) * (n - 1 - b - len(digits)) + (digit,)
        return (b, key, _strip(full))

    def sample_element(self, n, rng):
        if n == 0:
            return self.seed_ids[rng.randrange(len(self.seed_ids))]
        if rng.randrange(self.sizes[n]) < self.witnesses[n]:
            return self.sample_witness(n, rng)
        x = self.sample_element(n - 1, rng)
        return self._offshoot(x, n, rng.randrange(self.alphas[n]))

    def sample_witness(self, n, rng):
        if not self.demand_counts[n]:
            return (n, ("x",), ())
        return (n, ("w", self.sample_demand(n, rng)), ())

    def sample_demand(self, n, rng):
        """Uniform tuple of stage ``n-1`` satisfying the premise of template ``n``."""
        tpl = self.templates[n]
        if tpl.arity == 0:
            return ()
        if tpl.arity == 1:
            return (self.sample_element(n - 1, rng),)
        if tpl.premise_edge:
            return self.sample_edge(n - 1, rng)
        while True:
            a = self.sample_element(n - 1, rng)
            b = self.sample_element(n - 1, rng)
            if a != b and not self.adjacent(a, b):
                return (a, b)

    def sample_edge(self, n, rng):
        """Uniform ordered edge of stage ``n``."""
        if self.edges[n] == 0:
            raise ValueError(f"stage {n} has no edges")
        if n == 0:
            edges = sorted(self.seed_edges, key=repr)
            a, b = edges[rng.randrange(len(edges))]
            return ((0, ("s", a), ()), (0, ("s", b), ()))
        alpha = self.alphas[n]
        old = alpha * alpha * self.edges[n - 1]
        if rng.randrange(self.edges[n]) < old:
            a, b = self.sample_edge(n - 1, rng)
            return (self._offshoot(a, n, rng.randrange(alpha)),
                    self._offshoot(b, n, rng.randrange(alpha)))
        w = self.sample_witness(n, rng)
        nbrs = sorted(self.templates[n].neighbours)
        anchor = w[1][1][nbrs[rng.randrange(len(nbrs))]]
        a = self._offshoot(anchor, n, rng.randrange(alpha))
        return (w, a) if rng.randrange(2) else (a, w)

    # -- literal oracle ---------------------------------------------------------
    def materialize(self, n, element_cap=DEFAULT_ELEMENT_CAP):
        """Stage ``n`` built with the class operations on explicit structures."""
        if self.sizes[n] > element_cap:
            raise StageBudgetExceeded(f"stage {n} has {self.sizes[n]} elements (cap {element_cap})")
        s = self.seed.relabel(lambda v: (0, ("s", v), ()))
        for t in range(1, n + 1):
            s = self._materialize_step(s, t)
        return s

    def _demands(self, s, tpl):
        elems = list(s.elements)
        if tpl.arity == 0:
            return [()]
        if tpl.arity == 1:
            return [(a,) for a in elems]
        env_rel = self.rel
        out = []
        for a in elems:
            for b in elems:
                if a != b and s.holds(env_rel, (a, b)) == tpl.premise_edge:
                    out.append((a, b))
        return out

    def _materialize_step(self, s, t):
        tpl = self.templates[t]
        demands = self._demands(s, tpl)
        prev = list(s.elements)
        for d in demands:
            s = self.cls.canonical_witness(s, d, tpl.conclusion, label=(t, ("w", d), ()))
        if not demands:
            s = self.cls.canonical_witness(s, (), Top(), label=(t, ("x",), ()))
        fresh = [x for x in s.elements if x[0] == t]
        q = qf_type_of(s, prev)
        alpha = self.alphas[t]
        dup = self.cls.iterated_duplicate(q, [alpha] * len(prev))
        labels = [self._offshoot(x, t, c) for x in prev for c in range(alpha)]
        branched = dup.structure.relabel(lambda i: labels[i])
        rels = {name: set(table) for name, table in branched.relations.items()}
        for name, table in s.relations.items():
            for a, b in table:
                if a[0] == t or b[0] == t:
                    new, old = (a, b) if a[0] == t else (b, a)
                    for c in range(alpha):
                        o = self._offshoot(old, t, c)
                        rels[name].add((new, o))
                        rels[name].add((o, new))
        return FinStructure(s.signature, labels + fresh, rels, check=False)


class ToyStage:
    """View of stage ``n`` of a :class:`ToyConstruction`.

    ``slices`` maps ``(n, k)`` to the size of the slice of elements born at
    stage ``k``; ``structure`` materializes the stage and is only available
    below the element cap.
    """

    def __init__(self, construction: ToyConstruction, n: int, element_cap=DEFAULT_ELEMENT_CAP):
        self.construction = construction
        self.n = n
        self.element_cap = element_cap
        self._structure = None

    @property
    def alpha(self):
        return self.construction.alphas[self.n]

    @property
    def size(self):
        return self.construction.sizes[self.n]

    @property
    def edge_count(self):
        return self.construction.edges[self.n]

    @property
    def template(self):
        return self.construction.templates[self.n]

    def slice_size(self, k):
        """Number of elements born at stage ``k`` that exist at this stage."""
        c = self.construction
        if not 0 <= k <= self.n:
            raise ValueError("slice index out of range")
        size = c.witnesses[k]
        for t in range(k + 1, self.n + 1):
            size *= c.alphas[t]
        return size

    @property
    def slices(self):
        return {(self.n, k): self.slice_size(k) for k in range(self.n + 1)}

    def slice_of(self, x):
        return x[0]

    def projection(self, x):
        """The birth original of ``x``: the element of its birth slice it descends from."""
        return (x[0], x[1], ())

    def parent(self, x):
        """The stage ``n-1`` element that ``x`` is an offshoot of (``None`` for new witnesses)."""
        return self.construction.ancestor(x, self.n - 1)

    def contains(self, x):
        return self.construction.existence_stage(x) <= self.n

    def adjacent(self, x, y):
        return self.construction.adjacent(x, y)

    def sample_element(self, rng):
        return self.construction.sample_element(self.n, rng)

    def sample_elements(self, rng, k):
        return [self.construction.sample_element(self.n, rng) for _ in range(k)]

    @property
    def structure(self):
        if self._structure is None:
            self._structure = self.construction.materialize(self.n, self.element_cap)
        return self._structure

    def ratio_ok(self):
        """Exact check of ``|B(n,n)| * 2^(n-1) <= |M_n|`` (vacuous at stage 0)."""
        if self.n == 0:
            return True
        return self.slice_size(self.n) * 2 ** (self.n - 1) <= self.size

    def __repr__(self):
        return f"ToyStage(n={self.n}, size={self.size})"


def init_stage0(seed_structure: FinStructure, cls, element_cap=DEFAULT_ELEMENT_CAP) -> ToyStage:
    return ToyStage(ToyConstruction(seed_structure, cls), 0, element_cap)


def run_stage(prev: ToyStage, schedule: AxiomSchedule) -> ToyStage:
    c = prev.construction
    n = prev.n + 1
    if c.depth < n:
        if c.depth != prev.n:
            raise ValueError("stages must be built in order")
        c.extend(schedule.item(n))
    return ToyStage(c, n, prev.element_cap)


def build_stages(seed_structure, cls, count, schedule=None, element_cap=DEFAULT_ELEMENT_CAP):
    """Stages ``0..count`` as a list."""
    schedule = schedule or AxiomSchedule.neighbours_first(cls.templates())
    stages = [init_stage0(seed_structure, cls, element_cap)]
    for _ in range(count):
        stages.append(run_stage(stages[-1], schedule))
    return stages
