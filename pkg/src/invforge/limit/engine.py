"""Staged tree-address structures with exact rational masses.

Stage ``n`` lives on addresses of length ``2n``.  It is built from stage
``n-1`` in four substages:

0. add a root ``n`` (address ``n 0...0``) carrying mass ``m*(n)`` unless some
   address already starts with ``n``;
1. add one fresh witness for the scheduled demand, at the smallest unused root;
2. replace every address ``x`` by ``x j`` for ``1 <= j <= Lambda_n``, splitting
   its mass evenly;
3. either extend the language by one layer (children ``x 0``) or split every
   element into ``x 0`` and ``x 1`` with a fresh family of layers.

Stages are stored as per-stage records; element sets are only implicit.
Types of address tuples come from :mod:`invforge.limit.kernel` and an
explicit construction for small stages from :mod:`invforge.limit.oracle`.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from random import Random

from ..classes.base import ExtensionTemplate
from ..classes.metric import MetricClass, split_constants, split_parameters
from ..errors import ConstantsUnsupported, InvalidAddress
from ..formulas import Atom, Top
from ..structures import FinStructure, Signature
from ..toy import AxiomSchedule
from ..types import QfType


class BaseMassMeasure:
    """Masses of the roots; the default ``k -> 2^-(k+1)`` is dyadic and sums to 1."""

    def __init__(self, rule=None):
        self.rule = rule or (lambda k: Fraction(1, 2 ** (k + 1)))

    def __call__(self, k) -> Fraction:
        return Fraction(self.rule(k))


def m_star(k) -> Fraction:
    return Fraction(1, 2 ** (k + 1))


def collision_probability(balls: int, boxes: int) -> Fraction:
    """Exact probability that ``balls`` uniform balls in ``boxes`` boxes share a box."""
    p = Fraction(1)
    for i in range(balls):
        p *= Fraction(boxes - i, boxes)
    return 1 - p


def lambda_min(n: int) -> int:
    """Least box count making ``n`` balls collide with probability below ``2^-n``."""
    if n < 2:
        raise ValueError("lambda_min needs n >= 2")
    target = Fraction(1, 2 ** n)
    # birthday bound: collision >= 1 - exp(-n(n-1)/2L) > n(n-1)/(4L) once that is < 1
    lam = max(n, n * (n - 1) * 2 ** n // 4)
    while lam > n and collision_probability(n, lam - 1) < target:
        lam -= 1
    while collision_probability(n, lam) >= target:
        lam += 1
    return lam


@dataclass(frozen=True)
class NewElement:
    """An element added at substage ``n.0`` (kind "mass") or ``n.1`` (kind "witness")."""
    kind: str
    address: tuple
    root: int
    anchors: tuple = ()
    template: str = ""
    pattern: object = None


@dataclass(frozen=True)
class StageRecord:
    n: int
    sig_before: object
    sig: object = None
    alpha: int = 0
    phase: int = 0
    new: tuple = ()
    lam: int = None
    branches: int = 1
    case: str = None
    size_prev: int = 0
    family: object = None
    split_consts: tuple = None
    notes: tuple = field(default_factory=tuple)

    @property
    def size1(self):
        return self.size_prev + len(self.new)

    @property
    def size2(self):
        return self.size1 * self.lam

    @property
    def size(self):
        return self.size2 * self.branches


def limit_schedule(cls):
    """Dovetailed templates with the first two items forced to the first template.

    Only templates valid in the starting language are scheduled: the others
    never become valid for the shipped classes (Kaleidoscope layers after the
    first are split layers), and a stage without a new root lets a late root
    enter heavier than half of the previous largest atom.

    The first template of every shipped class demands a neighbour of one
    element, which is always valid; running it at stages 2 and 3 places the
    heavy roots 0 and 1 early enough for the atom masses to halve each stage.
    """
    start = cls.signature_at(cls.initial_layers())
    usable = [t for t in cls.templates() if template_valid(t, start)]
    return AxiomSchedule(usable, prefix=(0, 0))


class LimitStage:
    """Stage ``n`` (possibly mid-way through its substages) of the construction."""

    def __init__(self, cls, records, m_star=None, seed=0, mass_adjust=None):
        self.cls = cls
        self.records = tuple(records)
        self.m_star = m_star or BaseMassMeasure()
        self.seed = seed
        self.mass_adjust = dict(mass_adjust or {})
        self.metric = isinstance(cls, MetricClass)
        self._kernel = None
        self._roots = None

    # -- basic data --------------------------------------------------------------
    @property
    def n(self):
        return len(self.records) - 1

    @property
    def record(self):
        return self.records[-1]

    @property
    def complete(self):
        return self.record.phase == 3

    @property
    def alpha_n(self):
        return self.record.alpha

    @property
    def lambda_n(self):
        return self.record.lam

    @property
    def signature(self):
        rec = self.record
        return rec.sig if rec.phase == 3 else rec.sig_before

    @property
    def size(self):
        return self.record.size if self.complete else self.record.size1

    def sizes(self):
        return [r.size for r in self.records if r.phase == 3]

    def roots(self):
        """Root -> stage at which it entered."""
        if self._roots is None:
            out = {}
            for rec in self.records:
                for e in rec.new:
                    out[e.root] = rec.n
            self._roots = out
        return self._roots

    def with_records(self, records):
        out = LimitStage(self.cls, records, self.m_star, self.seed, self.mass_adjust)
        return out

    def truncate(self, n):
        """The completed stage ``n`` of this run."""
        if not 1 <= n <= self.n or self.records[n].phase != 3:
            raise ValueError(f"stage {n} is not complete in this run")
        return self.with_records(self.records[:n + 1])

    @property
    def kernel(self):
        if self._kernel is None:
            from .kernel import TypeKernel
            self._kernel = TypeKernel(self)
        return self._kernel

    # -- addresses -----------------------------------------------------------------
    def decode(self, addr, depth=None):
        """(root, birth stage, [(j, b) per stage from birth]) after validating ``addr``."""
        addr = tuple(addr)
        n = self.n if depth is None else depth
        if len(addr) != 2 * n or n < 2:
            raise InvalidAddress(f"address {addr!r} does not have length {2 * n}")
        if any(not isinstance(c, int) or c < 0 for c in addr):
            raise InvalidAddress(f"address {addr!r} has a non-natural coordinate")
        root = addr[0]
        born = self.roots().get(root)
        if born is None or born > n:
            raise InvalidAddress(f"root {root} is not used by stage {n}")
        if any(addr[1:2 * born - 2]):
            raise InvalidAddress(f"address {addr!r} has a nonzero padding coordinate")
        steps = []
        for t in range(born, n + 1):
            rec = self.records[t]
            j, b = addr[2 * t - 2], addr[2 * t - 1]
            if not 1 <= j <= rec.lam or not 0 <= b < rec.branches:
                raise InvalidAddress(f"coordinates ({j}, {b}) of {addr!r} are out of range at stage {t}")
            steps.append((j, b))
        return root, born, steps

    def birth(self, addr):
        return self.roots()[addr[0]]

    def new_index(self, t, u):
        rec = self.records[t]
        for i, e in enumerate(rec.new):
            if e.address == u:
                return i
        return None

    def rank(self, t, addr):
        """Position of ``addr`` in the canonical order of the complete stage ``t``."""
        rec = self.records[t]
        u, j, b = addr[:2 * t - 2], addr[2 * t - 2], addr[2 * t - 1]
        return (self.rank1(t, u) * rec.lam + (j - 1)) * rec.branches + b

    def rank1(self, t, u):
        """Position of ``u`` among stage ``t-1`` followed by the elements new at stage ``t``."""
        rec = self.records[t]
        i = self.new_index(t, u)
        if i is not None:
            return rec.size_prev + i
        return self.rank(t - 1, u)

    def unrank(self, t, r):
        rec = self.records[t]
        b = r % rec.branches
        r //= rec.branches
        j = r % rec.lam + 1
        return self.unrank1(t, r // rec.lam) + (j, b)

    def unrank1(self, t, r):
        rec = self.records[t]
        if r >= rec.size_prev:
            return rec.new[r - rec.size_prev].address
        return self.unrank(t - 1, r)

    def elements(self, t=None):
        """All addresses of the complete stage ``t`` in canonical order (small stages only)."""
        t = self.n if t is None else t
        return [self.unrank(t, r) for r in range(self.records[t].size)]

    # -- masses ----------------------------------------------------------------------
    def mass(self, addr, depth=None):
        addr = tuple(addr)
        if addr in self.mass_adjust:
            return self.mass_adjust[addr]
        return self.base_mass(addr)

    def base_mass(self, addr):
        """Mass from the construction rule alone, ignoring ``mass_adjust``."""
        root = addr[0]
        born = self.roots()[root]
        m = self.m_star(root)
        stop = len(addr) // 2
        for t in range(born, stop + 1):
            rec = self.records[t]
            m /= rec.lam * rec.branches
        return m

    def total_mass(self, n=None):
        n = self.n if n is None else n
        return sum((self.m_star(r) for r, t in self.roots().items() if t <= n), Fraction(0))

    def max_atom(self, n=None):
        """Largest single-address mass at the complete stage ``n`` (0 when empty)."""
        n = self.n if n is None else n
        best = Fraction(0)
        for r, born in self.roots().items():
            if born > n:
                continue
            m = self.m_star(r)
            for t in range(born, n + 1):
                m /= self.records[t].lam * self.records[t].branches
            best = max(best, m)
        return best

    def split_index_of(self, addr):
        """Family start layer -> split index, for every splitting stage the element lived through."""
        out = {}
        born = self.birth(addr)
        for t in range(max(born, 2), len(addr) // 2 + 1):
            rec = self.records[t]
            if rec.case == "b" and rec.family is not None and rec.family.kind == "kaleidoscope":
                out[rec.family.start] = self.rank(t, addr[:2 * t])
        return out

    def gen_log(self):
        """Substage actions as JSON-ready dicts, in order."""
        out = []
        for rec in self.records[2:]:
            for e in rec.new:
                item = {"stage": rec.n, "kind": "add_mass" if e.kind == "mass" else "add_witness",
                        "addresses": [list(e.address)], "root": e.root,
                        "mass": _frac(self.m_star(e.root))}
                if e.kind == "witness":
                    item["demand"] = e.template
                    item["anchors"] = [list(a) for a in e.anchors]
                out.append(item)
            if rec.lam is not None:
                out.append({"stage": rec.n, "kind": "duplicate", "lambda": rec.lam,
                            "child_mass_factor": _frac(Fraction(1, rec.lam))})
            if rec.phase == 3:
                item = {"stage": rec.n, "kind": "split" if rec.case == "b" else "extend",
                        "alpha": rec.alpha, "size": rec.size}
                if rec.family is not None:
                    item["split_id"] = rec.family.start
                    item["family"] = rec.family.kind
                    item["child_mass_factor"] = _frac(Fraction(1, rec.branches))
                out.append(item)
        return out

    def __repr__(self):
        return f"LimitStage(n={self.n}, phase={self.record.phase}, size={self.size})"


def _frac(q):
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}"


# -- substages -----------------------------------------------------------------------
def init_stages_01(cls, m_star=None, seed=0) -> LimitStage:
    if not getattr(cls, "constant_free", True):
        raise ConstantsUnsupported(f"class {cls.name} has constant symbols")
    sig1 = cls.signature_at(cls.initial_layers())
    stage0 = StageRecord(0, sig1, sig1, alpha=0, phase=3, lam=1)
    stage1 = StageRecord(1, sig1, sig1, alpha=1, phase=3, lam=1)
    return LimitStage(cls, [stage0, stage1], m_star, seed)


def _open_record(prev: LimitStage):
    if not prev.complete:
        raise ValueError("previous stage is not complete")
    n = prev.n + 1
    return StageRecord(n, prev.signature, alpha=prev.alpha_n, size_prev=prev.size)


def substage_add_mass(prev: LimitStage, m_star=None) -> LimitStage:
    rec = _open_record(prev)
    n = rec.n
    if m_star is not None:
        prev = LimitStage(prev.cls, prev.records, m_star, prev.seed, prev.mass_adjust)
    new = ()
    if n not in prev.roots():
        addr = (n,) + (0,) * (2 * n - 3)
        new = (NewElement("mass", addr, n, (), "", _pattern(prev, (), Top())),)
    rec = replace(rec, new=new, phase=0)
    return prev.with_records(prev.records + (rec,))


def _pattern(stage, anchors, demand):
    """Witness pattern from the class policy, computed on the anchors alone."""
    local = stage.kernel.local_structure(anchors, level=1)
    if stage.metric:
        local = stage.cls.realized(local)
    return stage.cls.witness_pattern(local, anchors, demand)


def _explicit_names(sig):
    return {r.name for r in sig.relations}


def template_valid(tpl: ExtensionTemplate, sig) -> bool:
    """A template is usable once all its relation symbols are explicit in ``sig``."""
    names = _explicit_names(sig)
    stack = [tpl.formula]
    while stack:
        f = stack.pop()
        if isinstance(f, Atom) and f.rel not in names:
            return False
        stack.extend(f.children())
    return True


def smallest_unused_root(stage):
    used = set(stage.roots())
    r = 0
    while r in used:
        r += 1
    return r


ANCHOR_DRAWS = 64


def _find_anchors(s, tpl, size0):
    """First of up to ANCHOR_DRAWS seeded anchor draws on which the premise holds."""
    n = s.record.n
    rng = Random(f"{s.seed}:anchors:{n}")
    for _ in range(ANCHOR_DRAWS):
        ranks = rng.sample(range(size0), tpl.arity)
        anchors = tuple(s.unrank1(n, r) for r in ranks)
        local = s.kernel.local_structure(anchors, level=1)
        env = {f"x{i}": a for i, a in enumerate(anchors)}
        if tpl.premise.evaluate(local, env):
            return anchors
    return None


def substage_add_witnesses(s: LimitStage, schedule=None) -> LimitStage:
    rec = s.record
    if rec.phase != 0:
        raise ValueError("substage n.1 must follow n.0")
    schedule = schedule or limit_schedule(s.cls)
    n = rec.n
    tpl = schedule.item(n - 1)
    notes = ()
    new = rec.new
    size0 = rec.size1
    if not template_valid(tpl, rec.sig_before):
        notes = (f"{tpl.name}: not valid in the current language",)
    elif size0 < tpl.arity:
        notes = (f"{tpl.name}: too few elements",)
    else:
        anchors = _find_anchors(s, tpl, size0)
        if anchors is None:
            notes = (f"{tpl.name}: premise fails on every drawn anchor tuple",)
        else:
            root = smallest_unused_root(s)
            addr = (root,) + (0,) * (2 * n - 3)
            pattern = _pattern(s, anchors, tpl.conclusion)
            new = new + (NewElement("witness", addr, root, anchors, tpl.name, pattern),)
    rec = replace(rec, new=new, phase=1, notes=rec.notes + notes)
    return s.with_records(s.records[:-1] + (rec,))


def substage_duplicate(s: LimitStage) -> LimitStage:
    rec = s.record
    if rec.phase != 1:
        raise ValueError("substage n.2 must follow n.1")
    rec = replace(rec, lam=lambda_min(rec.n), phase=2)
    return s.with_records(s.records[:-1] + (rec,))


def _split_signature(s, rec, width):
    """Signature and constants of a split of stage ``rec`` into ``width`` elements."""
    cls = s.cls
    sig = rec.sig_before
    if s.metric:
        params = split_parameters(sig, [], width)
        return cls.split_signature(sig, width, params), split_constants(params)
    fam = cls.split_family(sig.layers, width)
    return Signature(sig.relations, sig.layers + fam.count, sig.families + (fam,)), None


def substage_expand_split(s: LimitStage) -> LimitStage:
    rec = s.record
    if rec.phase != 2:
        raise ValueError("substage n.3 must follow n.2")
    cls = s.cls
    ell = cls.declared_splitting_order
    if ell is not None and ell <= rec.size2:
        width = rec.size2 * 2
        sig, consts = _split_signature(s, rec, width)
        fam = sig.families[-1]
        alpha = rec.alpha + (sig.layers - rec.sig_before.layers)
        rec = replace(rec, sig=sig, alpha=alpha, branches=2, case="b", family=fam,
                      split_consts=consts, phase=3)
    else:
        empty = QfType(FinStructure(rec.sig_before, [], {}, check=False))
        sig = cls.extend_language(empty, rec.sig_before.layers + 1).signature
        rec = replace(rec, sig=sig, alpha=rec.alpha + 1, branches=1, case="a", phase=3)
    return s.with_records(s.records[:-1] + (rec,))


def run_stage(prev: LimitStage, schedule=None) -> LimitStage:
    s = substage_add_mass(prev)
    s = substage_add_witnesses(s, schedule)
    s = substage_duplicate(s)
    return substage_expand_split(s)


def build_limit(cls, depth, seed=0, schedule=None, m_star=None) -> LimitStage:
    """Run the construction through stage ``depth`` (>= 1)."""
    s = init_stages_01(cls, m_star, seed)
    schedule = schedule or limit_schedule(cls)
    for _ in range(2, depth + 1):
        s = run_stage(s, schedule)
    return s
