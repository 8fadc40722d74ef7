"""Full homomorphism densities t_ind(F, G)."""
from __future__ import annotations

from fractions import Fraction
from itertools import product

from .errors import EmptyTarget, SignatureMismatch


class Density:
    """Exact density ``numerator / denominator``."""

    __slots__ = ("numerator", "denominator")

    def __init__(self, numerator: int, denominator: int):
        if denominator <= 0 or numerator < 0 or numerator > denominator:
            raise ValueError("density must lie in [0, 1]")
        self.numerator = numerator
        self.denominator = denominator

    @property
    def value(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)

    def __eq__(self, other):
        if isinstance(other, Density):
            return self.value == other.value
        return self.value == other

    def __hash__(self):
        return hash(self.value)

    def __float__(self):
        return self.numerator / self.denominator

    def __repr__(self):
        return f"Density({self.numerator}/{self.denominator})"


def _preserves(f, g, h, rel_names) -> bool:
    elems = f.elements
    for name in rel_names:
        ar = f.signature.arity(name)
        for t in product(elems, repeat=ar):
            if f.holds(name, t) != g.holds(name, tuple(h[x] for x in t)):
                return False
    return True


def full_hom_density(f, g) -> Density:
    """Fraction of maps V(f) -> V(g) preserving every relation and every non-relation.

    Non-injective maps count whenever the collapsed tuples agree, which matches
    sampling vertices of ``g`` with replacement.
    """
    if f.signature != g.signature:
        raise SignatureMismatch("full_hom_density needs a shared signature")
    if len(g.elements) == 0:
        raise EmptyTarget("target structure has no elements")
    names = f.signature.names()
    count = 0
    for images in product(g.elements, repeat=len(f.elements)):
        h = dict(zip(f.elements, images))
        if _preserves(f, g, h, names):
            count += 1
    return Density(count, len(g.elements) ** len(f.elements))
