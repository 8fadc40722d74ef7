"""Staged constructions of invariant measures on countable relational structures."""

__version__ = "0.1.0"
