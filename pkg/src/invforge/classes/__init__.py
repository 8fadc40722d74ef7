"""Amalgamation-class strategies and the name registry."""
from .base import (AmalgamationClass, ExtensionTemplate, canonical_witness, contains,
                   extend_language, iterated_duplicate, split_type, strong_amalgam)
from .graphs import GraphClass, TriangleFreeClass
from .kaleidoscope import KaleidoscopeClass
from .metric import (MetricClass, MetricThresholds, RationalMetricSpace, complete_to_TMS,
                     metric_to_structure, structure_to_metric, threshold_sequence)

SHIPPED = ("graphs", "triangle-free", "kaleidoscope:graphs", "kaleidoscope:triangle-free", "metric")


def get_class(name: str) -> AmalgamationClass:
    """Look up a class by its registry name."""
    if name == "graphs":
        return GraphClass()
    if name == "triangle-free":
        return TriangleFreeClass()
    if name == "metric":
        return MetricClass()
    if name.startswith("kaleidoscope"):
        _, _, base = name.partition(":")
        return KaleidoscopeClass(base or "graphs")
    raise ValueError(f"unknown class {name!r}; expected one of {', '.join(SHIPPED)}")


__all__ = [
    "AmalgamationClass", "ExtensionTemplate", "GraphClass", "TriangleFreeClass",
    "KaleidoscopeClass", "MetricClass", "MetricThresholds", "RationalMetricSpace",
    "complete_to_TMS", "metric_to_structure", "structure_to_metric", "threshold_sequence",
    "contains", "strong_amalgam", "canonical_witness", "iterated_duplicate",
    "extend_language", "split_type", "get_class", "SHIPPED",
]
