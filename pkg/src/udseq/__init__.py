"""Uniformly distributed point sequences for discrete measures on metric spaces."""
from .core import DiscreteMeasure, MetricSpace, PointSequence, TestFunction, empirical, integrate, product_space, validate_space
from .kr import kr_distance, kr_dual, kr_oracle

__all__ = [
    "DiscreteMeasure",
    "MetricSpace",
    "PointSequence",
    "TestFunction",
    "empirical",
    "integrate",
    "kr_distance",
    "kr_dual",
    "kr_oracle",
    "product_space",
    "validate_space",
]
