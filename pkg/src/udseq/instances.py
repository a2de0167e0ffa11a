"""Fixed instances used by the experiment scripts and the test suite."""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from .core import DiscreteMeasure, MetricSpace
from .glue import PieceDecomposition
from .product import Kernel


def grid_space(k: int = 10) -> MetricSpace:
    """Cell centres ``((i + 1/2)/k, (j + 1/2)/k)`` of the unit square, row-major."""
    c = (np.arange(k) + 0.5) / k
    coords = np.array([(x, y) for x in c for y in c])
    return MetricSpace.euclidean(coords, label=f"grid{k}")


def grid_target(k: int = 10) -> DiscreteMeasure:
    return DiscreteMeasure.uniform(grid_space(k))


def rings_space(per_ring: int = 10, rings: int = 3) -> MetricSpace:
    """``rings`` concentric circles of radius 1, 2, ... with ``per_ring`` points each."""
    coords = []
    for r in range(1, rings + 1):
        for t in range(per_ring):
            a = 2 * np.pi * (t + 0.5 * (r - 1)) / per_ring
            coords.append((r * np.cos(a), r * np.sin(a)))
    return MetricSpace.euclidean(np.array(coords), label=f"rings{rings}x{per_ring}")


def rings_decomposition(horizon: int = 300, per_ring: int = 10, rings: int = 3) -> PieceDecomposition:
    """Pieces ``X_j`` = first ``j`` rings; target weights proportional to ``(p mod 7) + 1``."""
    space = rings_space(per_ring, rings)
    raw = [(p % 7) + 1 for p in range(len(space))]
    s = sum(raw)
    target = DiscreteMeasure(space, tuple((p, Fraction(r, s)) for p, r in enumerate(raw)))
    pieces = [range(per_ring * j) for j in range(1, rings + 1)]
    return PieceDecomposition.from_target(space, target, pieces, horizon)


def two_piece_decomposition(horizon: int = 200) -> PieceDecomposition:
    """Three points on a line; ``X_1 = {a}``, ``X_2 = {a, b, c}``."""
    space = MetricSpace.from_matrix([[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]], points=["a", "b", "c"], label="line3")
    target = DiscreteMeasure(space, ((0, Fraction(1, 2)), (1, Fraction(1, 3)), (2, Fraction(1, 6))))
    return PieceDecomposition.from_target(space, target, [[0], [0, 1, 2]], horizon)


def convergent_sequence_space(size: int) -> MetricSpace:
    """Points ``1/(j+1)``, ``j = 0..size-1``: a countable compact set materialized to ``size`` points."""
    return MetricSpace.euclidean(np.array([[1.0 / (j + 1)] for j in range(size)]), label=f"harmonic{size}")


def geometric_decomposition(size: int = 40, horizon: int = 120) -> PieceDecomposition:
    """Target ``2^-(j+1)`` on point ``j`` (the last point takes the remainder); ``X_j = {0, ..., j-1}``."""
    space = convergent_sequence_space(size)
    w = [Fraction(1, 2 ** (j + 1)) for j in range(size - 1)]
    w.append(1 - sum(w))
    target = DiscreteMeasure(space, tuple(enumerate(w)))
    return PieceDecomposition.from_target(space, target, [range(j) for j in range(1, size + 1)], horizon)


def escaping_family(size: int = 50) -> PieceDecomposition:
    """``nu_n = delta_{p_n}`` over an enumeration with no target: mass escapes every finite piece."""
    space = convergent_sequence_space(size)
    measures = tuple(DiscreteMeasure.dirac(space, j) for j in range(size))
    return PieceDecomposition(space, tuple(range(j) for j in range(1, size + 1)), measures=measures)


def product_4x4():
    """Marginal and two-valued kernel on 4-point line segments X and Y."""
    x = MetricSpace.euclidean(np.array([[0.0], [0.3], [1.0], [1.4]]), points=["x0", "x1", "x2", "x3"], label="X")
    y = MetricSpace.euclidean(np.array([[0.0], [0.5], [1.0], [1.5]]), points=["y0", "y1", "y2", "y3"], label="Y")
    nu = DiscreteMeasure(x, ((0, Fraction(1, 2)), (1, Fraction(1, 4)), (2, Fraction(1, 8)), (3, Fraction(1, 8))))
    low = DiscreteMeasure(y, ((0, Fraction(1, 2)), (1, Fraction(1, 2))))
    high = DiscreteMeasure(y, ((1, Fraction(1, 3)), (2, Fraction(1, 3)), (3, Fraction(1, 3))))
    kernel = Kernel.from_values(x, y, [low, low, high, high])
    return nu, kernel
