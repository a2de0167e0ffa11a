"""Seeded random instances shared by the self-test, the test suite and the scripts."""
from __future__ import annotations

from fractions import Fraction

import numpy as np
from scipy.sparse.csgraph import shortest_path

from .core import DiscreteMeasure, MetricSpace
from .product import PointMap


def random_space(rng: np.random.Generator, n: int, high: float = 5.0, label: str = "") -> MetricSpace:
    """Shortest-path closure of a random symmetric matrix with entries in ``(0, high]``."""
    w = rng.uniform(0.0, high, size=(n, n))
    w = np.triu(w, 1)
    w = w + w.T
    w[w == 0] = high  # csgraph reads zero off-diagonal entries as missing edges
    np.fill_diagonal(w, 0.0)
    return MetricSpace.from_matrix(shortest_path(w, directed=False), label=label)


def random_measure(rng: np.random.Generator, space: MetricSpace, k: int, exact: bool = False) -> DiscreteMeasure:
    """Probability measure on ``k`` distinct random points."""
    ids = rng.choice(len(space), size=min(k, len(space)), replace=False)
    if exact:
        raw = [int(v) for v in rng.integers(1, 20, size=len(ids))]
        s = sum(raw)
        return DiscreteMeasure(space, tuple((int(p), Fraction(r, s)) for p, r in zip(ids, raw)))
    raw = rng.uniform(0.05, 1.0, size=len(ids))
    raw = raw / raw.sum()
    atoms = [(int(p), float(w)) for p, w in zip(ids, raw)]
    # push the rounding residue into the last atom so the mass is 1 to double precision
    atoms[-1] = (atoms[-1][0], 1.0 - float(np.sum([w for _, w in atoms[:-1]])))
    return DiscreteMeasure(space, tuple(atoms))


def random_weights(rng: np.random.Generator, k: int, denominator: int = 60) -> list:
    """``k`` positive exact weights summing to 1."""
    raw = [int(v) for v in rng.integers(1, denominator, size=k)]
    s = sum(raw)
    return [Fraction(r, s) for r in raw]


def random_contraction(rng: np.random.Generator, nx: int, ny: int) -> PointMap:
    """Random map ``X -> Y`` with the metric on Y scaled so that the map is 1-Lipschitz."""
    x = random_space(rng, nx, label="X")
    y = random_space(rng, ny, label="Y")
    images = tuple(int(v) for v in rng.integers(0, ny, size=nx))
    img = np.array(images)
    dy = y.dist[np.ix_(img, img)]
    moved = dy > 0
    scale = 1.0
    if moved.any():
        scale = min(1.0, float((x.dist[moved] / dy[moved]).min()) * (1 - 1e-9))
    y = MetricSpace.from_matrix(y.dist * scale, label="Y")
    return PointMap(x, y, images, lipschitz=1.0)
