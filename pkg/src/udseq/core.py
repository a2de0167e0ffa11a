"""Metric spaces, finitely supported measures, point sequences and test functions.

Point identifiers are dense integer indices into ``MetricSpace.points``.
Weights are either ``fractions.Fraction`` (exact, built from counts and
quotas) or ``float``; a measure whose weights are all fractions is *exact*
and its mass checks carry no tolerance.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from numbers import Rational
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence, Union

import numpy as np

from .errors import DomainError, MassError, MetricAxiomError, RangeError, SpaceMismatchError

Weight = Union[Fraction, float]

TRIANGLE_TOL = 1e-9
MASS_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class Violation(NamedTuple):
    kind: str
    points: tuple
    detail: str = ""


@dataclass(frozen=True, eq=False)
class MetricSpace:
    points: tuple
    dist: np.ndarray
    label: str = ""
    coords: Optional[np.ndarray] = None
    factors: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(str(p) for p in self.points))
        object.__setattr__(self, "dist", _frozen(self.dist))
        if self.coords is not None:
            object.__setattr__(self, "coords", _frozen(self.coords))
        n = len(self.points)
        if self.dist.shape != (n, n):
            raise DomainError(f"distance matrix has shape {self.dist.shape}, expected {(n, n)}")
        if len(set(self.points)) != n:
            dup = [p for p, c in Counter(self.points).items() if c > 1]
            raise DomainError(f"duplicate point identifiers: {dup}")

    @classmethod
    def from_matrix(cls, dist, points: Optional[Sequence[str]] = None, label: str = "") -> "MetricSpace":
        dist = np.asarray(dist, dtype=float)
        if points is None:
            points = [str(i) for i in range(len(dist))]
        return cls(points=tuple(points), dist=dist, label=label)

    @classmethod
    def euclidean(cls, coords, points: Optional[Sequence[str]] = None, label: str = "") -> "MetricSpace":
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        diff = coords[:, None, :] - coords[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=-1))
        if points is None:
            points = [str(i) for i in range(len(coords))]
        return cls(points=tuple(points), dist=dist, label=label, coords=coords)

    def __len__(self) -> int:
        return len(self.points)

    def __repr__(self) -> str:
        return f"MetricSpace(label={self.label!r}, size={len(self)})"

    def d(self, p: int, q: int) -> float:
        return float(self.dist[p, q])

    @cached_property
    def truncated(self) -> np.ndarray:
        """Ground cost ``min(dist, 2)`` used by the bounded-Lipschitz metric."""
        return _frozen(np.minimum(self.dist, 2.0))

    @cached_property
    def violations(self) -> list:
        return validate_space(self)

    def check(self) -> "MetricSpace":
        # validation is O(n^3); the verdict is cached on first use
        if self.violations:
            raise MetricAxiomError(
                f"space {self.label!r} violates metric axioms ({len(self.violations)} entries)",
                violations=self.violations,
            )
        return self

    def index(self, name: str) -> int:
        try:
            return self.points.index(name)
        except ValueError:
            raise DomainError(f"unknown point {name!r}") from None

    def same_as(self, other: "MetricSpace") -> bool:
        if self is other:
            return True
        return (
            self.points == other.points
            and self.label == other.label
            and np.array_equal(self.dist, other.dist)
        )


def validate_space(s: MetricSpace) -> list:
    """All metric-axiom violations of ``s``; empty iff it is a metric space."""
    d = s.dist
    out = []
    n = len(s)
    for i in np.flatnonzero(np.abs(np.diag(d)) > 0):
        out.append(Violation("identity", (int(i), int(i)), f"d={d[i, i]!r}"))
    for i, j in np.argwhere(d < 0):
        out.append(Violation("nonnegativity", (int(i), int(j)), f"d={d[i, j]!r}"))
    for i, j in np.argwhere(np.triu(d != d.T, 1)):
        out.append(Violation("symmetry", (int(i), int(j)), f"{d[i, j]!r} != {d[j, i]!r}"))
    if not np.all(np.isfinite(d)):
        for i, j in np.argwhere(~np.isfinite(d)):
            out.append(Violation("finiteness", (int(i), int(j)), f"d={d[i, j]!r}"))
        return out
    for j in range(n):
        # d[i,k] > d[i,j] + d[j,k]
        excess = d - (d[:, j][:, None] + d[j, :][None, :])
        for i, k in np.argwhere(excess > TRIANGLE_TOL):
            out.append(
                Violation("triangle", (int(i), int(j), int(k)), f"{d[i, k]!r} > {d[i, j]!r} + {d[j, k]!r}")
            )
    out.sort(key=lambda v: (v.kind, v.points))
    return out


def product_space(x: MetricSpace, y: MetricSpace, label: Optional[str] = None) -> MetricSpace:
    """X x Y with the sum metric; point ``(i, j)`` has id ``i * len(y) + j``."""
    dist = x.dist[:, None, :, None] + y.dist[None, :, None, :]
    n = len(x) * len(y)
    points = tuple(f"({a},{b})" for a in x.points for b in y.points)
    return MetricSpace(
        points=points,
        dist=dist.reshape(n, n),
        label=label if label is not None else f"{x.label}x{y.label}",
        factors=(x, y),
    )


def _as_weight(w) -> Weight:
    if isinstance(w, Fraction):
        return w
    if isinstance(w, Rational):
        return Fraction(w)
    if isinstance(w, (float, np.floating)):
        return float(w)
    if isinstance(w, (np.integer,)):
        return Fraction(int(w))
    raise DomainError(f"unsupported weight type {type(w).__name__}")


def total(weights: Iterable[Weight]) -> Weight:
    """Exact sum for fractions, compensated sum otherwise."""
    weights = list(weights)
    if all(isinstance(w, Fraction) for w in weights):
        return sum(weights, Fraction(0))
    return math.fsum(float(w) for w in weights)


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    space: MetricSpace
    atoms: tuple

    def __post_init__(self):
        atoms = tuple(sorted((int(p), _as_weight(w)) for p, w in self.atoms))
        n = len(self.space)
        seen = set()
        for p, w in atoms:
            if not 0 <= p < n:
                raise DomainError(f"atom id {p} outside space of size {n}")
            if p in seen:
                raise DomainError(f"duplicate atom id {p}")
            seen.add(p)
            if not (w >= 0) or (isinstance(w, float) and not math.isfinite(w)):
                raise DomainError(f"negative or non-finite weight {w!r} at atom {p}")
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def from_weights(cls, space: MetricSpace, weights) -> "DiscreteMeasure":
        """Build from a mapping ``id -> weight`` or a dense sequence; zero weights are dropped."""
        items = weights.items() if isinstance(weights, Mapping) else enumerate(weights)
        return cls(space, tuple((p, w) for p, w in items if w != 0))

    @classmethod
    def dirac(cls, space: MetricSpace, p: int, mass: Weight = Fraction(1)) -> "DiscreteMeasure":
        return cls(space, ((p, mass),))

    @classmethod
    def uniform(cls, space: MetricSpace, ids: Optional[Iterable[int]] = None) -> "DiscreteMeasure":
        ids = sorted(set(range(len(space)) if ids is None else ids))
        return cls(space, tuple((p, Fraction(1, len(ids))) for p in ids))

    @classmethod
    def zero(cls, space: MetricSpace) -> "DiscreteMeasure":
        return cls(space, ())

    def __len__(self) -> int:
        return len(self.atoms)

    def __repr__(self) -> str:
        body = ", ".join(f"{p}: {w}" for p, w in self.atoms[:8])
        more = ", ..." if len(self.atoms) > 8 else ""
        return f"DiscreteMeasure({{{body}{more}}})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return self.space.same_as(other.space) and self.atoms == other.atoms

    __hash__ = None

    @property
    def support(self) -> tuple:
        return tuple(p for p, w in self.atoms if w > 0)

    @property
    def is_exact(self) -> bool:
        return all(isinstance(w, Fraction) for _, w in self.atoms)

    @cached_property
    def mass(self) -> Weight:
        return total(w for _, w in self.atoms)

    def is_probability(self) -> bool:
        if self.is_exact:
            return self.mass == 1
        return abs(self.mass - 1.0) <= MASS_TOL

    def require_probability(self) -> "DiscreteMeasure":
        if not self.is_probability():
            raise MassError(f"expected a probability measure, mass is {self.mass}")
        return self

    def weight(self, p: int) -> Weight:
        for q, w in self.atoms:
            if q == p:
                return w
        return Fraction(0) if self.is_exact else 0.0

    def as_dict(self) -> dict:
        return dict(self.atoms)

    def dense(self) -> np.ndarray:
        v = np.zeros(len(self.space))
        for p, w in self.atoms:
            v[p] = float(w)
        return v

    def scaled(self, c: Weight) -> "DiscreteMeasure":
        return DiscreteMeasure(self.space, tuple((p, w * c) for p, w in self.atoms))

    def normalized(self) -> "DiscreteMeasure":
        m = self.mass
        if m == 0:
            raise MassError("cannot normalize a zero measure")
        if isinstance(m, Fraction):
            return DiscreteMeasure(self.space, tuple((p, w / m) for p, w in self.atoms))
        return DiscreteMeasure(self.space, tuple((p, float(w) / m) for p, w in self.atoms))

    def restrict(self, ids: Iterable[int]) -> "DiscreteMeasure":
        """The measure with density ``I_A`` with respect to ``self``."""
        ids = set(ids)
        return DiscreteMeasure(self.space, tuple((p, w) for p, w in self.atoms if p in ids))

    def outside(self, ids: Iterable[int]) -> Weight:
        ids = set(ids)
        return total(w for p, w in self.atoms if p not in ids)

    def __add__(self, other: "DiscreteMeasure") -> "DiscreteMeasure":
        require_same_space(self, other)
        acc = dict(self.atoms)
        for p, w in other.atoms:
            acc[p] = acc[p] + w if p in acc else w
        return DiscreteMeasure(self.space, tuple(acc.items()))


def collect(space: MetricSpace, pairs: Iterable[tuple]) -> DiscreteMeasure:
    """Measure from ``(id, weight)`` pairs; repeated ids add up."""
    acc: dict = {}
    for p, w in pairs:
        acc.setdefault(int(p), []).append(w)
    return DiscreteMeasure(space, tuple((p, total(ws)) for p, ws in acc.items()))


def sum_measures(space: MetricSpace, measures: Iterable[DiscreteMeasure]) -> DiscreteMeasure:
    pairs = []
    for m in measures:
        require_same_space(m.space, space)
        pairs.extend(m.atoms)
    return collect(space, pairs)


def variation(a: DiscreteMeasure, b: DiscreteMeasure) -> Weight:
    """Total variation norm ``||a - b||``."""
    require_same_space(a, b)
    da, db = a.as_dict(), b.as_dict()
    return total(abs(da.get(p, 0) - db.get(p, 0)) for p in set(da) | set(db))


def require_same_space(a, b) -> None:
    sa = a.space if isinstance(a, (DiscreteMeasure, PointSequence, TestFunction)) else a
    sb = b.space if isinstance(b, (DiscreteMeasure, PointSequence, TestFunction)) else b
    if not sa.same_as(sb):
        raise SpaceMismatchError(f"objects live on different spaces ({sa.label!r} vs {sb.label!r})")


@dataclass(frozen=True, eq=False)
class PointSequence:
    space: MetricSpace
    ids: tuple = ()

    def __post_init__(self):
        ids = tuple(int(i) for i in self.ids)
        n = len(self.space)
        bad = [i for i in ids if not 0 <= i < n]
        if bad:
            raise DomainError(f"sequence ids outside space: {bad[:5]}")
        object.__setattr__(self, "ids", ids)

    def __len__(self) -> int:
        return len(self.ids)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointSequence):
            return NotImplemented
        return self.space.same_as(other.space) and self.ids == other.ids

    __hash__ = None

    def extended(self, more: Iterable[int]) -> "PointSequence":
        return PointSequence(self.space, self.ids + tuple(more))

    def counts(self, n: Optional[int] = None) -> Counter:
        return Counter(self.ids[: len(self.ids) if n is None else n])


def empirical(seq: PointSequence, n: int) -> DiscreteMeasure:
    """``n^{-1}(delta_{x_1} + ... + delta_{x_n})`` with exact rational weights."""
    if not 1 <= n <= len(seq):
        raise RangeError(f"n={n} outside 1..{len(seq)}")
    counts = seq.counts(n)
    return DiscreteMeasure(seq.space, tuple((p, Fraction(c, n)) for p, c in counts.items()))


@dataclass(frozen=True, eq=False)
class TestFunction:
    """Bounded test function on the points of a space.

    ``kind == "lipschitz-bounded"``: |f| <= 1 and Lip(f) <= 1.
    ``kind == "product"``: f(x, y) = psi(x) phi(y) on a product space, with
    |psi| <= 1, |phi| <= 1 and Lip(phi) <= 1.
    """

    __test__ = False  # not a pytest class

    space: MetricSpace
    kind: str
    values: np.ndarray
    psi: Optional[np.ndarray] = None
    phi: Optional[np.ndarray] = None
    name: str = ""

    @classmethod
    def lipschitz(cls, space: MetricSpace, values, name: str = "", tol: float = 1e-12) -> "TestFunction":
        v = _frozen(values)
        if v.shape != (len(space),):
            raise DomainError(f"need one value per point, got shape {v.shape}")
        _check_bounded_lipschitz(space.dist, v, tol)
        return cls(space, "lipschitz-bounded", v, name=name)

    @classmethod
    def product(cls, space: MetricSpace, psi, phi, name: str = "", tol: float = 1e-12) -> "TestFunction":
        if space.factors is None:
            raise DomainError("product test functions need a product space")
        x, y = space.factors
        psi, phi = _frozen(psi), _frozen(phi)
        if psi.shape != (len(x),) or phi.shape != (len(y),):
            raise DomainError("psi/phi lengths do not match the factor spaces")
        if np.any(np.abs(psi) > 1 + tol):
            raise DomainError("|psi| exceeds 1")
        _check_bounded_lipschitz(y.dist, phi, tol)
        return cls(space, "product", _frozen(np.outer(psi, phi).ravel()), psi=psi, phi=phi, name=name)

    def __call__(self, p: int) -> float:
        return float(self.values[p])


def _check_bounded_lipschitz(dist: np.ndarray, v: np.ndarray, tol: float) -> None:
    if np.any(np.abs(v) > 1 + tol):
        raise DomainError("|f| exceeds 1")
    gap = np.abs(v[:, None] - v[None, :]) - dist
    if np.any(gap > tol):
        i, j = np.unravel_index(np.argmax(gap), gap.shape)
        raise DomainError(f"Lipschitz constant exceeds 1 at points ({i}, {j})")


def integrate(m: DiscreteMeasure, f) -> float:
    """``sum_i weight_i * f(point_i)``.  ``f`` is a TestFunction or an array of point values."""
    values = f.values if isinstance(f, TestFunction) else np.asarray(f, dtype=float)
    if isinstance(f, TestFunction):
        require_same_space(m, f)
    terms = []
    for p, w in m.atoms:
        v = float(values[p]) if p < len(values) else math.nan
        if not math.isfinite(v):
            raise DomainError(f"test function undefined at atom {p}")
        terms.append(float(w) * v)
    return math.fsum(terms)
