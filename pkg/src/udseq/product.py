"""Finitely supported approximations of a joint measure on X x Y.

The joint measure is given by its X-marginal ``nu`` and a kernel
``x -> mu^x``.  At level ``n`` the construction

1. extends the kernel from the continuity piece ``K_n`` to all of X
   (nearest-point extension ``xi_n``),
2. picks an approximation index ``m_n >= n`` for the marginal so that mass
   leaking out of the neighbourhoods ``U_{n,i}`` of ``K_i`` is at most
   ``2^-n``, and forms ``nu_n = nu_{1,m_n} + ... + nu_{n-1,m_n}``,
3. partitions X into cells on which ``xi_n`` moves by less than ``2^-n``
   in the KR metric and picks a finitely supported representative per cell,
4. returns the measure with X-projection ``nu_n`` and conditionals equal to
   the cell representatives, normalized by ``nu(K_{n-1})``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .construct import quota_measure
from .core import (
    DiscreteMeasure,
    MetricSpace,
    TestFunction,
    collect,
    integrate,
    product_space,
    require_same_space,
    sum_measures,
    variation,
)
from .errors import CoverageError, DegenerateError, DomainError, HorizonError, InputError, MassError, RangeError
from .kr import kr_distance

REPRESENTATIVE_CAP = 1024


def _pow2(n: int) -> Fraction:
    return Fraction(1, 2**n) if n >= 0 else Fraction(2 ** (-n))


def _least_exponent(eps: float) -> int:
    # least m >= 1 with 2^-m < eps
    if eps <= 0:
        raise RangeError("eps must be positive")
    m = 1
    while not _pow2(m) < eps:
        m += 1
    return m


@dataclass(frozen=True, eq=False)
class Kernel:
    """``x -> mu^x`` with declared continuity pieces ``K_1 ⊂ K_2 ⊂ ...``."""

    domain: MetricSpace
    codomain: MetricSpace
    map: tuple  # per domain point: probability measure on the codomain, or None
    pieces: tuple = ()

    def __post_init__(self):
        if len(self.map) != len(self.domain):
            raise DomainError(f"kernel map has {len(self.map)} entries for {len(self.domain)} points")
        for x, m in enumerate(self.map):
            if m is None:
                continue
            require_same_space(m, self.codomain)
            if not m.is_probability():
                raise MassError(f"kernel value at {x} has mass {m.mass}")
        pieces = tuple(frozenset(int(p) for p in k) for k in self.pieces)
        for j, k in enumerate(pieces):
            if any(not 0 <= p < len(self.domain) for p in k):
                raise DomainError(f"piece {j + 1} has ids outside the domain")
            if any(self.map[p] is None for p in k):
                raise DomainError(f"kernel undefined on piece {j + 1}")
            if j and not pieces[j - 1] <= k:
                raise DomainError(f"continuity pieces not nested at {j + 1}")
        object.__setattr__(self, "pieces", pieces)

    @classmethod
    def from_values(cls, domain: MetricSpace, codomain: MetricSpace, values: Sequence, pieces: Sequence = ()) -> "Kernel":
        return cls(domain, codomain, tuple(values), tuple(pieces))

    def at(self, x: int) -> DiscreteMeasure:
        m = self.map[x]
        if m is None:
            raise DomainError(f"kernel undefined at {x}")
        return m

    def piece(self, n: int) -> frozenset:
        if n <= 0:
            return frozenset()
        if not self.pieces:
            raise DomainError("kernel has no continuity pieces")
        return self.pieces[min(n, len(self.pieces)) - 1]

    def with_pieces(self, pieces: Sequence) -> "Kernel":
        return Kernel(self.domain, self.codomain, self.map, tuple(pieces))

    def check_schedule(self, nu: DiscreteMeasure, levels: int) -> None:
        """``nu(K_n) > 1 - 2^-n`` for ``n = 1..levels``."""
        for n in range(1, levels + 1):
            mass = nu.restrict(self.piece(n)).mass
            if not mass > 1 - _pow2(n):
                raise MassError(f"nu(K_{n}) = {mass} is not above 1 - 2^-{n}")


def mass_chain(nu: DiscreteMeasure, levels: int) -> tuple:
    """Nested pieces with ``nu(K_n) > 1 - 2^-n`` by greedy mass accumulation."""
    order = sorted(nu.atoms, key=lambda a: (-a[1], a[0]))
    out = []
    taken, mass, k = [], 0, 0
    for n in range(1, levels + 1):
        while not mass > 1 - _pow2(n) and k < len(order):
            taken.append(order[k][0])
            mass += order[k][1]
            k += 1
        out.append(frozenset(taken))
    return tuple(out)


def joint_measure(nu: DiscreteMeasure, kernel: Kernel, space: Optional[MetricSpace] = None) -> DiscreteMeasure:
    """``mu(dx dy) = mu^x(dy) nu(dx)``."""
    require_same_space(nu, kernel.domain)
    space = space or product_space(kernel.domain, kernel.codomain)
    ny = len(kernel.codomain)
    atoms = [(x * ny + y, w * v) for x, w in nu.atoms if w > 0 for y, v in kernel.at(x).atoms]
    return DiscreteMeasure(space, tuple(atoms))


def marginal_x(m: DiscreteMeasure) -> DiscreteMeasure:
    x, y = m.space.factors
    return collect(x, ((p // len(y), w) for p, w in m.atoms))


def conditionals(m: DiscreteMeasure) -> tuple:
    """Disintegration of a joint measure: ``mu^x`` where the marginal is positive, nearest such point elsewhere."""
    x, y = m.space.factors
    nu = marginal_x(m)
    rows: dict = {}
    for p, w in m.atoms:
        rows.setdefault(p // len(y), []).append((p % len(y), w))
    known = {k: collect(y, rows[k]).normalized() for k, w in nu.atoms if w > 0}
    if not known:
        raise DegenerateError("joint measure has zero mass")
    anchors = sorted(known)
    out = []
    for p in range(len(x)):
        if p in known:
            out.append(known[p])
        else:
            d = x.dist[p, anchors]
            out.append(known[anchors[int(np.argmin(d))]])
    return tuple(out)


# ---------------------------------------------------------------------------
# kernel extension and partition


@dataclass(frozen=True, eq=False)
class ExtendedKernel:
    level: int
    anchors: tuple  # nearest point of K_n for each x
    values: tuple  # xi_n^x

    def __getitem__(self, x: int) -> DiscreteMeasure:
        return self.values[x]

    def __len__(self) -> int:
        return len(self.values)


def extend_kernel(kernel: Kernel, n: int) -> ExtendedKernel:
    """Nearest-point extension of the kernel from ``K_n``; ties go to the lowest id."""
    anchors = sorted(kernel.piece(n))
    if not anchors:
        raise DegenerateError(f"K_{n} is empty")
    d = kernel.domain.dist[:, anchors]
    nearest = tuple(anchors[int(i)] for i in np.argmin(d, axis=1))
    return ExtendedKernel(level=n, anchors=nearest, values=tuple(kernel.at(a) for a in nearest))


class _KRCache:
    # kernels take few distinct values; distances are memoized per object pair
    def __init__(self):
        self._memo: dict = {}

    def __call__(self, a: DiscreteMeasure, b: DiscreteMeasure) -> float:
        if a is b:
            return 0.0
        key = (id(a), id(b)) if id(a) < id(b) else (id(b), id(a))
        if key not in self._memo:
            self._memo[key] = (kr_distance(a, b)[0], a, b)
        return self._memo[key][0]


@dataclass(frozen=True, eq=False)
class KernelPartition:
    level: int
    cells: tuple  # tuple of point-id tuples
    centers: tuple
    representatives: tuple
    cell_of: tuple
    representative_sizes: tuple

    @property
    def radius(self) -> Fraction:
        return _pow2(self.level)

    def representative(self, x: int) -> DiscreteMeasure:
        if not 0 <= x < len(self.cell_of):
            raise CoverageError(f"point {x} not covered by the partition")
        return self.representatives[self.cell_of[x]]

    def kernel_gaps(self, xi: ExtendedKernel, kr: Optional[Callable] = None) -> list:
        """``d(xi_n^x, mu_n^x)`` for every x."""
        kr = kr or _KRCache()
        return [kr(xi[x], self.representative(x)) for x in range(len(xi))]

    def diameters(self, xi: ExtendedKernel, kr: Optional[Callable] = None) -> list:
        kr = kr or _KRCache()
        return [max((kr(xi[a], xi[b]) for a in cell for b in cell), default=0.0) for cell in self.cells]


def build_partition(xi: ExtendedKernel, n: Optional[int] = None, kr: Optional[Callable] = None) -> KernelPartition:
    """Greedy ball cover of the kernel image in (P(Y), d).

    Points are swept in id order; a point opens a new cell when it is at
    least ``2^-(n+1)`` from every existing centre, and otherwise joins the
    nearest centre, so cells have KR-diameter below ``2^-n``.
    """
    n = xi.level if n is None else n
    kr = kr or _KRCache()
    half = float(_pow2(n + 1))
    centers: list = []
    members: list = []
    cell_of = []
    for x in range(len(xi)):
        dists = [kr(xi[x], xi[c]) for c in centers]
        if not dists or min(dists) >= half:
            centers.append(x)
            members.append([x])
            cell_of.append(len(centers) - 1)
        else:
            i = int(np.argmin(dists))
            members[i].append(x)
            cell_of.append(i)
    reps, sizes = [], []
    radius = float(_pow2(n))
    for c in centers:
        rep, size = _representative(xi[c], radius, kr)
        reps.append(rep)
        sizes.append(size)
    return KernelPartition(
        level=n,
        cells=tuple(tuple(m) for m in members),
        centers=tuple(centers),
        representatives=tuple(reps),
        cell_of=tuple(cell_of),
        representative_sizes=tuple(sizes),
    )


def _representative(center: DiscreteMeasure, radius: float, kr) -> tuple:
    # smallest quota discretization within ``radius`` of the centre
    for size in range(1, REPRESENTATIVE_CAP + 1):
        rep = quota_measure(center, size)
        if kr_distance(center, rep)[0] <= radius:
            return rep, size
    return center, len(center.support)


# ---------------------------------------------------------------------------
# marginal approximators and the schedule


def quota_marginals(nu: DiscreteMeasure, pieces: Sequence, horizon: int) -> tuple:
    """``nu_{l,i} = nu(K_l \\ K_{l-1}) * quota_measure(shell_l, i)`` for ``i = 1..horizon``."""
    out = []
    prev: frozenset = frozenset()
    for k in pieces:
        shell = nu.restrict(set(k) - prev)
        prev = frozenset(k)
        if shell.mass == 0:
            out.append((DiscreteMeasure.zero(nu.space),) * horizon)
            continue
        unit = shell.normalized()
        out.append(tuple(quota_measure(unit, i).scaled(shell.mass) for i in range(1, horizon + 1)))
    return tuple(out)


def leaky_marginals(nu: DiscreteMeasure, pieces: Sequence, horizon: int, rate: Fraction = Fraction(1, 2)) -> tuple:
    """Quota approximators that park a fraction ``rate^i`` of their mass on the point farthest from ``K_l``.

    They still converge weakly to the shell restrictions, but not from
    inside ``K_l``, so the schedule has real work to do.
    """
    space = nu.space
    base = quota_marginals(nu, pieces, horizon)
    out = []
    for k, seq in zip(pieces, base):
        outside = sorted(set(range(len(space))) - set(k))
        if not outside or seq[0].mass == 0:
            out.append(seq)
            continue
        gaps = space.dist[np.ix_(outside, sorted(k))].min(axis=1)
        far = outside[int(np.argmax(gaps))]
        row = []
        for i, m in enumerate(seq, start=1):
            leak = rate**i
            row.append(m.scaled(1 - leak) + DiscreteMeasure.dirac(space, far, m.mass * leak))
        out.append(tuple(row))
    return tuple(out)


@dataclass(frozen=True)
class ApproxSchedule:
    level: int
    m: int
    leakage: object
    neighborhoods: tuple  # U_{n,1}, ..., U_{n,n-1}

    @property
    def bound(self) -> Fraction:
        return _pow2(self.level)


def default_dilation(space: MetricSpace) -> float:
    d = space.dist[space.dist > 0]
    return float(d.min()) / 2 if d.size else 1.0


def neighborhoods(kernel: Kernel, n: int, r: float, kr=None) -> tuple:
    """``U_{n,i}``, i < n: r-dilations of ``K_i`` on which ``d(xi_i, xi_n) <= 2^-n``, made increasing in i."""
    kr = kr or _KRCache()
    xs = range(len(kernel.domain))
    xi_n = extend_kernel(kernel, n)
    tol = float(_pow2(n))
    good = []
    for j in range(1, n):
        kj = sorted(kernel.piece(j))
        xi_j = extend_kernel(kernel, j)
        near = kernel.domain.dist[:, kj].min(axis=1) < r
        good.append(frozenset(x for x in xs if near[x] and kr(xi_j[x], xi_n[x]) <= tol))
    # U_{n,i} = W_{n,i} ∩ ... ∩ W_{n,n-1}: contains K_i, keeps the closeness, nested upward
    out = []
    acc = frozenset(xs)
    for w in reversed(good):
        acc = acc & w
        out.append(acc)
    return tuple(reversed(out))


def select_schedule(marginals: Sequence, kernel: Kernel, n: int, r: Optional[float] = None, kr=None) -> ApproxSchedule:
    """Smallest ``m_n >= n`` with ``sum_{i<n} nu_{i,m_n}(X \\ U_{n,i}) <= 2^-n``."""
    if n < 1:
        raise RangeError("level must be >= 1")
    r = default_dilation(kernel.domain) if r is None else r
    if r <= 0:
        raise RangeError("dilation radius must be positive")
    horizon = min(len(s) for s in marginals)
    hood = neighborhoods(kernel, n, r, kr) if n > 1 else ()
    bound = _pow2(n)
    best = None
    for m in range(n, horizon + 1):
        leak = sum((_approx(marginals, i, m).outside(hood[i - 1]) for i in range(1, n)), Fraction(0))
        if best is None or leak < best:
            best = leak
        if leak <= bound:
            return ApproxSchedule(level=n, m=m, leakage=leak, neighborhoods=hood)
    raise HorizonError(f"level {n}: no index in {n}..{horizon} keeps leakage <= 2^-{n}; best {best}", best=best)


def _approx(marginals, l: int, i: int) -> DiscreteMeasure:
    if l > len(marginals):
        return DiscreteMeasure.zero(marginals[0][0].space)
    return marginals[l - 1][i - 1]


def scheduled_marginal(marginals: Sequence, n: int, m_n: int, upto: Optional[int] = None) -> DiscreteMeasure:
    """``nu_{1,m_n} + ... + nu_{upto,m_n}`` (``upto`` defaults to ``n - 1``)."""
    upto = n - 1 if upto is None else upto
    space = marginals[0][0].space
    return sum_measures(space, [_approx(marginals, l, m_n) for l in range(1, upto + 1)])


# ---------------------------------------------------------------------------
# product measure and verification


def product_measure(nu_n: DiscreteMeasure, part: KernelPartition, space: Optional[MetricSpace] = None) -> DiscreteMeasure:
    """Measure on X x Y with X-projection ``nu_n`` and conditional ``sigma_{n,i(x)}`` at x."""
    if space is None:
        space = product_space(nu_n.space, part.representatives[0].space)
    x, y = space.factors
    require_same_space(nu_n, x)
    ny = len(y)
    return DiscreteMeasure(space, tuple(
        (p * ny + q, w * v) for p, w in nu_n.atoms for q, v in part.representative(p).atoms
    ))


def product_test_family(space: MetricSpace) -> list:
    """Constant, point-indicator psi on X times constant and distance-bump phi on Y."""
    x, y = space.factors
    psis = [("1", np.ones(len(x)))] + [(f"1[x={x.points[i]}]", np.eye(len(x))[i]) for i in range(len(x))]
    phis = [("1", np.ones(len(y)))] + [
        (f"bump[y={y.points[j]}]", np.clip(1.0 - y.dist[j], -1.0, 1.0)) for j in range(len(y))
    ]
    return [TestFunction.product(space, psi, phi, name=f"{a}*{b}") for a, psi in psis for b, phi in phis]


@dataclass(frozen=True)
class ProductReport:
    eps: float
    m: int
    threshold: int
    rows: tuple  # (level, test name, error)
    worst_ratio: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.worst_ratio <= 1.0


def verify_product_convergence(
    target: DiscreteMeasure,
    measures: dict,
    tests: Optional[Sequence[TestFunction]],
    eps: float,
    smoothed: Optional[Sequence[DiscreteMeasure]] = None,
) -> ProductReport:
    """Check ``|int f dmu - int f dmu_n| <= 6 eps`` for product test functions past the threshold level.

    ``m`` is the least integer with ``2^-m < eps``; the threshold ``N > m``
    is the first materialized level from which the X-marginals integrate
    ``psi(x) int phi d xi_m^x`` to within ``eps`` of the target's, for every
    test.  ``smoothed`` gives ``xi_m``; by default the target's own
    conditionals are used.
    """
    if not isinstance(target, DiscreteMeasure) or target.space.factors is None:
        raise InputError("target must be a measure on a product space")
    if eps <= 0:
        raise RangeError("eps must be positive")
    tests = list(tests) if tests else product_test_family(target.space)
    for f in tests:
        if f.kind != "product":
            raise DomainError("verification uses product test functions")
        require_same_space(f, target)
    levels = sorted(measures)
    if not levels:
        raise HorizonError("no constructed measures supplied")
    m = _least_exponent(eps)
    smoothed = smoothed or conditionals(target)
    nu = marginal_x(target)
    nx = len(target.space.factors[0])
    inner = [np.array([integrate(smoothed[x], f.phi) for x in range(nx)]) * f.psi for f in tests]

    def fits(level):
        nu_n = marginal_x(measures[level])
        return all(abs(integrate(nu, g) - integrate(nu_n, g)) < eps for g in inner)

    threshold = None
    for level in reversed([lv for lv in levels if lv > m]):
        if not fits(level):
            break
        threshold = level
    if threshold is None:
        raise HorizonError(f"no materialized level > {m} satisfies the marginal condition")
    rows = []
    worst = 0.0
    for level in levels:
        if level < threshold:
            continue
        for f in tests:
            err = abs(integrate(target, f) - integrate(measures[level], f))
            rows.append((level, f.name, err))
            worst = max(worst, err)
    return ProductReport(eps=eps, m=m, threshold=threshold, rows=tuple(rows), worst_ratio=worst / (6 * eps), bound=6 * eps)


# ---------------------------------------------------------------------------
# full pipeline


@dataclass(frozen=True, eq=False)
class LevelRecord:
    level: int
    schedule: ApproxSchedule
    extension: ExtendedKernel
    partition: KernelPartition
    marginal: DiscreteMeasure  # nu_n, mass nu(K_{n-1})
    raw: DiscreteMeasure  # mu_n before normalization
    measure: DiscreteMeasure  # mu_n / mu_n(X)
    sup_kernel_gap: float
    marginal_err: float
    product_err: float

    @property
    def m(self) -> int:
        return self.schedule.m


@dataclass(frozen=True, eq=False)
class ProductRun:
    nu: DiscreteMeasure
    kernel: Kernel
    space: MetricSpace
    target: DiscreteMeasure
    marginals: tuple
    levels: tuple
    tests: tuple
    report: Optional[ProductReport] = None

    def level(self, n: int) -> LevelRecord:
        for rec in self.levels:
            if rec.level == n:
                return rec
        raise RangeError(f"level {n} not built")

    def trim_norm(self, n: int, m: int):
        """``||nu_n - nu_{1,m_n} - ... - nu_{m,m_n}||``."""
        rec = self.level(n)
        return variation(rec.marginal, scheduled_marginal(self.marginals, n, rec.m, upto=min(m, n - 1)))

    def rows(self) -> list:
        return [
            (r.level, r.m, r.schedule.leakage, r.sup_kernel_gap, r.marginal_err, r.product_err)
            for r in self.levels
        ]

    def estimates(self, eps: float) -> list:
        """Left-hand sides of the intermediate estimates of the convergence argument, per level.

        With ``m`` the least integer such that ``2^-m < eps`` and ``g_k(x) = psi(x) int phi d xi_k^x``:

        - ``smoothing``: ``|int g_m dnu - int g dnu| <= 2^-m`` (level independent),
        - ``switch``: ``|int g_m dnu_n - int g_n dnu_n| <= 2^(2-m)`` for ``n >= m``,
        - ``marginal``: ``|int g_m dnu - int g_m dnu_n|`` (below ``eps`` past the threshold),
        - ``psi_only``: ``|int psi dnu_n - int psi dnu|`` (at most ``3 eps`` past the threshold),
        - ``trim``: ``||nu_n - nu_{1,m_n} - ... - nu_{m,m_n}|| <= 2^-m``.

        Maxima are over the run's test functions.
        """
        m = _least_exponent(eps)
        nx = len(self.kernel.domain)
        xi_m = extend_kernel(self.kernel, m)
        exact = [self.kernel.at(x) if self.kernel.map[x] is not None else xi_m[x] for x in range(nx)]

        def g(kernel_values, f):
            return np.array([integrate(kernel_values[x], f.phi) for x in range(nx)]) * f.psi

        gm = [g(xi_m, f) for f in self.tests]
        smoothing = max(abs(integrate(self.nu, a) - integrate(self.nu, g(exact, f))) for a, f in zip(gm, self.tests))
        out = []
        for rec in self.levels:
            nu_n = rec.marginal
            switch = max(abs(integrate(nu_n, a) - integrate(nu_n, g(rec.extension, f))) for a, f in zip(gm, self.tests))
            marginal = max(abs(integrate(self.nu, a) - integrate(nu_n, a)) for a in gm)
            out.append({
                "level": rec.level,
                "m": m,
                "smoothing": smoothing,
                "switch": switch if rec.level >= m else None,
                "marginal": marginal,
                "psi_only": rec.marginal_err,
                "trim": self.trim_norm(rec.level, m) if rec.level > m else None,
            })
        return out


def run_product(
    nu: DiscreteMeasure,
    kernel: Kernel,
    levels: int,
    eps: Optional[float] = None,
    r: Optional[float] = None,
    horizon: Optional[int] = None,
    marginals: Optional[Sequence] = None,
    tests: Optional[Sequence[TestFunction]] = None,
) -> ProductRun:
    """Build ``mu_2, ..., mu_levels`` and, when ``eps`` is given, verify the 6 eps bound."""
    require_same_space(nu, kernel.domain)
    nu.require_probability()
    if levels < 2:
        raise RangeError("need at least two levels (nu_1 is the zero measure)")
    if not kernel.pieces:
        kernel = kernel.with_pieces(mass_chain(nu, levels))
    kernel.check_schedule(nu, levels)
    pieces = [kernel.piece(n) for n in range(1, levels + 1)]
    horizon = horizon or 4 * levels
    marginals = tuple(marginals) if marginals is not None else quota_marginals(nu, pieces, horizon)
    space = product_space(kernel.domain, kernel.codomain)
    target = joint_measure(nu, kernel, space)
    tests = tuple(tests) if tests else tuple(product_test_family(space))
    psis = {f.psi.tobytes(): f.psi for f in tests}
    kr = _KRCache()
    records = []
    for n in range(2, levels + 1):
        sched = select_schedule(marginals, kernel, n, r, kr)
        nu_n = scheduled_marginal(marginals, n, sched.m)
        expected = nu.restrict(kernel.piece(n - 1)).mass
        if nu_n.mass != expected and abs(float(nu_n.mass) - float(expected)) > 1e-12:
            raise MassError(f"nu_{n}(X) = {nu_n.mass}, expected nu(K_{n - 1}) = {expected}")
        if nu_n.mass == 0:
            raise DegenerateError(f"nu_{n} is the zero measure")
        xi = extend_kernel(kernel, n)
        part = build_partition(xi, n, kr)
        raw = product_measure(nu_n, part, space)
        measure = raw.normalized()
        records.append(
            LevelRecord(
                level=n,
                schedule=sched,
                extension=xi,
                partition=part,
                marginal=nu_n,
                raw=raw,
                measure=measure,
                sup_kernel_gap=max(part.kernel_gaps(xi, kr)),
                marginal_err=max(abs(integrate(nu_n, psi) - integrate(nu, psi)) for psi in psis.values()),
                product_err=max(abs(integrate(target, f) - integrate(measure, f)) for f in tests),
            )
        )
    run = ProductRun(nu, kernel, space, target, marginals, tuple(records), tests)
    if eps is not None:
        smoothed = extend_kernel(kernel, _least_exponent(eps)).values
        report = verify_product_convergence(target, {r.level: r.measure for r in records}, tests, eps, smoothed)
        run = ProductRun(nu, kernel, space, target, marginals, tuple(records), tests, report)
    return run


# ---------------------------------------------------------------------------
# images under maps


@dataclass(frozen=True, eq=False)
class PointMap:
    domain: MetricSpace
    codomain: MetricSpace
    images: tuple  # image id per domain point, or None where undefined
    lipschitz: float = math.inf

    def __post_init__(self):
        if len(self.images) != len(self.domain):
            raise DomainError("need one image entry per domain point")
        defined = [p for p, q in enumerate(self.images) if q is not None]
        for p in defined:
            if not 0 <= self.images[p] < len(self.codomain):
                raise DomainError(f"image of {p} outside the codomain")
        if math.isfinite(self.lipschitz) and defined:
            idx = np.array(defined)
            img = np.array([self.images[p] for p in defined])
            excess = self.codomain.dist[np.ix_(img, img)] - self.lipschitz * self.domain.dist[np.ix_(idx, idx)]
            if np.any(excess > 1e-12):
                raise DomainError(f"map is not {self.lipschitz}-Lipschitz")


def pushforward(m: DiscreteMeasure, t: PointMap) -> DiscreteMeasure:
    """Image measure: atom ``(p, w)`` goes to ``(T(p), w)``; collisions add."""
    require_same_space(m, t.domain)
    undefined = [p for p, _ in m.atoms if t.images[p] is None]
    if undefined:
        raise DomainError(f"map undefined at atoms {undefined}")
    return collect(t.codomain, ((t.images[p], w) for p, w in m.atoms))
