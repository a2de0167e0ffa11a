"""Gluing approximations over an increasing chain of pieces.

Given pieces ``X_1 ⊂ X_2 ⊂ ...`` of a countable space, a target ``mu`` and,
for every piece ``j``, finitely supported measures ``mu_{j,k}`` on ``X_j``
of mass ``mu(X_j \\ X_{j-1})`` approximating the restriction of ``mu`` to
that shell, the glued measures

    nu_n = c_n^{-1} (mu_{1,n} + ... + mu_{n,n}),   c_n = mu(X_n)

converge weakly to ``mu`` and are uniformly tight.  Only finitely many
pieces and approximation indices are materialized; every sup below is over
the materialized horizon, which certificates record.

The plain (non-tight) variant is the same pipeline with
:func:`tightness_certificate` skipped.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .construct import quota_measure
from .core import MASS_TOL, DiscreteMeasure, MetricSpace, TestFunction, integrate, require_same_space, sum_measures, total
from .errors import DegenerateError, DomainError, HorizonError, MassError, NoCertificateError, RangeError


def _same(a, b) -> bool:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a == b
    return abs(float(a) - float(b)) <= MASS_TOL


@dataclass(frozen=True, eq=False)
class PieceDecomposition:
    space: MetricSpace
    pieces: tuple
    target: Optional[DiscreteMeasure] = None
    approximators: tuple = ()
    measures: tuple = ()  # explicit family to certify when no target is given

    def __post_init__(self):
        pieces = tuple(frozenset(int(p) for p in piece) for piece in self.pieces)
        object.__setattr__(self, "pieces", pieces)
        object.__setattr__(self, "approximators", tuple(tuple(a) for a in self.approximators))
        object.__setattr__(self, "measures", tuple(self.measures))
        if not pieces:
            raise DomainError("need at least one piece")
        n = len(self.space)
        for j, piece in enumerate(pieces):
            if any(not 0 <= p < n for p in piece):
                raise DomainError(f"piece {j + 1} has ids outside the space")
            if j and not pieces[j - 1] <= piece:
                raise DomainError(f"pieces are not nested at index {j + 1}")
        if self.target is not None:
            require_same_space(self.target, self.space)
            self.target.require_probability()
            covered = self.target.restrict(pieces[-1]).mass
            if not _same(covered, 1 if isinstance(covered, Fraction) else 1.0):
                raise MassError(f"pieces carry target mass {covered}, expected 1")
        if self.approximators:
            if self.target is None:
                raise DomainError("approximators need a target")
            if len(self.approximators) != len(pieces):
                raise DomainError(f"{len(self.approximators)} approximator lists for {len(pieces)} pieces")
            for j, seq in enumerate(self.approximators, start=1):
                want = self.shell_mass(j)
                for k, m in enumerate(seq, start=1):
                    require_same_space(m, self.space)
                    if not set(m.support) <= pieces[j - 1]:
                        raise DomainError(f"approximator ({j},{k}) leaves piece {j}")
                    if not _same(m.mass, want):
                        raise MassError(f"approximator ({j},{k}) has mass {m.mass}, expected {want}")
        for m in self.measures:
            require_same_space(m, self.space)

    @classmethod
    def from_target(cls, space: MetricSpace, target: DiscreteMeasure, pieces: Sequence, horizon: int) -> "PieceDecomposition":
        """Quota-based approximators: ``mu_{j,k} = mass_j * quota_measure(shell_j, k)``."""
        bare = cls(space, tuple(pieces), target)
        approx = []
        for j in range(1, len(bare.pieces) + 1):
            shell = bare.restriction(j)
            mass = shell.mass
            if mass == 0:
                approx.append([DiscreteMeasure.zero(space)] * horizon)
                continue
            unit = shell.normalized()
            approx.append([quota_measure(unit, k).scaled(mass) for k in range(1, horizon + 1)])
        return cls(space, bare.pieces, target, tuple(approx))

    @property
    def horizon(self) -> int:
        if self.approximators:
            return min(len(a) for a in self.approximators)
        return len(self.measures)

    def chain(self, j: int) -> frozenset:
        """``X_j`` with ``X_0 = ∅`` and ``X_j = X_P`` beyond the last materialized piece."""
        if j <= 0:
            return frozenset()
        return self.pieces[min(j, len(self.pieces)) - 1]

    def shell(self, j: int) -> frozenset:
        return self.chain(j) - self.chain(j - 1)

    def restriction(self, j: int) -> DiscreteMeasure:
        """``I_{X_j \\ X_{j-1}} . mu``."""
        return self.target.restrict(self.shell(j))

    def shell_mass(self, j: int):
        return self.restriction(j).mass

    def tail_mass(self, j: int):
        """``sum_{n >= j} mu(X_n \\ X_{n-1})``."""
        return self.target.outside(self.chain(j - 1))

    def approximator(self, j: int, k: int) -> DiscreteMeasure:
        if j > len(self.pieces):
            return DiscreteMeasure.zero(self.space)
        if not 1 <= k <= len(self.approximators[j - 1]):
            raise HorizonError(f"approximator ({j},{k}) not materialized")
        return self.approximators[j - 1][k - 1]


def glue_parts(decomp: PieceDecomposition, n: int):
    """``(mu_{1,n} + ... + mu_{n,n}, c_n)`` with the identity ``c_n = mu(X_n)`` enforced."""
    if n < 1:
        raise RangeError("n must be >= 1")
    if decomp.target is None or not decomp.approximators:
        raise DomainError("gluing needs a target and approximators")
    if n > decomp.horizon:
        raise HorizonError(f"n={n} beyond materialized horizon {decomp.horizon}")
    parts = [decomp.approximator(j, n) for j in range(1, min(n, len(decomp.pieces)) + 1)]
    summed = sum_measures(decomp.space, parts)
    c_n = total([m.mass for m in parts])
    expected = decomp.target.restrict(decomp.chain(n)).mass
    if not _same(c_n, expected):
        raise MassError(f"c_{n} = {c_n} differs from mu(X_{n}) = {expected}")
    return summed, c_n


def glue(decomp: PieceDecomposition, n: int) -> DiscreteMeasure:
    summed, c_n = glue_parts(decomp, n)
    if c_n == 0:
        raise DegenerateError(f"c_{n} = 0: all mass lies outside the first {n} pieces")
    return summed.scaled(1 / c_n)


def first_index(decomp: PieceDecomposition, eps: float) -> int:
    """Smallest ``n1`` with ``sum_{n >= n1} mu(X_n \\ X_{n-1}) < eps``."""
    n1 = 1
    while decomp.tail_mass(n1) >= eps:
        n1 += 1
    return n1


@dataclass(frozen=True)
class ConvergenceReport:
    eps: float
    n1: int
    m: int
    horizon: int
    errors: tuple  # (n, |int f dmu - int f dnu_n|) for n in m..horizon
    achieved: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.achieved <= self.bound


def glue_convergence_check(decomp: PieceDecomposition, f: TestFunction, eps: float) -> ConvergenceReport:
    """Find ``n1`` and ``m`` as in the gluing argument and verify the ``4 eps`` bound for ``n >= m``."""
    if eps <= 0:
        raise RangeError("eps must be positive")
    if f.values.size and float(abs(f.values).max()) > 1 + 1e-12:
        raise DomainError("test function must satisfy |f| <= 1")
    horizon = decomp.horizon
    n1 = first_index(decomp, eps)
    if n1 > horizon:
        raise HorizonError(
            f"n1={n1} beyond horizon {horizon}; tail mass at horizon {float(decomp.tail_mass(horizon))}",
            best=float(decomp.tail_mass(horizon)),
        )
    # per-shell integral error at each k, over shells 1..n1
    target_parts = [integrate(decomp.restriction(j), f) for j in range(1, n1 + 1)]
    worst = []
    for k in range(1, horizon + 1):
        worst.append(max(abs(target_parts[j - 1] - integrate(decomp.approximator(j, k), f)) for j in range(1, n1 + 1)))
    # m: smallest index >= n1 after which every shell error stays below eps / n1
    m = None
    for cand in range(horizon, n1 - 1, -1):
        if worst[cand - 1] >= eps / n1:
            break
        m = cand
    if m is None:
        raise HorizonError(
            f"per-shell error {worst[-1]:.3g} not below eps/n1 = {eps / n1:.3g} within horizon {horizon}",
            best=worst[-1],
        )
    exact = integrate(decomp.target, f)
    errors = tuple((n, abs(exact - integrate(glue(decomp, n), f))) for n in range(m, horizon + 1))
    return ConvergenceReport(
        eps=eps,
        n1=n1,
        m=m,
        horizon=horizon,
        errors=errors,
        achieved=max(e for _, e in errors),
        bound=4 * eps,
    )


@dataclass(frozen=True)
class TightnessEntry:
    eps: float
    pieces_used: int
    compact: frozenset
    bound: object  # exact when the measures are exact


@dataclass(frozen=True, eq=False)
class TightnessCertificate:
    measures: tuple
    entries: tuple
    horizon: int

    def recompute(self, entry: TightnessEntry):
        return max((m.outside(entry.compact) for m in self.measures), default=0)

    def check(self) -> bool:
        return all(self.recompute(e) == e.bound and e.bound <= 3 * e.eps for e in self.entries)

    @property
    def eps_table(self) -> dict:
        return {e.eps: (e.compact, e.bound) for e in self.entries}


def _piece_core(decomp: PieceDecomposition, j: int) -> frozenset:
    # X_j cut down to where its approximators actually put mass
    if not decomp.approximators or j > len(decomp.pieces):
        return decomp.chain(j)
    seen = set()
    for m in decomp.approximators[j - 1]:
        seen.update(m.support)
    return decomp.chain(j) & frozenset(seen)


def tightness_certificate(measures: Sequence[DiscreteMeasure], decomp: PieceDecomposition, eps_list: Sequence[float]) -> TightnessCertificate:
    """For each eps a finite ``K`` with ``sup_n measure_n(X \\ K) <= 3 eps``.

    With a target, ``K = K_1 ∪ ... ∪ K_{n1}`` for the ``n1`` of the gluing
    argument.  Without one, ``K`` is the first piece ``X_J`` (``J`` below the
    last materialized piece, which stands in for the unmaterialized rest of
    the space) that captures all but ``3 eps`` of every measure.
    """
    measures = tuple(measures)
    for m in measures:
        require_same_space(m, decomp.space)
    entries = []
    npieces = len(decomp.pieces)
    for eps in eps_list:
        if eps <= 0:
            raise RangeError("eps must be positive")
        if decomp.target is not None:
            used = min(first_index(decomp, eps), npieces)
            compact = frozenset().union(*(_piece_core(decomp, j) for j in range(1, used + 1)))
            bound = max((m.outside(compact) for m in measures), default=0)
            if bound > 3 * eps:
                raise NoCertificateError(f"eps={eps}: sup mass outside K is {float(bound)} > {3 * eps}", best=bound)
        else:
            tried = []
            for used in range(1, npieces):
                compact = decomp.chain(used)
                bound = max((m.outside(compact) for m in measures), default=0)
                tried.append(bound)
                if bound <= 3 * eps:
                    break
            else:
                best = min(tried, default=1)
                raise NoCertificateError(
                    f"eps={eps}: mass escapes every materialized piece; smallest achievable bound {float(best)}",
                    best=best,
                )
        entries.append(TightnessEntry(eps=eps, pieces_used=used, compact=compact, bound=bound))
    return TightnessCertificate(measures=measures, entries=tuple(entries), horizon=len(measures))
