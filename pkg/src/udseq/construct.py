"""Uniformly distributed sequences for finitely supported targets.

Three constructions: greedy descent of the KR distance, largest-remainder
quota blocks, and block concatenation of a weakly convergent sequence of
finitely supported measures.  :func:`verify_ud` certifies a sequence at a
finite set of checkpoints.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .core import DiscreteMeasure, PointSequence, empirical, require_same_space
from .errors import DomainError, RangeError, ShapeError
from .kr import kr_distance, transport

TIE_TOL = 1e-12


def _exact_weights(target: DiscreteMeasure) -> list:
    atoms = [(p, Fraction(w)) for p, w in target.atoms if w > 0]
    if not atoms:
        raise DomainError("target has empty support")
    s = sum(w for _, w in atoms)
    return [(p, w / s) for p, w in atoms]


def quota_counts(weights: Sequence[Fraction], n: int) -> list:
    """Largest-remainder apportionment of ``n`` seats; remainder ties go to the lowest index."""
    exact = [n * w for w in weights]
    counts = [math.floor(x) for x in exact]
    surplus = n - sum(counts)
    order = sorted(range(len(weights)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in order[:surplus]:
        counts[i] += 1
    return counts


def quota_sequence(target: DiscreteMeasure, n: int) -> PointSequence:
    """Length-``n`` sequence with largest-remainder counts, interleaved by largest deficit."""
    if n < 1:
        raise RangeError(f"n must be >= 1, got {n}")
    atoms = _exact_weights(target)
    weights = [w for _, w in atoms]
    counts = quota_counts(weights, n)
    denom = math.lcm(*(w.denominator for w in weights))
    num = [w.numerator * (denom // w.denominator) for w in weights]
    placed = [0] * len(atoms)
    ids = []
    for t in range(1, n + 1):
        best, best_def = -1, None
        for i, c in enumerate(counts):
            if placed[i] >= c:
                continue
            deficit = t * num[i] - placed[i] * denom
            if best_def is None or deficit > best_def:
                best, best_def = i, deficit
        placed[best] += 1
        ids.append(atoms[best][0])
    return PointSequence(target.space, tuple(ids))


def quota_measure(target: DiscreteMeasure, n: int) -> DiscreteMeasure:
    return empirical(quota_sequence(target, n), n)


def default_block_lengths(k: int, first: int = 1) -> list:
    """``b_1 = first`` and ``b_j = j * (b_1 + ... + b_{j-1})``."""
    out = []
    for j in range(1, k + 1):
        out.append(first if j == 1 else j * sum(out))
    return out


def measures_to_sequence(approx: Sequence[DiscreteMeasure], block_lengths: Optional[Sequence[int]] = None) -> PointSequence:
    if not approx:
        raise ShapeError("need at least one approximating measure")
    if block_lengths is None:
        block_lengths = default_block_lengths(len(approx))
    if len(block_lengths) != len(approx):
        raise ShapeError(f"{len(approx)} measures but {len(block_lengths)} block lengths")
    if any(b < 1 for b in block_lengths) or any(b > c for b, c in zip(block_lengths, block_lengths[1:])):
        raise RangeError("block lengths must be >= 1 and non-decreasing")
    space = approx[0].space
    ids: list = []
    for m, b in zip(approx, block_lengths):
        require_same_space(m.space, space)
        m.require_probability()
        ids.extend(quota_sequence(m, b).ids)
    return PointSequence(space, tuple(ids))


def greedy_extend(target: DiscreteMeasure, prefix: PointSequence, steps: int) -> PointSequence:
    """Append ``steps`` points, each minimizing the KR distance of the new empirical measure.

    Candidates are the target's support; ties go to the lowest point id.
    Candidates are scanned in order of a weak-duality lower bound built from
    the previous step's optimal potential, and the scan stops once the bound
    exceeds the best exact value found.
    """
    require_same_space(target, prefix)
    pool = sorted(target.support)
    if not pool:
        raise DomainError("target has empty support")
    target.require_probability()
    if steps < 0:
        raise RangeError("steps must be >= 0")
    nodes = sorted(set(pool) | set(prefix.ids))
    pos = {p: i for i, p in enumerate(nodes)}
    cand = [pos[p] for p in pool]
    cost = target.space.truncated[np.ix_(nodes, nodes)]
    tw = np.zeros(len(nodes))
    for p, w in target.atoms:
        tw[pos[p]] = float(w)
    counts = np.zeros(len(nodes))
    for p in prefix.ids:
        counts[pos[p]] += 1
    n = len(prefix)
    f = np.zeros(len(nodes))
    ids = list(prefix.ids)
    cand = np.asarray(cand)
    for _ in range(steps):
        bounds = _bounds(f, counts, tw, n, cand)
        open_ = np.ones(len(cand), dtype=bool)
        best = None
        while open_.any():
            # lowest current bound first, ties by point id (cand is sorted)
            k = int(np.flatnonzero(open_)[np.argmin(bounds[open_])])
            open_[k] = False
            c = int(cand[k])
            if best is not None:
                if bounds[k] > best[0] + TIE_TOL:
                    break
                if bounds[k] >= best[0] - TIE_TOL and c > best[1]:
                    continue  # can at best tie, and loses the tie-break
            counts[c] += 1
            value, pot = _scaled_kr(counts, (n + 1) * tw, cost)
            counts[c] -= 1
            value /= n + 1
            if best is None or value < best[0] - TIE_TOL or (abs(value - best[0]) <= TIE_TOL and c < best[1]):
                best = (value, c, pot)
            # every optimal potential is feasible for all candidates' problems
            np.maximum(bounds, _bounds(pot, counts, tw, n, cand), out=bounds)
        _, c, f = best
        counts[c] += 1
        n += 1
        ids.append(nodes[c])
    return PointSequence(target.space, tuple(ids))


def _scaled_kr(a: np.ndarray, b: np.ndarray, cost: np.ndarray):
    # transport cost between equal-mass vectors, plus an optimal potential over all nodes
    diff = a - b
    scale = max(1.0, float(a.sum()))
    src = np.flatnonzero(diff > TIE_TOL * scale)
    dst = np.flatnonzero(diff < -TIE_TOL * scale)
    if src.size == 0 or dst.size == 0:
        return 0.0, np.zeros(len(a))
    flows, _, v = transport(list(diff[src]), list(-diff[dst]), cost[np.ix_(src, dst)])
    value = math.fsum(x * cost[src[i], dst[j]] for i, j, x in flows)
    f = np.min(cost[:, dst] - v[None, :], axis=1)
    return value, f


@dataclass(frozen=True, eq=False)
class UdCertificate:
    target: DiscreteMeasure
    sequence: PointSequence
    horizon: int
    checkpoints: tuple
    distances: tuple
    tolerance: float
    verdict: bool

    @property
    def monotone_tail(self) -> bool:
        return _monotone_tail(self.distances)

    def rows(self) -> list:
        return list(zip(self.checkpoints, self.distances))


def _monotone_tail(distances, tol: float = TIE_TOL) -> bool:
    if not distances:
        return False
    top = int(np.argmax(distances))
    tail = distances[top:]
    return all(b <= a + tol for a, b in zip(tail, tail[1:]))


def verify_ud(target: DiscreteMeasure, seq: PointSequence, checkpoints: Sequence[int], tolerance: float) -> UdCertificate:
    require_same_space(target, seq)
    checkpoints = [int(n) for n in checkpoints]
    if not checkpoints:
        raise RangeError("need at least one checkpoint")
    if any(b <= a for a, b in zip(checkpoints, checkpoints[1:])):
        raise RangeError("checkpoints must be strictly ascending")
    if checkpoints[0] < 1 or checkpoints[-1] > len(seq):
        raise RangeError(f"checkpoints must lie in 1..{len(seq)}")
    distances = tuple(kr_distance(empirical(seq, n), target)[0] for n in checkpoints)
    verdict = distances[-1] <= tolerance and _monotone_tail(distances)
    return UdCertificate(
        target=target,
        sequence=seq,
        horizon=len(seq),
        checkpoints=tuple(checkpoints),
        distances=distances,
        tolerance=tolerance,
        verdict=verdict,
    )


def _bounds(f, counts, tw, n, cand):
    # weak duality: KR(empirical + delta_c, target) >= <f, counts + e_c>/(n+1) - <f, target>
    return float(counts @ f) / (n + 1) - float(tw @ f) + f[cand] / (n + 1)
