"""Kantorovich-Rubinshtein (bounded-Lipschitz) distance between finitely supported
probability measures.

For probability measures ``p, q`` on a metric space,

    sup { int f dp - int f dq : |f| <= 1, Lip(f) <= 1 }

equals the optimal transport cost under the truncated ground cost
``min(d, 2)``.  Three independent routes are provided:

* :func:`kr_distance` -- transportation simplex on the surplus/deficit graph,
* :func:`kr_dual` -- the sup itself as a linear program over potentials,
* :func:`kr_oracle` -- dense rational simplex on the full transport polytope.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from ._flow import transport_float
from .core import DiscreteMeasure, require_same_space
from .errors import CapacityError, MassError

FEAS_TOL = 1e-10
DUAL_CAP = 64
ORACLE_CAP = 8


@dataclass(frozen=True, eq=False)
class TransportPlan:
    source: DiscreteMeasure
    target: DiscreteMeasure
    flows: tuple  # (source point, target point, mass)
    cost: float

    def marginal_errors(self) -> tuple:
        rows, cols = {}, {}
        for i, j, x in self.flows:
            rows[i] = rows.get(i, 0) + x
            cols[j] = cols.get(j, 0) + x
        sw, tw = self.source.as_dict(), self.target.as_dict()
        row_err = max((abs(rows.get(p, 0) - sw.get(p, 0)) for p in set(rows) | set(sw)), default=0)
        col_err = max((abs(cols.get(p, 0) - tw.get(p, 0)) for p in set(cols) | set(tw)), default=0)
        return row_err, col_err

    def recomputed_cost(self) -> float:
        c = self.source.space.truncated
        return math.fsum(float(x) * c[i, j] for i, j, x in self.flows)

    def check(self, tol: float = FEAS_TOL) -> bool:
        if any(x < 0 for _, _, x in self.flows):
            return False
        exact = self.source.is_exact and self.target.is_exact
        row_err, col_err = self.marginal_errors()
        if exact and (row_err != 0 or col_err != 0):
            return False
        return row_err <= tol and col_err <= tol and abs(self.recomputed_cost() - self.cost) <= tol


@dataclass(frozen=True, eq=False)
class DualPotential:
    """Feasible potential: |f| <= 1 and |f(p) - f(q)| <= d(p, q) on every pair."""

    space: object
    values: np.ndarray

    def check(self, tol: float = 1e-9) -> bool:
        v = self.values
        if np.any(np.abs(v) > 1 + tol):
            return False
        return not np.any(np.abs(v[:, None] - v[None, :]) - self.space.dist > tol)

    def gap(self, p: DiscreteMeasure, q: DiscreteMeasure) -> float:
        """``int f dp - int f dq``."""
        return math.fsum([float(w) * self.values[i] for i, w in p.atoms] + [-float(w) * self.values[i] for i, w in q.atoms])


def _check_pair(p: DiscreteMeasure, q: DiscreteMeasure) -> None:
    require_same_space(p, q)
    for m in (p, q):
        if m.mass == 0:
            raise MassError("zero-mass measures have no KR distance")
        m.require_probability()
    p.space.check()


# ---------------------------------------------------------------------------
# transportation simplex


def transport(a: list, b: list, cost: np.ndarray, compiled: bool = True):
    """Minimum-cost transport of supplies ``a`` to demands ``b``.

    Weights may be fractions (flows stay exact, pure-Python pivoting) or
    floats (compiled pivoting unless ``compiled=False``).  Returns
    ``(flows, u, v)`` where ``flows`` lists ``(i, j, x)`` over the final basis
    and ``u, v`` are optimal dual potentials with ``u_i + v_j <= cost_ij``.
    """
    cost = np.asarray(cost, dtype=float)
    exact = all(isinstance(w, Fraction) for w in list(a) + list(b))
    if exact:
        return _transport_generic(list(a), list(b), cost)
    a = [float(w) for w in a]
    b = [float(w) for w in b]
    # absorb float roundoff so the problem is exactly balanced
    b[-1] = max(b[-1] + math.fsum(a) - math.fsum(b), 0.0)
    if not compiled:
        return _transport_generic(a, b, cost)
    bi, bj, x, u, v, ok = transport_float(np.array(a), np.array(b), np.ascontiguousarray(cost))
    if not ok:
        raise RuntimeError("transportation simplex did not converge")
    flows = sorted((int(i), int(j), float(q)) for i, j, q in zip(bi, bj, x))
    return flows, u, v


def _transport_generic(supply: list, demand: list, cost: np.ndarray, max_iter: Optional[int] = None):
    m, n = len(supply), len(demand)

    # least-cost starting basis: each allocation retires one line, giving a spanning tree
    basis: dict = {}
    row_done, col_done = [False] * m, [False] * n
    rows_left, cols_left = m, n
    for idx in np.argsort(cost, axis=None, kind="stable"):
        i, j = divmod(int(idx), n)
        if row_done[i] or col_done[j]:
            continue
        x = min(supply[i], demand[j])
        basis[(i, j)] = x
        supply[i] -= x
        demand[j] -= x
        if rows_left == 1 and cols_left == 1:
            break
        if cols_left == 1 or (rows_left > 1 and supply[i] <= demand[j]):
            row_done[i] = True
            rows_left -= 1
        else:
            col_done[j] = True
            cols_left -= 1

    scale = max(1.0, float(np.max(np.abs(cost)))) if cost.size else 1.0
    tol = 1e-12 * scale
    max_iter = max_iter or 50 * (m + n) ** 2 + 100
    bland = False
    degenerate_run = 0
    for _ in range(max_iter):
        u, v, adj = _potentials(basis, m, n, cost)
        reduced = cost - u[:, None] - v[None, :]
        if bland:
            neg = np.flatnonzero(reduced.ravel() < -tol)
            if neg.size == 0:
                break
            i, j = divmod(int(neg[0]), n)
        else:
            k = int(np.argmin(reduced))
            if reduced.flat[k] >= -tol:
                break
            i, j = divmod(k, n)
        path = _tree_path(adj, i, j, m)
        minus = path[0::2]
        theta = min(basis[e] for e in minus)
        if bland:
            leave = min(e for e in minus if basis[e] == theta)
        else:
            leave = next(e for e in minus if basis[e] == theta)
        for e in minus:
            basis[e] -= theta
        for e in path[1::2]:
            basis[e] += theta
        basis[(i, j)] = theta
        del basis[leave]
        if theta == 0:
            degenerate_run += 1
            if degenerate_run > m + n:
                bland = True
        else:
            degenerate_run = 0
    else:
        raise RuntimeError("transportation simplex did not converge")
    flows = [(i, j, x) for (i, j), x in sorted(basis.items())]
    return flows, u, v


def _potentials(basis, m, n, cost):
    adj = [[] for _ in range(m + n)]  # rows 0..m-1, columns m..m+n-1
    for i, j in basis:
        adj[i].append(m + j)
        adj[m + j].append(i)
    u = np.zeros(m)
    v = np.zeros(n)
    seen = [False] * (m + n)
    seen[0] = True
    stack = [0]
    while stack:
        node = stack.pop()
        for nb in adj[node]:
            if seen[nb]:
                continue
            seen[nb] = True
            if node < m:
                v[nb - m] = cost[node, nb - m] - u[node]
            else:
                u[nb] = cost[nb, node - m] - v[node - m]
            stack.append(nb)
    return u, v, adj


def _tree_path(adj, i, j, m):
    """Tree edges from row ``i`` to column ``j`` as cells, starting at row ``i``."""
    start, goal = i, m + j
    parent = {start: None}
    queue = [start]
    for node in queue:
        if node == goal:
            break
        for nb in adj[node]:
            if nb not in parent:
                parent[nb] = node
                queue.append(nb)
    cells = []
    node = goal
    while parent[node] is not None:
        prev = parent[node]
        cells.append((prev, node - m) if prev < m else (node, prev - m))
        node = prev
    cells.reverse()
    return cells


def _split(p: DiscreteMeasure, q: DiscreteMeasure):
    """Common mass stays in place; only the signed difference is transported."""
    pw, qw = p.as_dict(), q.as_dict()
    exact = p.is_exact and q.is_exact
    zero = Fraction(0) if exact else 0.0
    stay, src, dst = [], [], []
    for k in sorted(set(pw) | set(qw)):
        a = pw.get(k, zero)
        b = qw.get(k, zero)
        if not exact:
            a, b = float(a), float(b)
        common = min(a, b)
        if common > 0:
            stay.append((k, k, common))
        if a > b:
            src.append((k, a - b))
        elif b > a:
            dst.append((k, b - a))
    return stay, src, dst


def _solve(p: DiscreteMeasure, q: DiscreteMeasure):
    stay, src, dst = _split(p, q)
    c = p.space.truncated
    if not src or not dst:
        return 0.0, stay, None
    rows = [k for k, _ in src]
    cols = [k for k, _ in dst]
    flows, u, v = transport([w for _, w in src], [w for _, w in dst], c[np.ix_(rows, cols)])
    moved = [(rows[i], cols[j], x) for i, j, x in flows if x > 0]
    value = math.fsum(float(x) * c[a, b] for a, b, x in moved)
    return value, stay + moved, (cols, v)


def kr_distance(p: DiscreteMeasure, q: DiscreteMeasure):
    """Distance and an optimal plan (ground cost ``min(d, 2)``)."""
    _check_pair(p, q)
    value, flows, _ = _solve(p, q)
    flows = tuple(sorted(flows))
    return value, TransportPlan(p, q, flows, value)


def optimal_potential(p: DiscreteMeasure, q: DiscreteMeasure):
    """Distance together with an optimal feasible potential built from the transport duals."""
    _check_pair(p, q)
    value, _, duals = _solve(p, q)
    return value, _c_transform(p.space, duals)


def _c_transform(space, duals) -> np.ndarray:
    # f(x) = min_j (c(x, j) - v_j) over deficit nodes; centred so |f| <= 1
    if duals is None:
        return np.zeros(len(space))
    cols, v = duals
    f = np.min(space.truncated[:, cols] - v[None, :], axis=1)
    return f - (f.max() + f.min()) / 2


# ---------------------------------------------------------------------------
# dual linear program


def kr_dual(p: DiscreteMeasure, q: DiscreteMeasure, cap: int = DUAL_CAP):
    """Maximize ``int f dp - int f dq`` over feasible potentials on the joint support."""
    _check_pair(p, q)
    pw, qw = p.as_dict(), q.as_dict()
    pts = sorted(set(pw) | set(qw))
    if len(pts) > cap:
        raise CapacityError(f"combined support {len(pts)} exceeds dual cap {cap}; use kr_distance")
    g = np.array([float(pw.get(k, 0)) - float(qw.get(k, 0)) for k in pts])
    d = p.space.truncated[np.ix_(pts, pts)]
    k = len(pts)
    if not np.any(g) or k == 1:
        f = np.zeros(k)
    else:
        ii, jj = np.nonzero(~np.eye(k, dtype=bool))
        a_ub = np.zeros((len(ii), k))
        a_ub[np.arange(len(ii)), ii] = 1.0
        a_ub[np.arange(len(ii)), jj] = -1.0
        res = linprog(-g, A_ub=a_ub, b_ub=d[ii, jj], bounds=[(-1.0, 1.0)] * k, method="highs")
        if res.status != 0:
            raise RuntimeError(f"dual LP failed: {res.message}")
        f = np.asarray(res.x)
        f = f - (f.max() + f.min()) / 2
    values = _extend_potential(p.space, pts, f)
    value = math.fsum(g * values[pts])
    return value, DualPotential(p.space, values)


def _extend_potential(space, pts, f) -> np.ndarray:
    # mean of the McShane and Whitney extensions, clipped: keeps Lip <= 1, |f| <= 1,
    # the values on pts, and constants constant
    upper = np.min(f[None, :] + space.dist[:, pts], axis=1)
    lower = np.max(f[None, :] - space.dist[:, pts], axis=1)
    ext = np.clip((upper + lower) / 2, -1.0, 1.0)
    ext[pts] = f
    return ext


# ---------------------------------------------------------------------------
# exact oracle


def kr_oracle(p: DiscreteMeasure, q: DiscreteMeasure, cap: int = ORACLE_CAP) -> float:
    """Distance by exact rational simplex on the full (unreduced) transport polytope."""
    _check_pair(p, q)
    pts = set(p.support) | set(q.support)
    if len(pts) > cap:
        raise CapacityError(f"combined support {len(pts)} exceeds oracle cap {cap}")
    src = [(k, Fraction(w)) for k, w in p.atoms if w > 0]
    dst = [(k, Fraction(w)) for k, w in q.atoms if w > 0]
    sp, sq = sum(w for _, w in src), sum(w for _, w in dst)
    src = [(k, w / sp) for k, w in src]
    dst = [(k, w / sq) for k, w in dst]
    cost = []
    rows = []
    ns, nd = len(src), len(dst)
    for i, (a, _) in enumerate(src):
        for j, (b, _) in enumerate(dst):
            cost.append(Fraction(min(p.space.d(a, b), 2.0)))
    for i in range(ns):
        rows.append([Fraction(1) if v // nd == i else Fraction(0) for v in range(ns * nd)])
    for j in range(nd):
        rows.append([Fraction(1) if v % nd == j else Fraction(0) for v in range(ns * nd)])
    rhs = [w for _, w in src] + [w for _, w in dst]
    return float(exact_simplex(cost, rows, rhs))


def exact_simplex(c: list, a: list, b: list) -> Fraction:
    """min c.x s.t. a x = b, x >= 0 (b >= 0), two-phase tableau with Bland's rule."""
    m, n = len(a), len(c)
    tab = [list(a[r]) + [Fraction(int(k == r)) for k in range(m)] + [Fraction(b[r])] for r in range(m)]
    basis = [n + r for r in range(m)]

    def pivot(r, col):
        piv = tab[r][col]
        tab[r] = [x / piv for x in tab[r]]
        for rr in range(len(tab)):
            if rr != r and tab[rr][col] != 0:
                f = tab[rr][col]
                tab[rr] = [x - f * y for x, y in zip(tab[rr], tab[r])]
        basis[r] = col

    def run(cost, allowed):
        while True:
            entering = None
            for j in allowed:
                if j in basis:
                    continue
                rc = cost[j] - sum(cost[basis[r]] * tab[r][j] for r in range(len(tab)))
                if rc < 0:
                    entering = j
                    break
            if entering is None:
                return
            best = None
            for r in range(len(tab)):
                if tab[r][entering] > 0:
                    ratio = tab[r][-1] / tab[r][entering]
                    if best is None or ratio < best[0] or (ratio == best[0] and basis[r] < basis[best[1]]):
                        best = (ratio, r)
            if best is None:
                raise RuntimeError("unbounded LP")
            pivot(best[1], entering)

    phase1 = [Fraction(0)] * n + [Fraction(1)] * m
    run(phase1, range(n + m))
    if sum(tab[r][-1] for r in range(len(tab)) if basis[r] >= n) != 0:
        raise RuntimeError("infeasible LP")
    for r in reversed(range(len(tab))):
        if basis[r] >= n:
            col = next((j for j in range(n) if tab[r][j] != 0), None)
            if col is None:
                del tab[r]
                del basis[r]
            else:
                pivot(r, col)
    run(list(c) + [Fraction(0)] * m, range(n))
    return sum(c[basis[r]] * tab[r][-1] for r in range(len(tab)))
