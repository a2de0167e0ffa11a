"""Compiled float64 transportation simplex.

Same algorithm as :func:`udseq.kr.transport` (least-cost start, Dantzig
pricing, Bland fallback after a run of degenerate pivots) on dense arrays.
"""
import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _potentials(bi, bj, m, n, cost, u, v, parent, order, adj_start, adj):
    # adjacency of the basis tree; rows are nodes 0..m-1, columns m..m+n-1
    k = bi.shape[0]
    deg = np.zeros(m + n + 1, np.int64)
    for e in range(k):
        deg[bi[e] + 1] += 1
        deg[m + bj[e] + 1] += 1
    for t in range(m + n):
        adj_start[t + 1] = adj_start[t] + deg[t + 1]
    fill = adj_start[:-1].copy()
    for e in range(k):
        r, c = bi[e], m + bj[e]
        adj[fill[r]] = e
        fill[r] += 1
        adj[fill[c]] = e
        fill[c] += 1
    for t in range(m + n):
        parent[t] = -2
    parent[0] = -1
    u[0] = 0.0
    order[0] = 0
    head, tail = 0, 1
    while head < tail:
        node = order[head]
        head += 1
        for s in range(adj_start[node], adj_start[node + 1]):
            e = adj[s]
            other = m + bj[e] if node < m else bi[e]
            if parent[other] != -2:
                continue
            parent[other] = e
            if node < m:
                v[bj[e]] = cost[bi[e], bj[e]] - u[node]
            else:
                u[bi[e]] = cost[bi[e], bj[e]] - v[node - m]
            order[tail] = other
            tail += 1


@njit(cache=True, nogil=True)
def transport_float(a, b, cost):
    m, n = a.shape[0], b.shape[0]
    supply = a.copy()
    demand = b.copy()
    k = m + n - 1
    bi = np.empty(k, np.int64)
    bj = np.empty(k, np.int64)
    x = np.empty(k, np.float64)
    row_done = np.zeros(m, np.bool_)
    col_done = np.zeros(n, np.bool_)
    rows_left, cols_left = m, n
    srt = np.argsort(cost.ravel(), kind="mergesort")
    e = 0
    for idx in srt:
        i, j = idx // n, idx % n
        if row_done[i] or col_done[j]:
            continue
        q = min(supply[i], demand[j])
        bi[e], bj[e], x[e] = i, j, q
        e += 1
        supply[i] -= q
        demand[j] -= q
        if rows_left == 1 and cols_left == 1:
            break
        if cols_left == 1 or (rows_left > 1 and supply[i] <= demand[j]):
            row_done[i] = True
            rows_left -= 1
        else:
            col_done[j] = True
            cols_left -= 1

    scale = 1.0
    for i in range(m):
        for j in range(n):
            scale = max(scale, abs(cost[i, j]))
    tol = 1e-12 * scale
    u = np.zeros(m)
    v = np.zeros(n)
    parent = np.empty(m + n, np.int64)
    order = np.empty(m + n, np.int64)
    adj_start = np.zeros(m + n + 1, np.int64)
    adj = np.empty(2 * k, np.int64)
    isbasic = np.zeros((m, n), np.bool_)
    for t in range(k):
        isbasic[bi[t], bj[t]] = True
    bland = False
    degenerate_run = 0
    max_iter = 50 * (m + n) * (m + n) + 100
    converged = False
    for _ in range(max_iter):
        _potentials(bi, bj, m, n, cost, u, v, parent, order, adj_start, adj)
        ei, ej = -1, -1
        best = -tol
        for i in range(m):
            for j in range(n):
                if isbasic[i, j]:
                    continue
                r = cost[i, j] - u[i] - v[j]
                if r < best:
                    best = r
                    ei, ej = i, j
                    if bland:
                        break
            if bland and ei >= 0:
                break
        if ei < 0:
            converged = True
            break
        # tree path from column ej up to the root, and from row ei up to the root
        path_j = []
        node = m + ej
        while parent[node] != -1:
            t = parent[node]
            path_j.append(t)
            node = m + bj[t] if node < m else bi[t]
        path_i = []
        node = ei
        while parent[node] != -1:
            t = parent[node]
            path_i.append(t)
            node = m + bj[t] if node < m else bi[t]
        # drop the common part above the meeting point
        while len(path_i) > 0 and len(path_j) > 0 and path_i[-1] == path_j[-1]:
            path_i.pop()
            path_j.pop()
        # cycle from row ei: path_i upward, then path_j downward to column ej
        cyc = path_i.copy()
        for s in range(len(path_j) - 1, -1, -1):
            cyc.append(path_j[s])
        theta = np.inf
        leave = -1
        for s in range(0, len(cyc), 2):
            t = cyc[s]
            if x[t] < theta or (bland and x[t] == theta and (bi[t] < bi[leave] or (bi[t] == bi[leave] and bj[t] < bj[leave]))):
                theta = x[t]
                leave = t
        for s in range(len(cyc)):
            t = cyc[s]
            if s % 2 == 0:
                x[t] -= theta
            else:
                x[t] += theta
        isbasic[bi[leave], bj[leave]] = False
        bi[leave], bj[leave], x[leave] = ei, ej, theta
        isbasic[ei, ej] = True
        if theta == 0.0:
            degenerate_run += 1
            if degenerate_run > m + n:
                bland = True
        else:
            degenerate_run = 0
    return bi, bj, x, u, v, converged
