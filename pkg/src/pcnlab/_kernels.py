"""Numeric kernels: offline DP sweeps and per-edge BFS.

Each kernel has a numba implementation and a pure-numpy one with identical
integer results.  Set ``PCNLAB_DISABLE_NUMBA=1`` to force the numpy path
(also used automatically when numba is not importable).

DP layout: ``cost[T, fl]`` is the cheapest rejection+rebalancing cost of a
prefix that ends with left balance ``fl`` on a channel of capacity ``T``
(right balance ``T - fl``).  Capacity never changes after opening, so rows are
independent.  The rebalance term is a min over a contiguous range of source
states and is computed from running prefix/suffix minima, which makes one step
O(S^2) instead of O(S^3).
"""

from __future__ import annotations

import os

import numpy as np

INF = np.int64(1) << np.int64(61)

_DISABLED = os.environ.get("PCNLAB_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError("disabled by PCNLAB_DISABLE_NUMBA")
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

BACKEND = "numba" if HAS_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------


def _np_step(old, x, ltr, rej, crs, cf2s):
    """One DP step over a (rows, width) block; row r has capacity caps[r]."""
    n_rows, width = old.shape
    fl = np.arange(width, dtype=np.int64)
    new = np.where(old >= INF, INF, old + rej)
    if ltr:
        # accept: previous state (fl + x, T - fl - x)
        if x < width:
            acc = np.full_like(old, INF)
            acc[:, : width - x] = old[:, x:]
            new = np.minimum(new, acc)
            pm = np.minimum.accumulate(old - crs * fl, axis=1)
            reb = np.full_like(old, INF)
            # min over a <= fl + x - 1
            reb[:, : width - x] = pm[:, x - 1 : width - 1] + crs * (fl[: width - x] + x) + cf2s
            reb[old >= INF] = INF
            valid = np.zeros_like(old, dtype=bool)
            valid[:, : width - x] = old[:, x:] < INF
            reb = np.where(valid, reb, INF)
            new = np.minimum(new, reb)
    else:
        if x < width:
            acc = np.full_like(old, INF)
            acc[:, x:] = old[:, : width - x]
            acc[old >= INF] = INF
            new = np.minimum(new, acc)
            sm = np.minimum.accumulate((old + crs * fl)[:, ::-1], axis=1)[:, ::-1]
            reb = np.full_like(old, INF)
            # min over a >= fl - x + 1
            reb[:, x:] = sm[:, 1 : width - x + 1] - crs * (fl[x:] - x) + cf2s
            reb[old >= INF] = INF
            new = np.minimum(new, np.where(reb >= INF // 2, INF, reb))
    return new


def _np_dp_forward(amounts, is_ltr, rej, crs, cf2s, unit, f1s, S):
    t = amounts.shape[0]
    caps = np.arange(S + 1, dtype=np.int64)
    fl = np.arange(S + 1, dtype=np.int64)
    cost = np.where(fl[None, :] <= caps[:, None], np.int64(0), INF)
    best = np.empty(t + 1, dtype=np.int64)
    best_cap = np.empty(t + 1, dtype=np.int64)

    def record(i):
        row_min = cost.min(axis=1) + caps * unit + f1s
        j = int(np.argmin(row_min))
        best[i] = row_min[j]
        best_cap[i] = j
        return row_min

    row_min = record(0)
    for i in range(t):
        cost = _np_step(cost, int(amounts[i]), bool(is_ltr[i]), rej[i], crs, cf2s)
        row_min = record(i + 1)
    return best, best_cap, row_min


def _np_dp_single(amounts, is_ltr, rej, crs, cf2s, cap):
    t = amounts.shape[0]
    layers = np.empty((t + 1, cap + 1), dtype=np.int64)
    layers[0] = 0
    for i in range(t):
        layers[i + 1] = _np_step(layers[i][None, :], int(amounts[i]), bool(is_ltr[i]), rej[i], crs, cf2s)[0]
    return layers


def _np_edge_cycle_lengths(indptr, indices, edges_u, edges_v, n_nodes):
    """Shortest cycle through each edge (0 when none), level-synchronous BFS."""
    out = np.zeros(edges_u.shape[0], dtype=np.int64)
    for e in range(edges_u.shape[0]):
        u, v = int(edges_u[e]), int(edges_v[e])
        seen = np.zeros(n_nodes, dtype=bool)
        seen[u] = True
        nbrs = indices[indptr[u] : indptr[u + 1]]
        frontier = nbrs[nbrs != v]
        seen[frontier] = True
        depth = 1
        while frontier.size:
            if seen[v]:
                break
            starts = indptr[frontier]
            lens = indptr[frontier + 1] - starts
            total = int(lens.sum())
            if total == 0:
                frontier = frontier[:0]
                break
            offs = np.repeat(starts - np.concatenate(([0], np.cumsum(lens)[:-1])), lens)
            nxt = indices[offs + np.arange(total)]
            nxt = np.unique(nxt[~seen[nxt]])
            depth += 1
            seen[nxt] = True
            frontier = nxt
        if seen[v]:
            out[e] = depth + 1
    return out


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if HAS_NUMBA:

    @njit(cache=True)
    def _nb_step_row(old, new, cap, x, ltr, rej, crs, cf2s, buf):
        # old/new hold entries 0..cap of one capacity row
        if ltr:
            run = INF
            for a in range(cap + 1):
                v = old[a] - crs * a
                if v < run:
                    run = v
                buf[a] = run
            for fl in range(cap + 1):
                best = old[fl] + rej
                if fl + x <= cap:
                    acc = old[fl + x]
                    if acc < best:
                        best = acc
                    reb = buf[fl + x - 1] + crs * (fl + x) + cf2s
                    if reb < best:
                        best = reb
                new[fl] = best
        else:
            run = INF
            for a in range(cap, -1, -1):
                v = old[a] + crs * a
                if v < run:
                    run = v
                buf[a] = run
            for fl in range(cap + 1):
                best = old[fl] + rej
                if fl >= x:
                    acc = old[fl - x]
                    if acc < best:
                        best = acc
                    reb = buf[fl - x + 1] - crs * (fl - x) + cf2s
                    if reb < best:
                        best = reb
                new[fl] = best

    @njit(cache=True)
    def _nb_dp_forward(amounts, is_ltr, rej, crs, cf2s, unit, f1s, S):
        t = amounts.shape[0]
        cur = np.zeros((S + 1, S + 1), dtype=np.int64)
        nxt = np.zeros((S + 1, S + 1), dtype=np.int64)
        buf = np.empty(S + 1, dtype=np.int64)
        best = np.empty(t + 1, dtype=np.int64)
        best_cap = np.empty(t + 1, dtype=np.int64)
        row_min = np.empty(S + 1, dtype=np.int64)
        for i in range(t + 1):
            if i > 0:
                for cap in range(S + 1):
                    _nb_step_row(cur[cap], nxt[cap], cap, amounts[i - 1], is_ltr[i - 1], rej[i - 1], crs, cf2s, buf)
                cur, nxt = nxt, cur
            b = INF
            bc = 0
            for cap in range(S + 1):
                m = INF
                for fl in range(cap + 1):
                    if cur[cap, fl] < m:
                        m = cur[cap, fl]
                m = m + cap * unit + f1s
                row_min[cap] = m
                if m < b:
                    b = m
                    bc = cap
            best[i] = b
            best_cap[i] = bc
        return best, best_cap, row_min

    @njit(cache=True)
    def _nb_dp_single(amounts, is_ltr, rej, crs, cf2s, cap):
        t = amounts.shape[0]
        layers = np.zeros((t + 1, cap + 1), dtype=np.int64)
        buf = np.empty(cap + 1, dtype=np.int64)
        for i in range(t):
            _nb_step_row(layers[i], layers[i + 1], cap, amounts[i], is_ltr[i], rej[i], crs, cf2s, buf)
        return layers

    @njit(cache=True)
    def _nb_edge_cycle_lengths(indptr, indices, edges_u, edges_v, n_nodes):
        out = np.zeros(edges_u.shape[0], dtype=np.int64)
        dist = np.full(n_nodes, -1, dtype=np.int64)
        queue = np.empty(n_nodes, dtype=np.int64)
        for e in range(edges_u.shape[0]):
            u = edges_u[e]
            v = edges_v[e]
            head = 0
            tail = 0
            dist[u] = 0
            queue[tail] = u
            tail += 1
            found = -1
            while head < tail and found < 0:
                w = queue[head]
                head += 1
                for k in range(indptr[w], indptr[w + 1]):
                    y = indices[k]
                    if w == u and y == v:
                        continue
                    if dist[y] < 0:
                        dist[y] = dist[w] + 1
                        if y == v:
                            found = dist[y]
                            break
                        queue[tail] = y
                        tail += 1
            if found > 0:
                out[e] = found + 1
            # reset only what was touched
            for k in range(tail):
                dist[queue[k]] = -1
            dist[v] = -1
        return out


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def _pick(backend: str | None):
    backend = backend or BACKEND
    if backend == "numba":
        if not HAS_NUMBA:
            raise RuntimeError("numba backend requested but numba is unavailable or disabled")
        return _nb_dp_forward, _nb_dp_single, _nb_edge_cycle_lengths
    if backend == "numpy":
        return _np_dp_forward, _np_dp_single, _np_edge_cycle_lengths
    raise ValueError(f"unknown backend {backend!r}")


def dp_forward(amounts, is_ltr, rej, crs, cf2s, unit, f1s, S, backend=None):
    """Sweep all capacities 0..S.

    Returns ``(best, best_cap, row_min)``: per-prefix cheapest opened-channel
    cost and its capacity (smallest on ties), and the final per-capacity
    totals.  All values are scaled integers.
    """
    fn = _pick(backend)[0]
    return fn(
        np.ascontiguousarray(amounts, dtype=np.int64),
        np.ascontiguousarray(is_ltr, dtype=np.bool_),
        np.ascontiguousarray(rej, dtype=np.int64),
        np.int64(crs),
        np.int64(cf2s),
        np.int64(unit),
        np.int64(f1s),
        int(S),
    )


def dp_single(amounts, is_ltr, rej, crs, cf2s, cap, backend=None):
    """All DP layers for one capacity; shape ``(t + 1, cap + 1)``."""
    fn = _pick(backend)[1]
    return fn(
        np.ascontiguousarray(amounts, dtype=np.int64),
        np.ascontiguousarray(is_ltr, dtype=np.bool_),
        np.ascontiguousarray(rej, dtype=np.int64),
        np.int64(crs),
        np.int64(cf2s),
        int(cap),
    )


def edge_cycle_lengths(indptr, indices, edges_u, edges_v, n_nodes, backend=None):
    fn = _pick(backend)[2]
    return fn(
        np.ascontiguousarray(indptr, dtype=np.int64),
        np.ascontiguousarray(indices, dtype=np.int64),
        np.ascontiguousarray(edges_u, dtype=np.int64),
        np.ascontiguousarray(edges_v, dtype=np.int64),
        int(n_nodes),
    )
