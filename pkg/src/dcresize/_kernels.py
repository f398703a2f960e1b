"""Hot inner loops: the fluid-queue recursion and the provisioning DP.

Each kernel exists twice, a numba ``@njit`` version and a pure-numpy
version.  The numba path is used when numba imports cleanly and the
environment variable ``DCR_DISABLE_NUMBA`` is unset (or ``0``).  The flag
is read on every dispatch so tests can flip ``USE_NUMBA`` at runtime.

Both DP paths evaluate the same floating-point expressions in the same
order and therefore return identical plans.  The queue recursion differs
between paths by rounding only (the numpy path uses blocked cumulative
sums).
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False

_DISABLED = os.environ.get("DCR_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")
USE_NUMBA = HAS_NUMBA and not _DISABLED

INCREASE = 0
DECREASE = 1

_BLOCK = 256


def backend():
    return "numba" if (USE_NUMBA and HAS_NUMBA) else "numpy"


# ---------------------------------------------------------------------------
# fluid queue in delay units: d_t = max(d_{t-1} + x_t - 1, 0), x_t = a_t / C
#
# Working in units of service time (rather than work) keeps the recursion
# homogeneous: scaling arrivals and rate together changes x_t by one
# rounding at most.


def _delay_numpy(x, d0=0.0):
    n = x.shape[0]
    out = np.empty(n, dtype=np.float64)
    d = float(d0)
    # Blocked so rounding stays local.  Seeding each block's cumsum with the
    # carried delay makes it replay the sequential additions exactly until
    # the queue first empties, which is where the large values live.
    for start in range(0, n, _BLOCK):
        stop = min(start + _BLOCK, n)
        y = x[start:stop] - 1.0
        y[0] += d
        s = np.cumsum(y)
        low = np.minimum(np.minimum.accumulate(s), 0.0)
        blk = s - low
        np.maximum(blk, 0.0, out=blk)
        out[start:stop] = blk
        d = blk[-1]
    return out


if HAS_NUMBA:

    @njit(cache=True)
    def _delay_numba(x, d0):
        n = x.shape[0]
        out = np.empty(n, dtype=np.float64)
        d = d0
        for t in range(n):
            d = d + (x[t] - 1.0)
            if d < 0.0:
                d = 0.0
            out[t] = d
        return out


def delay_path(x, d0=0.0):
    """Virtual delay path (in slots) for per-slot work ``x`` measured in
    slots of service at the queue's rate."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if USE_NUMBA and HAS_NUMBA:
        return _delay_numba(x, float(d0))
    return _delay_numpy(x, d0)


# ---------------------------------------------------------------------------
# provisioning DP over a sorted candidate grid (grid[0] == 0)
#
# value_k(j) = cost_k(j) + min_i [value_{k-1}(i) + beta * switch(i, j)]
# switch(i, j) = (g_j - g_i)^+ in INCREASE mode, (g_i - g_j)^+ in DECREASE mode.
# Ties resolve to the smaller grid index everywhere.


def _prefix_argmin_np(v):
    m = np.minimum.accumulate(v)
    new = np.empty(v.shape[0], dtype=bool)
    new[0] = True
    new[1:] = v[1:] < m[:-1]
    idx = np.maximum.accumulate(np.where(new, np.arange(v.shape[0]), 0))
    return m, idx


def _suffix_argmin_np(v):
    w = v[::-1]
    m = np.minimum.accumulate(w)
    new = np.empty(w.shape[0], dtype=bool)
    new[0] = True
    new[1:] = w[1:] <= m[:-1]
    idx = np.maximum.accumulate(np.where(new, np.arange(w.shape[0]), 0))
    return m[::-1], (w.shape[0] - 1 - idx)[::-1]


def _dp_numpy(grid, floors, lambdas, e0, e1, beta, mode, track):
    K = floors.shape[0]
    M = grid.shape[0]
    prev = np.full(M, np.inf)
    prev[0] = 0.0
    choice = np.zeros((K, M), dtype=np.int64) if track else np.zeros((1, 1), dtype=np.int64)
    best = np.empty(K, dtype=np.int64)
    bg = beta * grid
    for k in range(K):
        if mode == INCREASE:
            pm, pi = _prefix_argmin_np(prev - bg)
            pm = pm + bg
            sm, si = _suffix_argmin_np(prev)
        else:
            pm, pi = _prefix_argmin_np(prev)
            sm, si = _suffix_argmin_np(prev + bg)
            sm = sm - bg
        use_prefix = pm <= sm
        val = np.where(use_prefix, pm, sm)
        cur = np.where(grid >= floors[k], val + (e0 * grid + e1 * lambdas[k]), np.inf)
        if track:
            choice[k] = np.where(use_prefix, pi, si)
        best[k] = int(np.argmin(cur))
        prev = cur
    return choice, best, prev


if HAS_NUMBA:

    @njit(cache=True)
    def _dp_numba(grid, floors, lambdas, e0, e1, beta, mode, track):
        K = floors.shape[0]
        M = grid.shape[0]
        prev = np.full(M, np.inf)
        prev[0] = 0.0
        if track:
            choice = np.zeros((K, M), dtype=np.int64)
        else:
            choice = np.zeros((1, 1), dtype=np.int64)
        best = np.empty(K, dtype=np.int64)
        pm = np.empty(M)
        pi = np.empty(M, dtype=np.int64)
        sm = np.empty(M)
        si = np.empty(M, dtype=np.int64)
        cur = np.empty(M)
        for k in range(K):
            if mode == 0:
                bv = prev[0] - beta * grid[0]
                bi = 0
                for j in range(M):
                    v = prev[j] - beta * grid[j]
                    if j > 0 and v < bv:
                        bv = v
                        bi = j
                    pm[j] = bv + beta * grid[j]
                    pi[j] = bi
                bv = prev[M - 1]
                bi = M - 1
                for j in range(M - 1, -1, -1):
                    v = prev[j]
                    if j < M - 1 and v <= bv:
                        bv = v
                        bi = j
                    sm[j] = bv
                    si[j] = bi
            else:
                bv = prev[0]
                bi = 0
                for j in range(M):
                    v = prev[j]
                    if j > 0 and v < bv:
                        bv = v
                        bi = j
                    pm[j] = bv
                    pi[j] = bi
                bv = prev[M - 1] + beta * grid[M - 1]
                bi = M - 1
                for j in range(M - 1, -1, -1):
                    v = prev[j] + beta * grid[j]
                    if j < M - 1 and v <= bv:
                        bv = v
                        bi = j
                    sm[j] = bv - beta * grid[j]
                    si[j] = bi
            fk = floors[k]
            op = e1 * lambdas[k]
            bj = 0
            for j in range(M):
                if pm[j] <= sm[j]:
                    val = pm[j]
                    c = pi[j]
                else:
                    val = sm[j]
                    c = si[j]
                if track:
                    choice[k, j] = c
                if grid[j] >= fk:
                    cur[j] = val + (e0 * grid[j] + op)
                else:
                    cur[j] = np.inf
                if cur[j] < cur[bj]:
                    bj = j
            best[k] = bj
            for j in range(M):
                prev[j] = cur[j]
        return choice, best, prev


def provisioning_dp(grid, floors, lambdas, e0, e1, beta, mode=INCREASE, track=True):
    """Forward DP over ``grid``.

    Returns ``(choice, best, last)``: ``choice[k, j]`` is the predecessor
    index chosen for grid point ``j`` at frame ``k`` (only when ``track``),
    ``best[k]`` the smallest minimiser of the frame-``k`` value function, and
    ``last`` the final value function.
    """
    g = np.ascontiguousarray(grid, dtype=np.float64)
    m = np.ascontiguousarray(floors, dtype=np.float64)
    lam = np.ascontiguousarray(lambdas, dtype=np.float64)
    args = (g, m, lam, float(e0), float(e1), float(beta), int(mode), bool(track))
    if USE_NUMBA and HAS_NUMBA:
        return _dp_numba(*args)
    return _dp_numpy(*args)
