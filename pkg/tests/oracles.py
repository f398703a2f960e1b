"""Independent reference implementations used to cross-check the solvers.

They follow the defining equations directly (dense eigen-decomposition,
brute-force grids, scipy root finding) and share no code with the package.
"""

import numpy as np
from scipy.optimize import brentq


def poisson_capacity(lam, d, eps):
    def theta_star(c):
        # sup{theta: lam (e^theta - 1) / theta <= c}; the map is increasing
        return brentq(lambda th: lam * np.expm1(th) / th - c, 1e-12, 50.0, xtol=1e-15, rtol=1e-15)

    return brentq(lambda c: -theta_star(c) * c * d - np.log(eps), lam * (1 + 1e-9), 1e6 * lam, xtol=1e-12, rtol=1e-15)


def mm_matrix(lo, hi, ph, pl, theta, shift=0.0):
    """Transform matrix times ``exp(-shift)`` (eigenvectors are unaffected)."""
    return np.array([
        [(1 - ph) * np.exp(theta * lo - shift), ph * np.exp(theta * hi - shift)],
        [pl * np.exp(theta * lo - shift), (1 - pl) * np.exp(theta * hi - shift)],
    ])


def mm_log_radius_and_k(lo, hi, ph, pl, theta):
    w, v = np.linalg.eig(mm_matrix(lo, hi, ph, pl, theta, shift=theta * hi))
    i = int(np.argmax(w.real))
    vec = np.abs(v[:, i].real)
    return theta * hi + np.log(w[i].real), max(vec[0] / vec[1], vec[1] / vec[0])


def mm_radius_and_k(lo, hi, ph, pl, theta):
    lr, k = mm_log_radius_and_k(lo, hi, ph, pl, theta)
    return np.exp(lr), k


def mm_bound(lo, hi, ph, pl, c, d):
    f = lambda th: mm_log_radius_and_k(lo, hi, ph, pl, th)[0] / th - c
    top = 1.0 / hi
    while f(top) < 0:
        top *= 2.0
    th = brentq(f, 1e-9 / hi, top, xtol=1e-15, rtol=1e-14)
    _, k = mm_log_radius_and_k(lo, hi, ph, pl, th)
    return k * np.exp(-th * c * d)


def mm_capacity(lo, hi, ph, pl, d, eps, points=4000):
    """Smallest C beyond which the bound stays at or below ``eps``."""
    mean = (pl * lo + ph * hi) / (ph + pl)
    # geometric toward lam_high, where C* sits for slow chains
    grid = hi - (hi - mean) * np.logspace(0.0, -10.0, points)[1:]
    vals = np.array([mm_bound(lo, hi, ph, pl, c, d) for c in grid])
    bad = np.flatnonzero(vals > eps)
    j = bad[-1]
    return brentq(lambda c: mm_bound(lo, hi, ph, pl, c, d) - eps, grid[j], grid[j + 1], xtol=1e-12, rtol=1e-15)


def ht_lhs(lam, alpha, c, points=200_001):
    """Infimum of the heavy-tailed expression over a dense gamma grid."""
    a = (alpha - 1) / alpha
    g = 1 + (c / lam - 1) * np.linspace(0, 1, points)[1:-1]
    vals = g / (c ** (alpha - 1) * (c - g * lam)) * g**a / np.log(g**a)
    return vals.min(), g[np.argmin(vals)]


def ht_capacity(lam, alpha, d, eps):
    target = eps * d ** (alpha - 1)
    hi = lam * 2
    while ht_lhs(lam, alpha, hi)[0] > target:
        hi *= 2
    return brentq(lambda c: ht_lhs(lam, alpha, c)[0] - target, lam * 1.0001, hi, xtol=1e-12, rtol=1e-12)


def plan_total(n, lam, e0, e1, beta):
    n = np.asarray(n, dtype=float)
    return float(np.sum(e0 * n + e1 * np.asarray(lam)) + beta * np.sum(np.maximum(np.diff(n, prepend=0.0), 0.0)))


def brute_force_plan(floors, lam, e0, e1, beta, charge="up"):
    """Exhaustive search over the candidate set {0} | floors.

    ``charge="down"`` bills switching on decreases instead (the LCP upper
    bound problem).  Returns ``(cost, plans)`` with every optimal plan.
    """
    floors = np.asarray(floors, dtype=float)
    lam = np.asarray(lam, dtype=float)
    k = floors.shape[0]
    cand = np.unique(np.concatenate(([0.0], floors)))
    # every plan as a row: (M**k, k)
    n = cand[np.indices((cand.shape[0],) * k).reshape(k, -1).T]
    ok = np.all(n >= floors, axis=1) & ~np.any((n <= 0) & (lam > 0), axis=1)
    n = n[ok]
    steps = np.diff(n, axis=1, prepend=0.0)
    sw = np.maximum(steps, 0.0) if charge == "up" else np.maximum(-steps, 0.0)
    cost = np.sum(e0 * n + e1 * lam, axis=1) + beta * np.sum(sw, axis=1)
    best = float(cost.min())
    return best, list(n[cost <= best + 1e-12])


def lindley_delays(arrivals, c):
    """Plain scalar loop over the backlog recursion."""
    b, out = 0.0, []
    for a in arrivals:
        b = max(b + a - c, 0.0)
        out.append(b / c)
    return np.array(out)
