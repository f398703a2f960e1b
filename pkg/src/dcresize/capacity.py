"""Effective capacity ``C(D, eps)`` meeting a delay SLA, per arrival family.

All solvers work in slots and jobs per slot.  The array solvers
(``*_array``) take one rate per frame and solve every frame at once; the
scalar entry points wrap them and return a :class:`CapacitySolution`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arrival import MarkovModulated, mm_from_burst_param, pareto_from_mean
from .errors import ConvergenceError, ValidationError

BISECT_RTOL = 1e-15
MAX_ITER = 200
HT_GRID = 64
HT_EDGE = 1e-6
GOLDEN_RTOL = 1e-9
MM_SCAN = 32

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SlaSpec:
    """``P(delay > delay_bound) <= violation_prob``; delay in slots."""

    delay_bound: float
    violation_prob: float

    def __post_init__(self):
        if not self.delay_bound > 0:
            raise ValidationError("delay bound must be > 0")
        if not 0 < self.violation_prob < 1:
            raise ValidationError("violation probability must lie in (0, 1)")

    @classmethod
    def from_seconds(cls, delay_seconds, violation_prob, slot_seconds=1.0):
        return cls(delay_seconds / slot_seconds, violation_prob)


@dataclass(frozen=True)
class CapacitySolution:
    capacity: float
    theta_star: float | None = None
    gamma_star: float | None = None
    residual: float = 0.0
    iterations: int = 0

    def as_dict(self):
        return {
            "capacity": self.capacity,
            "theta_star": self.theta_star,
            "gamma_star": self.gamma_star,
            "residual": self.residual,
            "iterations": self.iterations,
        }


def _bisect(feasible, lo, hi, rtol=BISECT_RTOL, max_iter=MAX_ITER):
    """Vectorised bisection: ``feasible`` is False at ``lo`` and True at
    ``hi`` and monotone in between.  Returns ``(lo, hi, iterations)``."""
    lo = np.array(lo, dtype=np.float64, copy=True)
    hi = np.array(hi, dtype=np.float64, copy=True)
    for it in range(1, max_iter + 1):
        active = (hi - lo) > rtol * np.abs(hi)
        if not active.any():
            return lo, hi, it - 1
        mid = 0.5 * (lo + hi)
        ok = feasible(mid)
        hi = np.where(active & ok, mid, hi)
        lo = np.where(active & ~ok, mid, lo)
    if np.any((hi - lo) > rtol * np.abs(hi) * 16):
        raise ConvergenceError("bisection hit the iteration cap", iterations=max_iter)
    return lo, hi, max_iter


# --------------------------------------------------------------------------
# Poisson


def poisson_capacity_array(lams, delay_bound, violation_prob):
    """Closed form ``C = lam * K / log(1 + K)``, ``K = -log(eps) / (lam * D)``.

    Zero-rate frames get zero capacity.
    """
    lams = np.asarray(lams, dtype=np.float64)
    out = np.zeros_like(lams)
    pos = lams > 0
    k = -np.log(violation_prob) / (lams[pos] * delay_bound)
    out[pos] = lams[pos] * k / np.log1p(k)
    return out


def capacity_poisson(lam, sla):
    if not lam > 0:
        raise ValidationError("Poisson rate must be > 0")
    k = -np.log(sla.violation_prob) / (lam * sla.delay_bound)
    theta = float(np.log1p(k))
    c = float(lam * k / theta)
    achieved = float(np.exp(-theta * c * sla.delay_bound))
    return CapacitySolution(c, theta_star=theta, residual=achieved - sla.violation_prob)


def _poisson_theta_star(lam, c):
    """sup{theta : (lam / theta)(e^theta - 1) <= c}, by bisection on theta."""
    ratio = c / lam
    hi = np.ones_like(ratio)
    grow = np.expm1(hi) / hi <= ratio
    while grow.any():
        hi = np.where(grow, 2.0 * hi, hi)
        grow = np.expm1(hi) / hi <= ratio
    lo = np.zeros_like(hi)
    lo, hi, _ = _bisect(lambda th: np.expm1(th) / th > ratio, lo, hi)
    return lo


def poisson_implicit_array(lams, delay_bound, violation_prob):
    """Independent route to the Poisson capacity: nested bisection on the
    implicit pair (theta*, C) instead of the closed form.

    All three arguments broadcast against each other.
    """
    lams, delay_bound, violation_prob = np.broadcast_arrays(
        *(np.asarray(v, dtype=np.float64) for v in (lams, delay_bound, violation_prob))
    )
    log_eps = np.log(violation_prob)
    x = -log_eps / delay_bound
    cap = 1e3 * np.maximum(lams, x)

    def feasible(c):
        th = _poisson_theta_star(lams, c)
        return -th * c * delay_bound <= log_eps

    if not feasible(cap).all():
        raise ConvergenceError("Poisson bound not met below the search cap")
    lo, hi, iters = _bisect(feasible, lams.copy(), cap)
    return hi, _poisson_theta_star(lams, hi), iters


def capacity_poisson_implicit(lam, sla):
    if not lam > 0:
        raise ValidationError("Poisson rate must be > 0")
    c, th, iters = poisson_implicit_array(np.array([float(lam)]), sla.delay_bound, sla.violation_prob)
    c, th = float(c[0]), float(th[0])
    achieved = float(np.exp(-th * c * sla.delay_bound))
    return CapacitySolution(c, theta_star=th, residual=achieved - sla.violation_prob, iterations=iters)


# --------------------------------------------------------------------------
# Markov-modulated


def _mm_terms(lo, hi, ph, pl, theta):
    # everything scaled by exp(-theta * hi) so large theta cannot overflow
    e = np.exp(-theta * (hi - lo))
    a = (1.0 - ph) * e
    b = 1.0 - pl
    s = (a - b) ** 2 + 4.0 * ph * pl * e
    root = np.sqrt(s)
    return e, a, b, root


def _mm_log_radius(lo, hi, ph, pl, theta):
    e, a, b, root = _mm_terms(lo, hi, ph, pl, theta)
    return theta * hi + np.log(0.5 * (a + b + root))


def _mm_log_prefactor(lo, hi, ph, pl, theta):
    e, a, b, root = _mm_terms(lo, hi, ph, pl, theta)
    # (radius - a) without cancellation
    with np.errstate(divide="ignore", invalid="ignore"):
        gap = np.where(b >= a, 0.5 * (b - a + root), 2.0 * ph * pl * e / (root + a - b))
    return np.abs(np.log(ph) - np.log(gap))


def mm_spectral_radius(model, theta):
    """Largest eigenvalue of the MM transform matrix at ``theta``."""
    if not theta > 0:
        raise ValidationError("theta must be > 0")
    m = model
    return float(np.exp(_mm_log_radius(m.lam_low, m.lam_high, m.p_h, m.p_l, theta)))


def mm_effective_bandwidth(model, theta):
    m = model
    return float(_mm_log_radius(m.lam_low, m.lam_high, m.p_h, m.p_l, theta) / theta)


def mm_prefactor(model, theta):
    """Eigenvector-ratio prefactor; always >= 1."""
    if not theta > 0:
        raise ValidationError("theta must be > 0")
    m = model
    return float(np.exp(_mm_log_prefactor(m.lam_low, m.lam_high, m.p_h, m.p_l, theta)))


def _mm_theta_star(lo, hi, ph, pl, mean, c):
    """sup{theta : log(radius(theta)) / theta <= c}; inf when c >= lam_high."""
    shape = np.broadcast(lo, hi, ph, pl, c).shape
    lo, hi, ph, pl, mean, c = (np.broadcast_to(np.asarray(v, dtype=np.float64), shape) for v in (lo, hi, ph, pl, mean, c))
    out = np.zeros(shape)
    out[c >= hi] = np.inf
    todo = (c > mean) & (c < hi)
    if not todo.any():
        return out
    l, h, p, q, cc, mu = lo[todo], hi[todo], ph[todo], pl[todo], c[todo], mean[todo]

    def above(th):
        return _mm_log_radius(l, h, p, q, th) > cc * th

    # grow the bracket geometrically; past 1e300 treat theta* as unbounded
    t_hi = 1.0 / mu
    unbounded = np.zeros(t_hi.shape, dtype=bool)
    grow = ~above(t_hi)
    while grow.any():
        t_hi = np.where(grow, 2.0 * t_hi, t_hi)
        unbounded |= t_hi > 1e300
        grow = grow & ~unbounded & ~above(t_hi)
    t_lo, t_hi, _ = _bisect(lambda th: above(th) | unbounded, np.zeros_like(t_hi), t_hi)
    out[todo] = np.where(unbounded, np.inf, t_lo)
    return out


def _mm_log_bound(lo, hi, ph, pl, mean, c, delay_bound):
    th = _mm_theta_star(lo, hi, ph, pl, mean, c)
    logk = np.where(th > 0, _mm_log_prefactor(lo, hi, ph, pl, np.where(th > 0, th, 1.0)), 0.0)
    with np.errstate(invalid="ignore"):
        lb = logk - th * c * delay_bound
    lb = np.where(np.isinf(th), -np.inf, lb)
    # a probability bound above one is vacuous
    return np.minimum(lb, 0.0), th


def mm_capacity_array(lam_low, lam_high, p_h, p_l, delay_bound, violation_prob):
    """Solve ``K(theta*) exp(-theta* C D) = eps`` for each frame.

    Returns ``(capacity, theta_star, iterations)``.
    """
    lo, hi, ph, pl = (np.atleast_1d(np.asarray(v, dtype=np.float64)) for v in (lam_low, lam_high, p_h, p_l))
    lo, hi, ph, pl = np.broadcast_arrays(lo, hi, ph, pl)
    mean = (pl * lo + ph * hi) / (ph + pl)
    log_eps = np.log(violation_prob)
    cap = np.array(mean, copy=True)
    theta = np.full(mean.shape, np.inf)
    live = hi > lo
    if not live.any():
        return cap, theta, 0
    l, h, p, q, mu = lo[live], hi[live], ph[live], pl[live], mean[live]

    # monotonicity of the bound in C is not proven; verify on a scan first
    fr = np.arange(1, MM_SCAN + 1) / (MM_SCAN + 1)
    scan_c = mu[:, None] + (h - mu)[:, None] * fr[None, :]
    scan_b, _ = _mm_log_bound(l[:, None], h[:, None], p[:, None], q[:, None], mu[:, None], scan_c, delay_bound)
    bad = np.any(np.diff(scan_b, axis=1) > 1e-12, axis=1)
    if bad.any():
        raise ConvergenceError(
            "MM violation bound is not monotone in C", frames=np.flatnonzero(live)[bad].tolist()
        )

    def feasible(c):
        return _mm_log_bound(l, h, p, q, mu, c, delay_bound)[0] <= log_eps

    # upper bracket: walk toward lam_high
    up = mu + 0.5 * (h - mu)
    for _ in range(64):
        miss = ~feasible(up)
        if not miss.any():
            break
        up = np.where(miss, up + 0.5 * (h - up), up)
    else:
        raise ConvergenceError(
            "MM bound not met below the peak rate",
            frames=np.flatnonzero(live)[~feasible(up)].tolist(),
        )
    c_lo, c_hi, iters = _bisect(feasible, mu.copy(), up)
    cap[live] = c_hi
    theta[live] = _mm_theta_star(l, h, p, q, mu, c_hi)
    return cap, theta, iters


def capacity_mm(model, sla):
    m = model
    c, th, iters = mm_capacity_array(m.lam_low, m.lam_high, m.p_h, m.p_l, sla.delay_bound, sla.violation_prob)
    c, th = float(c[0]), float(th[0])
    if np.isinf(th):
        achieved = 0.0
    else:
        achieved = mm_prefactor(m, th) * float(np.exp(-th * c * sla.delay_bound))
    return CapacitySolution(c, theta_star=th, residual=achieved - sla.violation_prob, iterations=iters)


# --------------------------------------------------------------------------
# heavy-tailed Pareto


def _ht_log_objective(lam, alpha, c, gamma):
    a = (alpha - 1.0) / alpha
    lg = np.log(gamma)
    with np.errstate(invalid="ignore", divide="ignore"):
        return (
            (1.0 + a) * lg
            - (alpha - 1.0) * np.log(c)
            - np.log(c - gamma * lam)
            - np.log(a * lg)
        )


def _ht_inf(lam, alpha, c):
    """Infimum over gamma in (1, c/lam) of the heavy-tailed bound expression.

    Grid-seeded golden-section search in gamma.  Returns ``(log_value, gamma)``.
    """
    lam, alpha, c = np.broadcast_arrays(*(np.atleast_1d(np.asarray(v, dtype=np.float64)) for v in (lam, alpha, c)))
    span = c / lam - 1.0
    edge = np.minimum(HT_EDGE, 0.25 * span)
    t = np.linspace(0.0, 1.0, HT_GRID)
    glo = np.log(edge)
    ghi = np.log(span - edge)
    grid = 1.0 + np.exp(glo[:, None] + (ghi - glo)[:, None] * t[None, :])
    vals = _ht_log_objective(lam[:, None], alpha[:, None], c[:, None], grid)
    vals = np.where(np.isnan(vals), np.inf, vals)
    j = np.argmin(vals, axis=1)
    rows = np.arange(grid.shape[0])
    best_g = grid[rows, j]
    best_v = vals[rows, j]
    a = grid[rows, np.maximum(j - 1, 0)]
    b = grid[rows, np.minimum(j + 1, HT_GRID - 1)]

    def f(g):
        v = _ht_log_objective(lam, alpha, c, g)
        return np.where(np.isnan(v), np.inf, v)

    x1 = b - _INVPHI * (b - a)
    x2 = a + _INVPHI * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(200):
        if np.all(b - a <= GOLDEN_RTOL * b):
            break
        left = f1 <= f2
        b = np.where(left, x2, b)
        a = np.where(left, a, x1)
        nx1 = np.where(left, b - _INVPHI * (b - a), x2)
        nx2 = np.where(left, x1, a + _INVPHI * (b - a))
        nf1 = np.where(left, np.nan, f2)
        nf2 = np.where(left, f1, np.nan)
        x1, x2 = nx1, nx2
        need1, need2 = np.isnan(nf1), np.isnan(nf2)
        f1 = np.where(need1, f(x1), nf1)
        f2 = np.where(need2, f(x2), nf2)
    gm = 0.5 * (a + b)
    fm = f(gm)
    take = fm < best_v
    return np.where(take, fm, best_v), np.where(take, gm, best_g)


def ht_bound_lhs(lam, alpha, capacity):
    """Left-hand side of the heavy-tailed capacity equation at ``capacity``.

    Returns ``(value, gamma_star)``.
    """
    if not 1 < alpha < 2:
        raise ValidationError(f"tail index alpha={alpha} must lie in (1, 2)")
    if not lam > 0 or capacity / lam <= 1.0 + 1e-12:
        raise ValidationError("capacity must exceed the mean rate (empty gamma range)")
    lv, g = _ht_inf(lam, alpha, capacity)
    return float(np.exp(lv[0])), float(g[0])


def ht_capacity_array(lams, alpha, delay_bound, violation_prob):
    """Solve the heavy-tailed capacity equation per frame by bisection on C.

    Zero-rate frames get zero capacity.  Returns ``(capacity, gamma, iters)``.
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=np.float64))
    alpha = np.broadcast_to(np.asarray(alpha, dtype=np.float64), lams.shape)
    out = np.zeros_like(lams)
    gam = np.full(lams.shape, np.nan)
    pos = lams > 0
    if not pos.any():
        return out, gam, 0
    lam, al = lams[pos], alpha[pos]
    log_target = np.log(violation_prob) + (al - 1.0) * np.log(delay_bound)
    cap = 1e3 * np.maximum(lam, np.exp(-log_target / al))

    def feasible(c):
        return _ht_inf(lam, al, c)[0] <= log_target

    miss = ~feasible(cap)
    if miss.any():
        raise ConvergenceError(
            "heavy-tailed bound not met below the search cap",
            frames=np.flatnonzero(pos)[miss].tolist(),
        )
    lo, hi, iters = _bisect(feasible, lam.copy(), cap)
    out[pos] = hi
    gam[pos] = _ht_inf(lam, al, hi)[1]
    return out, gam, iters


def capacity_ht(lam, alpha, sla):
    if not 1 < alpha < 2:
        raise ValidationError(f"tail index alpha={alpha} must lie in (1, 2)")
    if not lam > 0:
        raise ValidationError("rate must be > 0")
    c, g, iters = ht_capacity_array(np.array([float(lam)]), alpha, sla.delay_bound, sla.violation_prob)
    c = float(c[0])
    value, gstar = ht_bound_lhs(lam, alpha, c)
    target = sla.violation_prob * sla.delay_bound ** (alpha - 1.0)
    return CapacitySolution(c, gamma_star=gstar, residual=value - target, iterations=iters)


# --------------------------------------------------------------------------
# per-frame floors


FAMILIES = ("poisson", "mm", "pareto")


def capacity_array(lams, family, params, sla):
    """Effective capacity for every frame rate in ``lams``."""
    lams = np.asarray(lams, dtype=np.float64)
    params = dict(params or {})
    if family == "poisson":
        return poisson_capacity_array(lams, sla.delay_bound, sla.violation_prob)
    if family == "mm":
        t = float(params.get("cycle_time", 6.0))
        lo_r = float(params.get("low_ratio", 0.5))
        hi_r = float(params.get("high_ratio", 2.0))
        out = np.zeros_like(lams)
        pos = lams > 0
        if not pos.any():
            return out
        # the chain parameters depend on the rate ratios only, not the rate
        p_h, p_l = mm_from_burst_param(1.0, lo_r, hi_r, t)
        c, _, _ = mm_capacity_array(lo_r * lams[pos], hi_r * lams[pos], p_h, p_l, sla.delay_bound, sla.violation_prob)
        out[pos] = c
        return out
    if family == "pareto":
        alpha = float(params.get("alpha", 1.5))
        pareto_from_mean(1.0, alpha)  # validates alpha
        return ht_capacity_array(lams, alpha, sla.delay_bound, sla.violation_prob)[0]
    raise ValidationError(f"unknown arrival family {family!r}; expected one of {FAMILIES}")


def capacity_profile(trace, family, params, sla, service_rate):
    """Per-frame server floors ``m_k = C_k / mu``."""
    if not service_rate > 0:
        raise ValidationError("service rate must be > 0")
    try:
        c = capacity_array(trace.lambdas, family, params, sla)
    except ConvergenceError as err:
        frames = err.diagnostics.get("frames", [])
        raise ConvergenceError(f"{err} (frames {frames[:10]})", **err.diagnostics) from err
    return c / service_rate


def solve_capacity(model, sla):
    """Dispatch on an :mod:`~dcresize.arrival` model instance."""
    from .arrival import Pareto, Poisson

    if isinstance(model, Poisson):
        return capacity_poisson(model.rate, sla)
    if isinstance(model, MarkovModulated):
        return capacity_mm(model, sla)
    if isinstance(model, Pareto):
        return capacity_ht(model.mean, model.alpha, sla)
    raise ValidationError(f"unknown arrival model {model!r}")


# --------------------------------------------------------------------------
# scaling-law checks


@dataclass(frozen=True)
class ScalingReport:
    x: np.ndarray
    capacity: np.ndarray
    statistic: np.ndarray
    band: tuple
    slope: float | None
    expected: float | None
    ok: bool


def check_scaling_poisson(points, lam=300.0, max_spread=4.0):
    """Ratio ``C log(x) / x`` with ``x = log(1/eps) / D`` over a sweep.

    ``points`` is an iterable of ``(delay_bound, violation_prob)``.  Points
    with ``x <= 1`` are dropped (the ratio is meaningless there).
    """
    pts = [(float(d), float(e)) for d, e in points]
    x = np.array([-np.log(e) / d for d, e in pts])
    keep = x > 1.0
    if keep.sum() < 2:
        raise ValidationError("scaling check needs at least two points with x > 1")
    c = np.array([capacity_poisson(lam, SlaSpec(d, e)).capacity for (d, e), k in zip(pts, keep) if k])
    x = x[keep]
    ratio = c * np.log(x) / x
    band = (float(ratio.min()), float(ratio.max()))
    return ScalingReport(x, c, ratio, band, None, None, band[1] / band[0] <= max_spread)


def check_scaling_ht(points, alpha, lam=1.0, rel_tol=0.10):
    """Least-squares slope of ``log C`` against ``log(1 / (eps D**(alpha-1)))``."""
    pts = [(float(d), float(e)) for d, e in points]
    x = np.array([1.0 / (e * d ** (alpha - 1.0)) for d, e in pts])
    if np.unique(x).size < 2:
        raise ValidationError("slope undefined: need at least two distinct sweep points")
    c = np.array([capacity_ht(lam, alpha, SlaSpec(d, e)).capacity for d, e in pts])
    slope = float(np.polyfit(np.log(x), np.log(c), 1)[0])
    expected = 1.0 / alpha
    return ScalingReport(
        x, c, c / x ** expected, (float(x.min()), float(x.max())), slope, expected,
        abs(slope - expected) <= rel_tol * expected,
    )
