"""Slow time-scale provisioning: cost model, offline optimum, optimal static
plan and Lazy Capacity Provisioning (LCP).

Server counts are real-valued.  With the affine per-server cost
``f(x) = e0 + e1 * x`` the frame cost of ``n`` servers carrying ``lam`` is
``e0 * n + e1 * lam``, so every optimal plan takes values in
``{0} | {floors}`` and the DP runs over that candidate set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ValidationError


@dataclass(frozen=True)
class CostModel:
    e0: float = 1.0
    e1: float = 0.0
    beta: float = 6.0
    service_rate: float = 10.0

    def __post_init__(self):
        if self.e0 < 0 or self.e1 < 0 or self.beta < 0:
            raise ValidationError("cost coefficients must be non-negative")
        if not self.service_rate > 0:
            raise ValidationError("service rate must be > 0")


@dataclass(frozen=True)
class ProvisioningPlan:
    servers: np.ndarray
    operating_cost: float
    switching_cost: float
    total_cost: float
    label: str = ""


def _lambdas(trace, k):
    lam = np.asarray(getattr(trace, "lambdas", trace), dtype=np.float64)
    if lam.shape[0] != k:
        raise ValidationError(f"plan has {k} frames but the trace has {lam.shape[0]}")
    return lam


def plan_cost(servers, trace, cost):
    """``(operating, switching, total)`` of a plan, with ``n_0 = 0``."""
    n = np.asarray(servers, dtype=np.float64)
    lam = _lambdas(trace, n.shape[0])
    bad = (n <= 0) & (lam > 0)
    if bad.any():
        raise ValidationError(f"infeasible plan: no servers for load at frame {int(np.argmax(bad))}")
    operating = float(np.sum(cost.e0 * n + cost.e1 * lam))
    switching = float(cost.beta * np.sum(np.maximum(np.diff(n, prepend=0.0), 0.0)))
    return operating, switching, operating + switching


def _make_plan(servers, trace, cost, label):
    op, sw, tot = plan_cost(servers, trace, cost)
    servers = np.asarray(servers, dtype=np.float64)
    servers.setflags(write=False)
    return ProvisioningPlan(servers, op, sw, tot, label)


def _check_floors(floors):
    m = np.asarray(floors, dtype=np.float64)
    if m.ndim != 1 or m.shape[0] < 1:
        raise ValidationError("floors must be a non-empty 1-d sequence")
    if np.any(~np.isfinite(m)) or np.any(m < 0):
        raise ValidationError("floors must be finite and non-negative")
    return m


def candidate_grid(floors, grid_step=None):
    pts = [np.zeros(1), floors]
    if grid_step is not None:
        if not grid_step > 0:
            raise ValidationError("grid_step must be > 0")
        pts.append(np.arange(0.0, floors.max() + grid_step, grid_step))
    return np.unique(np.concatenate(pts))


def offline_optimal(floors, trace, cost, grid_step=None):
    """Minimum-cost plan with ``n_k >= floors[k]`` and full hindsight.

    ``grid_step`` adds a uniform grid to the candidate set (refinement mode).
    """
    m = _check_floors(floors)
    lam = _lambdas(trace, m.shape[0])
    grid = candidate_grid(m, grid_step)
    choice, _, last = _kernels.provisioning_dp(grid, m, lam, cost.e0, cost.e1, cost.beta, _kernels.INCREASE)
    idx = np.empty(m.shape[0], dtype=np.int64)
    idx[-1] = int(np.argmin(last))
    for k in range(m.shape[0] - 1, 0, -1):
        idx[k - 1] = choice[k, idx[k]]
    return _make_plan(grid[idx], lam, cost, "optimal")


def optimal_static(floors, trace, cost):
    """Best constant plan: with affine cost this is the largest floor."""
    m = _check_floors(floors)
    lam = _lambdas(trace, m.shape[0])
    return _make_plan(np.full(m.shape[0], m.max()), lam, cost, "static")


def lcp_frame_bounds(floors, trace, cost):
    """Per-frame LCP bounds ``(lower, upper)``.

    ``lower[k]`` is the last component of the optimal prefix plan over
    frames ``0..k`` charging switching on increases, ``upper[k]`` the same
    with switching charged on decreases.  One forward DP pass yields every
    prefix at once: the prefix optimum's last component minimises the
    forward value function at frame ``k``.  Ties go to the smaller count.
    """
    m = _check_floors(floors)
    lam = _lambdas(trace, m.shape[0])
    grid = candidate_grid(m)
    _, lo, _ = _kernels.provisioning_dp(grid, m, lam, cost.e0, cost.e1, cost.beta, _kernels.INCREASE, track=False)
    _, hi, _ = _kernels.provisioning_dp(grid, m, lam, cost.e0, cost.e1, cost.beta, _kernels.DECREASE, track=False)
    return grid[lo], grid[hi]


def project(n, lower, upper):
    """Clamp ``n`` into ``[lower, upper]``."""
    return max(min(n, upper), lower)


def run_lcp(floors, trace, cost, bounds=None):
    m = _check_floors(floors)
    lam = _lambdas(trace, m.shape[0])
    lower, upper = bounds if bounds is not None else lcp_frame_bounds(m, lam, cost)
    n = np.empty(m.shape[0])
    prev = 0.0
    for k in range(m.shape[0]):
        prev = project(prev, lower[k], upper[k])
        n[k] = prev
    return _make_plan(n, lam, cost, "lcp")
