"""Fast time-scale arrival processes and slot-level sample paths."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InfeasibleParameterError, ValidationError
from .trace import fmt


@dataclass(frozen=True)
class Poisson:
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValidationError("Poisson rate must be > 0")

    @property
    def mean(self):
        return float(self.rate)

    @property
    def peak(self):
        return float(self.rate)


@dataclass(frozen=True)
class MarkovModulated:
    """Two-state source emitting ``lam_low`` or ``lam_high`` work per slot.

    ``p_h`` is the per-slot probability low -> high, ``p_l`` high -> low.
    ``lam_low == lam_high`` is accepted as the degenerate constant source.
    """

    lam_low: float
    lam_high: float
    p_h: float
    p_l: float

    def __post_init__(self):
        if not 0 < self.lam_low <= self.lam_high:
            raise ValidationError("MM rates need 0 < lam_low <= lam_high")
        if not (0 < self.p_h <= 1 and 0 < self.p_l <= 1):
            raise ValidationError("MM transition probabilities must lie in (0, 1]")

    @property
    def pi_high(self):
        return self.p_h / (self.p_h + self.p_l)

    @property
    def mean(self):
        return (self.p_l * self.lam_low + self.p_h * self.lam_high) / (self.p_h + self.p_l)

    @property
    def peak(self):
        return float(self.lam_high)

    @property
    def cycle_time(self):
        return 1.0 / self.p_h + 1.0 / self.p_l


@dataclass(frozen=True)
class Pareto:
    """i.i.d. per-slot work with tail ``P(X > x) = (x / scale)**-alpha``."""

    alpha: float
    scale: float

    def __post_init__(self):
        if not 1 < self.alpha < 2:
            raise ValidationError(f"tail index alpha={self.alpha} must lie in (1, 2)")
        if not self.scale > 0:
            raise ValidationError("Pareto scale must be > 0")

    @property
    def mean(self):
        return self.alpha * self.scale / (self.alpha - 1.0)

    @property
    def peak(self):
        return float("inf")


ArrivalModel = Poisson | MarkovModulated | Pareto


def mm_from_burst_param(mean, lam_low, lam_high, cycle_time):
    """Transition probabilities ``(p_h, p_l)`` that reproduce the stationary
    ``mean`` and the two-switch cycle time ``1/p_h + 1/p_l`` (in slots)."""
    if not lam_low < lam_high:
        raise ValidationError("degenerate chain: lam_low must be < lam_high")
    if not lam_low < mean < lam_high:
        raise ValidationError("mean must lie strictly between lam_low and lam_high")
    if not cycle_time > 0:
        raise ValidationError("cycle time must be > 0")
    pi_h = (mean - lam_low) / (lam_high - lam_low)
    p_h = 1.0 / (cycle_time * (1.0 - pi_h))
    p_l = 1.0 / (cycle_time * pi_h)
    if p_h > 1 or p_l > 1:
        t_min = max(1.0 / pi_h, 1.0 / (1.0 - pi_h))
        raise InfeasibleParameterError(
            f"cycle time T={cycle_time} slots infeasible: needs T >= {t_min:.6g}"
        )
    return p_h, p_l


def mm_model(mean, cycle_time, low_ratio=0.5, high_ratio=2.0):
    """MM source with rates ``low_ratio*mean`` / ``high_ratio*mean``."""
    lo, hi = low_ratio * mean, high_ratio * mean
    p_h, p_l = mm_from_burst_param(mean, lo, hi, cycle_time)
    return MarkovModulated(lo, hi, p_h, p_l)


def pareto_from_mean(mean, alpha):
    """Scale ``b`` such that the Pareto(alpha, b) mean equals ``mean``."""
    if not 1 < alpha < 2:
        raise ValidationError(f"tail index alpha={alpha} must lie in (1, 2)")
    if not mean > 0:
        raise ValidationError("mean must be > 0")
    return mean * (alpha - 1.0) / alpha


@dataclass(frozen=True)
class SlotTrace:
    arrivals: np.ndarray
    model: object
    seed: int | None = None

    def __post_init__(self):
        a = np.asarray(self.arrivals, dtype=np.float64)
        if a.ndim != 1 or a.size < 1:
            raise ValidationError("slot trace needs at least one slot")
        if np.any(a < 0):
            raise ValidationError("slot arrivals must be non-negative")
        a.setflags(write=False)
        object.__setattr__(self, "arrivals", a)

    def __len__(self):
        return self.arrivals.shape[0]

    def cumulative(self):
        return np.concatenate(([0.0], np.cumsum(self.arrivals)))


def _mm_states(model, n, rng):
    """High-state indicator path, chain started from stationarity.

    Sojourns are geometric: low lasts Geom(p_h) slots, high Geom(p_l).
    """
    high = rng.random() < model.pi_high
    states = np.empty(n, dtype=bool)
    filled = 0
    # draw sojourns in batches sized from the mean cycle length
    batch = max(16, int(2 * n / model.cycle_time) + 16)
    while filled < n:
        lo = rng.geometric(model.p_h, size=batch)
        hi = rng.geometric(model.p_l, size=batch)
        if high:
            runs = np.column_stack((hi, lo)).ravel()
        else:
            runs = np.column_stack((lo, hi)).ravel()
        flags = np.zeros(runs.shape[0], dtype=bool)
        flags[0 if high else 1::2] = True
        path = np.repeat(flags, runs)
        take = min(n - filled, path.shape[0])
        states[filled:filled + take] = path[:take]
        filled += take
    return states


def sample_slots(model, num_slots, seed=None):
    """Per-slot arrivals: integer Poisson counts, or fluid MM / Pareto work."""
    num_slots = int(num_slots)
    if num_slots < 1:
        raise ValidationError("num_slots must be >= 1")
    rng = np.random.default_rng(seed)
    if isinstance(model, Poisson):
        a = rng.poisson(model.rate, size=num_slots).astype(np.float64)
    elif isinstance(model, MarkovModulated):
        if model.lam_low == model.lam_high:
            a = np.full(num_slots, float(model.lam_low))
        else:
            states = _mm_states(model, num_slots, rng)
            a = np.where(states, model.lam_high, model.lam_low)
    elif isinstance(model, Pareto):
        u = 1.0 - rng.random(num_slots)  # (0, 1]
        a = model.scale * u ** (-1.0 / model.alpha)
    else:
        raise ValidationError(f"unknown arrival model {model!r}")
    return SlotTrace(a, model, seed)


def save_slot_trace(slot_trace, path):
    rows = ["slot;arrival"]
    rows += [f"{t};{fmt(v)}" for t, v in enumerate(slot_trace.arrivals)]
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")
