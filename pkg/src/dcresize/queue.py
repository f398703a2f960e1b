"""Slot-level virtual-server simulation.

Work ``a_t`` enters uniformly over slot ``t`` and a work-conserving server
drains it at constant rate ``C``.  The backlog at the end of a slot obeys
``B_t = max(B_{t-1} + a_t - C, 0)`` and the recorded delay ``D_t = B_t / C``
is the delay of the last work unit that arrived in slot ``t``.  Since the
backlog is piecewise linear inside a slot, ``D_t`` (together with
``D_{t-1}``) also bounds the delay of every other unit in the slot.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import ValidationError
from .trace import fmt

WARMUP_SLOTS = 1000


@dataclass(frozen=True)
class VirtualQueueRun:
    backlog: np.ndarray
    delay: np.ndarray
    service_rate: float
    source: object = None

    def __len__(self):
        return self.delay.shape[0]


def _arrivals(slot_trace):
    return np.asarray(getattr(slot_trace, "arrivals", slot_trace), dtype=np.float64)


def simulate_delays(slot_trace, service_rate):
    """Run the fluid recursion over a :class:`~dcresize.arrival.SlotTrace`
    (or any 1-d array of per-slot work)."""
    if not service_rate > 0:
        raise ValidationError("service rate must be > 0")
    a = _arrivals(slot_trace)
    d = _kernels.delay_path(a / service_rate)
    return VirtualQueueRun(d * service_rate, d, float(service_rate), slot_trace)


def empirical_violation(run, delay_bound, warmup=0):
    """Fraction of (post warm-up) slots whose delay exceeds ``delay_bound``."""
    d = run.delay[warmup:]
    if d.shape[0] == 0:
        raise ValidationError("no slots left after warm-up")
    return float(np.count_nonzero(d > delay_bound)) / d.shape[0]


@dataclass(frozen=True)
class SplitReport:
    servers: int
    max_discrepancy: float
    ok: bool


def split_equivalence_check(slot_trace, servers, service_rate, atol=1e-12):
    """Compare one of ``servers`` equal-share servers (rate ``service_rate``)
    with the single virtual server of rate ``servers * service_rate``."""
    if servers < 1:
        raise ValidationError("need at least one server")
    if not service_rate > 0:
        raise ValidationError("service rate must be > 0")
    a = _arrivals(slot_trace)
    single = simulate_delays(a / servers, service_rate)
    virtual = simulate_delays(a, servers * service_rate)
    gap = float(np.max(np.abs(single.delay - virtual.delay)))
    return SplitReport(int(servers), gap, gap <= atol)


def save_run(run, path):
    rows = ["slot;backlog;delay"]
    rows += [f"{t};{fmt(b)};{fmt(d)}" for t, (b, d) in enumerate(zip(run.backlog, run.delay))]
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")
