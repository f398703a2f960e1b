"""Frame-level workload traces: CSV I/O, synthesis and reshaping."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .errors import (
    EmptyTraceError,
    NegativeRateError,
    TraceFormatError,
    TraceNotFoundError,
    ValidationError,
)

TRACE_HEADER = "frame;lambda"


def fmt(x):
    """Shortest round-trip decimal, locale independent."""
    x = float(x)
    if x == 0.0:
        return "0.0"
    return repr(x)


@dataclass(frozen=True)
class WorkloadTrace:
    """Per-frame mean arrival rates in jobs per slot.

    ``frame_slots`` is the number of slots per frame and ``slot_seconds``
    the slot length, used only to convert delay bounds given in seconds.
    """

    lambdas: np.ndarray
    frame_slots: int = 600
    slot_seconds: float = 1.0
    name: str = field(default="", compare=False)

    def __post_init__(self):
        lam = np.array(self.lambdas, dtype=np.float64).reshape(-1)
        if lam.size < 1:
            raise EmptyTraceError("trace needs at least one frame")
        if not np.all(np.isfinite(lam)):
            raise ValidationError("trace rates must be finite")
        if np.any(lam < 0):
            raise NegativeRateError(f"negative rate at frame {int(np.argmax(lam < 0))}")
        if int(self.frame_slots) < 1:
            raise ValidationError("frame_slots must be >= 1")
        if not self.slot_seconds > 0:
            raise ValidationError("slot_seconds must be > 0")
        lam.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "frame_slots", int(self.frame_slots))
        object.__setattr__(self, "slot_seconds", float(self.slot_seconds))

    def __len__(self):
        return self.lambdas.shape[0]

    def __eq__(self, other):
        if not isinstance(other, WorkloadTrace):
            return NotImplemented
        return (
            self.frame_slots == other.frame_slots
            and self.slot_seconds == other.slot_seconds
            and np.array_equal(self.lambdas, other.lambdas)
        )

    __hash__ = None

    @property
    def peak(self):
        return float(self.lambdas.max())

    @property
    def mean(self):
        return float(self.lambdas.mean())

    @property
    def pmr(self):
        m = self.mean
        if m <= 0:
            raise ValidationError("PMR undefined for an all-zero trace")
        return self.peak / m

    def with_lambdas(self, lambdas):
        return WorkloadTrace(lambdas, self.frame_slots, self.slot_seconds, self.name)


def load_frame_trace(path, slot_seconds=1.0, frame_slots=600):
    path = Path(path)
    if not path.is_file():
        raise TraceNotFoundError(f"trace file not found: {path}")
    text = path.read_text(encoding="utf-8")
    lines = [ln.strip() for ln in text.split("\n")]
    lines = [ln for ln in lines if ln]
    if lines and lines[0].replace(" ", "").lower() == TRACE_HEADER:
        lines = lines[1:]
    if not lines:
        raise EmptyTraceError(f"{path}: no data rows")
    rates = []
    for lineno, row in enumerate(lines):
        parts = row.split(";")
        if len(parts) != 2:
            raise TraceFormatError(f"{path}: row {lineno}: expected 'frame;lambda', got {row!r}")
        try:
            idx = int(parts[0])
            lam = float(parts[1])
        except ValueError:
            raise TraceFormatError(f"{path}: row {lineno}: non-numeric field in {row!r}") from None
        if idx != lineno:
            raise TraceFormatError(f"{path}: row {lineno}: frame index {idx} out of sequence")
        if not np.isfinite(lam):
            raise TraceFormatError(f"{path}: row {lineno}: non-finite rate")
        if lam < 0:
            raise NegativeRateError(f"{path}: row {lineno}: negative rate {lam}")
        rates.append(lam)
    return WorkloadTrace(np.array(rates), frame_slots, slot_seconds, name=path.stem)


def save_frame_trace(trace, path):
    rows = [TRACE_HEADER]
    rows += [f"{k};{fmt(v)}" for k, v in enumerate(trace.lambdas)]
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


def _pmr(x):
    return x.max() / x.mean()


def synth_diurnal(K, mean_rate, pmr, periods=1, seed=0, jitter=0.1,
                  frame_slots=600, slot_seconds=1.0):
    """Diurnal sinusoid with seeded log-normal jitter, hitting ``mean_rate``
    and ``pmr`` exactly.

    Below the base shape's own PMR the shape is lifted by a constant; above
    it the shape is sharpened by a power ``s**p`` (p > 1) solved by Brent's
    method, which keeps every frame strictly positive.
    """
    if K < 2:
        raise ValidationError("K must be >= 2")
    if not mean_rate > 0:
        raise ValidationError("mean_rate must be > 0")
    if not pmr >= 1:
        raise ValidationError(f"invalid PMR {pmr}: must be >= 1")
    if periods < 1:
        raise ValidationError("periods must be >= 1")
    if pmr >= K:
        raise ValidationError(f"PMR {pmr} unreachable with {K} frames")

    name = f"synth-pmr{pmr:g}"
    if pmr == 1:
        return WorkloadTrace(np.full(K, float(mean_rate)), frame_slots, slot_seconds, name)

    rng = np.random.default_rng(seed)
    phase = 2.0 * np.pi * periods * np.arange(K) / K
    base = (1.0 - 0.8 * np.cos(phase)) * rng.lognormal(0.0, jitter, size=K)
    base = base / base.mean()

    p0 = _pmr(base)
    if pmr <= p0:
        # (max + b) / (mean + b) = pmr  with mean == 1
        shaped = base + (base.max() - pmr) / (pmr - 1.0)
    else:
        lb = np.log(base / base.max())

        def gap(p):
            y = np.exp(p * lb)
            return np.log(1.0 / y.mean()) - np.log(pmr)

        hi = 2.0
        while gap(hi) < 0:
            hi *= 2.0
            if hi > 1e6:
                raise ValidationError(f"PMR {pmr} unreachable for this shape")
        p = brentq(gap, 1.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
        shaped = np.exp(p * lb)
    np.maximum(shaped, 0.0, out=shaped)
    lam = shaped * (mean_rate / shaped.mean())
    return WorkloadTrace(lam, frame_slots, slot_seconds, name)


def rescale_pmr(trace, gamma_exp):
    """Return ``c * lambda**gamma_exp`` with ``c`` keeping the mean fixed."""
    if not gamma_exp > 0:
        raise ValidationError("gamma_exp must be > 0")
    lam = trace.lambdas
    mean = lam.mean()
    if mean <= 0:
        raise ValidationError("cannot rescale an all-zero trace: mean undefined")
    if gamma_exp == 1:
        return trace.with_lambdas(lam.copy())
    # normalise first so large rates cannot overflow the power
    powered = (lam / lam.max()) ** gamma_exp
    out = powered * (mean / powered.mean())
    return trace.with_lambdas(out)


def normalize_peak(trace, target_peak=1000.0):
    peak = trace.peak
    if peak <= 0:
        raise ValidationError("cannot normalise a trace with zero peak")
    if peak == target_peak:
        return trace.with_lambdas(trace.lambdas.copy())
    return trace.with_lambdas(trace.lambdas * (target_peak / peak))
