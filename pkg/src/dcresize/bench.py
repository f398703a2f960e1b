"""Experiment harness: parameter sweeps, savings metrics and threshold maps.

A sweep takes the Cartesian product of the configured lists.  Points that
share capacity floors (everything except the switching cost) are solved in
one task; tasks run in a process pool and rows are sorted by their sweep
coordinates before writing, so output bytes never depend on scheduling.
"""

from __future__ import annotations

import itertools
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .capacity import FAMILIES, SlaSpec, capacity_profile
from .errors import DcrError, ValidationError
from .plan import CostModel, offline_optimal, optimal_static, run_lcp
from .trace import fmt, load_frame_trace, normalize_peak, rescale_pmr, synth_diurnal

SAVINGS_TOL = 1e-9
PMR_TOL = 0.01
SCAN_POINTS = 6

SWEEP_COLUMNS = (
    "trace", "seed", "family", "alpha", "cycle_time", "delay_bound_s", "violation_prob",
    "beta", "gamma_exp", "pmr", "cost_static", "cost_optimal", "cost_lcp",
    "savings_optimal", "savings_lcp", "lcp_relative", "error",
)

_LIST_FIELDS = ("traces", "families", "alphas", "cycle_times", "delay_bounds_s",
                "violation_probs", "betas", "gamma_exps", "seeds")


@dataclass(frozen=True)
class ExperimentConfig:
    """Sweep definition.  Every list field must be non-empty.

    Each entry of ``traces`` is a dict with a ``name`` and either ``file``
    (a frame CSV) or ``synth`` (keyword arguments for
    :func:`~dcresize.trace.synth_diurnal`, seeded per sweep seed).  An
    optional ``peak`` rescales the trace to that peak rate.
    """

    traces: tuple = ()
    families: tuple = ("poisson", "mm", "pareto")
    alphas: tuple = (1.5,)
    cycle_times: tuple = (6.0,)
    delay_bounds_s: tuple = (0.2,)
    violation_probs: tuple = (1e-3,)
    betas: tuple = (6.0,)
    gamma_exps: tuple = (1.0,)
    seeds: tuple = (0,)
    service_rate: float = 10.0
    e0: float = 1.0
    e1: float = 0.0
    mm_low_ratio: float = 0.5
    mm_high_ratio: float = 2.0
    workers: int | None = None
    output_dir: str = "results"
    base_dir: str = field(default=".", compare=False)

    def __post_init__(self):
        for name in _LIST_FIELDS:
            value = getattr(self, name)
            if isinstance(value, (str, bytes)) or not hasattr(value, "__iter__"):
                raise ValidationError(f"config field {name!r} must be a list")
            value = tuple(value)
            if not value:
                raise ValidationError(f"config field {name!r} must be non-empty")
            object.__setattr__(self, name, value)
        for fam in self.families:
            if fam not in FAMILIES:
                raise ValidationError(f"unknown arrival family {fam!r}; expected one of {FAMILIES}")
        names = [t.get("name") if isinstance(t, dict) else None for t in self.traces]
        if None in names or len(set(names)) != len(names):
            raise ValidationError("every trace needs a unique 'name'")
        for spec in self.traces:
            if ("file" in spec) == ("synth" in spec):
                raise ValidationError(f"trace {spec['name']!r} needs exactly one of 'file' or 'synth'")
            if "file" in spec and not self.resolve(spec["file"]).is_file():
                raise ValidationError(f"trace file not found: {self.resolve(spec['file'])}")
        if self.workers is not None and int(self.workers) < 1:
            raise ValidationError("workers must be >= 1")
        CostModel(self.e0, self.e1, min(self.betas), self.service_rate)

    def resolve(self, path):
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def to_dict(self):
        d = asdict(self)
        d.pop("base_dir")
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    def with_overrides(self, **kw):
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def config_from_dict(data, base_dir="."):
    known = {f.name for f in fields(ExperimentConfig)} - {"base_dir"}
    unknown = set(data) - known
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**data, base_dir=str(base_dir))


def load_config(path):
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise ValidationError(f"config is not valid JSON: {err}") from err
    return config_from_dict(data, base_dir=path.parent)


def default_config():
    text = resources.files("dcresize").joinpath("data/default_config.json").read_text(encoding="utf-8")
    return config_from_dict(json.loads(text))


def savings(cost_dynamic, cost_static, strict=True):
    """Fractional saving of a dynamic plan over the static one.

    With ``strict`` a dynamic cost above the static cost (beyond 1e-9
    relative) raises, since for an optimal plan it signals a solver bug.
    LCP is only 3-competitive, so its savings may legitimately be negative
    and are computed with ``strict=False``.
    """
    if not cost_static > 0:
        raise ValidationError("static cost must be > 0")
    if strict and cost_dynamic > cost_static * (1.0 + SAVINGS_TOL):
        raise DcrError(f"dynamic cost {cost_dynamic} exceeds static cost {cost_static}")
    return (cost_static - cost_dynamic) / cost_static


def build_trace(config, spec, seed):
    if "file" in spec:
        tr = load_frame_trace(config.resolve(spec["file"]))
    else:
        tr = synth_diurnal(**spec["synth"], seed=int(seed))
    if spec.get("peak") is not None:
        tr = normalize_peak(tr, float(spec["peak"]))
    return tr


def family_params(config, family, burst):
    if family == "pareto":
        return {"alpha": burst}
    if family == "mm":
        return {"cycle_time": burst, "low_ratio": config.mm_low_ratio, "high_ratio": config.mm_high_ratio}
    return {}


def burst_values(config, family):
    if family == "pareto":
        return config.alphas
    if family == "mm":
        return config.cycle_times
    return (None,)


def evaluate(config, trace, family, burst, delay_s, eps, betas):
    """Costs of the three plans for each switching cost in ``betas``.

    Returns a list of dicts with costs and savings, one per beta.
    """
    sla = SlaSpec.from_seconds(delay_s, eps, trace.slot_seconds)
    floors = capacity_profile(trace, family, family_params(config, family, burst), sla, config.service_rate)
    out = []
    for beta in betas:
        cost = CostModel(config.e0, config.e1, beta, config.service_rate)
        static = optimal_static(floors, trace, cost).total_cost
        opt = offline_optimal(floors, trace, cost).total_cost
        lcp = run_lcp(floors, trace, cost).total_cost
        s_opt = savings(opt, static)
        s_lcp = savings(lcp, static, strict=False)
        out.append({
            "cost_static": static, "cost_optimal": opt, "cost_lcp": lcp,
            "savings_optimal": s_opt, "savings_lcp": s_lcp,
            "lcp_relative": s_lcp / s_opt if s_opt > 0 else None,
        })
    return out


@dataclass(frozen=True)
class SweepResult:
    rows: list
    columns: tuple = SWEEP_COLUMNS

    @property
    def errors(self):
        return [r for r in self.rows if r["error"]]

    def select(self, **coords):
        return [r for r in self.rows if all(r[k] == v for k, v in coords.items())]

    def to_csv(self):
        lines = [";".join(self.columns)]
        for r in self.rows:
            lines.append(";".join(_cell(r[c]) for c in self.columns))
        return "\n".join(lines) + "\n"


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return fmt(v)


def _tasks(config):
    for (ti, spec), (si, seed), (fi, fam) in itertools.product(
        enumerate(config.traces), enumerate(config.seeds), enumerate(config.families)
    ):
        for bi, burst in enumerate(burst_values(config, fam)):
            for (di, d), (ei, e), (gi, g) in itertools.product(
                enumerate(config.delay_bounds_s), enumerate(config.violation_probs), enumerate(config.gamma_exps)
            ):
                key = (ti, si, fi, bi, di, ei, gi)
                yield key, (spec, seed, fam, burst, d, e, g)


def _run_task(config, key, point):
    spec, seed, fam, burst, d, e, g = point
    base = {
        "trace": spec["name"], "seed": int(seed), "family": fam,
        "alpha": burst if fam == "pareto" else None,
        "cycle_time": burst if fam == "mm" else None,
        "delay_bound_s": float(d), "violation_prob": float(e), "gamma_exp": float(g),
    }
    rows = []
    try:
        trace = build_trace(config, spec, seed)
        if g != 1.0:
            trace = rescale_pmr(trace, g)
        base["pmr"] = trace.pmr
        results = evaluate(config, trace, fam, burst, d, e, config.betas)
        for bi, (beta, res) in enumerate(zip(config.betas, results)):
            rows.append((key + (bi,), {**base, "beta": float(beta), **res, "error": ""}))
    except DcrError as err:
        msg = f"{type(err).__name__}: {err}".replace(";", ",").replace("\n", " ")
        for bi, beta in enumerate(config.betas):
            empty = {c: None for c in SWEEP_COLUMNS}
            rows.append((key + (bi,), {**empty, **base, "beta": float(beta), "error": msg}))
    return rows


def _run_task_star(args):
    return _run_task(*args)


def run_sweep(config, write=True):
    """Evaluate every sweep point; optionally write ``sweep.csv`` and
    ``manifest.json`` into ``config.output_dir``."""
    jobs = [(config, key, point) for key, point in _tasks(config)]
    workers = config.workers or os.cpu_count() or 1
    workers = min(workers, len(jobs))
    if workers <= 1:
        chunks = [_run_task_star(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_task_star, jobs))
    keyed = sorted((row for chunk in chunks for row in chunk), key=lambda kr: kr[0])
    for _, row in keyed:
        for col in SWEEP_COLUMNS:
            row.setdefault(col, None)
    result = SweepResult([row for _, row in keyed])
    if write:
        write_sweep(result, config)
    return result


def write_sweep(result, config):
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(result.to_csv(), encoding="utf-8")
    manifest = {
        "version": __version__,
        "config": config.to_dict(),
        "columns": list(result.columns),
        "rows": len(result.rows),
        "errors": len(result.errors),
        "files": ["sweep.csv"],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out


# --------------------------------------------------------------------------
# threshold maps


@dataclass(frozen=True)
class ThresholdCell:
    family: str
    burst: float | None
    modifier: str
    value: float
    status: str  # "ok", "unreachable" or "non-monotone"
    threshold_pmr: float | None
    gamma: float | None


@dataclass(frozen=True)
class ThresholdMap:
    target: float
    trace: str
    cells: list

    def curve(self, family, modifier_value):
        return {c.burst: c.threshold_pmr for c in self.cells
                if c.family == family and c.value == modifier_value}

    def to_dict(self):
        return {"target": self.target, "trace": self.trace, "cells": [asdict(c) for c in self.cells]}


def _threshold_cell(config, base, family, burst, delay_s, eps, beta, target, gamma_max, pmr_tol):
    sub = replace(config, betas=(beta,))

    def point(g):
        tr = rescale_pmr(base, g) if g > 0 else base.with_lambdas(np.full(len(base.lambdas), base.mean))
        return tr.pmr, evaluate(sub, tr, family, burst, delay_s, eps, (beta,))[0]["savings_optimal"]

    if target <= 0:
        return "ok", 1.0, 0.0
    grid = np.linspace(0.0, gamma_max, SCAN_POINTS)
    scan = [point(g) for g in grid]
    sv = np.array([s for _, s in scan])
    if np.any(np.diff(sv) < -SAVINGS_TOL):
        return "non-monotone", None, None
    hit = np.nonzero(sv >= target)[0]
    if hit.size == 0:
        return "unreachable", None, None
    j = int(hit[0])
    if j == 0:
        return "ok", scan[0][0], 0.0
    lo, hi = grid[j - 1], grid[j]
    (p_lo, s_lo), (p_hi, s_hi) = scan[j - 1], scan[j]
    while p_hi - p_lo > pmr_tol:
        mid = 0.5 * (lo + hi)
        p_mid, s_mid = point(mid)
        if s_mid < s_lo - SAVINGS_TOL or s_mid > s_hi + SAVINGS_TOL:
            return "non-monotone", None, None
        if s_mid >= target:
            hi, p_hi, s_hi = mid, p_mid, s_mid
        else:
            lo, p_lo, s_lo = mid, p_mid, s_mid
    return "ok", p_hi, hi


def threshold_map(config, target, modifier="beta", trace=None, families=None, gamma_max=3.0,
                  pmr_tol=PMR_TOL, seed=None):
    """Minimal PMR reaching ``target`` optimal savings, per burstiness value
    and per value of the modifier (``"beta"`` or ``"eps"``).

    The PMR axis is explored by rescaling the chosen trace with exponent
    ``gamma`` in ``[0, gamma_max]`` (``gamma = 0`` is the flat trace).  A
    coarse scan checks that savings grow with ``gamma`` before bisecting.
    """
    if not target < 1:
        raise ValidationError("target savings must be < 1")
    if modifier not in ("beta", "eps"):
        raise ValidationError("modifier must be 'beta' or 'eps'")
    if not gamma_max > 0:
        raise ValidationError("gamma_max must be > 0")
    specs = {s["name"]: s for s in config.traces}
    name = trace if trace is not None else config.traces[0]["name"]
    if name not in specs:
        raise ValidationError(f"unknown trace {name!r}")
    base = build_trace(config, specs[name], config.seeds[0] if seed is None else seed)
    values = config.betas if modifier == "beta" else config.violation_probs
    cells = []
    for fam in families or config.families:
        if fam not in FAMILIES:
            raise ValidationError(f"unknown arrival family {fam!r}")
        for burst in burst_values(config, fam):
            for v in values:
                beta = v if modifier == "beta" else config.betas[0]
                eps = v if modifier == "eps" else config.violation_probs[0]
                try:
                    status, pmr, g = _threshold_cell(config, base, fam, burst, config.delay_bounds_s[0],
                                                     eps, beta, target, gamma_max, pmr_tol)
                except DcrError as err:
                    status, pmr, g = f"error: {err}", None, None
                cells.append(ThresholdCell(fam, burst, modifier, float(v), status,
                                           None if pmr is None else float(pmr), None if g is None else float(g)))
    return ThresholdMap(float(target), name, cells)


def mean_displacement(tmap, family, v1, v2):
    """Mean absolute threshold-PMR shift between two modifier values over
    the burstiness values where both cells are answered."""
    a, b = tmap.curve(family, v1), tmap.curve(family, v2)
    diffs = [abs(b[k] - a[k]) for k in a if k in b and a[k] is not None and b[k] is not None]
    if not diffs:
        raise ValidationError("no burstiness value answered at both modifier values")
    return float(np.mean(diffs))


def write_threshold(tmap, output_dir):
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cols = ("family", "burst", "modifier", "value", "status", "threshold_pmr", "gamma")
    lines = [";".join(cols)]
    for c in tmap.cells:
        lines.append(";".join(_cell(getattr(c, k)) for k in cols))
    path = out / f"threshold_{tmap.cells[0].modifier if tmap.cells else 'none'}.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
