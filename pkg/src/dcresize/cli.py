"""Command-line entry point: ``dcresize {capacity,simulate,plan,sweep,threshold}``.

Exit codes: 0 success, 1 validation error, 2 solver non-convergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import _kernels, bench
from .arrival import MarkovModulated, Pareto, Poisson, mm_model, pareto_from_mean, sample_slots, save_slot_trace
from .capacity import FAMILIES, SlaSpec, capacity_poisson_implicit, capacity_profile, solve_capacity
from .errors import ConvergenceError, DcrError, ValidationError
from .plan import CostModel, offline_optimal, optimal_static, run_lcp
from .queue import WARMUP_SLOTS, empirical_violation, save_run, simulate_delays, split_equivalence_check
from .trace import fmt, load_frame_trace

EXIT_OK, EXIT_VALIDATION, EXIT_CONVERGENCE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from err


def _ints(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from err


def _strs(text):
    return [x.strip() for x in text.split(",") if x.strip()]


def _flag(parser, name, **kw):
    # accept both --name_with_underscores (config key) and --name-with-dashes
    opts = [f"--{name}"]
    if "_" in name:
        opts.append(f"--{name.replace('_', '-')}")
    parser.add_argument(*opts, dest=name, **kw)


def _dump(obj):
    print(json.dumps(obj, indent=2, sort_keys=True, default=_json_default))


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def _sla_args(p):
    _flag(p, "delay_bound_s", type=float, default=0.2, help="delay bound in seconds (default 0.2)")
    _flag(p, "violation_prob", type=float, default=1e-3, help="violation probability (default 1e-3)")
    _flag(p, "slot_seconds", type=float, default=1.0, help="slot length in seconds (default 1)")


def _family_args(p):
    p.add_argument("--family", choices=FAMILIES, default="poisson")
    _flag(p, "alpha", type=float, default=1.5, help="Pareto tail index")
    _flag(p, "cycle_time", type=float, default=6.0, help="MM cycle time T in slots")
    _flag(p, "low_ratio", type=float, default=0.5, help="MM lam_low / mean")
    _flag(p, "high_ratio", type=float, default=2.0, help="MM lam_high / mean")


def _model(args, rate):
    if args.family == "poisson":
        return Poisson(rate)
    if args.family == "mm":
        return mm_model(rate, args.cycle_time, args.low_ratio, args.high_ratio)
    return Pareto(args.alpha, pareto_from_mean(rate, args.alpha))


def _model_dict(model):
    if isinstance(model, Poisson):
        return {"family": "poisson", "rate": model.rate}
    if isinstance(model, MarkovModulated):
        return {"family": "mm", "lam_low": model.lam_low, "lam_high": model.lam_high,
                "p_h": model.p_h, "p_l": model.p_l, "cycle_time": model.cycle_time, "mean": model.mean}
    return {"family": "pareto", "alpha": model.alpha, "scale": model.scale, "mean": model.mean}


def cmd_capacity(args):
    sla = SlaSpec.from_seconds(args.delay_bound_s, args.violation_prob, args.slot_seconds)
    model = _model(args, args.rate)
    if args.implicit and args.family != "poisson":
        raise ValidationError("--implicit applies to the poisson family only")
    sol = capacity_poisson_implicit(args.rate, sla) if args.implicit else solve_capacity(model, sla)
    _dump({"model": _model_dict(model), "delay_bound_slots": sla.delay_bound,
           "violation_prob": sla.violation_prob, **sol.as_dict()})


def cmd_simulate(args):
    sla = SlaSpec.from_seconds(args.delay_bound_s, args.violation_prob, args.slot_seconds)
    model = _model(args, args.rate)
    cap = args.capacity if args.capacity is not None else solve_capacity(model, sla).capacity
    seeds = _env_seeds() or args.seeds
    report = {"model": _model_dict(model), "capacity": cap, "delay_bound_slots": sla.delay_bound,
              "violation_prob": sla.violation_prob, "slots": args.slots, "warmup": args.warmup,
              "backend": _kernels.backend(), "runs": []}
    for seed in seeds:
        st = sample_slots(model, args.slots, seed)
        run = simulate_delays(st, cap)
        frac = empirical_violation(run, sla.delay_bound, args.warmup)
        entry = {"seed": seed, "violation_fraction": frac, "ok": frac <= sla.violation_prob}
        if args.servers:
            entry["split"] = {}
            for n in args.servers:
                rep = split_equivalence_check(st, n, cap / n)
                entry["split"][str(n)] = {"max_discrepancy": rep.max_discrepancy, "ok": rep.ok}
        if args.out_dir:
            out = Path(args.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            save_slot_trace(st, out / f"slots_seed{seed}.csv")
            save_run(run, out / f"run_seed{seed}.csv")
        report["runs"].append(entry)
    _dump(report)
    return EXIT_OK


def cmd_plan(args):
    trace = load_frame_trace(args.trace, args.slot_seconds, args.frame_slots)
    sla = SlaSpec.from_seconds(args.delay_bound_s, args.violation_prob, trace.slot_seconds)
    params = {"alpha": args.alpha, "cycle_time": args.cycle_time,
              "low_ratio": args.low_ratio, "high_ratio": args.high_ratio}
    floors = capacity_profile(trace, args.family, params, sla, args.service_rate)
    cost = CostModel(args.e0, args.e1, args.beta, args.service_rate)
    plans = {"optimal": offline_optimal(floors, trace, cost),
             "lcp": run_lcp(floors, trace, cost),
             "static": optimal_static(floors, trace, cost)}
    summary = {"trace": str(args.trace), "frames": len(trace), "family": args.family,
               "cost_model": {"e0": cost.e0, "e1": cost.e1, "beta": cost.beta, "service_rate": cost.service_rate},
               "plans": {k: {"operating": p.operating_cost, "switching": p.switching_cost, "total": p.total_cost}
                         for k, p in plans.items()}}
    static = plans["static"].total_cost
    summary["savings_optimal"] = bench.savings(plans["optimal"].total_cost, static)
    summary["savings_lcp"] = bench.savings(plans["lcp"].total_cost, static, strict=False)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        rows = ["frame;floor;n_opt;n_lcp;n_static"]
        for k in range(len(trace)):
            rows.append(";".join([str(k), fmt(floors[k])] + [fmt(plans[n].servers[k]) for n in ("optimal", "lcp", "static")]))
        (out / "plan.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
        (out / "plan_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _dump(summary)
    return EXIT_OK


def _env_seeds():
    raw = os.environ.get("DCR_SEED", "").strip()
    if not raw:
        return None
    try:
        return _ints(raw)
    except argparse.ArgumentTypeError as err:
        raise ValidationError(f"DCR_SEED: {err}") from err


_CONFIG_FLAGS = {
    "families": _strs, "alphas": _floats, "cycle_times": _floats, "delay_bounds_s": _floats,
    "violation_probs": _floats, "betas": _floats, "gamma_exps": _floats, "seeds": _ints,
    "service_rate": float, "e0": float, "e1": float, "mm_low_ratio": float, "mm_high_ratio": float,
    "workers": int, "output_dir": str,
}


def _config_args(p):
    p.add_argument("--config", help="experiment config JSON (default: the shipped config)")
    for name, conv in _CONFIG_FLAGS.items():
        _flag(p, name, type=conv, default=None)


def _load_config(args):
    cfg = bench.load_config(args.config) if args.config else bench.default_config()
    cfg = cfg.with_overrides(**{k: getattr(args, k) for k in _CONFIG_FLAGS})
    seeds = _env_seeds()
    if seeds:
        cfg = replace(cfg, seeds=tuple(seeds))
    return cfg


def cmd_sweep(args):
    cfg = _load_config(args)
    result = bench.run_sweep(cfg)
    _dump({"output_dir": cfg.output_dir, "rows": len(result.rows), "errors": len(result.errors)})
    return EXIT_OK


def cmd_threshold(args):
    cfg = _load_config(args)
    tmap = bench.threshold_map(cfg, args.target, args.modifier, trace=args.trace,
                               gamma_max=args.gamma_max, pmr_tol=args.pmr_tol)
    path = bench.write_threshold(tmap, cfg.output_dir)
    Path(path).with_suffix(".json").write_text(
        json.dumps(tmap.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _dump({"file": str(path), **tmap.to_dict()})
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="dcresize", description="Dynamic data-center resizing under SLA constraints.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("capacity", help="solve the effective capacity C(D, eps) and print JSON")
    p.add_argument("--rate", type=float, default=300.0, help="mean arrival rate, jobs/slot")
    _family_args(p)
    _sla_args(p)
    p.add_argument("--implicit", action="store_true", help="use the implicit (bisection) Poisson solver")
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("simulate", help="slot-level bound validation run")
    p.add_argument("--rate", type=float, default=300.0)
    _family_args(p)
    _sla_args(p)
    p.add_argument("--capacity", type=float, default=None, help="service rate (default: solved)")
    p.add_argument("--slots", type=int, default=1_000_000)
    p.add_argument("--warmup", type=int, default=WARMUP_SLOTS)
    p.add_argument("--seeds", type=_ints, default=[0, 1, 2])
    p.add_argument("--servers", type=_ints, default=None, help="split-equivalence server counts")
    _flag(p, "out_dir", default=None, help="write slot and delay CSVs here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("plan", help="static / optimal / LCP plans on a frame trace")
    p.add_argument("--trace", required=True, help="frame trace CSV")
    _family_args(p)
    _sla_args(p)
    _flag(p, "frame_slots", type=int, default=600)
    _flag(p, "service_rate", type=float, default=10.0)
    p.add_argument("--e0", type=float, default=1.0)
    p.add_argument("--e1", type=float, default=0.0)
    p.add_argument("--beta", type=float, default=6.0)
    _flag(p, "out_dir", default=None, help="write plan.csv and plan_summary.json here")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("sweep", help="run an experiment sweep from a config file")
    _config_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("threshold", help="minimal PMR reaching a savings target")
    _config_args(p)
    p.add_argument("--target", type=float, default=0.2)
    p.add_argument("--modifier", choices=("beta", "eps"), default="beta")
    p.add_argument("--trace", default=None, help="trace name from the config (default: first)")
    _flag(p, "gamma_max", type=float, default=3.0)
    _flag(p, "pmr_tol", type=float, default=bench.PMR_TOL)
    p.set_defaults(func=cmd_threshold)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code = args.func(args)
    except ConvergenceError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except DcrError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
