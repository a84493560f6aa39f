"""Command-line front end.

    mecpaoi {eval,optimize,simulate,sweep,validate} --config exp.json [--output PATH]
            [--format csv|json] [--packets N] [--seed N]

Exit codes: 0 ok, 1 runtime failure, 2 invalid config, 3 quadrature failure,
4 optimizer did not converge. ``validate`` exits 1 when any check fails.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, fields
from typing import Optional

import jsonschema
import numpy as np

from . import nonpreemptive as wop
from . import preemptive as wp
from .distributions import Exponential, from_json, with_mean
from .numerics import QuadratureError
from .results import ConvergenceError, UnreachableDeliveryError
from .simulator import (
    FixedThresholdPolicy,
    MeanThresholdPolicy,
    RandomizedThresholdPolicy,
    SimulationError,
    SystemConfig,
    TransmissionAwarePolicy,
    simulate,
)

log = logging.getLogger("mecpaoi")

EXIT_OK, EXIT_FAIL, EXIT_SCHEMA, EXIT_QUADRATURE, EXIT_CONVERGENCE = 0, 1, 2, 3, 4
DEFAULT_PACKETS, DEFAULT_SEED, DEFAULT_BATCHES = 10**6, 42, 100

_threshold = {"oneOf": [{"type": "number", "minimum": 0}, {"const": "inf"}]}
_dist = {
    "type": "object",
    "required": ["kind"],
    "oneOf": [
        {"properties": {"kind": {"const": "exponential"},
                        "rate": {"type": "number", "exclusiveMinimum": 0}},
         "required": ["rate"]},
        {"properties": {"kind": {"const": "pareto"},
                        "xm": {"type": "number", "exclusiveMinimum": 0},
                        "alpha": {"type": "number", "exclusiveMinimum": 1}},
         "required": ["xm", "alpha"]},
        {"properties": {"kind": {"const": "deterministic"},
                        "value": {"type": "number", "minimum": 0}},
         "required": ["value"]},
    ],
}
_policy = {
    "type": "object",
    "required": ["kind"],
    "oneOf": [
        {"properties": {"kind": {"const": "fixed_threshold"}, "theta": _threshold}},
        {"properties": {"kind": {"const": "randomized_threshold"}, "theta_dist": _dist},
         "required": ["theta_dist"]},
        {"properties": {"kind": {"const": "transmission_aware"}, "beta": _threshold}},
        {"properties": {"kind": {"enum": ["mean_threshold", "optimal",
                                          "optimal_fixed", "optimal_transmission_aware"]}}},
    ],
}
_system = {"enum": ["preemptive", "non_preemptive"]}
_case = {
    "type": "object",
    "required": ["system", "transmission", "computation", "policy"],
    "properties": {"name": {"type": "string"}, "system": _system,
                   "transmission": _dist, "computation": _dist, "policy": _policy},
}
CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["system", "transmission", "computation", "policy"],
    "properties": {
        "system": _system,
        "transmission": _dist,
        "computation": _dist,
        "policy": _policy,
        "sim": {
            "type": "object",
            "properties": {
                "packets": {"type": "integer", "minimum": 2},
                "seed": {"type": "integer", "minimum": 0},
                "batches": {"type": "integer", "minimum": 2},
            },
            "additionalProperties": False,
        },
        "sweep": {
            "type": "object",
            "required": ["ratio_grid"],
            "properties": {
                "ratio_grid": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                "total_mean": {"type": "number", "exclusiveMinimum": 0},
                "systems": {"type": "array", "items": _system, "minItems": 1},
                "policies": {"type": "array", "items": _policy, "minItems": 1},
                "workers": {"type": "integer", "minimum": 1},
                "gnuplot": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "validate": {
            "type": "object",
            "properties": {
                "matrix": {"type": "array", "items": _case},
                "se_multiplier": {"type": "number", "minimum": 0},
                "abs_tol": {"type": "number", "minimum": 0},
            },
            "additionalProperties": False,
        },
    },
}

DEFAULT_SWEEP_POLICIES = [
    {"kind": "optimal_fixed"},
    {"kind": "optimal_transmission_aware"},
    {"kind": "mean_threshold"},
]

DEFAULT_VALIDATION_MATRIX = [
    {"name": "non-preemptive flat case", "system": "non_preemptive",
     "transmission": {"kind": "exponential", "rate": 2.0},
     "computation": {"kind": "exponential", "rate": 2.0},
     "policy": {"kind": "fixed_threshold", "theta": 0.3}},
    {"name": "non-preemptive 3:1 best effort", "system": "non_preemptive",
     "transmission": {"kind": "exponential", "rate": 4.0 / 3.0},
     "computation": {"kind": "exponential", "rate": 4.0},
     "policy": {"kind": "fixed_threshold", "theta": 0.0}},
    {"name": "non-preemptive deterministic", "system": "non_preemptive",
     "transmission": {"kind": "deterministic", "value": 0.5},
     "computation": {"kind": "deterministic", "value": 0.5},
     "policy": {"kind": "fixed_threshold", "theta": "inf"}},
    {"name": "preemptive best effort", "system": "preemptive",
     "transmission": {"kind": "exponential", "rate": 2.0},
     "computation": {"kind": "exponential", "rate": 2.0},
     "policy": {"kind": "fixed_threshold", "theta": 0.0}},
    {"name": "preemptive transmission-aware", "system": "preemptive",
     "transmission": {"kind": "exponential", "rate": 2.0},
     "computation": {"kind": "exponential", "rate": 2.0},
     "policy": {"kind": "transmission_aware", "beta": 0.45}},
    {"name": "preemptive deterministic tie", "system": "preemptive",
     "transmission": {"kind": "deterministic", "value": 0.5},
     "computation": {"kind": "deterministic", "value": 0.5},
     "policy": {"kind": "fixed_threshold", "theta": 0.0}},
]


class ConfigError(ValueError):
    pass


@dataclass
class ResultRow:
    ratio: float
    system: str
    policy: str
    threshold: float
    paoi_analytic: float = math.nan
    paoi_sim: float = math.nan
    paoi_stderr: float = math.nan
    aoi_sim: float = math.nan
    delivery_ratio: float = math.nan
    error: str = ""


COLUMNS = [f.name for f in fields(ResultRow)]


def fmt_float(x) -> str:
    """17 significant digits; parses back to the same double."""
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([fmt_float(getattr(r, c)) if c not in ("system", "policy", "error")
                    else getattr(r, c) for c in COLUMNS])
    return buf.getvalue()


def rows_from_csv(text: str) -> list:
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        kw = {c: (rec[c] if c in ("system", "policy", "error") else float(rec[c]))
              for c in COLUMNS}
        out.append(ResultRow(**kw))
    return out


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return fmt_float(v)
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    return v


def rows_to_json(rows) -> str:
    return json.dumps([_json_safe(asdict(r)) for r in rows], indent=2) + "\n"


# -- config handling ---------------------------------------------------------

def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None


def _thr(v) -> float:
    return math.inf if v == "inf" else float(v)


def parse_system(cfg: dict, discipline: Optional[str] = None) -> SystemConfig:
    try:
        return SystemConfig(discipline or cfg["system"], from_json(cfg["transmission"]),
                            from_json(cfg["computation"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def parse_policy(obj: dict):
    kind = obj["kind"]
    try:
        if kind == "fixed_threshold":
            return FixedThresholdPolicy(_thr(obj.get("theta", 0.0)))
        if kind == "transmission_aware":
            return TransmissionAwarePolicy(_thr(obj.get("beta", 0.0)))
        if kind == "randomized_threshold":
            return RandomizedThresholdPolicy(from_json(obj["theta_dist"]))
        if kind == "mean_threshold":
            return MeanThresholdPolicy()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"policy kind {kind!r} names an optimizer, not a concrete policy")


def sim_settings(cfg: dict, packets=None, seed=None):
    sim = cfg.get("sim", {})
    return (packets if packets is not None else sim.get("packets", DEFAULT_PACKETS),
            seed if seed is not None else sim.get("seed", DEFAULT_SEED),
            sim.get("batches", DEFAULT_BATCHES))


def policy_threshold(policy, system: SystemConfig) -> float:
    if isinstance(policy, FixedThresholdPolicy):
        return policy.theta
    if isinstance(policy, TransmissionAwarePolicy):
        return policy.beta
    if isinstance(policy, MeanThresholdPolicy):
        return system.C.mean
    return math.nan


def analytic_paoi(system: SystemConfig, policy) -> float:
    T, C = system.T, system.C
    if isinstance(policy, MeanThresholdPolicy):
        policy = FixedThresholdPolicy(C.mean)
    if system.discipline == "non_preemptive":
        if isinstance(policy, FixedThresholdPolicy):
            return wop.paoi_wop(policy.theta, T, C).paoi
        if isinstance(policy, RandomizedThresholdPolicy):
            return wop.paoi_wop_randomized(policy.theta_dist, T, C)
        raise ConfigError("no analytic evaluator for a transmission-aware policy "
                          "in the non-preemptive system")
    if isinstance(policy, FixedThresholdPolicy):
        return wp.paoi_wp(wp.FixedThreshold(policy.theta), T, C).paoi
    if isinstance(policy, TransmissionAwarePolicy):
        return wp.paoi_wp(wp.TransmissionAware(policy.beta), T, C).paoi
    raise ConfigError("randomized thresholds are only evaluated for the non-preemptive system")


def run_optimizer(system: SystemConfig, kind: str):
    """Returns ``(result, concrete_policy)`` for an optimizing policy kind."""
    T, C = system.T, system.C
    if system.discipline == "non_preemptive":
        if kind in ("optimal_transmission_aware", "transmission_aware"):
            raise ConfigError("transmission-aware optimization is defined for the "
                              "preemptive system only")
        # a fixed threshold is optimal among stationary randomized ones
        res = wop.optimize(T, C)
        return res, FixedThresholdPolicy(res.threshold)
    if kind in ("fixed_threshold", "optimal_fixed"):
        res = wp.optimize_fixed_threshold_wp(T, C)
        return res, FixedThresholdPolicy(res.threshold)
    if isinstance(C, Exponential) and kind in ("optimal", "optimal_transmission_aware",
                                               "transmission_aware"):
        res = wp.optimal_policy_exp_C(T, C.rate)
        return res, TransmissionAwarePolicy(res.threshold)
    if kind in ("optimal", "optimal_transmission_aware", "transmission_aware"):
        res = wp.optimize_transmission_aware_wp(T, C)
        return res, TransmissionAwarePolicy(res.threshold)
    raise ConfigError(f"no optimizer for policy kind {kind!r}")


def _label(obj: dict) -> str:
    return obj["kind"]


# -- commands ----------------------------------------------------------------

def cmd_eval(cfg: dict, **_) -> list:
    system = parse_system(cfg)
    policy = parse_policy(cfg["policy"])
    return [ResultRow(system.ratio, system.discipline, _label(cfg["policy"]),
                      policy_threshold(policy, system), analytic_paoi(system, policy))]


def cmd_optimize(cfg: dict, **_):
    system = parse_system(cfg)
    kind = cfg["policy"]["kind"]
    if kind in ("mean_threshold", "randomized_threshold"):
        raise ConfigError(f"policy kind {kind!r} has no optimizer")
    res, _policy = run_optimizer(system, kind)
    row = ResultRow(system.ratio, system.discipline, kind, res.threshold, res.paoi)
    return [row], res


def _simulated_row(system, policy, label, packets, seed, batches, threshold=None,
                   analytic=None) -> ResultRow:
    row = ResultRow(system.ratio, system.discipline, label,
                    policy_threshold(policy, system) if threshold is None else threshold)
    if analytic is None:
        try:
            analytic = analytic_paoi(system, policy)
        except (ConfigError, QuadratureError, UnreachableDeliveryError):
            analytic = math.nan
    row.paoi_analytic = analytic
    r = simulate(system, policy, packets, seed, batches)
    row.paoi_sim, row.paoi_stderr = r.avg_paoi, r.paoi_stderr
    row.aoi_sim, row.delivery_ratio = r.avg_aoi, r.delivery_ratio
    return row


def cmd_simulate(cfg: dict, packets=None, seed=None, **_) -> list:
    system = parse_system(cfg)
    packets, seed, batches = sim_settings(cfg, packets, seed)
    kind = cfg["policy"]["kind"]
    if kind in ("optimal", "optimal_fixed", "optimal_transmission_aware"):
        res, policy = run_optimizer(system, kind)
        return [_simulated_row(system, policy, kind, packets, seed, batches,
                               res.threshold, res.paoi)]
    policy = parse_policy(cfg["policy"])
    return [_simulated_row(system, policy, kind, packets, seed, batches)]


def _cell_seed(seed: int, *key) -> int:
    return int(np.random.SeedSequence(int(seed), spawn_key=key).generate_state(1)[0])


def sweep_distributions(cfg: dict, ratio: float, total_mean: float):
    """``(T, C)`` of the configured kinds with ``E[T]/E[C] = ratio`` and
    ``E[T] + E[C] = total_mean``."""
    et = total_mean * ratio / (1.0 + ratio)
    ec = total_mean / (1.0 + ratio)
    t_kind, c_kind = cfg["transmission"]["kind"], cfg["computation"]["kind"]
    T = with_mean(t_kind, et, cfg["transmission"].get("alpha", 2.0))
    C = with_mean(c_kind, ec, cfg["computation"].get("alpha", 2.0))
    return T, C


def _sweep_cell(job):
    cfg_kind, pol, ratio, system, packets, seed, batches = job
    row = ResultRow(ratio, system.discipline, pol["kind"], math.nan)
    try:
        if pol["kind"].startswith("optimal"):
            res, policy = run_optimizer(system, pol["kind"])
            row = _simulated_row(system, policy, pol["kind"], packets, seed, batches,
                                 res.threshold, res.paoi)
        else:
            policy = parse_policy(pol)
            row = _simulated_row(system, policy, pol["kind"], packets, seed, batches)
    except (ConfigError, QuadratureError, ConvergenceError, SimulationError,
            UnreachableDeliveryError) as exc:
        row.error = f"{type(exc).__name__}: {exc}"
        log.warning("sweep cell ratio=%g %s %s failed: %s", ratio, system.discipline,
                    pol["kind"], exc)
    row.ratio = ratio
    return row


def cmd_sweep(cfg: dict, packets=None, seed=None, **_) -> list:
    if "sweep" not in cfg:
        raise ConfigError("sweep command needs a 'sweep' block")
    sw = cfg["sweep"]
    packets, seed, batches = sim_settings(cfg, packets, seed)
    total = sw.get("total_mean", 1.0)
    systems = sw.get("systems", ["non_preemptive", "preemptive"])
    policies = sw.get("policies", DEFAULT_SWEEP_POLICIES)
    jobs = []
    for ri, ratio in enumerate(sw["ratio_grid"]):
        T, C = sweep_distributions(cfg, ratio, total)
        for si, disc in enumerate(systems):
            system = SystemConfig(disc, T, C)
            for pi, pol in enumerate(policies):
                jobs.append((None, pol, float(ratio), system, packets,
                             _cell_seed(seed, ri, si, pi), batches))
    workers = sw.get("workers", 1)
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(workers) as ex:
            rows = list(ex.map(_sweep_cell, jobs))
    else:
        rows = [_sweep_cell(j) for j in jobs]
    sys_order = {s: i for i, s in enumerate(systems)}
    pol_order = {p["kind"]: i for i, p in enumerate(policies)}
    rows.sort(key=lambda r: (r.ratio, sys_order[r.system], pol_order.get(r.policy, 0)))
    return rows


def gnuplot_script(data_path: str) -> str:
    return (
        "set datafile separator ','\n"
        "set key autotitle columnhead\n"
        "set logscale x\n"
        "set xlabel 'E[T]/E[C]'\n"
        "set ylabel 'average peak age'\n"
        f"plot for [s in 'non_preemptive preemptive'] '{data_path}' "
        "using 1:(strcol(2) eq s ? $6 : 1/0) with linespoints title s\n"
    )


def cmd_validate(cfg: dict, packets=None, seed=None, **_) -> dict:
    v = cfg.get("validate", {})
    matrix = v.get("matrix", DEFAULT_VALIDATION_MATRIX)
    k = v.get("se_multiplier", 3.0)
    abs_tol = v.get("abs_tol", 1e-9)
    packets, seed, batches = sim_settings(cfg, packets, seed)
    checks = []

    def add(name, passed, value, expected, tol):
        checks.append({"name": name, "passed": bool(passed), "value": value,
                       "expected": expected, "tolerance": tol})

    for i, case in enumerate(matrix):
        name = case.get("name", f"case {i}")
        try:
            system = parse_system(case)
            policy = parse_policy(case["policy"])
            expected = analytic_paoi(system, policy)
            r = simulate(system, policy, packets, seed, batches)
        except (ConfigError, QuadratureError, SimulationError, UnreachableDeliveryError) as exc:
            add(f"{name}: run", False, str(exc), None, None)
            continue
        tol = k * r.paoi_stderr + abs_tol
        add(f"{name}: peak age", abs(r.avg_paoi - expected) <= tol, r.avg_paoi, expected, tol)
        add(f"{name}: age below peak age", r.avg_aoi <= r.avg_paoi, r.avg_aoi, r.avg_paoi, 0.0)
        if system.discipline == "preemptive":
            g = (wp.FixedThreshold(policy.theta) if isinstance(policy, FixedThresholdPolicy)
                 else wp.TransmissionAware(policy.beta))
            pr = wp.prob_success(g, system.T, system.C)
            dtol = k * r.delivery_stderr + abs_tol
            add(f"{name}: delivery ratio", abs(r.delivery_ratio - pr) <= dtol,
                r.delivery_ratio, pr, dtol)
        else:
            add(f"{name}: delivery ratio", r.delivery_ratio == 1.0, r.delivery_ratio, 1.0, 0.0)
    warnings = [] if checks else ["empty validation matrix: no checks were run"]
    return {"passed": all(c["passed"] for c in checks), "n_checks": len(checks),
            "n_failed": sum(not c["passed"] for c in checks), "warnings": warnings,
            "checks": checks}


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mecpaoi", description="Peak age of information "
                                "analysis, optimization and simulation for edge computing.")
    p.add_argument("command", choices=["eval", "optimize", "simulate", "sweep", "validate"])
    p.add_argument("--config", required=True, metavar="PATH")
    p.add_argument("--output", metavar="PATH", help="default: stdout")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--packets", type=int, metavar="N")
    p.add_argument("--seed", type=int, metavar="N")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _emit(text: str, output: Optional[str]):
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _trace_json(res) -> str:
    tr = res.trace
    steps = [asdict(s) for s in tr.iterations] if tr else []
    return json.dumps(_json_safe({"method": res.method, "converged": res.converged,
                                  "threshold": res.threshold, "paoi": res.paoi,
                                  "iterations": steps}), indent=2) + "\n"


def _write_trace(res, output):
    text = _trace_json(res)
    if output:
        with open(output + ".trace.json", "w") as fh:
            fh.write(text)
    else:
        sys.stderr.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.packets is not None and args.packets < 2:
        print("error: --packets must be at least 2", file=sys.stderr)
        return EXIT_SCHEMA
    kw = {"packets": args.packets, "seed": args.seed}
    try:
        cfg = load_config(args.config)
        if args.command == "validate":
            report = cmd_validate(cfg, **kw)
            _emit(json.dumps(_json_safe(report), indent=2) + "\n", args.output)
            for w in report["warnings"]:
                log.warning(w)
            return EXIT_OK if report["passed"] else EXIT_FAIL
        if args.command == "optimize":
            rows, res = cmd_optimize(cfg, **kw)
            _write_trace(res, args.output)
        else:
            rows = {"eval": cmd_eval, "simulate": cmd_simulate, "sweep": cmd_sweep}[
                args.command](cfg, **kw)
        text = rows_to_csv(rows) if args.format == "csv" else rows_to_json(rows)
        _emit(text, args.output)
        if args.command == "sweep" and args.output and cfg["sweep"].get("gnuplot"):
            with open(args.output + ".gp", "w") as fh:
                fh.write(gnuplot_script(args.output))
        return EXIT_OK
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except QuadratureError as exc:
        print(f"quadrature failure: {exc}", file=sys.stderr)
        return EXIT_QUADRATURE
    except ConvergenceError as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        if exc.result is not None:
            _write_trace(exc.result, args.output)
        return EXIT_CONVERGENCE
    except (SimulationError, UnreachableDeliveryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
