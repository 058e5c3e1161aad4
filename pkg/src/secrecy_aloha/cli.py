"""``secrecy-aloha`` command line.

Exit codes: 0 success, 2 configuration error, 3 domain error,
4 unsupported number of users, 5 infeasible region.
"""

from __future__ import annotations

import argparse
import csv
import json
import re
import sys
import warnings
from pathlib import Path

import numpy as np

from . import channel, optimizer, regions, simulator
from .config import ConfigError, RunConfig, load_config
from .errors import (
    DegenerateCapacity,
    EmptyFeasibleSet,
    InfeasibleRegion,
    NoRealRoot,
    ZeroConditioningHits,
)

SCHEMA_VERSION = 1

EXIT_OK, EXIT_CONFIG, EXIT_DOMAIN, EXIT_DIMENSION, EXIT_INFEASIBLE = 0, 2, 3, 4, 5


class DimensionError(Exception):
    pass


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def _write_json(cfg: RunConfig, name: str, command: str, payload: dict) -> Path:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    doc = {"schema_version": SCHEMA_VERSION, "command": command, **payload}
    path = cfg.output_dir / name
    path.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
    return path


def _write_csv(cfg: RunConfig, name: str, header, rows) -> Path:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.output_dir / name
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def _wants(cfg: RunConfig, fmt: str) -> bool:
    return cfg.output_format in (fmt, "both")


def _require(cfg: RunConfig, section: str):
    if getattr(cfg, section) is None:
        raise ConfigError(f"missing [{section}] section required by this command")
    return getattr(cfg, section)


def system_params(cfg: RunConfig, rho_report: dict | None = None) -> regions.SystemParams:
    """Build SystemParams, estimating rho from the channel section when asked to."""
    sys_ = _require(cfg, "system")
    rho = sys_.rho
    if rho is None:
        ch = cfg.channel
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            est = channel.compute_rho(ch.params, ch.n_samples, ch.seed, ch.positive_part)
        rho = est.values
        if rho_report is not None:
            rho_report.update(values=rho, clamped=est.clamped,
                              warnings=[str(w.message) for w in caught])
    try:
        return regions.SystemParams(sys_.arrival, sys_.tx_prob, sys_.fail_prob, rho)
    except ValueError as exc:
        raise ConfigError(f"[system] {exc}", cfg.line_of("system")) from None


def cmd_capacity(cfg: RunConfig, args) -> list:
    ch = _require(cfg, "channel")
    p, n, seed = ch.params, ch.n_samples, ch.seed
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rho = channel.compute_rho(p, n, seed, ch.positive_part)
    records = []
    for i in range(p.n_users):
        records.append({
            "user": i,
            "ergodic": rho.ergodic[i].to_record(i),
            "secrecy": rho.secrecy[i].to_record(i),
            "rho": float(rho.values[i]),
            "rho_clamped": bool(rho.clamped[i]),
        })
    written = []
    if _wants(cfg, "json"):
        written.append(_write_json(cfg, "capacity.json", "capacity", {
            "users": records,
            "warnings": [str(w.message) for w in caught],
        }))
    if _wants(cfg, "csv"):
        rows = [[r["user"], r["ergodic"]["value"], r["ergodic"]["std_error"], r["secrecy"]["value"],
                 r["secrecy"]["std_error"], r["secrecy"]["n_conditioning_hits"], r["rho"], int(r["rho_clamped"])]
                for r in records]
        written.append(_write_csv(cfg, "capacity.csv", [
            "user", "ergodic", "ergodic_se", "secrecy", "secrecy_se", "conditioning_hits", "rho", "clamped",
        ], rows))
    return written


def _thresholds(params: regions.SystemParams):
    try:
        t = regions.original_secrecy_thresholds_n2(params.arrival_norm, params.rho)
    except (NoRealRoot, ValueError) as exc:
        return None, str(exc)
    return t, None


def cmd_region(cfg: RunConfig, args) -> list:
    rho_info: dict = {}
    params = system_params(cfg, rho_info)
    kinds = list(regions.BOUNDARY_KINDS) if args.kind == "all" else ([] if args.kind == "none" else [args.kind])
    if kinds and params.n_users != 2:
        raise DimensionError(f"boundary tracing needs N=2, config has N={params.n_users}")

    report = regions.region_report(params)
    fixed = regions.solve_empty_probs_batch(params.arrival, params.tx_prob, params.fail_prob)
    p_e = fixed[0]
    payload = {
        "dominant": report.to_dict(),
        "arrival_norm": params.arrival_norm,
        "rho": params.rho,
        "tx_prob": params.tx_prob,
        "original": {
            "p_e": p_e,
            "p_e_converged": bool(fixed[1]),
            "secrecy": regions.original_secrecy_ok(params, p_e).to_dict(),
            "stability": regions.original_stability_ok(params, p_e).to_dict(),
        },
    }
    if rho_info:
        payload["rho_from_channel"] = rho_info
    if params.n_users == 2:
        t, why = _thresholds(params)
        payload["thresholds"] = t.to_dict() if t else None
        if why:
            payload["thresholds_error"] = why
    else:
        t = None

    polylines = []
    for kind in kinds:
        polylines.extend(regions.trace_boundaries_n2(params, kind, args.grid))
    payload["polylines"] = [pl.to_dict() for pl in polylines]
    if t is not None and "secrecy-original" in kinds:
        payload["threshold_points"] = [
            {"label": "q1_star,q2_2star", "q": [t.q1_star, t.q2_2star]},
            {"label": "q1_2star,q2_star", "q": [t.q1_2star, t.q2_star]},
        ]

    written = []
    if _wants(cfg, "json"):
        written.append(_write_json(cfg, "region.json", "region", payload))
    if _wants(cfg, "csv") and kinds:
        rows = [[pl.kind, pl.user, q1, q2] for pl in polylines for q1, q2 in pl.points]
        for pt in payload.get("threshold_points", []):
            rows.append(["threshold:" + pt["label"], -1, *pt["q"]])
        written.append(_write_csv(cfg, "region_boundaries.csv", ["kind", "user", "q1", "q2"], rows))
    return written


def cmd_optimize(cfg: RunConfig, args) -> list:
    if args.oracle_resolution < 2:
        raise ConfigError(f"--oracle-resolution must be >= 2, got {args.oracle_resolution}")
    params = system_params(cfg)
    if params.n_users != 2:
        raise DimensionError(f"optimization needs N=2, config has N={params.n_users}")
    closed = optimizer.optimize_dominant_n2(params, args.oracle_resolution)
    oracle = optimizer.grid_search_oracle(params, args.oracle_resolution)
    discrepancy = abs(closed.throughput - oracle.throughput)
    payload = {
        "closed_form": closed.to_dict(),
        "oracle": oracle.to_dict(),
        "oracle_resolution": args.oracle_resolution,
        "discrepancy": discrepancy,
        "within_grid_bound": discrepancy <= 2.0 / args.oracle_resolution,
    }
    written = []
    if _wants(cfg, "json"):
        written.append(_write_json(cfg, "optimize.json", "optimize", payload))
    if _wants(cfg, "csv"):
        rows = [[r.method, *r.q_opt, r.throughput, r.case_label.value] for r in (closed, oracle)]
        written.append(_write_csv(cfg, "optimize.csv", ["method", "q1", "q2", "throughput", "case"], rows))
    return written


def _sim_config(cfg: RunConfig, params) -> simulator.SimConfig:
    s = _require(cfg, "sim")
    return simulator.SimConfig(
        params=params, n_slots=s.n_slots, seed=s.seed, warmup_slots=s.warmup_slots,
        dominant_mode=s.dominant_mode, replications=s.replications, drift_threshold=s.drift_threshold,
    )


def cmd_simulate(cfg: RunConfig, args) -> list:
    params = system_params(cfg)
    sc = _sim_config(cfg, params)
    metrics = simulator.run_simulation(sc)
    written = []
    if _wants(cfg, "json"):
        written.append(_write_json(cfg, "simulate.json", "simulate", {
            "metrics": metrics.to_dict(),
            "analytic": {
                "dominant_success_prob": regions.dominant_success_prob(params),
                "original_throughput": optimizer.original_throughput(params.arrival),
            },
        }))
    if _wants(cfg, "csv"):
        rows = [[i, metrics.throughput_per_user[i], metrics.empty_prob_per_user[i],
                 metrics.clean_tx_fraction_per_user[i], metrics.mean_queue[i],
                 metrics.queue_drift[i], int(metrics.stable_verdict[i])] for i in range(params.n_users)]
        written.append(_write_csv(cfg, "simulate.csv", [
            "user", "throughput", "empty_prob", "clean_tx_fraction", "mean_queue", "drift", "stable",
        ], rows))
    if cfg.sim.trace:
        written.append(simulator.write_trace_csv(cfg.output_dir / "trace.csv", sc))
    return written


_PARAM_RE = re.compile(r"^(q|lambda|pf|rho)(\d+)$")
_PARAM_FIELDS = {"q": "tx_prob", "lambda": "arrival", "pf": "fail_prob", "rho": "rho"}


def _parse_param(name: str, n: int):
    m = _PARAM_RE.match(name)
    if not m or not 1 <= int(m.group(2)) <= n:
        raise ConfigError(f"--param must be one of q1..q{n}, lambda1.., pf1.., rho1.., got {name!r}")
    return _PARAM_FIELDS[m.group(1)], int(m.group(2)) - 1


def cmd_sweep(cfg: RunConfig, args) -> list:
    base = system_params(cfg)
    _require(cfg, "sim")
    if args.steps < 1:
        raise ConfigError(f"--steps must be >= 1, got {args.steps}")
    field_name, idx = _parse_param(args.param, base.n_users)
    n = base.n_users
    points = []
    for value in np.linspace(args.start, args.stop, args.steps):
        vecs = {f: getattr(base, f).copy() for f in _PARAM_FIELDS.values()}
        vecs[field_name][idx] = value
        try:
            params = regions.SystemParams(vecs["arrival"], vecs["tx_prob"], vecs["fail_prob"], vecs["rho"])
        except ValueError as exc:
            raise ConfigError(f"sweep value {args.param}={value}: {exc}") from None
        m = simulator.run_simulation(_sim_config(cfg, params))
        points.append({
            "value": float(value),
            "throughput": m.total_throughput,
            "throughput_per_user": m.throughput_per_user,
            "empty_prob_per_user": m.empty_prob_per_user,
            "stable_verdict": m.stable_verdict,
            "analytic_dominant_throughput": optimizer.throughput_dominant(params),
        })
    written = []
    if _wants(cfg, "json"):
        written.append(_write_json(cfg, "sweep.json", "sweep", {"param": args.param, "points": points}))
    if _wants(cfg, "csv"):
        header = ["value", "throughput", *[f"p_e{i + 1}" for i in range(n)],
                  *[f"stable{i + 1}" for i in range(n)], "analytic_dominant_throughput"]
        rows = [[p["value"], p["throughput"], *p["empty_prob_per_user"],
                 *[int(s) for s in p["stable_verdict"]], p["analytic_dominant_throughput"]] for p in points]
        written.append(_write_csv(cfg, "sweep.csv", header, rows))
    return written


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="secrecy-aloha", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capacity", help="Monte Carlo ergodic/secrecy capacities and secrecy ratios")
    p.add_argument("config")
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("region", help="region verdicts, case label and boundary polylines")
    p.add_argument("config")
    p.add_argument("--kind", default="all", choices=["all", "none", *regions.BOUNDARY_KINDS])
    p.add_argument("--grid", type=int, default=201, help="grid points per axis")
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("optimize", help="closed-form optimum checked against the grid oracle")
    p.add_argument("config")
    p.add_argument("--oracle-resolution", type=int, default=optimizer.DEFAULT_RESOLUTION)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("simulate", help="run the slotted ALOHA queue simulator")
    p.add_argument("config")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="simulate over a range of one parameter")
    p.add_argument("config")
    p.add_argument("--param", required=True, help="q<i>, lambda<i>, pf<i> or rho<i> (1-based)")
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--steps", type=int, default=11)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        written = args.func(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DegenerateCapacity, ZeroConditioningHits, NoRealRoot) as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except DimensionError as exc:
        print(f"unsupported: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except (InfeasibleRegion, EmptyFeasibleSet) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
