"""Batch command line: pressure, dimension, sample, verify.

Each command loads one JSON config (defaults deep-merged underneath), runs
its pipeline, and writes a self-describing record JSON plus plot-ready CSV
files.  Exit codes: 0 success, 1 numeric failure, 2 config error.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime
import json
import math
import os
import sys

import numpy as np

from .config import (build_potential, build_system, config_hash, load_config,
                     resolve_s_grid)
from .dimension import (branch_value, global_dimension, moran_root,
                        summability_scan, variational_sweep)
from .empirics import box_dimension, exactness_report, local_dimension, \
    sample_measure
from .errors import ConfigError, FiberdimError, InsufficientScales, InvalidWord
from .systems import verify_system
from .thermo import gibbs_markov, measure_stats, pressure_cylinder_sum, \
    pressure_derivative_check
from .words import induced_ifs_maps, pair_alphabet

ENV_THREADS = "FIBERDIM_THREADS"


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _write_json(path: str, payload: dict):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True,
                  default=_json_default)
        fh.write("\n")


def _write_csv(path: str, header: str, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_cell(x) for x in row) + "\n")


def _cell(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


# ---------------------------------------------------------------------------
# commands (each returns (results, warnings, files))

def cmd_pressure(config: dict, out_dir: str):
    system = build_system(config)
    tr = config["truncation"]
    rows, per_m = [], []
    for M in tr["m_schedule"]:
        potential = build_potential(config, system, M)
        est = pressure_cylinder_sum(potential, M, tr["depth"], tr["memory"])
        g = gibbs_markov(potential, M, tr["memory"])
        for n, p_n in enumerate(est.depth_values, start=1):
            rows.append((M, n, p_n, est.extrapolated))
        per_m.append({
            "max_digit": M,
            "depth_values": list(est.depth_values),
            "extrapolated": est.extrapolated,
            "error_est": est.error_est,
            "potential_error": est.potential_error,
            "transfer_log_pressure": g.log_pressure,
            "cross_method_diff": abs(g.log_pressure - est.extrapolated),
        })
    csv_path = os.path.join(out_dir, "pressure.csv")
    _write_csv(csv_path, "M,n,P_n,extrapolated", rows)
    return {"pressure": per_m}, [], [csv_path]


def cmd_dimension(config: dict, out_dir: str):
    system = build_system(config)
    tr = config["truncation"]
    M = tr["m_schedule"][-1]
    s_grid = resolve_s_grid(config)
    warnings = []
    scan = summability_scan(system, s_grid)
    for s, verdict in zip(scan.s_grid, scan.verdicts):
        if verdict != "summable":
            warnings.append(
                f"infinite-alphabet depth-1 sum at s={s:g}: {verdict}")
    sweep = variational_sweep(system, M, s_grid, tr["memory"],
                              config["dimension"]["bowen_tol"])
    for s, _, flag in sweep.curve:
        if flag != "ok":
            warnings.append(f"sweep point s={s:g} {flag}")
    potential = build_potential(config, system, M)
    g = gibbs_markov(potential, M, tr["memory"])
    st_cfg = config["stats"]
    stats = measure_stats(g, system, depth=st_cfg["depth"],
                          n_samples=st_cfg["n_samples"],
                          orbit_len=st_cfg["orbit_len"],
                          past_depth=st_cfg["past_depth"],
                          rng_seed=config["seed"])
    value, branch = global_dimension(stats)
    results = {
        "bowen_root": sweep.delta_T,
        "sup_curve": sweep.sup_value,
        "argmax": sweep.argmax,
        "gap": sweep.gap,
        "max_second_difference": sweep.max_second_difference,
        "min_chi": sweep.min_chi,
        "summability": {
            "verdicts": list(scan.verdicts),
            "tail_slopes": [x if math.isfinite(x) else None
                            for x in scan.tail_slopes],
            "boundary_estimate": (scan.boundary_estimate
                                  if math.isfinite(scan.boundary_estimate)
                                  else None),
        },
        "stats": dataclasses.asdict(stats),
        "global_dimension": value,
        "branch": branch,
        "branch_values": {"b": branch_value(stats, "b"),
                          "c": branch_value(stats, "c")},
        "branch_agreement": abs(branch_value(stats, "b")
                                - branch_value(stats, "c")),
    }
    if system.variant == "similarity":
        sched = system.schedule
        moduli = [sched.ratio_of(e) * sched.inner_factor
                  for e in pair_alphabet(M)]
        oracle = moran_root(moduli)
        results["moran_root"] = oracle
        results["moran_diff"] = abs(oracle - sweep.delta_T)
    csv_path = os.path.join(out_dir, "dimension_curve.csv")
    _write_csv(csv_path, "s,delta,flag",
               [(s, d, flag) for s, d, flag in sweep.curve])
    return results, warnings, [csv_path]


def cmd_sample(config: dict, out_dir: str):
    system = build_system(config)
    tr = config["truncation"]
    M = tr["m_schedule"][-1]
    sm = config["sample"]
    potential = build_potential(config, system, M)
    g = gibbs_markov(potential, M, tr["memory"])
    cloud = sample_measure(g, system, sm["target"], sm["n_points"],
                           sm["depth"], config["seed"], sm["chart"])
    csv_path = os.path.join(out_dir, f"cloud_{sm['target']}.csv")
    cloud.to_csv(csv_path)
    warnings = []
    results = {
        "target": sm["target"],
        "n_points": cloud.n_points,
        "dim": cloud.dim,
        "chart": cloud.chart,
        "coding_error": cloud.coding_error,
        "diameter": cloud.diameter(),
    }
    box = box_dimension(cloud, sm["box_scales"])
    results["box_dimension"] = {"value": box.value,
                                "scales": list(box.scales),
                                "counts": list(box.counts)}
    window = tuple(sm["window"]) if sm["window"] is not None else None
    threads = config["threads"] or -1
    try:
        loc = local_dimension(cloud, window, sm["n_centers"],
                              config["seed"], workers=threads)
        results["local_dimension"] = {
            "mean": loc.mean, "stddev": loc.stddev,
            "window": list(loc.window), "n_centers": loc.n_centers,
        }
        if sm["predicted"] is not None:
            rep = exactness_report(loc, sm["predicted"])
            results["exactness"] = {"predicted": sm["predicted"],
                                    "bias": rep.bias,
                                    "dispersion": rep.dispersion,
                                    "flags": list(rep.flags)}
    except InsufficientScales as exc:
        warnings.append(f"local dimension skipped: {exc}")
        results["local_dimension"] = None
    return results, warnings, [csv_path]


def cmd_verify(config: dict, out_dir: str):
    system = build_system(config)
    tr = config["truncation"]
    M = tr["m_schedule"][-1]
    vf = config["verify"]
    report = verify_system(system, M, samples=vf["samples"],
                           seed=config["seed"])
    maps = induced_ifs_maps(M, vf["induced_k_max"], vf["subdivisions"])
    warnings = []
    if not report.osc_ok:
        warnings.append("depth-1 images overlap (open set condition fails)")
    if maps and not all(m.contraction_ok for m in maps):
        warnings.append("an induced composite is not certified contracting")
    fd, integral = pressure_derivative_check(
        system, vf["s"], vf["h_step"], max_digit=M, memory=tr["memory"])
    integral_value = float(integral)
    diff = abs(fd - integral_value)
    se = getattr(integral, "se", 0.0)
    if diff > max(1e-3, 2.0 * se):
        warnings.append(f"derivative check residual {diff:g} is large")
    results = {
        "system_report": dataclasses.asdict(report),
        "induced_maps": {
            "count": len(maps),
            "all_contracting": bool(all(m.contraction_ok for m in maps)),
            "max_derivative_sup": max((m.derivative_sup for m in maps),
                                      default=0.0),
        },
        "derivative_check": {
            "s": vf["s"], "h_step": vf["h_step"],
            "finite_difference": fd, "integral": integral_value,
            "integral_se": se, "diff": diff,
        },
    }
    return results, warnings, []


COMMANDS = {
    "pressure": cmd_pressure,
    "dimension": cmd_dimension,
    "sample": cmd_sample,
    "verify": cmd_verify,
}


# ---------------------------------------------------------------------------
# entry point

def _resolve_threads(flag_value, config_value):
    """Precedence: --threads flag, then environment, then config."""
    if flag_value is not None:
        return int(flag_value)
    env = os.environ.get(ENV_THREADS)
    if env is not None:
        try:
            value = int(env)
        except ValueError:
            raise ConfigError(f"{ENV_THREADS}={env!r} is not an integer")
        if value < 1:
            raise ConfigError(f"{ENV_THREADS} must be >= 1")
        return value
    return config_value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fiberdim",
        description="Thermodynamic pressure, dimension, and sampling "
                    "experiments for skew product contraction families.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON config file path")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, help="override config seed")
    parser.add_argument("--threads", type=int,
                        help="worker threads (overrides environment)")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        user = {}
        if args.config:
            with open(args.config, "r", encoding="utf-8") as fh:
                user = json.load(fh)
            if not isinstance(user, dict):
                raise ConfigError("config document must be a JSON object")
        if args.seed is not None:
            user["seed"] = args.seed
        config = load_config(user)
        config["threads"] = _resolve_threads(args.threads, config["threads"])
        os.makedirs(args.out, exist_ok=True)
    except (OSError, json.JSONDecodeError, ConfigError, InvalidWord) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    started = _now()
    try:
        results, warnings, files = COMMANDS[args.command](config, args.out)
    except (ConfigError, InvalidWord) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FiberdimError as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 1
    record = {
        "command": args.command,
        "config_hash": config_hash(config),
        "config": config,
        "started": started,
        "finished": _now(),
        "results": results,
        "warnings": warnings,
        "files": [os.path.basename(f) for f in files],
    }
    record_path = os.path.join(args.out, f"{args.command}_record.json")
    _write_json(record_path, record)
    print(record_path)
    return 0


def main() -> int:
    return run(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
