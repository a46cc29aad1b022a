"""Command line entry points: condition checks, forward simulation,
Picard solves, almost-periodicity scans and the spectral demo.

Artifacts are plain CSV / JSON / JSONL, written deterministically:
identical config and seed give byte-identical CSV and JSON files across
runs and thread counts (the gap-trace JSONL additionally carries wall
times, the one intentionally non-reproducible field).  Exit codes:
0 = success / verdict true, 1 = verdict false or not converged,
2 = invalid input.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .apdist import EmpiricalLawError, ap_distribution_scan, law_trajectory
from .coefficients import CoefficientError, SignalParseError, UnboundedSignalError
from .config import (
    ConfigError,
    RunConfig,
    build_coefficients,
    build_spec,
    build_system,
    condition_inputs,
    config_to_dict,
    load_config,
    preset_config,
    preset_names,
    validate_config,
)
from .dichotomy import DichotomyError, MatrixExpOverflowError, estimate_constants
from .noise import NoiseShiftError, NoiseSpecError
from .solver import (
    NoiseSample,
    PathEnsemble,
    SolverError,
    check_conditions,
    picard_solve,
    simulate_mild,
    sup_second_moment,
)

__all__ = ["main"]

SCHEMA_VERSION = 1
_CSV_ROW_TARGET = 500_000

_USER_ERRORS = (
    ConfigError,
    NoiseSpecError,
    NoiseShiftError,
    DichotomyError,
    MatrixExpOverflowError,
    CoefficientError,
    SignalParseError,
    UnboundedSignalError,
    SolverError,
    EmpiricalLawError,
)


# ---------------------------------------------------------------------------
# deterministic writers
# ---------------------------------------------------------------------------


def _json_scalar(x):
    if isinstance(x, float):
        if math.isinf(x) or math.isnan(x):
            return None
        return x
    return x


def _dump_json(obj) -> str:
    import json

    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write_json(path: Path, obj) -> None:
    path.write_text(_dump_json(obj), encoding="utf-8")


def _write_jsonl(path: Path, records) -> None:
    import json

    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, allow_nan=False))
            fh.write("\n")


def _csv_stride(n_steps: int, n_paths: int, configured: Optional[int]) -> int:
    if configured is not None:
        return configured
    rows = (n_steps + 1) * n_paths
    return max(1, int(math.ceil(rows / _CSV_ROW_TARGET)))


def _write_ensemble_csv(path: Path, ens: PathEnsemble, stride: int) -> None:
    """Rows (t, path, y0..y{d-1}) in time-major order, every ``stride``-th
    grid point; floats via repr for exact reproducibility."""
    grid = ens.grid
    d = ens.dim
    header = "t,path," + ",".join(f"y{i}" for i in range(d))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for k in range(0, ens.n_steps + 1, stride):
            t_repr = repr(float(grid[k]))
            for p in range(ens.n_paths):
                row = ",".join(repr(float(v)) for v in ens.values[p, k])
                fh.write(f"{t_repr},{p},{row}\n")


def _strip_wall(records):
    return [{k: v for k, v in rec.items() if k != "wall_ms"} for rec in records]


# ---------------------------------------------------------------------------
# shared pipeline pieces
# ---------------------------------------------------------------------------


def _chunk_paths(cfg: RunConfig) -> Optional[int]:
    if cfg.threads <= 1:
        return None
    return max(1, int(math.ceil(cfg.numerics.n_paths / cfg.threads)))


def _sample(cfg: RunConfig, spec) -> NoiseSample:
    num = cfg.numerics
    return NoiseSample.sample(
        spec,
        (float(num.window[0]), float(num.window[1])),
        float(num.h),
        num.n_paths,
        cfg.seed,
    )


def _condition_report(cfg: RunConfig):
    k, omega, lip, b = condition_inputs(cfg)
    return check_conditions(k, omega, lip, b)


def _report_lines(rep) -> list[str]:
    d = rep.as_dict()
    return [
        f"K = {d['k']}, omega = {d['omega']}, L = {d['lipschitz']}, b = {d['jump_bound']}",
        f"lhs (1+2b)/omega^2 + 2/omega          = {d['lhs']}",
        f"threshold existence    1/(16 K^2 L)   = {d['threshold_existence']}",
        f"threshold distribution 1/(32 K^2 L)   = {d['threshold_distribution']}",
        f"eta = {d['eta']} (= {d['eta_float']:.6g}); contraction: "
        + ("yes" if rep.eta_below_one else "no"),
        "existence verdict:    " + ("PASS" if rep.verdict_existence else "FAIL"),
        "distribution verdict: " + ("PASS" if rep.verdict_distribution else "FAIL"),
    ]


def _condition_json(rep) -> dict:
    return {"schema_version": SCHEMA_VERSION, **rep.as_dict()}


def _run_picard(cfg: RunConfig, out: Path):
    """Condition check + solve; writes the shared picard artifacts and
    returns (report, result, exit_code)."""
    rep = _condition_report(cfg)
    _write_json(out / "condition_report.json", _condition_json(rep))
    for line in _report_lines(rep):
        print(line)
    if not rep.verdict_existence:
        print(
            "warning: existence conditions fail; iterating anyway "
            "(results may not certify a bounded solution)",
            file=sys.stderr,
        )

    sysd = build_system(cfg.system)
    spec = build_spec(cfg.levy)
    cs = build_coefficients(cfg.coefficients)
    noise = _sample(cfg, spec)
    num = cfg.numerics
    res = picard_solve(
        sysd,
        cs,
        noise,
        tol=float(num.tol),
        max_iter=num.max_iter,
        truncation=float(num.truncation) if num.truncation is not None else None,
        chunk_paths=_chunk_paths(cfg),
    )
    _write_jsonl(out / "gap_trace.jsonl", res.gap_trace)
    ens = res.ensemble
    stride = _csv_stride(ens.n_steps, ens.n_paths, num.csv_stride)
    _write_ensemble_csv(out / "ensemble.csv", ens, stride)
    meta = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "config": config_to_dict(cfg),
        "converged": res.converged,
        "iterations": res.iterations,
        "final_gap": _json_scalar(res.gap_trace[-1]["gap"]),
        "sup_second_moment": _json_scalar(sup_second_moment(ens)),
        "tail_report": {k: _json_scalar(v) for k, v in res.tail_report.items()},
        "csv_stride": stride,
        "gap_trace": _strip_wall(res.gap_trace),
    }
    _write_json(out / "run_meta.json", meta)
    print(
        f"picard: {'converged' if res.converged else 'NOT converged'} "
        f"after {res.iterations} iterations, final gap "
        f"{res.gap_trace[-1]['gap']:.3e}, sup second moment "
        f"{sup_second_moment(ens):.6g}"
    )
    print(f"artifacts written to {out}")
    code = 0 if (res.converged and rep.verdict_existence) else 1
    return rep, res, code


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_check(cfg: RunConfig, out: Path) -> int:
    rep = _condition_report(cfg)
    for line in _report_lines(rep):
        print(line)
    _write_json(out / "condition_report.json", _condition_json(rep))
    return 0 if rep.verdict_existence else 1


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    sysd = build_system(cfg.system)
    spec = build_spec(cfg.levy)
    cs = build_coefficients(cfg.coefficients)
    noise = _sample(cfg, spec)
    ens = simulate_mild(sysd, cs, noise, np.zeros(sysd.dim))
    stride = _csv_stride(ens.n_steps, ens.n_paths, cfg.numerics.csv_stride)
    _write_ensemble_csv(out / "ensemble.csv", ens, stride)
    _write_json(
        out / "run_meta.json",
        {
            "schema_version": SCHEMA_VERSION,
            "package_version": __version__,
            "config": config_to_dict(cfg),
            "sup_second_moment": _json_scalar(sup_second_moment(ens)),
            "csv_stride": stride,
        },
    )
    print(
        f"simulated {ens.n_paths} paths on [{ens.t_lo}, {ens.t_hi}], "
        f"sup second moment {sup_second_moment(ens):.6g}"
    )
    print(f"artifacts written to {out}")
    return 0


def cmd_picard(cfg: RunConfig, out: Path) -> int:
    _, _, code = _run_picard(cfg, out)
    return code


def cmd_apscan(cfg: RunConfig, out: Path) -> int:
    if not cfg.analysis.times or not cfg.analysis.shifts:
        raise ConfigError("apscan needs analysis.times and analysis.shifts")
    rep, res, code = _run_picard(cfg, out)
    ana = cfg.analysis
    base = [float(t) for t in ana.times]
    shifts = [float(s) for s in ana.shifts]
    # laws are needed at every base time and every shifted time
    grid = res.ensemble.grid
    h = float(grid[1] - grid[0])
    lo = float(grid[0])
    idx = {int(round((t - lo) / h)) for t in base}
    idx |= {int(round((t + s - lo) / h)) for t in base for s in shifts}
    eval_times = [float(grid[i]) for i in sorted(idx)]
    traj = law_trajectory(
        res.ensemble,
        eval_times,
        n_support=ana.law_support,
        seed=cfg.seed,
    )
    scan = ap_distribution_scan(traj, shifts, float(ana.epsilon))
    report = {
        "schema_version": SCHEMA_VERSION,
        "epsilon": _json_scalar(scan.eps),
        "shifts": [
            {
                "s": _json_scalar(float(s)),
                "sup_beta": _json_scalar(float(sb)),
                "accepted": bool(sb <= scan.eps),
            }
            for s, sb in zip(scan.shifts, scan.sup_beta)
        ],
        "accepted_count": int(np.sum(scan.sup_beta <= scan.eps)),
        "max_gap": _json_scalar(scan.max_gap),
    }
    _write_json(out / "apscan_report.json", report)
    for entry in report["shifts"]:
        mark = "ACCEPT" if entry["accepted"] else "reject"
        print(f"shift {entry['s']:>12.6g}  sup beta {entry['sup_beta']:.6g}  {mark}")
    gap = "inf" if report["max_gap"] is None else f"{report['max_gap']:.6g}"
    print(f"accepted {report['accepted_count']}/{len(report['shifts'])}, max gap {gap}")
    return code


def cmd_galerkin(cfg: RunConfig, out: Path) -> int:
    sysd = build_system(cfg.system)
    est = estimate_constants(sysd, np.linspace(0.0, 4.0 / sysd.omega, 33))
    print(
        f"spectral demo: dim {sysd.dim}, stable rank {sysd.rank_stable}, "
        f"unstable rank {sysd.rank_unstable}, fitted K = {est.k_hat:.6g}, "
        f"omega = {est.omega_hat:.6g}"
    )
    _, _, code = _run_picard(cfg, out)
    _write_json(
        out / "dichotomy_estimate.json",
        {"schema_version": SCHEMA_VERSION, **est.as_dict()},
    )
    return code


_COMMANDS = {
    "check": cmd_check,
    "simulate": cmd_simulate,
    "picard": cmd_picard,
    "apscan": cmd_apscan,
    "galerkin": cmd_galerkin,
}


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------


def _num_arg(text: str):
    return Fraction(text) if "/" in text else float(text)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="levyap",
        description=(
            "Simulate and certify bounded mild solutions of semilinear "
            "SDEs with dichotomous linear part and two-sided Levy noise."
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("check", "evaluate the contraction conditions exactly"),
        ("simulate", "forward-integrate one ensemble from zero"),
        ("picard", "iterate the bounded-solution operator to its fixed point"),
        ("apscan", "picard + almost-periodicity-in-distribution scan"),
        ("galerkin", "spectral-truncation demo on the same pipeline"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, help="JSON run configuration")
        p.add_argument(
            "--preset",
            choices=preset_names(),
            help="named built-in configuration",
        )
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--paths", type=int, help="override the path count")
        p.add_argument("--out", type=Path, default=Path("levyap_out"),
                       help="artifact directory (default: levyap_out)")
        p.add_argument("--dt", type=_num_arg, help="override the step h")
        p.add_argument("--truncation", type=_num_arg,
                       help="override the window truncation horizon")
        p.add_argument("--tol", type=float, help="override the Picard tolerance")
        p.add_argument("--max-iter", type=int, help="override the iteration cap")
        p.add_argument("--threads", type=int,
                       help="work partitioning hint; results are identical "
                            "for any value")
    return parser


def _resolve_config(args) -> RunConfig:
    if args.config is not None and args.preset is not None:
        raise ConfigError("give either --config or --preset, not both")
    if args.config is not None:
        cfg = load_config(args.config)
    elif args.preset is not None:
        cfg = preset_config(args.preset)
    elif args.command == "galerkin":
        cfg = preset_config("galerkin_heat")
    else:
        raise ConfigError("a configuration is required: --config PATH or --preset NAME")

    num = cfg.numerics
    num_updates = {}
    if args.paths is not None:
        num_updates["n_paths"] = args.paths
    if args.dt is not None:
        num_updates["h"] = args.dt
    if args.truncation is not None:
        num_updates["truncation"] = args.truncation
    if args.tol is not None:
        num_updates["tol"] = args.tol
    if args.max_iter is not None:
        num_updates["max_iter"] = args.max_iter
    if num_updates:
        cfg = dataclasses.replace(cfg, numerics=dataclasses.replace(num, **num_updates))
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.threads is not None:
        cfg = dataclasses.replace(cfg, threads=args.threads)
    return cfg


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve_config(args)
        validate_config(cfg)
        out: Path = args.out
        out.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](cfg, out)
    except _USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
