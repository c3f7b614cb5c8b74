"""``replica-portfolio`` command line: predict, simulate and check.

Exit codes: 0 success, 1 a check failed, 2 invalid configuration,
3 numerical failure (including every simulated trial failing).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
import time
from pathlib import Path
from typing import Any, Iterable, Sequence

from . import __version__, replica
from .checks import CheckResult, run_checks
from .config import (
    config_moments,
    eps_grid,
    experiment_config,
    load_config,
    r_grid,
    resolve_alpha,
    resolve_n_periods,
    set_dotted,
)
from .errors import DivergenceError, DomainError, ParameterError, ReplicaPortfolioError, UndefinedSharpeError
from .harness import ExperimentSummary, run_experiment

log = logging.getLogger("replica_portfolio")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

PREDICT_HEADER = ("R", "epsilon", "q_w", "sharpe", "epsilon_or", "q_w_or")
DUAL_HEADER = ("epsilon", "r_max", "r_min")
SUMMARY_HEADER = (
    "R", "n_ok", "n_failed",
    "epsilon_mean", "epsilon_se", "epsilon_pred",
    "q_w_mean", "q_w_se", "q_w_pred",
    "sharpe_mean", "sharpe_se", "sharpe_pred",
    "epsilon_or_mean", "epsilon_or_se", "epsilon_or_pred",
    "epsilon_prime_mean", "epsilon_prime_se", "epsilon_prime_pred",
    "kappa_hat", "kappa_prime_hat", "or_violations",
)  # fmt: skip


def fmt(value: Any) -> str:
    """17 significant digits for floats, ``nan`` for missing values."""
    if value is None:
        return "nan"
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (int, str)):
        return str(value)
    return "%.17g" % value


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def write_json(path: Path, obj: Any) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def _clean(obj: Any) -> Any:
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def file_entry(path: Path) -> dict[str, Any]:
    data = path.read_bytes()
    return {"name": path.name, "bytes": len(data), "sha256": hashlib.sha256(data).hexdigest()}


def write_manifest(out: Path, command: str, cfg: dict[str, Any], files: list[Path], started: float, **extra: Any) -> Path:
    manifest = {
        "artifact": "replica-portfolio",
        "version": __version__,
        "command": command,
        "config": _clean(cfg),
        "seeds": {
            "seed": cfg.get("seed"),
            "rule": "trial m: hyperparameters from SeedSequence(seed, spawn_key=(m, 0)), "
            "noise from SeedSequence(seed, spawn_key=(m, 1))",
        },
        "timings": {"wall_seconds": time.perf_counter() - started},
        "files": [file_entry(p) for p in files],
        **_clean(extra),
    }
    path = out / "manifest.json"
    write_json(path, manifest)
    return path


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_predict(cfg: dict[str, Any], out: Path) -> int:
    started = time.perf_counter()
    moments = config_moments(cfg)
    alpha = resolve_alpha(cfg)
    rows = []
    for R in r_grid(cfg):
        p = replica.predict(moments, alpha, R)
        rows.append((R, p.epsilon, p.q_w, p.sharpe, p.epsilon_or, p.q_w_or))
    scalars = replica.scalar_summary(moments, alpha)

    out.mkdir(parents=True, exist_ok=True)
    files = [out / "predictions.csv", out / "scalars.json"]
    write_csv(files[0], PREDICT_HEADER, rows)
    write_json(files[1], _clean({"moments": moments.as_dict(), **scalars}))
    eps_values = eps_grid(cfg)
    if eps_values is not None:
        dual_rows = [(e, *replica.dual_return_bounds(moments, alpha, e)) for e in eps_values]
        files.append(out / "dual.csv")
        write_csv(files[-1], DUAL_HEADER, dual_rows)
    write_manifest(out, "predict", cfg, files, started)

    for key in ("R1", "V1", "R_star", "S_R_star", "S_R1", "S_inf", "kappa", "kappa_prime", "epsilon_0"):
        print(f"{key:>14} = {fmt(scalars[key])}")
    print(f"wrote {', '.join(p.name for p in files)} to {out}")
    return EXIT_OK


def summary_rows(summary: ExperimentSummary) -> list[tuple]:
    rows = []
    for r in summary.rows:
        p = r.prediction
        rows.append(
            (
                r.R, r.n_ok, r.n_failed,
                r.epsilon.mean, r.epsilon.se, None if p is None else p.epsilon,
                r.q_w.mean, r.q_w.se, None if p is None else p.q_w,
                r.sharpe.mean, r.sharpe.se, None if p is None else p.sharpe,
                r.epsilon_or.mean, r.epsilon_or.se, None if p is None else p.epsilon_or,
                r.epsilon_prime.mean, r.epsilon_prime.se, None if p is None else p.epsilon_prime,
                r.kappa_hat, r.kappa_prime_hat, r.or_violations,
            )
        )  # fmt: skip
    return rows


def cmd_simulate(cfg: dict[str, Any], out: Path) -> int:
    started = time.perf_counter()
    config = experiment_config(cfg)
    summary = run_experiment(config)
    elapsed = time.perf_counter() - started

    out.mkdir(parents=True, exist_ok=True)
    files = [out / "summary.csv", out / "summary.json"]
    write_csv(files[0], SUMMARY_HEADER, summary_rows(summary))
    files[1].write_text(summary.to_json(), encoding="utf-8")
    if cfg.get("plot"):
        from .plotting import write_svg

        files.append(out / "summary.svg")
        write_svg(summary, files[-1])
    write_manifest(
        out,
        "simulate",
        cfg,
        files,
        started,
        resolved=config.to_dict(),
        simulation_seconds=elapsed,
        n_failed_trials=summary.n_failed_trials,
        failures=list(summary.failures),
        flags=list(summary.flags),
    )

    print(f"{'R':>8} {'eps':>12} {'z':>6} {'q_w':>12} {'z':>6} {'S':>12} {'z':>6}")
    for r in summary.rows:
        if not r.valid or r.prediction is None:
            print(f"{r.R:8.4f}  no valid trials")
            continue
        p = r.prediction
        print(
            f"{r.R:8.4f} {r.epsilon.mean:12.6g} {r.epsilon.z_score(p.epsilon):6.2f}"
            f" {r.q_w.mean:12.6g} {r.q_w.z_score(p.q_w):6.2f}"
            f" {r.sharpe.mean:12.6g} {r.sharpe.z_score(p.sharpe):6.2f}"
        )
    print(f"failed trials: {summary.n_failed_trials}/{config.n_trials}; wrote {', '.join(p.name for p in files)} to {out}")
    if summary.all_failed:
        print("error: every trial failed", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def configured_model_check(cfg: dict[str, Any]) -> CheckResult:
    """The Sharpe identity on the configured model at the configured alpha."""
    name = "configured_model_pythagorean"
    moments = config_moments(cfg)
    alpha = resolve_alpha(cfg)
    try:
        trip = replica.sharpe_triple(moments, alpha)
    except UndefinedSharpeError as exc:
        return CheckResult(name, True, 0.0, 1e-12, f"skipped: {exc}")
    s_star = replica.sharpe(moments, alpha, trip.r_star)
    worst = abs(s_star**2 - trip.s_at_r1**2 - trip.s_at_inf**2) / s_star**2
    return CheckResult(name, worst <= 1e-12, worst, 1e-12, f"alpha={alpha:g}")


def cmd_check(cfg: dict[str, Any], out: Path | None, fault: float) -> int:
    started = time.perf_counter()
    results = [configured_model_check(cfg), *run_checks(fault=fault)]
    width = max(len(r.name) for r in results)
    print(f"{'check':<{width}}  status  {'worst':>10}  {'tol':>8}  detail")
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  {status:<6}  {r.worst:10.3e}  {r.tolerance:8.1e}  {r.detail}")
    failed = [r.name for r in results if not r.passed]
    if fault:
        print(f"fault injection active: risk at R* perturbed by a relative {fault:g}")
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        path = out / "checks.csv"
        write_csv(path, ("check", "passed", "worst", "tolerance", "detail"),
                  [(r.name, r.passed, r.worst, r.tolerance, r.detail) for r in results])  # fmt: skip
        write_manifest(out, "check", cfg, [path], started, fault=fault, failed=failed)
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_CHECK_FAILED if failed else EXIT_OK


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in an unsigned 64-bit integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON config file; flags override its fields")
    common.add_argument("--seed", type=_u64, help="master seed (unsigned 64-bit)")
    common.add_argument("--workers", type=int, metavar="COUNT", help="parallel trial workers")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--plot", action="store_true", default=None, help="also write an SVG plot (simulate)")
    common.add_argument("--n-assets", type=int, dest="n_assets")
    common.add_argument("--n-periods", type=int, dest="n_periods")
    common.add_argument("--alpha", type=float, help="period ratio p/N; overrides n_periods")
    common.add_argument("--n-trials", type=int, dest="n_trials")
    common.add_argument("--noise", choices=("gaussian", "uniform", "rademacher"))
    common.add_argument("--eps", type=float, nargs="+", metavar="EPS", help="risk levels for dual return bounds (predict)")
    common.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE",
        help="override any config field by dotted path, VALUE parsed as JSON, e.g. hyper.mean.upper=3",
    )  # fmt: skip
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="replica-portfolio", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("predict", parents=[common], help="closed-form curves over the R grid")
    sub.add_parser("simulate", parents=[common], help="Monte Carlo experiment against the predictions")
    chk = sub.add_parser("check", parents=[common], help="run the identity and oracle suite")
    chk.add_argument(
        "--inject-fault", type=float, nargs="?", const=1e-6, default=0.0, metavar="REL",
        help="test hook: perturb the risk in the Sharpe identity by REL (default 1e-6); the suite must fail",
    )  # fmt: skip
    return parser


def resolve_config(args: argparse.Namespace) -> dict[str, Any]:
    cfg = load_config(args.config)
    for key in ("seed", "workers", "out", "plot", "n_assets", "n_trials", "noise"):
        value = getattr(args, key)
        if value is not None:
            cfg[key] = value
    if args.n_periods is not None:
        cfg["n_periods"] = args.n_periods
        cfg["alpha"] = None
    if args.alpha is not None:
        cfg["alpha"] = args.alpha
    if args.eps is not None:
        cfg["eps_grid"] = list(args.eps)
    for assignment in args.set:
        set_dotted(cfg, assignment)
    cfg["n_periods"] = resolve_n_periods(cfg)
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        out = Path(cfg["out"])
        if args.command == "predict":
            return cmd_predict(cfg, out)
        if args.command == "simulate":
            return cmd_simulate(cfg, out)
        return cmd_check(cfg, out if args.out is not None else None, args.inject_fault)
    except (ParameterError, DomainError, DivergenceError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ReplicaPortfolioError, ArithmeticError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (TypeError, ValueError, KeyError) as exc:
        print(f"config error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
