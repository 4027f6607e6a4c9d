"""Command-line surface: fit, simulate, bench, and timecourse.

Settings resolve in precedence order: built-in defaults, then a key=value
config file, then the BDG_SEED environment variable (seed only), then
explicit command-line flags.  Every run writes a manifest sufficient to
reproduce its outputs byte for byte.

Exit codes: 0 success, 2 configuration error, 3 input parse error,
4 numerical failure (including partially failed benchmark cells).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .benchmark import (
    InvalidDimensionError,
    MODEL_KINDS,
    Scenario,
    SyntheticModel,
    generate_model,
    run_benchmark,
    sample_mvn,
)
from .engine import ChainConfig, ChainStepError, run_chain
from .estimators import summarize
from .graphs import GraphPrior
from .gwishart import GWishartParams, NoConvergenceError
from .io import (
    ParseError,
    read_config_file,
    read_data_csv,
    read_matrix_csv,
    read_timecourse_csv,
    write_bench_per_rep,
    write_bench_report,
    write_beta_trace,
    write_graph_probs_csv,
    write_manifest,
    write_matrix_csv,
    write_occupancy_csv,
    write_occupancy_svg,
    write_trace_csv,
)
from .linalg import NotPositiveDefiniteError
from .timecourse import run_timecourse_chain

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARSE = 3
EXIT_NUMERICAL = 4

FIT_DEFAULTS = {
    "iterations": "60000",
    "burn_in": "30000",
    "seed": "0",
    "prior": "uniform",
    "b": "3.0",
    "d": "identity",
    "thin": "10",
    "exchange_mode": "shared",
    "svg": "false",
    "basis_size": "5",
    "threshold": "0.5",
    "workers": "1",
}


class ConfigError(ValueError):
    """Invalid or inconsistent run settings."""


def _resolve_settings(args: argparse.Namespace, keys: list[str]) -> dict[str, str]:
    settings = {k: FIT_DEFAULTS[k] for k in keys if k in FIT_DEFAULTS}
    if getattr(args, "config", None):
        try:
            file_settings = read_config_file(args.config)
        except FileNotFoundError as err:
            raise ConfigError(f"config file not found: {args.config}") from err
        unknown = set(file_settings) - set(keys)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        settings.update(file_settings)
    if "seed" in keys and os.environ.get("BDG_SEED"):
        settings["seed"] = os.environ["BDG_SEED"]
    for key in keys:
        flag = getattr(args, key, None)
        if flag is not None:
            settings[key] = str(flag)
    return settings


def _parse_prior(text: str) -> GraphPrior:
    if text == "uniform":
        return GraphPrior("uniform")
    if text.startswith("poisson:"):
        try:
            return GraphPrior("poisson", float(text.split(":", 1)[1]))
        except ValueError as err:
            raise ConfigError(f"bad poisson prior {text!r}") from err
    raise ConfigError(f"unknown prior {text!r} (expected uniform or poisson:<gamma>)")


def _parse_scale(text: str, p: int) -> np.ndarray:
    if text == "identity":
        return np.eye(p)
    if text.startswith("scaled:"):
        try:
            return float(text.split(":", 1)[1]) * np.eye(p)
        except ValueError as err:
            raise ConfigError(f"bad scale spec {text!r}") from err
    if text.startswith("file:"):
        d = read_matrix_csv(text.split(":", 1)[1])
        if d.shape != (p, p):
            raise ConfigError(f"scale matrix is {d.shape}, expected ({p}, {p})")
        return d
    raise ConfigError(f"unknown scale spec {text!r}")


def _int(settings: dict[str, str], key: str) -> int:
    try:
        return int(settings[key])
    except ValueError as err:
        raise ConfigError(f"{key} must be an integer, got {settings[key]!r}") from err


def _float(settings: dict[str, str], key: str) -> float:
    try:
        return float(settings[key])
    except ValueError as err:
        raise ConfigError(f"{key} must be a number, got {settings[key]!r}") from err


def _bool(settings: dict[str, str], key: str) -> bool:
    val = settings[key].lower()
    if val in ("true", "1", "yes"):
        return True
    if val in ("false", "0", "no"):
        return False
    raise ConfigError(f"{key} must be true/false, got {settings[key]!r}")


def _chain_config(settings: dict[str, str], scatter: np.ndarray, n: int) -> ChainConfig:
    p = scatter.shape[0]
    try:
        return ChainConfig(
            iterations=_int(settings, "iterations"),
            burn_in=_int(settings, "burn_in"),
            prior=_parse_prior(settings["prior"]),
            gw_prior=GWishartParams(_float(settings, "b"), _parse_scale(settings["d"], p)),
            scatter=scatter,
            n=n,
            seed=_int(settings, "seed"),
            snapshot_stride=_int(settings, "thin"),
            exchange_mode=settings["exchange_mode"],
        )
    except (ValueError, NotPositiveDefiniteError) as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError(str(err)) from err


def _write_fit_outputs(out_dir: Path, trace, manifest: dict[str, object], svg: bool) -> None:
    summary = summarize(trace)
    write_matrix_csv(out_dir / "phat.csv", summary.phat)
    write_matrix_csv(out_dir / "khat.csv", summary.khat)
    write_graph_probs_csv(out_dir / "graph_probs.csv", summary.graph_probs)
    write_trace_csv(out_dir / "trace.csv", trace)
    write_occupancy_csv(out_dir / "occupancy.csv", trace)
    if svg:
        write_occupancy_svg(out_dir / "occupancy.svg", trace)
    write_manifest(out_dir / "run_manifest.txt", manifest)


FIT_KEYS = [
    "iterations",
    "burn_in",
    "seed",
    "prior",
    "b",
    "d",
    "thin",
    "exchange_mode",
    "svg",
]


def cmd_fit(args: argparse.Namespace) -> int:
    settings = _resolve_settings(args, FIT_KEYS)
    data = read_data_csv(args.data)
    n, p = data.shape
    scatter = data.T @ data
    scatter = (scatter + scatter.T) / 2.0
    cfg = _chain_config(settings, scatter, n)
    trace = run_chain(cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = dict(settings)
    manifest.update(
        command="fit", data=str(args.data), n=n, p=p,
        artifact=f"bdggm {__version__}", clamp_events=trace.clamp_events,
    )
    _write_fit_outputs(out_dir, trace, manifest, _bool(settings, "svg"))
    print(f"fit: wrote {out_dir}/phat.csv and friends ({trace.n_steps} steps)")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    settings = _resolve_settings(args, ["seed"])
    seed = _int(settings, "seed")
    try:
        model = SyntheticModel(args.model, args.p, seed=seed)
    except InvalidDimensionError as err:
        raise ConfigError(str(err)) from err
    g_true, k_true = generate_model(model)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 1)))
    data, _ = sample_mvn(k_true, args.n, rng)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(out_dir / "data.csv", data)
    write_matrix_csv(out_dir / "truth_k.csv", k_true)
    (out_dir / "truth_graph.txt").write_text(g_true.text + "\n")
    write_manifest(
        out_dir / "run_manifest.txt",
        {
            "command": "simulate", "model": args.model, "p": args.p,
            "n": args.n, "seed": seed, "artifact": f"bdggm {__version__}",
        },
    )
    print(f"simulate: wrote {out_dir}/data.csv ({args.n} x {args.p}, {len(g_true.edges)} edges)")
    return EXIT_OK


def _read_scenarios(path: str | Path) -> list[Scenario]:
    import csv as _csv

    scenarios = []
    with open(path, newline="") as fh:
        reader = _csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError(f"{path}: empty scenario file")
        required = {"model", "p", "n", "reps"}
        missing = required - set(reader.fieldnames)
        if missing:
            raise ParseError(f"{path}: missing columns: {', '.join(sorted(missing))}")
        for lineno, row in enumerate(reader, start=2):
            try:
                scenarios.append(
                    Scenario(
                        model=row["model"].strip(),
                        p=int(row["p"]),
                        n=int(row["n"]),
                        reps=int(row["reps"]),
                        iterations=int(row.get("iterations") or 10_000),
                        burn_in=int(row.get("burn_in") or 5_000),
                        seed=int(row.get("seed") or 0),
                        threshold=float(row.get("threshold") or 0.5),
                    )
                )
            except ValueError as err:
                raise ConfigError(f"{path}: line {lineno}: {err}") from err
    if not scenarios:
        raise ConfigError(f"{path}: no scenarios")
    return scenarios


def cmd_bench(args: argparse.Namespace) -> int:
    settings = _resolve_settings(args, ["workers"])
    scenarios = _read_scenarios(args.scenarios)
    reports = run_benchmark(scenarios, workers=_int(settings, "workers"))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_bench_report(out_dir / "report.csv", reports)
    write_bench_per_rep(out_dir / "per_rep.csv", reports)
    n_failed = sum(rep.n_failed for rep in reports)
    print(f"bench: {len(scenarios)} scenarios, {n_failed} failed reps -> {out_dir}/report.csv")
    return EXIT_NUMERICAL if n_failed else EXIT_OK


TIMECOURSE_KEYS = FIT_KEYS + ["basis_size"]


def cmd_timecourse(args: argparse.Namespace) -> int:
    settings = _resolve_settings(args, TIMECOURSE_KEYS)
    times, data = read_timecourse_csv(args.data)
    t_count, p = data.shape
    cfg = _chain_config(settings, np.zeros((p, p)), t_count)
    result = run_timecourse_chain(
        data, times, cfg, basis_size=_int(settings, "basis_size")
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = dict(settings)
    manifest.update(
        command="timecourse", data=str(args.data), t=t_count, p=p,
        artifact=f"bdggm {__version__}", clamp_events=result.trace.clamp_events,
    )
    _write_fit_outputs(out_dir, result.trace, manifest, _bool(settings, "svg"))
    write_beta_trace(out_dir / "beta_trace.csv", result.beta_steps, result.beta_draws)
    print(f"timecourse: wrote {out_dir}/phat.csv and beta_trace.csv")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bdggm",
        description="Birth-death MCMC structure learning for Gaussian graphical models",
    )
    parser.add_argument("--version", action="version", version=f"bdggm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_chain_flags(p_cmd):
        p_cmd.add_argument("--config", help="key = value settings file")
        p_cmd.add_argument("--iterations", type=int)
        p_cmd.add_argument("--burn-in", dest="burn_in", type=int)
        p_cmd.add_argument("--seed", type=int)
        p_cmd.add_argument("--prior", help="uniform or poisson:<gamma>")
        p_cmd.add_argument("--b", type=float, help="prior degrees of freedom")
        p_cmd.add_argument("--d", help="identity, scaled:<x>, or file:<path>")
        p_cmd.add_argument("--thin", type=int, help="K snapshot stride")
        p_cmd.add_argument("--exchange-mode", dest="exchange_mode",
                           choices=["shared", "per_edge"])
        p_cmd.add_argument("--svg", action="store_const", const="true",
                           help="also write occupancy.svg")
        p_cmd.add_argument("--out", default="bdggm_out", help="output directory")

    p_fit = sub.add_parser("fit", help="fit a graphical model to an n x p CSV")
    p_fit.add_argument("data")
    add_chain_flags(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_sim = sub.add_parser("simulate", help="generate synthetic data and truth")
    p_sim.add_argument("--model", required=True,
                       help=f"one of: {', '.join(MODEL_KINDS)}")
    p_sim.add_argument("--p", type=int, required=True)
    p_sim.add_argument("--n", type=int, required=True)
    p_sim.add_argument("--seed", type=int)
    p_sim.add_argument("--config", help="key = value settings file")
    p_sim.add_argument("--out", default="bdggm_out")
    p_sim.set_defaults(func=cmd_simulate)

    p_bench = sub.add_parser("bench", help="run a scenario grid")
    p_bench.add_argument("scenarios", help="CSV with model,p,n,reps[,...] columns")
    p_bench.add_argument("--workers", type=int)
    p_bench.add_argument("--config", help="key = value settings file")
    p_bench.add_argument("--out", default="bdggm_out")
    p_bench.set_defaults(func=cmd_bench)

    p_tc = sub.add_parser("timecourse", help="fit time-course data (first column = time)")
    p_tc.add_argument("data")
    add_chain_flags(p_tc)
    p_tc.add_argument("--basis-size", dest="basis_size", type=int)
    p_tc.set_defaults(func=cmd_timecourse)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except ParseError as err:
        print(f"parse error: {err}", file=sys.stderr)
        return EXIT_PARSE
    except (NotPositiveDefiniteError, NoConvergenceError, ChainStepError, ArithmeticError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
