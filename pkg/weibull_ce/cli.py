"""Command-line front end for weibull-ce."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import TYPE_CHECKING, Any

import colorlog
import numpy as np
from pydantic import ValidationError

from .const import (
    DEFAULT_DV,
    DEFAULT_INIT,
    DEFAULT_K0,
    DEFAULT_MAX_ITER,
    DEFAULT_NEWTON_TOL,
    DEFAULT_PROFILE,
    DEFAULT_REPLICATES,
    DEFAULT_SEED,
    DEFAULT_VS,
    EXIT_CONFIG_ERROR,
    EXIT_NOT_CONVERGED,
    EXIT_NUMERICAL_ERROR,
    EXIT_OK,
    EXIT_PARSE_ERROR,
    EXIT_WARNINGS,
    GOF_PROFILE,
    LOGGER,
    NAME,
    STARTUP_MESSAGE,
    VERSION,
)
from .data import DesignTemplate, ModelParams, TestPlan, format_ts
from .diagnostics import RunClock, get_run_diagnostics
from .estimator import FitConfig, fit, fit_summary
from .exceptions import (
    ConfigError,
    DatasetParseError,
    EstimationError,
    NewtonConvergenceError,
    WeibullCeError,
)
from .fileio import (
    ingest,
    read_bins,
    read_template,
    write_dataset,
    write_report,
    write_sidecar,
    write_table,
)
from .moments import curve, moments, table1_grid
from .simulate import expected_stage_start, generate_dataset, gof_monte_carlo

if TYPE_CHECKING:
    from collections.abc import Sequence

    from .diagnostics import RunManifest

CURVE_COLUMNS = (
    "k_tilde",
    "dv",
    "v_th",
    "beta",
    "n",
    "ts_tilde",
    "mean_norm",
    "sd_norm",
)
LOG_FORMAT = "%(log_color)s%(levelname)-8s%(reset)s %(name)s: %(message)s"


def _floats(text: str, count: int, flag: str) -> tuple[float, ...]:
    """Parse a comma-separated list of `count` numbers."""
    try:
        values = tuple(float(item) for item in text.split(","))
    except ValueError as exception:
        msg = f"{flag} expects {count} comma-separated numbers, got {text!r}"
        raise ConfigError(msg) from exception
    if len(values) != count:
        msg = f"{flag} expects {count} comma-separated numbers, got {text!r}"
        raise ConfigError(msg)
    return values


def parse_grid(text: str) -> np.ndarray:
    """Parse ts0:ts1:steps, with a trailing 'log' for a logarithmic grid."""
    parts = text.split(":")
    if len(parts) != 3:  # noqa: PLR2004
        msg = f"--grid expects ts0:ts1:steps, got {text!r}"
        raise ConfigError(msg)
    steps_text = parts[2]
    logarithmic = steps_text.endswith("log")
    if logarithmic:
        steps_text = steps_text.removesuffix("log")
    try:
        start, stop, steps = float(parts[0]), float(parts[1]), int(steps_text)
    except ValueError as exception:
        msg = f"--grid expects ts0:ts1:steps, got {text!r}"
        raise ConfigError(msg) from exception
    if steps < 1 or start < 0 or stop < start or (logarithmic and start <= 0):
        msg = f"Invalid --grid {text!r}"
        raise ConfigError(msg)
    if logarithmic:
        return np.logspace(np.log10(start), np.log10(stop), steps)
    return np.linspace(start, stop, steps)


def _plan(args: argparse.Namespace) -> TestPlan:
    return TestPlan(dv=args.dv, vs=args.vs)


def _params(args: argparse.Namespace) -> ModelParams:
    return ModelParams.from_vector(_floats(args.params, 4, "--params"), args.k0)


def _fit_config(args: argparse.Namespace, profile: str) -> FitConfig:
    start, end, step = _floats(profile, 3, "--profile")
    return FitConfig(
        init=_floats(args.init, 4, "--init"),
        profile_start=start,
        profile_end=end,
        profile_step=step,
        newton_tol=args.tol,
        max_iter=args.max_iter,
        k0=args.k0,
    )


def _emit(report: dict[str, Any], out: Path | None, manifest: RunManifest) -> None:
    if out is None:
        payload = {"manifest": manifest.model_dump(mode="json"), **report}
        sys.stdout.write(json.dumps(payload, indent=2) + "\n")
    else:
        write_report(report, out, manifest)


def cmd_fit(args: argparse.Namespace, clock: RunClock) -> int:
    """Fit the model and report estimates, ln L and per-row summaries."""
    data = ingest(args.data, _plan(args))
    config = _fit_config(args, args.profile)
    result = fit(data, config)

    report = fit_summary(result)
    rows = []
    for row in data.summary():
        fitted = moments(row.ts, result.params, data.plan)
        rows.append(
            {
                **row.model_dump(),
                "fitted_mean_norm": fitted.mean_norm,
                "fitted_sd_norm": fitted.sd_norm,
                "expected_stage_start": expected_stage_start(
                    row.ts, result.params, data.plan
                ),
            }
        )
    report["rows"] = rows
    _emit(report, args.out, get_run_diagnostics(args, clock))

    if not result.converged:
        return EXIT_NOT_CONVERGED
    return EXIT_WARNINGS if result.warnings else EXIT_OK


def _curve_rows(
    params_list: Sequence[ModelParams], grid: np.ndarray, plan: TestPlan
) -> list[tuple[Any, ...]]:
    rows = []
    for params in params_list:
        for result in curve(grid, params, plan):
            rows.append(  # noqa: PERF401
                (
                    params.k_tilde,
                    plan.dv,
                    params.v_th,
                    params.beta,
                    params.n,
                    result.ts,
                    result.mean_norm,
                    result.sd_norm,
                )
            )
    return rows


def cmd_curves(args: argparse.Namespace, clock: RunClock) -> int:
    """Tabulate mean and SD of T/dt over a grid of prior exposures."""
    plan = _plan(args)
    grid = parse_grid(args.grid)
    if args.table1:
        params_list = table1_grid()
    elif args.params:
        params_list = [_params(args)]
    else:
        msg = "curves needs --params or --table1"
        raise ConfigError(msg)

    rows = _curve_rows(params_list, grid, plan)
    manifest = get_run_diagnostics(args, clock)
    write_table(CURVE_COLUMNS, rows, args.out, manifest)

    if args.emit_plot_data is not None:
        args.emit_plot_data.mkdir(parents=True, exist_ok=True)
        panels: dict[tuple[float, float], list[tuple[Any, ...]]] = {}
        for row in rows:
            panels.setdefault((row[3], row[0]), []).append(row)
        for (beta, k_tilde), panel in panels.items():
            name = f"beta{format_ts(beta)}_k{format_ts(k_tilde)}.csv"
            write_table(CURVE_COLUMNS, panel, args.emit_plot_data / name, manifest)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace, clock: RunClock) -> int:
    """Generate a data set from a template at given parameters."""
    template = read_template(args.template)
    data = generate_dataset(template, _params(args), _plan(args), args.seed)
    write_dataset(data, args.out)
    write_sidecar(args.out, get_run_diagnostics(args, clock))
    return EXIT_OK


def cmd_gof(args: argparse.Namespace, clock: RunClock) -> int:
    """Chi-square goodness of fit with a parametric bootstrap."""
    bins = read_bins(args.bins)
    data = ingest(args.data, _plan(args))
    template = (
        read_template(args.template)
        if args.template
        else DesignTemplate.from_dataset(data)
    )

    warnings: list[str] = []
    if args.refit:
        result = fit(data, _fit_config(args, args.fit_profile))
        if not result.converged:
            msg = "Fit of the observed data did not converge"
            raise EstimationError(msg)
        fitted = result.params
        warnings += result.warnings
    elif args.params:
        fitted = _params(args)
    else:
        msg = "gof needs --params or --refit"
        raise ConfigError(msg)

    report = gof_monte_carlo(
        data,
        fitted,
        bins,
        template,
        args.replicates,
        args.seed,
        _fit_config(args, args.profile),
        refit_probabilities=not args.fixed_probabilities,
        workers=args.workers,
    )
    if report.replicates_used and report.replicates_used < args.replicates:
        warnings.append(
            f"Only {report.replicates_used} of {args.replicates} replicates succeeded"
        )
    payload = {
        "fitted": fitted.model_dump(),
        **report.model_dump(),
        "warnings": warnings,
    }
    _emit(payload, args.out, get_run_diagnostics(args, clock))
    return EXIT_WARNINGS if warnings else EXIT_OK


def _add_plan_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--dv",
        type=float,
        default=DEFAULT_DV,
        help="Step dV/Vs (default 5*sqrt(3)/22 ~ 0.39: 5 kV steps at 22/sqrt(3) kV)",
    )
    parser.add_argument(
        "--vs", type=float, default=DEFAULT_VS, help="Prior-use stress over Vs"
    )
    parser.add_argument(
        "--k0", type=float, default=DEFAULT_K0, help="Normalizer of K (K = k0*zeta)"
    )


def _add_fit_flags(parser: argparse.ArgumentParser, profile: tuple) -> None:
    parser.add_argument(
        "--init",
        default=",".join(map(str, DEFAULT_INIT)),
        help="Initial beta,n,zeta,v_th",
    )
    parser.add_argument(
        "--profile",
        default=",".join(map(str, profile)),
        help="v_th sweep alpha0,alpha1,step",
    )
    parser.add_argument(
        "--tol", type=float, default=DEFAULT_NEWTON_TOL, help="Newton tolerance"
    )
    parser.add_argument(
        "--max-iter", type=int, default=DEFAULT_MAX_ITER, help="Newton iteration cap"
    )


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with the fit, curves, simulate and gof subcommands."""
    parser = argparse.ArgumentParser(
        prog=NAME,
        description="Weibull cumulative exposure model for step-stress data",
    )
    parser.add_argument("--version", action="version", version=VERSION)
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging level",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    fit_parser = commands.add_parser("fit", help="Maximum likelihood fit")
    fit_parser.add_argument("--data", type=Path, required=True, help="Data set CSV")
    _add_plan_flags(fit_parser)
    _add_fit_flags(fit_parser, DEFAULT_PROFILE)
    fit_parser.add_argument("--out", type=Path, help="Report JSON (default stdout)")
    fit_parser.set_defaults(func=cmd_fit)

    curves = commands.add_parser("curves", help="Mean and SD of T/dt")
    curves.add_argument(
        "--grid", required=True, help="ts0:ts1:steps, 'log' suffix for log spacing"
    )
    curves.add_argument("--params", help="beta,n,zeta,v_th")
    curves.add_argument(
        "--table1", action="store_true", help="Sweep the published parameter grid"
    )
    _add_plan_flags(curves)
    curves.add_argument("--out", type=Path, required=True, help="Output CSV")
    curves.add_argument(
        "--emit-plot-data",
        type=Path,
        help="Directory for one CSV per (beta, K~) panel",
    )
    curves.set_defaults(func=cmd_curves)

    simulate = commands.add_parser("simulate", help="Generate a data set")
    simulate.add_argument("--params", required=True, help="beta,n,zeta,v_th")
    simulate.add_argument(
        "--template", type=Path, required=True, help="Template CSV (ts_tilde,count)"
    )
    simulate.add_argument("--seed", type=int, default=DEFAULT_SEED)
    _add_plan_flags(simulate)
    simulate.add_argument("--out", type=Path, required=True, help="Output CSV")
    simulate.set_defaults(func=cmd_simulate)

    gof = commands.add_parser("gof", help="Bootstrap goodness of fit")
    gof.add_argument("--data", type=Path, required=True, help="Data set CSV")
    gof.add_argument("--params", help="Fitted beta,n,zeta,v_th")
    gof.add_argument(
        "--refit", action="store_true", help="Fit the data instead of --params"
    )
    gof.add_argument("--bins", type=Path, required=True, help="Bins JSON")
    gof.add_argument(
        "--template", type=Path, help="Template CSV (default: the data's rows)"
    )
    gof.add_argument("--replicates", type=int, default=DEFAULT_REPLICATES)
    gof.add_argument("--seed", type=int, default=DEFAULT_SEED)
    gof.add_argument("--workers", type=int, default=1, help="Worker processes")
    gof.add_argument(
        "--fixed-probabilities",
        action="store_true",
        help="Use the fitted parameters, not each refit, for replicate p_i",
    )
    gof.add_argument(
        "--fit-profile",
        default=",".join(map(str, DEFAULT_PROFILE)),
        help="v_th sweep for --refit",
    )
    _add_plan_flags(gof)
    _add_fit_flags(gof, GOF_PROFILE)
    gof.add_argument("--out", type=Path, help="Report JSON (default stdout)")
    gof.set_defaults(func=cmd_gof)
    return parser


def setup_logging(level: str) -> None:
    """Send package logs to stderr through a colored formatter."""
    if not any(
        isinstance(handler.formatter, colorlog.ColoredFormatter)
        for handler in LOGGER.handlers
    ):
        handler = colorlog.StreamHandler()
        handler.setFormatter(colorlog.ColoredFormatter(LOG_FORMAT))
        LOGGER.addHandler(handler)
    LOGGER.setLevel(level)
    LOGGER.debug(STARTUP_MESSAGE)


def main(argv: Sequence[str] | None = None) -> int:
    """Run the command line and return its exit code."""
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    clock = RunClock()
    try:
        return args.func(args, clock)
    except DatasetParseError as exception:
        where = f"{exception.path}" + (
            f":{exception.line}" if exception.line is not None else ""
        )
        LOGGER.error(f"{where}: {exception}")
        return EXIT_PARSE_ERROR
    except (ConfigError, ValidationError) as exception:
        LOGGER.error(f"Invalid configuration: {exception}")
        return EXIT_CONFIG_ERROR
    except (EstimationError, NewtonConvergenceError) as exception:
        LOGGER.error(f"Estimation failed: {exception}")
        return EXIT_NOT_CONVERGED
    except WeibullCeError as exception:
        LOGGER.error(f"Numerical error: {exception}")
        return EXIT_NUMERICAL_ERROR
