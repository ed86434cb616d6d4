"""
Wedge Intensity CLI - Command line interface for intensities, survival and validation.
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from . import __version__
from .config import configure_logging
from .densities import g_joint, survival_prob
from .errors import ConfigError, DomainError, ValidationFailure, WedgeIntensityError
from .geometry import build_model
from .intensity import IntensitySample, intensity_path
from .montecarlo import Conditioning, SimConfig, conditional_rate, simulate
from .quadrature import QuadConfig
from .report import (
    INTENSITY_HEADER,
    VALIDATION_HEADER,
    Series,
    intensity_rows,
    render_csv,
    render_table,
    validation_rows,
    write_csv,
    write_svg,
    write_text,
)
from .scenario import FIGURES, Scenario, TimeGrid, get_scenario, list_scenarios, load_scenario
from .validation import DEFAULT_BATTERY, ValidationReport, run_validation

logger = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VALIDATION = 4

FIG3_DELTA = 0.05


def get_scenario_arg(args: argparse.Namespace) -> Scenario:
    """Scenario from --config or --scenario."""
    if args.config:
        return load_scenario(args.config)
    if args.scenario:
        return get_scenario(args.scenario)
    raise ConfigError("a scenario is required: pass --config PATH or --scenario NAME")


def get_quad(args: argparse.Namespace, scenario: Optional[Scenario] = None) -> QuadConfig:
    q = scenario.quad_config if scenario is not None else QuadConfig()
    if args.tol is not None:
        try:
            q = replace(q, rel_tol=args.tol)
        except DomainError as e:
            raise ConfigError(f"--tol: {e}") from e
    return q


def get_sim(args: argparse.Namespace, base: SimConfig) -> SimConfig:
    overrides: Dict[str, Any] = {}
    if getattr(args, "paths", None) is not None:
        overrides["n_paths"] = args.paths
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    try:
        return replace(base, **overrides)
    except DomainError as e:
        raise ConfigError(f"simulation settings: {e}") from e


def cmd_intensity(args: argparse.Namespace) -> None:
    """Tabulate lambda1 and lambda2 along the scenario grid."""
    scenario = get_scenario_arg(args)
    grid = TimeGrid.parse(args.grid).points() if args.grid else None
    logger.info("intensity: scenario '%s'", scenario.name)
    samples = intensity_path(scenario, grid, get_quad(args, scenario), workers=None)
    write_csv(args.out, INTENSITY_HEADER, intensity_rows(samples))


def cmd_survival(args: argparse.Namespace) -> None:
    """Tabulate P(tau > t) from the model start."""
    scenario = get_scenario_arg(args)
    q = get_quad(args, scenario)
    state = build_model(scenario.model)
    grid = TimeGrid.parse(args.t_grid) if args.t_grid else scenario.grid
    rows: List[List[Any]] = []
    for t in grid.points():
        if t <= 0.0:
            rows.append([t, 1.0, 0.0])
            continue
        result = survival_prob(t, state, q)
        rows.append([t, float(result.value), result.quality.quadrature_estimate_error])
    write_csv(args.out, ("t", "survival", "quad_err"), rows)


def cmd_joint(args: argparse.Namespace) -> None:
    """Tabulate the joint default density g(s, t) on {tau1 < tau2}."""
    scenario = get_scenario_arg(args)
    q = get_quad(args, scenario)
    state = build_model(scenario.model)
    s_grid = TimeGrid.parse(args.s_grid) if args.s_grid else scenario.grid
    t_grid = TimeGrid.parse(args.t_grid) if args.t_grid else scenario.grid
    rows: List[List[Any]] = []
    for s in s_grid.points():
        for t in t_grid.points():
            # outside 0 < s < t the density is not defined here
            if not 0.0 < s < t:
                rows.append([s, t, None, None])
                continue
            result = g_joint(s, t, state, q)
            rows.append([s, t, float(result.value), result.quality.quadrature_estimate_error])
    write_csv(args.out, ("s", "t", "g", "quad_err"), rows)


def cmd_validate(args: argparse.Namespace) -> None:
    """Compare analytic values with Monte Carlo estimates."""
    if args.config or args.scenario:
        scenario = get_scenario_arg(args)
        models = {scenario.name: scenario.model}
        base = scenario.sim_config
        q = get_quad(args, scenario)
    else:
        models = dict(DEFAULT_BATTERY)
        base = SimConfig()
        q = get_quad(args)
    cfg = get_sim(args, base)

    report = ValidationReport()
    for label, model in models.items():
        logger.info("validating '%s' with %d paths", label, cfg.n_paths)
        report.extend(run_validation(model, cfg, q, label=label, perturb=args.perturb_analytic, progress=logger.info))

    if args.out:
        write_csv(args.out, VALIDATION_HEADER, validation_rows(report))
    sys.stdout.write(render_table(report))
    if not report.passed:
        raise ValidationFailure(f"{len(report.failures)} comparisons outside 3 standard errors")


def _lambda2_series(samples: List[IntensitySample]) -> List[Optional[float]]:
    return [s.lambda2 for s in samples]


def _figure_points(scenario: Scenario, args: argparse.Namespace) -> List[float]:
    return TimeGrid.parse(args.grid).points() if args.grid else scenario.grid.points()


def _figure_table(names: List[str], args: argparse.Namespace) -> Dict[str, Any]:
    scenarios = [get_scenario(name) for name in names]
    points = _figure_points(scenarios[0], args)
    columns: Dict[str, List[Optional[float]]] = {}
    for scenario in scenarios:
        samples = intensity_path(scenario, points, get_quad(args, scenario), workers=None)
        columns[f"lambda2_{scenario.name}"] = _lambda2_series(samples)
    return {"u": points, "columns": columns}


def _fig3_table(args: argparse.Namespace) -> Dict[str, Any]:
    scenario = get_scenario("fig3")
    points = _figure_points(scenario, args)
    samples = intensity_path(scenario, points, get_quad(args, scenario), workers=None)
    cfg = get_sim(args, scenario.sim_config)
    est = simulate(scenario.model, cfg)
    rates: List[Optional[float]] = []
    errors: List[Optional[float]] = []
    for u in points:
        try:
            rate, se = conditional_rate(scenario.model, cfg, u, FIG3_DELTA, Conditioning(), estimates=est)
        except WedgeIntensityError as e:
            logger.warning("fig3: no simulated rate at u=%g: %s", u, e)
            rate, se = None, None
        rates.append(rate)
        errors.append(se)
    columns = {
        "lambda2_analytic": _lambda2_series(samples),
        "lambda2_mc": rates,
        "lambda2_mc_stderr": errors,
    }
    return {"u": points, "columns": columns}


FIGURE_TITLES = {
    "fig1": "lambda2 with firm 1 defaulting at u=2",
    "fig2": "lambda2 for several default times of firm 1 (rho=-0.5)",
    "fig3": "lambda2 exact and simulated, independent firms",
    "fig4": "lambda2 at the default of firm 1, rho=+-0.1",
}


def cmd_figures(args: argparse.Namespace) -> None:
    """Write CSV and SVG data for the built-in figure scenarios."""
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    selected = args.figure or list(FIGURES)
    for figure, names in FIGURES.items():
        if figure not in selected:
            continue
        logger.info("figure %s: %s", figure, ", ".join(names))
        table = _fig3_table(args) if figure == "fig3" else _figure_table(names, args)
        header = ["u", *table["columns"]]
        rows = [[u, *(col[i] for col in table["columns"].values())] for i, u in enumerate(table["u"])]
        csv_text = render_csv(header, rows)
        plotted = {k: v for k, v in table["columns"].items() if not k.endswith("_stderr")}
        series = [Series(name, table["u"], values) for name, values in plotted.items()]
        write_text(csv_text, out_dir / f"{figure}.csv")
        svg_path = out_dir / f"{figure}.svg"
        write_svg(svg_path, FIGURE_TITLES[figure], series, x_label="u (years)", y_label="intensity")
        print(f"Wrote {out_dir / figure}.csv and .svg")


def _add_scenario_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", "-c", help="Scenario JSON file")
    parser.add_argument("--scenario", "-s", choices=list_scenarios(), help="Built-in scenario")
    parser.add_argument("--out", "-o", help="Output file (stdout if omitted)")
    parser.add_argument("--tol", type=float, help="Relative quadrature tolerance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wedge-intensity",
        description="Default intensities of two firms observed at discrete times",
    )
    parser.add_argument(
        "--version",
        "-v",
        action="version",
        version=f"%(prog)s {__version__}",
    )
    parser.add_argument("--log-level", help="Logging level (or set WEDGE_INTENSITY_LOG_LEVEL)")

    subparsers = parser.add_subparsers(dest="command", required=True)

    # intensity command
    intensity_parser = subparsers.add_parser("intensity", help="lambda1 and lambda2 on a time grid")
    _add_scenario_args(intensity_parser)
    intensity_parser.add_argument("--grid", help="Evaluation grid start:stop:step (default: scenario grid)")
    intensity_parser.set_defaults(func=cmd_intensity)

    # survival command
    survival_parser = subparsers.add_parser("survival", help="Survival probability of both firms")
    _add_scenario_args(survival_parser)
    survival_parser.add_argument("--t-grid", help="Times start:stop:step")
    survival_parser.set_defaults(func=cmd_survival)

    # joint command
    joint_parser = subparsers.add_parser("joint", help="Joint default-time density")
    _add_scenario_args(joint_parser)
    joint_parser.add_argument("--s-grid", help="Default times of firm 1, start:stop:step")
    joint_parser.add_argument("--t-grid", help="Default times of firm 2, start:stop:step")
    joint_parser.set_defaults(func=cmd_joint)

    # validate command
    validate_parser = subparsers.add_parser("validate", help="Check analytic values against Monte Carlo")
    _add_scenario_args(validate_parser)
    validate_parser.add_argument("--paths", type=int, help="Number of simulated paths")
    validate_parser.add_argument("--seed", type=int, help="Random seed")
    validate_parser.add_argument("--perturb-analytic", type=float, default=1.0, help=argparse.SUPPRESS)
    validate_parser.set_defaults(func=cmd_validate)

    # figures command
    figures_parser = subparsers.add_parser("figures", help="CSV and SVG data of the figure scenarios")
    figures_parser.add_argument("--out-dir", "-d", default=".", help="Output directory")
    figures_parser.add_argument("--paths", type=int, help="Simulated paths of the fig3 overlay")
    figures_parser.add_argument("--seed", type=int, help="Random seed of the fig3 overlay")
    figures_parser.add_argument("--tol", type=float, help="Relative quadrature tolerance")
    figures_parser.add_argument(
        "--figure", "-f", action="append", choices=list(FIGURES), help="Figure to write (repeatable; default: all)"
    )
    figures_parser.add_argument("--grid", help="Evaluation grid start:stop:step (default: scenario grids)")
    figures_parser.set_defaults(func=cmd_figures)

    return parser


def run(func: Callable[[argparse.Namespace], None], args: argparse.Namespace) -> int:
    """Run a command and map errors to exit codes."""
    try:
        func(args)
    except ConfigError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationFailure as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except WedgeIntensityError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    args = build_parser().parse_args(argv)
    try:
        configure_logging(args.log_level)
    except ConfigError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return run(args.func, args)


if __name__ == "__main__":
    sys.exit(main())
