"""
Command-line front end

Experiment configs (YAML/JSON file and/or flags, flags win) in, CSV/JSON
artifacts out. Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

import argparse
import math
import sys
from collections.abc import Callable, Sequence
from typing import Any

import numpy as np
import numpy.typing as npt

from . import __version__, logger
from .alignment import (
    AlignmentModel,
    WindowConvention,
    draw_magnitudes,
    magnitude_moments,
    quantization_to_half_width,
)
from .artifacts import OUTAGE_COLUMNS, metadata_lines, outage_rows, write_csv, write_json
from .config import (
    AlignmentConfig,
    DistributionConfig,
    ExperimentConfig,
    GeometryConfig,
    GridConfig,
    build_config,
    load_config_file,
    merge_overrides,
)
from .error_handler import (
    EXIT_OK,
    ConfigurationError,
    EstimationError,
    InfeasibleError,
    RisAlignError,
    get_global_error_handler,
    with_error_handling,
)
from .fading import BranchDistribution, BranchKind
from .laplace_series import (
    fit_density_exponent,
    invert_termwise,
    mc_density_near_origin,
    rician_series_curve,
    series_bin_density,
    series_for_sum,
)
from .multi_access import (
    PowerBudget,
    UserProfile,
    channel_from_geometry,
    fdma_min_powers,
    min_angular_spacing,
    noma_hybrid_min_powers,
    noma_min_powers_static,
    slot_channel_matrix,
    spacing_table,
    tdma_min_powers,
)
from .outage import (
    SnrGrid,
    estimate_diversity_order,
    mc_outage_curve,
    perfect_asymptotic_curve,
    reference_curves,
    rician_leading_coefficient,
)
from .radiation_pattern import (
    RisGeometry,
    beamwidth_3db_deg,
    branch_phase_offsets,
    full_diversity_beamwidth,
    pattern_table,
    woodward_coefficients,
    woodward_flat_band,
    woodward_pattern_table,
)
from .random_streams import RandomStream
from .trial_runner import TrialRunner


def build_distribution(cfg: DistributionConfig) -> BranchDistribution:
    assert cfg.b is not None
    if cfg.kind == "rayleigh":
        return BranchDistribution.rayleigh(cfg.b)
    if cfg.kind == "rician":
        return BranchDistribution.rician(cfg.s, cfg.b)
    return BranchDistribution.degenerate(cfg.c)


def build_alignment(cfg: AlignmentConfig, offsets: Sequence[float] | None = None) -> AlignmentModel:
    if cfg.kind == "perfect":
        return AlignmentModel.perfect(cfg.theta0, offsets)
    if cfg.kind == "coherent":
        if cfg.half_width is not None:
            half_width = cfg.half_width
        else:
            assert cfg.level is not None and cfg.convention is not None
            half_width = quantization_to_half_width(cfg.level, cfg.convention)
        return AlignmentModel.coherent(half_width, cfg.theta0, offsets)
    if offsets is not None:
        raise ConfigurationError(f"{cfg.kind} alignment cannot be steered off target")
    if cfg.kind == "random":
        return AlignmentModel.random()
    return AlignmentModel.destructive()


def build_grid(cfg: GridConfig) -> SnrGrid:
    return SnrGrid(tuple(cfg.points_db()), cfg.gamma_0)


def build_geometry(cfg: GeometryConfig) -> RisGeometry:
    return RisGeometry(cfg.M, cfg.dx, cfg.u0)


def _metadata(experiment: ExperimentConfig, extra: dict[str, Any] | None = None) -> list[str]:
    return metadata_lines(experiment.command, experiment.seed, experiment.echo(), extra)


def _stream(experiment: ExperimentConfig) -> RandomStream:
    if experiment.seed is None:
        raise ConfigurationError(f"'{experiment.command}' needs an explicit seed")
    return RandomStream(experiment.seed)


def _as_config_error(build: Callable[[], Any]) -> Any:
    try:
        return build()
    except ConfigurationError:
        raise
    except RisAlignError as e:
        raise ConfigurationError(f"invalid experiment: {e}") from e


def cmd_outage(experiment: ExperimentConfig, runner: TrialRunner) -> None:
    dist, model, grid = _as_config_error(
        lambda: (
            build_distribution(experiment.distribution),
            build_alignment(experiment.alignment),
            build_grid(experiment.grid),
        )
    )
    M = experiment.geometry.M
    curve = mc_outage_curve(
        model, dist, M, grid, experiment.trials, _stream(experiment), runner, conditional=experiment.conditional
    )
    extra: dict[str, Any] = {"guaranteed": curve.guaranteed}
    try:
        estimate = estimate_diversity_order(curve)
        extra.update(diversity_order=estimate.order, diversity_stderr=estimate.stderr, diversity_points=estimate.points)
    except EstimationError as e:
        logger.logger.info(f"No diversity estimate: {e}")
        extra["diversity_order"] = "n/a"

    rows = outage_rows(curve)
    for reference in reference_curves(model, dist, M, grid):
        rows.extend(outage_rows(reference))
    write_csv(experiment.output, OUTAGE_COLUMNS, rows, _metadata(experiment, extra))


def cmd_sweep_angle(experiment: ExperimentConfig, runner: TrialRunner) -> None:
    if experiment.alignment.kind not in ("perfect", "coherent"):
        raise ConfigurationError("sweep-angle steers perfect or coherent alignment off target")
    dist, geom, grid = _as_config_error(
        lambda: (
            build_distribution(experiment.distribution),
            build_geometry(experiment.geometry),
            build_grid(experiment.grid),
        )
    )
    stream = _stream(experiment)
    rows: list[list[Any]] = []
    for angle in experiment.angles_deg:
        u = math.sin(math.radians(angle))
        model = _as_config_error(lambda u=u: build_alignment(experiment.alignment, branch_phase_offsets(geom, u)))
        # same stream for every angle: curves share their amplitude draws
        curve = mc_outage_curve(model, dist, geom.M, grid, experiment.trials, stream, runner)
        rows.extend(outage_rows(curve, prefix=(angle, curve.guaranteed)))

    target_deg = math.degrees(math.asin(geom.u0))
    if dist.kind == BranchKind.RAYLEIGH:
        rows.extend(outage_rows(perfect_asymptotic_curve(geom.M, dist.b, grid), prefix=(target_deg, True)))
    elif dist.kind == BranchKind.RICIAN:
        rows.extend(outage_rows(rician_series_curve(geom.M, dist, grid), prefix=(target_deg, True)))

    beamwidth = full_diversity_beamwidth(geom)
    extra = {"beamwidth_deg": beamwidth.exact_deg, "beamwidth_limited": beamwidth.limited}
    write_csv(experiment.output, ["angle_deg", "guaranteed", *OUTAGE_COLUMNS], rows, _metadata(experiment, extra))


def cmd_pattern(experiment: ExperimentConfig, runner: TrialRunner) -> None:
    geom = _as_config_error(lambda: build_geometry(experiment.geometry))
    points = experiment.pattern.points
    beamwidth = full_diversity_beamwidth(geom)
    extra: dict[str, Any] = {
        "beamwidth_deg": beamwidth.exact_deg,
        "beamwidth_approx_deg": math.degrees(beamwidth.approximate),
        "beamwidth_limited": beamwidth.limited,
    }
    band = experiment.pattern.woodward_band
    if band is not None:
        woodward = _as_config_error(lambda: woodward_flat_band(geom, band[0], band[1]))
        synthesis = woodward_coefficients(geom, woodward)
        table = woodward_pattern_table(synthesis, points)
        extra["woodward_beams"] = " ".join(str(i) for i in woodward.indices)
        extra["woodward_3db_width_deg"] = beamwidth_3db_deg(table.u, table.f_linear)
    else:
        table = pattern_table(geom, points)
    rows = zip(table.u, table.f_linear, table.f_db, strict=True)
    write_csv(experiment.output, ["u", "F_linear", "F_db"], rows, _metadata(experiment, extra))


def cmd_series(experiment: ExperimentConfig, runner: TrialRunner) -> None:
    dist = _as_config_error(lambda: build_distribution(experiment.distribution))
    M = experiment.geometry.M
    series = _as_config_error(lambda: series_for_sum(dist, M, experiment.series.order))
    maclaurin = invert_termwise(series)

    extra: dict[str, Any] = {
        "order": series.order,
        "x_max": maclaurin.x_max,
        "leading_index": maclaurin.leading_index,
    }
    if dist.kind == BranchKind.RICIAN:
        leading = rician_leading_coefficient(M, dist.s, dist.b)
        extra["rician_closed_form_coefficient"] = leading.coefficient
    rows: list[list[Any]] = [["c", n, float(c)] for n, c in enumerate(series.coefficients, start=1)]
    rows.extend(["a", k, float(a)] for k, a in enumerate(maclaurin.coefficients))
    write_csv(experiment.output, ["table", "index", "value"], rows, _metadata(experiment, extra))

    settings = experiment.series
    if settings.trials > 0:
        histogram = mc_density_near_origin(
            dist, M, settings.x_max, settings.bins, settings.trials, _stream(experiment), settings.conditional, runner
        )
        predicted = series_bin_density(maclaurin, histogram.edges)
        density_extra: dict[str, Any] = {"weight": histogram.weight}
        try:
            exponent, stderr = fit_density_exponent(histogram)
            density_extra.update(fitted_exponent=exponent, fitted_exponent_stderr=stderr)
        except EstimationError as e:
            logger.logger.info(f"No exponent fit: {e}")
            density_extra["fitted_exponent"] = "n/a"
        density_rows = zip(
            histogram.edges[:-1],
            histogram.edges[1:],
            histogram.counts,
            histogram.density,
            histogram.std_error,
            predicted,
            strict=True,
        )
        write_csv(
            experiment.density_output,
            ["x_low", "x_high", "counts", "mc_density", "std_error", "series_density"],
            density_rows,
            _metadata(experiment, density_extra),
        )


def _mc_moments(
    model: AlignmentModel, dist: BranchDistribution, M: int, trials: int, stream: RandomStream, runner: TrialRunner
) -> tuple[float, float]:
    def task(n: int, gen: np.random.Generator) -> npt.NDArray[np.float64]:
        magnitudes = draw_magnitudes(model, dist, M, n, gen)
        return np.array([magnitudes.sum(), np.square(magnitudes).sum()])

    total, total_sq = runner.run(trials, M, stream, task)
    mean = total / trials
    variance = max(0.0, (total_sq - trials * mean**2) / max(1, trials - 1))
    return float(mean), float(variance)


def cmd_moments(experiment: ExperimentConfig, runner: TrialRunner) -> None:
    dist = _as_config_error(lambda: build_distribution(experiment.distribution))
    M = experiment.geometry.M
    if experiment.alignment.kind == "coherent":
        coherent = _as_config_error(lambda: build_alignment(experiment.alignment))
    else:
        coherent = AlignmentModel.coherent(quantization_to_half_width(4, WindowConvention.APPENDIX_A))
    models = [AlignmentModel.perfect(), coherent, AlignmentModel.random(), AlignmentModel.destructive()]

    stream = _stream(experiment)
    rows = []
    for index, model in enumerate(models):
        analytic = magnitude_moments(model, dist, M)
        mean, variance = _mc_moments(model, dist, M, experiment.trials, stream.spawn(index), runner)
        tabulated = "" if analytic.tabulated_variance is None else analytic.tabulated_variance
        rows.append([model.kind.value, model.half_width, analytic.mean, analytic.variance, tabulated, mean, variance])
    header = [
        "alignment",
        "half_width",
        "mean_analytic",
        "variance_analytic",
        "tabulated_variance",
        "mean_mc",
        "variance_mc",
    ]
    write_csv(experiment.output, header, rows, _metadata(experiment, {"trials": experiment.trials}))


def _budget_entry(build: Callable[[], PowerBudget], p_rad: float | None) -> dict[str, Any]:
    try:
        budget = build()
    except InfeasibleError as e:
        return {"feasible": False, "reason": str(e), "index": e.index}
    entry: dict[str, Any] = {"feasible": True, **budget.to_dict()}
    if p_rad is not None:
        entry["system_outage"] = budget.system_outage(p_rad)
    return entry


def cmd_ma_budget(experiment: ExperimentConfig, runner: TrialRunner) -> None:
    settings = experiment.multi_access
    if not settings.users:
        raise ConfigurationError("ma-budget needs at least one user")
    geom = _as_config_error(lambda: build_geometry(experiment.geometry))

    directions = [math.sin(math.radians(u.angle_deg or 0.0)) for u in settings.users]
    channels = [
        u.channel
        if u.channel is not None
        else channel_from_geometry(geom, directions[k], float(u.distance or 1.0), settings.beta)
        for k, u in enumerate(settings.users)
    ]
    if settings.slots is not None:
        slots = np.asarray(settings.slots, dtype=float)
    elif all(u.channel is None for u in settings.users):
        slots = slot_channel_matrix(geom, directions, [float(u.distance or 1.0) for u in settings.users], settings.beta)
    else:
        slots = np.tile(np.asarray(channels, dtype=float), (len(channels), 1))

    users = [UserProfile(u.rate, c) for u, c in zip(settings.users, channels, strict=True)]
    slot_users = [UserProfile(u.rate, float(slots[k, k])) for k, u in enumerate(settings.users)]
    sigma_sq = settings.sigma_sq
    builders: dict[str, Callable[[], PowerBudget]] = {
        "noma_static": lambda: noma_min_powers_static(users, sigma_sq),
        "tdma_static": lambda: tdma_min_powers(users, sigma_sq, "static"),
        "fdma_static": lambda: fdma_min_powers(users, sigma_sq),
        "noma_dynamic": lambda: noma_hybrid_min_powers(users, slots, sigma_sq),
        "tdma_dynamic": lambda: tdma_min_powers(slot_users, sigma_sq, "dynamic"),
    }
    selected = list(builders) if settings.scheme == "all" else [settings.scheme]
    budgets = {name: _budget_entry(builders[name], settings.p_rad) for name in selected}
    payload = {
        "budgets": budgets,
        "channels": channels,
        "slot_channels": slots.tolist(),
        "feasible": all(entry["feasible"] for entry in budgets.values()),
    }
    write_json(experiment.output, payload, _metadata(experiment))


def cmd_spacing(experiment: ExperimentConfig, runner: TrialRunner) -> None:
    settings = experiment.spacing
    rows: list[list[Any]] = []
    if settings.table:
        for row in spacing_table():
            degrees = row["spacing_deg"]
            rows.append([row["M"], row["d_ratio"], row["dx"], 2.0, degrees, f"{degrees:.1f}", True])
    else:
        for M in settings.M:
            spacing = _as_config_error(
                lambda M=M: min_angular_spacing(M, settings.d_ratio, 1.0, experiment.geometry.dx, settings.beta)
            )
            rows.append(
                [
                    M,
                    settings.d_ratio,
                    experiment.geometry.dx,
                    settings.beta,
                    spacing.degrees,
                    f"{spacing.degrees:.1f}",
                    spacing.feasible,
                ]
            )
    header = ["M", "d_ratio", "dx", "beta", "spacing_deg", "spacing_deg_rounded", "feasible"]
    write_csv(experiment.output, header, rows, _metadata(experiment))


COMMANDS: dict[str, Callable[[ExperimentConfig, TrialRunner], None]] = {
    "outage": cmd_outage,
    "sweep-angle": cmd_sweep_angle,
    "pattern": cmd_pattern,
    "series": cmd_series,
    "moments": cmd_moments,
    "ma-budget": cmd_ma_budget,
    "spacing": cmd_spacing,
}


_active_runners: list[TrialRunner] = []


def cancel_active_runs() -> bool:
    """Cancel the pending chunks of every running experiment; False when none is running"""
    for runner in list(_active_runners):
        runner.cancel()
    return bool(_active_runners)


def _report(error: Exception, code: int) -> None:
    message = getattr(error, "user_message", None) or str(error)
    print(f"risalign: error: {message}", file=sys.stderr)


@with_error_handling(get_global_error_handler(), on_error=_report)
def run(experiment: ExperimentConfig) -> int:
    """
    Execute one validated experiment

    Args:
        experiment: Validated config

    Returns:
        Exit status (artifacts are written as a side effect)
    """
    logger.logger.info(f"Running '{experiment.command}' with seed {experiment.seed}")
    runner = TrialRunner(max_workers=experiment.workers)
    _active_runners.append(runner)
    try:
        COMMANDS[experiment.command](experiment, runner)
    finally:
        _active_runners.remove(runner)
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML or JSON experiment file; flags override it")
    parser.add_argument("-o", "--output", dest="output", help="artifact path (default: standard output)")
    parser.add_argument("--seed", dest="seed", type=int, help="64-bit seed")
    parser.add_argument("--workers", dest="workers", type=int, help="worker threads (results do not depend on it)")
    parser.add_argument("--log-level", dest="log_level")
    parser.add_argument("--log-dir", dest="log_dir")


def _add_geometry(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--M", dest="geometry.M", type=int, help="number of RIS elements")
    parser.add_argument("--dx", dest="geometry.dx", type=float, help="element pitch over wavelength")
    parser.add_argument("--u0", dest="geometry.u0", type=float, help="scan direction sine")


def _add_distribution(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dist", dest="distribution.kind", choices=["rayleigh", "rician", "degenerate"])
    parser.add_argument("--b", dest="distribution.b", type=float, help="scatter scale")
    parser.add_argument("--s", dest="distribution.s", type=float, help="specular amplitude")
    parser.add_argument("--c", dest="distribution.c", type=float, help="constant amplitude")


def _add_alignment(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--align", dest="alignment.kind", choices=["perfect", "coherent", "random", "destructive"])
    parser.add_argument("--theta0", dest="alignment.theta0", type=float)
    parser.add_argument("--half-width", dest="alignment.half_width", type=float, help="coherent error half-width (rad)")
    parser.add_argument("--L", dest="alignment.level", type=int, help="quantization level")
    parser.add_argument("--convention", dest="alignment.convention", choices=["section2", "appendixA"])


def _add_grid(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--gamma0", dest="grid.gamma_0", type=float, help="target SNR (linear)")
    parser.add_argument("--snr-start", dest="grid.start_db", type=float)
    parser.add_argument("--snr-stop", dest="grid.stop_db", type=float)
    parser.add_argument("--snr-step", dest="grid.step_db", type=float)
    parser.add_argument("--snr", dest="grid.values_db", type=float, nargs="+", help="explicit grid in dB")
    parser.add_argument("--trials", dest="trials", help="channel draws, e.g. 1e6")
    parser.add_argument("--target-p-out", dest="target_p_out", type=float, help="without --trials, draw 100/target")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="risalign",
        description="Outage, diversity and power-budget experiments for RIS-assisted channels",
        argument_default=argparse.SUPPRESS,
    )
    parser.add_argument("--version", action="version", version=f"risalign {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        sub = subparsers.add_parser(name, help=help_text, argument_default=argparse.SUPPRESS)
        _add_common(sub)
        return sub

    outage = add("outage", "outage curve by Monte Carlo with analytic companions")
    _add_geometry(outage)
    _add_distribution(outage)
    _add_alignment(outage)
    _add_grid(outage)
    outage.add_argument("--conditional", dest="conditional", action="store_true", help="rare-event sampling")

    sweep = add("sweep-angle", "outage for users away from the scan direction")
    _add_geometry(sweep)
    _add_distribution(sweep)
    _add_alignment(sweep)
    _add_grid(sweep)
    sweep.add_argument("--angles", dest="angles_deg", type=float, nargs="+", help="user angles in degrees")

    pattern = add("pattern", "normalized radiation pattern")
    _add_geometry(pattern)
    pattern.add_argument("--points", dest="pattern.points", type=int)
    pattern.add_argument(
        "--woodward-band", dest="pattern.woodward_band", type=float, nargs=2, metavar=("U_LOW", "U_HIGH")
    )

    series = add("series", "Laplace and Maclaurin series dumps")
    _add_geometry(series)
    _add_distribution(series)
    series.add_argument("--order", dest="series.order", type=int)
    series.add_argument("--x-max", dest="series.x_max", type=float)
    series.add_argument("--bins", dest="series.bins", type=int)
    series.add_argument("--density-trials", dest="series.trials", help="Monte Carlo draws for the density oracle")
    series.add_argument("--density-output", dest="density_output")
    series.add_argument("--raw", dest="series.conditional", action="store_false", help="no conditional sampling")

    moments = add("moments", "mean and variance of |H| per alignment category")
    _add_geometry(moments)
    _add_distribution(moments)
    _add_alignment(moments)
    moments.add_argument("--trials", dest="trials")

    budget = add("ma-budget", "NOMA/TDMA/FDMA minimum power budgets")
    _add_geometry(budget)
    budget.add_argument(
        "--scheme",
        dest="multi_access.scheme",
        choices=["noma_static", "tdma_static", "fdma_static", "noma_dynamic", "tdma_dynamic", "all"],
    )
    budget.add_argument("--sigma-sq", dest="multi_access.sigma_sq", type=float)
    budget.add_argument("--p-rad", dest="multi_access.p_rad", type=float)

    spacing = add("spacing", "angular spacing that transposes the NOMA decoding order")
    spacing.add_argument("--M", dest="spacing.M", type=int, nargs="+")
    spacing.add_argument("--dx", dest="geometry.dx", type=float)
    spacing.add_argument("--d-ratio", dest="spacing.d_ratio", type=float)
    spacing.add_argument("--beta", dest="spacing.beta", type=float)
    spacing.add_argument("--table", dest="spacing.table", action="store_true")

    return parser


def _nest(flags: dict[str, Any]) -> dict[str, Any]:
    """{'geometry.M': 5} -> {'geometry': {'M': 5}}"""
    nested: dict[str, Any] = {}
    for key, value in flags.items():
        node = nested
        *parents, leaf = key.split(".")
        for parent in parents:
            node = node.setdefault(parent, {})
        node[leaf] = value
    return nested


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point; returns the process exit code"""
    args = build_parser().parse_args(argv)
    flags = vars(args)
    config_path = flags.pop("config", None)
    handler = get_global_error_handler()
    try:
        base = load_config_file(config_path) if config_path else {}
        experiment = build_config(merge_overrides(base, _nest(flags)))
    except ConfigurationError as e:
        code = handler.handle_error(e)
        _report(e, code)
        return code

    logger.setup_logging(experiment.log_level, experiment.log_dir or logger.LOG_DIR)
    return run(experiment)


if __name__ == "__main__":
    sys.exit(main())
