"""
Outage Analysis Module
Monte Carlo and analytic outage probability, the coherent bound and diversity order

Outage is the event |H| < x* with x* = sqrt(gamma_0 / gamma_t), where gamma_t is
the per-branch average SNR and gamma_0 the target SNR.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np
import numpy.typing as npt
from scipy import special, stats

from . import config, logger
from .alignment import AlignmentKind, AlignmentModel, draw_magnitudes
from .error_handler import DomainError, EstimationError, UnsupportedOperationError
from .fading import BranchDistribution, BranchKind, cdf, moments, ppf
from .random_streams import RandomStream
from .special import FloatOrArray
from .trial_runner import TrialRunner

# Below this branch count the random-alignment Rayleigh approximation is rough
CLT_MIN_BRANCHES = 4


class Provenance(Enum):
    """Where an outage curve's values come from"""

    MONTE_CARLO = "monte_carlo"
    ANALYTIC = "analytic"
    ASYMPTOTIC = "asymptotic"
    BOUND = "bound"


@dataclass(frozen=True)
class SnrGrid:
    """Per-branch SNR grid in dB and the linear target SNR gamma_0"""

    gamma_t_db: tuple[float, ...]
    gamma_0: float = 1.0

    def __post_init__(self) -> None:
        values = np.asarray(self.gamma_t_db, dtype=float)
        if values.size < 1:
            raise DomainError("SNR grid is empty")
        if np.any(np.diff(values) <= 0):
            raise DomainError("SNR grid must be strictly increasing")
        if not self.gamma_0 > 0:
            raise DomainError(f"gamma_0 must be positive, got {self.gamma_0}")
        object.__setattr__(self, "gamma_t_db", tuple(float(v) for v in values))

    @classmethod
    def from_range(cls, start_db: float, stop_db: float, step_db: float, gamma_0: float = 1.0) -> "SnrGrid":
        count = int(round((stop_db - start_db) / step_db)) + 1
        return cls(tuple(start_db + i * step_db for i in range(count)), gamma_0)

    @property
    def db(self) -> npt.NDArray[np.float64]:
        return np.asarray(self.gamma_t_db)

    @property
    def gamma_t(self) -> npt.NDArray[np.float64]:
        return 10.0 ** (self.db / 10.0)

    @property
    def x_star(self) -> npt.NDArray[np.float64]:
        return np.sqrt(self.gamma_0 / self.gamma_t)


@dataclass
class OutageCurve:
    """
    Outage probability per grid point

    Asymptotic values are kept raw and may exceed 1 at low SNR; p_out_clamped is
    the min(p, 1) companion.
    """

    grid: SnrGrid
    p_out: npt.NDArray[np.float64]
    provenance: Provenance
    ci_low: npt.NDArray[np.float64] = field(default_factory=lambda: np.zeros(0))
    ci_high: npt.NDArray[np.float64] = field(default_factory=lambda: np.zeros(0))
    trials: npt.NDArray[np.int64] = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    hits: npt.NDArray[np.int64] | None = None
    label: str = ""
    guaranteed: bool = True

    def __post_init__(self) -> None:
        self.p_out = np.asarray(self.p_out, dtype=float)
        n = len(self.grid.gamma_t_db)
        if self.p_out.shape != (n,):
            raise DomainError(f"expected {n} outage values, got shape {self.p_out.shape}")
        if np.any(self.p_out < 0):
            raise DomainError("outage probabilities must be nonnegative")
        if self.ci_low.size == 0:
            self.ci_low = self.p_out.copy()
        if self.ci_high.size == 0:
            self.ci_high = self.p_out.copy()
        if self.trials.size == 0:
            self.trials = np.zeros(n, dtype=np.int64)

    @property
    def p_out_clamped(self) -> npt.NDArray[np.float64]:
        return np.minimum(self.p_out, 1.0)

    @property
    def ci_half_width(self) -> npt.NDArray[np.float64]:
        return (self.ci_high - self.ci_low) / 2.0

    @property
    def low_confidence(self) -> npt.NDArray[np.bool_]:
        if self.hits is None:
            return np.zeros(len(self.p_out), dtype=bool)
        return self.hits < config.LOW_CONFIDENCE_HITS


class BoundResult(NamedTuple):
    p_out: FloatOrArray
    guaranteed: bool


class LeadingTerm(NamedTuple):
    """Leading Laplace-transform term coefficient * t^(-exponent) of the M-branch sum"""

    coefficient: float
    exponent: int

    @property
    def branches(self) -> int:
        return self.exponent // 2

    @property
    def pdf_coefficient(self) -> float:
        """Coefficient of x^(2M-1) in the small-x density"""
        return self.coefficient / math.factorial(self.exponent - 1)

    @property
    def outage_coefficient(self) -> float:
        """Coefficient of (gamma_0/gamma_t)^M in the high-SNR outage"""
        return self.coefficient / math.factorial(self.exponent)

    def outage(self, gamma_0: float, gamma_t: FloatOrArray) -> FloatOrArray:
        ratio = gamma_0 / np.asarray(gamma_t, dtype=float)
        return _unwrap(self.outage_coefficient * ratio**self.branches)


class DiversityEstimate(NamedTuple):
    order: float
    stderr: float
    points: int


def _unwrap(values: npt.NDArray[np.float64]) -> FloatOrArray:
    if values.ndim == 0:
        return float(values)
    return values


def wilson_interval(hits: int, trials: int, level: float = config.CONFIDENCE_LEVEL) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion"""
    interval = stats.binomtest(int(hits), int(trials)).proportion_ci(confidence_level=level, method="wilson")
    return float(interval.low), float(interval.high)


def _curve_from_counts(
    grid: SnrGrid,
    hits: npt.NDArray[np.int64],
    trials: int,
    scale: npt.NDArray[np.float64],
    label: str,
    guaranteed: bool,
) -> OutageCurve:
    intervals = np.array([wilson_interval(int(k), trials) for k in hits])
    curve = OutageCurve(
        grid=grid,
        p_out=scale * hits / trials,
        provenance=Provenance.MONTE_CARLO,
        ci_low=scale * intervals[:, 0],
        ci_high=scale * intervals[:, 1],
        trials=np.full(len(hits), trials, dtype=np.int64),
        hits=np.asarray(hits, dtype=np.int64),
        label=label,
        guaranteed=guaranteed,
    )
    low = np.flatnonzero(curve.low_confidence)
    if low.size:
        points = ", ".join(f"{grid.gamma_t_db[i]:g} dB" for i in low)
        logger.logger.warning(f"Low-confidence outage estimate (< {config.LOW_CONFIDENCE_HITS} events) at {points}")
    return curve


def mc_outage_curve(
    model: AlignmentModel,
    dist: BranchDistribution,
    M: int,
    grid: SnrGrid,
    trials: int,
    stream: RandomStream,
    runner: TrialRunner | None = None,
    conditional: bool = False,
) -> OutageCurve:
    """
    Monte Carlo outage curve

    One |H| draw is tested against every threshold of the grid (common random
    numbers), which makes the curve exactly nonincreasing.

    Args:
        model: Alignment category
        dist: Branch amplitude law
        M: Number of branches
        grid: SNR grid
        trials: Number of channel draws
        stream: Random stream
        runner: Trial runner (a default one is created when omitted)
        conditional: Rare-event mode for perfect alignment, see mc_outage_conditional

    Returns:
        OutageCurve with Wilson 95% intervals
    """
    if conditional:
        if model.kind != AlignmentKind.PERFECT or model.has_offsets:
            raise UnsupportedOperationError("conditional sampling is defined for perfect alignment without offsets")
        return mc_outage_conditional(dist, M, grid, trials, stream, runner)
    runner = runner or TrialRunner()
    thresholds = grid.x_star

    def task(n: int, gen: np.random.Generator) -> npt.NDArray[np.int64]:
        magnitudes = np.sort(draw_magnitudes(model, dist, M, n, gen))
        return np.searchsorted(magnitudes, thresholds, side="left").astype(np.int64)

    hits = runner.run(trials, M, stream, task)
    logger.logger.info(f"MC outage {model.kind.value} M={M}: {int(hits.max())} max events over {trials} trials")
    return _curve_from_counts(
        grid, hits, trials, np.ones(len(hits)), f"{model.kind.value} M={M}", model.satisfies_bound_condition()
    )


def mc_outage_conditional(
    dist: BranchDistribution,
    M: int,
    grid: SnrGrid,
    trials: int,
    stream: RandomStream,
    runner: TrialRunner | None = None,
) -> OutageCurve:
    """
    Rare-event outage estimator for perfect alignment

    Sum |h_m| < x* forces every |h_m| < x*, so each branch is drawn from its law
    truncated to [0, x*) and the hit fraction q is reweighted by F(x*)^M.
    Uniforms are shared across grid points.
    """
    if dist.kind == BranchKind.DEGENERATE:
        raise UnsupportedOperationError("conditional sampling needs a continuous branch law")
    runner = runner or TrialRunner()
    thresholds = grid.x_star
    masses = np.asarray(cdf(dist, thresholds), dtype=float)

    def task(n: int, gen: np.random.Generator) -> npt.NDArray[np.int64]:
        uniforms = gen.random((n, M))
        counts = np.empty(len(thresholds), dtype=np.int64)
        for j, (x_star, mass) in enumerate(zip(thresholds, masses, strict=True)):
            sums = np.asarray(ppf(dist, uniforms * mass), dtype=float).sum(axis=1)
            counts[j] = np.count_nonzero(sums < x_star)
        return counts

    hits = runner.run(trials, M, stream, task)
    return _curve_from_counts(grid, hits, trials, masses**M, f"perfect M={M} (conditional)", True)


def analytic_outage_perfect_asymptotic(M: int, b: float, gamma_0: float, gamma_t: FloatOrArray) -> FloatOrArray:
    """
    High-SNR outage of M perfectly aligned Rayleigh(b) branches

    b^-M gamma_0^M / (2M)! * gamma_t^-M, returned raw (may exceed 1 at low SNR).
    """
    if M < 1 or not b > 0 or not gamma_0 > 0:
        raise DomainError("need M >= 1, b > 0 and gamma_0 > 0")
    gamma_t = np.asarray(gamma_t, dtype=float)
    log_p = M * (np.log(gamma_0) - np.log(b) - np.log(gamma_t)) - special.gammaln(2 * M + 1)
    return _unwrap(np.exp(log_p))


def perfect_asymptotic_intercept(M: int, b: float, gamma_0: float) -> float:
    """Intercept p0 of log10 P_out = p0 - M log10 gamma_t"""
    return float(M * (np.log10(gamma_0) - np.log10(b)) - special.gammaln(2 * M + 1) / np.log(10.0))


def analytic_outage_random(M: int, dist: BranchDistribution, gamma_0: float, gamma_t: FloatOrArray) -> FloatOrArray:
    """
    Random-alignment outage, 1 - exp(-gamma_0 / (Omega_p gamma_t)) with Omega_p = M h2

    |H| is treated as Rayleigh by the central limit theorem.
    """
    if M < 1:
        raise DomainError(f"need at least one branch, got M={M}")
    if M < CLT_MIN_BRANCHES:
        logger.logger.warning(f"Random-alignment closed form with M={M} < {CLT_MIN_BRANCHES} is a rough approximation")
    omega = M * moments(dist).mean_square
    gamma_t = np.asarray(gamma_t, dtype=float)
    return _unwrap(-np.expm1(-gamma_0 / (omega * gamma_t)))


def coherent_upper_bound(
    M: int,
    dist: BranchDistribution,
    gamma_0: float,
    gamma_t: FloatOrArray,
    model: AlignmentModel | None = None,
) -> BoundResult:
    """
    Outage bound F(x*)^M for coherent alignment

    The bound holds when all pairwise branch phase differences stay within pi/2;
    guaranteed is False when the given model can violate that.
    """
    if M < 1:
        raise DomainError(f"need at least one branch, got M={M}")
    x_star = np.sqrt(gamma_0 / np.asarray(gamma_t, dtype=float))
    guaranteed = True if model is None else model.satisfies_bound_condition()
    if not guaranteed:
        assert model is not None
        logger.logger.warning(f"Coherent bound not guaranteed: phase spread {model.phase_spread:.4f} rad > pi/2")
    value = np.asarray(cdf(dist, x_star), dtype=float) ** M
    return BoundResult(_unwrap(value), guaranteed)


def rician_leading_coefficient(M: int, s: float, b: float) -> LeadingTerm:
    """
    Leading term e^(-M s^2/2b) (2b)^-M t^(-2M) of the perfect-alignment Rician transform

    This coefficient is 2^-M times the one the branch Maclaurin series gives,
    e^(-M s^2/2b) b^-M (see laplace_series.series_for_sum).
    """
    if M < 1 or not b > 0 or s < 0:
        raise DomainError("need M >= 1, b > 0 and s >= 0")
    coefficient = math.exp(-M * s**2 / (2.0 * b)) * (2.0 * b) ** (-M)
    return LeadingTerm(coefficient, 2 * M)


def estimate_diversity_order(curve: OutageCurve) -> DiversityEstimate:
    """
    Negative log-log slope of the outage curve at high SNR

    Fits log10 p_out against log10 gamma_t over the highest-SNR contiguous run of
    points with p_out > 0 and relative CI half-width below 30%, cut to its top
    decade of SNR (never fewer than MIN_FIT_POINTS points).
    """
    p = curve.p_out
    with np.errstate(divide="ignore", invalid="ignore"):
        relative = np.where(p > 0, curve.ci_half_width / p, np.inf)
    usable = (p > 0) & (relative < config.RELATIVE_CI_LIMIT)

    end = len(p)
    while end > 0 and not usable[end - 1]:
        end -= 1
    start = end
    while start > 0 and usable[start - 1]:
        start -= 1

    count = end - start
    if count < config.MIN_FIT_POINTS:
        raise EstimationError(
            f"only {count} usable high-SNR points, need {config.MIN_FIT_POINTS}",
            details={"usable": usable.tolist(), "p_out": p.tolist()},
        )
    db = curve.grid.db
    top_decade = start + int(np.searchsorted(db[start:end], db[end - 1] - config.FIT_SPAN_DB))
    start = min(top_decade, end - config.MIN_FIT_POINTS)
    count = end - start
    x = curve.grid.db[start:end] / 10.0
    y = np.log10(p[start:end])
    if np.all(y == y[0]):
        return DiversityEstimate(0.0, 0.0, count)
    fit = stats.linregress(x, y)
    return DiversityEstimate(float(-fit.slope), float(fit.stderr), count)


def perfect_asymptotic_curve(M: int, b: float, grid: SnrGrid) -> OutageCurve:
    values = np.asarray(analytic_outage_perfect_asymptotic(M, b, grid.gamma_0, grid.gamma_t))
    return OutageCurve(grid, values, Provenance.ASYMPTOTIC, label=f"perfect asymptote M={M}")


def random_closed_form_curve(M: int, dist: BranchDistribution, grid: SnrGrid) -> OutageCurve:
    values = np.asarray(analytic_outage_random(M, dist, grid.gamma_0, grid.gamma_t))
    return OutageCurve(grid, values, Provenance.ANALYTIC, label=f"random closed form M={M}")


def coherent_bound_curve(
    M: int, dist: BranchDistribution, grid: SnrGrid, model: AlignmentModel | None = None
) -> OutageCurve:
    bound = coherent_upper_bound(M, dist, grid.gamma_0, grid.gamma_t, model)
    return OutageCurve(
        grid, np.asarray(bound.p_out), Provenance.BOUND, label=f"coherent bound M={M}", guaranteed=bound.guaranteed
    )


def exact_single_branch_curve(dist: BranchDistribution, grid: SnrGrid) -> OutageCurve:
    """Exact outage of one branch, the M = 1 reference for every category but random"""
    values = np.asarray(cdf(dist, grid.x_star), dtype=float)
    return OutageCurve(grid, values, Provenance.ANALYTIC, label="single branch")


def reference_curves(model: AlignmentModel, dist: BranchDistribution, M: int, grid: SnrGrid) -> list[OutageCurve]:
    """Analytic companions of a Monte Carlo curve for the given category"""
    from .laplace_series import rician_series_curve

    if model.kind == AlignmentKind.DESTRUCTIVE:
        return [OutageCurve(grid, np.ones(len(grid.gamma_t_db)), Provenance.ANALYTIC, label="destructive")]
    if model.kind == AlignmentKind.RANDOM:
        return [random_closed_form_curve(M, dist, grid)]
    if dist.kind == BranchKind.DEGENERATE:
        return []
    curves = []
    if model.kind == AlignmentKind.PERFECT and not model.has_offsets:
        if dist.kind == BranchKind.RAYLEIGH:
            curves.append(perfect_asymptotic_curve(M, dist.b, grid))
        else:
            curves.append(rician_series_curve(M, dist, grid))
    curves.append(coherent_bound_curve(M, dist, grid, model))
    return curves
