"""
Laplace Series Module
Small-argument behaviour of the perfect-alignment channel through inverse-power series

The branch density's Maclaurin coefficients a_n give the Laplace transform
L_h(t) = sum c_{n+1} t^-(n+1) with c_{n+1} = n! a_n. The M-branch sum has
transform L_h^M, and inverting term by term gives the Maclaurin series of the
density of |H| = sum |h_m| near the origin.
"""

from dataclasses import dataclass, field
from typing import Any, NamedTuple

import mpmath
import numpy as np
import numpy.typing as npt
from scipy import optimize, special

from . import config, logger
from .error_handler import DomainError, EstimationError, TruncationError, UnsupportedOperationError
from .fading import BranchDistribution, BranchKind, cdf, sample, sample_truncated
from .outage import OutageCurve, Provenance, SnrGrid
from .random_streams import RandomStream
from .special import FloatOrArray
from .trial_runner import TrialRunner

# Above this value of b t^2 the closed form loses digits to cancellation
ASYMPTOTIC_SWITCH = 1e6


@dataclass(frozen=True)
class InversePowerSeries:
    """Truncated sum of c_n t^-n for n = 1..order; coefficients[0] is c_1"""

    coefficients: tuple[Any, ...]
    scale: dict[str, Any] = field(default_factory=dict)

    @property
    def order(self) -> int:
        return len(self.coefficients)

    def c(self, n: int) -> Any:
        if not 1 <= n <= self.order:
            raise DomainError(f"coefficient index {n} outside 1..{self.order}")
        return self.coefficients[n - 1]

    def as_floats(self) -> npt.NDArray[np.float64]:
        return np.array([float(c) for c in self.coefficients])

    def evaluate(self, t: float) -> float:
        with mpmath.workdps(config.SERIES_PRECISION_DPS):
            return float(mpmath.fsum(c * mpmath.mpf(t) ** (-n) for n, c in enumerate(self.coefficients, start=1)))


@dataclass(frozen=True)
class MaclaurinSeries:
    """Density near the origin, sum a_k x^k for k = 0..order-1, trusted on [0, x_max]"""

    coefficients: tuple[Any, ...]
    x_max: float
    scale: dict[str, Any] = field(default_factory=dict)

    @property
    def order(self) -> int:
        return len(self.coefficients)

    @property
    def leading_index(self) -> int:
        for k, a in enumerate(self.coefficients):
            if a != 0:
                return k
        raise DomainError("series has no nonzero coefficient")

    def as_floats(self) -> npt.NDArray[np.float64]:
        return np.array([float(a) for a in self.coefficients])

    def density(self, x: FloatOrArray) -> FloatOrArray:
        values = np.asarray(x, dtype=float)
        result = np.polynomial.polynomial.polyval(values, self.as_floats())
        return float(result) if np.ndim(result) == 0 else result

    def cdf(self, x: FloatOrArray) -> FloatOrArray:
        """Term-by-term integral of the density from 0 to x"""
        values = np.asarray(x, dtype=float)
        a = self.as_floats()
        integrated = np.concatenate(([0.0], a / np.arange(1, len(a) + 1)))
        result = np.polynomial.polynomial.polyval(values, integrated)
        return float(result) if np.ndim(result) == 0 else result


class SeriesOutage(NamedTuple):
    p_out: float
    extrapolated: bool


@dataclass
class DensityHistogram:
    """Monte Carlo density of sum |h_m| on [0, x_max]"""

    edges: npt.NDArray[np.float64]
    counts: npt.NDArray[np.int64]
    trials: int
    weight: float = 1.0

    @property
    def widths(self) -> npt.NDArray[np.float64]:
        return np.diff(self.edges)

    @property
    def centers(self) -> npt.NDArray[np.float64]:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def density(self) -> npt.NDArray[np.float64]:
        return self.weight * self.counts / (self.trials * self.widths)

    @property
    def std_error(self) -> npt.NDArray[np.float64]:
        return self.weight * np.sqrt(self.counts) / (self.trials * self.widths)

    @property
    def empty(self) -> bool:
        return int(self.counts.sum()) == 0


def laplace_rayleigh(t: FloatOrArray, b: float) -> FloatOrArray:
    """
    Laplace transform of the Rayleigh(b) density

    1 - sqrt(pi b / 2) t erfcx(t sqrt(b/2)), with the asymptotic series
    1/(bt^2) - 3/(bt^2)^2 + 15/(bt^2)^3 - 105/(bt^2)^4 where cancellation sets in.
    """
    values = np.asarray(t, dtype=float)
    if np.any(values < 0):
        raise DomainError("Laplace variable must be nonnegative")
    if not b > 0:
        raise DomainError(f"scale b must be positive, got {b}")
    z = b * values**2
    with np.errstate(divide="ignore", invalid="ignore"):
        closed = 1.0 - np.sqrt(np.pi * b / 2.0) * values * special.erfcx(values * np.sqrt(b / 2.0))
        inv = np.where(z > 0, 1.0 / z, 0.0)
        asymptotic = inv - 3.0 * inv**2 + 15.0 * inv**3 - 105.0 * inv**4
    result = np.where(z > ASYMPTOTIC_SWITCH, asymptotic, closed)
    return float(result) if result.ndim == 0 else result


def _rayleigh_density_coefficients(b: Any, count: int) -> list[Any]:
    a = [mpmath.mpf(0)] * count
    for k in range((count + 1) // 2):
        n = 2 * k + 1
        if n < count:
            a[n] = (-1) ** k / (b ** (k + 1) * mpmath.mpf(2) ** k * mpmath.factorial(k))
    return a


def _rician_density_coefficients(s: Any, b: Any, count: int) -> list[Any]:
    a = [mpmath.mpf(0)] * count
    front = mpmath.exp(-(s**2) / (2 * b)) / b
    ratio = s / (2 * b)
    for k in range((count + 1) // 2):
        n = 2 * k + 1
        if n >= count:
            break
        total = mpmath.mpf(0)
        for i in range(k + 1):
            j = k - i
            total += (-1) ** i / ((2 * b) ** i * mpmath.factorial(i)) * ratio ** (2 * j) / mpmath.factorial(j) ** 2
        a[n] = front * total
    return a


def branch_series(dist: BranchDistribution, order: int) -> InversePowerSeries:
    """
    Inverse-power series of one branch's Laplace transform, c_1..c_order

    Args:
        dist: Rayleigh or Rician branch law
        order: Truncation order N >= 2

    Returns:
        InversePowerSeries with c_{n+1} = n! a_n
    """
    if order < 2:
        raise DomainError(f"series order must be >= 2, got {order}")
    if dist.kind == BranchKind.DEGENERATE:
        raise UnsupportedOperationError("a degenerate branch has no density series")
    with mpmath.workdps(config.SERIES_PRECISION_DPS):
        b = mpmath.mpf(dist.b)
        if dist.kind == BranchKind.RAYLEIGH:
            a = _rayleigh_density_coefficients(b, order)
        else:
            a = _rician_density_coefficients(mpmath.mpf(dist.s), b, order)
        coefficients = tuple(mpmath.factorial(n) * a[n] for n in range(order))
    return InversePowerSeries(coefficients, scale=dist.to_dict())


def raise_to_power_m(series: InversePowerSeries, M: int, order: int) -> InversePowerSeries:
    """
    Truncated M-th power of an inverse-power series (the M-fold convolution)

    Every factor starts at t^-2, so c_n of the power needs input terms up to
    n - 2(M - 1).
    """
    if M < 1:
        raise DomainError(f"need at least one branch, got M={M}")
    if order < 2 * M:
        raise TruncationError(f"order {order} < 2M = {2 * M}: no term of the power is representable")
    needed = order - 2 * (M - 1)
    if series.order < needed:
        raise TruncationError(f"input series has {series.order} terms, {needed} needed for order {order}")

    with mpmath.workdps(config.SERIES_PRECISION_DPS):
        # polynomial in y = 1/t; index = power of y
        base = [mpmath.mpf(0)] + [mpmath.mpf(c) for c in series.coefficients[:needed]]
        base = base + [mpmath.mpf(0)] * (order + 1 - len(base))
        result = base[: order + 1]
        for _ in range(M - 1):
            product = [mpmath.mpf(0)] * (order + 1)
            for i, left in enumerate(result):
                if left == 0:
                    continue
                for j in range(order + 1 - i):
                    if base[j] != 0:
                        product[i + j] += left * base[j]
            result = product
    return InversePowerSeries(tuple(result[1:]), scale={**series.scale, "M": M})


def series_for_sum(dist: BranchDistribution, M: int, order: int | None = None) -> InversePowerSeries:
    """Transform series of sum |h_m| over M branches, default truncation 2M + 8"""
    order = order or 2 * M + config.SERIES_EXTRA_TERMS
    return raise_to_power_m(branch_series(dist, max(2, order - 2 * (M - 1))), M, order)


def _validity_radius(a: npt.NDArray[np.float64]) -> float:
    """Where the last retained term reaches 10% of the sum of the lower ones"""
    nonzero = np.flatnonzero(a)
    if nonzero.size < 2:
        return float("inf")
    last = int(nonzero[-1])
    lower = a.copy()
    lower[last] = 0.0

    def excess(x: float) -> float:
        tail = abs(a[last] * x**last)
        body = abs(np.polynomial.polynomial.polyval(x, lower))
        return float(tail - config.VALIDITY_RATIO * body)

    grid = np.geomspace(1e-6, 1e6, 241)
    previous = grid[0]
    if excess(previous) >= 0:
        return float(previous)
    for x in grid[1:]:
        if excess(x) >= 0:
            return float(optimize.brentq(excess, previous, x, xtol=1e-14, rtol=1e-12))
        previous = x
    return float("inf")


def invert_termwise(series: InversePowerSeries) -> MaclaurinSeries:
    """
    Term-by-term inverse Laplace transform, a_k = c_{k+1} / k!

    The density transform must vanish at infinity, so c_1 = 0.
    """
    if series.coefficients and series.coefficients[0] != 0:
        raise DomainError("c_1 must vanish for a density transform")
    with mpmath.workdps(config.SERIES_PRECISION_DPS):
        coefficients = tuple(mpmath.mpf(c) / mpmath.factorial(k) for k, c in enumerate(series.coefficients[1:]))
    maclaurin = MaclaurinSeries(coefficients, x_max=0.0, scale=dict(series.scale))
    x_max = _validity_radius(maclaurin.as_floats())
    logger.logger.debug(f"Maclaurin series with {len(coefficients)} terms valid up to x={x_max:.4g}")
    return MaclaurinSeries(coefficients, x_max=x_max, scale=dict(series.scale))


def outage_from_maclaurin(series: MaclaurinSeries, x_star: float, leading_only: bool = False) -> SeriesOutage:
    """
    Outage Pr{|H| < x*} by integrating the Maclaurin series term by term

    Args:
        series: Density series near the origin
        x_star: Amplitude threshold sqrt(gamma_0/gamma_t)
        leading_only: Keep only the first nonzero term (the high-SNR asymptote)

    Returns:
        SeriesOutage with an extrapolated flag when x* lies beyond x_max
    """
    if x_star < 0:
        raise DomainError("threshold must be nonnegative")
    with mpmath.workdps(config.SERIES_PRECISION_DPS):
        x = mpmath.mpf(x_star)
        terms = [(k, a) for k, a in enumerate(series.coefficients) if a != 0]
        if leading_only:
            terms = terms[:1]
        value = mpmath.fsum(a * x ** (k + 1) / (k + 1) for k, a in terms)
    extrapolated = x_star > series.x_max
    if extrapolated:
        logger.logger.warning(f"Series outage at x*={x_star:.4g} beyond validity radius {series.x_max:.4g}")
    return SeriesOutage(float(value), extrapolated)


def rician_series_curve(M: int, dist: BranchDistribution, grid: SnrGrid, order: int | None = None) -> OutageCurve:
    """Series outage curve of M perfectly aligned branches"""
    maclaurin = invert_termwise(series_for_sum(dist, M, order))
    values = np.array([outage_from_maclaurin(maclaurin, float(x)).p_out for x in grid.x_star])
    return OutageCurve(grid, np.maximum(values, 0.0), Provenance.ASYMPTOTIC, label=f"series M={M}")


def mc_density_near_origin(
    dist: BranchDistribution,
    M: int,
    x_max: float,
    bins: int,
    trials: int,
    stream: RandomStream,
    conditional: bool = False,
    runner: TrialRunner | None = None,
) -> DensityHistogram:
    """
    Histogram density of sum |h_m| on [0, x_max]

    In conditional mode each branch is drawn below x_max and the histogram is
    reweighted by F(x_max)^M, which is exact because the sum can only land in
    range when every branch does.
    """
    if bins < 10:
        raise DomainError(f"need at least 10 bins, got {bins}")
    if not x_max > 0:
        raise DomainError("x_max must be positive")
    runner = runner or TrialRunner()
    edges = np.linspace(0.0, x_max, bins + 1)

    def task(n: int, gen: np.random.Generator) -> npt.NDArray[np.int64]:
        if conditional:
            amplitudes = sample_truncated(dist, x_max, (n, M), gen)
        else:
            amplitudes = sample(dist, (n, M), gen)
        return np.histogram(amplitudes.sum(axis=1), bins=edges)[0].astype(np.int64)

    counts = runner.run(trials, M, stream, task)
    weight = float(cdf(dist, x_max)) ** M if conditional else 1.0
    histogram = DensityHistogram(edges, counts, trials, weight)
    if histogram.empty:
        logger.logger.warning(f"No Monte Carlo draws landed in [0, {x_max}] for M={M}")
    return histogram


def series_bin_density(series: MaclaurinSeries, edges: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """Series density averaged over each histogram bin"""
    mass = np.asarray(series.cdf(edges), dtype=float)
    return np.diff(mass) / np.diff(edges)


def fit_density_exponent(histogram: DensityHistogram, min_count: int = 10, iterations: int = 8) -> tuple[float, float]:
    """
    Weighted log-log fit of density ~ x^p near the origin

    Bins with at least min_count hits enter with weight sqrt(count). Each bin is
    placed at the point where x^p equals its bin average, refined over a few
    iterations, so coarse bins do not bias p.

    Returns:
        (p, standard error)
    """
    usable = histogram.counts >= min_count
    if np.count_nonzero(usable) < 4:
        raise EstimationError(
            f"only {np.count_nonzero(usable)} bins with >= {min_count} hits, need 4",
            details={"counts": histogram.counts.tolist()},
        )
    low = histogram.edges[:-1][usable]
    high = histogram.edges[1:][usable]
    log_density = np.log(histogram.density[usable])
    weights = np.sqrt(histogram.counts[usable].astype(float))

    positions = 0.5 * (low + high)
    exponent, stderr = 0.0, float("inf")
    for _ in range(iterations):
        coefficients, covariance = np.polyfit(np.log(positions), log_density, 1, w=weights, cov="unscaled")
        exponent, stderr = float(coefficients[0]), float(np.sqrt(covariance[0, 0]))
        if exponent <= 0:
            break
        p = exponent
        average = (high ** (p + 1) - low ** (p + 1)) / ((p + 1) * (high - low))
        positions = average ** (1.0 / p)
    return exponent, stderr


def leading_maclaurin_term(dist: BranchDistribution, M: int) -> tuple[float, int]:
    """(a, k) of the first nonzero density term a x^k of the M-branch sum"""
    maclaurin = invert_termwise(series_for_sum(dist, M))
    k = maclaurin.leading_index
    return float(maclaurin.coefficients[k]), k
