"""
Fading Core Module
Branch amplitude distributions: densities, moments and reproducible sampling

Scale convention: Rayleigh(b) has pdf x/b * exp(-x^2/(2b)), so b is the variance
of each Gaussian quadrature component (b = sigma^2) and E[h^2] = 2b.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Any, NamedTuple

import numpy as np
import numpy.typing as npt
from scipy import stats
from scipy.special import i0e

from .error_handler import DomainError, UnsupportedOperationError
from .random_streams import RandomStream, as_generator
from .special import FloatOrArray, laguerre_half

Shape = int | tuple[int, ...]


class BranchKind(Enum):
    """Small-scale fading law of one branch"""

    RAYLEIGH = "rayleigh"
    RICIAN = "rician"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class BranchDistribution:
    """Per-element amplitude law |h_m|"""

    kind: BranchKind
    b: float = 1.0
    s: float = 0.0
    c: float = 0.0

    def __post_init__(self) -> None:
        if self.kind in (BranchKind.RAYLEIGH, BranchKind.RICIAN):
            if not self.b > 0:
                raise DomainError(f"scale b must be positive, got {self.b}")
            if self.s < 0:
                raise DomainError(f"specular amplitude s must be nonnegative, got {self.s}")
            if self.kind == BranchKind.RAYLEIGH and self.s != 0:
                raise DomainError("Rayleigh branches have no specular component")
        elif self.c < 0:
            raise DomainError(f"degenerate amplitude c must be nonnegative, got {self.c}")

    @classmethod
    def rayleigh(cls, b: float = 1.0) -> "BranchDistribution":
        return cls(BranchKind.RAYLEIGH, b=b)

    @classmethod
    def rician(cls, s: float, b: float) -> "BranchDistribution":
        return cls(BranchKind.RICIAN, b=b, s=s)

    @classmethod
    def degenerate(cls, c: float) -> "BranchDistribution":
        return cls(BranchKind.DEGENERATE, c=c)

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.b))

    @property
    def k_factor(self) -> float:
        """Rician K = s^2/(2b); zero for Rayleigh, infinite for a constant"""
        if self.kind == BranchKind.DEGENERATE:
            return float("inf")
        return self.s**2 / (2.0 * self.b)

    def to_dict(self) -> dict[str, Any]:
        if self.kind == BranchKind.RAYLEIGH:
            return {"kind": self.kind.value, "b": self.b}
        if self.kind == BranchKind.RICIAN:
            return {"kind": self.kind.value, "s": self.s, "b": self.b}
        return {"kind": self.kind.value, "c": self.c}


class Moments(NamedTuple):
    mean: float
    mean_square: float


def _check_nonnegative(x: FloatOrArray) -> npt.NDArray[np.float64]:
    values = np.asarray(x, dtype=float)
    if np.any(values < 0):
        raise DomainError("amplitude argument must be nonnegative")
    return values


def _unwrap(result: npt.NDArray[np.float64]) -> FloatOrArray:
    if result.ndim == 0:
        return float(result)
    return result


def _rice(dist: BranchDistribution) -> Any:
    return stats.rice(dist.s / dist.sigma, scale=dist.sigma)


def pdf(dist: BranchDistribution, x: FloatOrArray) -> FloatOrArray:
    """
    Density of |h| at x

    Args:
        dist: Branch distribution (Rayleigh or Rician)
        x: Nonnegative amplitude(s)

    Returns:
        Density value(s)
    """
    values = _check_nonnegative(x)
    if dist.kind == BranchKind.DEGENERATE:
        raise UnsupportedOperationError("a degenerate branch has no density")
    b = dist.b
    if dist.kind == BranchKind.RAYLEIGH:
        return _unwrap(values / b * np.exp(-(values**2) / (2.0 * b)))
    # x/b exp(-(x^2+s^2)/2b) I0(xs/b) with I0 scaled by exp(-xs/b)
    s = dist.s
    return _unwrap(values / b * np.exp(-((values - s) ** 2) / (2.0 * b)) * i0e(values * s / b))


def cdf(dist: BranchDistribution, x: FloatOrArray) -> FloatOrArray:
    """
    Probability Pr{|h| < x}

    For the degenerate branch the strict inequality matters: Pr{c < c} = 0.
    """
    values = _check_nonnegative(x)
    if dist.kind == BranchKind.DEGENERATE:
        return _unwrap((values > dist.c).astype(float))
    if dist.kind == BranchKind.RAYLEIGH:
        return _unwrap(-np.expm1(-(values**2) / (2.0 * dist.b)))
    return _unwrap(np.asarray(_rice(dist).cdf(values), dtype=float))


def ppf(dist: BranchDistribution, p: FloatOrArray) -> FloatOrArray:
    """Inverse of cdf on [0, 1)"""
    probs = np.asarray(p, dtype=float)
    if np.any((probs < 0) | (probs > 1)):
        raise DomainError("probabilities must lie in [0, 1]")
    if dist.kind == BranchKind.DEGENERATE:
        return _unwrap(np.full_like(probs, dist.c))
    if dist.kind == BranchKind.RAYLEIGH:
        return _unwrap(np.sqrt(-2.0 * dist.b * np.log1p(-probs)))
    return _unwrap(np.asarray(_rice(dist).ppf(probs), dtype=float))


def moments(dist: BranchDistribution) -> Moments:
    """Mean and mean square of |h|"""
    if dist.kind == BranchKind.DEGENERATE:
        return Moments(dist.c, dist.c**2)
    mean_rayleigh = float(np.sqrt(np.pi * dist.b / 2.0))
    if dist.kind == BranchKind.RAYLEIGH:
        return Moments(mean_rayleigh, 2.0 * dist.b)
    mean = mean_rayleigh * float(laguerre_half(-(dist.s**2) / (2.0 * dist.b)))
    return Moments(mean, dist.s**2 + 2.0 * dist.b)


def sample(dist: BranchDistribution, n: Shape, stream: RandomStream | np.random.Generator) -> npt.NDArray[np.float64]:
    """
    Draw i.i.d. amplitudes

    Rayleigh and Rician draws come from two Gaussian quadratures, the Rician one
    offset by s in phase.

    Args:
        dist: Branch distribution
        n: Count or array shape
        stream: RandomStream or an already positioned Generator

    Returns:
        Array of nonnegative amplitudes with shape n
    """
    gen = as_generator(stream)
    shape = (n,) if isinstance(n, int) else tuple(n)
    if dist.kind == BranchKind.DEGENERATE:
        return np.full(shape, dist.c, dtype=float)
    quadratures = gen.standard_normal((2, *shape))
    sigma = dist.sigma
    return np.hypot(dist.s + sigma * quadratures[0], sigma * quadratures[1])


def sample_truncated(
    dist: BranchDistribution, upper: float, n: Shape, stream: RandomStream | np.random.Generator
) -> npt.NDArray[np.float64]:
    """
    Draw amplitudes conditioned on |h| < upper by inverse-CDF sampling

    The conditioning probability is cdf(dist, upper); callers reweight by it.
    """
    gen = as_generator(stream)
    shape = (n,) if isinstance(n, int) else tuple(n)
    mass = float(cdf(dist, upper))
    if mass <= 0.0:
        raise DomainError(f"no probability mass below {upper}")
    return np.asarray(ppf(dist, gen.random(shape) * mass), dtype=float)
