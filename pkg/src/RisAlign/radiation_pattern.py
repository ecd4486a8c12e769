"""
Radiation Pattern Module
1-D phase scanning, array factor, full-diversity beamwidth, Woodward synthesis
and the element path-loss budget

Directions are sines u = sin(theta); pitch d is the element spacing over the
wavelength; elements are indexed m = 1..M.
"""

from collections.abc import Callable
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
import numpy.typing as npt

from . import config, logger
from .alignment import AlignmentKind
from .error_handler import DomainError, UnsupportedOperationError
from .special import FloatOrArray

SINGULARITY_TOLERANCE = 1e-9


class PhaseShift(Enum):
    CONTINUOUS = "continuous"
    DISCRETE = "discrete"


class ChannelKnowledge(Enum):
    PERFECT = "perfect"
    PARTIAL = "partial"
    NONE = "none"


@dataclass(frozen=True)
class RisGeometry:
    """Element count M, pitch d = dx/lambda and scan direction u0"""

    M: int
    dx_over_lambda: float = 0.5
    u0: float = 0.0

    def __post_init__(self) -> None:
        if self.M < 1:
            raise DomainError(f"need at least one element, got M={self.M}")
        if not self.dx_over_lambda > 0:
            raise DomainError(f"element pitch must be positive, got {self.dx_over_lambda}")
        if abs(self.u0) > 1:
            raise DomainError(f"scan direction sine must satisfy |u0| <= 1, got {self.u0}")

    @property
    def indices(self) -> npt.NDArray[np.float64]:
        return np.arange(1, self.M + 1, dtype=float)

    def steered(self, u0: float) -> "RisGeometry":
        return RisGeometry(self.M, self.dx_over_lambda, u0)


@dataclass(frozen=True)
class LinkBudget:
    """Element size, link distances (meters), element directivity and antenna gains"""

    px: float
    py: float
    d1: float
    d2: float
    directivity: float = 1.0
    gt: float = 1.0
    gr: float = 1.0

    def __post_init__(self) -> None:
        for name in ("px", "py", "d1", "d2", "directivity", "gt", "gr"):
            if not getattr(self, name) > 0:
                raise DomainError(f"link budget field {name} must be positive")


@dataclass(frozen=True)
class WoodwardConfig:
    """Beam weights alpha_i on the orthogonal grid u_i = i / (M d)"""

    indices: tuple[int, ...]
    weights: tuple[complex, ...]

    def __post_init__(self) -> None:
        if len(self.indices) != len(self.weights):
            raise DomainError("one weight per beam index")
        if len(set(self.indices)) != len(self.indices):
            raise DomainError("beam indices must be distinct")

    def directions(self, geom: RisGeometry) -> npt.NDArray[np.float64]:
        return np.asarray(self.indices, dtype=float) / (geom.M * geom.dx_over_lambda)


class Beamwidth(NamedTuple):
    exact: float
    approximate: float
    limited: bool

    @property
    def exact_deg(self) -> float:
        return float(np.degrees(self.exact))


class WoodwardSynthesis(NamedTuple):
    coefficients: npt.NDArray[np.complex128]
    pattern: Callable[[FloatOrArray], npt.NDArray[np.complex128]]
    directions: npt.NDArray[np.float64]


class PatternTable(NamedTuple):
    u: npt.NDArray[np.float64]
    f_linear: npt.NDArray[np.float64]
    f_db: npt.NDArray[np.float64]


def _check_direction(u: FloatOrArray) -> npt.NDArray[np.float64]:
    values = np.asarray(u, dtype=float)
    if np.any(np.abs(values) > 1 + 1e-12):
        raise DomainError("direction sines must satisfy |u| <= 1")
    return values


def scan_coefficients(geom: RisGeometry) -> npt.NDArray[np.complex128]:
    """Unit-modulus scan coefficients r_m = exp(2 pi j u0 d m)"""
    return np.exp(2j * np.pi * geom.u0 * geom.dx_over_lambda * geom.indices)


def array_factor(geom: RisGeometry, u: FloatOrArray) -> FloatOrArray:
    """
    Normalized array factor sin(M pi d (u-u0)) / (M sin(pi d (u-u0)))

    Near the removable singularities (peak and grating lobes) a second-order
    expansion is used.
    """
    values = _check_direction(u)
    M = geom.M
    delta = np.pi * geom.dx_over_lambda * (values - geom.u0)
    denominator = M * np.sin(delta)
    singular = np.abs(np.sin(delta)) < SINGULARITY_TOLERANCE

    k = np.round(delta / np.pi)
    residual = delta - k * np.pi
    sign = np.where((k * (M - 1)) % 2 == 0, 1.0, -1.0)
    expansion = sign * (1.0 - (M**2 - 1) * residual**2 / 6.0)

    with np.errstate(divide="ignore", invalid="ignore"):
        result = np.where(singular, expansion, np.sin(M * delta) / denominator)
    return float(result) if result.ndim == 0 else result


def full_diversity_beamwidth(geom: RisGeometry) -> Beamwidth:
    """
    Half-width around the scan direction where the branch phase spread stays within pi/2

    M 2 pi d sin(theta) <= pi/2 gives theta = arcsin(1/(4 M d)); the linear
    form 0.25/(M d) is returned alongside. When 1/(4 M d) > 1 every direction
    qualifies and pi/2 is returned with limited set.
    """
    ratio = 1.0 / (4.0 * geom.M * geom.dx_over_lambda)
    if ratio > 1.0:
        logger.logger.warning(f"Aperture M={geom.M}, d={geom.dx_over_lambda} too small: beamwidth spans all directions")
        return Beamwidth(np.pi / 2, ratio, True)
    return Beamwidth(float(np.arcsin(ratio)), ratio, False)


def classify_alignment(phase_shift: PhaseShift | str, csi: ChannelKnowledge | str) -> AlignmentKind:
    """Alignment category from the phase-shift resolution and the available CSI"""
    phase_shift = PhaseShift(phase_shift)
    csi = ChannelKnowledge(csi)
    if csi == ChannelKnowledge.NONE:
        return AlignmentKind.RANDOM
    if phase_shift == PhaseShift.CONTINUOUS and csi == ChannelKnowledge.PERFECT:
        return AlignmentKind.PERFECT
    return AlignmentKind.COHERENT


def branch_phase_offsets(geom: RisGeometry, u: float) -> npt.NDArray[np.float64]:
    """Deterministic phase 2 pi m d (u - u0) of each branch toward direction u"""
    _check_direction(u)
    return 2.0 * np.pi * geom.indices * geom.dx_over_lambda * (u - geom.u0)


def offset_spread(geom: RisGeometry, u: float) -> float:
    """Nominal phase spread M 2 pi d |u - u0| used by the beamwidth condition"""
    _check_direction(u)
    return float(geom.M * 2.0 * np.pi * geom.dx_over_lambda * abs(u - geom.u0))


def woodward_coefficients(geom: RisGeometry, woodward: WoodwardConfig) -> WoodwardSynthesis:
    """
    Woodward synthesis on the orthogonal beam grid

    c'_m = sum_i alpha_i exp(2 pi j u_i d m); the pattern is summed element by
    element, (1/M) sum_m c'_m exp(-2 pi j u d m), so it equals alpha_j at u_j.
    Coefficient magnitudes are not unit, the surface needs amplitude control.
    """
    if geom.M % 2 == 0:
        raise UnsupportedOperationError(f"the orthogonal beam grid is defined for odd M, got M={geom.M}")
    directions = woodward.directions(geom)
    if np.any(np.abs(directions) > 1 + 1e-12):
        raise DomainError("every retained beam direction must satisfy |u_i| <= 1")

    d = geom.dx_over_lambda
    m = geom.indices
    weights = np.asarray(woodward.weights, dtype=complex)
    coefficients = np.exp(2j * np.pi * d * np.outer(m, directions)) @ weights

    def pattern(u: FloatOrArray) -> npt.NDArray[np.complex128]:
        values = np.atleast_1d(_check_direction(u))
        steering = np.exp(-2j * np.pi * d * np.outer(values, m))
        return np.asarray(steering @ coefficients / geom.M)

    return WoodwardSynthesis(coefficients, pattern, directions)


def woodward_flat_band(geom: RisGeometry, u_low: float, u_high: float) -> WoodwardConfig:
    """
    Flat-top beam over [u_low, u_high] from equal-magnitude grid beams

    Each weight cancels the beam phase exp(j pi (M+1) i / M) that indexing
    elements from 1 introduces, so neighbouring beams add in phase.
    """
    if geom.M % 2 == 0:
        raise UnsupportedOperationError(f"the orthogonal beam grid is defined for odd M, got M={geom.M}")
    step = 1.0 / (geom.M * geom.dx_over_lambda)
    lowest = int(np.ceil(max(u_low, -1.0) / step - 1e-12))
    highest = int(np.floor(min(u_high, 1.0) / step + 1e-12))
    indices = tuple(range(lowest, highest + 1))
    if not indices:
        raise DomainError(f"no grid beam falls inside [{u_low}, {u_high}]")
    weights = tuple(complex(np.exp(-1j * np.pi * (geom.M + 1) * i / geom.M)) for i in indices)
    return WoodwardConfig(indices, weights)


def pattern_grid(points: int = config.PATTERN_POINTS) -> npt.NDArray[np.float64]:
    """Uniform grid on [-1, 1) with step 2/points"""
    return np.linspace(-1.0, 1.0, points, endpoint=False)


def to_db(magnitude: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    with np.errstate(divide="ignore"):
        levels = 20.0 * np.log10(np.abs(magnitude))
    return np.maximum(levels, config.PATTERN_FLOOR_DB)


def pattern_table(geom: RisGeometry, points: int = config.PATTERN_POINTS) -> PatternTable:
    u = pattern_grid(points)
    f = np.asarray(array_factor(geom, u))
    return PatternTable(u, f, to_db(f))


def woodward_pattern_table(synthesis: WoodwardSynthesis, points: int = config.PATTERN_POINTS) -> PatternTable:
    u = pattern_grid(points)
    f = np.abs(synthesis.pattern(u))
    return PatternTable(u, f, to_db(f))


def beamwidth_3db_deg(u: npt.NDArray[np.float64], magnitude: npt.NDArray[np.float64]) -> float:
    """Width in degrees of the contiguous region around the peak within 3 dB of it"""
    power = np.abs(magnitude) ** 2
    peak = int(np.argmax(power))
    half = power[peak] / 2.0
    low = peak
    while low > 0 and power[low - 1] >= half:
        low -= 1
    high = peak
    while high < len(power) - 1 and power[high + 1] >= half:
        high += 1

    def crossing(inside: int, outside: int) -> float:
        if outside < 0 or outside >= len(power):
            return float(u[inside])
        fraction = (power[inside] - half) / (power[inside] - power[outside])
        return float(u[inside] + fraction * (u[outside] - u[inside]))

    u_low = crossing(low, low - 1)
    u_high = crossing(high, high + 1)
    return float(np.degrees(np.arcsin(np.clip(u_high, -1, 1)) - np.arcsin(np.clip(u_low, -1, 1))))


def path_loss_and_array_gain(budget: LinkBudget, M: int) -> tuple[float, float]:
    """
    Per-element path loss and the coherent-combining SNR multiplier

    PL = px^2 py^2 / (16 pi^2 d1^2 d2^2) D^2 Gt Gr; the multiplier is M^2 PL.
    """
    if M < 1:
        raise DomainError(f"need at least one element, got M={M}")
    pl = (
        budget.px**2
        * budget.py**2
        / (16.0 * np.pi**2 * budget.d1**2 * budget.d2**2)
        * budget.directivity**2
        * budget.gt
        * budget.gr
    )
    return float(pl), float(M**2 * pl)
