"""
Phase Alignment Module
The four phase-alignment categories, channel composition and |H| moments
"""

from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np
import numpy.typing as npt

from . import logger
from .error_handler import DomainError, ShapeError, UnsupportedOperationError
from .fading import BranchDistribution, moments, sample
from .random_streams import RandomStream, as_generator
from .special import laguerre_half, sinc

# Bound premise: pairwise branch phase differences at most pi/2
BOUND_SPREAD_LIMIT = np.pi / 2


class AlignmentKind(Enum):
    """Phase-alignment category"""

    PERFECT = "perfect"
    COHERENT = "coherent"
    RANDOM = "random"
    DESTRUCTIVE = "destructive"


class WindowConvention(Enum):
    """How a quantization level L maps to a coherent error half-width"""

    SECTION2 = "section2"  # w = pi/L
    APPENDIX_A = "appendixA"  # w = pi/(2L)


@dataclass(frozen=True)
class AlignmentModel:
    """
    Branch phase model

    Offsets are deterministic per-branch phases added on top of the category's
    phases (off-target users). Coherent with half_width 0 is Perfect.
    """

    kind: AlignmentKind
    theta0: float = 0.0
    half_width: float = 0.0
    offsets: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind == AlignmentKind.COHERENT and not 0.0 <= self.half_width <= np.pi:
            raise DomainError(f"coherent half-width must lie in [0, pi], got {self.half_width}")
        if self.kind != AlignmentKind.COHERENT and self.half_width != 0.0:
            raise DomainError(f"{self.kind.value} alignment has no error half-width")
        if self.offsets is not None and self.kind in (AlignmentKind.RANDOM, AlignmentKind.DESTRUCTIVE):
            raise DomainError(f"{self.kind.value} alignment takes no deterministic offsets")

    @classmethod
    def perfect(cls, theta0: float = 0.0, offsets: Sequence[float] | None = None) -> "AlignmentModel":
        return cls(AlignmentKind.PERFECT, theta0=theta0, offsets=_as_offsets(offsets))

    @classmethod
    def coherent(
        cls, half_width: float, theta0: float = 0.0, offsets: Sequence[float] | None = None
    ) -> "AlignmentModel":
        return cls(AlignmentKind.COHERENT, theta0=theta0, half_width=half_width, offsets=_as_offsets(offsets))

    @classmethod
    def random(cls) -> "AlignmentModel":
        return cls(AlignmentKind.RANDOM)

    @classmethod
    def destructive(cls) -> "AlignmentModel":
        return cls(AlignmentKind.DESTRUCTIVE)

    @property
    def has_offsets(self) -> bool:
        return self.offsets is not None and any(o != 0.0 for o in self.offsets)

    def offsets_for(self, M: int) -> npt.NDArray[np.float64]:
        if self.offsets is None:
            return np.zeros(M)
        if len(self.offsets) != M:
            raise ShapeError(f"expected {M} branch offsets, got {len(self.offsets)}")
        return np.asarray(self.offsets, dtype=float)

    @property
    def phase_spread(self) -> float:
        """Largest possible phase difference between two branches"""
        if self.kind == AlignmentKind.RANDOM:
            return 2 * np.pi
        spread = 0.0
        if self.offsets:
            spread = max(self.offsets) - min(self.offsets)
        return spread + 2.0 * self.half_width

    def satisfies_bound_condition(self) -> bool:
        if self.kind not in (AlignmentKind.PERFECT, AlignmentKind.COHERENT):
            return False
        return self.phase_spread <= BOUND_SPREAD_LIMIT + 1e-12

    def to_dict(self) -> dict[str, object]:
        data: dict[str, object] = {"kind": self.kind.value}
        if self.kind in (AlignmentKind.PERFECT, AlignmentKind.COHERENT):
            data["theta0"] = self.theta0
        if self.kind == AlignmentKind.COHERENT:
            data["half_width"] = self.half_width
        if self.offsets is not None:
            data["offsets"] = list(self.offsets)
        return data


def _as_offsets(offsets: Sequence[float] | None) -> tuple[float, ...] | None:
    if offsets is None:
        return None
    return tuple(float(o) for o in offsets)


@dataclass(frozen=True)
class ChannelSample:
    """Overall channel H; fields are scalars for one draw or arrays for a batch"""

    real_part: float | npt.NDArray[np.float64]
    imag_part: float | npt.NDArray[np.float64]
    magnitude: float | npt.NDArray[np.float64]
    phase: float | npt.NDArray[np.float64]

    @classmethod
    def from_complex(cls, H: complex | npt.NDArray[np.complex128]) -> "ChannelSample":
        values = np.asarray(H, dtype=complex)
        if values.ndim == 0:
            return cls(float(values.real), float(values.imag), float(np.abs(values)), float(np.angle(values)))
        return cls(values.real.copy(), values.imag.copy(), np.abs(values), np.angle(values))


@dataclass(frozen=True)
class RicianApprox:
    """Rician law fitted to the coherent channel: noncentrality alpha, per-quadrature variance beta_sq"""

    alpha: float
    beta_sq: float

    def mean(self) -> float:
        if self.beta_sq == 0.0:
            return self.alpha
        beta = np.sqrt(self.beta_sq)
        return float(np.sqrt(np.pi / 2.0) * beta * laguerre_half(-(self.alpha**2) / (2.0 * self.beta_sq)))

    def variance(self) -> float:
        return max(0.0, self.alpha**2 + 2.0 * self.beta_sq - self.mean() ** 2)


@dataclass(frozen=True)
class MagnitudeMoments:
    """
    Mean and variance of |H|

    tabulated_variance carries the destructive-row variance M(h2 - h1^2) of the
    comparison table, which differs from the variance 0 of the H = 0 channel.
    """

    mean: float
    variance: float
    tabulated_variance: float | None = None


def quantization_to_half_width(L: float, convention: WindowConvention | str) -> float:
    """
    Coherent error half-width for a quantization level

    Args:
        L: Quantization level (>= 1, may be math.inf)
        convention: section2 for w = pi/L, appendixA for w = pi/(2L)

    Returns:
        Half-width w in radians
    """
    convention = WindowConvention(convention)
    if not L >= 1:
        raise DomainError(f"quantization level must be >= 1, got {L}")
    if np.isinf(L):
        return 0.0
    if float(L) != int(L):
        raise DomainError(f"quantization level must be an integer, got {L}")
    if convention == WindowConvention.SECTION2:
        return float(np.pi / L)
    return float(np.pi / (2 * L))


def compose_channel(
    amplitudes: Sequence[float] | npt.ArrayLike, phases: Sequence[float] | npt.ArrayLike
) -> ChannelSample:
    """Sum of branch phasors, H = sum |h_m| e^{j theta_m}"""
    amps = np.asarray(amplitudes, dtype=float)
    angles = np.asarray(phases, dtype=float)
    if amps.shape != angles.shape:
        raise ShapeError(f"amplitudes {amps.shape} and phases {angles.shape} differ in shape")
    if amps.ndim != 1 or amps.size < 1:
        raise ShapeError("need one amplitude and one phase per branch, M >= 1")
    return ChannelSample.from_complex(np.sum(amps * np.exp(1j * angles)))


def draw_phasors(
    model: AlignmentModel, dist: BranchDistribution, M: int, n: int, stream: RandomStream | np.random.Generator
) -> npt.NDArray[np.complex128]:
    """
    Draw n channel realizations H

    Amplitudes are always drawn before phases, so models that share a generator
    also share amplitudes (common random numbers).
    """
    if M < 1:
        raise DomainError(f"need at least one branch, got M={M}")
    if model.kind == AlignmentKind.DESTRUCTIVE:
        return np.zeros(n, dtype=complex)
    gen = as_generator(stream)
    amplitudes = sample(dist, (n, M), gen)
    if model.kind == AlignmentKind.RANDOM:
        phases = gen.uniform(-np.pi, np.pi, (n, M))
    else:
        phases = np.broadcast_to(model.theta0 + model.offsets_for(M), (n, M))
        if model.kind == AlignmentKind.COHERENT and model.half_width > 0:
            phases = phases + gen.uniform(-model.half_width, model.half_width, (n, M))
    return np.sum(amplitudes * np.exp(1j * phases), axis=1)


def draw_magnitudes(
    model: AlignmentModel, dist: BranchDistribution, M: int, n: int, stream: RandomStream | np.random.Generator
) -> npt.NDArray[np.float64]:
    return np.abs(draw_phasors(model, dist, M, n, stream))


def draw_channel(
    model: AlignmentModel,
    dist: BranchDistribution,
    M: int,
    stream: RandomStream | np.random.Generator,
    draws: int | None = None,
) -> ChannelSample:
    """
    Draw the overall channel under an alignment model

    Args:
        model: Alignment category
        dist: Branch amplitude law
        M: Number of branches
        stream: Random stream
        draws: None for one scalar draw, else the batch size

    Returns:
        ChannelSample with scalar or array fields
    """
    H = draw_phasors(model, dist, M, 1 if draws is None else draws, stream)
    return ChannelSample.from_complex(H[0] if draws is None else H)


def rician_approx_from_half_width(dist: BranchDistribution, M: int, half_width: float) -> RicianApprox:
    """Rician fit of the coherent channel for uniform phase error on [-w, w]"""
    if M < 1:
        raise DomainError(f"need at least one branch, got M={M}")
    mean, mean_square = moments(dist)
    alpha = M * mean * float(sinc(half_width))
    beta_sq = 0.5 * M * mean_square * (1.0 - float(sinc(2.0 * half_width)))
    return RicianApprox(alpha=alpha, beta_sq=max(0.0, beta_sq))


def coherent_mean_square(dist: BranchDistribution, M: int, half_width: float) -> float:
    """Exact E[|H|^2] for i.i.d. amplitudes and uniform phase error on [-w, w]"""
    mean, mean_square = moments(dist)
    return float(M * mean_square + M * (M - 1) * (mean * float(sinc(half_width))) ** 2)


def rician_approx(dist: BranchDistribution, M: int, L: float) -> RicianApprox:
    """Rician fit for quantization level L, half-width pi/(2L)"""
    return rician_approx_from_half_width(dist, M, quantization_to_half_width(L, WindowConvention.APPENDIX_A))


def magnitude_moments(model: AlignmentModel, dist: BranchDistribution, M: int) -> MagnitudeMoments:
    """
    E[|H|] and Var[|H|] per alignment category

    Coherent mean comes from the Rician approximation. The Rician law spreads
    the amplitude variance evenly over both quadratures, so the coherent variance
    is the exact E[|H|^2] minus the squared Rician mean instead.
    """
    if M < 1:
        raise DomainError(f"need at least one branch, got M={M}")
    if model.has_offsets:
        raise UnsupportedOperationError("closed-form moments assume no deterministic branch offsets")

    mean, mean_square = moments(dist)
    amplitude_variance = M * (mean_square - mean**2)

    if model.kind == AlignmentKind.PERFECT or (model.kind == AlignmentKind.COHERENT and model.half_width == 0.0):
        return MagnitudeMoments(M * mean, amplitude_variance)
    if model.kind == AlignmentKind.RANDOM:
        return MagnitudeMoments(np.sqrt(M * np.pi * mean_square) / 2.0, M * mean_square * (4.0 - np.pi) / 4.0)
    if model.kind == AlignmentKind.DESTRUCTIVE:
        return MagnitudeMoments(0.0, 0.0, tabulated_variance=amplitude_variance)

    approx = rician_approx_from_half_width(dist, M, model.half_width)
    logger.logger.debug(f"Coherent moments via Rician fit alpha={approx.alpha:.6g} beta_sq={approx.beta_sq:.6g}")
    mean_abs = approx.mean()
    return MagnitudeMoments(mean_abs, max(0.0, coherent_mean_square(dist, M, model.half_width) - mean_abs**2))
