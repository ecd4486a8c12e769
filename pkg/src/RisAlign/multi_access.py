"""
Multi-Access Module
Minimum power budgets for NOMA, TDMA and FDMA under static and dynamic RIS,
per-user NOMA outage and the decoding-order angular spacing

Noise power sigma_sq and radiated power P_rad share one unit. User index k is
zero-based; for NOMA user 0 has the strongest channel.
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Any, NamedTuple

import numpy as np
import numpy.typing as npt

from . import logger
from .alignment import AlignmentKind, AlignmentModel, compose_channel
from .error_handler import DomainError, InfeasibleError, OrderingError, ShapeError, UnsupportedOperationError
from .fading import BranchDistribution, BranchKind, sample
from .outage import OutageCurve, SnrGrid, analytic_outage_perfect_asymptotic, analytic_outage_random, mc_outage_curve
from .radiation_pattern import RisGeometry, branch_phase_offsets
from .random_streams import RandomStream
from .trial_runner import TrialRunner

DEFAULT_PATHLOSS_EXPONENT = 2.0

# (M, d1/d2, dx/lambda) rows of the angular-spacing table
SPACING_TABLE_ROWS = ((5, 2.0, 0.5), (10, 2.0, 0.5), (10, 4.0, 0.5), (10, 2.0, 0.25), (15, 2.0, 0.5))


class Scheme(Enum):
    NOMA_STATIC = "noma_static"
    TDMA_STATIC = "tdma_static"
    FDMA_STATIC = "fdma_static"
    NOMA_DYNAMIC = "noma_dynamic"
    TDMA_DYNAMIC = "tdma_dynamic"


@dataclass(frozen=True)
class UserProfile:
    """
    Rate target in bits/s/Hz and channel magnitude |H_k|

    For dynamic TDMA the channel is the one seen in the user's own slot.
    """

    rate: float
    channel: float
    distance: float | None = None
    angle: float | None = None

    def __post_init__(self) -> None:
        if not self.rate > 0:
            raise DomainError(f"rate target must be positive, got {self.rate}")
        if self.channel < 0:
            raise DomainError(f"channel magnitude must be nonnegative, got {self.channel}")

    @property
    def tau(self) -> float:
        return 2.0**self.rate - 1.0


@dataclass(frozen=True)
class PowerBudget:
    """
    Minimum powers of one scheme and the total that P_rad has to reach

    powers has one entry per user, or shape (slots, users) for hybrid NOMA.
    total: NOMA sum, static TDMA mean over slots, dynamic TDMA sum, FDMA sum,
    hybrid NOMA sum over slots and users.
    """

    scheme: Scheme
    powers: npt.NDArray[np.float64]
    total: float

    @property
    def requirement(self) -> float:
        """Radiated power below which the scheme is in system outage"""
        return self.total

    def system_outage(self, p_rad: float) -> bool:
        """True when the radiated power cannot serve every user"""
        return p_rad < self.requirement

    def to_dict(self) -> dict[str, Any]:
        return {"scheme": self.scheme.value, "powers": self.powers.tolist(), "total": self.total}


class NomaUserOutage(NamedTuple):
    p_out: float
    mu: npt.NDArray[np.float64]
    mu_max: float


class AngularSpacing(NamedTuple):
    radians: float
    rhs: float
    feasible: bool

    @property
    def degrees(self) -> float:
        return math.degrees(self.radians)


def _channels(users: Sequence[UserProfile]) -> npt.NDArray[np.float64]:
    if not users:
        raise DomainError("need at least one user")
    channels = np.array([u.channel for u in users], dtype=float)
    zero = np.flatnonzero(channels == 0)
    if zero.size:
        index = int(zero[0])
        raise InfeasibleError(f"user {index} has a zero channel and needs infinite power", index=index)
    return channels


def _noma_recursion(
    taus: npt.NDArray[np.float64], channels: npt.NDArray[np.float64], sigma_sq: float
) -> npt.NDArray[np.float64]:
    """P_k = tau_k (sigma^2/|H_k|^2 + sum_{i<k} P_i)"""
    powers = np.empty(len(taus))
    interference = 0.0
    for k, (tau, channel) in enumerate(zip(taus, channels, strict=True)):
        powers[k] = tau * (sigma_sq / channel**2 + interference)
        interference += powers[k]
    return powers


def noma_min_powers_static(users: Sequence[UserProfile], sigma_sq: float = 1.0) -> PowerBudget:
    """
    Minimum NOMA powers with one static RIS configuration

    Args:
        users: Users ordered by non-increasing channel magnitude
        sigma_sq: Noise power

    Returns:
        PowerBudget whose total is the sum of the user powers
    """
    channels = _channels(users)
    violations = np.flatnonzero(np.diff(channels) > 0)
    if violations.size:
        index = int(violations[0]) + 1
        raise OrderingError(
            f"user {index} has a stronger channel than user {index - 1}; order users by non-increasing |H|",
            details={"index": index},
        )
    taus = np.array([u.tau for u in users])
    powers = _noma_recursion(taus, channels, sigma_sq)
    return PowerBudget(Scheme.NOMA_STATIC, powers, float(powers.sum()))


def tdma_min_powers(users: Sequence[UserProfile], sigma_sq: float = 1.0, mode: str = "static") -> PowerBudget:
    """
    Per-slot TDMA powers (2^{K r_k} - 1) sigma^2 / |H_k|^2

    Static total is the mean over the K slots, dynamic total the sum.
    """
    if mode not in ("static", "dynamic"):
        raise DomainError(f"mode must be 'static' or 'dynamic', got {mode!r}")
    channels = _channels(users)
    K = len(users)
    powers = np.array([2.0 ** (K * u.rate) - 1.0 for u in users]) * sigma_sq / channels**2
    if mode == "static":
        return PowerBudget(Scheme.TDMA_STATIC, powers, float(powers.mean()))
    return PowerBudget(Scheme.TDMA_DYNAMIC, powers, float(powers.sum()))


def fdma_min_powers(users: Sequence[UserProfile], sigma_sq: float = 1.0) -> PowerBudget:
    """Per-band FDMA powers (2^{K r_k} - 1) sigma^2 / (K |H_k|^2); channels are taken at each user's carrier"""
    channels = _channels(users)
    K = len(users)
    powers = np.array([2.0 ** (K * u.rate) - 1.0 for u in users]) * sigma_sq / (K * channels**2)
    return PowerBudget(Scheme.FDMA_STATIC, powers, float(powers.sum()))


def noma_hybrid_min_powers(
    users: Sequence[UserProfile], slot_channels: npt.ArrayLike, sigma_sq: float = 1.0
) -> PowerBudget:
    """
    NOMA within each slot of a dynamic RIS

    slot_channels[t, k] is |H(k, theta_t)|. Each slot decodes in the order of
    its own channels and uses tau_k = 2^{r_k} - 1. With every slot_channels[t, k]
    at least user k's TDMA channel, the total never exceeds dynamic TDMA for
    equal rates.
    """
    K = len(users)
    matrix = np.asarray(slot_channels, dtype=float)
    if matrix.shape != (K, K):
        raise ShapeError(f"slot channels must have shape ({K}, {K}), got {matrix.shape}")
    if np.any(matrix < 0):
        raise DomainError("channel magnitudes must be nonnegative")
    zero = np.argwhere(matrix == 0)
    if zero.size:
        index = int(zero[0][1])
        raise InfeasibleError(f"user {index} has a zero channel in slot {int(zero[0][0])}", index=index)

    taus = np.array([u.tau for u in users])
    powers = np.zeros((K, K))
    for t in range(K):
        order = np.argsort(-matrix[t], kind="stable")
        powers[t, order] = _noma_recursion(taus[order], matrix[t, order], sigma_sq)
    return PowerBudget(Scheme.NOMA_DYNAMIC, powers, float(powers.sum()))


def sic_thresholds(allocation: Sequence[float], rates: Sequence[float]) -> npt.NDArray[np.float64]:
    """
    mu_i = tau_i / (a_i - tau_i sum_{l<i} a_l) for every user

    Infeasible entries (non-positive denominator) are inf.
    """
    a = np.asarray(allocation, dtype=float)
    taus = 2.0 ** np.asarray(rates, dtype=float) - 1.0
    if a.shape != taus.shape:
        raise ShapeError("one power fraction per rate target")
    interference = np.concatenate(([0.0], np.cumsum(a)[:-1]))
    denominators = a - taus * interference
    with np.errstate(divide="ignore"):
        return np.where(denominators > 0, taus / np.where(denominators > 0, denominators, 1.0), np.inf)


def noma_user_outage(
    allocation: Sequence[float],
    rates: Sequence[float],
    k: int,
    model: AlignmentModel,
    dist: BranchDistribution,
    M: int,
    sigma_sq: float = 1.0,
    p_rad: float = 1.0,
) -> NomaUserOutage:
    """
    Outage of NOMA user k, Pr{|H_k|^2 < mu_max_k sigma^2 / P_rad}

    Args:
        allocation: Power fractions a_i
        rates: Rate targets r_i
        k: User index (zero-based)
        model: Alignment the user sees: perfect (Rayleigh asymptote) or random (closed form)
        dist: Branch amplitude law
        M: Number of RIS elements
        sigma_sq: Noise power
        p_rad: Radiated power

    Returns:
        NomaUserOutage with every mu_i and mu_max over users i >= k
    """
    mu = sic_thresholds(allocation, rates)
    if not 0 <= k < len(mu):
        raise DomainError(f"user index {k} outside 0..{len(mu) - 1}")
    infeasible = np.flatnonzero(np.isinf(mu[k:]))
    if infeasible.size:
        index = int(infeasible[0]) + k
        raise InfeasibleError(
            f"allocation infeasible at user {index}: a_i <= tau_i * sum of earlier fractions", index=index
        )
    mu_max = float(mu[k:].max())
    gamma_0 = mu_max * sigma_sq

    if model.kind == AlignmentKind.PERFECT:
        if dist.kind != BranchKind.RAYLEIGH:
            raise UnsupportedOperationError("the perfect-alignment asymptote is defined for Rayleigh branches")
        p_out = float(analytic_outage_perfect_asymptotic(M, dist.b, gamma_0, p_rad))
    elif model.kind == AlignmentKind.RANDOM:
        p_out = float(analytic_outage_random(M, dist, gamma_0, p_rad))
    else:
        raise UnsupportedOperationError(f"no closed form for {model.kind.value} alignment, use noma_user_outage_mc")
    return NomaUserOutage(p_out, mu, mu_max)


def noma_user_outage_mc(
    allocation: Sequence[float],
    rates: Sequence[float],
    k: int,
    model: AlignmentModel,
    dist: BranchDistribution,
    M: int,
    p_rad_db: Sequence[float],
    trials: int,
    stream: RandomStream,
    sigma_sq: float = 1.0,
    runner: TrialRunner | None = None,
) -> OutageCurve:
    """Monte Carlo outage of NOMA user k over a grid of radiated powers in dB"""
    mu = sic_thresholds(allocation, rates)
    infeasible = np.flatnonzero(np.isinf(mu[k:]))
    if infeasible.size:
        index = int(infeasible[0]) + k
        raise InfeasibleError(f"allocation infeasible at user {index}", index=index)
    grid = SnrGrid(tuple(p_rad_db), float(mu[k:].max()) * sigma_sq)
    return mc_outage_curve(model, dist, M, grid, trials, stream, runner)


def min_angular_spacing(
    M: int, d1: float, d2: float, dx_over_lambda: float, beta: float = DEFAULT_PATHLOSS_EXPONENT
) -> AngularSpacing:
    """
    Smallest angular separation that lets the farther user be decoded first

    sin(dphi) >= sqrt(6 / (pi^2 (M^2 - 1)) (1/d)^2 (1 - d2^beta / d1^beta))
    """
    if M < 2:
        raise DomainError(f"angular spacing needs M >= 2, got M={M}")
    if not d1 > d2 > 0:
        raise DomainError(f"need d1 > d2 > 0, got d1={d1}, d2={d2}")
    if not dx_over_lambda > 0:
        raise DomainError("element pitch must be positive")
    rhs = math.sqrt(6.0 / (math.pi**2 * (M**2 - 1)) / dx_over_lambda**2 * (1.0 - (d2 / d1) ** beta))
    if rhs > 1.0:
        logger.logger.warning(f"No angular spacing transposes the decoding order for M={M}, d={dx_over_lambda}")
        return AngularSpacing(math.pi / 2, rhs, False)
    return AngularSpacing(math.asin(rhs), rhs, True)


def spacing_table() -> list[dict[str, float]]:
    """Angular spacing for the reference table rows, d2 = 1"""
    rows = []
    for M, ratio, pitch in SPACING_TABLE_ROWS:
        spacing = min_angular_spacing(M, ratio, 1.0, pitch)
        rows.append({"M": M, "d_ratio": ratio, "dx": pitch, "spacing_deg": spacing.degrees})
    return rows


def channel_from_geometry(
    geom: RisGeometry,
    u: float,
    distance: float,
    beta: float = DEFAULT_PATHLOSS_EXPONENT,
    dist: BranchDistribution | None = None,
    stream: RandomStream | np.random.Generator | None = None,
) -> float:
    """
    |H(k, theta)| of a user at direction sine u and the given distance

    Branch amplitudes are distance^(-beta/2), times fading draws when a
    distribution and stream are given; phases follow the scan offsets.
    """
    if not distance > 0:
        raise DomainError("distance must be positive")
    amplitudes = np.full(geom.M, distance ** (-beta / 2.0))
    if dist is not None:
        if stream is None:
            raise DomainError("a random stream is needed to draw fading amplitudes")
        amplitudes = amplitudes * sample(dist, geom.M, stream)
    return float(compose_channel(amplitudes, branch_phase_offsets(geom, u)).magnitude)


def slot_channel_matrix(
    geom: RisGeometry,
    directions: Sequence[float],
    distances: Sequence[float],
    beta: float = DEFAULT_PATHLOSS_EXPONENT,
) -> npt.NDArray[np.float64]:
    """Entry [t, k]: channel of user k while slot t scans toward user t"""
    if len(directions) != len(distances):
        raise ShapeError("one distance per user direction")
    K = len(directions)
    matrix = np.empty((K, K))
    for t in range(K):
        slot_geom = geom.steered(float(directions[t]))
        for k in range(K):
            matrix[t, k] = channel_from_geometry(slot_geom, float(directions[k]), float(distances[k]), beta)
    return matrix
