"""
Special functions used by the moment formulas
"""

import numpy as np
import numpy.typing as npt
from scipy import special

from .error_handler import DomainError

FloatOrArray = float | npt.NDArray[np.float64]


def laguerre_half(x: FloatOrArray) -> FloatOrArray:
    """
    Laguerre function L_{1/2}(x) for x <= 0

    Uses the exponentially scaled Bessel functions, so e^{x/2} cancels exactly:
    L_{1/2}(x) = (1 - x) i0e(-x/2) - x i1e(-x/2).
    """
    values = np.asarray(x, dtype=float)
    if np.any(values > 0):
        raise DomainError("laguerre_half is only defined here for x <= 0")
    z = -values / 2.0
    result = (1.0 - values) * special.i0e(z) - values * special.i1e(z)
    if result.ndim == 0:
        return float(result)
    return result


def sinc(x: FloatOrArray) -> FloatOrArray:
    """Unnormalized sinc, sin(x)/x"""
    result = np.sinc(np.asarray(x, dtype=float) / np.pi)
    if result.ndim == 0:
        return float(result)
    return result
