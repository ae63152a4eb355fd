"""The standard smooth bump exp(-1/(s(1-s))) on (0,1), with exact derivatives.

Derivatives up to order 4 are closed-form: with psi(s) = -1/s - 1/(1-s)
(partial fractions of -1/(s(1-s))) one has

    psi^(k)(s) = (-1)^(k+1) k!/s^(k+1) - k!/(1-s)^(k+1)

and the chain-rule (Bell polynomial) expansion of d^k/ds^k e^psi. Outside
(0,1) the bump and all derivatives vanish identically.
"""

from __future__ import annotations

from functools import lru_cache
import math

import numpy as np
from scipy.integrate import cumulative_simpson, simpson
from scipy.interpolate import CubicSpline

__all__ = ["bump_derivative", "Mollifier", "standard_mollifier", "smooth_step"]

MAX_ORDER = 4

_DENSE_NODES = 2**14 + 1


def _psi_derivatives(s: np.ndarray) -> list[np.ndarray]:
    """psi^(k) for k = 1..4 on points strictly inside (0,1)."""
    out = []
    for k in range(1, MAX_ORDER + 1):
        fact = math.factorial(k)
        out.append(
            (-1.0) ** (k + 1) * fact / s ** (k + 1) - fact / (1.0 - s) ** (k + 1)
        )
    return out


def bump_derivative(s, k: int = 0) -> np.ndarray:
    """k-th derivative of the unnormalized bump, k <= 4."""
    if k < 0 or k > MAX_ORDER:
        raise ValueError(f"derivative order {k} unsupported (max {MAX_ORDER})")
    s = np.asarray(s, dtype=float)
    out = np.zeros(s.shape)
    inside = (s > 0.0) & (s < 1.0)
    if not np.any(inside):
        return out
    si = s[inside]
    base = np.exp(-1.0 / si - 1.0 / (1.0 - si))
    if k == 0:
        out[inside] = base
        return out
    p1, p2, p3, p4 = _psi_derivatives(si)
    if k == 1:
        poly = p1
    elif k == 2:
        poly = p1**2 + p2
    elif k == 3:
        poly = p1**3 + 3.0 * p1 * p2 + p3
    else:
        poly = p1**4 + 6.0 * p1**2 * p2 + 3.0 * p2**2 + 4.0 * p1 * p3 + p4
    out[inside] = base * poly
    return out


class Mollifier:
    """Unit-mass bump eta supported in (0,1); derivatives tabulated to order 4."""

    def __init__(self) -> None:
        s = np.linspace(0.0, 1.0, _DENSE_NODES)
        raw = bump_derivative(s, 0)
        self._mass = float(simpson(raw, x=s))
        self._dense_s = s
        cdf = cumulative_simpson(raw / self._mass, x=s, initial=0.0)
        cdf = cdf / cdf[-1]  # pin the endpoint to exactly 1
        self._cdf_spline = CubicSpline(s, cdf)

    def value(self, s, k: int = 0) -> np.ndarray:
        """eta^(k)(s), exact up to the single normalization constant."""
        return bump_derivative(s, k) / self._mass

    def l1_norm(self, k: int) -> float:
        """Integral of |eta^(k)| over (0,1)."""
        vals = np.abs(bump_derivative(self._dense_s, k)) / self._mass
        return float(simpson(vals, x=self._dense_s))

    def cdf(self, s) -> np.ndarray:
        """Integral of eta from 0 to s (exactly 0 below the support, 1 above)."""
        s = np.asarray(s, dtype=float)
        out = np.empty(s.shape)
        lo = s <= 0.0
        hi = s >= 1.0
        mid = ~(lo | hi)
        out[lo] = 0.0
        out[hi] = 1.0
        out[mid] = self._cdf_spline(s[mid])
        return out


@lru_cache(maxsize=1)
def standard_mollifier() -> Mollifier:
    return Mollifier()


def smooth_step(s, k: int = 0) -> np.ndarray:
    """Smooth cutoff equal to 1 for s <= 1 and 0 for s >= 2.

    Built as 1 - cdf(s - 1) of the standard mollifier, so the first and
    second derivatives are available in closed form (-eta(s-1), -eta'(s-1)).
    """
    eta = standard_mollifier()
    s = np.asarray(s, dtype=float)
    if k == 0:
        return 1.0 - eta.cdf(s - 1.0)
    if k in (1, 2):
        return -eta.value(s - 1.0, k - 1)
    raise ValueError(f"smooth_step derivative order {k} unsupported")
