"""Explicit ancient shear flows and one-sided time mollification.

The wall-bounded shear family: u = (u_1(x_n,t), .., u_{n-1}(x_n,t), 0) with
each profile solving the forced 1D heat equation

    d_t u_i - d_n^2 u_i = f_i(t),   u_i(0, t) = 0,

driven by a compactly supported forcing on the negative time axis, and the
linear pressure p = sum_i c_i(t) x_i with c_i = -f_i. The profile is
evaluated through the Dirichlet half-line heat semigroup acting on the
constant 1 (method of images), E(x, tau) = erf(x / (2 sqrt(tau))).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import erf

from .bump import standard_mollifier
from .grids import Grid, ScalarField, VectorField
from .operators import laplacian, derivative

__all__ = [
    "TimeSignal",
    "bump_signal",
    "mollify_time",
    "dirichlet_heat_shear",
    "ShearSolution",
    "assemble_shear",
    "stokes_residual",
]

_VANISH_TOL = 1e-14


@dataclass(frozen=True)
class TimeSignal:
    """Uniformly sampled, compactly supported function of (negative) time.

    ``support`` = (a, b) declares where the signal may be nonzero; outside
    its stored window the signal is extended by zero, which is exact as
    long as the support lies inside the window. Evaluation raises
    "signal range exceeded" if a point inside the declared support falls
    outside the stored samples.
    """

    samples: np.ndarray
    dt: float
    t0: float
    support: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size < 2:
            raise ValueError("samples must be a 1D array with >= 2 entries")
        if not np.all(np.isfinite(samples)):
            raise ValueError("non-finite signal")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "samples", samples)
        support = self.support
        if support is None:
            support = (self.t0, self.t_end)
        a, b = float(support[0]), float(support[1])
        if not a < b:
            raise ValueError("support must be a nonempty interval")
        if not b < 0:
            raise ValueError("support must lie in negative time (b < 0)")
        object.__setattr__(self, "support", (a, b))
        times = self.times
        outside = (times < a - 1e-12) | (times > b + 1e-12)
        if np.any(np.abs(samples[outside]) > _VANISH_TOL):
            raise ValueError("signal does not vanish outside declared support")

    @property
    def t_end(self) -> float:
        return self.t0 + (len(np.asarray(self.samples)) - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.samples.size) * self.dt

    def at(self, t) -> np.ndarray:
        """Linear interpolation with zero extension beyond the window."""
        t = np.asarray(t, dtype=float)
        a, b = self.support
        beyond = ((t < self.t0) | (t > self.t_end)) & (t > a) & (t < b)
        if np.any(beyond):
            raise ValueError("signal range exceeded")
        return np.interp(t, self.times, self.samples, left=0.0, right=0.0)

    def l1_norm(self) -> float:
        return float(np.trapezoid(np.abs(self.samples), dx=self.dt))

    def max_norm(self) -> float:
        return float(np.max(np.abs(self.samples)))


def bump_signal(a: float, b: float, dt: float, amplitude: float = 1.0) -> TimeSignal:
    """Smooth bump supported on (a, b) sampled with step dt."""
    if not (a < b < 0):
        raise ValueError("need a < b < 0")
    pad = 2
    n = int(round((b - a) / dt)) + 1 + 2 * pad
    t0 = a - pad * dt
    t = t0 + np.arange(n) * dt
    eta = standard_mollifier()
    vals = amplitude * eta.value((t - a) / (b - a)) / eta.value(np.array([0.5]))[0]
    return TimeSignal(vals, dt, t0, support=(a, b))


def _simpson_weights(n_nodes: int, h: float) -> np.ndarray:
    if n_nodes % 2 == 0 or n_nodes < 3:
        raise ValueError("Simpson rule needs an odd node count >= 3")
    w = np.ones(n_nodes)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


def mollify_time(u: TimeSignal, eps: float, k: int = 0) -> TimeSignal:
    """One-sided mollification u^eps(t) = int u(t + eps s) eta(s) ds.

    For k > 0 returns the k-th time derivative of u^eps, computed by
    moving the derivatives onto the mollifier:
    d_t^k u^eps = (-1)^k eps^(-k) int u(t + eps s) eta^(k)(s) ds, so
    sup |d_t^k u^eps| <= ||eta^(k)||_1 eps^(-k) sup|u|.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if k > 4:
        raise ValueError("derivative order > 4 unsupported (mollifier tables stop at 4)")
    eta = standard_mollifier()
    # quadrature step ~ signal dt mapped into s; floor keeps coarse signals honest
    n_int = int(np.clip(round(eps / u.dt), 64, 8192))
    n_int += n_int % 2
    s = np.linspace(0.0, 1.0, n_int + 1)
    w = _simpson_weights(n_int + 1, s[1] - s[0])
    kernel = eta.value(s, k) * w

    shift = int(np.ceil(eps / u.dt))
    t0 = u.t0 - shift * u.dt
    n_out = u.samples.size + shift
    t_out = t0 + np.arange(n_out) * u.dt
    u_vals = u.at(t_out[:, None] + eps * s[None, :])
    vals = u_vals @ kernel
    vals *= (-1.0) ** k / eps**k

    a, b = u.support
    support = (max(a - eps, t0), b)
    return TimeSignal(vals, u.dt, t0, support=support)


def dirichlet_heat_shear(f: TimeSignal, xn: np.ndarray, t: float) -> np.ndarray:
    """Shear profile u(x_n, t) = int_{-inf}^t f(s) E(x_n, t - s) ds.

    E(x, tau) = erf(x / (2 sqrt(tau))) is the Dirichlet heat semigroup on
    the half-line applied to the constant 1: E(0, tau) = 0 and E -> 1 as
    x/sqrt(tau) -> infinity. Quadrature runs in sigma = sqrt(t - s), where
    the integrand 2 sigma f(t - sigma^2) E is smooth.
    """
    xn = np.asarray(xn, dtype=float)
    a, b = f.support
    if t <= a:
        return np.zeros(xn.shape)
    sig_lo = np.sqrt(max(t - b, 0.0))
    sig_hi = np.sqrt(t - a)
    if sig_hi <= sig_lo:
        return np.zeros(xn.shape)
    target = f.dt / (2.0 * sig_hi)
    n_int = int(np.clip(np.ceil((sig_hi - sig_lo) / target), 128, 16384))
    n_int += n_int % 2
    sig = np.linspace(sig_lo, sig_hi, n_int + 1)
    w = _simpson_weights(n_int + 1, sig[1] - sig[0])
    fvals = f.at(t - sig**2)
    E = np.empty((xn.size, sig.size))
    pos = sig > 0
    E[:, pos] = erf(xn[:, None] / (2.0 * sig[None, pos]))
    if np.any(~pos):  # sigma = 0 node carries zero weight through the 2*sigma factor
        E[:, ~pos] = np.where(xn[:, None] > 0, 1.0, 0.0)
    integrand = 2.0 * sig[None, :] * fvals[None, :] * E
    u = integrand @ w
    u[xn == 0.0] = 0.0
    return u


@dataclass(frozen=True)
class ShearSolution:
    """Sampled member of the classified wall-bounded family.

    Profiles depend on (x_n, t) only, the wall-normal component vanishes,
    and the pressure is the linear form p = sum_i c_i(t) x_i with
    c_i = -f_i.
    """

    grid: Grid
    times: np.ndarray
    profiles: np.ndarray  # (n-1, n_times, M)
    pressure_coeffs: np.ndarray  # (n-1, n_times)
    forcings: tuple[TimeSignal, ...]

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def velocity_field(self, k: int) -> VectorField:
        grid = self.grid
        comps = []
        lateral = (grid.N,) * (grid.n - 1)
        for i in range(grid.n - 1):
            prof = self.profiles[i, k]
            comps.append(np.broadcast_to(prof, lateral + (grid.M,)).copy())
        comps.append(np.zeros(lateral + (grid.M,)))
        return VectorField.from_arrays(grid, comps, divfree_tol=1e-12)

    def pressure_gradients(self) -> np.ndarray:
        """(n_times, n) constant pressure-gradient vectors."""
        k = self.times.size
        out = np.zeros((k, self.grid.n))
        out[:, : self.grid.n - 1] = self.pressure_coeffs.T
        return out

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.profiles)))


def assemble_shear(
    forcings: Sequence[TimeSignal], grid: Grid, times: np.ndarray
) -> ShearSolution:
    """Build the explicit shear solution driven by the given forcings."""
    if grid.is_periodic:
        raise ValueError("shear solutions live on wall-bounded grids")
    forcings = tuple(forcings)
    if len(forcings) != grid.n - 1:
        raise ValueError(f"need {grid.n - 1} forcing signals")
    dts = {f.dt for f in forcings}
    if len(dts) != 1:
        raise ValueError("mismatched dt among forcing signals")
    times = np.asarray(times, dtype=float)
    z = grid.vertical_coordinates()
    profiles = np.zeros((grid.n - 1, times.size, grid.M))
    coeffs = np.zeros((grid.n - 1, times.size))
    for i, f in enumerate(forcings):
        for k, t in enumerate(times):
            profiles[i, k] = dirichlet_heat_shear(f, z, float(t))
        coeffs[i] = -f.at(times)
    return ShearSolution(grid, times, profiles, coeffs, forcings)


def stokes_residual(
    fields: Sequence[VectorField],
    dt: float,
    pressure: Sequence[ScalarField] | np.ndarray | None = None,
) -> dict[str, float]:
    """Max-norm residuals of d_t u - lap u + grad p, div u, and the wall trace.

    Time derivatives are centered, so at least 3 slices are required;
    ``pressure`` is either one ScalarField per slice or an array of
    constant pressure-gradient vectors of shape (n_slices, n).
    """
    fields = list(fields)
    if len(fields) < 3:
        raise ValueError("need at least 3 time slices")
    grid = fields[0].grid
    n_t = len(fields)

    def grad_p(k: int) -> list[np.ndarray]:
        if pressure is None:
            return [np.zeros(grid.shape)] * grid.n
        if isinstance(pressure, np.ndarray):
            return [np.full(grid.shape, pressure[k, ax]) for ax in range(grid.n)]
        p = pressure[k]
        return [derivative(p, ax).values for ax in range(grid.n)]

    momentum_max = 0.0
    for k in range(1, n_t - 1):
        gp = grad_p(k)
        for ax in range(grid.n):
            du_dt = (
                fields[k + 1].components[ax].values
                - fields[k - 1].components[ax].values
            ) / (2.0 * dt)
            lap = laplacian(fields[k].components[ax]).values
            resid = du_dt - lap + gp[ax]
            momentum_max = max(momentum_max, float(np.max(np.abs(resid))))

    from .operators import divergence

    div_max = max(divergence(v).max_norm() for v in fields)

    trace_max = 0.0
    if not grid.is_periodic:
        planes = [0] if grid.geometry.value == "half_strip" else [0, -1]
        for v in fields:
            for c in v.components:
                for p in planes:
                    trace_max = max(trace_max, float(np.max(np.abs(c.values[..., p]))))
    return {
        "momentum_max": momentum_max,
        "div_max": div_max,
        "trace_max": trace_max,
    }
