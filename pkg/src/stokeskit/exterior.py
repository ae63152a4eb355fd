"""Exterior-domain machinery: projected heat kernel, sphere potentials, decay fits.

The kernel k is the (matrix) kernel of the divergence-free projection
composed with the unit-time heat semigroup, sampled by inverse transform
of (delta_ij - xi_i xi_j/|xi|^2) exp(-|xi|^2) on a large periodic box.
The single-layer space-time potential over a sphere of radius R is

    v(x, t) = int_0^inf tau^(-n/2) sum_nodes w k((x - y)/sqrt(tau)) f(y, t - tau) dtau,

evaluated in sigma = sqrt(tau) with Simpson panels whose width doubles as
the integrand smooths out. Far kernel arguments beyond the tabulated cube
use the fitted power-law tail. Velocity decays like |x|^(2-n) and its
vorticity one order faster; both exponents are measured by log-log fits
with the constant (the bounded far-field value) removed first.

Only n = 3 is supported: the n = 2 time integral may diverge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.ndimage import map_coordinates
from scipy.optimize import curve_fit

__all__ = [
    "DecayFitResult",
    "KernelTable",
    "projected_heat_kernel",
    "SurfaceForce",
    "constant_traction",
    "radial_traction",
    "random_traction",
    "potential",
    "farfield_fit",
    "potential_magnitudes",
    "vorticity_magnitudes",
    "vorticity_decay_check",
]

_UPPER = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]


@dataclass(frozen=True)
class DecayFitResult:
    """Power-law fit of a far-field quantity: value ~ C * r^exponent."""

    exponent: float
    intercept: float
    rms_residual: float
    r_min: float
    r_max: float

    def __post_init__(self) -> None:
        if not self.r_min < self.r_max:
            raise ValueError("fit range must satisfy r_min < r_max")
        if not math.isfinite(self.rms_residual):
            raise ValueError("fit residual must be finite")


# -- kernel table --------------------------------------------------------------


@dataclass(frozen=True)
class KernelTable:
    """Sampled projected heat kernel on a centered cube, plus its fitted tail."""

    box_size: float
    npts: int
    spacing: float
    interp_radius: float
    coords: np.ndarray           # 1D axis coordinates of the stored cube
    samples: np.ndarray          # (6, m, m, m), upper-triangle components
    tail_coeff: float            # k_far ~ tail_coeff * (3 yy^T - I) / (4 pi |y|^3)
    max_frobenius: float
    symmetry_defect: float
    evenness_defect: float
    row_divergence_max: float
    trace_at_origin: float

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        """Kernel matrix at arbitrary points, shape (..., 3, 3).

        Trilinear interpolation inside the stored cube, fitted power-law
        tail outside.
        """
        pts = np.asarray(z, dtype=float)
        flat = pts.reshape(-1, 3)
        r = np.sqrt(np.sum(flat**2, axis=1))
        out = np.empty((flat.shape[0], 3, 3))
        inner = r <= self.interp_radius
        if np.any(inner):
            idx = (flat[inner] - self.coords[0]) / self.spacing
            coords = idx.T  # (3, P)
            for comp, (a, b) in enumerate(_UPPER):
                vals = map_coordinates(
                    self.samples[comp], coords, order=1, mode="nearest"
                )
                out[inner, a, b] = vals
                out[inner, b, a] = vals
        outer = ~inner
        if np.any(outer):
            d = flat[outer]
            rr = r[outer]
            hat = d / rr[:, None]
            tensor = 3.0 * hat[:, :, None] * hat[:, None, :] - np.eye(3)
            out[outer] = (
                self.tail_coeff / (4.0 * np.pi) * tensor / rr[:, None, None] ** 3
            )
        return out.reshape(pts.shape[:-1] + (3, 3))

    def shell_magnitudes(self, r_min: float, r_max: float):
        """Frobenius norms and radii of all stored samples with |y| in range."""
        g = np.meshgrid(self.coords, self.coords, self.coords, indexing="ij")
        r = np.sqrt(g[0] ** 2 + g[1] ** 2 + g[2] ** 2)
        mask = (r >= r_min) & (r <= r_max)
        frob2 = np.zeros(r.shape)
        for comp, (a, b) in enumerate(_UPPER):
            mult = 1.0 if a == b else 2.0
            frob2 += mult * self.samples[comp] ** 2
        return np.sqrt(frob2[mask]), r[mask]

    def decay_fit(self, r_min: float = 5.0, r_max: float = 15.0) -> DecayFitResult:
        """Log-log least squares of |k(y)| over the shell [r_min, r_max].

        Raises "tail unresolved" when the periodization-bias estimate (the
        nearest periodic images of the fitted tail) exceeds 5% at r_max.
        """
        s = self.box_size
        bias = 2.0 * (r_max / (s - r_max)) ** 3 + 4.0 * (
            r_max / math.hypot(s, r_max)
        ) ** 3
        if bias > 0.05:
            raise ValueError(
                f"tail unresolved: periodization bias estimate {bias:.3f} > 0.05 "
                f"at |y| = {r_max} (box {s})"
            )
        mags, radii = self.shell_magnitudes(r_min, r_max)
        if mags.size < 10 or np.any(mags <= 0):
            raise ValueError("fit degenerate")
        slope, intercept = np.polyfit(np.log(radii), np.log(mags), 1)
        resid = np.log(mags) - (slope * np.log(radii) + intercept)
        return DecayFitResult(
            exponent=float(slope),
            intercept=float(intercept),
            rms_residual=float(np.sqrt(np.mean(resid**2))),
            r_min=float(r_min),
            r_max=float(r_max),
        )


def projected_heat_kernel(
    n: int = 3,
    box_size: float = 96.0,
    npts: int = 160,
    interp_radius: float | None = None,
) -> KernelTable:
    """Sample the kernel of the projected unit-time heat semigroup.

    The symbol (delta - xi xi^T/|xi|^2) exp(-|xi|^2) is inverted on a
    periodic box large enough that the power-law tail is resolved before
    periodization bias sets in. The zero mode, where the projection has no
    limit, is assigned its angular average (1 - 1/n) delta.
    """
    if n != 3:
        raise ValueError(
            "only n = 3 is supported: for n = 2 the potential integral may diverge"
        )
    if box_size < 40:
        raise ValueError("box_size must be >= 40 to resolve the kernel tail")
    spacing = box_size / npts
    k1 = 2.0 * np.pi * np.fft.fftfreq(npts, d=spacing)
    kx, ky, kz = np.meshgrid(k1, k1, k1, indexing="ij")
    k2 = kx**2 + ky**2 + kz**2
    inv = np.zeros_like(k2)
    nz = k2 > 0
    inv[nz] = 1.0 / k2[nz]
    damp = np.exp(-k2)
    kvecs = (kx, ky, kz)

    scale = npts**3 / box_size**3
    shift = npts // 2
    if interp_radius is None:
        interp_radius = min(box_size / 2.0 - 2.0 * spacing, 18.0)
    axis = (np.arange(npts) - shift) * spacing
    keep = np.abs(axis) <= interp_radius + spacing
    kept_axis = axis[keep]

    samples = np.empty((6,) + (kept_axis.size,) * 3)
    for comp, (a, b) in enumerate(_UPPER):
        sym = ((1.0 if a == b else 0.0) - kvecs[a] * kvecs[b] * inv) * damp
        if a == b:
            sym.flat[0] = 1.0 - 1.0 / n  # angular average at the zero mode
        full = np.fft.ifftn(sym).real * scale
        full = np.fft.fftshift(full)
        samples[comp] = full[np.ix_(keep, keep, keep)]

    # row divergence, checked on the symbol side: sum_j xi_j S_ij
    row_div = 0.0
    for a in range(3):
        acc = np.zeros_like(k2)
        for b in range(3):
            sym = ((1.0 if a == b else 0.0) - kvecs[a] * kvecs[b] * inv) * damp
            acc = acc + kvecs[b] * sym
        row_div = max(row_div, float(np.max(np.abs(acc))))

    center = kept_axis.size // 2
    sym_defect = 0.0  # matrix symmetry is structural (upper triangle storage)
    even_defect = max(
        float(np.max(np.abs(samples[c] - samples[c][::-1, ::-1, ::-1])))
        for c in range(6)
    )
    trace0 = float(samples[0][center, center, center]
                   + samples[3][center, center, center]
                   + samples[5][center, center, center])

    frob2 = np.zeros(samples.shape[1:])
    for comp, (a, b) in enumerate(_UPPER):
        frob2 += (1.0 if a == b else 2.0) * samples[comp] ** 2
    max_frob = float(np.sqrt(np.max(frob2)))

    # fitted tail coefficient: project onto (3 yy^T - I)/(4 pi r^3) on an outer shell
    g = np.meshgrid(kept_axis, kept_axis, kept_axis, indexing="ij")
    r = np.sqrt(g[0] ** 2 + g[1] ** 2 + g[2] ** 2)
    shell = (r >= 0.75 * interp_radius) & (r <= interp_radius)
    hat = [g[i][shell] / r[shell] for i in range(3)]
    proj = np.zeros(int(np.sum(shell)))
    for comp, (a, b) in enumerate(_UPPER):
        t_ab = 3.0 * hat[a] * hat[b] - (1.0 if a == b else 0.0)
        proj += (1.0 if a == b else 2.0) * samples[comp][shell] * t_ab
    # <k, T> / <T, T> with <T, T> = 6, times 4 pi r^3
    tail_coeff = float(np.mean(proj / 6.0 * 4.0 * np.pi * r[shell] ** 3))

    return KernelTable(
        box_size=float(box_size),
        npts=int(npts),
        spacing=float(spacing),
        interp_radius=float(interp_radius),
        coords=kept_axis,
        samples=samples,
        tail_coeff=tail_coeff,
        max_frobenius=max_frob,
        symmetry_defect=sym_defect,
        evenness_defect=even_defect,
        row_divergence_max=row_div,
        trace_at_origin=trace0,
    )


# -- surface forces -------------------------------------------------------------


@dataclass(frozen=True)
class SurfaceForce:
    """Traction samples on a product Gauss-Legendre x uniform-azimuth sphere grid.

    ``times`` may be None for time-invariant tractions, in which case
    ``tractions`` has shape (K, 3); otherwise (T, K, 3) sampled on
    ``times``.
    """

    radius: float
    nodes: np.ndarray
    weights: np.ndarray
    tractions: np.ndarray
    times: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ValueError("sphere radius must be positive")
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")
        area = 4.0 * np.pi * self.radius**2
        if abs(float(np.sum(self.weights)) - area) > 1e-10 * area:
            raise ValueError("quadrature weights do not sum to the sphere area")
        if not np.all(np.isfinite(self.tractions)):
            raise ValueError("non-finite traction samples")

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    def traction_at(self, s: float) -> np.ndarray:
        if self.times is None:
            return self.tractions
        t = self.times
        if s <= t[0]:
            return self.tractions[0]
        if s >= t[-1]:
            return self.tractions[-1]
        i = int(np.searchsorted(t, s)) - 1
        w = (s - t[i]) / (t[i + 1] - t[i])
        return (1 - w) * self.tractions[i] + w * self.tractions[i + 1]

    def max_traction(self) -> float:
        return float(np.max(np.linalg.norm(self.tractions, axis=-1)))

    def total_force(self, s: float) -> np.ndarray:
        return self.weights @ self.traction_at(s)


def sphere_quadrature(radius: float, n_polar: int, n_azimuth: int):
    """Gauss-Legendre in cos(theta) x uniform azimuth nodes and weights."""
    x, wx = leggauss(n_polar)
    phi = 2.0 * np.pi * (np.arange(n_azimuth) + 0.5) / n_azimuth
    ct = x[:, None] * np.ones((1, n_azimuth))
    st = np.sqrt(1.0 - x[:, None] ** 2) * np.ones((1, n_azimuth))
    nodes = radius * np.stack(
        [st * np.cos(phi)[None, :], st * np.sin(phi)[None, :], ct], axis=-1
    ).reshape(-1, 3)
    weights = (
        radius**2
        * np.broadcast_to(wx[:, None], (n_polar, n_azimuth))
        * (2.0 * np.pi / n_azimuth)
    ).reshape(-1)
    return nodes, weights


def constant_traction(
    radius: float = 1.0,
    vector=(1.0, 0.0, 0.0),
    n_polar: int = 16,
    n_azimuth: int = 32,
) -> SurfaceForce:
    nodes, weights = sphere_quadrature(radius, n_polar, n_azimuth)
    f = np.broadcast_to(np.asarray(vector, dtype=float), nodes.shape).copy()
    return SurfaceForce(radius, nodes, weights, f)


def radial_traction(
    radius: float = 1.0,
    amplitude: float = 1.0,
    n_polar: int = 16,
    n_azimuth: int = 32,
) -> SurfaceForce:
    """Antipodally odd traction f(y) = amplitude * y / R: zero net force."""
    nodes, weights = sphere_quadrature(radius, n_polar, n_azimuth)
    f = amplitude * nodes / radius
    return SurfaceForce(radius, nodes, weights, f)


def random_traction(
    radius: float = 1.0,
    seed: int = 0,
    n_polar: int = 16,
    n_azimuth: int = 32,
) -> SurfaceForce:
    nodes, weights = sphere_quadrature(radius, n_polar, n_azimuth)
    rng = np.random.default_rng(seed)
    f = rng.uniform(-1.0, 1.0, size=nodes.shape)
    return SurfaceForce(radius, nodes, weights, f)


# -- the potential ----------------------------------------------------------------


def potential(
    force: SurfaceForce,
    points: np.ndarray,
    t: float,
    table: KernelTable,
    n_sigma: int = 96,
    rel_tol: float = 1e-3,
):
    """Evaluate the single-layer space-time potential at the given points.

    Returns ``(values, info)`` where values has shape (P, 3) and info
    reports the time-depth cut. Integration runs in sigma = sqrt(t - s)
    over doubling panels until a panel contributes less than ``rel_tol``
    of the accumulated value; if the stored traction window is exhausted
    first, the evaluation fails with "signal range exceeded".
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    r = np.linalg.norm(pts, axis=1)
    if np.any(r <= force.radius):
        raise ValueError("inside obstacle")
    if force.times is not None and t > force.times[-1] + 1e-12:
        raise ValueError("signal range exceeded")

    if force.times is None:
        sigma_allowed = math.inf
    else:
        depth = t - float(force.times[0])
        if depth <= 0:
            raise ValueError("signal range exceeded")
        sigma_allowed = math.sqrt(depth)

    def panel(s_lo: float, s_hi: float, nodes_count: int) -> np.ndarray:
        if nodes_count % 2 == 1:
            nodes_count += 1
        sig = np.linspace(s_lo, s_hi, nodes_count + 1)
        h = sig[1] - sig[0]
        w = np.ones(sig.size)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        w *= h / 3.0
        acc = np.zeros((pts.shape[0], 3))
        for s, ws in zip(sig, w):
            if s <= 0.0:
                continue  # integrand vanishes like sigma at 0
            f = force.traction_at(t - s * s)
            z = (pts[:, None, :] - force.nodes[None, :, :]) / s
            kmat = table.evaluate(z)
            contrib = np.einsum("pkij,kj,k->pi", kmat, f, force.weights)
            acc += ws * 2.0 / (s * s) * contrib
        return acc

    sigma0 = min(4.0, sigma_allowed)
    total = panel(0.0, sigma0, n_sigma)
    s_lo = sigma0
    coarse = max(n_sigma // 4, 16)
    while True:
        scale = float(np.max(np.linalg.norm(total, axis=1)))
        s_hi = min(2.0 * s_lo, sigma_allowed)
        if s_hi <= s_lo * (1 + 1e-12):
            raise ValueError("signal range exceeded")
        seg = panel(s_lo, s_hi, coarse)
        total += seg
        seg_norm = float(np.max(np.linalg.norm(seg, axis=1)))
        s_lo = s_hi
        if seg_norm <= rel_tol * max(scale, 1e-300):
            break
        if s_lo >= sigma_allowed - 1e-12:
            raise ValueError("signal range exceeded")
    info = {"sigma_cut": s_lo, "time_depth": s_lo**2}
    return total, info


# -- decay fits --------------------------------------------------------------------


def farfield_fit(
    values: np.ndarray,
    radii: np.ndarray,
    min_radius: float | None = None,
) -> DecayFitResult:
    """Fit |value - a| ~ C r^e after removing the best constant a.

    The constant is seeded with the value at the largest radius (which the
    log-log seed fit therefore excludes) and refined jointly with (C, e)
    by nonlinear least squares in linear space.
    """
    values = np.asarray(values, dtype=float)
    radii = np.asarray(radii, dtype=float)
    if values.shape != radii.shape or values.ndim != 1:
        raise ValueError("values and radii must be matching 1D arrays")
    if radii.size < 6:
        raise ValueError("need at least 6 radii")
    if np.max(radii) / np.min(radii) < 3.0:
        raise ValueError("radii must span at least a factor of 3")
    if min_radius is not None and np.min(radii) < min_radius:
        raise ValueError(f"all radii must be >= {min_radius}")
    order = np.argsort(radii)
    radii = radii[order]
    values = values[order]

    a0 = values[-1]
    sub = values[:-1] - a0
    if np.any(sub <= 0):
        raise ValueError("fit degenerate")
    slope, intercept = np.polyfit(np.log(radii[:-1]), np.log(sub), 1)
    c0 = math.exp(intercept)

    def model(r, a, c, e):
        return a + c * r**e

    try:
        popt, _ = curve_fit(
            model,
            radii,
            values,
            p0=(a0, c0, slope),
            maxfev=20000,
        )
        a_fit, c_fit, e_fit = popt
        if c_fit <= 0:
            raise RuntimeError("sign flip")
    except (RuntimeError, ValueError):
        a_fit, c_fit, e_fit = a0, c0, slope

    resid_pts = values - model(radii, a_fit, c_fit, e_fit)
    denom = np.maximum(np.abs(values - a_fit), 1e-300)
    rms = float(np.sqrt(np.mean((resid_pts / denom) ** 2)))
    return DecayFitResult(
        exponent=float(e_fit),
        intercept=float(math.log(c_fit)),
        rms_residual=rms,
        r_min=float(radii[0]),
        r_max=float(radii[-1]),
    )


def _fibonacci_directions(count: int) -> np.ndarray:
    i = np.arange(count)
    golden = (1 + 5**0.5) / 2
    z = 1 - 2 * (i + 0.5) / count
    theta = 2 * np.pi * i / golden
    s = np.sqrt(1 - z**2)
    return np.stack([s * np.cos(theta), s * np.sin(theta), z], axis=1)


def potential_magnitudes(
    force: SurfaceForce,
    radii: np.ndarray,
    t: float,
    table: KernelTable,
    n_directions: int = 6,
    n_sigma: int = 96,
):
    """Mean |v| over sample directions at each radius, plus raw values."""
    dirs = _fibonacci_directions(n_directions)
    pts = (np.asarray(radii)[:, None, None] * dirs[None, :, :]).reshape(-1, 3)
    vals, info = potential(force, pts, t, table, n_sigma=n_sigma)
    vals = vals.reshape(len(radii), n_directions, 3)
    mags = np.mean(np.linalg.norm(vals, axis=2), axis=1)
    return mags, vals, info


def vorticity_magnitudes(
    force: SurfaceForce,
    radii: np.ndarray,
    t: float,
    table: KernelTable,
    n_directions: int = 4,
    n_sigma: int = 96,
    delta: float | None = None,
):
    """Mean |curl v| over directions per radius, via central differences."""
    radii = np.asarray(radii, dtype=float)
    if delta is None:
        delta = 0.02 * float(np.min(radii))
    dirs = _fibonacci_directions(n_directions)
    centers = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, 3)
    stencil = [np.zeros(3)]
    for ax in range(3):
        e = np.zeros(3)
        e[ax] = delta
        stencil += [e, -e]
    pts = (centers[:, None, :] + np.asarray(stencil)[None, :, :]).reshape(-1, 3)
    vals, info = potential(force, pts, t, table, n_sigma=n_sigma)
    vals = vals.reshape(len(centers), 7, 3)
    grad = np.empty((len(centers), 3, 3))  # grad[p, i, j] = d_i v_j
    for ax in range(3):
        grad[:, ax, :] = (vals[:, 1 + 2 * ax, :] - vals[:, 2 + 2 * ax, :]) / (
            2.0 * delta
        )
    omega = np.stack(
        [
            grad[:, 1, 2] - grad[:, 2, 1],
            grad[:, 2, 0] - grad[:, 0, 2],
            grad[:, 0, 1] - grad[:, 1, 0],
        ],
        axis=1,
    )
    mags = np.linalg.norm(omega, axis=1).reshape(len(radii), n_directions)
    return np.mean(mags, axis=1), info


def vorticity_decay_check(omega_mags: np.ndarray, radii: np.ndarray) -> DecayFitResult:
    """Fit the vorticity magnitudes; rejects all-zero input as degenerate."""
    omega_mags = np.asarray(omega_mags, dtype=float)
    if np.all(omega_mags == 0.0):
        raise ValueError("fit degenerate")
    return farfield_fit(omega_mags, radii)
