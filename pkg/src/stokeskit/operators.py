"""Discrete transforms and differential operators.

Conventions:

* Transforms are unitary (symmetric 1/sqrt(count) normalization), so
  Parseval holds without extra factors.
* Lateral first derivatives are spectral with the Nyquist column zeroed
  (odd symbol), vertical derivatives are second-order finite differences
  with one-sided second-order stencils on the two boundary planes.
* Vorticity is stored as the strictly upper-triangular part of
  w_ij = d_i u_j - d_j u_i; the lower triangle is its negation.
"""

from __future__ import annotations

import numpy as np

from .grids import Geometry, Grid, ScalarField, SpectralField, VectorField

__all__ = [
    "dft",
    "idft",
    "derivative",
    "second_derivative",
    "divergence",
    "gradient",
    "laplacian",
    "vorticity",
    "vorticity_component",
    "velocity_from_vorticity",
]


def dft(f: ScalarField) -> SpectralField:
    """Unitary discrete Fourier transform over the periodic directions."""
    grid = f.grid
    count = grid.N ** grid.lateral_dims
    coeff = np.fft.fftn(f.values, axes=grid.lateral_axes) / np.sqrt(count)
    return SpectralField(grid, coeff)


def idft(spec: SpectralField) -> ScalarField:
    """Inverse of :func:`dft`; discards the O(eps) imaginary residue."""
    grid = spec.grid
    count = grid.N ** grid.lateral_dims
    values = np.fft.ifftn(spec.coefficients, axes=grid.lateral_axes)
    values = values * np.sqrt(count)
    return ScalarField(grid, values.real)


# -- vertical finite-difference stencils -----------------------------------


def vertical_derivative(values: np.ndarray, h: float, axis: int = -1) -> np.ndarray:
    """Second-order first derivative on a uniform vertical grid.

    Centered in the interior, one-sided (-3, 4, -1)/(2h) at the two
    boundary planes.
    """
    v = np.moveaxis(values, axis, -1)
    out = np.empty_like(v)
    out[..., 1:-1] = (v[..., 2:] - v[..., :-2]) / (2.0 * h)
    out[..., 0] = (-3.0 * v[..., 0] + 4.0 * v[..., 1] - v[..., 2]) / (2.0 * h)
    out[..., -1] = (3.0 * v[..., -1] - 4.0 * v[..., -2] + v[..., -3]) / (2.0 * h)
    return np.moveaxis(out, -1, axis)


def vertical_second_derivative(
    values: np.ndarray, h: float, axis: int = -1
) -> np.ndarray:
    """Second-order second derivative; (2, -5, 4, -1)/h^2 at the boundaries."""
    v = np.moveaxis(values, axis, -1)
    out = np.empty_like(v)
    out[..., 1:-1] = (v[..., 2:] - 2.0 * v[..., 1:-1] + v[..., :-2]) / h**2
    out[..., 0] = (
        2.0 * v[..., 0] - 5.0 * v[..., 1] + 4.0 * v[..., 2] - v[..., 3]
    ) / h**2
    out[..., -1] = (
        2.0 * v[..., -1] - 5.0 * v[..., -2] + 4.0 * v[..., -3] - v[..., -4]
    ) / h**2
    return np.moveaxis(out, -1, axis)


def _spectral_axis_derivative(values: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    k = grid.wavenumbers_1d(zero_nyquist=True)
    shape = [1] * values.ndim
    shape[axis] = grid.N
    spec = np.fft.fft(values, axis=axis)
    spec *= 1j * k.reshape(shape)
    return np.fft.ifft(spec, axis=axis).real


def derivative(f: ScalarField, axis: int) -> ScalarField:
    """Partial derivative along one axis (spectral lateral, FD vertical)."""
    grid = f.grid
    if axis < 0 or axis >= grid.n:
        raise ValueError(f"axis {axis} out of range for dimension {grid.n}")
    if grid.is_periodic or axis < grid.vertical_axis:
        return ScalarField(grid, _spectral_axis_derivative(f.values, grid, axis))
    return ScalarField(grid, vertical_derivative(f.values, grid.h, axis=axis))


def second_derivative(f: ScalarField, axis: int) -> ScalarField:
    grid = f.grid
    if axis < 0 or axis >= grid.n:
        raise ValueError(f"axis {axis} out of range for dimension {grid.n}")
    if grid.is_periodic or axis < grid.vertical_axis:
        k = grid.wavenumbers_1d(zero_nyquist=False)
        shape = [1] * f.values.ndim
        shape[axis] = grid.N
        spec = np.fft.fft(f.values, axis=axis)
        spec *= -(k.reshape(shape) ** 2)
        return ScalarField(grid, np.fft.ifft(spec, axis=axis).real)
    return ScalarField(grid, vertical_second_derivative(f.values, grid.h, axis=axis))


def gradient(f: ScalarField) -> VectorField:
    return VectorField(f.grid, tuple(derivative(f, ax) for ax in range(f.grid.n)))


def laplacian(f: ScalarField) -> ScalarField:
    out = second_derivative(f, 0).values.copy()
    for ax in range(1, f.grid.n):
        out += second_derivative(f, ax).values
    return ScalarField(f.grid, out)


def divergence(v: VectorField) -> ScalarField:
    """Discrete divergence, one :func:`derivative` per axis."""
    grid = v.grid
    out = derivative(v.components[0], 0).values.copy()
    for ax in range(1, grid.n):
        out += derivative(v.components[ax], ax).values
    return ScalarField(grid, out)


def vorticity(v: VectorField) -> dict[tuple[int, int], ScalarField]:
    """All components w_ij = d_i u_j - d_j u_i for i < j."""
    grid = v.grid
    partials = [
        [derivative(v.components[j], i).values for j in range(grid.n)]
        for i in range(grid.n)
    ]
    out: dict[tuple[int, int], ScalarField] = {}
    for i in range(grid.n):
        for j in range(i + 1, grid.n):
            out[(i, j)] = ScalarField(grid, partials[i][j] - partials[j][i])
    return out


def vorticity_component(
    omega: dict[tuple[int, int], ScalarField], i: int, j: int
) -> ScalarField:
    """Accessor honoring the antisymmetry w_ji = -w_ij."""
    if i == j:
        key = next(iter(omega))
        grid = omega[key].grid
        return ScalarField(grid, np.zeros(grid.shape))
    if i < j:
        return omega[(i, j)]
    w = omega[(j, i)]
    return ScalarField(w.grid, -w.values)


def velocity_from_vorticity(
    omega: dict[tuple[int, int], ScalarField],
    mean: np.ndarray | list[float],
) -> tuple[VectorField, float]:
    """Recover the divergence-free velocity with given spatial mean.

    Solves ``lap u_i = -sum_j d_j w_ij`` spectrally on a PeriodicBox, with
    the zero mode pinned to ``mean``. Returns the field together with the
    compatibility residual ``max |vorticity(u) - omega|``; a large residual
    means the input did not come from any divergence-free field.
    """
    key = next(iter(omega))
    grid = omega[key].grid
    if not grid.is_periodic:
        raise ValueError("unsupported geometry")
    n = grid.n
    mean = np.asarray(mean, dtype=float)
    if mean.shape != (n,):
        raise ValueError(f"mean must have {n} entries")

    k = grid.wavenumber_grids(zero_nyquist=True)
    k2 = np.sum(k**2, axis=0)
    inv_k2 = np.zeros_like(k2)
    nonzero = k2 > 0
    inv_k2[nonzero] = 1.0 / k2[nonzero]

    omega_hat = {}
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            w = omega[(i, j)].values if i < j else -omega[(j, i)].values
            omega_hat[(i, j)] = np.fft.fftn(w)

    count = grid.N ** n
    comps = []
    for i in range(n):
        u_hat = np.zeros(grid.shape, dtype=complex)
        for j in range(n):
            if j == i:
                continue
            u_hat += 1j * k[j] * omega_hat[(i, j)]
        u_hat *= inv_k2
        u_hat.flat[0] = mean[i] * count
        comps.append(np.fft.ifftn(u_hat).real)

    u = VectorField.from_arrays(grid, comps, divfree_tol=1e-10)
    back = vorticity(u)
    residual = max(
        float(np.max(np.abs(back[key_].values - omega[key_].values)))
        for key_ in omega
    )
    return u, residual
