"""Grids and fields shared by every operator in the toolkit.

Domains are rectangular: a lateral torus of period ``L`` (all ``n``
directions periodic for a PeriodicBox) and, for wall-bounded geometries,
a vertical interval ``[0, H]`` resolved with ``M`` points. Lateral
directions are always handled spectrally, the vertical direction with
second-order finite differences.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class Geometry(enum.Enum):
    """Domain type: fully periodic box, wall at the bottom, or two walls."""

    PERIODIC_BOX = "periodic_box"
    HALF_STRIP = "half_strip"
    CHANNEL = "channel"


def _is_power_of_two(k: int) -> bool:
    return k >= 1 and (k & (k - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Discretization parameters for one rectangular domain.

    Parameters
    ----------
    n : int
        Spatial dimension, 2 or 3.
    N : int
        Points per lateral (periodic) direction; must be a power of two >= 4.
    L : float
        Lateral period.
    geometry : Geometry
        PERIODIC_BOX has no vertical interval; HALF_STRIP and CHANNEL are
        periodic in x' = (x_1 .. x_{n-1}) and gridded on [0, H] in x_n.
    M : int
        Vertical point count (wall-bounded geometries only).
    H : float
        Vertical height (wall-bounded geometries only).
    """

    n: int
    N: int
    L: float = 2.0 * math.pi
    geometry: Geometry = Geometry.PERIODIC_BOX
    M: int | None = None
    H: float | None = None

    def __post_init__(self) -> None:
        if self.n not in (2, 3):
            raise ValueError(f"dimension n must be 2 or 3, got {self.n}")
        if self.N < 4 or not _is_power_of_two(self.N):
            raise ValueError(f"N must be a power of two >= 4, got {self.N}")
        if not self.L > 0:
            raise ValueError("lateral period L must be positive")
        if self.geometry is Geometry.PERIODIC_BOX:
            if self.M is not None or self.H is not None:
                raise ValueError("PeriodicBox carries no vertical interval")
        else:
            if self.M is None or self.H is None:
                raise ValueError(f"{self.geometry.value} requires M and H")
            if self.M < 4:
                raise ValueError(f"M must be >= 4, got {self.M}")
            if not self.H > 0:
                raise ValueError("height H must be positive")

    # -- basic geometry helpers -------------------------------------------

    @property
    def is_periodic(self) -> bool:
        return self.geometry is Geometry.PERIODIC_BOX

    @property
    def lateral_dims(self) -> int:
        return self.n if self.is_periodic else self.n - 1

    @property
    def shape(self) -> tuple[int, ...]:
        if self.is_periodic:
            return (self.N,) * self.n
        return (self.N,) * (self.n - 1) + (self.M,)

    @property
    def lateral_axes(self) -> tuple[int, ...]:
        return tuple(range(self.lateral_dims))

    @property
    def vertical_axis(self) -> int:
        if self.is_periodic:
            raise ValueError("PeriodicBox has no vertical axis")
        return self.n - 1

    @property
    def h(self) -> float:
        """Vertical spacing H / (M - 1)."""
        if self.is_periodic:
            raise ValueError("PeriodicBox has no vertical spacing")
        return self.H / (self.M - 1)

    @property
    def dx(self) -> float:
        return self.L / self.N

    def lateral_coordinates(self) -> list[np.ndarray]:
        x = np.arange(self.N) * self.dx
        return [x] * self.lateral_dims

    def vertical_coordinates(self) -> np.ndarray:
        return np.linspace(0.0, self.H, self.M)

    def coordinate_arrays(self) -> list[np.ndarray]:
        """Meshgrid ('ij') of all coordinates, one array per axis."""
        one_d = self.lateral_coordinates()
        if not self.is_periodic:
            one_d = one_d + [self.vertical_coordinates()]
        return list(np.meshgrid(*one_d, indexing="ij"))

    @property
    def cell_volume(self) -> float:
        vol = self.dx ** self.lateral_dims
        if not self.is_periodic:
            vol *= self.h
        return vol

    # -- wavenumbers -------------------------------------------------------

    def wavenumbers_1d(self, zero_nyquist: bool = False) -> np.ndarray:
        """Wavenumbers 2*pi/L * {0, 1, .., N/2-1, -N/2, .., -1} (fft order)."""
        k = 2.0 * np.pi * np.fft.fftfreq(self.N, d=self.dx)
        if zero_nyquist:
            k = k.copy()
            k[self.N // 2] = 0.0
        return k

    def wavenumber_grids(self, zero_nyquist: bool = False) -> np.ndarray:
        """Stacked meshgrid of lateral (or full, if periodic) wavenumbers.

        Returns shape ``(lateral_dims, N, .., N)``. Zeroing the Nyquist
        column is the convention used for odd symbols (derivatives, Riesz)
        to avoid asymmetric artifacts.
        """
        k = self.wavenumbers_1d(zero_nyquist)
        grids = np.meshgrid(*([k] * self.lateral_dims), indexing="ij")
        return np.stack(grids)

    def rfft_wavenumber_grids(self, zero_nyquist: bool = False) -> np.ndarray:
        """Like :meth:`wavenumber_grids` but for the half-spectrum rfft layout."""
        k = self.wavenumbers_1d(zero_nyquist)
        kr = 2.0 * np.pi * np.fft.rfftfreq(self.N, d=self.dx)
        if zero_nyquist:
            kr = kr.copy()
            kr[-1] = 0.0
        axes = [k] * (self.lateral_dims - 1) + [kr]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack(grids)


def _check_finite(values: np.ndarray) -> None:
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite field")


@dataclass(frozen=True)
class ScalarField:
    """Real samples on a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(
                f"field shape {values.shape} does not match grid {self.grid.shape}"
            )
        _check_finite(values)
        object.__setattr__(self, "values", values)

    def max_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def mean(self) -> float:
        return float(np.mean(self.values))

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.grid, self.values - other.values)

    def __mul__(self, a: float) -> "ScalarField":
        return ScalarField(self.grid, self.values * a)

    __rmul__ = __mul__


@dataclass(frozen=True)
class VectorField:
    """n-component velocity-like field; may carry a divergence certificate.

    ``divfree_tol`` is a promise, not a computation: constructors that know
    the field is discretely divergence-free record the tolerance here so
    downstream consumers can rely on it (and tests can audit it).
    """

    grid: Grid
    components: tuple[ScalarField, ...]
    divfree_tol: float | None = None

    def __post_init__(self) -> None:
        comps = tuple(self.components)
        if len(comps) != self.grid.n:
            raise ValueError(
                f"expected {self.grid.n} components, got {len(comps)}"
            )
        for c in comps:
            if c.grid != self.grid:
                raise ValueError("component grids disagree")
        if self.divfree_tol is not None and self.divfree_tol < 0:
            raise ValueError("divfree_tol must be non-negative")
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_arrays(
        cls, grid: Grid, arrays, divfree_tol: float | None = None
    ) -> "VectorField":
        comps = tuple(ScalarField(grid, a) for a in arrays)
        return cls(grid, comps, divfree_tol)

    def component_values(self) -> list[np.ndarray]:
        return [c.values for c in self.components]

    def max_norm(self) -> float:
        return max(c.max_norm() for c in self.components)

    def __add__(self, other: "VectorField") -> "VectorField":
        comps = tuple(a + b for a, b in zip(self.components, other.components))
        return VectorField(self.grid, comps)

    def __sub__(self, other: "VectorField") -> "VectorField":
        comps = tuple(a - b for a, b in zip(self.components, other.components))
        return VectorField(self.grid, comps)


@dataclass(frozen=True)
class SpectralField:
    """Complex coefficients over the periodic directions of a grid.

    For a PeriodicBox the array covers all n wavenumber axes; for wall
    geometries the trailing axis is the (untransformed) vertical index.
    Coefficients of real fields satisfy c(-xi) = conj(c(xi)).
    """

    grid: Grid
    coefficients: np.ndarray

    def __post_init__(self) -> None:
        coeff = np.asarray(self.coefficients, dtype=complex)
        if coeff.shape != self.grid.shape:
            raise ValueError(
                f"coefficient shape {coeff.shape} does not match grid {self.grid.shape}"
            )
        object.__setattr__(self, "coefficients", coeff)

    def conjugate_symmetry_defect(self) -> float:
        """max |c(-xi) - conj(c(xi))| over all lateral wavenumbers."""
        c = self.coefficients
        flipped = c
        for ax in self.grid.lateral_axes:
            flipped = np.flip(np.roll(flipped, -1, axis=ax), axis=ax)
        return float(np.max(np.abs(flipped - np.conj(c))))


def random_scalar_field(
    grid: Grid, seed: int, band_limit: int | None = None, amplitude: float = 1.0
) -> ScalarField:
    """Random band-limited real field (Nyquist content always removed).

    The field is synthesized in spectral space with conjugate symmetry, so
    it is exactly band-limited: modes with any lateral index above
    ``band_limit`` (default N/4) vanish. This is the dealiasing hygiene all
    odd-symbol operator identities rely on.
    """
    rng = np.random.default_rng(seed)
    if band_limit is None:
        band_limit = grid.N // 4
    if band_limit > grid.N // 2 - 1:
        raise ValueError("band_limit exceeds resolved wavenumbers")
    shape = grid.shape
    values = rng.standard_normal(shape)
    spec = np.fft.fftn(values, axes=grid.lateral_axes)
    idx = np.fft.fftfreq(grid.N) * grid.N
    keep = np.abs(idx) <= band_limit
    for ax in grid.lateral_axes:
        sl = [np.newaxis] * spec.ndim
        sl[ax] = slice(None)
        spec = spec * keep[tuple(sl)]
    out = np.fft.ifftn(spec, axes=grid.lateral_axes).real
    peak = np.max(np.abs(out))
    if peak > 0:
        out = out * (amplitude / peak)
    return ScalarField(grid, out)


def random_vector_field(
    grid: Grid, seed: int, band_limit: int | None = None, amplitude: float = 1.0
) -> VectorField:
    comps = tuple(
        random_scalar_field(grid, seed + 101 * i, band_limit, amplitude)
        for i in range(grid.n)
    )
    return VectorField(grid, comps)
