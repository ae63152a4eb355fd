"""Time-stepping unsteady Stokes on periodic and wall-bounded grids.

Discretization: lateral Fourier decoupling turns each lateral mode into a
1D coupled velocity-pressure two-point boundary value problem in x_n,
advanced with Crank-Nicolson. Per mode, the pressure is eliminated through
the discrete divergence-constraint rows of a banded saddle system, so
every step is exactly divergence-free mode by mode and exactly no-slip at
the wall. The lateral zero mode is special: the lateral-mean shear solves
the forced 1D heat equation with the configured pressure-gradient signal,
and its wall-normal component vanishes identically.

Runs live on the negative time axis (they end at t = 0), matching the
compactly supported forcing signals: on a finite domain, bounded data
relaxes forward in time onto the classified family (zero wall-normal
velocity, laterally constant shear). This forward relaxation is the
finite-domain shadow of the classification, not a proof of it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .bump import bump_derivative
from .flows import TimeSignal
from .grids import Geometry, Grid, ScalarField, VectorField
from .operators import divergence, vorticity

__all__ = [
    "TopBC",
    "SimConfig",
    "LiouvilleDiagnostics",
    "SimState",
    "RunResult",
    "Stepper",
    "initial_state",
    "step",
    "run",
    "liouville_membership",
    "mode_decay_rates",
]


class TopBC(enum.Enum):
    DIRICHLET0 = "dirichlet0"
    FREE_SLIP = "free_slip"


@dataclass(frozen=True)
class SimConfig:
    """Parameters of one relaxation run.

    ``forcing`` holds the lateral pressure-gradient signals c_i(t) of the
    linear pressure form (momentum forcing is -c_i); ``top_velocity`` maps
    time to prescribed lateral top values for the zero mode (used when
    tracking an explicit shear solution on a truncated domain).
    """

    grid: Grid
    dt: float
    T: float
    t0: float | None = None
    top_bc: TopBC = TopBC.DIRICHLET0
    forcing: tuple[TimeSignal, ...] | None = None
    top_velocity: Callable[[float], np.ndarray] | None = None
    seed: int = 0
    stride: int = 10
    init_amplitude: float = 0.1

    def __post_init__(self) -> None:
        if not 0 < self.dt <= 0.1:
            raise ValueError("dt must lie in (0, 0.1]")
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.forcing is not None and len(self.forcing) != self.grid.n - 1:
            raise ValueError(f"need {self.grid.n - 1} forcing signals")

    @property
    def start_time(self) -> float:
        return -self.T if self.t0 is None else self.t0

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


@dataclass(frozen=True)
class LiouvilleDiagnostics:
    """Distances of a state to the classified families.

    lateral_dev = 0 together with un_max = 0 characterizes membership in
    the wall-bounded family u = u(x_n, t), u_n = 0; vort_dev measures the
    homogenization of vorticity toward constants on the PeriodicBox.
    """

    t: float
    un_max: float
    lateral_dev: float
    vort_dev: float
    energy: float
    shear_profile: np.ndarray | None = None


@dataclass(frozen=True)
class SimState:
    t: float
    u: VectorField
    diagnostics: LiouvilleDiagnostics


@dataclass(frozen=True)
class RunResult:
    times: np.ndarray
    diagnostics: list[LiouvilleDiagnostics]
    initial: SimState
    final: SimState

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(d, name) for d in self.diagnostics])


# -- diagnostics -------------------------------------------------------------


def compute_diagnostics(u: VectorField, t: float) -> LiouvilleDiagnostics:
    grid = u.grid
    comps = u.component_values()
    energy = grid.cell_volume * float(sum(np.sum(c**2) for c in comps))
    un_max = float(np.max(np.abs(comps[-1])))
    if grid.is_periodic:
        lateral_dev = max(
            float(np.max(np.abs(c - np.mean(c)))) for c in comps
        )
        w = vorticity(u)
        vort_dev = max(
            float(np.max(np.abs(f.values - np.mean(f.values)))) for f in w.values()
        )
        profile = None
    else:
        lat_axes = tuple(range(grid.n - 1))
        lateral_dev = 0.0
        profiles = []
        for i, c in enumerate(comps):
            mean_profile = np.mean(c, axis=lat_axes)
            lateral_dev = max(
                lateral_dev, float(np.max(np.abs(c - mean_profile)))
            )
            if i < grid.n - 1:
                profiles.append(mean_profile)
        vort_dev = math.nan
        profile = np.stack(profiles)
    return LiouvilleDiagnostics(t, un_max, lateral_dev, vort_dev, energy, profile)


def liouville_membership(
    state: SimState, tol: float
) -> tuple[bool, dict[str, float]]:
    """True iff the state is within tol of the wall-bounded classified family."""
    if state.u.grid.is_periodic:
        raise ValueError("membership check applies to wall-bounded geometries")
    d = state.diagnostics
    distances = {"un_max": d.un_max, "lateral_dev": d.lateral_dev}
    return (d.un_max <= tol and d.lateral_dev <= tol), distances


# -- initial data ------------------------------------------------------------


def _band_limited_lateral(grid: Grid, seed: int, zero_mean: bool) -> np.ndarray:
    rng = np.random.default_rng(seed)
    shape = (grid.N,) * (grid.n - 1)
    g = rng.standard_normal(shape)
    spec = np.fft.fftn(g)
    idx = np.abs(np.fft.fftfreq(grid.N) * grid.N)
    keep = idx <= grid.N // 4
    for ax in range(g.ndim):
        sl = [np.newaxis] * g.ndim
        sl[ax] = slice(None)
        spec = spec * keep[tuple(sl)]
    if zero_mean:
        spec[(0,) * g.ndim] = 0.0
    out = np.fft.ifftn(spec).real
    peak = np.max(np.abs(out))
    return out / peak if peak > 0 else out


def initial_state(cfg: SimConfig) -> SimState:
    """Random divergence-free data compatible with the geometry.

    Wall-bounded grids get the curl of a stream field with a bump envelope
    supported in [H/4, 3H/4]: the discrete curl of commuting one-axis
    operators is exactly divergence-free, and the envelope vanishes on the
    boundary planes, so the trace is exactly zero. The lateral randoms are
    mean-free, so the initial zero mode vanishes.
    """
    grid = cfg.grid
    amp = cfg.init_amplitude
    if grid.is_periodic:
        from .grids import random_vector_field
        from .multipliers import helmholtz_project

        v = random_vector_field(grid, seed=cfg.seed, amplitude=amp)
        u = helmholtz_project(v)
        u = VectorField(grid, u.components, divfree_tol=1e-10)
    else:
        z = grid.vertical_coordinates()
        s = (z - grid.H / 4.0) / (grid.H / 2.0)
        env = bump_derivative(s, 0)
        from .operators import vertical_derivative

        lateral = [
            _band_limited_lateral(grid, cfg.seed + 7 * i, zero_mean=True)
            for i in range(3)
        ]
        if grid.n == 2:
            psi = lateral[0][..., np.newaxis] * env
            u1 = vertical_derivative(psi, grid.h, axis=-1)
            u2 = -_lateral_spectral_derivative(psi, grid, 0)
            comps = [u1, u2]
        else:
            a1 = lateral[0][..., np.newaxis] * env
            a2 = lateral[1][..., np.newaxis] * env
            a3 = lateral[2][..., np.newaxis] * env
            u1 = _lateral_spectral_derivative(a3, grid, 1) - vertical_derivative(
                a2, grid.h, axis=-1
            )
            u2 = vertical_derivative(a1, grid.h, axis=-1) - _lateral_spectral_derivative(
                a3, grid, 0
            )
            u3 = _lateral_spectral_derivative(a2, grid, 0) - _lateral_spectral_derivative(
                a1, grid, 1
            )
            comps = [u1, u2, u3]
        peak = max(np.max(np.abs(c)) for c in comps)
        if peak > 0:
            comps = [c * (amp / peak) for c in comps]
        u = VectorField.from_arrays(grid, comps, divfree_tol=1e-10)
    t0 = cfg.start_time
    return SimState(t0, u, compute_diagnostics(u, t0))


def _lateral_spectral_derivative(values: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    k = grid.wavenumbers_1d(zero_nyquist=True)
    shape = [1] * values.ndim
    shape[axis] = grid.N
    spec = np.fft.fft(values, axis=axis)
    spec *= 1j * k.reshape(shape)
    return np.fft.ifft(spec, axis=axis).real


# -- the stepper ---------------------------------------------------------------


class Stepper:
    """Factorized Crank-Nicolson stepper bound to one configuration."""

    def __init__(self, cfg: SimConfig) -> None:
        self.cfg = cfg
        self.grid = cfg.grid
        self.dt = cfg.dt
        if self.grid.is_periodic:
            self._setup_periodic()
        else:
            self._setup_wall()

    # ---- periodic box ----

    def _setup_periodic(self) -> None:
        grid = self.grid
        k = grid.rfft_wavenumber_grids(zero_nyquist=False)
        k2_full = np.sum(k**2, axis=0)
        a = 0.5 * self.dt * k2_full
        self.cn_factor = (1.0 - a) / (1.0 + a)
        kt = grid.rfft_wavenumber_grids(zero_nyquist=True)
        k2t = np.sum(kt**2, axis=0)
        inv = np.zeros_like(k2t)
        nz = k2t > 0
        inv[nz] = 1.0 / k2t[nz]
        n = grid.n
        self.proj = np.empty((n, n) + k2t.shape)
        for i in range(n):
            for j in range(n):
                self.proj[i, j] = (1.0 if i == j else 0.0) - kt[i] * kt[j] * inv

    def _step_periodic(self, uhat: np.ndarray, t: float) -> np.ndarray:
        cfg = self.cfg
        out = uhat * self.cn_factor
        out = np.einsum("ij...,j...->i...", self.proj, out)
        if cfg.forcing is not None:
            # constant body force -c_i(t): acts on the zero mode only;
            # the unnormalized rfftn zero coefficient is mean * count
            t_mid = t + 0.5 * self.dt
            count = self.grid.N ** self.grid.lateral_dims
            for i, sig in enumerate(cfg.forcing):
                out[i][(0,) * self.grid.lateral_dims] += (
                    -float(sig.at(t_mid)) * self.dt * count
                )
        return out

    # ---- wall-bounded ----

    def _setup_wall(self) -> None:
        grid = self.grid
        n, M, h, dt = grid.n, grid.M, grid.h, self.dt
        kstack = grid.rfft_wavenumber_grids(zero_nyquist=False)
        self.mode_shape = kstack.shape[1:]
        kflat = kstack.reshape(grid.n - 1, -1)
        self.k_flat = kflat
        self.k2_flat = np.sum(kflat**2, axis=0)
        K = kflat.shape[1]
        self.n_modes = K
        # block system over all nonzero modes, unknowns (u_1..u_n, p) per plane
        blk = (n + 1) * M
        rows, cols, vals = [], [], []

        def add(r, c, v):
            rows.append(r)
            cols.append(c)
            vals.append(v)

        modes = np.arange(1, K)  # skip the zero mode
        base = (modes - 1) * blk
        alpha = 1.0 + 0.5 * dt * (self.k2_flat[modes] + 2.0 / h**2)
        beta = np.full(modes.shape, -0.5 * dt / h**2)
        ones = np.ones(modes.shape)

        def iu(j, c):
            return base + (n + 1) * j + c

        def ip(j):
            return base + (n + 1) * j + n

        for j in range(1, M - 1):
            for c in range(n - 1):
                add(iu(j, c), iu(j, c), alpha)
                add(iu(j, c), iu(j - 1, c), beta)
                add(iu(j, c), iu(j + 1, c), beta)
                add(iu(j, c), ip(j), dt * 1j * kflat[c, modes])
            add(iu(j, n - 1), iu(j, n - 1), alpha)
            add(iu(j, n - 1), iu(j - 1, n - 1), beta)
            add(iu(j, n - 1), iu(j + 1, n - 1), beta)
            add(iu(j, n - 1), ip(j + 1), ones * (dt / (2 * h)))
            add(iu(j, n - 1), ip(j - 1), ones * (-dt / (2 * h)))
        for j in range(M):
            for c in range(n - 1):
                add(ip(j), iu(j, c), 1j * kflat[c, modes])
            if j == 0:
                add(ip(0), iu(0, n - 1), ones * (-3 / (2 * h)))
                add(ip(0), iu(1, n - 1), ones * (2 / h))
                add(ip(0), iu(2, n - 1), ones * (-1 / (2 * h)))
            elif j == M - 1:
                add(ip(j), iu(M - 1, n - 1), ones * (3 / (2 * h)))
                add(ip(j), iu(M - 2, n - 1), ones * (-2 / h))
                add(ip(j), iu(M - 3, n - 1), ones * (1 / (2 * h)))
            else:
                add(ip(j), iu(j + 1, n - 1), ones * (1 / (2 * h)))
                add(ip(j), iu(j - 1, n - 1), ones * (-1 / (2 * h)))
        for c in range(n):
            add(iu(0, c), iu(0, c), ones)
        if self.cfg.top_bc is TopBC.DIRICHLET0:
            for c in range(n):
                add(iu(M - 1, c), iu(M - 1, c), ones)
        else:
            for c in range(n - 1):
                add(iu(M - 1, c), iu(M - 1, c), ones * (3 / (2 * h)))
                add(iu(M - 1, c), iu(M - 2, c), ones * (-2 / h))
                add(iu(M - 1, c), iu(M - 3, c), ones * (1 / (2 * h)))
            add(iu(M - 1, n - 1), iu(M - 1, n - 1), ones)

        size = (K - 1) * blk
        A = sp.coo_matrix(
            (
                np.concatenate([np.asarray(v, dtype=complex) for v in vals]),
                (
                    np.concatenate([np.asarray(r) for r in rows]),
                    np.concatenate([np.asarray(c) for c in cols]),
                ),
            ),
            shape=(size, size),
        ).tocsc()
        try:
            self.block_lu = spla.splu(A)
        except RuntimeError:
            self._name_failing_mode(blk, A)
            raise
        self.blk = blk

        # index maps: velocity unknowns of mode m (flat index >= 1), comp c, plane j
        j_idx = np.arange(M)
        self.extract_idx = np.empty((n, K - 1, M), dtype=np.int64)
        for c in range(n):
            self.extract_idx[c] = base[:, None] + (n + 1) * j_idx[None, :] + c

        # zero mode: CN heat matrices for the lateral mean
        a0 = 1.0 + dt / h**2
        b0 = -0.5 * dt / h**2
        A0 = np.zeros((M, M))
        for j in range(1, M - 1):
            A0[j, j] = a0
            A0[j, j - 1] = b0
            A0[j, j + 1] = b0
        A0[0, 0] = 1.0
        if self.cfg.top_bc is TopBC.DIRICHLET0 or self.cfg.top_velocity is not None:
            A0[M - 1, M - 1] = 1.0
        else:
            A0[M - 1, M - 1] = 3 / (2 * h)
            A0[M - 1, M - 2] = -2 / h
            A0[M - 1, M - 3] = 1 / (2 * h)
        self.zero_lu = sla.lu_factor(A0)

    def _name_failing_mode(self, blk: int, A: sp.csc_matrix) -> None:
        for m in range(1, self.n_modes):
            sub = A[(m - 1) * blk : m * blk, (m - 1) * blk : m * blk]
            try:
                spla.splu(sub.tocsc())
            except RuntimeError:
                kvec = tuple(float(self.k_flat[c, m]) for c in range(self.grid.n - 1))
                raise RuntimeError(
                    f"solver failure on lateral mode {kvec}"
                ) from None

    def _step_wall(self, uhat: np.ndarray, t: float) -> np.ndarray:
        grid, cfg = self.grid, self.cfg
        n, M, h, dt = grid.n, grid.M, grid.h, self.dt
        K = self.n_modes
        u = uhat.reshape(n, K, M)
        lap = np.zeros_like(u)
        lap[:, :, 1:-1] = (u[:, :, 2:] - 2.0 * u[:, :, 1:-1] + u[:, :, :-2]) / h**2
        R = (1.0 - 0.5 * dt * self.k2_flat[None, :, None]) * u + 0.5 * dt * lap

        rhs = np.zeros((K - 1) * self.blk, dtype=complex)
        for c in range(n):
            rhs[self.extract_idx[c][:, 1 : M - 1]] = R[c, 1:, 1 : M - 1]
            rhs[self.extract_idx[c][:, 0]] = 0.0
            rhs[self.extract_idx[c][:, M - 1]] = 0.0
        sol = self.block_lu.solve(rhs)
        out = np.empty_like(u)
        for c in range(n):
            out[c, 1:] = sol[self.extract_idx[c]]

        # zero mode: forced 1D heat equation for the lateral mean shear;
        # the unnormalized rfft zero coefficient is (lateral mean) * count
        t_mid = t + 0.5 * dt
        t_next = t + dt
        count = grid.N ** (n - 1)
        top_vals = None
        if cfg.top_velocity is not None:
            top_vals = np.asarray(cfg.top_velocity(t_next), dtype=float)
        for c in range(n - 1):
            prof = u[c, 0].real
            lap0 = np.zeros(M)
            lap0[1:-1] = (prof[2:] - 2 * prof[1:-1] + prof[:-2]) / h**2
            r0 = (prof + 0.5 * dt * lap0)[1 : M - 1]
            if cfg.forcing is not None:
                r0 = r0 - dt * float(cfg.forcing[c].at(t_mid)) * count
            b0 = np.zeros(M)
            b0[1 : M - 1] = r0
            if top_vals is not None:
                b0[M - 1] = top_vals[c] * count
            out[c, 0] = sla.lu_solve(self.zero_lu, b0)
        out[n - 1, 0] = 0.0
        return out.reshape(uhat.shape)

    # ---- public stepping ----

    def to_spectral(self, u: VectorField) -> np.ndarray:
        grid = self.grid
        axes = grid.lateral_axes
        return np.stack(
            [np.fft.rfftn(c.values, axes=axes) for c in u.components]
        )

    def to_physical(self, uhat: np.ndarray, t: float) -> SimState:
        grid = self.grid
        axes = grid.lateral_axes
        sizes = (grid.N,) * grid.lateral_dims
        comps = [np.fft.irfftn(uhat[c], s=sizes, axes=axes) for c in range(grid.n)]
        u = VectorField.from_arrays(grid, comps, divfree_tol=1e-10)
        return SimState(t, u, compute_diagnostics(u, t))

    def step_spectral(self, uhat: np.ndarray, t: float) -> np.ndarray:
        if self.grid.is_periodic:
            return self._step_periodic(uhat, t)
        return self._step_wall(uhat, t)

    def step(self, state: SimState) -> SimState:
        uhat = self.to_spectral(state.u)
        uhat = self.step_spectral(uhat, state.t)
        return self.to_physical(uhat, state.t + self.dt)

    def run(self, state: SimState | None = None) -> RunResult:
        cfg = self.cfg
        if state is None:
            state = initial_state(cfg)
        initial = state
        uhat = self.to_spectral(state.u)
        t = state.t
        times = [t]
        diags = [state.diagnostics]
        for k in range(cfg.n_steps):
            uhat = self.step_spectral(uhat, t)
            t = cfg.start_time + (k + 1) * cfg.dt
            if (k + 1) % cfg.stride == 0 or k + 1 == cfg.n_steps:
                snap = self.to_physical(uhat, t)
                times.append(t)
                diags.append(snap.diagnostics)
        final = self.to_physical(uhat, t)
        return RunResult(np.array(times), diags, initial, final)


def step(state: SimState, cfg: SimConfig) -> SimState:
    """Advance one Crank-Nicolson step (one-off; reuse a Stepper for loops)."""
    return Stepper(cfg).step(state)


def run(cfg: SimConfig, state: SimState | None = None) -> RunResult:
    """Run the relaxation harness, emitting diagnostics every ``stride`` steps."""
    return Stepper(cfg).run(state)


# -- independent mode analysis -------------------------------------------------


def mode_decay_rates(
    grid: Grid,
    kvec: Sequence[float],
    top_bc: TopBC = TopBC.DIRICHLET0,
    count: int = 4,
    return_vectors: bool = False,
):
    """Slowest decay rates of one lateral mode from the dense DAE pencil.

    Independent of the time stepper: assembles the same spatial operators
    into the constrained eigenvalue pencil and solves it with a dense
    generalized eigensolver. The zero mode reduces to the Dirichlet (or
    free-slip) heat spectrum. With ``return_vectors`` the velocity parts
    of the eigenvectors are returned as (count, n, M) profiles.
    """
    n, M, h = grid.n, grid.M, grid.h
    kvec = np.asarray(kvec, dtype=float)
    k2 = float(np.sum(kvec**2))
    if k2 == 0.0:
        # zero mode: pure heat spectrum of one lateral shear component
        A0 = np.zeros((M, M))
        B0 = np.zeros((M, M))
        for j in range(1, M - 1):
            A0[j, j] = -2.0 / h**2
            A0[j, j - 1] = 1.0 / h**2
            A0[j, j + 1] = 1.0 / h**2
            B0[j, j] = 1.0
        A0[0, 0] = 1.0
        if top_bc is TopBC.DIRICHLET0:
            A0[M - 1, M - 1] = 1.0
        else:
            A0[M - 1, M - 1] = 3 / (2 * h)
            A0[M - 1, M - 2] = -2 / h
            A0[M - 1, M - 3] = 1 / (2 * h)
        w = sla.eig(A0, B0, right=False)
        finite = w[np.isfinite(w)]
        rates = -np.real(finite[np.real(finite) < -1e-10])
        rates.sort()
        if return_vectors:
            raise ValueError("eigenvectors are only returned for nonzero modes")
        return rates[:count]
    nm = n * M
    S = nm + M
    Apen = np.zeros((S, S), dtype=complex)
    Bpen = np.zeros((S, S), dtype=complex)
    for c in range(n):
        for j in range(1, M - 1):
            r = c * M + j
            Apen[r, c * M + j] = -(k2 + 2.0 / h**2)
            Apen[r, c * M + j - 1] = 1.0 / h**2
            Apen[r, c * M + j + 1] = 1.0 / h**2
            Bpen[r, r] = 1.0
    for j in range(1, M - 1):
        for c in range(n - 1):
            Apen[c * M + j, nm + j] = -1j * kvec[c]
        Apen[(n - 1) * M + j, nm + j + 1] = -1.0 / (2 * h)
        Apen[(n - 1) * M + j, nm + j - 1] = 1.0 / (2 * h)
    for j in range(M):
        r = nm + j
        for c in range(n - 1):
            Apen[r, c * M + j] = 1j * kvec[c]
        if j == 0:
            Apen[r, (n - 1) * M + 0] = -3 / (2 * h)
            Apen[r, (n - 1) * M + 1] = 2 / h
            Apen[r, (n - 1) * M + 2] = -1 / (2 * h)
        elif j == M - 1:
            Apen[r, (n - 1) * M + M - 1] = 3 / (2 * h)
            Apen[r, (n - 1) * M + M - 2] = -2 / h
            Apen[r, (n - 1) * M + M - 3] = 1 / (2 * h)
        else:
            Apen[r, (n - 1) * M + j + 1] = 1 / (2 * h)
            Apen[r, (n - 1) * M + j - 1] = -1 / (2 * h)
    for c in range(n):
        Apen[c * M, c * M] = 1.0
        r = c * M + M - 1
        if top_bc is TopBC.DIRICHLET0 or c == n - 1:
            Apen[r, r] = 1.0
        else:
            Apen[r, c * M + M - 1] = 3 / (2 * h)
            Apen[r, c * M + M - 2] = -2 / h
            Apen[r, c * M + M - 3] = 1 / (2 * h)
    w, vr = sla.eig(Apen, Bpen, right=True)
    decaying = np.isfinite(w) & (np.real(w) < -1e-10)
    if not return_vectors:
        rates = -np.real(w[decaying])
        rates.sort()
        return rates[:count]
    # eigenvectors only make sense mode by mode: keep real eigenvalues
    keep = decaying & (np.abs(np.imag(w)) < 1e-8 * np.abs(np.real(w)))
    rates = -np.real(w[keep])
    order = np.argsort(rates)[:count]
    vecs = vr[:, keep][:, order]
    profiles = np.empty((order.size, n, M), dtype=complex)
    for i in range(order.size):
        for c in range(n):
            profiles[i, c] = vecs[c * M : (c + 1) * M, i]
    return rates[order], profiles
