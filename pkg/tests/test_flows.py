import numpy as np
import pytest

from stokeskit.bump import standard_mollifier
from stokeskit.grids import Geometry, Grid, ScalarField, VectorField
from stokeskit import flows


def strip(n=3, N=8, M=65, H=8.0):
    return Grid(n=n, N=N, geometry=Geometry.HALF_STRIP, M=M, H=H)


def step_signal(t_step=-2.0, t0=-4.0, t_end=-0.5, dt=0.001):
    t = np.arange(t0, t_end + dt / 2, dt)
    vals = (t >= t_step).astype(float)
    return flows.TimeSignal(vals, dt, t0, support=(t_step, t[-1]))


# -- TimeSignal ----------------------------------------------------------------


def test_signal_invariants():
    with pytest.raises(ValueError, match="negative time"):
        flows.TimeSignal(np.zeros(8), 0.1, -0.3, support=(-0.2, 0.5))
    with pytest.raises(ValueError, match="vanish"):
        flows.TimeSignal(np.ones(8), 0.1, -2.0, support=(-1.8, -1.5))
    with pytest.raises(ValueError, match="non-finite"):
        flows.TimeSignal(np.array([0.0, np.nan, 0.0]), 0.1, -2.0)


def test_signal_range_exceeded():
    # support extends below the stored window: evaluating there must fail
    sig = flows.TimeSignal(
        np.array([0.3, 0.2, 0.1, 0.0]), 0.5, -2.0, support=(-4.0, -0.5)
    )
    with pytest.raises(ValueError, match="signal range exceeded"):
        sig.at(-3.0)
    assert sig.at(-4.5) == 0.0  # outside support: fine
    assert sig.at(-1.75) == pytest.approx(0.25)


def test_bump_signal_support():
    sig = flows.bump_signal(-2.0, -1.0, 0.01)
    assert sig.max_norm() == pytest.approx(1.0)
    assert abs(sig.at(-2.0)) < 1e-14
    assert abs(sig.at(-0.9)) == 0.0


# -- mollification ---------------------------------------------------------------


def test_mollify_constant_preserved():
    dt = 0.01
    t = np.arange(-3.0, -1.0 + dt / 2, dt)
    sig = flows.TimeSignal(np.full(t.size, 2.0), dt, -3.0)
    for eps in (0.05, 0.2):
        out = flows.mollify_time(sig, eps)
        # away from the window edges the zero extension is invisible
        mid = out.at(np.linspace(-2.8, -1.5, 50))
        assert np.max(np.abs(mid - 2.0)) < 1e-6


def test_mollify_step_matches_closed_form():
    # closed form: d_t u^eps(t) = eta((t_step - t)/eps)/eps
    eta = standard_mollifier()
    sig = step_signal()
    eps = 0.1
    d1 = flows.mollify_time(sig, eps, k=1)
    t = d1.times
    closed = eta.value((-2.0 - t) / eps) / eps
    num_sup = np.max(np.abs(d1.samples))
    oracle_sup = np.max(closed)
    assert abs(num_sup - oracle_sup) / oracle_sup < 0.05
    bound = eta.l1_norm(1) / eps * sig.max_norm()
    assert num_sup <= bound * 1.01


def test_mollify_bounds_all_orders():
    sig = step_signal()
    t_osc = -4.0 + 0.001 * np.arange(3501)
    osc = flows.TimeSignal(np.sin(40.0 * t_osc), 0.001, -4.0)
    eta = standard_mollifier()
    for u in (sig, osc):
        for eps in (0.1, 0.01):
            for k in (1, 2):
                out = flows.mollify_time(u, eps, k=k)
                bound = eta.l1_norm(k) / eps**k * u.max_norm()
                assert np.max(np.abs(out.samples)) <= bound * 1.01


def test_mollify_converges_to_smooth_signal():
    dt = 0.0005
    t = np.arange(-4.0, -0.5 + dt / 2, dt)
    omega = 3.0
    sig = flows.TimeSignal(np.sin(omega * t), dt, -4.0)
    eta = standard_mollifier()
    m1 = float(np.trapezoid(np.linspace(0, 1, 4001) * eta.value(np.linspace(0, 1, 4001)), dx=1 / 4000))
    for eps in (0.02, 0.01):
        out = flows.mollify_time(sig, eps)
        tt = np.linspace(-3.5, -1.0, 200)
        err = np.max(np.abs(out.at(tt) - np.sin(omega * tt)))
        taylor = eps * omega * m1 + (eps * omega) ** 2
        assert err <= taylor * 1.05


def test_mollify_rejects_bad_args():
    sig = step_signal()
    with pytest.raises(ValueError, match="positive"):
        flows.mollify_time(sig, -0.1)
    with pytest.raises(ValueError, match="unsupported"):
        flows.mollify_time(sig, 0.1, k=5)


# -- dirichlet_heat_shear ---------------------------------------------------------


def test_shear_zero_forcing():
    f = flows.bump_signal(-2.0, -1.0, 0.01, amplitude=0.0)
    u = flows.dirichlet_heat_shear(f, np.linspace(0, 8, 65), -0.5)
    assert np.max(np.abs(u)) == 0.0


def test_shear_far_field_limit():
    # beyond the forcing window and far from the wall, u -> integral of f
    f = flows.bump_signal(-2.0, -1.0, 0.005)
    t = -0.5
    xn = np.array([0.0, 10.0 * np.sqrt(t + 2.0) + 5.0])
    u = flows.dirichlet_heat_shear(f, xn, t)
    assert u[0] == 0.0
    total = f.l1_norm()
    assert abs(u[1] - total) / total < 0.01


def test_shear_monotone_and_bounded():
    f = flows.bump_signal(-2.0, -1.0, 0.005)
    xn = np.linspace(0, 8, 65)
    for t in (-1.5, -0.8, -0.2):
        u = flows.dirichlet_heat_shear(f, xn, t)
        assert np.all(u >= -1e-12)
        # trapezoid L1 differs from the Simpson quadrature by O(dt^2)
        assert np.max(u) <= f.l1_norm() * (1 + 1e-5)


def ftcs_heat_oracle(f: flows.TimeSignal, H_big, h, t_eval, xn_out):
    """Independent 1D forced-heat solver (explicit FTCS, fine grid)."""
    a, _ = f.support
    x = np.arange(0.0, H_big + h / 2, h)
    dt = 0.4 * h * h
    u = np.zeros(x.size)
    t = a
    out = {}
    targets = sorted(t_eval)
    idx = 0
    while idx < len(targets):
        step = min(dt, targets[idx] - t)
        if step > 1e-14:
            lap = np.zeros_like(u)
            lap[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / h**2
            u = u + step * (lap + f.at(t + step / 2.0))
            u[0] = 0.0
            u[-1] = 0.0
            t += step
        if abs(t - targets[idx]) <= 1e-12:
            out[targets[idx]] = np.interp(xn_out, x, u)
            idx += 1
    return out


def test_shear_against_fd_heat_oracle():
    f = flows.bump_signal(-2.0, -1.0, 0.002)
    g = strip(M=65, H=8.0)
    xn = g.vertical_coordinates()
    t_eval = [-1.4, -0.9, -0.4]
    oracle = ftcs_heat_oracle(f, 24.0, 0.02, t_eval, xn)
    scale = f.l1_norm()
    for t in t_eval:
        mine = flows.dirichlet_heat_shear(f, xn, t)
        err = np.max(np.abs(mine - oracle[t])) / scale
        assert err < 1e-3


# -- assemble_shear / stokes_residual ----------------------------------------------


def test_assemble_shear_zero():
    g = strip()
    f0 = flows.bump_signal(-2.0, -1.0, 0.01, amplitude=0.0)
    sol = flows.assemble_shear([f0, f0], g, np.array([-0.6, -0.5, -0.4]))
    assert sol.max_abs() == 0.0
    assert np.max(np.abs(sol.pressure_coeffs)) == 0.0


def test_assemble_shear_per_component():
    g = strip()
    f1 = flows.bump_signal(-2.0, -1.0, 0.01)
    f2 = flows.bump_signal(-2.0, -1.0, 0.01, amplitude=0.0)
    sol = flows.assemble_shear([f1, f2], g, np.array([-1.5, -1.4, -1.3]))
    assert np.max(np.abs(sol.profiles[1])) == 0.0
    assert np.max(np.abs(sol.profiles[0])) > 0.01
    v = sol.velocity_field(1)
    assert v.components[2].max_norm() == 0.0
    # lateral independence is exact by construction
    lat_dev = np.max(np.abs(v.components[0].values - v.components[0].values[0:1, 0:1, :]))
    assert lat_dev == 0.0
    # pressure coefficients are minus the forcing
    assert np.allclose(sol.pressure_coeffs[0], -f1.at(sol.times))


def test_assemble_shear_mismatched_dt():
    g = strip()
    f1 = flows.bump_signal(-2.0, -1.0, 0.01)
    f2 = flows.bump_signal(-2.0, -1.0, 0.02)
    with pytest.raises(ValueError, match="mismatched dt"):
        flows.assemble_shear([f1, f2], g, np.array([-0.5, -0.4, -0.3]))


def test_stokes_residual_constant_field():
    g = Grid(n=3, N=8)
    fields = [
        VectorField.from_arrays(g, [np.full(g.shape, 0.7)] * 3) for _ in range(3)
    ]
    res = flows.stokes_residual(fields, 0.1)
    assert res["momentum_max"] < 1e-12
    assert res["div_max"] < 1e-12
    assert res["trace_max"] == 0.0


def test_stokes_residual_heat_eigenmode_channel():
    # u = (sin(x_n) e^{-t}, 0, 0), p = 0: interior residual is O(dt^2 + h^2)
    g = Grid(n=3, N=8, geometry=Geometry.CHANNEL, M=65, H=np.pi)
    z = g.coordinate_arrays()[-1]
    dt = 0.01
    fields = [
        VectorField.from_arrays(
            g, [np.sin(z) * np.exp(-k * dt), np.zeros(g.shape), np.zeros(g.shape)]
        )
        for k in range(3)
    ]
    res = flows.stokes_residual(fields, dt)
    assert res["momentum_max"] < 5e-4  # boundary one-sided stencils dominate


def test_stokes_residual_needs_three_slices():
    g = Grid(n=2, N=8)
    fields = [VectorField.from_arrays(g, [np.zeros(g.shape)] * 2)] * 2
    with pytest.raises(ValueError, match="3 time slices"):
        flows.stokes_residual(fields, 0.1)


def test_shear_solution_stokes_residual_convergence():
    errs = []
    for dt_sig, M in ((0.004, 33), (0.002, 65)):
        g = strip(M=M)
        f1 = flows.bump_signal(-2.0, -1.0, dt_sig)
        f2 = flows.bump_signal(-2.2, -1.1, dt_sig, amplitude=0.5)
        dt_slice = 40 * dt_sig
        times = -1.6 + dt_slice * np.arange(5)
        sol = flows.assemble_shear([f1, f2], g, times)
        fields = [sol.velocity_field(k) for k in range(times.size)]
        res = flows.stokes_residual(fields, dt_slice, sol.pressure_gradients())
        assert res["div_max"] < 1e-12
        assert res["trace_max"] == 0.0
        errs.append(res["momentum_max"])
    order = np.log2(errs[0] / errs[1])
    assert order > 1.7


def test_shear_sup_bound():
    g = strip(M=65)
    f1 = flows.bump_signal(-2.0, -1.0, 0.002, amplitude=2.0)
    f2 = flows.bump_signal(-2.0, -1.0, 0.002, amplitude=0.0)
    times = np.linspace(-1.9, -0.1, 10)
    sol = flows.assemble_shear([f1, f2], g, times)
    assert sol.max_abs() <= f1.l1_norm() * 1.01
