import numpy as np
import pytest

from stokeskit.grids import Geometry, Grid, ScalarField, VectorField
from stokeskit.operators import divergence
from stokeskit.flows import assemble_shear, bump_signal, dirichlet_heat_shear
from stokeskit import simulator as sim
from stokeskit import multipliers as mult


def box(N=16):
    return Grid(n=3, N=N)


def strip(N=8, M=33, H=8.0):
    return Grid(n=3, N=N, geometry=Geometry.HALF_STRIP, M=M, H=H)


def zero_sig(dt=0.005):
    return bump_signal(-2.0, -1.0, dt, amplitude=0.0)


# -- config -------------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError, match="dt"):
        sim.SimConfig(grid=box(), dt=0.2, T=1.0)
    with pytest.raises(ValueError, match="stride"):
        sim.SimConfig(grid=box(), dt=0.05, T=1.0, stride=0)
    with pytest.raises(ValueError, match="forcing"):
        sim.SimConfig(grid=box(), dt=0.05, T=1.0, forcing=(zero_sig(),))


# -- periodic box --------------------------------------------------------------


def test_periodic_one_step_properties():
    cfg = sim.SimConfig(grid=box(), dt=0.05, T=1.0, seed=2)
    state = sim.initial_state(cfg)
    new = sim.step(state, cfg)
    assert divergence(new.u).max_norm() < 1e-10
    assert new.diagnostics.energy < state.diagnostics.energy
    assert new.t == pytest.approx(state.t + 0.05)


def test_periodic_vorticity_homogenization():
    g = box()
    T = 3.0
    cfg = sim.SimConfig(grid=g, dt=0.05, T=T, seed=7, stride=10)
    res = sim.run(cfg)
    v0 = res.diagnostics[0].vort_dev
    vT = res.diagnostics[-1].vort_dev
    lam = (2 * np.pi / g.L) ** 2
    assert vT / v0 <= np.exp(-lam * T) * 1.05

    # oracle: exact per-mode heat decay of the initial state
    state0 = res.initial
    comps = []
    for c in state0.u.components:
        comps.append(mult.heat_propagate(c, T).values)
    decayed = VectorField.from_arrays(g, comps)
    oracle = sim.compute_diagnostics(decayed, 0.0).vort_dev
    assert abs(vT - oracle) / oracle < 0.05


def test_periodic_mean_is_preserved():
    cfg = sim.SimConfig(grid=box(), dt=0.05, T=1.0, seed=4, stride=5)
    res = sim.run(cfg)
    m0 = [c.mean() for c in res.initial.u.components]
    mT = [c.mean() for c in res.final.u.components]
    assert np.allclose(m0, mT, atol=1e-13)


def test_periodic_late_time_spatial_constancy():
    g = box(N=8)
    T = 10.0
    cfg = sim.SimConfig(grid=g, dt=0.05, T=T, seed=9, stride=40)
    res = sim.run(cfg)
    assert res.final.diagnostics.lateral_dev <= 1.2 * 0.2 * np.exp(-T)
    # the recovered velocity equals the lateral mean everywhere
    for c, m in zip(res.final.u.components, [c.mean() for c in res.final.u.components]):
        assert np.max(np.abs(c.values - m)) < 1e-4


# -- wall-bounded: structure ------------------------------------------------------


def test_wall_divergence_and_trace_every_step():
    cfg = sim.SimConfig(grid=strip(), dt=0.05, T=0.5, seed=3, stride=1)
    st = sim.Stepper(cfg)
    state = sim.initial_state(cfg)
    assert divergence(state.u).max_norm() < 1e-12
    for _ in range(5):
        state = st.step(state)
        assert divergence(state.u).max_norm() < 1e-10
        for c in state.u.components:
            assert np.max(np.abs(c.values[..., 0])) < 1e-14


def test_wall_energy_monotone_unforced():
    cfg = sim.SimConfig(grid=strip(), dt=0.05, T=1.5, seed=6, stride=1)
    res = sim.run(cfg)
    e = res.series("energy")
    assert np.all(e[1:] <= e[:-1] * (1 + 1e-12))


def test_energy_inequality_with_forcing():
    g = strip()
    forcing = (bump_signal(-1.8, -0.6, 0.005), zero_sig())
    cfg = sim.SimConfig(grid=g, dt=0.05, T=2.0, seed=5, stride=1, forcing=forcing)
    st = sim.Stepper(cfg)
    state = sim.initial_state(cfg)
    vol = g.cell_volume
    for _ in range(40):
        new = st.step(state)
        t_mid = state.t + 0.5 * cfg.dt
        power = 0.0
        for c in range(2):
            F = -float(cfg.forcing[c].at(t_mid))
            ubar = 0.5 * (
                state.u.components[c].values + new.u.components[c].values
            )
            power += 2.0 * F * vol * float(np.sum(ubar))
        bound = state.diagnostics.energy + cfg.dt * power + 1e-12
        assert new.diagnostics.energy <= bound
        state = new


# -- eigenmode decay ---------------------------------------------------------------


def decay_of_channel_eigenmode(dt, M=65, H=2.0, T=1.0):
    g = Grid(n=3, N=4, geometry=Geometry.CHANNEL, M=M, H=H)
    z = g.coordinate_arrays()[-1]
    amp = 0.5
    u0 = VectorField.from_arrays(
        g, [amp * np.sin(np.pi * z / H), np.zeros(g.shape), np.zeros(g.shape)]
    )
    cfg = sim.SimConfig(grid=g, dt=dt, T=T, stride=10**9)
    st = sim.Stepper(cfg)
    state = sim.SimState(-T, u0, sim.compute_diagnostics(u0, -T))
    res = st.run(state)
    return res.final.u.components[0].max_norm() / amp


def test_channel_eigenmode_decay_rate():
    H, M, T = 2.0, 65, 1.0
    factor = decay_of_channel_eigenmode(1e-3, M=M, H=H, T=T)
    exact = np.exp(-((np.pi / H) ** 2) * T)
    assert abs(factor - exact) / exact < 0.005


def test_channel_eigenmode_time_order_two():
    # compare against the discrete-eigenvalue decay so only the time error remains
    H, M, T = 2.0, 65, 1.0
    g = Grid(n=3, N=4, geometry=Geometry.CHANNEL, M=M, H=H)
    lam = sim.mode_decay_rates(g, [0.0, 0.0], count=1)[0]
    ref = np.exp(-lam * T)
    errs = []
    for dt in (4e-3, 2e-3):
        errs.append(abs(decay_of_channel_eigenmode(dt, M=M, H=H, T=T) - ref))
    order = np.log2(errs[0] / errs[1])
    assert abs(order - 2.0) < 0.3


def test_freeslip_zero_mode_rate():
    g = Grid(n=3, N=4, geometry=Geometry.HALF_STRIP, M=65, H=4.0)
    lam = sim.mode_decay_rates(g, [0.0, 0.0], top_bc=sim.TopBC.FREE_SLIP, count=1)[0]
    # continuum slowest free-slip rate is (pi/2H)^2
    assert abs(lam - (np.pi / (2 * g.H)) ** 2) / lam < 0.01
    z = g.coordinate_arrays()[-1]
    u0 = VectorField.from_arrays(
        g,
        [0.3 * np.sin(np.pi * z / (2 * g.H)), np.zeros(g.shape), np.zeros(g.shape)],
    )
    T = 2.0
    cfg = sim.SimConfig(
        grid=g, dt=0.005, T=T, top_bc=sim.TopBC.FREE_SLIP, stride=10**9
    )
    st = sim.Stepper(cfg)
    res = st.run(sim.SimState(-T, u0, sim.compute_diagnostics(u0, -T)))
    factor = res.final.u.components[0].max_norm() / 0.3
    assert abs(factor - np.exp(-lam * T)) / np.exp(-lam * T) < 0.01


def test_nonzero_mode_rate_matches_pencil_oracle():
    # drive the simulator with one exact discrete eigenmode of the coupled
    # velocity-pressure pencil and check it decays at precisely that rate
    g = strip(N=8, M=33)
    k1 = 2 * np.pi / g.L
    rates, profiles = sim.mode_decay_rates(g, [k1, 0.0], count=2, return_vectors=True)
    lam, prof = rates[0], profiles[0]
    x1 = g.coordinate_arrays()[0]
    phase = np.exp(1j * k1 * x1)
    comps = [np.real(phase * prof[c][np.newaxis, np.newaxis, :]) for c in range(3)]
    scale = max(np.max(np.abs(c)) for c in comps)
    comps = [c / scale for c in comps]
    u0 = VectorField.from_arrays(g, comps)
    T = 2.0
    cfg = sim.SimConfig(grid=g, dt=0.01, T=T, stride=10**9)
    st = sim.Stepper(cfg)
    res = st.run(sim.SimState(-T, u0, sim.compute_diagnostics(u0, -T)))
    expected = np.exp(-lam * T)
    for c in range(3):
        a0 = np.max(np.abs(comps[c]))
        aT = res.final.u.components[c].max_norm()
        if a0 > 1e-3:
            assert abs(aT / a0 - expected) / expected < 0.01


# -- transient ordering -----------------------------------------------------------


def test_unforced_transient_ordering_with_shear_content():
    g = strip(N=8, M=33)
    T = 4.0
    cfg = sim.SimConfig(grid=g, dt=0.02, T=T, seed=13, stride=20)
    base = sim.initial_state(cfg)
    z = g.coordinate_arrays()[-1]
    shear = 0.1 * np.sin(np.pi * z / g.H)
    comps = [c.values.copy() for c in base.u.components]
    comps[0] = comps[0] + shear
    u0 = VectorField.from_arrays(g, comps, divfree_tol=1e-10)
    state = sim.SimState(-T, u0, sim.compute_diagnostics(u0, -T))
    res = sim.Stepper(cfg).run(state)
    d = res.final.diagnostics
    shear_sup = np.max(np.abs(d.shear_profile))
    assert d.un_max < 0.02 * shear_sup
    assert d.lateral_dev < 0.02 * shear_sup
    # the mean shear decays at the zero-mode heat rate
    lam0 = sim.mode_decay_rates(g, [0.0, 0.0], count=1)[0]
    assert shear_sup > 0.5 * 0.1 * np.exp(-lam0 * T)


# -- cross-oracle against the explicit shear flow -----------------------------------


def test_tracks_explicit_shear_solution():
    g = Grid(n=3, N=8, geometry=Geometry.HALF_STRIP, M=65, H=8.0)
    dt_sig = 0.005
    f1 = bump_signal(-3.0, -1.0, dt_sig)
    c1 = bump_signal(-3.0, -1.0, dt_sig, amplitude=-1.0)
    czero = bump_signal(-3.0, -1.0, dt_sig, amplitude=0.0)

    def top_vel(t):
        return np.array([dirichlet_heat_shear(f1, np.array([g.H]), t)[0], 0.0])

    cfg = sim.SimConfig(
        grid=g,
        dt=0.01,
        T=2.8,
        t0=-3.1,
        forcing=(c1, czero),
        top_velocity=top_vel,
        init_amplitude=0.0,
        stride=10**9,
    )
    res = sim.Stepper(cfg).run()
    z = g.vertical_coordinates()
    oracle = dirichlet_heat_shear(f1, z, res.final.t)
    prof = res.final.diagnostics.shear_profile[0]
    scale = np.max(np.abs(oracle))
    assert np.max(np.abs(prof - oracle)) / scale < 0.01
    member, dist = sim.liouville_membership(res.final, tol=1e-8)
    assert member


# -- membership -------------------------------------------------------------------


def test_membership_of_exact_shear_snapshot():
    g = strip(M=65)
    f1 = bump_signal(-2.0, -1.0, 0.01)
    f2 = bump_signal(-2.0, -1.0, 0.01, amplitude=0.3)
    sol = assemble_shear([f1, f2], g, np.array([-0.5, -0.4, -0.3]))
    u = sol.velocity_field(1)
    state = sim.SimState(-0.4, u, sim.compute_diagnostics(u, -0.4))
    member, dist = sim.liouville_membership(state, tol=1e-10)
    assert member
    assert dist["un_max"] == 0.0
    # lateral mean of identical values reintroduces rounding noise
    assert dist["lateral_dev"] < 1e-14


def test_membership_rejects_random_data():
    cfg = sim.SimConfig(grid=strip(), dt=0.05, T=1.0, seed=21)
    state = sim.initial_state(cfg)
    member, _ = sim.liouville_membership(state, tol=1e-6)
    assert not member


def test_membership_rejects_periodic():
    cfg = sim.SimConfig(grid=box(), dt=0.05, T=1.0)
    state = sim.initial_state(cfg)
    with pytest.raises(ValueError, match="wall-bounded"):
        sim.liouville_membership(state, tol=1e-6)


# -- forced relaxation (small-scale shadow of the acceptance run) --------------------


def test_forced_relaxation_lands_in_family():
    g = strip(N=8, M=33)
    dt_sig = 0.005
    c1 = bump_signal(-3.0, -0.5, dt_sig, amplitude=-1.0)
    f1_l1 = bump_signal(-3.0, -0.5, dt_sig).l1_norm()
    czero = bump_signal(-3.0, -0.5, dt_sig, amplitude=0.0)
    T = 10.0
    cfg = sim.SimConfig(grid=g, dt=0.02, T=T, seed=17, stride=100, forcing=(c1, czero))
    res = sim.run(cfg)
    member, dist = sim.liouville_membership(res.final, tol=1e-5)
    assert member
    shear_sup = np.max(np.abs(res.final.diagnostics.shear_profile))
    assert shear_sup >= 0.1 * f1_l1
    # same run without forcing decays entirely
    cfg0 = sim.SimConfig(grid=g, dt=0.02, T=T, seed=17, stride=100)
    res0 = sim.run(cfg0)
    assert res0.final.diagnostics.energy <= 1e-6 * res0.initial.diagnostics.energy
