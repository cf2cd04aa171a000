import numpy as np
import pytest

from kinkstab import closedforms as cf
from kinkstab.diagnostics import full_norm
from kinkstab.grid import Grid
from kinkstab.simulator import (
    ConfigError,
    Integrator,
    SimConfig,
    discrete_kink,
    initial_state,
    make_initial_data,
    run,
    sponge_profile,
    step,
)

SMALL = dict(L=40.0, boundary="dirichlet")


def test_cfl_is_enforced():
    with pytest.raises(ConfigError, match="CFL"):
        SimConfig(dt=0.06, h=0.05).validate()


@pytest.mark.parametrize("bad", [
    dict(initial="wobbler_snapshot"),
    dict(model="sine_gordon_full", initial="mode_kick"),
    dict(model="kdv"),
    dict(boundary="periodic"),
    dict(sponge_width=60.0),
    dict(amplitude=-1.0),
    dict(output_stride=0),
    dict(window=300.0),
])
def test_invalid_configs(bad):
    with pytest.raises(ConfigError):
        SimConfig(**bad).validate()


def test_grid_must_fit_spacing():
    with pytest.raises(ValueError):
        SimConfig(L=10.01, h=0.05).validate()


def test_discrete_kink_solves_difference_equation():
    g = Grid.from_spacing(40.0, 0.05)
    Hh = discrete_kink(g)
    res = (Hh[2:] - 2 * Hh[1:-1] + Hh[:-2]) / g.h**2 + Hh[1:-1] - Hh[1:-1] ** 3
    assert np.max(np.abs(res)) < 1e-10
    np.testing.assert_allclose(Hh, -Hh[::-1], atol=0)
    # O(h^2) away from the continuum kink
    assert np.max(np.abs(Hh - cf.H(g.x))) < 1e-3


def test_sponge_profile_support():
    g = Grid.from_spacing(50.0, 0.5)
    s = sponge_profile(g, 10.0, 2.0)
    assert np.all(s[np.abs(g.x) <= 40.0] == 0.0)
    assert s[0] == s[-1] == pytest.approx(2.0)


def test_zero_perturbation_is_exactly_stationary():
    r = run(SimConfig(initial="zero", T=5.0, **SMALL), diagnostics=False)
    assert not r.final.phi1.values.any() and not r.final.phi2.values.any()
    assert np.all(r.ledger.E_pert == 0.0)


def test_mode_kick_initial_data():
    g = Grid.from_spacing(40.0, 0.05)
    st = make_initial_data("mode_kick", 0.05, g)
    y = cf.Y1(g.x)
    assert np.sum(st.phi1.values * y) * g.h == pytest.approx(0.05, rel=1e-6)
    vel = make_initial_data("mode_kick", 0.05, g, component="velocity")
    assert not vel.phi1.values.any()
    with pytest.raises(ConfigError):
        make_initial_data("mode_kick", 0.05, g, component="spin")
    with pytest.raises(ConfigError):
        make_initial_data("mode_kick", -0.05, g)


def test_gaussian_data_has_requested_norm():
    g = Grid.from_spacing(40.0, 0.05)
    st = make_initial_data("gaussian_odd", 0.3, g)
    assert full_norm(st) == pytest.approx(0.3, rel=1e-3)


def test_linear_regime_mode_oscillates_at_mu():
    eps = 1e-3
    r = run(SimConfig(initial="mode_kick", amplitude=eps, T=10.0, output_stride=5, **SMALL))
    t = np.array([rec.t for rec in r.records])
    z1 = np.array([rec.mode.z1 for rec in r.records])
    np.testing.assert_allclose(z1, eps * np.cos(cf.CONSTANTS.mu * t), atol=2e-2 * eps)


def _drift(dt):
    cfg = SimConfig(initial="gaussian_odd", amplitude=0.3, T=20.0, dt=dt, output_stride=40, **SMALL)
    return run(cfg, diagnostics=False).ledger.relative_drift()


def test_energy_drift_is_second_order_in_dt():
    coarse, fine = _drift(0.025), _drift(0.0125)
    assert coarse < 3e-5
    assert coarse / fine > 3.0


def test_self_convergence_is_second_order():
    finals = []
    for h in (0.1, 0.05, 0.025):
        cfg = SimConfig(initial="gaussian_odd", amplitude=0.3, T=10.0, h=h, dt=h / 2,
                        output_stride=50, **SMALL)
        finals.append(run(cfg, diagnostics=False).final.phi1.values)
    e1 = np.max(np.abs(finals[0] - finals[1][::2]))
    e2 = np.max(np.abs(finals[1][::2] - finals[2][::4]))
    assert np.log2(e1 / e2) == pytest.approx(2.0, abs=0.2)


def _wobbler_error(h):
    cfg = SimConfig(model="sine_gordon_full", initial="wobbler_snapshot", alpha=0.9, amplitude=0.0,
                    h=h, dt=h / 2, **SMALL)
    wp = cf.WobblerParams(0.9)
    integ = Integrator(cfg, initial_state(cfg))
    st = integ.advance(int(round(wp.period / cfg.dt)))
    exact = cf.wobbler(wp, st.t, cfg.grid.x) - cf.sg_kink_S(cfg.grid.x)
    return np.max(np.abs(st.phi1.values - exact))


def test_wobbler_is_tracked_over_a_period():
    coarse, fine = _wobbler_error(0.05), _wobbler_error(0.025)
    assert coarse < 5e-4
    assert coarse / fine > 3.5


def test_state_stays_odd():
    r = run(SimConfig(initial="gaussian_odd", amplitude=0.5, T=5.0, **SMALL), diagnostics=False)
    assert r.final.odd_defect() < 1e-12


def test_step_matches_integrator():
    cfg = SimConfig(initial="gaussian_odd", amplitude=0.2, **SMALL)
    st = initial_state(cfg)
    a = step(step(st, cfg), cfg)
    b = Integrator(cfg, st).advance(2)
    np.testing.assert_allclose(a.phi1.values, b.phi1.values, atol=1e-15)
    assert a.t == pytest.approx(2 * cfg.dt)


def test_backends_give_same_run():
    cfg = SimConfig(initial="gaussian_odd", amplitude=0.3, T=2.0, **SMALL)
    a = run(cfg.with_(backend="numba"), diagnostics=False).final
    b = run(cfg.with_(backend="numpy"), diagnostics=False).final
    np.testing.assert_allclose(a.phi1.values, b.phi1.values, rtol=0, atol=1e-12)


def test_sponge_removes_radiation():
    cfg = SimConfig(initial="gaussian_odd", amplitude=0.3, L=60.0, sponge_width=14.0, T=120.0,
                    output_stride=50)
    r = run(cfg, diagnostics=False)
    E = r.ledger.E_pert
    # the mode keeps most of the energy; what radiates away must be gone for good
    assert E[-1] < 0.95 * E[0]
    # up to the O(dt^2) wobble of the leapfrog energy
    assert np.all(np.diff(E) < 5e-5)


def test_snapshots_and_records():
    cfg = SimConfig(initial="mode_kick", T=2.0, output_stride=10, **SMALL)
    r = run(cfg, snapshot_times=(1.0, 2.0))
    assert sorted(r.snapshots) == [1.0, 2.0]
    assert len(r.records) == cfg.nsteps // 10 + 1
    assert r.sup_norm >= r.initial_norm


def test_progress_callback():
    seen = []
    run(SimConfig(initial="zero", T=1.0, **SMALL), diagnostics=False,
        progress=lambda done, total: seen.append((done, total)))
    assert seen[-1] == (50, 50)


def _trace_at_30(L, boundary, T=100.0):
    cfg = SimConfig(initial="gaussian_odd", amplitude=0.3, L=L, boundary=boundary, sponge_width=14.0, T=T)
    integ = Integrator(cfg, initial_state(cfg))
    j = int(np.argmin(np.abs(cfg.grid.x - 30.0)))
    return np.array([integ.advance(25).phi1.values[j] for _ in range(int(T / 0.5))])


def test_sponge_reflection_below_one_percent():
    # against a domain wide enough that nothing comes back to x = 30 before T
    sponge, reference = _trace_at_30(60.0, "sponge"), _trace_at_30(180.0, "dirichlet")
    assert np.max(np.abs(sponge - reference)) < 0.01 * np.max(np.abs(reference))
