import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinkstab import closedforms as cf
from kinkstab.grid import Grid, GridFunction, derivative, inner, integrate

SIGN = {"odd": -1.0, "even": 1.0}


def test_model_constants():
    assert cf.CONSTANTS.mu2 == pytest.approx(1.5, rel=1e-15)
    assert cf.CONSTANTS.lambda_virial == 8


def test_point_values():
    assert cf.evaluate("H", 0.0) == 0.0
    assert cf.evaluate("Y0", 0.0) == 0.5
    k0 = cf.evaluate("jost_k", 0.0)
    assert k0.real == 1.5 and k0.imag == 0.0
    assert cf.evaluate("weight_omega", 0.0) == 1.0
    assert cf.evaluate("V2", 0.0) == 0.0


def test_unknown_id():
    with pytest.raises(KeyError):
        cf.evaluate("nope", 0.0)


def test_tildeY1_maximum_matches_dense_scan():
    # tanh(u) sech^2(u) peaks where tanh^2 = 1/3
    xstar = 2 * np.arctanh(1 / np.sqrt(3))
    x = np.linspace(0, 10, 2_000_001)
    scan = cf.tildeY1(x)
    assert x[np.argmax(scan)] == pytest.approx(xstar, abs=1e-5)
    assert cf.evaluate("tildeY1", xstar) == pytest.approx(scan.max(), rel=1e-11)


@pytest.mark.parametrize("fn_id", [k for k, (_, p) in cf.CATALOG.items() if p in SIGN])
def test_parity_random_points(fn_id):
    x = np.random.default_rng(7).uniform(-40, 40, 1000)
    s = SIGN[cf.parity_of(fn_id)]
    a, b = cf.evaluate(fn_id, -x), s * cf.evaluate(fn_id, x)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-300)


def test_jost_conjugate_symmetry():
    x = np.random.default_rng(8).uniform(-40, 40, 1000)
    np.testing.assert_allclose(cf.jost_k(-x), np.conj(cf.jost_k(x)), rtol=1e-12)
    np.testing.assert_allclose(cf.jost_k_prime(-x), -np.conj(cf.jost_k_prime(x)), rtol=1e-12)


def test_sg_kink_symmetry_and_limits():
    x = np.linspace(-50, 50, 1001)
    S = cf.sg_kink_S(x)
    np.testing.assert_allclose(S + S[::-1], 2 * np.pi, atol=1e-13)
    assert S[0] == pytest.approx(0.0, abs=1e-20)
    assert S[-1] == pytest.approx(2 * np.pi)


@pytest.mark.parametrize("fn_id", ["Z1", "V", "V2", "psi", "zeta", "f", "Y1"])
def test_no_overflow_far_out(fn_id):
    x = np.array([-1e5, -1e3, -300.0, 300.0, 1e3, 1e5])
    with np.errstate(over="raise", invalid="raise"):
        vals = cf.evaluate(fn_id, x)
    assert np.all(np.isfinite(vals))


def test_normalizations():
    g = Grid(60.0, 24001)
    for name in ("Y1", "tildeY1"):
        y = cf.sample(name, g)
        assert inner(y, y) == pytest.approx(1.0, abs=1e-12)
    y0 = cf.sample("Y0", g)
    # the closed form (1/2) sech^2 has norm^2 sqrt2/3, not 1
    assert inner(y0, y0) == pytest.approx(np.sqrt(2) / 3, abs=1e-12)


def test_coupling_constant_closed_form():
    # <H Y1^2, Y1> = (3/2)^(3/2) 2^(-9/4) 2 sqrt2 int tanh^4 sech^3 = 3 sqrt3 pi 2^(-7/4) / 16
    exact = 3 * np.sqrt(3) * np.pi * 2 ** (-7 / 4) / 16
    assert cf.hy1_coupling() == pytest.approx(exact, rel=1e-12)


def test_coupling_cache_is_race_free():
    cf._COUPLING.clear()
    out = []
    threads = [threading.Thread(target=lambda: out.append(cf.hy1_coupling())) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(cf._COUPLING) == 1 and len(set(out)) == 1


def test_f_orthogonal_to_Y1():
    g = cf.GOLDEN_GRID
    assert abs(inner(cf.sample("f", g), cf.sample("Y1", g))) < 1e-14


def test_analytic_derivatives():
    g = Grid(30.0, 30001)
    for fn, dfn in ((cf.f, cf.f_prime), (cf.Y1, cf.Y1_prime), (cf.psi, cf.psi_prime)):
        np.testing.assert_allclose(derivative(fn(g.x), g.h, 4)[2:-2], dfn(g.x)[2:-2], atol=1e-10)
    dk = derivative(cf.jost_k(g.x).real, g.h, 4) + 1j * derivative(cf.jost_k(g.x).imag, g.h, 4)
    np.testing.assert_allclose(dk[2:-2], cf.jost_k_prime(g.x)[2:-2], rtol=0, atol=1e-9)
    np.testing.assert_allclose(cf.zeta(g.x) ** 2, cf.psi_prime(g.x), rtol=1e-14)


def _residuals(n, order):
    g = Grid(30.0, n)
    y1, y0 = cf.sample("Y1", g), cf.sample("Y0", g)
    k = GridFunction(g, cf.jost_k(g.x), "conj")
    r1 = cf.apply_L(y1, order).values - 1.5 * y1.values
    r0 = cf.apply_L(y0, order).values
    rk = (-cf.apply_L(k, order).values + 6 * k.values)[4:-4]
    return (np.sqrt(integrate(r1**2, g)), np.sqrt(integrate(r0**2, g)), np.max(np.abs(rk)))


def test_apply_L_eigen_residuals_second_order():
    coarse, fine = _residuals(1201, 2), _residuals(2401, 2)
    orders = np.log2(np.array(coarse) / np.array(fine))
    assert np.all(orders >= 1.9), orders
    assert coarse[0] < 1e-3


def test_apply_L_fourth_order_is_tighter():
    assert _residuals(1201, 4)[0] < 1e-2 * _residuals(1201, 2)[0]


def test_apply_L_needs_five_points():
    g = Grid(1.0, 3)
    with pytest.raises(ValueError):
        cf.apply_L(GridFunction(g, np.zeros(3), "odd"))


# --- wobbler ---------------------------------------------------------------------

def test_wobbler_params():
    p = cf.WobblerParams(0.6)
    assert p.beta == pytest.approx(0.8)
    assert p.alpha**2 + p.beta**2 == pytest.approx(1.0)
    for bad in (0.0, 1.0, -0.3, 1.2):
        with pytest.raises(ValueError):
            cf.WobblerParams(bad)


@pytest.mark.parametrize("t", [0.0, 0.7, np.pi / 1.8, 3.0])
def test_wobbler_limits(t):
    p = cf.WobblerParams(0.9)
    x = np.linspace(-60, 60, 2401)
    W = cf.wobbler(p, t, x)
    assert W[0] == pytest.approx(0.0, abs=1e-8)
    assert W[-1] == pytest.approx(2 * np.pi, abs=1e-8)
    np.testing.assert_allclose(W + W[::-1], 2 * np.pi, atol=1e-12)


def test_wobbler_near_alpha_one_is_the_kink():
    p = cf.WobblerParams(1 - 1e-10)
    x = np.linspace(-20, 20, 401)
    np.testing.assert_allclose(cf.wobbler(p, 1.3, x), cf.sg_kink_S(x), atol=1e-4)


def test_wobbler_solves_sine_gordon():
    p = cf.WobblerParams(0.9)
    x = np.linspace(-15, 15, 3001)
    h, dt, t = x[1] - x[0], 1e-3, 0.8
    W = [cf.wobbler(p, t + k * dt, x) for k in (-1, 0, 1)]
    Wtt = (W[0] - 2 * W[1] + W[2]) / dt**2
    Wxx = (W[1][2:] - 2 * W[1][1:-1] + W[1][:-2]) / h**2
    res = Wtt[1:-1] - Wxx + np.sin(W[1][1:-1])
    assert np.max(np.abs(res)) < 1e-3


def test_wobbler_time_derivative():
    p = cf.WobblerParams(0.9)
    x = np.linspace(-20, 20, 801)
    d = 1e-5
    fd = (cf.wobbler(p, 1.0 + d, x) - cf.wobbler(p, 1.0 - d, x)) / (2 * d)
    np.testing.assert_allclose(cf.wobbler_dt(p, 1.0, x), fd, atol=1e-8)


def test_wobbler_is_periodic():
    p = cf.WobblerParams(0.9)
    x = np.linspace(-30, 30, 601)
    np.testing.assert_allclose(cf.wobbler(p, 0.4, x), cf.wobbler(p, 0.4 + p.period, x), atol=1e-12)


def test_wobbler_distance_to_kink_scales_like_sqrt_beta():
    # On both tails d_t W ~ 4 alpha beta sech(beta x), so the L^2 part of the distance is
    # 4 sqrt2 alpha sqrt(beta) to leading order: the ratio to beta itself is unbounded.
    g = Grid(80.0, 16001)
    over_beta, over_law = [], []
    for alpha in (0.99, 0.995, 0.999):
        p = cf.WobblerParams(alpha)
        t = np.pi / (2 * alpha)
        d1 = cf.sg_kink_S(g.x) - cf.wobbler(p, t, g.x)
        d2 = cf.wobbler_dt(p, t, g.x)
        dd = derivative(d1, g.h, 4)
        norm = np.sqrt(integrate(dd**2 + d1**2 + d2**2, g))
        over_beta.append(norm / p.beta)
        over_law.append(norm / (4 * np.sqrt(2) * alpha * np.sqrt(p.beta)))
    assert over_beta[0] < over_beta[1] < over_beta[2]
    np.testing.assert_allclose(over_law, 1.0, atol=0.03)


def test_scalar_wobbler_matches_array_branch():
    p = cf.WobblerParams(0.9)
    x = np.linspace(-10, 0, 101)
    assert cf.wobbler(p, 0.3, -2.0) == pytest.approx(cf.wobbler(p, 0.3, x)[80])


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.0, 20.0))
def test_wobbler_monotone_branch_has_no_jumps(alpha, t):
    p = cf.WobblerParams(alpha)
    x = np.linspace(-40, 40, 4001)
    W = cf.wobbler(p, t, x)
    assert np.max(np.abs(np.diff(W))) < 0.5
