import numpy as np
import pytest

from kinkstab import _kernels as K


def _setup(model, n=401, seed=0):
    rng = np.random.default_rng(seed)
    x = np.linspace(-10, 10, n)
    h = x[1] - x[0]
    center = 0.0 if model == K.PHI4 else np.pi
    u = center + 0.3 * np.tanh(x) * np.exp(-x**2 / 8) * (1 + 0.1 * rng.standard_normal())
    p = 0.1 * x * np.exp(-x**2 / 4)
    lin = 2.0 - 3.0 / np.cosh(x / np.sqrt(2)) ** 2
    nl = np.tanh(x / np.sqrt(2))
    damp = np.exp(-0.5 * 0.02 * np.where(np.abs(x) > 8, 1.0, 0.0))
    return u, p, lin, nl, damp, h, center


@pytest.mark.parametrize("model", [K.PHI4, K.SINE_GORDON])
def test_backends_agree(model):
    u, p, lin, nl, damp, h, c = _setup(model)
    outs = {}
    for b in ("numpy", "numba"):
        uu, pp = u.copy(), p.copy()
        acc = K.force(uu, lin, nl, h, model, backend=b)
        K.advance(uu, pp, acc, lin, nl, damp, h, 0.02, 200, model, c, backend=b)
        outs[b] = (uu, pp)
    np.testing.assert_allclose(outs["numba"][0], outs["numpy"][0], rtol=0, atol=1e-13)
    np.testing.assert_allclose(outs["numba"][1], outs["numpy"][1], rtol=0, atol=1e-13)


@pytest.mark.parametrize("backend", ["numpy", "numba"])
def test_zero_perturbation_stays_zero(backend):
    _, _, lin, nl, damp, h, _ = _setup(K.PHI4)
    u, p = np.zeros(401), np.zeros(401)
    acc = K.force(u, lin, nl, h, K.PHI4, backend=backend)
    K.advance(u, p, acc, lin, nl, damp, h, 0.02, 100, K.PHI4, backend=backend)
    assert not u.any() and not p.any()


@pytest.mark.parametrize("backend", ["numpy", "numba"])
def test_parity_and_frozen_ends(backend):
    u, p, lin, nl, damp, h, c = _setup(K.SINE_GORDON)
    u0 = u.copy()
    acc = K.force(u, lin, nl, h, K.SINE_GORDON, backend=backend)
    K.advance(u, p, acc, lin, nl, damp, h, 0.02, 50, K.SINE_GORDON, c, backend=backend)
    assert np.max(np.abs((u - c) + (u[::-1] - c))) < 1e-14
    assert np.max(np.abs(p + p[::-1])) == 0.0
    assert u[0] == u0[0] and u[-1] == u0[-1]


def test_force_is_the_discrete_operator():
    u, _, lin, nl, _, h, _ = _setup(K.PHI4)
    acc = K.force(u, lin, nl, h, K.PHI4, backend="numpy")
    j = 150
    lap = (u[j + 1] - 2 * u[j] + u[j - 1]) / h**2
    assert acc[j] == pytest.approx(lap - lin[j] * u[j] - 3 * nl[j] * u[j] ** 2 - u[j] ** 3)
    assert acc[0] == acc[-1] == 0.0


def test_env_flag_selects_numpy(monkeypatch):
    monkeypatch.setenv("KINKSTAB_NUMBA", "0")
    assert K.default_backend() == "numpy"
    monkeypatch.setenv("KINKSTAB_NUMBA", "1")
    assert K.default_backend() == "numba"


def test_unknown_backend():
    u, p, lin, nl, damp, h, _ = _setup(K.PHI4)
    with pytest.raises(ValueError):
        K.advance(u, p, np.zeros_like(u), lin, nl, damp, h, 0.02, 1, K.PHI4, backend="cuda")
