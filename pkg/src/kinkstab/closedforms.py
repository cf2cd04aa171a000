"""Closed-form profiles of the phi^4 kink problem and the sine-Gordon wobbler.

Every function is vectorized over x.  Products of a growing cosh with a decaying
sech are evaluated through a single exponential of the exponent difference, so
Z1, V and V2 stay finite for all |x| (no cut-over to asymptotic forms is needed).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .grid import Grid, GridFunction, integrate, second_derivative, weight_omega

SQRT2 = np.sqrt(2.0)
Y1_NORM = 2.0 ** -0.75 * np.sqrt(3.0)
TILDE_Y1_NORM = np.sqrt(15.0 / 8.0)


@dataclass(frozen=True)
class ModelConstants:
    mu: float = np.sqrt(1.5)
    lambda_virial: float = 8.0
    weight_scale: float = 2.0 * SQRT2

    @property
    def mu2(self) -> float:
        return self.mu**2


CONSTANTS = ModelConstants()
LAM = CONSTANTS.lambda_virial


def _sech(t):
    a = np.abs(t)
    e = np.exp(-a)
    return 2.0 * e / (1.0 + e * e)


def _cosh_sech(b, a):
    """cosh(b) * sech(a) without overflow (finite whenever |b| < |a| asymptotically)."""
    ab, aa = np.abs(b), np.abs(a)
    return np.exp(ab - aa) * (1.0 + np.exp(-2 * ab)) / (1.0 + np.exp(-2 * aa))


def H(x):
    return np.tanh(np.asarray(x, dtype=float) / SQRT2)


def Hprime(x):
    return _sech(np.asarray(x, dtype=float) / SQRT2) ** 2 / SQRT2


def Y0(x):
    return 0.5 * _sech(np.asarray(x, dtype=float) / SQRT2) ** 2


def Y1(x):
    u = np.asarray(x, dtype=float) / SQRT2
    return Y1_NORM * np.tanh(u) * _sech(u)


def Y1_prime(x):
    u = np.asarray(x, dtype=float) / SQRT2
    return Y1_NORM / SQRT2 * _sech(u) * (1.0 - 2.0 * np.tanh(u) ** 2)


def tildeY1(x):
    u = np.asarray(x, dtype=float) / 2.0
    return TILDE_Y1_NORM * np.tanh(u) * _sech(u) ** 2


def psi(x, lam=LAM):
    return lam * SQRT2 * np.tanh(np.asarray(x, dtype=float) / (lam * SQRT2))


def psi_prime(x, lam=LAM):
    return _sech(np.asarray(x, dtype=float) / (lam * SQRT2)) ** 2


def zeta(x, lam=LAM):
    return _sech(np.asarray(x, dtype=float) / (lam * SQRT2))


def V2(x, lam=LAM):
    x = np.asarray(x, dtype=float)
    b, a = x / (lam * SQRT2), x / SQRT2
    return 3.0 * lam * np.tanh(b) * np.tanh(a) * _cosh_sech(b, a) ** 2


def V(x, lam=LAM):
    return zeta(x, lam) ** 2 / (4.0 * lam**2) + V2(x, lam)


def Z1(x, lam=LAM):
    x = np.asarray(x, dtype=float)
    a = x / SQRT2
    return Y1_NORM * np.tanh(a) * _cosh_sech(x / (lam * SQRT2), a)


# <H Y1^2, Y1>, filled once on the golden grid
_COUPLING: list[float] = []
_COUPLING_LOCK = threading.Lock()
GOLDEN_GRID = Grid(60.0, 24001)


def hy1_coupling() -> float:
    """<H Y1^2, Y1> by Simpson quadrature on the golden grid, computed once."""
    if not _COUPLING:
        with _COUPLING_LOCK:
            if not _COUPLING:
                x = GOLDEN_GRID.x
                _COUPLING.append(integrate(H(x) * Y1(x) ** 3, GOLDEN_GRID))
    return _COUPLING[0]


def f(x):
    x = np.asarray(x, dtype=float)
    y = Y1(x)
    return 1.5 * (H(x) * y * y - hy1_coupling() * y)


def f_prime(x):
    u = np.asarray(x, dtype=float) / SQRT2
    t, s = np.tanh(u), _sech(u)
    d_hy2 = Y1_NORM**2 / SQRT2 * (3 * t**2 * s**4 - 2 * t**4 * s**2)
    return 1.5 * (d_hy2 - hy1_coupling() * Y1_prime(np.asarray(x, dtype=float)))


def jost_k(x):
    x = np.asarray(x, dtype=float)
    u = x / SQRT2
    m = 1.0 + 0.5 * _sech(u) ** 2 + 1j * SQRT2 * np.tanh(u)
    return np.exp(2j * x) * m


def jost_k_prime(x):
    x = np.asarray(x, dtype=float)
    u = x / SQRT2
    s2, t = _sech(u) ** 2, np.tanh(u)
    m = 1.0 + 0.5 * s2 + 1j * SQRT2 * t
    dm = -(SQRT2 / 2) * t * s2 + 1j * s2
    return np.exp(2j * x) * (2j * m + dm)


def sg_kink_S(x):
    x = np.asarray(x, dtype=float)
    return np.where(x <= 0, 4.0 * np.arctan(np.exp(np.minimum(x, 0.0))),
                    2 * np.pi - 4.0 * np.arctan(np.exp(-np.maximum(x, 0.0))))


CATALOG = {
    "H": (H, "odd"),
    "Hprime": (Hprime, "even"),
    "Y0": (Y0, "even"),
    "Y1": (Y1, "odd"),
    "Y1_prime": (Y1_prime, "even"),
    "tildeY1": (tildeY1, "odd"),
    "psi": (psi, "odd"),
    "psi_prime": (psi_prime, "even"),
    "zeta": (zeta, "even"),
    "V": (V, "even"),
    "V2": (V2, "even"),
    "Z1": (Z1, "odd"),
    "f": (f, "odd"),
    "f_prime": (f_prime, "even"),
    "weight_omega": (weight_omega, "even"),
    "jost_k": (jost_k, "conj"),
    "jost_k_prime": (jost_k_prime, "anticonj"),
    "sg_kink_S": (sg_kink_S, "none"),
}


def evaluate(fn_id: str, x):
    try:
        fn, _ = CATALOG[fn_id]
    except KeyError:
        raise KeyError(f"unknown analytic function {fn_id!r}") from None
    out = fn(x)
    return out.item() if np.ndim(out) == 0 else out


def parity_of(fn_id: str) -> str:
    return CATALOG[fn_id][1]


def sample(fn_id: str, grid: Grid) -> GridFunction:
    fn, parity = CATALOG[fn_id]
    return GridFunction(grid, fn(grid.x), parity)


def L_potential(x):
    return 2.0 - 3.0 * _sech(np.asarray(x, dtype=float) / SQRT2) ** 2


def apply_L(fcn: GridFunction, order: int = 4) -> GridFunction:
    """Discrete -d^2/dx^2 + 2 - 3 sech^2(x/sqrt2) applied to a sampled function."""
    if fcn.grid.n < 5:
        raise ValueError("grid too coarse for the difference stencil")
    vals = fcn.values
    if np.iscomplexobj(vals):
        d2 = (second_derivative(vals.real, fcn.grid.h, order)
              + 1j * second_derivative(vals.imag, fcn.grid.h, order))
    else:
        d2 = second_derivative(vals, fcn.grid.h, order)
    out = -d2 + L_potential(fcn.grid.x) * vals
    return GridFunction(fcn.grid, out, fcn.parity, tol=max(fcn.tol, 1e-6))


# --- sine-Gordon wobbling kink -------------------------------------------------

@dataclass(frozen=True)
class WobblerParams:
    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")

    @property
    def beta(self) -> float:
        return float(np.sqrt(1.0 - self.alpha**2))

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.alpha


def _wobbler_uv(params: WobblerParams, t, x):
    """U, V and their time derivatives, all rescaled by exp(-(1+2b)x) for x > 0."""
    al, b = params.alpha, params.beta
    c1 = (1 + b) / (1 - b)
    c2 = 2 * b / (1 - b)
    cs, sn = np.cos(al * t), np.sin(al * t)
    x = np.asarray(x, dtype=float)
    xn = np.minimum(x, 0.0)
    xp = np.maximum(x, 0.0)
    neg = x <= 0
    # x <= 0: raw expressions, all exponents non-positive
    Un = 1 + c1 * np.exp(2 * b * xn) - c2 * np.exp((1 + b) * xn) * cs
    Vn = c1 * np.exp(xn) + np.exp((1 + 2 * b) * xn) - c2 * np.exp(b * xn) * cs
    Utn = c2 * al * sn * np.exp((1 + b) * xn)
    Vtn = c2 * al * sn * np.exp(b * xn)
    # x > 0: divided by exp((1+2b) x)
    Up = np.exp(-(1 + 2 * b) * xp) + c1 * np.exp(-xp) - c2 * np.exp(-b * xp) * cs
    Vp = c1 * np.exp(-2 * b * xp) + 1 - c2 * np.exp(-(1 + b) * xp) * cs
    Utp = c2 * al * sn * np.exp(-b * xp)
    Vtp = c2 * al * sn * np.exp(-(1 + b) * xp)
    pick = lambda a, c: np.where(neg, a, c)  # noqa: E731
    return pick(Un, Up), pick(Vn, Vp), pick(Utn, Utp), pick(Vtn, Vtp)


def wobbler(params: WobblerParams, t: float, x):
    """W_alpha(t, x) = 4 Arg(U + iV) on the branch continuous in x with W(-inf) = 0.

    For arrays the phase is unwrapped along increasing x; a scalar x returns the
    principal value, which agrees with the continuous branch unless U + iV
    crosses the negative real axis.
    """
    x = np.asarray(x, dtype=float)
    U, Vv, _, _ = _wobbler_uv(params, t, x)
    ang = np.arctan2(Vv, U)
    if x.ndim == 0:
        return float(4.0 * ang)
    order = np.argsort(x, kind="stable")
    unwrapped = np.empty_like(ang)
    unwrapped[order] = np.unwrap(ang[order])
    return 4.0 * unwrapped


def wobbler_dt(params: WobblerParams, t: float, x):
    U, Vv, Ut, Vt = _wobbler_uv(params, t, x)
    return 4.0 * (U * Vt - Vv * Ut) / (U * U + Vv * Vv)
