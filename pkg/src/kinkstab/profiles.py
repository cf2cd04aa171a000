"""Derived profiles q, g, Z1#, h# and the constants a, b.

g comes from the explicit Jost-function kernel for (-L + 6), q from reduction of
order against the zero mode Y0, and the bounded solutions of the sharp operator
from shooting on the slope at the origin.
"""

from __future__ import annotations

import functools
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_simpson, solve_ivp
from scipy.interpolate import CubicSpline

from . import closedforms as cf
from .grid import Grid, GridFunction, cumulative, inner, integrate

RK_RTOL = 1e-10
RK_ATOL = 1e-12
TAIL_TOL = 1e-8


class ShootingError(RuntimeError):
    pass


class ProfileDecayError(RuntimeError):
    pass


class FermiGoldenRuleError(RuntimeError):
    pass


@dataclass(frozen=True)
class LinearOperatorSpec:
    """One of the three linear operators the profiles invert.

    kind: "L_minus_6" for -L + 6, "L" for L, "Lsharp" for -d^2 - W where W is
    either the full virial potential V or its dominant part V2.
    """

    kind: str
    sharp_potential: str = "V2"

    def __post_init__(self):
        if self.kind not in ("L_minus_6", "L", "Lsharp"):
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if self.sharp_potential not in ("V", "V2"):
            raise ValueError("sharp_potential must be 'V' or 'V2'")

    def potential(self, x):
        """Zeroth-order coefficient c(x) in the operator -d^2 + c(x)."""
        if self.kind == "L":
            return cf.L_potential(x)
        if self.kind == "L_minus_6":
            return cf.L_potential(x) - 6.0
        return -(cf.V2(x) if self.sharp_potential == "V2" else cf.V(x))


# --- variation of parameters ---------------------------------------------------

def _vop(F: GridFunction):
    x = F.grid.x
    k = cf.jost_k(x)
    kp = cf.jost_k_prime(x)
    left = cumulative(np.conj(k) * F.values, F.grid)
    run = cumulative(k * F.values, F.grid)
    right = run[-1] - run
    G = (k * left + np.conj(k) * right).imag / 12.0
    dG = (kp * left + np.conj(kp) * right).imag / 12.0
    return G, dG


def variation_of_parameters(F: GridFunction) -> GridFunction:
    """Solve (-L + 6) G = F with the Jost kernel (Wronskian W(k, conj k) = -12i)."""
    if np.iscomplexobj(F.values):
        raise ValueError("variation_of_parameters expects a real right-hand side")
    G, _ = _vop(F)
    parity = F.parity if F.parity in ("odd", "even") else "none"
    out = GridFunction(F.grid, G, "none")
    return out.with_values(out.values, parity).symmetrized() if parity != "none" else out


def variation_of_parameters_with_slope(F: GridFunction):
    """G together with its exact derivative (the boundary terms of the kernel cancel)."""
    G, dG = _vop(F)
    return G, dG


# --- Fermi golden rule and the constant a ----------------------------------------

@dataclass(frozen=True)
class AConstant:
    a: float
    numerator: float
    denominator: float


def compute_a(grid: Grid = cf.GOLDEN_GRID, denominator_floor: float = 1e-6) -> AConstant:
    x = grid.x
    imk = cf.jost_k(x).imag
    fx, fpx = cf.f(x), cf.f_prime(x)
    den = integrate(cf.psi_prime(x) * fx * imk, grid)
    if abs(den) < denominator_floor:
        raise FermiGoldenRuleError(f"<psi' f, Im k> = {den:.3e} is numerically zero")
    num = integrate((cf.psi(x) * fpx + 0.5 * cf.psi_prime(x) * fx) * imk, grid)
    return AConstant(-num / den, num, den)


def g_rhs(x, a: float):
    """psi f' + (a + 1/2) psi' f."""
    return cf.psi(x) * cf.f_prime(x) + (a + 0.5) * cf.psi_prime(x) * cf.f(x)


def solve_g(grid: Grid = cf.GOLDEN_GRID, a: float | None = None, decay_tol: float = TAIL_TOL):
    """Odd Schwartz solution of L g - 6 g = psi f' + (a+1/2) psi' f.

    Returns (g, g'(0)).  Raises ProfileDecayError when g does not vanish at +-L,
    which happens exactly when <Im k, rhs> != 0, i.e. when a is wrong.
    """
    if a is None:
        a = compute_a(grid).a
    rhs = GridFunction(grid, -g_rhs(grid.x, a), "odd")
    G, dG = variation_of_parameters_with_slope(rhs)
    edge = max(abs(G[0]), abs(G[-1]))
    if edge > decay_tol:
        raise ProfileDecayError(
            f"g decay check failed: |g(+-L)| = {edge:.3e} > {decay_tol:.1e} (orthogonality to Im k violated)")
    g = GridFunction(grid, G, "odd", tol=1e-6).symmetrized()
    return g, float(dG[grid.center])


# --- shooting ----------------------------------------------------------------------

def _as_callable(rhs) -> Callable:
    if callable(rhs):
        return rhs
    if isinstance(rhs, GridFunction):
        return CubicSpline(rhs.grid.x, rhs.values)
    raise TypeError("rhs must be a callable or a GridFunction")


def _integrate_linear(op: LinearOperatorSpec, rhs: Callable, x0, x1, y0, sign=1.0):
    """Integrate -u'' + c(x) u = sign * rhs(x) from x0 to x1 with dense output."""
    def fun(x, y):
        return [y[1], op.potential(x) * y[0] - sign * rhs(x)]
    sol = solve_ivp(fun, (x0, x1), y0, method="RK45", rtol=RK_RTOL, atol=RK_ATOL,
                    dense_output=True)
    if not sol.success:
        raise ShootingError(f"ODE integration failed: {sol.message}")
    return sol


def secant(target: Callable[[float], float], s0: float, s1: float, tol: float = 1e-12,
           maxiter: int = 30):
    t0, t1 = target(s0), target(s1)
    trace = [(s0, t0), (s1, t1)]
    for _ in range(maxiter):
        if t1 == t0:
            break
        s2 = s1 - t1 * (s1 - s0) / (t1 - t0)
        s0, t0 = s1, t1
        s1, t1 = s2, target(s2)
        trace.append((s1, t1))
        if abs(s1 - s0) <= tol * max(1.0, abs(s1)):
            return s1, trace
    raise ShootingError(f"secant iteration did not converge; trace={trace[-4:]}")


def _odd_from_half(grid: Grid, half_vals: np.ndarray) -> np.ndarray:
    c = grid.center
    out = np.empty(grid.n)
    out[c:] = half_vals
    out[:c] = -half_vals[:0:-1]
    out[c] = 0.0
    return out


@dataclass(frozen=True)
class ShootResult:
    profile: GridFunction
    slope0: float
    edge_slope: float
    trace: tuple = field(default=(), compare=False)


def solve_bounded_sharp(rhs, grid: Grid = cf.GOLDEN_GRID, sharp_potential: str = "V2",
                        tol: float = TAIL_TOL) -> ShootResult:
    """Odd solution of -u'' - W u = rhs that stays bounded (u'(L) = 0)."""
    op = LinearOperatorSpec("Lsharp", sharp_potential)
    r = _as_callable(rhs)
    L = grid.L

    def edge_slope(s):
        return _integrate_linear(op, r, 0.0, L, [0.0, s]).y[1, -1]

    s, trace = secant(edge_slope, 0.0, -1.0)
    sol = _integrate_linear(op, r, 0.0, L, [0.0, s])
    du_L = sol.y[1, -1]
    scale = max(np.max(np.abs(sol.y[1])), 1.0)
    if abs(du_L) > tol * scale:
        raise ShootingError(f"u'(L) = {du_L:.3e} above tolerance")
    half = sol.sol(grid.x[grid.center:])[0]
    prof = GridFunction(grid, _odd_from_half(grid, half), "odd")
    return ShootResult(prof, float(s), float(du_L), tuple(trace))


def solve_q(grid: Grid = cf.GOLDEN_GRID) -> ShootResult:
    """Odd decaying solution of L q = f, by reduction of order against Y0 = sech^2(x/sqrt2)/2.

    With q = Y0 w the equation becomes (Y0^2 w')' = -Y0 f, so Y0^2 w' is the tail
    integral of Y0 f.  Tails are accumulated from the right and w from the origin,
    which avoids the cancellation a backward shot suffers from.
    """
    c = grid.center
    xh = grid.x[c:]
    y0 = cf.Y0(xh)
    src = y0 * cf.f(xh)
    tail = cumulative_simpson(src[::-1], x=-xh[::-1], initial=0.0)[::-1]
    w = cumulative_simpson(tail / y0**2, x=xh, initial=0.0)
    half = y0 * w
    if not np.all(np.isfinite(half)) or abs(half[-1]) > TAIL_TOL:
        raise ShootingError(f"q does not decay: q(L) = {half[-1]:.3e}")
    prof = GridFunction(grid, _odd_from_half(grid, half), "odd")
    return ShootResult(prof, float(tail[0] / y0[0]), float(half[-1]))


def compute_b(a: float, Z1sharp: GridFunction):
    """b with <a zeta f + b Z1, Z1#> = 0; returns (b, h as a callable)."""
    grid = Z1sharp.grid
    x = grid.x
    zf = GridFunction(grid, cf.zeta(x) * cf.f(x), "odd")
    z1 = cf.sample("Z1", grid)
    denom = inner(z1, Z1sharp)
    if abs(denom) < 1e-8:
        raise ShootingError("<Z1, Z1#> vanishes; b is undefined")
    b = -a * inner(zf, Z1sharp) / denom

    def h(xx):
        return a * cf.zeta(xx) * cf.f(xx) + b * cf.Z1(xx)
    return float(b), h


# --- the assembled set -------------------------------------------------------------

@dataclass(frozen=True)
class ProfileSet:
    grid: Grid
    q: GridFunction
    g: GridFunction
    Z1sharp: GridFunction
    hsharp: GridFunction
    h_fn: GridFunction
    a: float
    b: float
    fgr_denominator: float
    slopes: dict
    sharp_potential: str = "V2"

    def on_grid(self, grid: Grid) -> dict:
        """q and g resampled onto another grid, zero outside the build interval."""
        out = {}
        for name in ("q", "g"):
            src = getattr(self, name)
            spl = CubicSpline(src.grid.x, src.values)
            vals = np.where(np.abs(grid.x) <= src.grid.L, spl(np.clip(grid.x, -src.grid.L, src.grid.L)), 0.0)
            out[name] = GridFunction(grid, vals, "odd", tol=1e-6).symmetrized()
        return out

    def checksum(self) -> str:
        hsh = hashlib.sha256()
        for fn in (self.q, self.g, self.Z1sharp, self.hsharp, self.h_fn):
            hsh.update(np.ascontiguousarray(fn.values).tobytes())
        hsh.update(np.array([self.a, self.b]).tobytes())
        return hsh.hexdigest()

    def inner_products(self) -> dict:
        f = cf.sample("f", self.grid)
        z1 = cf.sample("Z1", self.grid)
        return {
            "fg": inner(f, self.g),
            "hsharp_h": inner(self.hsharp, self.h_fn),
            "Z1_Z1sharp": inner(z1, self.Z1sharp),
            "h_Z1sharp": inner(self.h_fn, self.Z1sharp),
            "g_Y1": inner(self.g, cf.sample("Y1", self.grid)),
            "q_Y1": inner(self.q, cf.sample("Y1", self.grid)),
        }

    def write_csv(self, outdir) -> list[str]:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        names = []
        for name in ("q", "g", "Z1sharp", "hsharp", "h_fn"):
            p = outdir / f"profile_{name}.csv"
            getattr(self, name).to_csv(p)
            names.append(str(p))
        return names


REFERENCE_VALUES = {
    "fgr_basic": -0.222,
    "fgr_modified": -0.218,
    "psi_f_imk": -0.327,
    "a": 0.687271,
    "fg": 0.0163,
    "hsharp_h": 0.0147,
    "Z1_Z1sharp": -2.63,
    "Z1sharp_slope0": -0.4376,
    "hsharp_slope0": 0.0249,
    "g_slope0": -0.333,
    "min_nu": 0.04,
}


def constants_report(ps: ProfileSet) -> list[dict]:
    """Rows {name, value, paper_value, abs_err, grid_meta} for every derived constant."""
    ip = ps.inner_products()
    x = ps.grid.x
    values = {
        "a": ps.a,
        "b": ps.b,
        "psi_f_imk": ps.fgr_denominator,
        "fg": ip["fg"],
        "hsharp_h": ip["hsharp_h"],
        "Z1_Z1sharp": ip["Z1_Z1sharp"],
        "h_Z1sharp": ip["h_Z1sharp"],
        "g_Y1": ip["g_Y1"],
        "q_Y1": ip["q_Y1"],
        "Z1sharp_slope0": ps.slopes["Z1sharp"],
        "hsharp_slope0": ps.slopes["hsharp"],
        "g_slope0": ps.slopes["g"],
        "q_slope0": ps.slopes["q"],
        "Z1_slope0": float(cf.evaluate("Y1_prime", 0.0)),
        "zetaf_Z1sharp": integrate(cf.zeta(x) * cf.f(x) * ps.Z1sharp.values, ps.grid),
    }
    rows = []
    for name, val in values.items():
        pv = REFERENCE_VALUES.get(name)
        rows.append({
            "name": name,
            "value": float(val),
            "paper_value": pv,
            "abs_err": None if pv is None else abs(float(val) - pv),
            "grid_meta": ps.grid.meta(),
        })
    return rows


def build_profiles(grid: Grid = cf.GOLDEN_GRID, sharp_potential: str = "V2",
                   a_offset: float = 0.0) -> ProfileSet:
    return _build_cached(grid, sharp_potential, float(a_offset))


@functools.lru_cache(maxsize=8)
def _build_cached(grid: Grid, sharp_potential: str, a_offset: float) -> ProfileSet:
    ac = compute_a(grid)
    a = ac.a + a_offset
    g, g0 = solve_g(grid, a)
    q = solve_q(grid)
    zs = solve_bounded_sharp(cf.Z1, grid, sharp_potential)
    b, h = compute_b(a, zs.profile)
    hs = solve_bounded_sharp(h, grid, sharp_potential)
    h_fn = GridFunction(grid, h(grid.x), "odd")
    return ProfileSet(
        grid=grid, q=q.profile, g=g, Z1sharp=zs.profile, hsharp=hs.profile, h_fn=h_fn,
        a=a, b=b, fgr_denominator=ac.denominator,
        slopes={"q": q.slope0, "g": g0, "Z1sharp": zs.slope0, "hsharp": hs.slope0},
        sharp_potential=sharp_potential,
    )


def write_constants_json(ps: ProfileSet, path) -> None:
    Path(path).write_text(json.dumps(constants_report(ps), indent=2, sort_keys=True) + "\n")
