"""Odd-sector time integration: phi^4 perturbations of the kink, and full sine-Gordon.

For phi^4 the evolved unknown is the perturbation phi1 around a *discrete* kink
H_h (the exact zero of the difference equation), so the semi-discrete energy
is conserved and the zero perturbation stays exactly stationary.  For
sine-Gordon the full field u is stepped; the state carries phi1 = u - S.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.linalg import solve_banded

from . import _kernels
from . import closedforms as cf
from .grid import Grid, GridFunction, derivative, integrate

log = logging.getLogger(__name__)

MODELS = ("phi4_perturbation", "sine_gordon_full")
INITIAL_KINDS = ("mode_kick", "gaussian_odd", "wobbler_snapshot", "zero")
ODD_TOL = 1e-9


class ConfigError(ValueError):
    pass


class SimulationDiverged(RuntimeError):
    def __init__(self, msg, state=None):
        super().__init__(msg)
        self.state = state


@dataclass(frozen=True)
class FieldState:
    phi1: GridFunction
    phi2: GridFunction
    t: float = 0.0

    @property
    def grid(self) -> Grid:
        return self.phi1.grid

    def norm(self) -> float:
        """||(phi1, phi2)||_{H^1 x L^2} on the whole grid."""
        g = self.grid
        d = derivative(self.phi1.values, g.h, 2)
        return float(np.sqrt(integrate(d * d + self.phi1.values**2 + self.phi2.values**2, g)))

    def odd_defect(self) -> float:
        return max(self.phi1.parity_defect("odd"), self.phi2.parity_defect("odd"))


@dataclass(frozen=True)
class SimConfig:
    model: str = "phi4_perturbation"
    L: float = 200.0
    h: float = 0.05
    dt: float = 0.02
    T: float = 400.0
    boundary: str = "sponge"
    sponge_width: float = 30.0
    sponge_strength: float = 2.0
    initial: str = "mode_kick"
    amplitude: float = 0.05
    component: str = "position"    # mode_kick: kick phi1 or phi2
    gauss_width: float = 2.0
    alpha: float = 0.9             # wobbler frequency
    t0: float | None = None        # wobbler snapshot time, default pi/(2 alpha)
    output_stride: int = 4
    window: float | None = None    # diagnostics region, default: everything inside the sponge
    backend: str | None = None

    @property
    def grid(self) -> Grid:
        return Grid.from_spacing(self.L, self.h)

    @property
    def diagnostic_window(self) -> float:
        if self.window is not None:
            return self.window
        return self.L - self.sponge_width if self.boundary == "sponge" else self.L

    @property
    def sponge_arrival(self) -> float:
        """Earliest time a unit-speed front from the kink reaches the sponge."""
        return self.L - self.sponge_width if self.boundary == "sponge" else float("inf")

    @property
    def nsteps(self) -> int:
        return int(round(self.T / self.dt))

    def validate(self) -> "SimConfig":
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}")
        if self.initial not in INITIAL_KINDS:
            raise ConfigError(f"unknown initial data kind {self.initial!r}")
        if self.boundary not in ("sponge", "dirichlet"):
            raise ConfigError(f"unknown boundary {self.boundary!r}")
        if not (self.dt > 0 and self.h > 0 and self.T >= 0):
            raise ConfigError("dt, h must be positive and T nonnegative")
        if self.dt > 0.9 * self.h:
            raise ConfigError(f"CFL violated: dt = {self.dt} > 0.9 h = {0.9 * self.h}")
        if self.boundary == "sponge" and not self.sponge_width < self.L / 4:
            raise ConfigError("sponge_width must be below L/4")
        if self.amplitude < 0:
            raise ConfigError("amplitude must be nonnegative")
        if self.output_stride < 1:
            raise ConfigError("output_stride must be a positive step count")
        if (self.initial == "wobbler_snapshot") != (self.model == "sine_gordon_full"):
            raise ConfigError(f"initial data {self.initial!r} does not fit model {self.model!r}")
        if self.model == "sine_gordon_full" and not 0 < self.alpha < 1:
            raise ConfigError("wobbler alpha must lie in (0, 1)")
        if self.window is not None and self.window > self.L:
            raise ConfigError("diagnostic window exceeds the domain")
        self.grid  # raises if L is not a multiple of h
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def with_(self, **kw) -> "SimConfig":
        return replace(self, **kw)


# --- backgrounds and boundary ---------------------------------------------------

def discrete_kink(grid: Grid, tol: float = 1e-12, maxiter: int = 30) -> np.ndarray:
    """Solve (H_{j+1} - 2H_j + H_{j-1})/h^2 + H_j - H_j^3 = 0 with H(+-L) = tanh(+-L/sqrt2).

    Newton runs on the half-line with H(0) = 0: on the full line the Jacobian has a
    near-zero (discrete translation) eigenvalue and the iteration wanders.
    """
    x, h = grid.x, grid.h
    c = grid.center
    Hh = cf.H(x[c:]).copy()
    Hh[0] = 0.0
    m = len(Hh) - 2
    ab = np.zeros((3, m))
    ab[0, 1:] = 1 / h**2
    ab[2, :-1] = 1 / h**2
    for _ in range(maxiter):
        w = Hh[1:-1]
        res = (Hh[2:] - 2 * w + Hh[:-2]) / h**2 + w - w**3
        ab[1] = -2 / h**2 + 1 - 3 * w**2
        delta = solve_banded((1, 1), ab, -res)
        Hh[1:-1] += delta
        if np.max(np.abs(delta)) < tol:
            return np.concatenate([-Hh[:0:-1], Hh])
    raise RuntimeError("discrete kink Newton iteration did not converge")


def sponge_profile(grid: Grid, width: float, strength: float) -> np.ndarray:
    d = np.abs(grid.x) - (grid.L - width)
    sig = np.zeros(grid.n)
    m = d > 0
    sig[m] = strength * (d[m] / width) ** 2
    return sig


# --- initial data ------------------------------------------------------------------

def _h1_norm(vals, grid):
    d = derivative(vals, grid.h, 4)
    return float(np.sqrt(integrate(d * d + vals * vals, grid)))


def make_initial_data(kind: str, amplitude: float, grid: Grid, **params) -> FieldState:
    """Odd initial perturbation (phi1, phi2) at t = 0 (or t0 for the wobbler)."""
    if amplitude < 0:
        raise ConfigError("amplitude must be nonnegative")
    x = grid.x
    zero = np.zeros(grid.n)
    t = 0.0
    if kind == "zero" or amplitude == 0 and kind != "wobbler_snapshot":
        p1, p2 = zero, zero.copy()
    elif kind == "mode_kick":
        comp = params.get("component", "position")
        if comp == "position":
            p1, p2 = amplitude * cf.Y1(x), zero
        elif comp == "velocity":
            p1, p2 = zero, amplitude * cf.CONSTANTS.mu * cf.Y1(x)
        else:
            raise ConfigError(f"unknown mode_kick component {comp!r}")
    elif kind == "gaussian_odd":
        s = params.get("gauss_width", 2.0)
        shape = x * np.exp(-(x / s) ** 2)
        p1, p2 = amplitude * shape / _h1_norm(shape, grid), zero
    elif kind == "wobbler_snapshot":
        if params.get("model", "sine_gordon_full") != "sine_gordon_full":
            raise ConfigError("wobbler_snapshot needs the sine_gordon_full model")
        wp = cf.WobblerParams(params.get("alpha", 0.9))
        t = params.get("t0") or np.pi / (2 * wp.alpha)
        p1 = cf.wobbler(wp, t, x) - cf.sg_kink_S(x)
        p2 = cf.wobbler_dt(wp, t, x)
    else:
        raise ConfigError(f"unknown initial data kind {kind!r}")
    p1 = GridFunction(grid, p1, "odd", ODD_TOL).symmetrized()
    p2 = GridFunction(grid, p2, "odd", ODD_TOL).symmetrized()
    return FieldState(p1, p2, float(t))


def initial_state(cfg: SimConfig) -> FieldState:
    return make_initial_data(cfg.initial, cfg.amplitude, cfg.grid, component=cfg.component,
                             gauss_width=cfg.gauss_width, alpha=cfg.alpha, t0=cfg.t0,
                             model=cfg.model)


# --- stepping -------------------------------------------------------------------

@dataclass
class Integrator:
    """Mutable stepping buffers for one run; not shared between runs."""

    cfg: SimConfig
    state: FieldState
    u: np.ndarray = field(init=False)
    p: np.ndarray = field(init=False)

    def __post_init__(self):
        cfg, grid = self.cfg, self.state.grid
        self.grid = grid
        x = grid.x
        if cfg.model == "phi4_perturbation":
            self.model = _kernels.PHI4
            self.background = discrete_kink(grid)
            self.lin = 3 * self.background**2 - 1
            self.nl = self.background
            self.center = 0.0
        else:
            self.model = _kernels.SINE_GORDON
            self.background = cf.sg_kink_S(x)
            self.lin = np.zeros(grid.n)
            self.nl = self.lin
            self.center = np.pi
        sig = (sponge_profile(grid, cfg.sponge_width, cfg.sponge_strength)
               if cfg.boundary == "sponge" else np.zeros(grid.n))
        self.damp = np.exp(-0.5 * sig * cfg.dt)
        self.t = self.state.t
        self.u = self._field_from(self.state.phi1.values)
        self.p = np.array(self.state.phi2.values, dtype=float)
        self.acc = _kernels.force(self.u, self.lin, self.nl, grid.h, self.model, cfg.backend)

    def _field_from(self, phi1):
        if self.model == _kernels.SINE_GORDON:
            return self.background + phi1
        return np.array(phi1, dtype=float)

    def advance(self, nsteps: int) -> FieldState:
        _kernels.advance(self.u, self.p, self.acc, self.lin, self.nl, self.damp, self.grid.h,
                         self.cfg.dt, nsteps, self.model, self.center, self.cfg.backend)
        self.t += nsteps * self.cfg.dt
        st = self.snapshot()
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.p))):
            raise SimulationDiverged(f"non-finite field at t = {self.t:.4f}", st)
        return st

    def snapshot(self) -> FieldState:
        phi1 = self.u - self.background if self.model == _kernels.SINE_GORDON else self.u
        return FieldState(GridFunction(self.grid, phi1, "odd", 1e-6),
                          GridFunction(self.grid, self.p, "odd", 1e-6), float(self.t))

    def energy_full(self) -> float:
        """Discrete Hamiltonian conserved by the scheme (up to O(dt^2) oscillation)."""
        h = self.grid.h
        full = self.u + self.background if self.model == _kernels.PHI4 else self.u
        grad = np.sum(np.diff(full) ** 2) / (2 * h)
        if self.model == _kernels.PHI4:
            pot = 0.25 * (1 - full**2) ** 2
        else:
            pot = 1 - np.cos(full)
        return float(h * np.sum(0.5 * self.p**2 + pot) + grad)

    def energy_pert(self) -> float:
        """E(phi) in the perturbation form, exact for the discrete background."""
        h = self.grid.h
        if self.model == _kernels.PHI4:
            w = self.u
            grad = np.sum(np.diff(w) ** 2) / h
            return float(grad + h * np.sum(self.p**2 + self.lin * w**2 + 2 * self.nl * w**3 + 0.5 * w**4))
        S = self.background
        e0 = np.sum(np.diff(S) ** 2) / (2 * h) + h * np.sum(1 - np.cos(S))
        return 2.0 * (self.energy_full() - float(e0))


def step(state: FieldState, cfg: SimConfig) -> FieldState:
    """One kick-drift-kick step (with sponge half-steps) from ``state``."""
    cfg.validate()
    return Integrator(cfg, state).advance(1)


@dataclass(frozen=True)
class EnergyLedger:
    t: np.ndarray
    E_full: np.ndarray
    E_pert: np.ndarray

    @property
    def drift(self) -> np.ndarray:
        return self.E_full - self.E_full[0]

    def relative_drift(self) -> float:
        return float(np.max(np.abs(self.drift)) / abs(self.E_full[0]))


@dataclass
class RunResult:
    config: SimConfig
    records: list
    ledger: EnergyLedger
    snapshots: dict
    final: FieldState
    sup_norm: float
    initial_norm: float


def run(cfg: SimConfig, profiles=None, kappa0: float | None = None, sigma: float | None = None,
        snapshot_times=(), diagnostics: bool = True, progress=None) -> RunResult:
    """Advance to T, emitting a DiagnosticsRecord every ``output_stride`` steps."""
    from .diagnostics import DiagnosticContext, full_norm

    cfg.validate()
    state0 = initial_state(cfg)
    integ = Integrator(cfg, state0)
    ctx = None
    if diagnostics:
        ctx = DiagnosticContext.build(cfg.grid, cfg.diagnostic_window, profiles, cfg.model, kappa0, sigma)
    want = sorted(float(s) for s in snapshot_times)
    snaps: dict = {}
    records, ts, ef, ep = [], [], [], []
    norm0 = full_norm(state0)
    sup = norm0
    st = integ.snapshot()
    done = 0
    total = cfg.nsteps
    while True:
        ts.append(st.t)
        ef.append(integ.energy_full())
        ep.append(integ.energy_pert())
        sup = max(sup, full_norm(st))
        if ctx is not None:
            records.append(ctx.record(st, ep[-1]))
        while want and st.t >= want[0] - 0.5 * cfg.dt:
            snaps[want.pop(0)] = st
        if done >= total:
            break
        k = min(cfg.output_stride, total - done)
        st = integ.advance(k)
        done += k
        if progress is not None:
            progress(done, total)
    ledger = EnergyLedger(np.array(ts), np.array(ef), np.array(ep))
    return RunResult(cfg, records, ledger, snaps, st, sup, norm0)
