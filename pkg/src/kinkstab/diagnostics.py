"""Mode decomposition, virial functionals and run-level monitors."""

from __future__ import annotations

import csv
import functools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid

from . import closedforms as cf
from .grid import Grid, GridFunction, WeightedNorms, derivative, simpson_weights, weight_omega

MU = cf.CONSTANTS.mu
CSV_COLUMNS = ("t", "z1", "z2", "alpha", "beta", "gamma", "I", "J", "K", "H_loc",
               "h1w_v1", "l2w_v2", "E_pert")


@dataclass(frozen=True)
class ModeState:
    z1: float
    z2: float

    @property
    def alpha(self) -> float:
        return self.z1**2 - self.z2**2

    @property
    def beta(self) -> float:
        return 2.0 * self.z1 * self.z2

    @property
    def gamma(self) -> float:
        return self.alpha * self.beta

    @property
    def z_sq(self) -> float:
        return self.z1**2 + self.z2**2


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mode: ModeState
    u_norms: WeightedNorms
    v_norms: WeightedNorms
    I: float
    J: float
    K: float
    H_loc: float
    E_pert: float
    full_norm: float

    def row(self) -> dict:
        m = self.mode
        return {"t": self.t, "z1": m.z1, "z2": m.z2, "alpha": m.alpha, "beta": m.beta,
                "gamma": m.gamma, "I": self.I, "J": self.J, "K": self.K, "H_loc": self.H_loc,
                "h1w_v1": self.v_norms.h1_omega, "l2w_v2": self.v_norms.l2_omega,
                "E_pert": self.E_pert}


@functools.lru_cache(maxsize=1)
def default_kappa0() -> float:
    """Discrete coercivity constant of the joint form, used as kappa0 in K."""
    from .spectral import coercivity_D_sharp

    return coercivity_D_sharp().constrained_min


@dataclass
class DiagnosticContext:
    """Profiles pre-sampled on the diagnostic window of a simulation grid."""

    grid: Grid
    sl: slice
    Y1: np.ndarray
    q: np.ndarray
    g: np.ndarray
    psi: np.ndarray
    psi_p: np.ndarray
    omega: np.ndarray
    kappa0: float
    sigma: float
    subtract_mode: bool = True

    @classmethod
    def build(cls, grid: Grid, window: float | None = None, profiles=None,
              model: str = "phi4_perturbation", kappa0: float | None = None,
              sigma: float | None = None) -> "DiagnosticContext":
        from .profiles import build_profiles

        wgrid, sl = grid.window(window if window is not None else grid.L)
        ps = profiles or build_profiles()
        res = ps.on_grid(wgrid)
        x = wgrid.x
        k0 = default_kappa0() if kappa0 is None else float(kappa0)
        phi4 = model == "phi4_perturbation"
        # sine-Gordon has no odd internal mode: v is the whole perturbation there
        q = res["q"].values if phi4 else np.zeros(wgrid.n)
        return cls(wgrid, sl, cf.Y1(x), np.array(q), np.array(res["g"].values), cf.psi(x),
                   cf.psi_prime(x), weight_omega(x), k0,
                   0.05 * k0 if sigma is None else float(sigma), phi4)

    def _int(self, v):
        return float(simpson_weights(self.grid) @ v)

    def decompose_arrays(self, phi1, phi2):
        z1 = self._int(phi1 * self.Y1)
        z2 = self._int(phi2 * self.Y1) / MU
        mode = ModeState(z1, z2)
        if not self.subtract_mode:
            return mode, phi1, phi2, phi1, phi2
        u1 = phi1 - z1 * self.Y1
        u2 = phi2 - MU * z2 * self.Y1
        v1 = u1 + mode.z_sq * self.q
        return mode, u1, u2, v1, u2

    def functionals(self, v1, v2, mode: ModeState):
        h = self.grid.h
        dv1 = derivative(v1, h, 4)
        I = self._int(self.psi * dv1 * v2) + 0.5 * self._int(self.psi_p * v1 * v2)
        J = mode.alpha * self._int(v2 * self.g) - 2 * MU * mode.beta * self._int(v1 * self.g)
        cross = self._int(self.omega * v1 * v2)
        K = self.kappa0 / (4 * MU) * mode.gamma - (I + J) + 2 * self.sigma * cross
        h1 = self._int((dv1**2 + v1**2) * self.omega)
        l2 = self._int(v2**2 * self.omega)
        H_loc = h1 + self._int(v1**2 * self.omega) + l2
        return I, J, K, H_loc, WeightedNorms(h1, l2)

    def record(self, state, E_pert: float = float("nan")) -> DiagnosticsRecord:
        p1 = np.asarray(state.phi1.values)[self.sl]
        p2 = np.asarray(state.phi2.values)[self.sl]
        mode, u1, u2, v1, v2 = self.decompose_arrays(p1, p2)
        I, J, K, H_loc, vn = self.functionals(v1, v2, mode)
        du = derivative(u1, self.grid.h, 4)
        un = WeightedNorms(self._int((du**2 + u1**2) * self.omega), self._int(u2**2 * self.omega))
        return DiagnosticsRecord(float(state.t), mode, un, vn, I, J, K, H_loc, float(E_pert),
                                 full_norm(state))


def full_norm(state) -> float:
    """||(phi1, phi2)||_{H^1 x L^2} over the whole grid, via cached Simpson weights."""
    g = state.phi1.grid
    p1, p2 = np.asarray(state.phi1.values), np.asarray(state.phi2.values)
    d = derivative(p1, g.h, 2)
    return float(np.sqrt(simpson_weights(g) @ (d * d + p1 * p1 + p2 * p2)))


def decompose(state, profiles=None, model: str = "phi4_perturbation"):
    """(ModeState, (u1, u2), (v1, v2)) for a FieldState, on the state's own grid."""
    ctx = DiagnosticContext.build(state.phi1.grid, None, profiles, model, kappa0=0.0)
    mode, u1, u2, v1, v2 = ctx.decompose_arrays(np.asarray(state.phi1.values),
                                                np.asarray(state.phi2.values))
    g = ctx.grid
    mk = lambda a: GridFunction(g, a, "odd", 1e-6)  # noqa: E731
    return mode, (mk(u1), mk(u2)), (mk(v1), mk(v2))


def virial_functionals(v, mode: ModeState, profiles=None, kappa0: float | None = None,
                       sigma: float | None = None):
    """(I, J, K, H_loc) for v = (v1, v2) on any grid."""
    v1, v2 = v
    ctx = DiagnosticContext.build(v1.grid, None, profiles, kappa0=kappa0 if kappa0 is not None else 0.0,
                                  sigma=sigma)
    if kappa0 is None:
        ctx.kappa0 = default_kappa0()
        ctx.sigma = 0.05 * ctx.kappa0 if sigma is None else sigma
    I, J, K, H_loc, _ = ctx.functionals(np.asarray(v1.values), np.asarray(v2.values), mode)
    return I, J, K, H_loc


# --- run-series tools --------------------------------------------------------------

@dataclass(frozen=True)
class Series:
    """Column view of a list of DiagnosticsRecord."""

    cols: dict

    @classmethod
    def from_records(cls, records) -> "Series":
        rows = [r.row() for r in records]
        cols = {k: np.array([row[k] for row in rows], dtype=float) for k in CSV_COLUMNS}
        cols["z_abs"] = np.sqrt(cols["z1"] ** 2 + cols["z2"] ** 2)
        cols["full_norm"] = np.array([r.full_norm for r in records], dtype=float)
        return cls(cols)

    def __getitem__(self, k):
        return self.cols[k]

    def __len__(self):
        return len(self.cols["t"])


def write_series_csv(path, records) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            row = r.row()
            w.writerow([repr(float(row[k])) for k in CSV_COLUMNS])


def read_series_csv(path) -> dict:
    with Path(path).open() as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in CSV_COLUMNS}


def time_derivative(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    dt = np.diff(t)
    if len(t) < 5 or not np.allclose(dt, dt[0], rtol=1e-6, atol=1e-12):
        raise ValueError("need at least 5 uniformly spaced samples")
    return derivative(y, dt[0], 4)


@dataclass(frozen=True)
class MonitorFit:
    name: str
    C: float
    violations: int
    samples: int


def _fit_C(lhs, lead, rem, scale):
    """Smallest C >= 0 with lhs >= lead - C scale rem on every sample."""
    gap = lead - lhs
    bad = gap > 0
    if not np.any(bad):
        return 0.0, 0
    with np.errstate(divide="ignore", invalid="ignore"):
        need = np.where(rem > 0, gap / (scale * rem), np.inf)
    return float(np.max(need[bad])), int(np.sum(bad))


@dataclass
class MonitorReport:
    fits: dict
    dtK_c: float
    dtK_fraction: float
    partial_integral: float
    integral_over_eps2: float | None
    integrand_tail_ratio: float
    stride_ok: bool
    excluded: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "fits": {k: vars(v) for k, v in self.fits.items()},
            "dtK_c": self.dtK_c,
            "dtK_fraction": self.dtK_fraction,
            "partial_integral": self.partial_integral,
            "integral_over_eps2": self.integral_over_eps2,
            "integrand_tail_ratio": self.integrand_tail_ratio,
            "stride_ok": self.stride_ok,
            "excluded": [list(e) for e in self.excluded],
        }


def _mask(t, exclude, edge=2):
    m = np.ones(len(t), dtype=bool)
    m[:edge] = False
    m[-edge:] = False
    for a, b in exclude:
        m &= ~((t >= a) & (t <= b))
    return m


def inequality_monitors(series, kappa0: float | None = None, sigma: float | None = None,
                        eps: float | None = None, exclude=(), quantile: float = 0.05,
                        max_dt: float = 0.25) -> MonitorReport:
    """Check the three differential inequalities and the d K/dt lower bound along a run.

    ``series`` is a Series, a list of records, or a column dict as read from CSV.
    """
    if isinstance(series, list):
        series = Series.from_records(series).cols
    elif isinstance(series, Series):
        series = series.cols
    t = np.asarray(series["t"])
    if len(t) < 5:
        raise ValueError("run too short for centered differences")
    # a final partial stride (T not a multiple of it) would break the uniform spacing
    n = len(t)
    if n > 5 and not np.isclose(t[-1] - t[-2], t[1] - t[0], rtol=1e-6):
        n -= 1
        series = {k: np.asarray(v)[:n] for k, v in series.items()}
        t = t[:n]
    dt = float(t[1] - t[0])
    if dt > max_dt:
        raise ValueError(f"output stride dt = {dt} too coarse for differencing (max {max_dt})")
    k0 = default_kappa0() if kappa0 is None else kappa0
    sg = 0.05 * k0 if sigma is None else sigma
    z4 = (series["z1"] ** 2 + series["z2"] ** 2) ** 2
    h1, l2 = series["h1w_v1"], series["l2w_v2"]
    al, be = series["alpha"], series["beta"]
    # int omega v1 v2, recovered from K = k0/(4mu) gamma - (I+J) + 2 sigma X
    IJ = series["I"] + series["J"]
    if sg > 0:
        X = (series["K"] - k0 / (4 * MU) * series["gamma"] + IJ) / (2 * sg)
    else:
        X = np.zeros_like(t)
    m = _mask(t, exclude)
    e = 1.0 if eps is None or eps == 0 else eps

    def fit(name, lhs, lead, rem, scale):
        C, nbad = _fit_C(lhs[m], lead[m], rem[m], scale)
        return MonitorFit(name, C, nbad, int(m.sum()))

    fits = {
        "mode_gamma": fit("mode_gamma", time_derivative(series["gamma"], t),
                          2 * MU * (be**2 - al**2), z4 + h1, e),
        "virial_IJ": fit("virial_IJ", -time_derivative(IJ, t), k0 * (al**2 + h1), z4 + l2, e),
        "cross_term": fit("cross_term", 2 * time_derivative(X, t), l2, z4 + h1, 1.0),
    }
    dK = time_derivative(series["K"], t)
    R = z4 + h1 + l2
    sel = m & (R > 0)
    if np.any(sel):
        ratio = dK[sel] / R[sel]
        c = float(np.quantile(ratio, quantile, method="lower"))
        frac = float(np.mean(ratio >= c)) if c > 0 else float(np.mean(ratio > 0))
    else:
        c, frac = 0.0, 1.0
    integrand = z4 + h1 + l2
    total = float(trapezoid(integrand, t)) if len(t) > 1 else 0.0
    n10 = max(1, len(t) // 10)
    head, tail = float(np.mean(integrand[:n10])), float(np.mean(integrand[-n10:]))
    tail_ratio = tail / head if head > 0 else 0.0
    return MonitorReport(fits, c, frac, total, total / eps**2 if eps else None, tail_ratio,
                         dt <= max_dt, list(exclude))


def _crossing_period(t, y):
    y = y - np.mean(y)
    s = np.sign(y)
    idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
    if len(idx) < 4:
        return None, None
    tc = t[idx] - y[idx] * (t[idx + 1] - t[idx]) / (y[idx + 1] - y[idx])
    half = np.diff(tc)
    return 2.0 * float(np.mean(half)), float(np.std(half) / np.mean(half))


@dataclass(frozen=True)
class Verdict:
    verdict: str
    H_ratio: float
    z_ratio: float
    H_final_min_ratio: float
    period: float | None
    period_spread: float | None

    def to_dict(self) -> dict:
        return dict(vars(self))


def decay_verdict(series, decay_threshold: float = 0.25, persist_threshold: float = 0.5,
                  period_cv_max: float = 0.1) -> Verdict:
    if isinstance(series, list):
        series = Series.from_records(series).cols
    elif isinstance(series, Series):
        series = series.cols
    t = np.asarray(series["t"])
    T0, T1 = t[0], t[-1]
    span = T1 - T0
    ini = t <= T0 + 0.1 * span
    fin = t >= T1 - 0.1 * span
    Hl = np.asarray(series["H_loc"])
    z = np.sqrt(series["z1"] ** 2 + series["z2"] ** 2)
    H0, z0 = float(np.mean(Hl[ini])), float(np.mean(z[ini]))

    def ratio(a, b):
        return a / b if b > 0 else 0.0

    Hr, zr = ratio(float(np.mean(Hl[fin])), H0), ratio(float(np.mean(z[fin])), z0)
    Hmin = ratio(float(np.min(Hl[fin])), H0)
    period, spread = _crossing_period(t, np.asarray(series["z1"]))
    if H0 == 0 and z0 == 0:
        v = "decaying"
    elif Hr < decay_threshold and zr < decay_threshold:
        v = "decaying"
    elif Hmin > persist_threshold and period is not None and spread < period_cv_max:
        v = "non_decaying"
    else:
        v = "inconclusive"
    return Verdict(v, Hr, zr, Hmin, period, spread)
