"""Uniform symmetric grids, sampled functions and whole-line quadrature."""

from __future__ import annotations

import csv
import functools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_simpson, simpson, trapezoid

PARITIES = ("odd", "even", "conj", "anticonj", "none")


class GridMismatchError(ValueError):
    pass


class NonDecayingError(ValueError):
    """Raised when an antiderivative does not return to zero at the far edge."""


@dataclass(frozen=True)
class Grid:
    """Nodes ``x_j = -L + j h`` with an odd node count, so that x = 0 is a node."""

    L: float
    n: int

    def __post_init__(self):
        if self.n < 3 or self.n % 2 == 0:
            raise ValueError(f"n must be an odd integer >= 3, got {self.n}")
        if not self.L > 0:
            raise ValueError("half width must be positive")

    @classmethod
    def from_spacing(cls, L: float, h: float) -> "Grid":
        m = int(round(L / h))
        if not np.isclose(m * h, L, rtol=0, atol=1e-9 * L):
            raise ValueError(f"L={L} is not a multiple of h={h}")
        return cls(float(L), 2 * m + 1)

    @property
    def h(self) -> float:
        return 2.0 * self.L / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        m = (self.n - 1) // 2
        return np.arange(-m, m + 1) * self.h

    @property
    def center(self) -> int:
        return (self.n - 1) // 2

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.L, (self.n - 1) * factor + 1)

    def window(self, half_width: float) -> tuple["Grid", slice]:
        """Sub-grid on [-half_width, half_width] sharing the same nodes."""
        m = int(round(half_width / self.h))
        m = min(m, self.center)
        sl = slice(self.center - m, self.center + m + 1)
        return Grid(m * self.h, 2 * m + 1), sl

    def meta(self) -> dict:
        return {"L": self.L, "n": self.n, "h": self.h}


def _parity_defect(values: np.ndarray, parity: str) -> float:
    r = values[::-1]
    if parity == "odd":
        d = values + r
    elif parity == "even":
        d = values - r
    elif parity == "conj":
        d = values - np.conj(r)
    elif parity == "anticonj":
        d = values + np.conj(r)
    else:
        return 0.0
    scale = max(np.max(np.abs(values)), 1e-300)
    return float(np.max(np.abs(d)) / scale)


@dataclass(frozen=True)
class GridFunction:
    grid: Grid
    values: np.ndarray
    parity: str = "none"
    tol: float = field(default=1e-9, compare=False)

    def __post_init__(self):
        vals = np.array(self.values, copy=True)
        if vals.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} samples, got shape {vals.shape}")
        if self.parity not in PARITIES:
            raise ValueError(f"unknown parity {self.parity!r}")
        defect = _parity_defect(vals, self.parity)
        if defect > self.tol:
            raise ValueError(f"samples violate declared parity {self.parity!r} (defect {defect:.2e})")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def parity_defect(self, parity: str | None = None) -> float:
        return _parity_defect(self.values, parity or self.parity)

    def with_values(self, values, parity: str | None = None) -> "GridFunction":
        return GridFunction(self.grid, values, self.parity if parity is None else parity, self.tol)

    def symmetrized(self) -> "GridFunction":
        v = self.values
        r = v[::-1]
        if self.parity == "odd":
            v = 0.5 * (v - r)
        elif self.parity == "even":
            v = 0.5 * (v + r)
        elif self.parity == "conj":
            v = 0.5 * (v + np.conj(r))
        elif self.parity == "anticonj":
            v = 0.5 * (v - np.conj(r))
        return self.with_values(v)

    def derivative(self, order: int = 4) -> np.ndarray:
        return derivative(self.values, self.grid.h, order)

    def at_zero(self):
        return self.values[self.grid.center]

    def to_csv(self, path) -> None:
        write_csv(path, self)


def _check_same(*fs: GridFunction) -> Grid:
    g = fs[0].grid
    for f in fs[1:]:
        if f.grid != g:
            raise GridMismatchError(f"grid mismatch: {g} vs {f.grid}")
    return g


def derivative(y: np.ndarray, h: float, order: int = 4) -> np.ndarray:
    """Centered first derivative; order 2 or 4 in the interior, one-sided at the ends."""
    if order not in (2, 4):
        raise ValueError("stencil order must be 2 or 4")
    if len(y) < 5:
        raise ValueError("need at least 5 points for the difference stencil")
    d = np.gradient(y, h, edge_order=2)
    if order == 4:
        d[2:-2] = (y[:-4] - 8 * y[1:-3] + 8 * y[3:-1] - y[4:]) / (12 * h)
    return d


def second_derivative(y: np.ndarray, h: float, order: int = 4) -> np.ndarray:
    if order not in (2, 4):
        raise ValueError("stencil order must be 2 or 4")
    if len(y) < 5:
        raise ValueError("need at least 5 points for the difference stencil")
    d = np.empty_like(y)
    d[1:-1] = (y[2:] - 2 * y[1:-1] + y[:-2]) / h**2
    if order == 4:
        d[2:-2] = (-y[:-4] + 16 * y[1:-3] - 30 * y[2:-2] + 16 * y[3:-1] - y[4:]) / (12 * h**2)
    # one-sided second order at the edges
    d[0] = (2 * y[0] - 5 * y[1] + 4 * y[2] - y[3]) / h**2
    d[-1] = (2 * y[-1] - 5 * y[-2] + 4 * y[-3] - y[-4]) / h**2
    return d


def integrate(values: np.ndarray, grid: Grid, rule: str = "simpson"):
    x = grid.x
    if rule == "simpson":
        if np.iscomplexobj(values):
            return simpson(values.real, x=x) + 1j * simpson(values.imag, x=x)
        return float(simpson(values, x=x))
    if rule == "trapezoid":
        out = trapezoid(values, x=x)
        return complex(out) if np.iscomplexobj(values) else float(out)
    raise ValueError(f"unknown quadrature rule {rule!r}")


@functools.lru_cache(maxsize=32)
def simpson_weights(grid: Grid) -> np.ndarray:
    """Composite Simpson weights; ``w @ f`` equals integrate(f, grid) to rounding."""
    w = np.full(grid.n, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    w *= grid.h / 3.0
    w.setflags(write=False)
    return w


def inner(F: GridFunction, G: GridFunction, rule: str = "simpson"):
    """<F, G> = integral of F*G over [-L, L] (no complex conjugation)."""
    grid = _check_same(F, G)
    return integrate(F.values * G.values, grid, rule)


def inner_estimate(F: GridFunction, G: GridFunction, decay_rate: float | None = None):
    """Simpson value of <F, G> with an error estimate.

    The estimate is |Simpson - trapezoid| plus, when the product is known to decay
    like exp(-decay_rate |x|), the tail beyond +-L.
    """
    grid = _check_same(F, G)
    prod = F.values * G.values
    val = integrate(prod, grid, "simpson")
    err = abs(val - integrate(prod, grid, "trapezoid"))
    tail = 0.0
    if decay_rate is not None:
        tail = (abs(prod[0]) + abs(prod[-1])) / decay_rate
    return val, err + tail


def weight_omega(x):
    """Local weight sech(x / (2 sqrt 2))."""
    return 1.0 / np.cosh(x / (2.0 * np.sqrt(2.0)))


@dataclass(frozen=True)
class WeightedNorms:
    h1_omega: float
    l2_omega: float

    @property
    def total(self) -> float:
        return self.h1_omega + self.l2_omega


def weighted_norms(v1: GridFunction, v2: GridFunction, order: int = 4,
                   rule: str = "simpson") -> WeightedNorms:
    grid = _check_same(v1, v2)
    om = weight_omega(grid.x)
    dv1 = derivative(v1.values, grid.h, order)
    h1 = integrate((dv1**2 + v1.values**2) * om, grid, rule)
    l2 = integrate(v2.values**2 * om, grid, rule)
    return WeightedNorms(float(h1), float(l2))


def cumulative(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Running integral from -L, Simpson-based, same length as ``values``."""
    x = grid.x
    if np.iscomplexobj(values):
        return (cumulative_simpson(values.real, x=x, initial=0.0)
                + 1j * cumulative_simpson(values.imag, x=x, initial=0.0))
    return cumulative_simpson(values, x=x, initial=0.0)


def antiderivative_even(xi: GridFunction, tol: float = 1e-8) -> GridFunction:
    """Even antiderivative of an odd, decaying function, vanishing at -L.

    Raises NonDecayingError if the running integral does not come back to zero at +L.
    """
    if xi.parity != "odd":
        raise ValueError("antiderivative_even expects an odd GridFunction")
    ups = cumulative(xi.values, xi.grid)
    scale = max(np.max(np.abs(ups)), 1.0)
    if abs(ups[-1]) > tol * scale:
        raise NonDecayingError(f"antiderivative does not vanish at +L (value {ups[-1]:.3e})")
    ups = 0.5 * (ups + ups[::-1])
    return GridFunction(xi.grid, ups, "even")


def write_csv(path, fn: GridFunction) -> None:
    path = Path(path)
    x = fn.grid.x
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if np.iscomplexobj(fn.values):
            w.writerow(["x", "re", "im"])
            for xi, v in zip(x, fn.values):
                w.writerow([repr(float(xi)), repr(float(v.real)), repr(float(v.imag))])
        else:
            w.writerow(["x", "value"])
            for xi, v in zip(x, fn.values):
                w.writerow([repr(float(xi)), repr(float(v))])


def read_csv(path, parity: str = "none") -> GridFunction:
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(c) for c in r] for r in body])
    x = data[:, 0]
    grid = Grid(float(-x[0]), len(x))
    if not np.allclose(grid.x, x, atol=1e-9 * grid.L):
        raise ValueError("CSV nodes are not a uniform symmetric grid")
    vals = data[:, 1] + 1j * data[:, 2] if header == ["x", "re", "im"] else data[:, 1]
    return GridFunction(grid, vals, parity)
