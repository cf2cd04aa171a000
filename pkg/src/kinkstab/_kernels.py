"""Leapfrog kernels for the odd-sector wave equations.

Two interchangeable backends: numba-compiled loops and plain numpy.  The
backend is chosen at import from ``KINKSTAB_NUMBA`` (``0`` forces numpy) and can
be overridden per call with ``backend=``.

Conventions shared by both backends (so their outputs agree to rounding):
  * u is the evolved field, p its time derivative, both on the full symmetric grid;
  * ``u - center`` is kept odd and p odd after every step;
  * the first and last nodes are frozen (Dirichlet);
  * ``damp`` holds exp(-sigma(x) dt / 2), applied before and after each kick-drift-kick.
"""

from __future__ import annotations

import os

import numpy as np

PHI4 = 0
SINE_GORDON = 1

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False


def default_backend() -> str:
    flag = os.environ.get("KINKSTAB_NUMBA", "1").strip().lower()
    if flag in ("0", "false", "no", "off") or not HAVE_NUMBA:
        return "numpy"
    return "numba"


# --- numpy -------------------------------------------------------------------------

def _force_np(u, lin, nl, h, model, out):
    out[0] = 0.0
    out[-1] = 0.0
    lap = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / (h * h)
    w = u[1:-1]
    if model == PHI4:
        out[1:-1] = lap - lin[1:-1] * w - 3.0 * nl[1:-1] * w * w - w * w * w
    else:
        out[1:-1] = lap - np.sin(w)
    return out


def _symmetrize_np(u, p, center):
    r = u[::-1] - center
    u[:] = center + 0.5 * ((u - center) - r)
    p[:] = 0.5 * (p - p[::-1])


def advance_numpy(u, p, acc, lin, nl, damp, h, dt, nsteps, model, center):
    for _ in range(nsteps):
        p *= damp
        p += 0.5 * dt * acc
        p[0] = p[-1] = 0.0
        u[1:-1] += dt * p[1:-1]
        _force_np(u, lin, nl, h, model, acc)
        p += 0.5 * dt * acc
        p *= damp
        _symmetrize_np(u, p, center)
        # acc must match the symmetrized u
        _force_np(u, lin, nl, h, model, acc)


# --- numba -------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _force_nb(u, lin, nl, h, model, out):
        n = u.shape[0]
        ih2 = 1.0 / (h * h)
        out[0] = 0.0
        out[n - 1] = 0.0
        for j in range(1, n - 1):
            w = u[j]
            lap = (u[j + 1] - 2.0 * w + u[j - 1]) * ih2
            if model == 0:
                out[j] = lap - lin[j] * w - 3.0 * nl[j] * w * w - w * w * w
            else:
                out[j] = lap - np.sin(w)

    @njit(cache=True)
    def _symmetrize_nb(u, p, center):
        n = u.shape[0]
        for j in range(n // 2 + 1):
            k = n - 1 - j
            a = 0.5 * ((u[j] - center) - (u[k] - center))
            b = 0.5 * (p[j] - p[k])
            u[j] = center + a
            u[k] = center - a
            p[j] = b
            p[k] = -b

    @njit(cache=True)
    def advance_numba(u, p, acc, lin, nl, damp, h, dt, nsteps, model, center):
        n = u.shape[0]
        for _ in range(nsteps):
            for j in range(n):
                p[j] = damp[j] * p[j] + 0.5 * dt * acc[j]
            p[0] = 0.0
            p[n - 1] = 0.0
            for j in range(1, n - 1):
                u[j] += dt * p[j]
            _force_nb(u, lin, nl, h, model, acc)
            for j in range(n):
                p[j] = damp[j] * (p[j] + 0.5 * dt * acc[j])
            _symmetrize_nb(u, p, center)
            _force_nb(u, lin, nl, h, model, acc)

    def _force_dispatch(u, lin, nl, h, model, out):
        _force_nb(u, lin, nl, h, model, out)
        return out
else:  # pragma: no cover
    advance_numba = None
    _force_dispatch = _force_np


def force(u, lin, nl, h, model, backend: str | None = None):
    out = np.empty_like(u)
    if (backend or default_backend()) == "numba":
        return _force_dispatch(u, lin, nl, h, model, out)
    return _force_np(u, lin, nl, h, model, out)


def advance(u, p, acc, lin, nl, damp, h, dt, nsteps, model, center=0.0, backend: str | None = None):
    """Advance (u, p) in place by ``nsteps`` leapfrog steps; ``acc`` must hold force(u) on entry."""
    b = backend or default_backend()
    if b == "numba":
        if advance_numba is None:
            raise RuntimeError("numba backend requested but numba is unavailable")
        advance_numba(u, p, acc, lin, nl, damp, float(h), float(dt), int(nsteps), int(model), float(center))
    elif b == "numpy":
        advance_numpy(u, p, acc, lin, nl, damp, float(h), float(dt), int(nsteps), int(model), float(center))
    else:
        raise ValueError(f"unknown backend {b!r}")
