"""Numerical toolkit for odd perturbations of the phi^4 kink.

Submodules: ``grid`` (meshes, quadrature), ``closedforms`` (analytic profiles),
``profiles`` (ODE-derived profiles and constants), ``spectral`` (coercivity and
Fermi Golden Rule checks), ``simulator`` (leapfrog dynamics), ``diagnostics``
(virial functionals and monitors), ``cli``.
"""

__version__ = "0.1.0"

from .grid import Grid, GridFunction, inner, weighted_norms  # noqa: E402
from .closedforms import CONSTANTS, WobblerParams, evaluate  # noqa: E402

__all__ = ["Grid", "GridFunction", "inner", "weighted_norms", "CONSTANTS", "WobblerParams",
           "evaluate", "__version__"]
