"""Numerical laboratory for fully nonlinear equations that degenerate at the boundary.

Subpackages and modules: ``geometry`` (domains, distance, grids), ``operators``
(operator families and condition checks), ``scheme`` (monotone finite
differences), ``solve`` (steady and parabolic solvers), ``analysis``
(closed forms and estimators) and ``harness`` (scenarios, experiments, reports).
"""
from .errors import DegenlabError

__version__ = "0.1.0"
__all__ = ["DegenlabError", "__version__"]
