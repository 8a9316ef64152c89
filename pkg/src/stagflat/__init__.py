"""Numerical diagnostics for stagnation points of axisymmetric free-surface flows.

Modules: ``field`` (stream functions and vorticity models), ``quadrature``,
``functionals`` (radial energy and frequency quantities), ``identities``
(residual checks), ``blowup``, ``classifier`` and ``cli``.
"""

from .errors import *  # noqa: F401,F403
from .field import (EffectiveVorticity, Point2, ScalarField2D, SyntheticProfileSpec, Window,
                    linear_vorticity, load_grid, make_synthetic, zero_vorticity)
from .quadrature import DEFAULT_SPEC, QuadratureSpec
from .functionals import AnalysisWindow, profile_sweep
from .classifier import classify_stagnation_point, detect_stagnation_points

__version__ = "0.1.0"
