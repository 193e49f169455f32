"""Numerical companion for approximation rates of single-hidden-layer networks."""
__version__ = "0.1.0"

from .core import Activation, Domain, GridSpec, NormQuery, TargetFunction, norm  # noqa: E402,F401
