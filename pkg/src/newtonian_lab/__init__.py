"""Dyadic ball covers, discrete gradients and modulus solvers on finite
metric-measure spaces."""

from .space import MetricMeasureSpace, SpaceError, generate_space

__all__ = ["MetricMeasureSpace", "SpaceError", "generate_space"]
__version__ = "0.1.0"
