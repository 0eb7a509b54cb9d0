"""Numerical checks of curvature, normal holonomy and rigidity for metrics on S^2 x R^3."""

from .report import VERSION as __version__
from .metrics import ChartPoint, MetricModel
from .config import SuiteConfig, load_config
from .verification import run_command

__all__ = ["ChartPoint", "MetricModel", "SuiteConfig", "load_config", "run_command", "__version__"]
