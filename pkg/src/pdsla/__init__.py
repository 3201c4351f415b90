"""Granger causality tests for high-dimensional, possibly integrated VAR systems.

The main entry point is :func:`pds_la_test`: lasso-based double selection of
control lags followed by a lag-augmented LM or Wald test on the causing
variable's lags.
"""

from pdsla.errors import PdslaError
from pdsla.lags import LagConfig, build_design
from pdsla.lagselect import select_lag
from pdsla.panel import Panel
from pdsla.pds import GcTestResult, pds_la_test

__version__ = "0.1.0"

__all__ = ["GcTestResult", "LagConfig", "Panel", "PdslaError", "build_design", "pds_la_test", "select_lag"]
