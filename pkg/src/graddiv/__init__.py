"""Splitting schemes for the unsteady grad-div problem on a 2D MAC grid."""

from .grid import (
    CenteredField,
    MacGrid,
    StaggeredField,
    build_grid,
    centered_l2_norm,
    interpolate_to_centers,
    staggered_inner_product,
)
from .mms import ManufacturedCase
from .operator import GradDivOperator, OperatorPart, discrete_divergence
from .schemes import Scheme, SchemeConfig, TimeState, run_time_loop
from .stability_monitor import StabilityMonitor, apply_C, check_step_inequality, verify_operator_hypotheses

__version__ = "0.1.0"
