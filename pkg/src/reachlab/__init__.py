"""Reachable sets of control-affine systems as point clouds, with Hausdorff-metric tooling."""

from .errors import (
    BlowUpError,
    BudgetExceededError,
    ConfigError,
    DimensionError,
    DomainError,
    ExprError,
    ExprSyntaxError,
    PreconditionError,
    ProjectionError,
    ReachLabError,
)
from .expr import eval_expression, lambdify, parse_expression, to_text
from .integrate import Trajectory, flow_endpoint, integrate_trajectory
from .metric import (
    PointCloud,
    directed_hausdorff,
    dyadic_dictionary,
    hausdorff,
    quantize_cloud,
    weak_star_discrepancy,
)
from .omega import Ball, Box, Hull, omega_contains, omega_hausdorff, omega_net, omega_project
from .reach import ReachSpec, convergence_study, reachable_cloud
from .system import ControlAffineSystem, PiecewiseConstantControl, control_value, square_wave

__version__ = "0.1.0"
