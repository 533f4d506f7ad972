"""Distributed continual linear regression with CoCoA: simulation and closed-form error analysis."""

from .baseline import offline_ls, offline_ls_prefixes
from .cocoa import CocoaState, Partition, build_abar, one_step_closed_form, run_sequence
from .linalg import LinAlgError, RngStream, pinv
from .metrics import forgetting, generalization_exact, run_monte_carlo, training_error
from .tasks import TaskData, TaskSequenceSpec, generate_parameters, generate_task_data
from .theory import (
    TheoryDims,
    centralized_error,
    coeffs,
    corollary4_error,
    corollary_equal_dims,
    h_equal,
    limit_error_infT,
    psi_coeffs,
    theorem1_error,
    theorem2_error,
    zero_error_conditions,
)

__version__ = "0.1.0"
