"""Moving-horizon state estimation with Bayesian-optimized dynamics models.

The package learns a linear surrogate of an unknown plant by minimizing the
moving-horizon estimator's cost over the model parameters with GP-based
Bayesian optimization, then estimates states with the learned model.
"""

__version__ = "0.1.0"

from .acquisition import AcquisitionConfig, Proposal, expected_improvement, propose_next
from .errors import (
    BomheError,
    ConfigError,
    IllConditionedKernelError,
    InvalidArgumentError,
    NumericDivergenceError,
    SingularInnovationError,
    SingularWindowError,
)
from .gp import GpDataset, GpHyperParams, GpModel, fit, log_marginal_likelihood, optimize_hyperparams
from .loop import BomheConfig, BomheResult, RunRecord, evaluate_theta, mae, optimize
from .mhe import ArrivalState, MheConfig, WindowSolution, riccati_update, run_trajectory, solve_window
from .models import LinearModel, ParamTemplate, TemplateEntry, ThetaVector, extract, instantiate
from .systems import (
    HeatConstants,
    SystemSim,
    Trajectory,
    custom_linear_system,
    heat_system,
    jacobian_linearize,
    leak_system,
    simulate,
)

__all__ = [name for name in dir() if not name.startswith("_")]
