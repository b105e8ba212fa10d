"""Damped semilinear waves with singularly perturbed acoustic boundary conditions."""
from .mesh import Mesh, build_mesh, h1_norm_sq, poincare_lambda, trace_constant
from .model import (FunctionalConstants, Nonlinearity, State, derive_constants,
                    functional_constants, lift, lyapunov_E_eps, make_nonlinearity,
                    multiplier_functional, norm_Heps_sq, project)
from .integrator import SplitRun, StepFailure, Stepper, run, run_split, step
from .diagnostics import EnergyLedger, check_diff_inequality, fit_decay, verify_gronwall
from .attractor import Cloud, SweepResult, compare_trajectories, epsilon_sweep, hausdorff_semidist

__all__ = [
    "Mesh", "build_mesh", "h1_norm_sq", "poincare_lambda", "trace_constant",
    "FunctionalConstants", "Nonlinearity", "State", "derive_constants",
    "functional_constants", "lift", "lyapunov_E_eps", "make_nonlinearity",
    "multiplier_functional", "norm_Heps_sq", "project",
    "SplitRun", "StepFailure", "Stepper", "run", "run_split", "step",
    "EnergyLedger", "check_diff_inequality", "fit_decay", "verify_gronwall",
    "Cloud", "SweepResult", "compare_trajectories", "epsilon_sweep", "hausdorff_semidist",
]
