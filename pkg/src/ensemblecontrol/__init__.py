"""Open-loop control synthesis for parameterized families of time-varying
linear systems, with singular-system diagnostics, spheroidal machinery for
the harmonic band, and an amplitude-constrained QP solver."""

__version__ = "0.1.0"

from .errors import (EnsembleControlError, IntegrationError, NumericalError,
                     ParameterError, ShapeError, ToleranceNotMetError)
from .model import (Grid, SystemSpec, TransitionTensor, EnsembleTrajectory,
                    family_from_config, repeated_eigenvalue_check,
                    simulate_ensemble, transition_between, transition_matrices,
                    uniform_grid)
from .operator import (ControlSignal, DiscreteOperator, SingularSystem,
                       TargetOffset, apply_adjoint, apply_operator, assemble,
                       illposedness_demo, picard_diagnostic, singular_system,
                       synthesize_min_norm, target_offset)
from .oscillator import (HarmonicSpec, from_symmetric_frame,
                         noncontrollability_witness, simulate_profile,
                         synthesize_alpha, to_symmetric_frame,
                         verify_by_simulation)
from .qp import QpProblem, QpSolution, build_qp, evaluate_final_distance, solve_box_qp
from .spheroidal import SpheroidalBasis, continuous_basis, dpss, sinc_matrix

__all__ = [
    "__version__",
    "EnsembleControlError", "IntegrationError", "NumericalError",
    "ParameterError", "ShapeError", "ToleranceNotMetError",
    "Grid", "SystemSpec", "TransitionTensor", "EnsembleTrajectory",
    "family_from_config", "repeated_eigenvalue_check", "simulate_ensemble",
    "transition_between", "transition_matrices", "uniform_grid",
    "ControlSignal", "DiscreteOperator", "SingularSystem", "TargetOffset",
    "apply_adjoint", "apply_operator", "assemble", "illposedness_demo",
    "picard_diagnostic", "singular_system", "synthesize_min_norm",
    "target_offset",
    "HarmonicSpec", "from_symmetric_frame", "noncontrollability_witness",
    "simulate_profile", "synthesize_alpha", "to_symmetric_frame",
    "verify_by_simulation",
    "QpProblem", "QpSolution", "build_qp", "evaluate_final_distance",
    "solve_box_qp",
    "SpheroidalBasis", "continuous_basis", "dpss", "sinc_matrix",
]
