"""Exact dynamics of a harmonic oscillator coupled to a Lorentzian bosonic bath.

Closed-form amplitudes in every parameter regime, the average excitation
number N(t), pulse control, Mpemba experiments, and independent numerical
oracles that check all of it.
"""

__version__ = "0.1.0"

from .errors import (ConsistencyError, ConvergenceError, NearPoleWarning, ParameterError,
                     RegimeError)
from .model import (Branch, ModelParams, RegimeClass, bose_occupation, classify_regime,
                    correlation_kernel, discretize_bath, lorentzian_modes, ode_coefficients,
                    spectral_density)
from .analytic import amplitude, amplitude_solution, bath_kernel_f, general_homogeneous, solve
from .observables import (Provenance, QuadratureConfig, Trajectory, aen_at, aen_trajectory,
                          norm_defect, relaxation_time, steady_state_aen)
from .oracle import IntegratorConfig, evolve_discrete_bath, evolve_local_ode
from .control import (MpembaReport, PulseKind, PulseSchedule, control_frequency,
                      control_scale, evolve_with_control, mpemba_experiment, suggest_kick_end)

__all__ = [
    "__version__",
    "ConsistencyError", "ConvergenceError", "NearPoleWarning", "ParameterError", "RegimeError",
    "Branch", "ModelParams", "RegimeClass", "bose_occupation", "classify_regime",
    "correlation_kernel", "discretize_bath", "lorentzian_modes", "ode_coefficients",
    "spectral_density",
    "amplitude", "amplitude_solution", "bath_kernel_f", "general_homogeneous", "solve",
    "Provenance", "QuadratureConfig", "Trajectory", "aen_at", "aen_trajectory", "norm_defect",
    "relaxation_time", "steady_state_aen",
    "IntegratorConfig", "evolve_discrete_bath", "evolve_local_ode",
    "MpembaReport", "PulseKind", "PulseSchedule", "control_frequency", "control_scale", "evolve_with_control",
    "mpemba_experiment", "suggest_kick_end",
]
