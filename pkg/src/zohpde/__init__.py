"""Sampled-data boundary feedback control of 1-D linear parabolic PDEs.

Spectral (modal) machinery for the Sturm-Liouville operator, two boundary
controller designs with certified sampling-period bounds, an exact
zero-order-hold closed-loop simulator, an independent finite-difference
reference solver, and trace analysis utilities.
"""

from ._backend import BACKEND
from .analysis import (
    DecayFit,
    DestabilizationResult,
    IssCheck,
    destabilization_search,
    fit_decay,
    verify_iss_estimate,
)
from .backstepping_design import (
    BacksteppingController,
    TargetIss,
    TruncationResult,
    backstepping_T_bound,
    bessel_i1,
    diagnostics_vw,
    gain_kernel,
    inverse_kernel,
    kernel_surface,
    modal_truncation,
    synthesize_backstepping,
    target_iss_gain,
    transform_norms,
    volterra_apply,
)
from .errors import (
    BracketError,
    DegenerateTrace,
    InfeasibleTruncation,
    NumericFailure,
    RequestMoreModes,
)
from .fd_oracle import ComparisonReport, FDGrid, compare_traces, fd_step, simulate_fd
from .modal_sim import (
    ModalFeedback,
    ModalState,
    SamplingSchedule,
    Trace,
    make_schedule,
    project_initial,
    reconstruct,
    reconstruct_lifted,
    simulate_closed_loop,
    zoh_step,
)
from .reduced_design import (
    ReducedController,
    SamplingBound,
    controllability_check,
    envelope_constants,
    example_bound_T,
    feedback_kernel,
    gamma_constant,
    iss_identity_check,
    max_sampling_period,
    place_poles,
    synthesize_reduced,
)
from .sl_operator import (
    AnalyticSpec,
    EigenPair,
    EigenSystem,
    LiftingPolynomial,
    SLProblem,
    ValidationReport,
    analytic_eigensystem,
    boundary_lifting,
    input_gain,
    shoot_eigensystem,
    validate_eigensystem,
)

__version__ = "0.1.0"
