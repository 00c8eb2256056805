"""Dissipative initializer, timer and state-transfer gadgets: exact simulation and error-bound checks."""

from .classical import (
    ClassicalGenerator,
    SymmetrizedState,
    eta_bound,
    eta_exhaustive,
    evolve_classical,
    initializer_generator,
    overlap_formula,
    recurrence_f,
    symmetrize,
    initializer_certificate,
    timer_distribution,
    timer_occupation,
)
from .cutoff import (
    CutoffProfile,
    TriggerSchedule,
    concatenation_error,
    cutoff_profile,
    imperfect_init_shift,
    sharp_threshold,
    tricomi_bound,
    truncated_normal_overlap,
)
from .gadgets import (
    InitializerConfig,
    TimerConfig,
    build_conditional,
    build_initializer,
    build_measurement,
    build_timer,
    build_transfer_3qubit,
    build_transfer_nqubit,
    timer_initial_state,
)
from .lindblad import (
    DensityMatrix,
    LindbladOperator,
    Liouvillian,
    QubitRegister,
    apply_generator,
    evolve,
    fidelity_with_pure,
    partial_trace,
    steady_state,
    trace_distance,
)
from .special import normal_cdf, regularized_gamma_lower, regularized_gamma_upper
from .transfer import (
    TransferRun,
    prepare_cluster,
    run_sequential,
    run_timer_triggered,
    run_transfer3,
    run_transfer_n,
    transfer_fidelity,
)

__version__ = "0.1.0"
