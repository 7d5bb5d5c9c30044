"""Entanglement-assisted telescope interferometry simulator."""

from .qcore import (
    AstroVisibility,
    DegenerateResourceError,
    DensityMatrix4,
    KrausChannel,
    NotXFormError,
    XState,
    apply_independent_channels,
    concurrence_subspace,
    concurrence_wootters_x,
    extract_xstate,
    kraus_amplitude_damping,
    kraus_dephasing,
    kraus_depolarizing,
    make_astro_state,
    make_bell_psi,
    subspace_weight,
    wrap_phase,
)
from .channels import (
    DegenerateCoherenceWarning,
    FiberLink,
    MemoryPair,
    RateModel,
    depol_prob,
    fiber_loss_prob,
    ideal_bell_xstate,
    log_rate_depol_approx,
    log_rate_fiber,
    measurement_rate,
    memory_dephasing_channel,
    memory_xstate,
    swap_memories,
    xstate_amplitude_damping,
    xstate_dephasing,
    xstate_depolarizing,
)
from .protocol import (
    DegeneratePhasesError,
    DetectionCounts,
    PhaseSettings,
    VisibilityEstimate,
    ZeroConcurrenceError,
    delta_p,
    derive_seed,
    postselect,
    propagate_errors,
    raw_probabilities,
    raw_probabilities_oracle,
    run_observation,
    sample_counts,
    scaling_laws,
    solve_visibility,
)
from .imaging import (
    BaselinePlan,
    IntensityError,
    SkyModel,
    VisibilitySample,
    intensity_error,
    observe_and_image,
    reconstruct_intensity,
    resolution,
    true_visibility,
)

__version__ = "0.1.0"
