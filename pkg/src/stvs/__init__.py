"""Short-term voltage stability indices from post-fault voltage records.

The pipeline decomposes multi-channel post-fault voltage into
oscillatory components and a recovery trend, estimates finite-time /
finite-size Lyapunov exponent series for each part, and scores the
divergence-factor distributions against a shifted reversed Gompertz
reference via KL divergence.  Two indices result: a system-level
oscillation index and a per-generator recovery (trip-prediction) index,
each with a critical value, a classification and a signed margin.
"""

from .distribution import (
    DivergenceHistogram,
    GompertzReference,
    gompertz_curve,
    gompertz_reference,
    histogram,
    kl_divergence,
)
from .embed import (
    EmbeddedTrajectory,
    augment_rocov,
    delay_embed,
    nearest_neighbors,
    normalize_channels,
    select_delay,
)
from .emd import (
    DecompositionResult,
    SiftConfig,
    TrendOnlySignal,
    decompose,
    decompose_signals,
    filter_imfs_by_frequency,
    sift,
    zero_crossing_frequency,
)
from .errors import (
    ComputationError,
    StvsError,
    TrivialRecovery,
    TriviallySafe,
    TriviallyTripping,
    ValidationError,
)
from .indices import (
    AssessmentConfig,
    StabilityAssessment,
    assess,
    classify,
    imf_threshold,
    oscillation_index,
    recovery_index,
)
from .ingest import (
    Channel,
    VoltageTrajectory,
    detect_fault_clear_index,
    estimate_prefault_voltage,
    extract_post_fault_window,
    load_trajectory,
    write_trajectory,
)
from .lyapunov import (
    ExponentSeries,
    fsle_oscillation_series,
    fsle_residual_series,
    ftle_imf_series,
    ftle_window,
    noise_bias_variance,
)
from .oel import (
    GeneratorSpec,
    OELCharacteristic,
    TuningResult,
    construct_critical_signals,
    fit_qv,
    load_generator_config,
    tune_gamma,
    voltage_cap,
)
from .synth import (
    NoiseSpec,
    ScenarioParams,
    TwoTimescaleParams,
    add_noise,
    analytic_ftle,
    simulate_two_timescale,
    synth_scenario,
)

__version__ = "0.1.0"
