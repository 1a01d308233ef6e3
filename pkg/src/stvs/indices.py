"""Stability indices, thresholds, classification and full assessment.

Two complementary quantities summarize a post-fault window:

* the oscillation index: KL divergence between the divergence-factor
  distribution of the embedded oscillatory components (system level)
  and the Gompertz reference with shift 1, and
* one recovery index per generator: the same KL construction on the
  residual recovery exponents, weighted by the depth of the initial
  voltage dip.

Both increase toward instability; each is compared against a critical
value, yielding a classification and a signed percentage margin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import oel
from .distribution import gompertz_reference, histogram, kl_divergence
from .embed import (
    augment_rocov,
    delay_embed,
    normalize_channels,
    select_delay,
)
from .emd import (
    DecompositionResult,
    decompose,
    dominant_imf_frequency,
    filter_imfs_by_frequency,
)
from .errors import (
    ComputationError,
    TrivialRecovery,
    TriviallySafe,
    TriviallyTripping,
    ValidationError,
)
from .ingest import (
    VoltageTrajectory,
    estimate_prefault_voltage,
    extract_post_fault_window,
)
from .lyapunov import fsle_oscillation_series, fsle_residual_series

OSC_X_STAR = 1.0  # oscillation reference shift sits at the unit factor

NO_OSC_TAG = "no oscillatory content"


@dataclass(frozen=True)
class AssessmentConfig:
    """Defaults for the full assessment pipeline.

    The IMF grid (20 bins on [0, 1.5], gamma2 = 10) is the threshold
    construction grid; the recovery grid uses twice the resolution on
    the same range so nearby recovery rates land in distinct bins.
    """

    window_s: float = 3.0
    lookback_s: float = 0.5
    imf_bins: int = 20
    imf_lo: float = 0.0
    imf_hi: float = 1.5
    gamma2: float = 10.0
    band: tuple[float, float] = (0.0, 10.0)
    rec_bins: int = 40
    rec_lo: float = 0.0
    rec_hi: float = 1.5
    gamma1_default: float = 10.0
    x_star_default: float = 1.05
    eq0: float | None = None  # None: per-channel pre-fault mean
    epsilon_osc: float = 0.0
    embed_m: int = 4
    n_directions: int = 8
    gamma1_range: tuple[float, float, int] = (1.0, 200.0, 40)
    x_star_range: tuple[float, float, int] = (0.8, 1.3, 26)
    pickup_pad_s: float = 1.0
    generators: dict[str, oel.GeneratorSpec] | None = None

    def imf_grid(self) -> tuple[int, float, float]:
        return self.imf_bins, self.imf_lo, self.imf_hi

    def rec_grid(self) -> tuple[int, float, float]:
        return self.rec_bins, self.rec_lo, self.rec_hi

    def gamma1_grid(self) -> np.ndarray:
        lo, hi, n = self.gamma1_range
        return np.geomspace(lo, hi, int(n))

    def x_star_grid(self) -> np.ndarray:
        lo, hi, n = self.x_star_range
        return np.linspace(lo, hi, int(n))

    def echo(self) -> dict:
        return {
            "window_s": self.window_s,
            "gamma2": self.gamma2,
            "imf_grid": {
                "bins": self.imf_bins,
                "lo": self.imf_lo,
                "hi": self.imf_hi,
            },
            "rec_grid": {
                "bins": self.rec_bins,
                "lo": self.rec_lo,
                "hi": self.rec_hi,
            },
            "band_hz": list(self.band),
            "gamma1_default": self.gamma1_default,
            "x_star_default": self.x_star_default,
            "eq0": self.eq0,
            "epsilon_osc": self.epsilon_osc,
            "embed_m": self.embed_m,
            "gamma1_range": list(self.gamma1_range),
            "x_star_range": list(self.x_star_range),
        }


@dataclass(frozen=True)
class OscillationResult:
    """System-level oscillation index with diagnostics."""

    value: float
    note: str | None = None
    factors: np.ndarray | None = None


@dataclass(frozen=True)
class RecoveryResult:
    """Per-generator recovery index D = dip_depth * KL."""

    value: float
    delta_r0: float
    kl: float
    note: str | None = None
    factors: np.ndarray | None = None


@dataclass(frozen=True)
class GeneratorAssessment:
    id: str
    index: float
    threshold: float | None
    margin: float | None
    classification: str
    delta_r0: float


@dataclass(frozen=True)
class StabilityAssessment:
    """Assembled oscillation and per-generator recovery verdicts."""

    oscillation_index: float
    oscillation_threshold: float
    oscillation_margin: float
    oscillation_classification: str
    oscillation_note: str | None
    per_generator: tuple[GeneratorAssessment, ...]
    epsilon: float
    config_echo: dict
    latency_s: float

    def to_dict(self) -> dict:
        osc = {
            "index": self.oscillation_index,
            "threshold": self.oscillation_threshold,
            "margin": self.oscillation_margin,
            "class": self.oscillation_classification,
        }
        if self.oscillation_note:
            osc["note"] = self.oscillation_note
        return {
            "oscillation": osc,
            "generators": [
                {
                    "id": g.id,
                    "index": g.index,
                    "threshold": g.threshold,
                    "margin": g.margin,
                    "class": g.classification,
                    "delta_r0": g.delta_r0,
                }
                for g in self.per_generator
            ],
            "config": self.config_echo,
            "latency_s": self.latency_s,
        }


def classify(
    index: float, threshold: float, epsilon: float = 0.0
) -> tuple[str, float]:
    """Place an index against its critical value.

    Returns (classification, margin%) with margin = (index - threshold)
    / threshold * 100.  Indices within epsilon/2 of the threshold are
    critical.
    """
    if threshold <= 0:
        raise ValidationError("threshold must be positive")
    if epsilon < 0:
        raise ValidationError("epsilon must be non-negative")
    margin = (index - threshold) / threshold * 100.0
    if index < threshold - epsilon / 2.0:
        label = "stable"
    elif index > threshold + epsilon / 2.0:
        label = "unstable"
    else:
        label = "critical"
    return label, margin


_RECOVERY_LABEL = {"stable": "non-trip", "unstable": "trip", "critical": "critical"}


def imf_threshold(
    bins: int, grid_range: tuple[float, float], gamma2: float
) -> float:
    """Critical oscillation index for the given grid.

    A fixed-magnitude oscillation never diverges, so its divergence
    factors concentrate at and just below 1: the construction spreads
    unit mass uniformly over the bin containing x = 1 and the two bins
    below it, then measures the KL distance to the Gompertz reference
    with shift 1 on the same grid.
    """
    lo, hi = grid_range
    if bins < 3:
        raise ValidationError("need at least 3 bins for the threshold")
    if not lo < hi:
        raise ValidationError(f"invalid range [{lo}, {hi}]")
    edges = np.linspace(lo, hi, bins + 1)
    if not (edges[0] < 1.0 < edges[-1]):
        raise ValidationError("grid must contain the unit divergence factor")
    ic = int(np.searchsorted(edges, 1.0, side="right") - 1)
    if ic - 2 < 0:
        raise ValidationError("grid leaves no room below the unit factor")
    p = np.zeros(bins)
    p[ic - 2: ic + 1] = 1.0 / 3.0
    from .distribution import DivergenceHistogram

    hist = DivergenceHistogram(bin_edges=edges, probabilities=p)
    ref = gompertz_reference(gamma2, OSC_X_STAR, edges)
    return kl_divergence(hist, ref)


def _embedding_parameters(
    n_states: int,
    period_samples: int | None,
    m: int,
    signal_for_delay: np.ndarray,
) -> tuple[int, int, int]:
    """Resolve (m, tau, theiler) for the available window length.

    The delay targets a quarter of the dominant oscillation period so
    the embedding span covers most of a cycle: that makes the embedded
    norm read the oscillation envelope instead of the instantaneous
    phase.  The mutual-information delay takes over only when no
    oscillation frequency is measurable.  On short windows the
    dimension drops before the delay collapses so that at least a
    handful of embedded points remain.
    """
    if period_samples is not None:
        tau = max(1, int(round(period_samples / 4)))
    elif signal_for_delay.size >= 32:
        try:
            tau = select_delay(signal_for_delay)
        except ValidationError:
            tau = 1
    else:
        tau = 1
    while m > 2 and n_states - (m - 1) * tau < 8:
        m -= 1
    tau = min(tau, max(1, (n_states - 8) // max(m - 1, 1)))
    n_points = n_states - (m - 1) * tau
    theiler = min(
        period_samples or n_points, max(1, (n_points - 2) // 3)
    )
    return m, tau, theiler


def oscillation_index(
    decomp: DecompositionResult,
    gamma2: float,
    grid: tuple[int, float, float],
    m: int = 4,
) -> OscillationResult:
    """System-level oscillation index from the retained IMFs.

    Pipeline: per-channel IMF sums -> unit-RMS normalization -> ROCOV
    augmentation -> delay embedding -> amplitude-ratio divergence
    exponents of the embedded state -> divergence-factor histogram ->
    KL distance to the Gompertz reference with shift 1.

    The exponent series measures the embedded oscillation state against
    the oscillation-free equilibrium (the origin), mirroring the
    residual recovery construction where the equilibrium serves as the
    reference trajectory.
    """
    signals = []
    for ch in range(decomp.n_channels):
        if decomp.n_imfs(ch) == 0:
            continue
        osc = decomp.oscillatory(ch)
        if float(np.sqrt(np.mean(osc**2))) > 1e-9:
            signals.append(osc)
    if not signals:
        return OscillationResult(value=0.0, note=NO_OSC_TAG)

    freq = dominant_imf_frequency(decomp)
    period = (
        max(2, int(round(1.0 / (freq * decomp.dt)))) if freq else None
    )
    rms = [float(np.sqrt(np.mean(s**2))) for s in signals]
    dominant = signals[int(np.argmax(rms))]
    states = augment_rocov(normalize_channels(signals))
    m_use, tau, theiler = _embedding_parameters(
        len(states), period, m, dominant
    )
    emb = delay_embed(states, m=m_use, tau=tau, theiler=theiler, dt=decomp.dt)
    series = fsle_oscillation_series(
        emb, anchor_window=period if period else None
    )
    bins, lo, hi = grid
    hist = histogram(series.divergence_factors, bins, lo, hi)
    ref = gompertz_reference(gamma2, OSC_X_STAR, hist.bin_edges)
    return OscillationResult(
        value=kl_divergence(hist, ref),
        factors=series.divergence_factors,
    )


def recovery_index(
    residual: np.ndarray,
    v_pre: float,
    eq0: float,
    gamma1: float,
    x_star: float,
    grid: tuple[int, float, float],
    dt: float,
) -> RecoveryResult:
    """Per-generator recovery index: dip depth times the KL distance.

    The dip weight is |V_pre - R(t0)|; residuals that never left the
    equilibrium floor score 0 (no dip, trivially safe).
    """
    r = np.asarray(residual, dtype=float)
    delta_r0 = abs(v_pre - float(r[0]))
    try:
        series = fsle_residual_series(r, eq0=eq0, dt=dt)
    except TrivialRecovery:
        return RecoveryResult(
            value=0.0, delta_r0=delta_r0, kl=0.0, note="no dip"
        )
    bins, lo, hi = grid
    hist = histogram(series.divergence_factors, bins, lo, hi)
    ref = gompertz_reference(gamma1, x_star, hist.bin_edges)
    kl = kl_divergence(hist, ref)
    return RecoveryResult(
        value=delta_r0 * kl,
        delta_r0=delta_r0,
        kl=kl,
        factors=series.divergence_factors,
    )


def _resolve_prefault(
    traj: VoltageTrajectory, config: AssessmentConfig
) -> dict[str, float]:
    if traj.prefault_voltage:
        return dict(traj.prefault_voltage)
    if traj.fault_clear_index == 0:
        raise ValidationError(
            "cannot estimate the pre-fault voltage: no samples before the "
            "fault and no explicit value supplied"
        )
    lookback = min(
        config.lookback_s, traj.fault_clear_index * traj.dt
    )
    return estimate_prefault_voltage(traj, lookback)


def _assess_generator(
    gen_id: str,
    residual: np.ndarray,
    window: VoltageTrajectory,
    v_pre: float,
    eq0: float,
    config: AssessmentConfig,
) -> GeneratorAssessment:
    """Recovery verdict for one generator channel."""
    spec = (config.generators or {}).get(gen_id)
    rec_grid = config.rec_grid()
    dt = window.dt

    if spec is None:
        result = recovery_index(
            residual,
            v_pre,
            eq0,
            config.gamma1_default,
            config.x_star_default,
            rec_grid,
            dt,
        )
        label = "non-trip" if result.note == "no dip" else "not-assessed"
        return GeneratorAssessment(
            id=gen_id,
            index=result.value,
            threshold=None,
            margin=None,
            classification=label,
            delta_r0=result.delta_r0,
        )

    channel = window.channels[window.channel_ids.index(gen_id)]
    if channel.reactive_power is None:
        raise ValidationError(
            f"generator {gen_id}: trip prediction needs reactive power "
            f"measurements for the Q-V fit"
        )
    try:
        series = fsle_residual_series(residual, eq0=eq0, dt=dt)
    except TrivialRecovery:
        return GeneratorAssessment(
            id=gen_id,
            index=0.0,
            threshold=None,
            margin=None,
            classification="non-trip",
            delta_r0=abs(v_pre - float(residual[0])),
        )

    charac = oel.build_characteristic(
        spec, channel.voltage, channel.reactive_power
    )
    try:
        critical = oel.construct_critical_signals(
            residual,
            dt,
            eq0,
            list(charac.vcaps),
            series,
            pad_s=config.pickup_pad_s,
        )
    except TriviallySafe:
        result = recovery_index(
            residual, v_pre, eq0,
            config.gamma1_default, config.x_star_default, rec_grid, dt,
        )
        return GeneratorAssessment(
            id=gen_id,
            index=result.value,
            threshold=None,
            margin=None,
            classification="non-trip",
            delta_r0=result.delta_r0,
        )
    except TriviallyTripping:
        result = recovery_index(
            residual, v_pre, eq0,
            config.gamma1_default, config.x_star_default, rec_grid, dt,
        )
        return GeneratorAssessment(
            id=gen_id,
            index=result.value,
            threshold=None,
            margin=None,
            classification="trip",
            delta_r0=result.delta_r0,
        )

    n = critical.window_samples
    tuning = oel.tune_gamma(
        critical.s1[:n],
        critical.s2[:n],
        eq0,
        v_pre,
        dt,
        rec_grid,
        gamma1_grid=config.gamma1_grid(),
        x_star_grid=config.x_star_grid(),
    )
    result = recovery_index(
        residual, v_pre, eq0, tuning.gamma1, tuning.x_star, rec_grid, dt
    )
    label, margin = classify(
        result.value, tuning.d_critical_r, tuning.epsilon
    )
    return GeneratorAssessment(
        id=gen_id,
        index=result.value,
        threshold=tuning.d_critical_r,
        margin=margin,
        classification=_RECOVERY_LABEL[label],
        delta_r0=result.delta_r0,
    )


def assess(
    traj: VoltageTrajectory, config: AssessmentConfig | None = None
) -> StabilityAssessment:
    """Run the full pipeline on one post-fault trajectory.

    Decomposes the post-fault window, scores the oscillatory components
    at the system level and the residual recovery per generator, and
    classifies both against their critical values.  Stage failures are
    re-raised with the stage name attached.
    """
    config = config or AssessmentConfig()
    available = (traj.n_samples - traj.fault_clear_index) * traj.dt
    window_s = min(config.window_s, available - traj.dt)

    def stage(name, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ValidationError, ComputationError) as exc:
            raise type(exc)(f"[{name}] {exc}") from exc

    window = stage("ingest", extract_post_fault_window, traj, window_s)
    v_pre = stage("ingest", _resolve_prefault, traj, config)

    decomp = stage(
        "emd", decompose, window, n_directions=config.n_directions
    )
    retained = stage("emd", filter_imfs_by_frequency, decomp, config.band)

    osc = stage(
        "oscillation",
        oscillation_index,
        retained,
        config.gamma2,
        config.imf_grid(),
        config.embed_m,
    )
    threshold = stage(
        "oscillation",
        imf_threshold,
        config.imf_bins,
        (config.imf_lo, config.imf_hi),
        config.gamma2,
    )
    osc_label, osc_margin = classify(osc.value, threshold, config.epsilon_osc)

    per_gen = []
    for ch_index, gen_id in enumerate(window.channel_ids):
        eq0 = config.eq0 if config.eq0 is not None else v_pre[gen_id]
        per_gen.append(
            stage(
                f"recovery:{gen_id}",
                _assess_generator,
                gen_id,
                retained.residuals[ch_index],
                window,
                v_pre[gen_id],
                eq0,
                config,
            )
        )

    return StabilityAssessment(
        oscillation_index=osc.value,
        oscillation_threshold=threshold,
        oscillation_margin=osc_margin,
        oscillation_classification=osc_label,
        oscillation_note=osc.note,
        per_generator=tuple(per_gen),
        epsilon=config.epsilon_osc,
        config_echo=config.echo(),
        latency_s=window_s,
    )
