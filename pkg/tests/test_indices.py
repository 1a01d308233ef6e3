import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import osc_params
from stvs.emd import decompose, filter_imfs_by_frequency
from stvs.errors import ValidationError
from stvs.indices import (
    NO_OSC_TAG,
    AssessmentConfig,
    assess,
    classify,
    imf_threshold,
    oscillation_index,
    recovery_index,
)
from stvs.ingest import Channel, VoltageTrajectory, extract_post_fault_window
from stvs.synth import ScenarioParams, synth_scenario

IMF_GRID = (20, 0.0, 1.5)
REC_GRID = (40, 0.0, 1.5)


def osc_index_for(kind, window=3.0, **overrides):
    traj = synth_scenario(kind, osc_params(**overrides))
    w = extract_post_fault_window(traj, window)
    decomp = filter_imfs_by_frequency(decompose(w), (0.0, 10.0))
    return oscillation_index(decomp, 10.0, IMF_GRID)


def residual_for(kind, **overrides):
    traj = synth_scenario(kind, ScenarioParams(**overrides))
    w = extract_post_fault_window(traj, 3.0)
    decomp = filter_imfs_by_frequency(decompose(w), (0.0, 10.0))
    return decomp.residuals[0], w.dt


# -- critical oscillation value ---------------------------------------------------

def test_imf_threshold_matches_reported_value():
    # 20 bins on [0, 1.5] with gamma2 = 10 must give 2.09 +/- 0.05
    assert imf_threshold(20, (0.0, 1.5), 10.0) == pytest.approx(2.09, abs=0.05)


def test_imf_threshold_small_gamma_limit():
    # gamma -> 0+: the reference flattens to uniform, so the value
    # approaches ln(bins / 3)
    value = imf_threshold(20, (0.0, 1.5), 1e-9)
    assert value == pytest.approx(np.log(20.0 / 3.0), abs=1e-6)


def test_imf_threshold_depends_on_bin_count():
    a = imf_threshold(20, (0.0, 1.5), 10.0)
    b = imf_threshold(40, (0.0, 1.5), 10.0)
    assert a != pytest.approx(b, abs=1e-3)


def test_imf_threshold_needs_unit_factor_inside_grid():
    with pytest.raises(ValidationError):
        imf_threshold(20, (2.0, 3.0), 10.0)


# -- classification -----------------------------------------------------------------

def test_classify_boundary_is_critical():
    label, margin = classify(1.0, 1.0, 0.0)
    assert label == "critical"
    assert margin == 0.0


def test_classify_stable_margin():
    label, margin = classify(0.5, 1.0, 0.0)
    assert label == "stable"
    assert margin == pytest.approx(-50.0)


def test_classify_unstable_margin_with_tolerance():
    label, margin = classify(1.2, 1.0, 0.05)
    assert label == "unstable"
    assert margin == pytest.approx(20.0)


@given(
    index=st.floats(min_value=0.0, max_value=10.0, allow_nan=False),
    threshold=st.floats(min_value=0.1, max_value=10.0, allow_nan=False),
)
@settings(max_examples=100, deadline=None)
def test_classify_margin_sign_matches_side(index, threshold):
    label, margin = classify(index, threshold, 0.0)
    if label == "stable":
        assert margin < 0
    elif label == "unstable":
        assert margin > 0
    else:
        assert margin == 0.0


# -- oscillation index ----------------------------------------------------------------

def test_oscillation_index_no_imfs_is_tagged_zero():
    traj = VoltageTrajectory(
        channels=(Channel(id="A", voltage=np.full(150, 1.0)),), dt=0.02
    )
    decomp = decompose(traj)
    result = oscillation_index(decomp, 10.0, IMF_GRID)
    assert result.value == 0.0
    assert result.note == NO_OSC_TAG


def test_undamped_oscillation_scores_near_threshold():
    # the threshold construction is the index of a fixed-magnitude
    # oscillation, so an undamped scenario must land within 15% of it
    threshold = imf_threshold(20, (0.0, 1.5), 10.0)
    result = osc_index_for("stable-osc", decay=0.0)
    assert abs(result.value - threshold) <= 0.15 * threshold


def test_oscillation_index_strictly_decreasing_in_damping():
    values = [
        osc_index_for("stable-osc", decay=d).value
        for d in (0.05, 0.1, 0.2, 0.4, 0.8)
    ]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_growing_oscillation_scores_far_above_threshold():
    threshold = imf_threshold(20, (0.0, 1.5), 10.0)
    for g in (0.1, 0.4):
        result = osc_index_for("growing-osc", growth=g)
        assert result.value > 1.5 * threshold


# -- recovery index -------------------------------------------------------------------

def test_recovery_index_zero_without_dip():
    residual, dt = residual_for("fast-recovery", dip=0.0)
    result = recovery_index(residual, 1.0, 1.0, 10.0, 1.05, REC_GRID, dt)
    assert result.value == 0.0
    assert result.note == "no dip"


def test_recovery_index_orders_fast_slow_stalled():
    fast, dt = residual_for("fast-recovery", recovery=2.0, dip=0.3)
    slow, _ = residual_for("fast-recovery", recovery=0.05, dip=0.3)
    stalled, _ = residual_for("stalled-recovery", level=0.7)
    args = (1.0, 1.0, 10.0, 1.05, REC_GRID, dt)
    v_fast = recovery_index(fast, *args).value
    v_slow = recovery_index(slow, *args).value
    v_stall = recovery_index(stalled, *args).value
    assert v_fast < v_slow < v_stall


def test_recovery_index_strictly_decreasing_in_rate():
    values = []
    for rate in (0.05, 0.1, 0.5, 1.0, 2.0):
        residual, dt = residual_for("fast-recovery", recovery=rate, dip=0.3)
        values.append(
            recovery_index(residual, 1.0, 1.0, 10.0, 1.05, REC_GRID, dt).value
        )
    assert all(a > b for a, b in zip(values, values[1:]))


# -- full assessment -------------------------------------------------------------------

def test_assess_stable_case(generator_specs):
    traj = synth_scenario(
        "mixed", osc_params(recovery=2.0, dip=0.3, decay=0.4)
    )
    result = assess(traj, AssessmentConfig(generators=generator_specs))
    assert result.oscillation_classification == "stable"
    assert all(g.classification == "non-trip" for g in result.per_generator)


def test_assess_stalled_case_trips(generator_specs):
    traj = synth_scenario(
        "stalled-recovery",
        osc_params(level=0.7, stall_osc_amp=0.01),
    )
    result = assess(traj, AssessmentConfig(generators=generator_specs))
    assert any(g.classification == "trip" for g in result.per_generator)


def test_assess_quiescent_case():
    channels = tuple(
        Channel(id=f"G{i}", voltage=np.full(400, 1.0), reactive_power=np.full(400, 0.4))
        for i in (1, 2)
    )
    traj = VoltageTrajectory(channels=channels, dt=0.02, fault_clear_index=50)
    result = assess(traj, AssessmentConfig())
    assert result.oscillation_index == 0.0
    assert result.oscillation_classification == "stable"
    assert all(g.index == 0.0 for g in result.per_generator)
    assert all(g.classification == "non-trip" for g in result.per_generator)


def test_assess_invariant_to_extra_constant_channel(generator_specs):
    params = osc_params(recovery=2.0, dip=0.3, decay=0.4)
    traj = synth_scenario("mixed", params)
    extra = Channel(
        id="FLAT",
        voltage=np.full(traj.n_samples, 1.0),
        reactive_power=np.full(traj.n_samples, 0.5),
    )
    augmented = VoltageTrajectory(
        channels=traj.channels + (extra,),
        dt=traj.dt,
        fault_clear_index=traj.fault_clear_index,
        prefault_voltage={**traj.prefault_voltage, "FLAT": 1.0},
    )
    cfg = AssessmentConfig(generators=generator_specs)
    base = assess(traj, cfg)
    plus = assess(augmented, cfg)
    assert base.oscillation_classification == plus.oscillation_classification
    assert base.oscillation_index == pytest.approx(plus.oscillation_index)
    flat_entry = next(g for g in plus.per_generator if g.id == "FLAT")
    assert flat_entry.classification == "non-trip"
    for g_base in base.per_generator:
        g_plus = next(g for g in plus.per_generator if g.id == g_base.id)
        assert g_plus.classification == g_base.classification


def test_assess_json_contract(generator_specs):
    traj = synth_scenario("mixed", osc_params(recovery=0.5, dip=0.3, decay=0.4))
    doc = assess(traj, AssessmentConfig(generators=generator_specs)).to_dict()
    assert set(doc) == {"oscillation", "generators", "config", "latency_s"}
    assert set(doc["oscillation"]) >= {"index", "threshold", "margin", "class"}
    for entry in doc["generators"]:
        assert set(entry) == {"id", "index", "threshold", "margin", "class", "delta_r0"}
