import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stvs.embed import (
    EmbeddedTrajectory,
    augment_rocov,
    delay_embed,
    nearest_neighbors,
    normalize_channels,
    select_delay,
)
from stvs.errors import ComputationError, ValidationError


# -- ROCOV augmentation --------------------------------------------------------

def test_rocov_constant_channel_gives_zero_difference():
    states = augment_rocov([np.full(10, 0.97)])
    assert states.shape == (9, 2)
    assert np.all(states[:, 1] == 0.0)


def test_rocov_ramp_gives_constant_difference():
    states = augment_rocov([0.01 * np.arange(20.0)])
    assert np.allclose(states[:, 1], 0.01)


def test_rocov_sine_difference_matches_derivative():
    dt, f = 0.02, 1.5
    t = dt * np.arange(200)
    states = augment_rocov([np.sin(2 * np.pi * f * t)])
    w = 2 * np.pi * f * dt
    analytic = w * np.cos(2 * np.pi * f * t[1:])
    assert np.max(np.abs(states[:, 1] - analytic)) < w**2


def test_rocov_needs_two_samples():
    with pytest.raises(ValidationError):
        augment_rocov([np.array([1.0])])


def test_rocov_output_geometry():
    states = augment_rocov([np.ones(40), np.ones(40)])
    assert states.shape == (39, 4)


# -- delay selection -----------------------------------------------------------

def test_delay_constant_signal_rejected():
    with pytest.raises(ValidationError):
        select_delay(np.full(100, 1.0))


def test_delay_noisy_tone_quarter_period():
    # measured tone: period 40 samples plus realistic sensor noise; the
    # first mutual-information minimum is the quarter period
    rng = np.random.default_rng(0)
    x = np.sin(2 * np.pi * np.arange(4000) / 40.0) + 0.1 * rng.standard_normal(4000)
    assert abs(select_delay(x) - 10) <= 2


def test_delay_white_noise_is_immediate():
    x = np.random.default_rng(2).standard_normal(512)
    assert select_delay(x) == 1


def test_delay_needs_32_samples():
    with pytest.raises(ValidationError):
        select_delay(np.sin(np.arange(20.0)))


# -- delay embedding -----------------------------------------------------------

def test_embed_m1_is_identity():
    states = np.random.default_rng(1).standard_normal((30, 2))
    emb = delay_embed(states, m=1, tau=1, theiler=0, dt=0.02)
    assert np.array_equal(emb.points, states)


def test_embed_length_bound():
    # needs length > (m-1)*tau + 1: nine states cannot support m=3, tau=4
    states = np.random.default_rng(1).standard_normal((9, 1))
    with pytest.raises(ValidationError):
        delay_embed(states, m=3, tau=4, theiler=0, dt=0.02)
    boundary = np.random.default_rng(1).standard_normal((10, 1))
    emb = delay_embed(boundary, m=3, tau=4, theiler=0, dt=0.02)
    assert emb.n_points == 2


def test_embed_point_count_and_dimension():
    states = np.random.default_rng(1).standard_normal((150, 4))
    emb = delay_embed(states, m=2, tau=5, theiler=3, dt=0.02)
    assert emb.points.shape == (145, 8)


def test_embed_recovers_state_sequence():
    states = np.random.default_rng(5).standard_normal((60, 3))
    emb = delay_embed(states, m=3, tau=4, theiler=0, dt=0.02)
    assert np.array_equal(emb.points[:, :3], states[: len(emb.points)])


# -- nearest neighbors -----------------------------------------------------------

def test_identical_points_pair_at_zero_distance():
    pts = np.array([[1.0, 2.0], [1.0, 2.0], [5.0, 5.0]])
    emb = EmbeddedTrajectory(points=pts, m=1, tau=1, theiler=0, dt=0.02)
    pairs = dict(nearest_neighbors(emb))
    assert pairs[0] == 1
    assert pairs[1] == 0


def test_theiler_window_exhausts_candidates():
    pts = np.random.default_rng(0).standard_normal((10, 2))
    emb = EmbeddedTrajectory(points=pts, m=1, tau=1, theiler=9, dt=0.02)
    with pytest.raises(ComputationError):
        nearest_neighbors(emb)


def brute_force_pairs(points, theiler):
    pairs = []
    n = len(points)
    for i in range(n):
        best, best_d = None, np.inf
        for j in range(n):
            if abs(i - j) <= theiler:
                continue
            d = float(np.linalg.norm(points[i] - points[j]))
            if d < best_d or (d == best_d and (best is None or j < best)):
                best, best_d = j, d
        if best is not None:
            pairs.append((i, best))
    return pairs


def test_neighbors_match_brute_force_oracle():
    pts = np.random.default_rng(42).standard_normal((200, 3))
    emb = EmbeddedTrajectory(points=pts, m=1, tau=1, theiler=5, dt=0.02)
    assert nearest_neighbors(emb) == brute_force_pairs(pts, 5)


def test_neighbors_respect_theiler_window():
    pts = np.random.default_rng(7).standard_normal((120, 2))
    emb = EmbeddedTrajectory(points=pts, m=1, tau=1, theiler=8, dt=0.02)
    assert all(abs(i - j) > 8 for i, j in nearest_neighbors(emb))


@given(
    shift=st.lists(
        st.floats(min_value=-50, max_value=50, allow_nan=False),
        min_size=2,
        max_size=2,
    ),
    seed=st.integers(min_value=0, max_value=2**16),
)
@settings(max_examples=25, deadline=None)
def test_neighbors_invariant_under_translation(shift, seed):
    pts = np.random.default_rng(seed).standard_normal((40, 2))
    emb = EmbeddedTrajectory(points=pts, m=1, tau=1, theiler=2, dt=0.02)
    moved = EmbeddedTrajectory(
        points=pts + np.asarray(shift), m=1, tau=1, theiler=2, dt=0.02
    )
    assert nearest_neighbors(emb) == nearest_neighbors(moved)


# -- normalization ----------------------------------------------------------------

def test_normalize_channels_zero_mean_unit_rms():
    rng = np.random.default_rng(9)
    out = normalize_channels([5.0 + 0.3 * rng.standard_normal(100)])
    assert abs(out[0].mean()) < 1e-12
    assert np.sqrt(np.mean(out[0] ** 2)) == pytest.approx(1.0)


def test_normalize_rejects_constant():
    with pytest.raises(ValidationError):
        normalize_channels([np.full(50, 1.0)])
