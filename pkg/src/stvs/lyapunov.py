"""Finite-time and finite-size Lyapunov exponent series.

Two estimators feed the stability indices:

* a finite-size exponent for each recovery residual, measured against
  the equilibrium voltage (the equilibrium itself is the reference
  trajectory), and
* a finite-time exponent for the oscillatory components, obtained from
  the divergence of embedded neighbor pairs as the least-squares slope
  of the mean logarithmic distance curve (time-resolved: one slope per
  expanding window, never collapsed to a single average).

Divergence factors are exp(lambda); below 1 means convergence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embed import EmbeddedTrajectory
from .errors import ComputationError, TrivialRecovery, ValidationError

# Initial residual deviations below this per-unit floor carry no dip
# worth analysing; the generator is trivially safe.
EPS_FLOOR = 1e-4


@dataclass(frozen=True)
class ExponentSeries:
    """Time-resolved exponent estimates lambda(k) and exp(lambda(k))."""

    lambdas: np.ndarray
    divergence_factors: np.ndarray
    k_offsets: np.ndarray
    dt: float
    kind: str  # "residual-FSLE" | "imf-FTLE"

    def __post_init__(self) -> None:
        if len(self.lambdas) == 0:
            raise ComputationError("empty exponent series")
        if not np.allclose(
            self.divergence_factors, np.exp(self.lambdas), rtol=1e-12, atol=0.0
        ):
            raise ComputationError("divergence factors inconsistent with lambdas")

    def times(self) -> np.ndarray:
        return self.k_offsets * self.dt


def ftle_window(delta0: float, delta_t: float, t_window: float) -> float:
    """Finite-window exponent (1/T) * ln(deltaT / delta0)."""
    if delta0 <= 0 or delta_t <= 0:
        raise ValidationError("separations must be positive")
    if t_window <= 0:
        raise ValidationError("window length must be positive")
    return float(np.log(delta_t / delta0) / t_window)


def fsle_residual_series(
    residual: np.ndarray,
    eq0: float,
    dt: float,
    t0_index: int = 0,
) -> ExponentSeries:
    """Recovery-rate exponents of a residual trend toward equilibrium.

    lambda(k) = ln(|R(t0 + k dt) - eq0| / |R(t0) - eq0|) / (k dt) for
    k = 1..K.  Offsets where the deviation is exactly zero are skipped
    (their logarithm is unbounded); raises :class:`TrivialRecovery` when
    the initial deviation is below the per-unit floor.
    """
    r = np.asarray(residual, dtype=float)
    if not (0 <= t0_index < len(r) - 1):
        raise ValidationError(
            f"t0_index {t0_index} leaves no samples to analyse"
        )
    dev = np.abs(r[t0_index:] - eq0)
    d0 = float(dev[0])
    if d0 < EPS_FLOOR:
        raise TrivialRecovery(
            f"initial residual deviation {d0:.2e} pu is below the "
            f"{EPS_FLOOR:.0e} pu floor"
        )
    k = np.arange(1, len(dev))
    keep = dev[1:] > 0.0
    if not np.any(keep):
        raise ComputationError("all residual deviations past t0 are zero")
    k = k[keep]
    lambdas = np.log(dev[1:][keep] / d0) / (k * dt)
    return ExponentSeries(
        lambdas=lambdas,
        divergence_factors=np.exp(lambdas),
        k_offsets=k,
        dt=dt,
        kind="residual-FSLE",
    )


def ftle_imf_series(
    emb: EmbeddedTrajectory, pairs: list[tuple[int, int]]
) -> ExponentSeries:
    """System-level exponents from neighbor-pair divergence.

    For offset k the pair distance is d(k) = ||y_{i+k} - y_{j+k}||.
    lambda(k) is the least-squares slope of the mean-over-pairs ln d(k')
    versus k' dt for k' <= k.  Three sources of estimator bias are
    controlled:

    * the pair population is fixed: only pairs that survive a common
      tracking horizon enter the mean, so composition drift cannot
      masquerade as divergence;
    * offsets up to the embedding span (m - 1) tau are excluded from the
      fit, because nearest-neighbor selection biases the initial
      distance low and embedded vectors share samples until the windows
      disjoin; and
    * a slope is only reported once the fit window holds ``min_fit``
      curve points, since shorter fits of a noisy curve are meaningless.

    Pairs whose initial distance is exactly zero are excluded rather
    than clamped; zero distances at later offsets drop out of that
    offset's mean.
    """
    pts = emb.points
    n = len(pts)
    min_fit = 5
    usable = [(i, j) for i, j in pairs if n - 1 - max(i, j) >= 2]
    if not usable:
        raise ComputationError(
            "no neighbor pair can be evolved for 2 steps before the "
            "trajectory ends"
        )
    idx = np.array(usable)
    d0 = np.linalg.norm(pts[idx[:, 0]] - pts[idx[:, 1]], axis=1)
    idx = idx[d0 > 0.0]
    if len(idx) == 0:
        raise ComputationError("all neighbor pairs start at zero distance")

    k0 = max(1, (emb.m - 1) * emb.tau)  # selection bias persists this long
    horizons = n - 1 - np.max(idx, axis=1)
    min_pairs = min(5, len(idx))
    deep_enough = np.sort(horizons)[::-1][min_pairs - 1]  # min_pairs survive
    target = max(k0 + min_fit, (n - 1) // 2)
    if np.count_nonzero(horizons >= target) < min_pairs:
        target = max(int(deep_enough), k0 + min_fit)
    if np.count_nonzero(horizons >= target) == 0:
        target = int(horizons.max())
    idx = idx[horizons >= target]
    if target - k0 < min_fit:
        k0 = max(1, target - min_fit)
    if target - k0 + 1 < min_fit + 1:
        raise ComputationError("divergence curve too short for slopes")

    # (n_pairs, target+1) distances, fixed population over all offsets.
    offsets = np.arange(target + 1)
    ia = idx[:, 0][:, None] + offsets[None, :]
    ib = idx[:, 1][:, None] + offsets[None, :]
    d = np.linalg.norm(pts[ia] - pts[ib], axis=2)
    with np.errstate(divide="ignore"):
        ln_d = np.where(d > 0.0, np.log(d), np.nan)
    mean_ln = np.nanmean(ln_d, axis=0)
    good = np.isfinite(mean_ln)
    if not np.all(good):
        last_good = int(np.flatnonzero(good).max())
        if last_good - k0 + 1 < min_fit + 1:
            raise ComputationError("divergence curve too short for slopes")
        target = last_good
    mean_ln = mean_ln[k0: target + 1]

    # Expanding-window least-squares slopes via cumulative sums.
    t = np.arange(k0, target + 1) * emb.dt
    cnt = np.arange(1, len(t) + 1, dtype=float)
    st = np.cumsum(t)
    sy = np.cumsum(mean_ln)
    stt = np.cumsum(t * t)
    sty = np.cumsum(t * mean_ln)
    var = stt - st * st / cnt
    cov = sty - st * sy / cnt
    with np.errstate(invalid="ignore", divide="ignore"):
        slopes = cov / var
    lambdas = slopes[min_fit - 1:]
    k_offsets = np.arange(k0 + min_fit - 1, target + 1)
    return ExponentSeries(
        lambdas=lambdas,
        divergence_factors=np.exp(lambdas),
        k_offsets=k_offsets,
        dt=emb.dt,
        kind="imf-FTLE",
    )


def fsle_oscillation_series(
    emb: EmbeddedTrajectory, anchor_window: int | None = None
) -> ExponentSeries:
    """Amplitude-ratio exponents of the embedded oscillatory state.

    The oscillation-free system sits at the origin of the (zero-mean)
    embedded state space, so the norm of the embedded state is the
    oscillation perturbation magnitude and the equilibrium itself is
    the reference trajectory:

        lambda(k) = ln(||y_{a+k}|| / ||y_a||) / (k dt).

    The anchor a is the largest norm within the first ``anchor_window``
    points (default: one embedding span, about one oscillation period
    under the quarter-period delay policy).  That reads the initial
    post-fault perturbation at its peak; anchoring at a wobble trough
    would fake divergence for every later sample.
    """
    norms = np.linalg.norm(emb.points, axis=1)
    n = len(norms)
    if anchor_window is None:
        anchor_window = (emb.m - 1) * emb.tau + 1
    a_end = int(min(n - 2, max(0, anchor_window)))
    i0 = int(np.argmax(norms[: a_end + 1]))
    ref = float(norms[i0])
    if ref <= 0.0:
        raise ComputationError("anchor norm is zero: no oscillation energy")
    k = np.arange(i0 + 1, n) - i0
    tail = norms[i0 + 1:]
    keep = tail > 0.0
    if not np.any(keep):
        raise ComputationError("all embedded norms past the anchor are zero")
    lambdas = np.log(tail[keep] / ref) / (k[keep] * emb.dt)
    return ExponentSeries(
        lambdas=lambdas,
        divergence_factors=np.exp(lambdas),
        k_offsets=k[keep],
        dt=emb.dt,
        kind="imf-FTLE",
    )


def noise_bias_variance(
    sigma: float, t_window: float, delta_t: float
) -> tuple[float, float]:
    """Small-noise mean shift and variance of a window exponent estimate.

    Additive zero-mean measurement noise of std ``sigma`` on the final
    separation ``delta_t`` biases the estimate by -sigma^2/(2 T deltaT^2)
    and contributes variance sigma^2/(T^2 deltaT^2).
    """
    if delta_t <= 0 or t_window <= 0:
        raise ValidationError("deltaT and T must be positive")
    if sigma < 0:
        raise ValidationError("sigma must be non-negative")
    bias = -(sigma**2) / (2.0 * t_window * delta_t**2)
    variance = sigma**2 / (t_window**2 * delta_t**2)
    return bias, variance
