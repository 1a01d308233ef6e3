"""Histograms of divergence factors and the Gompertz reference shape.

Observed divergence factors are binned on a fixed grid (out-of-range
values clamp to the edge bins so explosive divergence still registers
as mass at the high edge).  The reference distribution is a shifted
reversed Gompertz curve sigma(x) = exp(-exp(gamma (x - x*))), evaluated
at bin centers and normalized; it is strictly decreasing in x, which
makes it an ideal of asymptotic convergence that penalizes slow
recovery.  Indices are natural-log KL divergences against it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

# Normalized reference probabilities are floored at the smallest normal
# double so extreme shape parameters cannot underflow a bin to exact
# zero (the continuous Gompertz curve never reaches zero on a finite
# grid, but float64 does).
_PROB_FLOOR = np.finfo(float).tiny


@dataclass(frozen=True)
class DivergenceHistogram:
    """Binned probabilities of observed divergence factors."""

    bin_edges: np.ndarray
    probabilities: np.ndarray
    policy: str = "clamp"

    def __post_init__(self) -> None:
        if len(self.bin_edges) != len(self.probabilities) + 1:
            raise ValidationError("edges/probabilities length mismatch")
        if np.any(np.diff(self.bin_edges) <= 0):
            raise ValidationError("bin edges must be strictly ascending")
        if abs(float(self.probabilities.sum()) - 1.0) > 1e-12:
            raise ValidationError("probabilities must sum to 1")
        if np.any(self.probabilities < 0):
            raise ValidationError("probabilities must be non-negative")


@dataclass(frozen=True)
class GompertzReference:
    """Normalized shifted-reversed Gompertz reference on a bin grid."""

    gamma: float
    x_star: float
    bin_edges: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self) -> None:
        if np.any(self.probabilities <= 0):
            raise ValidationError("reference probabilities must be positive")
        if abs(float(self.probabilities.sum()) - 1.0) > 1e-12:
            raise ValidationError("reference probabilities must sum to 1")


def gompertz_curve(x, gamma: float, x_star: float):
    """Raw (unnormalized) sigma(x) = exp(-exp(gamma (x - x*)))."""
    with np.errstate(over="ignore"):
        return np.exp(-np.exp(gamma * (np.asarray(x, dtype=float) - x_star)))


def histogram(
    factors: np.ndarray, bins: int, lo: float, hi: float
) -> DivergenceHistogram:
    """Bin divergence factors on [lo, hi], clamping outliers to edge bins."""
    f = np.asarray(factors, dtype=float)
    if f.size == 0:
        raise ValidationError("no divergence factors to bin")
    if bins < 2:
        raise ValidationError("need at least 2 bins")
    if not lo < hi:
        raise ValidationError(f"invalid range [{lo}, {hi}]")
    edges = np.linspace(lo, hi, bins + 1)
    counts, _ = np.histogram(np.clip(f, lo, hi), bins=edges)
    return DivergenceHistogram(
        bin_edges=edges,
        probabilities=counts / counts.sum(),
        policy="clamp",
    )


def gompertz_reference(
    gamma: float, x_star: float, bin_edges: np.ndarray
) -> GompertzReference:
    """Evaluate sigma at bin centers and normalize to a distribution."""
    if gamma <= 0:
        raise ValidationError(f"gamma must be positive, got {gamma}")
    edges = np.asarray(bin_edges, dtype=float)
    if len(edges) < 3 or np.any(np.diff(edges) <= 0):
        raise ValidationError("need strictly ascending edges for >= 2 bins")
    centers = 0.5 * (edges[:-1] + edges[1:])
    with np.errstate(over="ignore"):
        log_sigma = -np.exp(gamma * (centers - x_star))
    shifted = log_sigma - log_sigma.max()
    p = np.exp(shifted)
    p /= p.sum()
    p = np.maximum(p, _PROB_FLOOR)
    p /= p.sum()
    return GompertzReference(
        gamma=gamma, x_star=x_star, bin_edges=edges, probabilities=p
    )


def kl_divergence(
    p: DivergenceHistogram, q: GompertzReference | DivergenceHistogram
) -> float:
    """Relative entropy sum p ln(p/q), with 0 ln 0 taken as 0.

    Requires identical bin grids and a strictly positive q wherever it
    is compared (absolute continuity).
    """
    if len(p.bin_edges) != len(q.bin_edges) or not np.array_equal(
        p.bin_edges, q.bin_edges
    ):
        raise ValidationError("histogram and reference grids differ")
    qp = np.asarray(q.probabilities, dtype=float)
    if np.any(qp <= 0):
        raise ValidationError("reference has a zero bin: KL undefined")
    pp = np.asarray(p.probabilities, dtype=float)
    nz = pp > 0
    return float(np.sum(pp[nz] * np.log(pp[nz] / qp[nz])))
