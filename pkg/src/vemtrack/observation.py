"""Likelihood terms used by the per-frame inference.

Localization observations follow a Gaussian centered on the projected
state; clutter observations are uniform over the configured image and
box-size ranges. Appearance observations follow an exponential density
in the Bhattacharyya distance to the track's reference histogram,

    b(h; h_ref) = exp(-lambda * d_B(h, h_ref)) / W_lambda,

whose normalization constant W_lambda has no closed form for more than
a couple of bins and is estimated once by Monte Carlo integration over
the probability simplex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    AppearanceHistogram,
    Detection,
    DetectorModel,
    GaussianBelief,
    ModelParams,
)

__all__ = [
    "localization_likelihood",
    "bhattacharyya_distance",
    "appearance_likelihood",
    "estimate_w_lambda",
    "simplex_volume",
    "cached_w_lambda",
    "epsilon",
    "epsilon_clutter",
    "EpsilonTable",
    "epsilon_table",
    "exp_trace_factor",
]

_W_CACHE: dict[tuple, float] = {}


def localization_likelihood(detector: DetectorModel, y, state) -> float:
    """Gaussian density g(y; P x + o, Sigma) of a 4-D observation."""
    y = np.asarray(y, dtype=float)
    mean = detector.projection @ np.asarray(state, dtype=float) + detector.offset
    r = y - mean
    quad = float(r @ detector.obs_precision @ r)
    return math.exp(detector.log_norm - 0.5 * quad)


def bhattacharyya_distance(a: AppearanceHistogram, b: AppearanceHistogram) -> float:
    """d_B = sqrt(1 - sum_k sqrt(a_k b_k)), clamped to [0, 1]."""
    if a.size != b.size:
        raise ValueError(f"histogram sizes differ: {a.size} vs {b.size}")
    coeff = float(np.sum(np.sqrt(a.bins * b.bins)))
    return min(1.0, math.sqrt(max(0.0, 1.0 - coeff)))


def _bhattacharyya_matrix(hists: np.ndarray, refs: np.ndarray) -> np.ndarray:
    """Pairwise distances between rows of ``hists`` (K,B) and ``refs`` (N,B)."""
    coeff = np.sqrt(hists) @ np.sqrt(refs).T
    return np.minimum(1.0, np.sqrt(np.maximum(0.0, 1.0 - coeff)))


def appearance_likelihood(
    h: AppearanceHistogram, ref: AppearanceHistogram, lam: float, w_lambda: float
) -> float:
    """Exponential-in-distance appearance density, normalized by W_lambda."""
    if lam < 0 or w_lambda <= 0:
        raise ValueError("lambda must be >= 0 and w_lambda positive")
    return math.exp(-lam * bhattacharyya_distance(h, ref)) / w_lambda


def simplex_volume(bins: int) -> float:
    """Volume of the (bins-1)-simplex under the first-(bins-1) coordinates."""
    return 1.0 / math.factorial(bins - 1)


def estimate_w_lambda(
    lam: float,
    bins: int,
    samples: int = 100_000,
    seed: int = 7,
    ref: AppearanceHistogram | None = None,
) -> float:
    """Monte Carlo estimate of the appearance normalization constant.

    Draws ``samples`` histograms uniformly on the simplex (flat Dirichlet)
    and averages exp(-lambda d_B(h, ref)); the average times the simplex
    volume estimates the integral. ``ref`` defaults to the uniform
    histogram; the estimate is used as a single constant for all tracks.
    Deterministic for a fixed seed.
    """
    if samples < 1000:
        raise ValueError("need at least 1000 Monte Carlo samples")
    if bins < 2 or bins > 128:
        raise ValueError("bins must be within [2, 128]")
    rng = np.random.default_rng(seed)
    draws = rng.dirichlet(np.ones(bins), size=samples)
    if ref is None:
        ref_bins = np.full(bins, 1.0 / bins)
    else:
        ref_bins = ref.bins
    coeff = np.sqrt(draws) @ np.sqrt(ref_bins)
    dist = np.minimum(1.0, np.sqrt(np.maximum(0.0, 1.0 - coeff)))
    return float(np.exp(-lam * dist).mean() * simplex_volume(bins))


def cached_w_lambda(lam: float, bins: int, samples: int = 100_000, seed: int = 7) -> float:
    """Write-once cache around :func:`estimate_w_lambda` (uniform reference)."""
    key = (float(lam), int(bins), int(samples), int(seed))
    if key not in _W_CACHE:
        _W_CACHE[key] = estimate_w_lambda(lam, bins, samples, seed)
    return _W_CACHE[key]


def exp_trace_factor(detector: DetectorModel, covariance: np.ndarray) -> float:
    """exp(-0.5 tr(P^T Sigma^-1 P Gamma)), the posterior-spread correction."""
    trace = float(np.sum(detector.state_precision * np.asarray(covariance, dtype=float)))
    return math.exp(-0.5 * trace)


def epsilon(
    detector: DetectorModel,
    detection: Detection,
    track_belief: GaussianBelief,
    ref: AppearanceHistogram,
    params: ModelParams,
) -> float:
    """Unnormalized evidence that a detection was generated by a track.

    Product of the Gaussian localization density at the posterior mean,
    the exponential trace factor accounting for posterior spread, and the
    appearance density against the track's reference histogram.
    """
    g = localization_likelihood(detector, detection.box.as_array(), track_belief.mean)
    et = exp_trace_factor(detector, track_belief.covariance)
    b = appearance_likelihood(detection.appearance, ref, params.lambda_appearance, params.w_lambda)
    return g * et * b


def epsilon_clutter(detector: DetectorModel) -> float:
    """Evidence under the clutter hypothesis: u(y) * u(h)."""
    return detector.clutter_density * detector.appearance_clutter_density


@dataclass(frozen=True, eq=False)
class EpsilonTable:
    """Per-detector evidence arrays of shape (K_i, N+1), clutter in column 0."""

    values: tuple

    def __post_init__(self):
        for arr in self.values:
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise ValueError("epsilon entries must be finite and non-negative")

    @property
    def n_detectors(self) -> int:
        return len(self.values)


def epsilon_table(
    detections_by_detector: Sequence[Sequence[Detection]],
    beliefs: Sequence[GaussianBelief],
    refs: Sequence[AppearanceHistogram],
    params: ModelParams,
) -> EpsilonTable:
    """Evaluate the full evidence table for one frame.

    ``detections_by_detector`` holds this frame's detections grouped by
    detector index; ``beliefs`` and ``refs`` are aligned per track.
    """
    n_tracks = len(beliefs)
    ref_mat = (
        np.stack([r.bins for r in refs])
        if n_tracks
        else np.zeros((0, params.histogram_bins))
    )
    tables = []
    for detector, dets in zip(params.detectors, detections_by_detector):
        k = len(dets)
        table = np.zeros((k, n_tracks + 1))
        if k == 0:
            tables.append(table)
            continue
        table[:, 0] = epsilon_clutter(detector)
        if n_tracks:
            ys = np.stack([d.box.as_array() for d in dets])
            hists = np.stack([d.appearance.bins for d in dets])
            b_mat = (
                np.exp(-params.lambda_appearance * _bhattacharyya_matrix(hists, ref_mat))
                / params.w_lambda
            )
            for n, belief in enumerate(beliefs):
                mean = detector.projection @ belief.mean + detector.offset
                r = ys - mean
                quad = np.einsum("ki,ij,kj->k", r, detector.obs_precision, r)
                log_g = detector.log_norm - 0.5 * quad
                trace = float(np.sum(detector.state_precision * belief.covariance))
                table[:, n + 1] = np.exp(log_g - 0.5 * trace) * b_mat[:, n]
        tables.append(table)
    return EpsilonTable(tuple(tables))
