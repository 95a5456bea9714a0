"""Two-state visibility filtering per track.

A track with no associated observations is put to sleep instead of being
deleted, so it can be awakened later when observations match its
appearance again. Visibility is a binary hidden state filtered with a
symmetric sticky transition matrix and an exponential likelihood in the
summed assignment priors of the track.

The likelihood orientation is configurable. In ``swapped`` mode (the
default) a large visibility observation is evidence for being visible,
which matches the process's stated purpose; ``as-printed`` mode uses the
opposite orientation, where exp(-lambda*nu) is the likelihood of the
visible state. Both are exposed because they imply materially different
behavior and only one can be the intended reading.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "VisibilityState",
    "visibility_observation",
    "visibility_likelihoods",
    "visibility_update",
    "is_reported",
]


@dataclass(frozen=True)
class VisibilityState:
    """Filtered probability that the track is currently visible."""

    posterior_visible: float

    def __post_init__(self):
        if not 0.0 <= self.posterior_visible <= 1.0:
            raise ValueError("posterior must lie in [0, 1]")


def visibility_observation(priors: Sequence[np.ndarray], existence: bool, track_index: int) -> float:
    """nu_n = e_n * sum_i a_n^i, the summed assignment priors of track n.

    ``priors`` holds one vector per detector with clutter at index 0, so
    track n lives at index n+1.
    """
    if not existence:
        return 0.0
    return float(sum(np.asarray(p, dtype=float)[track_index + 1] for p in priors))


def visibility_likelihoods(nu: float, lambda_v: float, swapped: bool = True) -> tuple[float, float]:
    """Return (p(nu | visible), p(nu | hidden)) for the configured orientation."""
    decay = math.exp(-lambda_v * nu)
    if swapped:
        return 1.0 - decay, decay
    return decay, 1.0 - decay


def visibility_update(
    prev: VisibilityState,
    nu: float,
    pi_v: float,
    lambda_v: float,
    swapped: bool = True,
) -> VisibilityState:
    """One forward filtering step of the two-state chain.

    Predict through the sticky transition matrix [[pi_v, 1-pi_v],
    [1-pi_v, pi_v]], correct with the observation likelihood, renormalize.
    If both corrected weights vanish the predicted distribution is kept.
    """
    if not 0.5 < pi_v < 1.0:
        raise ValueError("pi_v must lie in (0.5, 1)")
    p1 = prev.posterior_visible
    p0 = 1.0 - p1
    pred_visible = pi_v * p1 + (1.0 - pi_v) * p0
    pred_hidden = (1.0 - pi_v) * p1 + pi_v * p0
    like_visible, like_hidden = visibility_likelihoods(nu, lambda_v, swapped)
    w1 = pred_visible * like_visible
    w0 = pred_hidden * like_hidden
    total = w1 + w0
    if total <= 0.0:
        return VisibilityState(pred_visible / (pred_visible + pred_hidden))
    return VisibilityState(w1 / total)


def is_reported(posterior_visible: float, threshold: float = 0.5) -> bool:
    """Closed threshold: a track exactly at the threshold is reported."""
    return posterior_visible >= threshold
