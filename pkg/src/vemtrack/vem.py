"""One full inference step per frame: prediction, alternating closed-form
expectation steps, and the maximization step for the assignment priors.

The per-frame posterior over observation-to-track assignments and over the
kinematic states is approximated by a separable distribution. The
assignment posterior (the "responsibilities") is a row-normalized product
of evidence and prior, and the state posterior is a Gaussian whose update
generalizes the Kalman filter: every detection enters the information-form
update weighted by its responsibility, so a detection shared between a
track and clutter contributes only its fractional weight.

The covariance maximization steps are provided for diagnostics and
parameter-learning experiments but are disabled by default: instantaneous
per-frame estimates of observation and dynamics covariances are unstable,
so both are kept fixed during normal tracking.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    DYNAMICS,
    Detection,
    GaussianBelief,
    ModelParams,
    NumericalError,
    Track,
    ensure_spd,
    predict_belief,
    symmetrize,
)
from .observation import EpsilonTable, epsilon_table

__all__ = [
    "Responsibilities",
    "FrameResult",
    "e_z_step",
    "e_x_step",
    "m_step_priors",
    "m_step_sigma",
    "m_step_lambda",
    "run_frame",
    "group_by_detector",
]


@dataclass(frozen=True, eq=False)
class Responsibilities:
    """Per-detector posterior assignment arrays of shape (K_i, N+1).

    Column 0 is the clutter track. Rows sum to one over clutter plus the
    existing tracks; columns of non-existing tracks are identically zero.
    ``flagged`` marks detections whose evidence underflowed for every
    hypothesis and whose mass was therefore forced onto clutter.
    """

    alpha: tuple
    flagged: tuple

    @property
    def n_detectors(self) -> int:
        return len(self.alpha)

    def total_detections(self) -> int:
        return sum(a.shape[0] for a in self.alpha)

    def max_abs_difference(self, other: "Responsibilities") -> float:
        diff = 0.0
        for a, b in zip(self.alpha, other.alpha):
            if a.size:
                diff = max(diff, float(np.max(np.abs(a - b))))
        return diff


@dataclass(frozen=True, eq=False)
class FrameResult:
    """Outcome of one frame of inference."""

    beliefs: tuple
    responsibilities: Responsibilities
    assignment_priors: tuple
    iterations_used: int
    converged: bool


def _extended_existence(existence, n_tracks: int) -> np.ndarray:
    e = np.asarray(existence, dtype=float)
    if e.shape != (n_tracks,):
        raise ValueError(f"existence vector must have shape ({n_tracks},)")
    return np.concatenate([[1.0], e])  # clutter always exists


def e_z_step(epsilons: EpsilonTable, priors: Sequence[np.ndarray], existence) -> Responsibilities:
    """Posterior assignment probabilities.

    alpha_kn = e_n eps_kn a_n / sum_m e_m eps_km a_m, per detector, with
    the clutter column always participating. A row whose weights all
    vanish (every evidence underflowed or every prior is zero) is flagged
    and its mass assigned to clutter.
    """
    n_tracks = epsilons.values[0].shape[1] - 1 if epsilons.values else 0
    e_ext = _extended_existence(existence, n_tracks)
    alphas = []
    flags = []
    for eps, prior in zip(epsilons.values, priors):
        prior = np.asarray(prior, dtype=float)
        if prior.shape != (n_tracks + 1,):
            raise ValueError("prior vector length must be number of tracks + 1")
        weights = eps * (e_ext * prior)[None, :]
        denom = weights.sum(axis=1)
        alpha = np.zeros_like(weights)
        bad = denom <= 0.0
        good = ~bad
        alpha[good] = weights[good] / denom[good, None]
        alpha[bad, 0] = 1.0
        alphas.append(alpha)
        flags.append(bad)
    return Responsibilities(tuple(alphas), tuple(flags))


def _information_update(pred_mean, pred_cov, stats, params: ModelParams) -> GaussianBelief:
    """Shared information-form update.

    ``stats`` is a list of (weight_sum, weighted_obs_sum) per detector,
    where weighted_obs_sum already has the detector offset removed.
    """
    try:
        pred_precision = np.linalg.inv(pred_cov)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("predicted covariance is singular") from exc
    precision = symmetrize(pred_precision)
    info = pred_precision @ pred_mean
    for detector, (weight, obs_sum) in zip(params.detectors, stats):
        if weight <= 0.0:
            continue
        precision = precision + weight * detector.state_precision
        info = info + detector.projection.T @ (detector.obs_precision @ obs_sum)
    try:
        cov = ensure_spd(np.linalg.inv(precision))
    except np.linalg.LinAlgError as exc:
        raise NumericalError("posterior precision is singular") from exc
    return GaussianBelief(cov @ info, cov)


def e_x_step(
    prediction: GaussianBelief,
    detections_by_detector: Sequence[Sequence[Detection]],
    alpha_by_detector: Sequence[np.ndarray],
    params: ModelParams,
) -> GaussianBelief:
    """Gaussian state update for one track.

    Precision accumulates sum_i sum_k alpha_ik P^T Sigma^-1 P on top of the
    predicted precision; the information vector accumulates the
    responsibility-weighted observations. With a single unit-weight
    detection this is exactly a Kalman update; with all-zero
    responsibilities the posterior equals the prediction.
    """
    stats = []
    for detector, dets, alphas in zip(params.detectors, detections_by_detector, alpha_by_detector):
        alphas = np.asarray(alphas, dtype=float)
        if len(dets) == 0:
            stats.append((0.0, np.zeros(4)))
            continue
        ys = np.stack([d.box.as_array() for d in dets]) - detector.offset
        stats.append((float(alphas.sum()), alphas @ ys))
    return _information_update(prediction.mean, prediction.covariance, stats, params)


def m_step_priors(
    responsibilities: Responsibilities,
    existence,
    previous: Sequence[np.ndarray] | None = None,
) -> tuple:
    """Re-estimate assignment priors from the responsibilities.

    a_n = e_n sum_k alpha_kn / sum_m e_m sum_k alpha_km, per detector. A
    detector without detections this frame keeps its previous priors.
    """
    n_tracks = (
        responsibilities.alpha[0].shape[1] - 1 if responsibilities.alpha else 0
    )
    e_ext = _extended_existence(existence, n_tracks)
    priors = []
    for i, alpha in enumerate(responsibilities.alpha):
        if alpha.shape[0] == 0:
            if previous is None:
                raise ValueError("detector saw no detections and no previous priors given")
            priors.append(np.asarray(previous[i], dtype=float).copy())
            continue
        sums = e_ext * alpha.sum(axis=0)
        total = sums.sum()
        priors.append(sums / total)
    return tuple(priors)


def m_step_sigma(
    detector_index: int,
    responsibilities: Responsibilities,
    beliefs: Sequence[GaussianBelief],
    detections_by_detector: Sequence[Sequence[Detection]],
    existence,
    params: ModelParams,
) -> np.ndarray:
    """Instantaneous estimate of a detector's observation covariance.

    Averages responsibility-weighted spread terms P Gamma P^T plus squared
    residuals over detections and tracks. Diagnostics only by default; the
    engine applies it only when covariance learning is enabled, and rejects
    rank-deficient results.
    """
    detector = params.detectors[detector_index]
    alpha = responsibilities.alpha[detector_index]
    dets = detections_by_detector[detector_index]
    k = len(dets)
    n_tracks = len(beliefs)
    if k == 0 or n_tracks == 0:
        raise ValueError("need at least one detection and one track")
    e = np.asarray(existence, dtype=float)
    acc = np.zeros((4, 4))
    for n, belief in enumerate(beliefs):
        if e[n] == 0.0:
            continue
        spread = detector.projection @ belief.covariance @ detector.projection.T
        mean = detector.projection @ belief.mean + detector.offset
        for j, det in enumerate(dets):
            w = e[n] * alpha[j, n + 1]
            if w == 0.0:
                continue
            r = det.box.as_array() - mean
            acc += w * (spread + np.outer(r, r))
    return symmetrize(acc / (k * n_tracks))


def m_step_lambda(prev_belief: GaussianBelief, new_belief: GaussianBelief) -> np.ndarray:
    """Instantaneous estimate of the dynamics covariance for one track.

    D Gamma_prev D^T + Gamma_new + (mu_new - D mu_prev)(mu_new - D mu_prev)^T.
    Diagnostics only by default.
    """
    drift = new_belief.mean - DYNAMICS @ prev_belief.mean
    return symmetrize(
        DYNAMICS @ prev_belief.covariance @ DYNAMICS.T
        + new_belief.covariance
        + np.outer(drift, drift)
    )


def group_by_detector(detections: Sequence[Detection], n_detectors: int) -> list:
    """Split a frame's detections into per-detector lists, preserving order."""
    groups = [[] for _ in range(n_detectors)]
    for det in detections:
        if det.detector_id >= n_detectors:
            raise ValueError(f"detector id {det.detector_id} out of range")
        groups[det.detector_id].append(det)
    return groups


def run_frame(
    tracks: Sequence[Track],
    detections: Sequence[Detection],
    params: ModelParams,
    priors: Sequence[np.ndarray],
    predictions: Sequence[GaussianBelief] | None = None,
) -> FrameResult:
    """Run one frame: predict, then alternate assignment and state updates.

    Iterates (assignment posterior -> state posterior per track -> prior
    re-estimation) until the largest absolute responsibility change falls
    below ``params.vem_tol`` or ``params.vem_max_iterations`` is reached.
    ``predictions`` may be supplied to override the default one-step
    prediction (the engine uses this to bound sleeping-track covariances).

    Per-track state updates are independent given the responsibilities and
    could run in parallel; this implementation is sequential.
    """
    n_detectors = params.n_detectors
    dets = group_by_detector(detections, n_detectors)
    existence = np.array([1.0 if t.existence else 0.0 for t in tracks])
    if predictions is None:
        predictions = [
            predict_belief(t.belief, params.dynamics_covariance) for t in tracks
        ]
    else:
        predictions = list(predictions)
    refs = [t.reference_appearance for t in tracks]
    priors = [np.asarray(p, dtype=float) for p in priors]
    if len(priors) != n_detectors:
        raise ValueError("one prior vector per detector is required")

    beliefs = list(predictions)
    total_detections = sum(len(g) for g in dets)
    if total_detections == 0:
        empty = Responsibilities(
            tuple(np.zeros((0, len(tracks) + 1)) for _ in range(n_detectors)),
            tuple(np.zeros(0, dtype=bool) for _ in range(n_detectors)),
        )
        return FrameResult(tuple(beliefs), empty, tuple(priors), 1, True)

    current_priors = [p.copy() for p in priors]
    resp = None
    previous_resp = None
    iterations = 0
    converged = False
    for iterations in range(1, params.vem_max_iterations + 1):
        eps = epsilon_table(dets, beliefs, refs, params)
        resp = e_z_step(eps, current_priors, existence)
        if previous_resp is not None and resp.max_abs_difference(previous_resp) < params.vem_tol:
            converged = True
            break
        new_beliefs = []
        for n, track in enumerate(tracks):
            if not track.existence:
                new_beliefs.append(predictions[n])
                continue
            alphas = [resp.alpha[i][:, n + 1] for i in range(n_detectors)]
            new_beliefs.append(e_x_step(predictions[n], dets, alphas, params))
        beliefs = new_beliefs
        current_priors = list(m_step_priors(resp, existence, previous=current_priors))
        previous_resp = resp

    return FrameResult(tuple(beliefs), resp, tuple(current_priors), iterations, converged)
