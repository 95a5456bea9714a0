"""Track birth from temporally consistent clutter-assigned detections.

Over a sliding window of L+1 frames, detections that the tracker assigned
to clutter are chained into candidate sequences (nearest neighbor within a
gating distance, one detector per chain). For each candidate two
hypotheses are scored: the sequence was generated by an untracked person
moving under the tracker's dynamics, starting from a flat Gaussian prior
over the image (tau0), or it is independent uniform clutter (tau1). When
tau0 > tau1 a new track is spawned at the newest detection.

tau0 is the marginal likelihood of the observation sequence under the
linear-Gaussian model and is accumulated sequentially (predict/update plus
the one-step predictive density of each observation), which is
algebraically identical to evaluating the stacked joint Gaussian.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    DYNAMICS,
    BoundingBox,
    Detection,
    GaussianBelief,
    ModelParams,
    STATE_DIM,
    Track,
    ensure_spd,
    readonly_array,
    symmetrize,
)

log = logging.getLogger(__name__)

__all__ = [
    "BirthParams",
    "CandidateSequence",
    "BirthEvent",
    "tau0",
    "tau1",
    "log_tau0",
    "log_tau1",
    "chain_candidates",
    "scan_births",
    "scan_and_spawn",
]


@dataclass(frozen=True, eq=False)
class BirthParams:
    """Knobs of the birth test.

    ``window`` is L: a candidate spans L+1 consecutive frames. The flat
    prior (``flat_mean``, ``flat_covariance``) stands in for a uniform
    distribution over plausible starting states; ``birth_covariance`` is
    the posterior covariance assigned to a freshly spawned track.
    """

    flat_mean: np.ndarray
    flat_covariance: np.ndarray
    birth_covariance: np.ndarray
    window: int = 2
    clutter_threshold: float = 0.5
    gate_factor: float = 2.0
    visibility_init: float = 0.9

    def __post_init__(self):
        object.__setattr__(self, "flat_mean", readonly_array(self.flat_mean, (STATE_DIM,)))
        flat_cov = ensure_spd(readonly_array(self.flat_covariance, (STATE_DIM, STATE_DIM)))
        flat_cov.setflags(write=False)
        object.__setattr__(self, "flat_covariance", flat_cov)
        birth_cov = ensure_spd(readonly_array(self.birth_covariance, (STATE_DIM, STATE_DIM)))
        birth_cov.setflags(write=False)
        object.__setattr__(self, "birth_covariance", birth_cov)
        if self.window < 1:
            raise ValueError("window must be at least 1")


@dataclass(frozen=True, eq=False)
class CandidateSequence:
    """L+1 clutter-assigned detections, oldest first, one per frame."""

    detections: tuple

    def __post_init__(self):
        dets = self.detections
        if len(dets) < 1:
            raise ValueError("candidate needs at least one detection")
        detector = dets[0].detector_id
        for prev, cur in zip(dets, dets[1:]):
            if cur.frame != prev.frame + 1:
                raise ValueError("candidate frames must be strictly consecutive")
            if cur.detector_id != detector:
                raise ValueError("candidate must use a single detector")

    @property
    def detector_id(self) -> int:
        return self.detections[0].detector_id

    @property
    def newest(self) -> Detection:
        return self.detections[-1]


@dataclass(frozen=True, eq=False)
class BirthEvent:
    track: Track
    candidate: CandidateSequence
    log_ratio: float


def _gaussian_logpdf(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> float:
    r = x - mean
    chol = np.linalg.cholesky(symmetrize(cov))
    z = np.linalg.solve(chol, r)
    log_det = 2.0 * np.sum(np.log(np.diag(chol)))
    return float(-0.5 * (len(x) * math.log(2.0 * math.pi) + log_det + z @ z))


def log_tau0(candidate: CandidateSequence, params: ModelParams) -> float:
    """Log marginal likelihood of the candidate under the new-person model.

    Sequential accumulation: starting from the flat prior, each step adds
    the log predictive density of the next observation and performs the
    corresponding Gaussian update (Joseph-form for numerical symmetry),
    then advances one dynamics step.
    """
    detector = params.detectors[candidate.detector_id]
    proj = detector.projection
    sigma = detector.obs_covariance
    lam = params.dynamics_covariance
    mean = params.birth.flat_mean.copy()
    cov = params.birth.flat_covariance.copy()
    total = 0.0
    last = len(candidate.detections) - 1
    for step, det in enumerate(candidate.detections):
        y = det.box.as_array()
        obs_mean = proj @ mean + detector.offset
        s = proj @ cov @ proj.T + sigma
        total += _gaussian_logpdf(y, obs_mean, s)
        gain = cov @ proj.T @ np.linalg.inv(s)
        mean = mean + gain @ (y - obs_mean)
        ikp = np.eye(STATE_DIM) - gain @ proj
        cov = symmetrize(ikp @ cov @ ikp.T + gain @ sigma @ gain.T)
        if step != last:
            mean = DYNAMICS @ mean
            cov = symmetrize(DYNAMICS @ cov @ DYNAMICS.T + lam)
    return total


def tau0(candidate: CandidateSequence, params: ModelParams) -> float:
    """Marginal density of the candidate under the new-person hypothesis.

    May underflow to zero for wildly inconsistent candidates; the spawn
    decision therefore compares log densities.
    """
    return math.exp(log_tau0(candidate, params))


def log_tau1(candidate: CandidateSequence, params: ModelParams) -> float:
    detector = params.detectors[candidate.detector_id]
    return len(candidate.detections) * math.log(detector.clutter_density)


def tau1(candidate: CandidateSequence, params: ModelParams) -> float:
    """Density of the candidate under the pure-clutter hypothesis."""
    return math.exp(log_tau1(candidate, params))


def chain_candidates(
    clutter_history: Sequence[Sequence[Sequence[Detection]]],
    params: ModelParams,
) -> list:
    """Enumerate candidate sequences ending at the newest frame.

    ``clutter_history`` holds, for each of the last L+1 frames (oldest
    first), the per-detector lists of clutter-assigned detections. Each
    newest-frame detection is chained backwards to its nearest neighbor in
    the previous frame, gated at ``gate_factor`` times the diagonal of the
    newer box, giving at most one candidate per newest detection.
    """
    window = params.birth.window
    if len(clutter_history) < window + 1:
        return []
    recent = list(clutter_history)[-(window + 1):]
    candidates = []
    for i in range(params.n_detectors):
        for det in recent[-1][i]:
            chain = [det]
            for back in range(1, window + 1):
                prev_frame = recent[-1 - back][i]
                gate = params.birth.gate_factor * chain[-1].box.diagonal()
                best = None
                best_dist = gate
                center = chain[-1].box.center()
                for cand in prev_frame:
                    dist = float(np.linalg.norm(cand.box.center() - center))
                    if dist <= best_dist:
                        best = cand
                        best_dist = dist
                if best is None:
                    chain = None
                    break
                chain.append(best)
            if chain is not None:
                candidates.append(CandidateSequence(tuple(reversed(chain))))
    return candidates


def scan_births(
    clutter_history: Sequence[Sequence[Sequence[Detection]]],
    tracks: Sequence[Track],
    params: ModelParams,
    next_track_id: int,
    frame: int,
) -> list:
    """Score candidates and spawn tracks for those that pass the ratio test.

    Candidates are consumed greedily in decreasing tau0/tau1 ratio; a
    detection seeds at most one birth, and candidates whose newest
    detection back-projects within the gating distance of a track spawned
    earlier in the same scan are suppressed (so one person seen by several
    detectors yields a single track).
    """
    candidates = chain_candidates(clutter_history, params)
    scored = []
    for idx, cand in enumerate(candidates):
        ratio = log_tau0(cand, params) - log_tau1(cand, params)
        scored.append((ratio, cand.detector_id, idx, cand))
    scored.sort(key=lambda item: (-item[0], item[1], item[2]))

    events = []
    consumed: set[int] = set()
    spawned_boxes: list[BoundingBox] = []
    track_id = next_track_id
    for ratio, _, _, cand in scored:
        if ratio <= 0.0:
            continue
        if any(id(d) in consumed for d in cand.detections):
            continue
        detector = params.detectors[cand.detector_id]
        state_box = BoundingBox.from_array(detector.observation_box(cand.newest.box.as_array()))
        # A tight gate: suppress only candidates that land on a track
        # spawned this scan, i.e. the same person seen by another detector.
        suppress_gate = 0.5 * state_box.diagonal()
        if any(
            float(np.linalg.norm(state_box.center() - b.center())) <= suppress_gate
            for b in spawned_boxes
        ):
            continue
        if len(tracks) + len(events) >= params.max_tracks:
            log.warning("track capacity %d reached, skipping birth at frame %d", params.max_tracks, frame)
            continue
        mean = np.concatenate([state_box.as_array(), np.zeros(2)])
        track = Track(
            id=track_id,
            belief=GaussianBelief(mean, params.birth.birth_covariance),
            reference_appearance=cand.newest.appearance,
            visibility_posterior=params.birth.visibility_init,
            birth_frame=frame,
        )
        events.append(BirthEvent(track, cand, ratio))
        spawned_boxes.append(state_box)
        consumed.update(id(d) for d in cand.detections)
        track_id += 1
    return events


def scan_and_spawn(
    clutter_history: Sequence[Sequence[Sequence[Detection]]],
    tracks: Sequence[Track],
    params: ModelParams,
    next_track_id: int = 1,
    frame: int = 0,
) -> list:
    """Convenience wrapper returning only the spawned tracks."""
    return [event.track for event in scan_births(clutter_history, tracks, params, next_track_id, frame)]
