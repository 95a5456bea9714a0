"""Causal tracking engine: one frame in, updated track table out.

Per frame the engine (1) predicts every track belief, bounding the
covariance of sleeping tracks, (2) runs the variational inference step,
(3) feeds clutter-assigned detections to the birth scan and spawns new
tracks, (4) filters every track's visibility, and (5) reports the tracks
whose visibility posterior clears the threshold. Only past information is
used; running a longer sequence never changes earlier outputs.

Assignment priors are carried across frames. A small floor is applied to
the carried priors each frame so a track that received no detections for
a while keeps a nonzero chance of re-claiming observations; strictly
carried priors would hit exactly zero after one unobserved frame and the
track could never be awakened. For the same reason the predicted
covariance of sleeping tracks is bounded: unbounded coasting drives the
evidence of every detection to zero.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .core import (
    Detection,
    DetectorModel,
    GaussianBelief,
    ModelParams,
    Track,
    ensure_spd,
    predict_belief,
)
from .birth import scan_births
from .fileio import TrackRow
from .vem import FrameResult, group_by_detector, m_step_lambda, m_step_sigma, run_frame
from .visibility import VisibilityState, is_reported, visibility_observation, visibility_update

log = logging.getLogger(__name__)

__all__ = ["Tracker", "FrameLog"]


@dataclass(frozen=True)
class FrameLog:
    """Per-frame diagnostics, logged so convergence behavior is observable."""

    frame: int
    n_detections: int
    n_tracks: int
    iterations_used: int
    converged: bool
    flagged: int
    births: tuple
    reported: tuple


def _bound_covariance(belief: GaussianBelief, std_caps: np.ndarray) -> GaussianBelief:
    """Shrink a covariance so no marginal std exceeds its cap.

    Rows and columns are scaled jointly (a congruence transform), which
    preserves positive definiteness and correlation signs.
    """
    diag = np.diag(belief.covariance)
    scale = np.minimum(1.0, std_caps / np.sqrt(np.maximum(diag, 1e-30)))
    if np.all(scale >= 1.0):
        return belief
    cov = belief.covariance * np.outer(scale, scale)
    return GaussianBelief(belief.mean, ensure_spd(cov))


class Tracker:
    """Stateful frame-by-frame tracker.

    Single writer per frame; the track table and the last frame result may
    be read concurrently between steps.
    """

    def __init__(self, params: ModelParams):
        self.params = params
        self.tracks: list[Track] = []
        # One prior vector per detector; index 0 is the clutter track.
        self.priors = [np.array([1.0]) for _ in params.detectors]
        self.clutter_history: deque = deque(maxlen=params.birth.window + 1)
        self.next_track_id = 1
        self.last_result: FrameResult | None = None
        # Per-track dynamics covariance overrides (track id -> matrix);
        # populated only when dynamics-covariance learning is enabled.
        self.lambda_overrides: dict[int, np.ndarray] = {}

    def _floored_priors(self) -> list:
        floored = []
        for prior in self.priors:
            p = np.maximum(np.asarray(prior, dtype=float), self.params.prior_floor)
            floored.append(p / p.sum())
        return floored

    def _predictions(self) -> list:
        preds = []
        for track in self.tracks:
            dynamics_cov = self.lambda_overrides.get(track.id, self.params.dynamics_covariance)
            pred = predict_belief(track.belief, dynamics_cov)
            sleeping = not is_reported(track.visibility_posterior, self.params.report_threshold)
            if sleeping and self.params.sleep_std_caps is not None:
                pred = _bound_covariance(pred, self.params.sleep_std_caps)
            preds.append(pred)
        return preds

    def step(self, frame: int, detections: Sequence[Detection]) -> tuple[list, FrameLog]:
        """Process one frame; returns (reported rows, diagnostics)."""
        params = self.params
        predictions = self._predictions()
        priors = self._floored_priors() if self.tracks else list(self.priors)
        result = run_frame(self.tracks, detections, params, priors, predictions=predictions)

        prev_beliefs = [t.belief for t in self.tracks]
        for n, track in enumerate(self.tracks):
            self.tracks[n] = replace(track, belief=result.beliefs[n])
        self.priors = [np.asarray(p, dtype=float) for p in result.assignment_priors]

        if params.learn_sigma or params.learn_lambda:
            self._learn_covariances(result, prev_beliefs, detections)

        # Clutter pool for the birth scan.
        grouped = group_by_detector(detections, params.n_detectors)
        clutter_frame = []
        for i, dets in enumerate(grouped):
            alpha = result.responsibilities.alpha[i]
            clutter_frame.append(
                [d for j, d in enumerate(dets) if alpha[j, 0] >= params.birth.clutter_threshold]
            )
        self.clutter_history.append(clutter_frame)

        births = []
        if len(self.clutter_history) == params.birth.window + 1:
            events = scan_births(self.clutter_history, self.tracks, params, self.next_track_id, frame)
            for event in events:
                births.append(event.track.id)
                self.tracks.append(event.track)
                self.next_track_id = event.track.id + 1
                share = 1.0 / (len(self.tracks) + 1.0)
                for i in range(params.n_detectors):
                    extended = np.append(self.priors[i], share)
                    self.priors[i] = extended / extended.sum()
                self._consume(event.candidate)

        # Visibility filtering over the pre-birth tracks; newborns keep
        # their initial posterior until the next frame.
        n_old = len(self.tracks) - len(births)
        for n in range(n_old):
            track = self.tracks[n]
            nu = visibility_observation(result.assignment_priors, track.existence, n)
            state = visibility_update(
                VisibilityState(track.visibility_posterior),
                nu,
                params.pi_v,
                params.lambda_visibility,
                swapped=params.visibility_swapped,
            )
            self.tracks[n] = replace(track, visibility_posterior=state.posterior_visible)

        reported = []
        rows = []
        for track in self.tracks:
            if is_reported(track.visibility_posterior, params.report_threshold):
                reported.append(track.id)
                rows.append(
                    TrackRow(frame, track.id, track.belief.mean[:4], track.visibility_posterior)
                )
        self.last_result = result
        flagged = int(sum(f.sum() for f in result.responsibilities.flagged))
        frame_log = FrameLog(
            frame=frame,
            n_detections=len(detections),
            n_tracks=len(self.tracks),
            iterations_used=result.iterations_used,
            converged=result.converged,
            flagged=flagged,
            births=tuple(births),
            reported=tuple(reported),
        )
        log.debug(
            "frame %d: %d detections, %d tracks, %d iterations%s%s",
            frame,
            frame_log.n_detections,
            frame_log.n_tracks,
            frame_log.iterations_used,
            "" if frame_log.converged else " (not converged)",
            f", births {births}" if births else "",
        )
        return rows, frame_log

    def _consume(self, candidate) -> None:
        """Drop a birth candidate's detections from the clutter pool."""
        used = {id(d) for d in candidate.detections}
        for frame_entry in self.clutter_history:
            for dets in frame_entry:
                dets[:] = [d for d in dets if id(d) not in used]

    def _learn_covariances(self, result: FrameResult, prev_beliefs, detections) -> None:
        """Apply the optional covariance maximization steps.

        Observation covariances are re-estimated per detector and applied
        unless degenerate; dynamics covariances are re-estimated per track
        and stored as per-track overrides.
        """
        params = self.params
        grouped = group_by_detector(detections, params.n_detectors)
        existence = [1.0 if t.existence else 0.0 for t in self.tracks]
        if params.learn_sigma and self.tracks:
            detectors = list(params.detectors)
            changed = False
            for i, detector in enumerate(detectors):
                if len(grouped[i]) == 0:
                    continue
                estimate = m_step_sigma(
                    i, result.responsibilities, result.beliefs, grouped, existence, params
                )
                if np.linalg.eigvalsh(estimate)[0] > 1e-9:
                    detectors[i] = DetectorModel(
                        detector.projection,
                        estimate,
                        detector.clutter_density,
                        detector.appearance_clutter_density,
                        detector.offset,
                    )
                    changed = True
                else:
                    log.warning(
                        "rejected degenerate observation-covariance estimate for detector %d", i
                    )
            if changed:
                self.params = replace(params, detectors=tuple(detectors))
        if params.learn_lambda:
            for n, track in enumerate(self.tracks):
                estimate = m_step_lambda(prev_beliefs[n], result.beliefs[n])
                self.lambda_overrides[track.id] = ensure_spd(estimate)

    def run(self, detections: dict, n_frames: int | None = None):
        """Track a whole sequence; yields (rows, FrameLog) per frame."""
        if n_frames is None:
            n_frames = max(detections.keys(), default=-1) + 1
        for frame in range(n_frames):
            yield self.step(frame, detections.get(frame, []))
