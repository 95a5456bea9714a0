"""Plain-text file formats.

All files are comma-separated text with '#' comment lines, one record per
line, locale-independent formatting and deterministic field order. Floats
are written with nine decimal places so a write/read round trip preserves
values to 1e-9.

detections:    frame,detector_id,x,y,w,h,conf   (-1 detector_id = 0)
histograms:    frame,index,b1,...,bB        (index = row order within the frame)
tracks:        frame,id,x,y,w,h,visibility_posterior
ground truth:  frame,id,x,y,w,h

The confidence column is parsed but unused by the model. A detections file
without a histogram sidecar loads with uniform histograms and a warning.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from .core import (
    AppearanceHistogram,
    BoundingBox,
    ConfigError,
    Detection,
)
from . import config as _config

log = logging.getLogger(__name__)

__all__ = [
    "load_detections",
    "write_detections",
    "load_tracks",
    "write_tracks",
    "load_ground_truth",
    "write_ground_truth",
    "load_config",
    "write_config",
    "TrackRow",
]

_FLOAT_FMT = "{:.9f}"


def _fmt(value: float) -> str:
    return _FLOAT_FMT.format(float(value))


def _data_lines(path):
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            yield lineno, stripped


def _parse_floats(parts, path, lineno):
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"{path}:{lineno}: malformed numeric field") from exc


def load_detections(
    path,
    histogram_path=None,
    bins: int = 16,
    n_detectors: int | None = None,
) -> dict:
    """Load a detection file (plus optional histogram sidecar).

    Returns a dict mapping frame index to the list of detections in file
    order. Frames must be non-decreasing. Rows without a histogram get a
    uniform one.
    """
    histograms: dict[tuple[int, int], np.ndarray] = {}
    if histogram_path is not None and Path(histogram_path).exists():
        for lineno, line in _data_lines(histogram_path):
            parts = line.split(",")
            if len(parts) < 3:
                raise ConfigError(f"{histogram_path}:{lineno}: expected frame,index,b1,...")
            values = _parse_floats(parts, histogram_path, lineno)
            frame, index = int(values[0]), int(values[1])
            if len(values) - 2 != bins:
                raise ConfigError(
                    f"{histogram_path}:{lineno}: histogram has {len(values) - 2} bins, "
                    f"configuration expects {bins}"
                )
            histograms[(frame, index)] = np.asarray(values[2:])
    elif histogram_path is not None:
        log.warning("histogram sidecar %s not found; using uniform histograms", histogram_path)
    else:
        log.warning("no histogram sidecar given for %s; using uniform histograms", path)

    uniform = AppearanceHistogram.uniform(bins)
    detections: dict[int, list] = {}
    last_frame = None
    index_in_frame = 0
    for lineno, line in _data_lines(path):
        parts = line.split(",")
        if len(parts) != 7:
            raise ConfigError(f"{path}:{lineno}: expected 7 fields, got {len(parts)}")
        values = _parse_floats(parts, path, lineno)
        frame = int(values[0])
        detector_id = int(values[1])
        if detector_id == -1:
            detector_id = 0  # MOT detection files carry -1 in this column
        if frame < 0:
            raise ConfigError(f"{path}:{lineno}: negative frame index")
        if last_frame is not None and frame < last_frame:
            raise ConfigError(f"{path}:{lineno}: frames must be non-decreasing")
        if n_detectors is not None and not 0 <= detector_id < n_detectors:
            raise ConfigError(f"{path}:{lineno}: detector id {detector_id} out of range")
        if frame != last_frame:
            index_in_frame = 0
            last_frame = frame
        hist_bins = histograms.get((frame, index_in_frame))
        appearance = AppearanceHistogram(hist_bins) if hist_bins is not None else uniform
        try:
            box = BoundingBox(values[2], values[3], values[4], values[5])
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from exc
        detections.setdefault(frame, []).append(
            Detection(detector_id=detector_id, box=box, appearance=appearance, frame=frame)
        )
        index_in_frame += 1
    return detections


def write_detections(path, detections: dict, histogram_path=None) -> None:
    frames = sorted(detections)
    with open(path, "w", encoding="ascii") as fh:
        fh.write("# frame,detector_id,x,y,w,h,conf\n")
        for frame in frames:
            for det in detections[frame]:
                fields = [str(frame), str(det.detector_id)] + [
                    _fmt(v) for v in det.box.as_array()
                ] + [_fmt(1.0)]
                fh.write(",".join(fields) + "\n")
    if histogram_path is not None:
        with open(histogram_path, "w", encoding="ascii") as fh:
            fh.write("# frame,index,b1,...\n")
            for frame in frames:
                for index, det in enumerate(detections[frame]):
                    fields = [str(frame), str(index)] + [_fmt(v) for v in det.appearance.bins]
                    fh.write(",".join(fields) + "\n")


class TrackRow:
    """One reported track in one frame."""

    __slots__ = ("frame", "track_id", "box", "visibility")

    def __init__(self, frame: int, track_id: int, box, visibility: float):
        self.frame = frame
        self.track_id = track_id
        self.box = np.asarray(box, dtype=float)
        self.visibility = float(visibility)


def write_tracks(path, rows) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("# frame,id,x,y,w,h,visibility_posterior\n")
        for row in rows:
            fields = [str(row.frame), str(row.track_id)] + [
                _fmt(v) for v in row.box
            ] + [_fmt(row.visibility)]
            fh.write(",".join(fields) + "\n")


def load_tracks(path) -> dict:
    """Load a track file into {frame: [(id, box), ...]}."""
    out: dict[int, list] = {}
    for lineno, line in _data_lines(path):
        parts = line.split(",")
        if len(parts) != 7:
            raise ConfigError(f"{path}:{lineno}: expected 7 fields, got {len(parts)}")
        values = _parse_floats(parts, path, lineno)
        out.setdefault(int(values[0]), []).append((int(values[1]), np.asarray(values[2:6])))
    return out


def write_ground_truth(path, frames: dict) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("# frame,id,x,y,w,h\n")
        for frame in sorted(frames):
            for target_id, box in frames[frame]:
                fields = [str(frame), str(target_id)] + [_fmt(v) for v in box]
                fh.write(",".join(fields) + "\n")


def load_ground_truth(path) -> dict:
    out: dict[int, list] = {}
    for lineno, line in _data_lines(path):
        parts = line.split(",")
        if len(parts) != 6:
            raise ConfigError(f"{path}:{lineno}: expected 6 fields, got {len(parts)}")
        values = _parse_floats(parts, path, lineno)
        out.setdefault(int(values[0]), []).append((int(values[1]), np.asarray(values[2:])))
    return out


def load_config(path) -> dict:
    with open(path, "r", encoding="ascii") as fh:
        return _config.parse_config_text(fh, path=str(path))


def write_config(path, cfg: dict) -> None:
    _config.validate_config(cfg)
    with open(path, "w", encoding="ascii") as fh:
        for key in sorted(cfg):
            fh.write(f"{key} = {cfg[key]}\n")
