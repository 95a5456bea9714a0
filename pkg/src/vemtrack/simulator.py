"""Synthetic multi-target scene generation with ground truth.

Targets move under the same constant-velocity linear-Gaussian dynamics the
tracker assumes; each detector reports the affinely projected box plus
Gaussian noise with a per-detector miss probability, and adds
Poisson-distributed uniform clutter boxes. Appearance histograms are
sampled on the simplex: each target owns a Dirichlet reference histogram
and its detections resample around it with a fixed concentration, while
clutter appearance is uniform on the simplex.

Everything is driven by a single seeded generator, so identical seeds
produce bit-identical streams.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    DYNAMICS,
    AppearanceHistogram,
    BoundingBox,
    ConfigError,
    Detection,
)

__all__ = [
    "TargetScript",
    "DetectorSim",
    "ScenarioConfig",
    "GroundTruth",
    "simulate",
    "scenario_presets",
    "PRESET_NAMES",
]

MIN_BOX_SIDE = 2.0


@dataclass(frozen=True)
class TargetScript:
    """Scripted lifetime and initial state of one simulated target.

    ``occlude_from``/``occlude_to`` force detector misses during
    [occlude_from, occlude_to); scripted occlusions keep tests
    deterministic where emergent ones would not be. Negative motion noise
    values inherit the scenario-level setting.
    """

    target_id: int
    birth_frame: int
    death_frame: int
    initial_state: tuple
    occlude_from: int = -1
    occlude_to: int = -1
    motion_pos_std: float = -1.0
    motion_size_std: float = -1.0
    motion_vel_std: float = -1.0


@dataclass(frozen=True)
class DetectorSim:
    """Per-detector simulation knobs."""

    scale: tuple = (1.0, 1.0, 1.0, 1.0)
    offset: tuple = (0.0, 0.0, 0.0, 0.0)
    pos_std: float = 2.0
    size_std: float = 1.0
    miss_prob: float = 0.05
    clutter_rate: float = 1.0


@dataclass(frozen=True)
class ScenarioConfig:
    image_width: float = 768.0
    image_height: float = 576.0
    frames: int = 300
    targets: tuple = ()
    detectors: tuple = (DetectorSim(),)
    bins: int = 16
    ref_concentration: float = 1.0
    obs_concentration: float = 200.0
    motion_pos_std: float = 1.0
    motion_size_std: float = 0.2
    motion_vel_std: float = 0.05
    clutter_w_range: tuple = (20.0, 180.0)
    clutter_h_range: tuple = (30.0, 260.0)
    seed: int = 7

    def __post_init__(self):
        for det in self.detectors:
            if not 0.0 <= det.miss_prob <= 1.0:
                raise ConfigError("miss probability must lie in [0, 1]")
            if det.clutter_rate < 0.0:
                raise ConfigError("clutter rate must be non-negative")


@dataclass
class GroundTruth:
    """Per-frame true target boxes and per-target reference histograms."""

    frames: dict = field(default_factory=dict)
    references: dict = field(default_factory=dict)


def _motion_noise_std(config: ScenarioConfig, script: TargetScript) -> np.ndarray:
    pos = script.motion_pos_std if script.motion_pos_std >= 0 else config.motion_pos_std
    size = script.motion_size_std if script.motion_size_std >= 0 else config.motion_size_std
    vel = script.motion_vel_std if script.motion_vel_std >= 0 else config.motion_vel_std
    return np.array([pos, pos, size, size, vel, vel])


def simulate(config: ScenarioConfig) -> tuple[GroundTruth, dict]:
    """Generate (ground truth, per-frame detection lists) for a scenario."""
    rng = np.random.default_rng(config.seed)
    truth = GroundTruth()
    detections: dict[int, list] = {f: [] for f in range(config.frames)}

    # Reference histograms, drawn once per target in id order.
    for script in config.targets:
        ref = rng.dirichlet(np.full(config.bins, config.ref_concentration))
        truth.references[script.target_id] = ref

    states = {}
    for frame in range(config.frames):
        # Advance / spawn target states.
        for script in config.targets:
            death = script.death_frame if script.death_frame >= 0 else config.frames
            if frame == script.birth_frame:
                states[script.target_id] = np.asarray(script.initial_state, dtype=float).copy()
            elif script.birth_frame < frame < death and script.target_id in states:
                motion_std = _motion_noise_std(config, script)
                x = DYNAMICS @ states[script.target_id]
                if np.any(motion_std > 0):
                    x = x + rng.standard_normal(6) * motion_std
                x[2] = max(x[2], MIN_BOX_SIDE)
                x[3] = max(x[3], MIN_BOX_SIDE)
                states[script.target_id] = x

        # Record ground truth for alive targets.
        frame_truth = []
        for script in config.targets:
            death = script.death_frame if script.death_frame >= 0 else config.frames
            if script.birth_frame <= frame < death:
                frame_truth.append((script.target_id, states[script.target_id][:4].copy()))
        truth.frames[frame] = frame_truth

        # Emit detections, detector by detector, targets then clutter.
        for det_id, det_sim in enumerate(config.detectors):
            noise_std = np.array([det_sim.pos_std, det_sim.pos_std, det_sim.size_std, det_sim.size_std])
            scale = np.asarray(det_sim.scale, dtype=float)
            offset = np.asarray(det_sim.offset, dtype=float)
            for script in config.targets:
                death = script.death_frame if script.death_frame >= 0 else config.frames
                if not script.birth_frame <= frame < death:
                    continue
                occluded = script.occlude_from <= frame < script.occlude_to
                missed = rng.random() < det_sim.miss_prob
                if occluded or missed:
                    continue
                box = scale * states[script.target_id][:4] + offset
                if np.any(noise_std > 0):
                    box = box + rng.standard_normal(4) * noise_std
                box[2] = max(box[2], MIN_BOX_SIDE)
                box[3] = max(box[3], MIN_BOX_SIDE)
                hist = rng.dirichlet(config.obs_concentration * truth.references[script.target_id])
                detections[frame].append(
                    Detection(
                        detector_id=det_id,
                        box=BoundingBox.from_array(box),
                        appearance=AppearanceHistogram(hist),
                        frame=frame,
                    )
                )
            n_clutter = rng.poisson(det_sim.clutter_rate)
            for _ in range(n_clutter):
                box = np.array(
                    [
                        rng.uniform(0.0, config.image_width),
                        rng.uniform(0.0, config.image_height),
                        rng.uniform(*config.clutter_w_range),
                        rng.uniform(*config.clutter_h_range),
                    ]
                )
                hist = rng.dirichlet(np.ones(config.bins))
                detections[frame].append(
                    Detection(
                        detector_id=det_id,
                        box=BoundingBox.from_array(box),
                        appearance=AppearanceHistogram(hist),
                        frame=frame,
                    )
                )
    return truth, detections


PRESET_NAMES = ("cpd-like", "pets-like")


def scenario_presets() -> dict[str, ScenarioConfig]:
    """Named, desk-scaled scenario configurations.

    The presets are defined once, as complete configuration dictionaries,
    in :mod:`vemtrack.config`; this returns their scenario halves.
    """
    from . import config as _config  # deferred to avoid an import cycle

    return {
        name: _config.build_scenario(_config.preset_config(name))
        for name in PRESET_NAMES
    }


def get_preset(name: str) -> ScenarioConfig:
    presets = scenario_presets()
    if name not in presets:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(sorted(presets))}")
    return presets[name]
