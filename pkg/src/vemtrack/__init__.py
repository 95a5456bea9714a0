"""On-line variational multi-object tracking.

A causal tracker for a time-varying number of targets observed through
several noisy detectors. Per frame, observation-to-track assignments and
Gaussian track states are inferred jointly by an alternating closed-form
variational scheme with an explicit clutter track; new tracks are created
by a likelihood-ratio birth test on temporally consistent clutter, and
disappearing targets are put to sleep (and can be awakened) by a two-state
visibility filter. Ships with a synthetic-scene simulator, plain-text IO,
and CLEAR/OSPA-style evaluation.
"""

from .core import (
    AppearanceHistogram,
    BoundingBox,
    ConfigError,
    Detection,
    DetectorModel,
    GaussianBelief,
    KinematicState,
    ModelParams,
    NumericalError,
    Track,
    apply_dynamics,
    predict_belief,
    project,
)
from .birth import BirthParams, CandidateSequence, scan_and_spawn, tau0, tau1
from .engine import Tracker
from .observation import (
    appearance_likelihood,
    bhattacharyya_distance,
    epsilon,
    epsilon_clutter,
    estimate_w_lambda,
    localization_likelihood,
)
from .simulator import ScenarioConfig, scenario_presets, simulate
from .vem import FrameResult, Responsibilities, e_x_step, e_z_step, m_step_priors, run_frame
from .visibility import VisibilityState, is_reported, visibility_observation, visibility_update

__version__ = "0.1.0"

__all__ = [
    "AppearanceHistogram",
    "BirthParams",
    "BoundingBox",
    "CandidateSequence",
    "ConfigError",
    "Detection",
    "DetectorModel",
    "FrameResult",
    "GaussianBelief",
    "KinematicState",
    "ModelParams",
    "NumericalError",
    "Responsibilities",
    "ScenarioConfig",
    "Track",
    "Tracker",
    "VisibilityState",
    "apply_dynamics",
    "appearance_likelihood",
    "bhattacharyya_distance",
    "e_x_step",
    "e_z_step",
    "epsilon",
    "epsilon_clutter",
    "estimate_w_lambda",
    "is_reported",
    "localization_likelihood",
    "m_step_priors",
    "predict_belief",
    "project",
    "run_frame",
    "scan_and_spawn",
    "scenario_presets",
    "simulate",
    "tau0",
    "tau1",
    "visibility_observation",
    "visibility_update",
]
