"""Shared domain types and the linear dynamics/projection primitives.

State layout is fixed throughout the package: a track state is the
6-vector ``x = (x, y, w, h, vx, vy)`` where ``(x, y)`` is the top-left
corner of the bounding box in pixels, ``(w, h)`` its width and height,
and ``(vx, vy)`` the image-plane velocity in pixels per frame (one
frame = one time step).

All types here are immutable value objects and safe to share between
threads; arrays stored on them are marked read-only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

STATE_DIM = 6
OBS_DIM = 4

# Constant-velocity transition: position advances by velocity; size and
# velocity are carried over unchanged.
DYNAMICS = np.array(
    [
        [1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        [0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
    ]
)
DYNAMICS.setflags(write=False)

COVARIANCE_JITTER = 1e-9
EIGENVALUE_FLOOR = 1e-12


class NumericalError(RuntimeError):
    """A covariance could not be repaired into SPD form."""


class ConfigError(ValueError):
    """Invalid configuration value or malformed input file."""


def readonly_array(values, shape=None) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if shape is not None and arr.shape != shape:
        raise ValueError(f"expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("array contains non-finite values")
    arr.setflags(write=False)
    return arr


def symmetrize(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.T)


def ensure_spd(matrix: np.ndarray) -> np.ndarray:
    """Symmetrize a covariance and jitter it back above the eigenvalue floor.

    Closed-form updates accumulate asymmetry; every covariance that leaves
    this package passes through here. If the smallest eigenvalue is below
    ``EIGENVALUE_FLOOR`` a single jitter of ``COVARIANCE_JITTER * I`` is
    added; if the matrix is still not positive definite afterwards the
    error is considered fatal.
    """
    sym = symmetrize(np.asarray(matrix, dtype=float))
    smallest = np.linalg.eigvalsh(sym)[0]
    if smallest < EIGENVALUE_FLOOR:
        sym = sym + COVARIANCE_JITTER * np.eye(sym.shape[0])
        smallest = np.linalg.eigvalsh(sym)[0]
        if smallest <= 0.0:
            raise NumericalError(
                f"covariance not positive definite after jitter (min eig {smallest:.3e})"
            )
    return sym


@dataclass(frozen=True)
class BoundingBox:
    """Top-left anchored box in pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"box field {name} is not finite")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box sides must be positive, got w={self.w}, h={self.h}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.w, self.h])

    def center(self) -> np.ndarray:
        return np.array([self.x + 0.5 * self.w, self.y + 0.5 * self.h])

    def diagonal(self) -> float:
        return math.hypot(self.w, self.h)

    @classmethod
    def from_array(cls, values) -> "BoundingBox":
        x, y, w, h = np.asarray(values, dtype=float)
        return cls(float(x), float(y), float(w), float(h))


@dataclass(frozen=True)
class KinematicState:
    """Box plus velocity; serializes as the stacked 6-vector."""

    box: BoundingBox
    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "velocity", readonly_array(self.velocity, (2,)))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.box.as_array(), self.velocity])

    @classmethod
    def from_vector(cls, vector) -> "KinematicState":
        vec = np.asarray(vector, dtype=float)
        if vec.shape != (STATE_DIM,):
            raise ValueError(f"state vector must have shape ({STATE_DIM},)")
        return cls(BoundingBox.from_array(vec[:4]), vec[4:])


@dataclass(frozen=True, eq=False)
class GaussianBelief:
    """Gaussian posterior over a 6-D kinematic state."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", readonly_array(self.mean, (STATE_DIM, )))
        cov = ensure_spd(readonly_array(self.covariance, (STATE_DIM, STATE_DIM)))
        cov.setflags(write=False)
        object.__setattr__(self, "covariance", cov)


@dataclass(frozen=True, eq=False)
class AppearanceHistogram:
    """Normalized appearance histogram (e.g. concatenated color histograms).

    Constructors always renormalize, so the unit-sum invariant holds for
    every instance.
    """

    bins: np.ndarray

    def __post_init__(self):
        arr = np.array(self.bins, dtype=float)
        if arr.ndim != 1 or arr.size < 2:
            raise ValueError("histogram must be a 1-D vector with at least 2 bins")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValueError("histogram bins must be finite and non-negative")
        total = arr.sum()
        if total <= 0:
            raise ValueError("histogram must have positive mass")
        arr = arr / total
        arr.setflags(write=False)
        object.__setattr__(self, "bins", arr)

    @property
    def size(self) -> int:
        return int(self.bins.size)

    @classmethod
    def uniform(cls, bins: int) -> "AppearanceHistogram":
        return cls(np.full(bins, 1.0 / bins))


@dataclass(frozen=True, eq=False)
class Detection:
    """One detector output: a localization box plus its appearance."""

    detector_id: int
    box: BoundingBox
    appearance: AppearanceHistogram
    frame: int

    def __post_init__(self):
        if self.detector_id < 0:
            raise ValueError("detector_id must be non-negative")


@dataclass(frozen=True, eq=False)
class Track:
    """A tracked person: identity, belief, reference appearance, visibility.

    Existence is monotone: tracks are created by the birth process and are
    never deleted, only put to sleep by the visibility process.
    """

    id: int
    belief: GaussianBelief
    reference_appearance: AppearanceHistogram
    visibility_posterior: float
    birth_frame: int
    existence: bool = True

    def __post_init__(self):
        if not 0.0 <= self.visibility_posterior <= 1.0:
            raise ValueError("visibility posterior must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class DetectorModel:
    """Observation model of one detector.

    ``projection`` is the 4x6 linear map from state space to the detector's
    observation space and ``offset`` its affine translation part, so the
    expected observation for state x is ``projection @ x + offset``. The
    plain detector uses the velocity-dropping projection and zero offset;
    derived detectors (e.g. a face box predicted from a body state) compose
    it with a configured per-component scale and offset.
    """

    projection: np.ndarray
    obs_covariance: np.ndarray
    clutter_density: float
    appearance_clutter_density: float
    offset: np.ndarray = field(default_factory=lambda: np.zeros(OBS_DIM))
    # Derived quantities, filled in __post_init__.
    obs_precision: np.ndarray = field(init=False, repr=False)
    state_precision: np.ndarray = field(init=False, repr=False)
    log_norm: float = field(init=False, repr=False)

    def __post_init__(self):
        proj = readonly_array(self.projection, (OBS_DIM, STATE_DIM))
        offset = readonly_array(self.offset, (OBS_DIM,))
        cov = readonly_array(self.obs_covariance, (OBS_DIM, OBS_DIM))
        if self.clutter_density <= 0 or self.appearance_clutter_density <= 0:
            raise ValueError("clutter densities must be positive")
        try:
            chol = np.linalg.cholesky(symmetrize(cov))
        except np.linalg.LinAlgError as exc:
            raise ConfigError("detector observation covariance is not SPD") from exc
        precision = np.linalg.inv(symmetrize(cov))
        precision = symmetrize(precision)
        precision.setflags(write=False)
        state_prec = symmetrize(proj.T @ precision @ proj)
        state_prec.setflags(write=False)
        log_det = 2.0 * np.sum(np.log(np.diag(chol)))
        object.__setattr__(self, "projection", proj)
        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "obs_covariance", cov)
        object.__setattr__(self, "obs_precision", precision)
        object.__setattr__(self, "state_precision", state_prec)
        object.__setattr__(self, "log_norm", -0.5 * (OBS_DIM * math.log(2.0 * math.pi) + log_det))

    @classmethod
    def from_box_affine(
        cls,
        scale,
        offset,
        obs_covariance,
        clutter_density: float,
        appearance_clutter_density: float,
    ) -> "DetectorModel":
        """Build the projection from a per-component scale on the box."""
        scale = np.asarray(scale, dtype=float)
        proj = np.zeros((OBS_DIM, STATE_DIM))
        proj[:, :OBS_DIM] = np.diag(scale)
        return cls(proj, obs_covariance, clutter_density, appearance_clutter_density, offset)

    def observation_box(self, y: np.ndarray) -> np.ndarray:
        """Back-project an observed box into state box coordinates."""
        block = self.projection[:, :OBS_DIM]
        return np.linalg.solve(block, np.asarray(y, dtype=float) - self.offset)


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Static parameters of the tracker.

    The per-detector assignment priors evolve frame to frame and live in
    the engine state rather than here; everything that stays fixed during
    a run is collected in this object.
    """

    detectors: tuple
    dynamics_covariance: np.ndarray
    lambda_appearance: float
    w_lambda: float
    pi_v: float
    lambda_visibility: float
    birth: "BirthParams"
    histogram_bins: int = 16
    max_tracks: int = 50
    visibility_swapped: bool = True
    report_threshold: float = 0.5
    vem_max_iterations: int = 10
    vem_tol: float = 1e-4
    prior_floor: float = 1e-3
    sleep_std_caps: np.ndarray | None = None
    learn_sigma: bool = False
    learn_lambda: bool = False

    def __post_init__(self):
        object.__setattr__(
            self, "dynamics_covariance", readonly_array(self.dynamics_covariance, (STATE_DIM, STATE_DIM))
        )
        if self.sleep_std_caps is not None:
            object.__setattr__(self, "sleep_std_caps", readonly_array(self.sleep_std_caps, (STATE_DIM,)))
        if not self.detectors:
            raise ValueError("at least one detector is required")
        if not 0.5 < self.pi_v < 1.0:
            raise ValueError("pi_v must lie in (0.5, 1)")
        if self.lambda_appearance < 0 or self.w_lambda <= 0:
            raise ValueError("appearance parameters out of range")

    @property
    def n_detectors(self) -> int:
        return len(self.detectors)


def apply_dynamics(state) -> np.ndarray:
    """Advance a 6-D state one frame: position += velocity, rest unchanged."""
    vec = np.asarray(state, dtype=float)
    return DYNAMICS @ vec


def project(detector: DetectorModel, state) -> np.ndarray:
    """Map a 6-D state into a detector's 4-D observation space."""
    vec = np.asarray(state, dtype=float)
    return detector.projection @ vec + detector.offset


def predict_belief(prev: GaussianBelief, dynamics_cov: np.ndarray) -> GaussianBelief:
    """One-step prediction: mean D mu, covariance D Gamma D^T + Lambda."""
    mean = DYNAMICS @ prev.mean
    cov = DYNAMICS @ prev.covariance @ DYNAMICS.T + np.asarray(dynamics_cov, dtype=float)
    return GaussianBelief(mean, ensure_spd(cov))
