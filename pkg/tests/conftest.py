import numpy as np
import pytest

from vemtrack.birth import BirthParams
from vemtrack.core import (
    AppearanceHistogram,
    BoundingBox,
    Detection,
    DetectorModel,
    GaussianBelief,
    ModelParams,
    Track,
)


def identity_detector(
    sigma_pos=8.0, sigma_size=4.0, clutter_density=1e-10, appearance_clutter_density=1.0
) -> DetectorModel:
    sigma = np.diag([sigma_pos**2, sigma_pos**2, sigma_size**2, sigma_size**2])
    return DetectorModel.from_box_affine(
        (1.0, 1.0, 1.0, 1.0), (0.0, 0.0, 0.0, 0.0), sigma,
        clutter_density, appearance_clutter_density,
    )


def make_birth_params(**overrides) -> BirthParams:
    defaults = dict(
        flat_mean=np.array([384.0, 288.0, 96.0, 144.0, 0.0, 0.0]),
        flat_covariance=np.diag([768.0**2, 576.0**2, 768.0**2, 576.0**2, 400.0, 400.0]),
        birth_covariance=np.diag([64.0, 64.0, 36.0, 36.0, 16.0, 16.0]),
    )
    defaults.update(overrides)
    return BirthParams(**defaults)


def make_params(detectors=None, w_lambda=1.0, lambda_appearance=0.0, **overrides) -> ModelParams:
    """Small, fast ModelParams for unit tests.

    The default appearance model is flat (lambda 0, W 1) so spatial terms
    can be exercised in isolation; tests that need appearance set their own
    lambda and W.
    """
    if detectors is None:
        detectors = (identity_detector(),)
    defaults = dict(
        detectors=tuple(detectors),
        dynamics_covariance=np.diag([4.0, 4.0, 1.0, 1.0, 0.25, 0.25]),
        lambda_appearance=lambda_appearance,
        w_lambda=w_lambda,
        pi_v=0.9,
        lambda_visibility=5.0,
        birth=make_birth_params(),
        histogram_bins=8,
    )
    defaults.update(overrides)
    return ModelParams(**defaults)


def make_track(track_id=1, mean=None, cov=None, bins=8, ref=None, visibility=1.0, birth_frame=0) -> Track:
    if mean is None:
        mean = np.array([100.0, 100.0, 60.0, 120.0, 0.0, 0.0])
    if cov is None:
        cov = np.eye(6) * 25.0
    if ref is None:
        ref = AppearanceHistogram.uniform(bins)
    return Track(
        id=track_id,
        belief=GaussianBelief(np.asarray(mean, dtype=float), np.asarray(cov, dtype=float)),
        reference_appearance=ref,
        visibility_posterior=visibility,
        birth_frame=birth_frame,
    )


def make_detection(box, detector_id=0, frame=0, bins=8, appearance=None) -> Detection:
    if appearance is None:
        appearance = AppearanceHistogram.uniform(bins)
    return Detection(
        detector_id=detector_id,
        box=BoundingBox.from_array(np.asarray(box, dtype=float)),
        appearance=appearance,
        frame=frame,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240810)
