"""Flat key=value configuration covering the tracker, the birth and
visibility processes, the metrics, and the simulator.

Every key has a documented default; unknown keys are rejected. Detector-
and target-indexed keys follow the patterns ``detector<i>_*`` (1-based,
bounded by ``num_detectors``) and ``target<j>_*`` (bounded by
``sim_targets``).
"""

from __future__ import annotations

import math
import re

import numpy as np

from .core import ConfigError, DetectorModel, ModelParams
from .birth import BirthParams
from .observation import cached_w_lambda, simplex_volume
from .simulator import DetectorSim, ScenarioConfig, TargetScript

__all__ = [
    "default_config",
    "validate_config",
    "apply_overrides",
    "build_model_params",
    "build_scenario",
    "preset_config",
    "config_help",
]


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (type tag, default, help)
BASE_SCHEMA: dict[str, tuple] = {
    # Scene geometry and clutter support.
    "image_width": ("float", 768.0, "image width in pixels"),
    "image_height": ("float", 576.0, "image height in pixels"),
    "box_w_max": ("float", 192.0, "support of the uniform clutter density over box widths"),
    "box_h_max": ("float", 288.0, "support of the uniform clutter density over box heights"),
    # Model sizes.
    "histogram_bins": ("int", 16, "appearance histogram dimension"),
    "max_tracks": ("int", 50, "capacity of the track table"),
    "num_detectors": ("int", 1, "number of detectors"),
    # Appearance model.
    "lambda_appearance": ("float", 10.0, "appearance skewness (exponential rate in the distance)"),
    "w_lambda_samples": ("int", 100000, "Monte Carlo samples for the appearance normalizer"),
    "w_lambda_seed": ("int", 7, "seed for the appearance normalizer estimate"),
    # Dynamics covariance (diagonal, as standard deviations).
    "dynamics_pos_std": ("float", 2.0, "dynamics noise on box position, px/frame"),
    "dynamics_size_std": ("float", 1.0, "dynamics noise on box size, px/frame"),
    "dynamics_vel_std": ("float", 0.5, "dynamics noise on velocity, px/frame^2"),
    # Inference loop.
    "vem_max_iterations": ("int", 10, "iteration cap per frame"),
    "vem_tol": ("float", 1e-4, "convergence threshold on responsibility change"),
    "prior_floor": ("float", 5e-3, "floor applied to carried assignment priors each frame"),
    # Visibility process.
    "pi_v": ("float", 0.9, "probability of keeping the visibility state"),
    "lambda_visibility": ("float", 5.0, "rate of the visibility observation likelihood"),
    "visibility_likelihood": ("str", "swapped", "swapped | as-printed likelihood orientation"),
    "report_threshold": ("float", 0.5, "visibility posterior needed to report a track"),
    # Sleeping-track covariance bound (standard deviations; 0 disables).
    "sleep_pos_std_cap": ("float", 12.0, "position std cap for sleeping tracks"),
    "sleep_size_std_cap": ("float", 6.0, "size std cap for sleeping tracks"),
    "sleep_vel_std_cap": ("float", 2.0, "velocity std cap for sleeping tracks"),
    # Covariance learning switches.
    "learn_sigma": ("bool", False, "apply the observation-covariance maximization step"),
    "learn_lambda": ("bool", False, "apply the dynamics-covariance maximization step"),
    # Birth process.
    "birth_window": ("int", 2, "window L; candidates span L+1 consecutive frames"),
    "birth_clutter_threshold": ("float", 0.5, "clutter responsibility needed to enter the birth pool"),
    "birth_gate_factor": ("float", 2.0, "chaining gate, multiples of the box diagonal per frame"),
    "birth_flat_vel_std": ("float", 20.0, "flat-prior velocity std, px/frame"),
    "birth_pos_std": ("float", 8.0, "spawned-track position std"),
    "birth_size_std": ("float", 6.0, "spawned-track size std"),
    "birth_vel_std": ("float", 4.0, "spawned-track velocity std"),
    "birth_visibility_init": ("float", 0.9, "visibility posterior of a spawned track"),
    # Metrics.
    "clear_iou_threshold": ("float", 0.5, "IoU needed for a CLEAR match"),
    "ospa_cutoff": ("float", 100.0, "OSPA cutoff c, px"),
    "ospa_order": ("float", 1.0, "OSPA order p"),
    "omat_order": ("float", 1.0, "OMAT order p"),
    "set_metric_ground": ("str", "center", "center | iou ground distance for set metrics"),
    # Simulator.
    "sim_frames": ("int", 300, "number of simulated frames"),
    "sim_seed": ("int", 7, "simulation seed"),
    "sim_targets": ("int", 0, "number of scripted targets"),
    "sim_obs_concentration": ("float", 200.0, "Dirichlet concentration of observed histograms"),
    "sim_ref_concentration": ("float", 1.0, "Dirichlet concentration of reference histograms"),
    "sim_clutter_w_min": ("float", 20.0, "clutter box width range, lower"),
    "sim_clutter_w_max": ("float", 180.0, "clutter box width range, upper"),
    "sim_clutter_h_min": ("float", 30.0, "clutter box height range, lower"),
    "sim_clutter_h_max": ("float", 260.0, "clutter box height range, upper"),
    "sim_motion_pos_std": ("float", 1.0, "simulated dynamics noise on position"),
    "sim_motion_size_std": ("float", 0.2, "simulated dynamics noise on size"),
    "sim_motion_vel_std": ("float", 0.05, "simulated dynamics noise on velocity"),
}

DETECTOR_SCHEMA: dict[str, tuple] = {
    "scale_x": ("float", 1.0, "affine scale on box x"),
    "scale_y": ("float", 1.0, "affine scale on box y"),
    "scale_w": ("float", 1.0, "affine scale on box width"),
    "scale_h": ("float", 1.0, "affine scale on box height"),
    "offset_x": ("float", 0.0, "affine offset on box x, px"),
    "offset_y": ("float", 0.0, "affine offset on box y, px"),
    "offset_w": ("float", 0.0, "affine offset on box width, px"),
    "offset_h": ("float", 0.0, "affine offset on box height, px"),
    "sigma_pos_std": ("float", 8.0, "observation noise on position, px"),
    "sigma_size_std": ("float", 4.0, "observation noise on size, px"),
    "sim_miss": ("float", 0.05, "simulated per-frame miss probability"),
    "sim_clutter_rate": ("float", 1.0, "simulated Poisson clutter rate per frame"),
    "sim_pos_std": ("float", 3.0, "simulated observation noise on position"),
    "sim_size_std": ("float", 2.0, "simulated observation noise on size"),
}

TARGET_SCHEMA: dict[str, tuple] = {
    "birth_frame": ("int", 0, "first frame the target exists"),
    "death_frame": ("int", -1, "first frame the target is gone (-1: never)"),
    "x": ("float", 100.0, "initial box x"),
    "y": ("float", 100.0, "initial box y"),
    "w": ("float", 60.0, "initial box width"),
    "h": ("float", 120.0, "initial box height"),
    "vx": ("float", 0.0, "initial velocity x"),
    "vy": ("float", 0.0, "initial velocity y"),
    "occlude_from": ("int", -1, "first occluded frame (-1: none)"),
    "occlude_to": ("int", -1, "first frame after the occlusion"),
    "motion_pos_std": ("float", -1.0, "per-target motion noise override (-1: scenario value)"),
    "motion_size_std": ("float", -1.0, "per-target motion noise override (-1: scenario value)"),
    "motion_vel_std": ("float", -1.0, "per-target motion noise override (-1: scenario value)"),
}

_DETECTOR_RE = re.compile(r"^detector(\d+)_(\w+)$")
_TARGET_RE = re.compile(r"^target(\d+)_(\w+)$")


def default_config(num_detectors: int = 1, sim_targets: int = 0) -> dict:
    """Full configuration dictionary with documented defaults."""
    cfg = {key: spec[1] for key, spec in BASE_SCHEMA.items()}
    cfg["num_detectors"] = num_detectors
    cfg["sim_targets"] = sim_targets
    for i in range(1, num_detectors + 1):
        for key, spec in DETECTOR_SCHEMA.items():
            cfg[f"detector{i}_{key}"] = spec[1]
    for j in range(1, sim_targets + 1):
        for key, spec in TARGET_SCHEMA.items():
            cfg[f"target{j}_{key}"] = spec[1]
    return cfg


def _schema_for(key: str, cfg: dict) -> tuple:
    if key in BASE_SCHEMA:
        return BASE_SCHEMA[key]
    m = _DETECTOR_RE.match(key)
    if m and m.group(2) in DETECTOR_SCHEMA:
        if 1 <= int(m.group(1)) <= int(cfg.get("num_detectors", 0)):
            return DETECTOR_SCHEMA[m.group(2)]
        raise ConfigError(f"detector index out of range in key {key!r}")
    m = _TARGET_RE.match(key)
    if m and m.group(2) in TARGET_SCHEMA:
        if 1 <= int(m.group(1)) <= int(cfg.get("sim_targets", 0)):
            return TARGET_SCHEMA[m.group(2)]
        raise ConfigError(f"target index out of range in key {key!r}")
    raise ConfigError(f"unknown configuration key {key!r}")


def parse_value(key: str, raw: str, cfg: dict):
    kind = _schema_for(key, cfg)[0]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            return _parse_bool(raw)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc


def parse_config_text(lines, path: str = "<config>") -> dict:
    """Parse flat key=value text into a complete configuration dict.

    Counting keys (num_detectors, sim_targets) are resolved first so the
    indexed keys that depend on them validate correctly.
    """
    entries = []
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, _, raw = stripped.partition("=")
        entries.append((lineno, key.strip(), raw.strip()))
    counts = {"num_detectors": 1, "sim_targets": 0}
    for _, key, raw in entries:
        if key in counts:
            try:
                counts[key] = int(raw)
            except ValueError as exc:
                raise ConfigError(f"{path}: bad value for {key!r}: {raw!r}") from exc
    cfg = default_config(counts["num_detectors"], counts["sim_targets"])
    for lineno, key, raw in entries:
        try:
            cfg[key] = parse_value(key, raw, cfg)
        except ConfigError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    validate_config(cfg)
    return cfg


def apply_overrides(cfg: dict, overrides) -> dict:
    """Apply ``key=value`` override strings (CLI --set) to a config dict."""
    cfg = dict(cfg)
    counts_changed = False
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, _, raw = item.partition("=")
        key = key.strip()
        if key in ("num_detectors", "sim_targets"):
            counts_changed = True
            cfg[key] = int(raw)
    if counts_changed:
        merged = default_config(int(cfg["num_detectors"]), int(cfg["sim_targets"]))
        merged.update({k: v for k, v in cfg.items() if k in merged})
        cfg = merged
    for item in overrides:
        key, _, raw = item.partition("=")
        key = key.strip()
        cfg[key] = parse_value(key, raw.strip(), cfg)
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    for key in cfg:
        _schema_for(key, cfg)
    expected = default_config(int(cfg["num_detectors"]), int(cfg["sim_targets"]))
    missing = set(expected) - set(cfg)
    if missing:
        raise ConfigError(f"missing configuration keys: {sorted(missing)}")
    if cfg["histogram_bins"] < 2 or cfg["histogram_bins"] > 128:
        raise ConfigError("histogram_bins must lie in [2, 128]")
    if not 0.5 < cfg["pi_v"] < 1.0:
        raise ConfigError("pi_v must lie in (0.5, 1)")
    if cfg["visibility_likelihood"] not in ("swapped", "as-printed"):
        raise ConfigError("visibility_likelihood must be 'swapped' or 'as-printed'")
    if cfg["set_metric_ground"] not in ("center", "iou"):
        raise ConfigError("set_metric_ground must be 'center' or 'iou'")


def config_help() -> str:
    out = ["# base keys"]
    for key, (kind, default, doc) in BASE_SCHEMA.items():
        out.append(f"{key} ({kind}, default {default}): {doc}")
    out.append("# per-detector keys: detector<i>_<name>, i in 1..num_detectors")
    for key, (kind, default, doc) in DETECTOR_SCHEMA.items():
        out.append(f"detector<i>_{key} ({kind}, default {default}): {doc}")
    out.append("# per-target keys: target<j>_<name>, j in 1..sim_targets")
    for key, (kind, default, doc) in TARGET_SCHEMA.items():
        out.append(f"target<j>_{key} ({kind}, default {default}): {doc}")
    return "\n".join(out)


def _diag_cov(stds) -> np.ndarray:
    return np.diag(np.asarray(stds, dtype=float) ** 2)


def build_model_params(cfg: dict) -> ModelParams:
    """Materialize tracker parameters, including the appearance normalizer."""
    validate_config(cfg)
    bins = int(cfg["histogram_bins"])
    u_y = 1.0 / (
        cfg["image_width"] * cfg["image_height"] * cfg["box_w_max"] * cfg["box_h_max"]
    )
    u_h = 1.0 / simplex_volume(bins)
    detectors = []
    for i in range(1, int(cfg["num_detectors"]) + 1):
        p = lambda name: cfg[f"detector{i}_{name}"]
        scale = [p("scale_x"), p("scale_y"), p("scale_w"), p("scale_h")]
        offset = [p("offset_x"), p("offset_y"), p("offset_w"), p("offset_h")]
        sigma = _diag_cov([p("sigma_pos_std"), p("sigma_pos_std"), p("sigma_size_std"), p("sigma_size_std")])
        detectors.append(
            DetectorModel.from_box_affine(scale, offset, sigma, u_y, u_h)
        )
    dynamics = _diag_cov(
        [
            cfg["dynamics_pos_std"],
            cfg["dynamics_pos_std"],
            cfg["dynamics_size_std"],
            cfg["dynamics_size_std"],
            cfg["dynamics_vel_std"],
            cfg["dynamics_vel_std"],
        ]
    )
    w, h = cfg["image_width"], cfg["image_height"]
    flat_mean = np.array([w / 2.0, h / 2.0, cfg["box_w_max"] / 2.0, cfg["box_h_max"] / 2.0, 0.0, 0.0])
    flat_cov = _diag_cov([w, h, w, h, cfg["birth_flat_vel_std"], cfg["birth_flat_vel_std"]])
    birth_cov = _diag_cov(
        [
            cfg["birth_pos_std"],
            cfg["birth_pos_std"],
            cfg["birth_size_std"],
            cfg["birth_size_std"],
            cfg["birth_vel_std"],
            cfg["birth_vel_std"],
        ]
    )
    birth = BirthParams(
        flat_mean=flat_mean,
        flat_covariance=flat_cov,
        birth_covariance=birth_cov,
        window=int(cfg["birth_window"]),
        clutter_threshold=cfg["birth_clutter_threshold"],
        gate_factor=cfg["birth_gate_factor"],
        visibility_init=cfg["birth_visibility_init"],
    )
    caps = np.array(
        [
            cfg["sleep_pos_std_cap"],
            cfg["sleep_pos_std_cap"],
            cfg["sleep_size_std_cap"],
            cfg["sleep_size_std_cap"],
            cfg["sleep_vel_std_cap"],
            cfg["sleep_vel_std_cap"],
        ]
    )
    sleep_caps = caps if np.all(caps > 0) else None
    w_lambda = cached_w_lambda(
        cfg["lambda_appearance"], bins, int(cfg["w_lambda_samples"]), int(cfg["w_lambda_seed"])
    )
    return ModelParams(
        detectors=tuple(detectors),
        dynamics_covariance=dynamics,
        lambda_appearance=cfg["lambda_appearance"],
        w_lambda=w_lambda,
        pi_v=cfg["pi_v"],
        lambda_visibility=cfg["lambda_visibility"],
        birth=birth,
        histogram_bins=bins,
        max_tracks=int(cfg["max_tracks"]),
        visibility_swapped=cfg["visibility_likelihood"] == "swapped",
        report_threshold=cfg["report_threshold"],
        vem_max_iterations=int(cfg["vem_max_iterations"]),
        vem_tol=cfg["vem_tol"],
        prior_floor=cfg["prior_floor"],
        sleep_std_caps=sleep_caps,
        learn_sigma=bool(cfg["learn_sigma"]),
        learn_lambda=bool(cfg["learn_lambda"]),
    )


def build_scenario(cfg: dict) -> ScenarioConfig:
    validate_config(cfg)
    targets = []
    for j in range(1, int(cfg["sim_targets"]) + 1):
        p = lambda name: cfg[f"target{j}_{name}"]
        targets.append(
            TargetScript(
                target_id=j,
                birth_frame=int(p("birth_frame")),
                death_frame=int(p("death_frame")),
                initial_state=(p("x"), p("y"), p("w"), p("h"), p("vx"), p("vy")),
                occlude_from=int(p("occlude_from")),
                occlude_to=int(p("occlude_to")),
                motion_pos_std=p("motion_pos_std"),
                motion_size_std=p("motion_size_std"),
                motion_vel_std=p("motion_vel_std"),
            )
        )
    detectors = []
    for i in range(1, int(cfg["num_detectors"]) + 1):
        p = lambda name: cfg[f"detector{i}_{name}"]
        detectors.append(
            DetectorSim(
                scale=(p("scale_x"), p("scale_y"), p("scale_w"), p("scale_h")),
                offset=(p("offset_x"), p("offset_y"), p("offset_w"), p("offset_h")),
                pos_std=p("sim_pos_std"),
                size_std=p("sim_size_std"),
                miss_prob=p("sim_miss"),
                clutter_rate=p("sim_clutter_rate"),
            )
        )
    return ScenarioConfig(
        image_width=cfg["image_width"],
        image_height=cfg["image_height"],
        frames=int(cfg["sim_frames"]),
        targets=tuple(targets),
        detectors=tuple(detectors),
        bins=int(cfg["histogram_bins"]),
        ref_concentration=cfg["sim_ref_concentration"],
        obs_concentration=cfg["sim_obs_concentration"],
        motion_pos_std=cfg["sim_motion_pos_std"],
        motion_size_std=cfg["sim_motion_size_std"],
        motion_vel_std=cfg["sim_motion_vel_std"],
        clutter_w_range=(cfg["sim_clutter_w_min"], cfg["sim_clutter_w_max"]),
        clutter_h_range=(cfg["sim_clutter_h_min"], cfg["sim_clutter_h_max"]),
        seed=int(cfg["sim_seed"]),
    )


def _cpd_like_config() -> dict:
    cfg = default_config(num_detectors=2, sim_targets=3)
    cfg.update(
        {
            "image_width": 640.0,
            "image_height": 480.0,
            "box_w_max": 160.0,
            "box_h_max": 240.0,
            "sim_frames": 400,
            "sim_seed": 20214,
            "sim_motion_pos_std": 0.5,
            "sim_motion_size_std": 0.15,
            "sim_motion_vel_std": 0.015,
            "sim_clutter_w_min": 20.0,
            "sim_clutter_w_max": 160.0,
            "sim_clutter_h_min": 30.0,
            "sim_clutter_h_max": 240.0,
            "dynamics_pos_std": 1.5,
            "dynamics_size_std": 0.5,
            "dynamics_vel_std": 0.3,
            "lambda_visibility": 5.0,
            # Sleeping-track covariance bound, ~1.5 detector sigmas so the
            # posterior-spread factor cannot zero out re-association.
            "sleep_pos_std_cap": 8.0,
            "sleep_size_std_cap": 4.5,
            "sleep_vel_std_cap": 1.5,
            # Detector 1: plain box detector.
            "detector1_sigma_pos_std": 5.0,
            "detector1_sigma_size_std": 3.0,
            "detector1_sim_pos_std": 2.5,
            "detector1_sim_size_std": 1.5,
            "detector1_sim_miss": 0.05,
            "detector1_sim_clutter_rate": 1.0,
            # Detector 2: derived (face-like) detector.
            "detector2_scale_w": 0.4,
            "detector2_scale_h": 0.3,
            "detector2_offset_x": 18.0,
            "detector2_offset_y": 6.0,
            "detector2_sigma_pos_std": 4.0,
            "detector2_sigma_size_std": 2.0,
            "detector2_sim_pos_std": 2.0,
            "detector2_sim_size_std": 1.2,
            "detector2_sim_miss": 0.08,
            "detector2_sim_clutter_rate": 1.0,
        }
    )
    target_rows = {
        1: dict(birth_frame=0, x=100.0, y=200.0, w=60.0, h=120.0, vx=0.8, vy=0.1, occlude_from=150, occlude_to=200),
        2: dict(birth_frame=0, x=350.0, y=180.0, w=64.0, h=126.0, vx=-0.5, vy=0.2),
        3: dict(birth_frame=200, x=80.0, y=300.0, w=58.0, h=115.0, vx=0.9, vy=-0.3),
    }
    for j, row in target_rows.items():
        for key, value in row.items():
            cfg[f"target{j}_{key}"] = value
    return cfg


def _pets_like_config() -> dict:
    cfg = default_config(num_detectors=1, sim_targets=12)
    cfg.update(
        {
            "image_width": 768.0,
            "image_height": 576.0,
            "box_w_max": 100.0,
            "box_h_max": 160.0,
            "sim_frames": 600,
            "sim_seed": 4242,
            "sim_motion_pos_std": 0.8,
            "sim_motion_size_std": 0.1,
            "sim_motion_vel_std": 0.01,
            "sim_clutter_w_min": 20.0,
            "sim_clutter_w_max": 100.0,
            "sim_clutter_h_min": 30.0,
            "sim_clutter_h_max": 160.0,
            "dynamics_pos_std": 1.5,
            "dynamics_size_std": 0.4,
            "dynamics_vel_std": 0.2,
            # With a dozen targets each prior is ~1/13, so the visibility
            # rate must be large for an associated track to look visible.
            "lambda_visibility": 40.0,
            "sleep_pos_std_cap": 6.0,
            "sleep_size_std_cap": 4.0,
            "sleep_vel_std_cap": 1.5,
            "detector1_sigma_pos_std": 4.0,
            "detector1_sigma_size_std": 2.5,
            "detector1_sim_pos_std": 2.0,
            "detector1_sim_size_std": 1.2,
            "detector1_sim_miss": 0.1,
            "detector1_sim_clutter_rate": 2.0,
        }
    )
    specs = [
        (90.0, 60.0, 0.45, 0.22),
        (260.0, 60.0, -0.30, 0.18),
        (430.0, 60.0, 0.35, 0.25),
        (600.0, 60.0, -0.40, 0.15),
        (90.0, 230.0, 0.40, -0.10),
        (260.0, 230.0, -0.25, 0.20),
        (430.0, 230.0, 0.30, -0.15),
        (600.0, 230.0, -0.45, 0.10),
        (90.0, 400.0, 0.50, -0.20),
        (260.0, 400.0, -0.20, -0.15),
        (430.0, 400.0, 0.25, -0.22),
        (600.0, 400.0, -0.35, -0.12),
    ]
    for j, (x, y, vx, vy) in enumerate(specs, start=1):
        cfg[f"target{j}_x"] = x
        cfg[f"target{j}_y"] = y
        cfg[f"target{j}_w"] = 32.0 + ((j - 1) % 4) * 3.0
        cfg[f"target{j}_h"] = 76.0 + ((j - 1) % 3) * 5.0
        cfg[f"target{j}_vx"] = vx
        cfg[f"target{j}_vy"] = vy
    return cfg


_PRESET_BUILDERS = {"cpd-like": _cpd_like_config, "pets-like": _pets_like_config}


def preset_config(name: str) -> dict:
    """Complete configuration (scenario plus tracker settings) for a preset."""
    if name not in _PRESET_BUILDERS:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(sorted(_PRESET_BUILDERS))}"
        )
    cfg = _PRESET_BUILDERS[name]()
    validate_config(cfg)
    return cfg
