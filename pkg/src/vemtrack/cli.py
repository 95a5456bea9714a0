"""Command-line front end: simulate, track, evaluate, and an end-to-end demo.

The frame loop in ``track`` is strictly causal: frames are processed one
at a time in order, so truncating the input reproduces the corresponding
prefix of the output byte for byte. All commands are deterministic for
fixed inputs and seeds.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import config as configmod
from . import fileio, metrics
from .core import ConfigError, NumericalError
from .engine import Tracker
from .simulator import PRESET_NAMES, simulate

log = logging.getLogger(__name__)


def _load_cfg(args) -> dict:
    if getattr(args, "preset", None) and getattr(args, "config", None):
        raise ConfigError("--preset and --config are mutually exclusive; use --set to tweak a preset")
    if getattr(args, "preset", None):
        cfg = configmod.preset_config(args.preset)
    elif getattr(args, "config", None):
        cfg = fileio.load_config(args.config)
    else:
        cfg = configmod.default_config()
    overrides = list(getattr(args, "set", None) or [])
    if getattr(args, "seed", None) is not None:
        overrides.append(f"sim_seed={args.seed}")
    if getattr(args, "max_iters", None) is not None:
        overrides.append(f"vem_max_iterations={args.max_iters}")
    if overrides:
        cfg = configmod.apply_overrides(cfg, overrides)
    return cfg


def cmd_simulate(args) -> int:
    cfg = _load_cfg(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scenario = configmod.build_scenario(cfg)
    truth, detections = simulate(scenario)
    fileio.write_detections(
        out_dir / "detections.csv", detections, out_dir / "detections_hist.csv"
    )
    fileio.write_ground_truth(out_dir / "ground_truth.csv", truth.frames)
    fileio.write_config(out_dir / "config.txt", cfg)
    n_det = sum(len(v) for v in detections.values())
    print(f"simulated {scenario.frames} frames, {len(scenario.targets)} targets, {n_det} detections -> {out_dir}")
    return 0


def _run_tracker(cfg: dict, detections: dict, n_frames: int | None = None):
    params = configmod.build_model_params(cfg)
    tracker = Tracker(params)
    rows = []
    logs = []
    for frame_rows, frame_log in tracker.run(detections, n_frames):
        rows.extend(frame_rows)
        logs.append(frame_log)
    return tracker, rows, logs


def cmd_track(args) -> int:
    cfg = _load_cfg(args)
    hist_path = args.histograms
    if hist_path is None:
        default_sidecar = Path(args.detections).with_name(
            Path(args.detections).stem + "_hist.csv"
        )
        hist_path = str(default_sidecar)
    detections = fileio.load_detections(
        args.detections,
        histogram_path=hist_path,
        bins=int(cfg["histogram_bins"]),
        n_detectors=int(cfg["num_detectors"]),
    )
    start = time.perf_counter()
    tracker, rows, logs = _run_tracker(cfg, detections)
    elapsed = time.perf_counter() - start
    fileio.write_tracks(args.out, rows)
    if logs:
        converged = sum(1 for l in logs if l.converged)
        mean_iters = sum(l.iterations_used for l in logs) / len(logs)
        log.info(
            "tracked %d frames in %.2fs: %d tracks, mean %.2f iterations, %.1f%% frames converged",
            len(logs), elapsed, len(tracker.tracks), mean_iters, 100.0 * converged / len(logs),
        )
    print(f"wrote {len(rows)} track rows over {len(logs)} frames -> {args.out}")
    return 0


def _evaluation_payload(cfg: dict, truth: dict, tracks: dict) -> dict:
    clear = metrics.clear_mot(truth, tracks, iou_threshold=cfg["clear_iou_threshold"])
    sets = metrics.evaluate_set_metrics(
        truth,
        tracks,
        cutoff=cfg["ospa_cutoff"],
        ospa_order=cfg["ospa_order"],
        omat_order=cfg["omat_order"],
        ground=cfg["set_metric_ground"],
    )
    counts = metrics.count_error_histogram(truth, tracks)
    return {"clear": clear, "set": sets, "counts": counts}


def _format_text_report(payload) -> str:
    clear = payload["clear"]
    sets = payload["set"]
    counts = payload["counts"]
    lines = [
        "tracking evaluation",
        "-------------------",
        f"MOTA       {clear.mota:8.2f} %",
        f"MOTP       {clear.motp:8.2f} %",
        f"precision  {clear.precision:8.2f} %",
        f"recall     {clear.recall:8.2f} %",
        f"FP {clear.fp}  FN {clear.fn}  ID switches {clear.id_switches}  (GT {clear.gt_count})",
        f"OSPA       {sets.mean_ospa:8.2f} px (mean over {sets.frames_total} frames)",
        f"OMAT       {sets.mean_omat:8.2f} px",
        f"Hausdorff  {sets.mean_hausdorff:8.2f} px",
        f"set-metric frames skipped (empty sets): {sets.frames_skipped}",
        f"count error histogram: {dict(sorted(counts.counts.items()))}",
        f"frames with exact count: {100.0 * counts.zero_fraction:.1f} %",
    ]
    return "\n".join(lines)


def _structured_report(payload) -> str:
    return json.dumps(
        {
            "clear": payload["clear"].as_dict(),
            "set": payload["set"].as_dict(),
            "counts": payload["counts"].as_dict(),
        },
        indent=2,
        sort_keys=True,
    )


def cmd_eval(args) -> int:
    cfg = _load_cfg(args)
    truth = fileio.load_ground_truth(args.truth)
    tracks = fileio.load_tracks(args.tracks)
    payload = _evaluation_payload(cfg, truth, tracks)
    text = (
        _structured_report(payload)
        if args.report_format == "structured"
        else _format_text_report(payload)
    )
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="ascii")
        print(f"wrote report -> {args.out}")
    else:
        print(text)
    return 0


def cmd_demo(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = _load_cfg(args)
    scenario = configmod.build_scenario(cfg)
    truth, detections = simulate(scenario)
    fileio.write_detections(out_dir / "detections.csv", detections, out_dir / "detections_hist.csv")
    fileio.write_ground_truth(out_dir / "ground_truth.csv", truth.frames)
    fileio.write_config(out_dir / "config.txt", cfg)

    start = time.perf_counter()
    tracker, rows, logs = _run_tracker(cfg, detections, scenario.frames)
    elapsed = time.perf_counter() - start
    fileio.write_tracks(out_dir / "tracks.csv", rows)

    truth_frames = fileio.load_ground_truth(out_dir / "ground_truth.csv")
    track_frames = fileio.load_tracks(out_dir / "tracks.csv")
    payload = _evaluation_payload(cfg, truth_frames, track_frames)
    (out_dir / "report.txt").write_text(_format_text_report(payload) + "\n", encoding="ascii")
    (out_dir / "report.json").write_text(_structured_report(payload) + "\n", encoding="ascii")

    converged = sum(1 for l in logs if l.converged)
    mean_iters = sum(l.iterations_used for l in logs) / max(len(logs), 1)
    print(f"preset {args.preset}: {scenario.frames} frames tracked in {elapsed:.2f}s")
    print(
        f"tracks {len(tracker.tracks)}, mean iterations {mean_iters:.2f}, "
        f"converged {100.0 * converged / max(len(logs), 1):.1f}% of frames"
    )
    print(_format_text_report(payload))
    print(f"artifacts -> {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vemtrack",
        description="variational multi-object tracker: simulate, track, evaluate",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="per-frame progress logging")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="configuration file (key = value lines)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a configuration key")
    common.add_argument("--seed", type=int, help="override the simulation seed")
    common.add_argument("--max-iters", type=int, help="override the per-frame iteration cap")

    p_sim = sub.add_parser("simulate", parents=[common], help="generate a synthetic scene")
    p_sim.add_argument("--preset", choices=PRESET_NAMES, help="named scenario")
    p_sim.add_argument("--out-dir", required=True)
    p_sim.set_defaults(func=cmd_simulate)

    p_track = sub.add_parser("track", parents=[common], help="run the tracker on a detection file")
    p_track.add_argument("--preset", choices=PRESET_NAMES, help="start from a preset configuration")
    p_track.add_argument("--detections", required=True)
    p_track.add_argument("--histograms", help="histogram sidecar (default: <detections>_hist.csv)")
    p_track.add_argument("--out", required=True, help="output track file")
    p_track.set_defaults(func=cmd_track)

    p_eval = sub.add_parser("eval", parents=[common], help="score tracks against ground truth")
    p_eval.add_argument("--truth", required=True)
    p_eval.add_argument("--tracks", required=True)
    p_eval.add_argument("--out", help="write the report here instead of stdout")
    p_eval.add_argument("--report-format", choices=("text", "structured"), default="text")
    p_eval.set_defaults(func=cmd_eval)

    p_demo = sub.add_parser("demo", parents=[common], help="simulate, track and evaluate a preset")
    p_demo.add_argument("--preset", choices=PRESET_NAMES, required=True)
    p_demo.add_argument("--out-dir", required=True)
    p_demo.set_defaults(func=cmd_demo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
