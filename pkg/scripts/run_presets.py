#!/usr/bin/env python3
"""Run every bundled preset end to end and print a comparison table.

Each preset is simulated, tracked and evaluated into its own subdirectory
of the output directory (CLI demo equivalent, all presets at once).
"""

import argparse
import sys
import time
from pathlib import Path

from vemtrack import config as configmod
from vemtrack import fileio, metrics
from vemtrack.engine import Tracker
from vemtrack.simulator import PRESET_NAMES, simulate


def run_preset(name: str, out_dir: Path) -> dict:
    cfg = configmod.preset_config(name)
    scenario = configmod.build_scenario(cfg)
    truth, detections = simulate(scenario)
    params = configmod.build_model_params(cfg)
    tracker = Tracker(params)
    rows, logs = [], []
    start = time.perf_counter()
    for frame in range(scenario.frames):
        frame_rows, frame_log = tracker.step(frame, detections.get(frame, []))
        rows.extend(frame_rows)
        logs.append(frame_log)
    elapsed = time.perf_counter() - start

    out_dir.mkdir(parents=True, exist_ok=True)
    fileio.write_detections(out_dir / "detections.csv", detections, out_dir / "detections_hist.csv")
    fileio.write_ground_truth(out_dir / "ground_truth.csv", truth.frames)
    fileio.write_tracks(out_dir / "tracks.csv", rows)
    fileio.write_config(out_dir / "config.txt", cfg)

    hypotheses = fileio.load_tracks(out_dir / "tracks.csv")
    clear = metrics.clear_mot(truth.frames, hypotheses, cfg["clear_iou_threshold"])
    sets = metrics.evaluate_set_metrics(
        truth.frames, hypotheses, cutoff=cfg["ospa_cutoff"], ospa_order=cfg["ospa_order"]
    )
    counts = metrics.count_error_histogram(truth.frames, hypotheses)
    return {
        "preset": name,
        "frames": scenario.frames,
        "tracks": len(tracker.tracks),
        "seconds": elapsed,
        "mean_iters": sum(l.iterations_used for l in logs) / len(logs),
        "converged": 100.0 * sum(1 for l in logs if l.converged) / len(logs),
        "mota": clear.mota,
        "motp": clear.motp,
        "precision": clear.precision,
        "recall": clear.recall,
        "id_switches": clear.id_switches,
        "ospa": sets.mean_ospa,
        "omat": sets.mean_omat,
        "hausdorff": sets.mean_hausdorff,
        "count_ok": 100.0 * counts.zero_fraction,
    }


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="preset_runs")
    args = parser.parse_args()

    results = [run_preset(name, Path(args.out_dir) / name) for name in PRESET_NAMES]
    columns = [
        ("preset", "{preset}"), ("frames", "{frames}"), ("tracks", "{tracks}"),
        ("time[s]", "{seconds:.2f}"), ("iters", "{mean_iters:.2f}"),
        ("conv%", "{converged:.1f}"), ("MOTA", "{mota:.1f}"), ("MOTP", "{motp:.1f}"),
        ("Pr", "{precision:.1f}"), ("Rc", "{recall:.1f}"), ("IDS", "{id_switches}"),
        ("OSPA", "{ospa:.1f}"), ("OMAT", "{omat:.1f}"), ("Haus", "{hausdorff:.1f}"),
        ("count-ok%", "{count_ok:.1f}"),
    ]
    header = "  ".join(f"{name:>9}" for name, _ in columns)
    print(header)
    print("-" * len(header))
    for row in results:
        print("  ".join(f"{fmt.format(**row):>9}" for _, fmt in columns))
    return 0


if __name__ == "__main__":
    sys.exit(main())
