#!/usr/bin/env python3
"""Plot the per-frame count-error histogram and the visibility traces of a
tracked run (simulates and tracks a preset if no run directory is given).
"""

import argparse
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from vemtrack import config as configmod
from vemtrack import fileio, metrics
from vemtrack.engine import Tracker
from vemtrack.simulator import PRESET_NAMES, simulate


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--preset", choices=PRESET_NAMES, default="cpd-like")
    parser.add_argument("--out", default="count_errors.png")
    args = parser.parse_args()

    cfg = configmod.preset_config(args.preset)
    scenario = configmod.build_scenario(cfg)
    truth, detections = simulate(scenario)
    tracker = Tracker(configmod.build_model_params(cfg))
    hypotheses = {}
    visibility = {}
    for frame in range(scenario.frames):
        rows, _ = tracker.step(frame, detections.get(frame, []))
        hypotheses[frame] = [(r.track_id, r.box) for r in rows]
        for track in tracker.tracks:
            visibility.setdefault(track.id, {})[frame] = track.visibility_posterior

    hist = metrics.count_error_histogram(truth.frames, hypotheses)

    fig, (ax_hist, ax_vis) = plt.subplots(1, 2, figsize=(11, 4))
    errors = sorted(hist.counts)
    ax_hist.bar(errors, [hist.counts[e] for e in errors], color="#4878b0")
    ax_hist.set_xlabel("absolute count error per frame")
    ax_hist.set_ylabel("frames")
    ax_hist.set_title(
        f"{args.preset}: exact count on {100 * hist.zero_fraction:.1f}% of frames"
    )
    ax_hist.set_xticks(errors)

    for track_id, trace in sorted(visibility.items()):
        frames = sorted(trace)
        ax_vis.plot(frames, [trace[f] for f in frames], label=f"track {track_id}")
    ax_vis.set_xlabel("frame")
    ax_vis.set_ylabel("visibility posterior")
    ax_vis.set_ylim(-0.05, 1.05)
    ax_vis.axhline(0.5, color="gray", linestyle=":", linewidth=1)
    ax_vis.legend(loc="lower right", fontsize=8)
    ax_vis.set_title("track visibility over time")

    fig.tight_layout()
    fig.savefig(args.out, dpi=130)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
