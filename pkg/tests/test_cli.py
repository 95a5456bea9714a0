import json

import numpy as np
import pytest

from vemtrack import config as configmod
from vemtrack import fileio
from vemtrack.cli import main


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def tiny_scene(tmp_path_factory):
    """A short two-target scene shared by the CLI tests."""
    out = tmp_path_factory.mktemp("tiny")
    code = run_cli(
        "simulate",
        "--preset", "cpd-like",
        "--set", "sim_frames=40",
        "--set", "target3_birth_frame=10",
        "--out-dir", str(out),
    )
    assert code == 0
    return out


class TestSimulate:
    def test_writes_all_artifacts(self, tiny_scene):
        for name in ("detections.csv", "detections_hist.csv", "ground_truth.csv", "config.txt"):
            assert (tiny_scene / name).exists()

    def test_written_config_reloads(self, tiny_scene):
        cfg = fileio.load_config(tiny_scene / "config.txt")
        assert cfg["sim_frames"] == 40

    def test_seed_flag_changes_output(self, tmp_path):
        a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
        for out, seed in ((a, "1"), (b, "2"), (c, "1")):
            assert run_cli(
                "simulate", "--preset", "cpd-like", "--set", "sim_frames=10",
                "--seed", seed, "--out-dir", str(out),
            ) == 0
        assert (a / "detections.csv").read_bytes() == (c / "detections.csv").read_bytes()
        assert (a / "detections.csv").read_bytes() != (b / "detections.csv").read_bytes()


class TestTrack:
    def test_tracks_the_tiny_scene(self, tiny_scene, tmp_path):
        out = tmp_path / "tracks.csv"
        code = run_cli(
            "track",
            "--config", str(tiny_scene / "config.txt"),
            "--detections", str(tiny_scene / "detections.csv"),
            "--out", str(out),
        )
        assert code == 0
        rows = fileio.load_tracks(out)
        assert rows  # something was tracked

    def test_empty_detections_give_empty_tracks(self, tmp_path):
        det = tmp_path / "empty.csv"
        det.write_text("# frame,detector_id,x,y,w,h,conf\n")
        out = tmp_path / "tracks.csv"
        code = run_cli("track", "--detections", str(det), "--out", str(out))
        assert code == 0
        assert fileio.load_tracks(out) == {}

    def test_missing_file_is_a_clean_error(self, tmp_path):
        code = run_cli(
            "track", "--detections", str(tmp_path / "absent.csv"),
            "--out", str(tmp_path / "t.csv"),
        )
        assert code != 0

    def test_bad_override_is_a_clean_error(self, tmp_path):
        det = tmp_path / "empty.csv"
        det.write_text("")
        code = run_cli(
            "track", "--detections", str(det), "--out", str(tmp_path / "t.csv"),
            "--set", "no_such_key=1",
        )
        assert code != 0


class TestEval:
    def test_truth_against_itself_is_perfect(self, tiny_scene, tmp_path, capsys):
        truth = tiny_scene / "ground_truth.csv"
        frames = fileio.load_ground_truth(truth)
        rows = [
            fileio.TrackRow(f, tid, box, 1.0)
            for f, entries in frames.items()
            for tid, box in entries
        ]
        tracks = tmp_path / "as_tracks.csv"
        fileio.write_tracks(tracks, rows)
        report = tmp_path / "report.json"
        code = run_cli(
            "eval", "--truth", str(truth), "--tracks", str(tracks),
            "--report-format", "structured", "--out", str(report),
        )
        assert code == 0
        payload = json.loads(report.read_text())
        assert payload["clear"]["mota"] == 100.0
        assert payload["set"]["mean_ospa"] == pytest.approx(0.0, abs=1e-9)
        assert payload["counts"]["zero_fraction"] == 1.0

    def test_text_report_to_stdout(self, tiny_scene, tmp_path, capsys):
        truth = tiny_scene / "ground_truth.csv"
        frames = fileio.load_ground_truth(truth)
        rows = [
            fileio.TrackRow(f, tid, box, 1.0)
            for f, entries in frames.items()
            for tid, box in entries
        ]
        tracks = tmp_path / "t.csv"
        fileio.write_tracks(tracks, rows)
        code = run_cli("eval", "--truth", str(truth), "--tracks", str(tracks))
        assert code == 0
        out = capsys.readouterr().out
        assert "MOTA" in out and "OSPA" in out


class TestDemo:
    def test_demo_smoke(self, tmp_path, capsys):
        out = tmp_path / "demo"
        code = run_cli(
            "demo", "--preset", "cpd-like",
            "--set", "sim_frames=30",
            "--set", "target3_birth_frame=10",
            "--out-dir", str(out),
        )
        assert code == 0
        for name in ("detections.csv", "tracks.csv", "report.txt", "report.json"):
            assert (out / name).exists()
        assert "MOTA" in capsys.readouterr().out


class TestCausalityAndDeterminism:
    def test_repeat_runs_are_byte_identical(self, tiny_scene, tmp_path):
        outs = []
        for name in ("one.csv", "two.csv"):
            out = tmp_path / name
            assert run_cli(
                "track",
                "--config", str(tiny_scene / "config.txt"),
                "--detections", str(tiny_scene / "detections.csv"),
                "--out", str(out),
            ) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_truncated_input_reproduces_prefix(self, tiny_scene, tmp_path):
        cutoff = 25
        full_out = tmp_path / "full.csv"
        assert run_cli(
            "track",
            "--config", str(tiny_scene / "config.txt"),
            "--detections", str(tiny_scene / "detections.csv"),
            "--out", str(full_out),
        ) == 0

        def truncate(src, dst):
            lines = []
            for line in src.read_text().splitlines():
                if line.startswith("#"):
                    lines.append(line)
                    continue
                if int(line.split(",")[0]) < cutoff:
                    lines.append(line)
            dst.write_text("\n".join(lines) + "\n")

        short_det = tmp_path / "short.csv"
        short_hist = tmp_path / "short_hist.csv"
        truncate(tiny_scene / "detections.csv", short_det)
        truncate(tiny_scene / "detections_hist.csv", short_hist)
        short_out = tmp_path / "short_tracks.csv"
        assert run_cli(
            "track",
            "--config", str(tiny_scene / "config.txt"),
            "--detections", str(short_det),
            "--histograms", str(short_hist),
            "--out", str(short_out),
        ) == 0

        full_prefix = [
            line for line in full_out.read_text().splitlines()
            if line.startswith("#") or int(line.split(",")[0]) < cutoff
        ]
        short_lines = short_out.read_text().splitlines()
        assert short_lines == full_prefix
