import numpy as np
import pytest

from vemtrack import config as configmod
from vemtrack import fileio
from vemtrack.core import ConfigError
from conftest import make_detection


class TestDetectionFiles:
    def test_round_trip(self, tmp_path, rng):
        detections = {}
        for frame in range(3):
            detections[frame] = [
                make_detection(
                    rng.uniform(10, 500, 4), detector_id=int(rng.integers(0, 2)),
                    frame=frame, bins=8,
                    appearance=None,
                )
                for _ in range(int(rng.integers(1, 4)))
            ]
        det_path = tmp_path / "dets.csv"
        hist_path = tmp_path / "dets_hist.csv"
        fileio.write_detections(det_path, detections, hist_path)
        loaded = fileio.load_detections(det_path, hist_path, bins=8, n_detectors=2)
        assert set(loaded) == set(detections)
        for frame in detections:
            assert len(loaded[frame]) == len(detections[frame])
            for a, b in zip(detections[frame], loaded[frame]):
                assert a.detector_id == b.detector_id
                np.testing.assert_allclose(a.box.as_array(), b.box.as_array(), atol=1e-9)
                np.testing.assert_allclose(a.appearance.bins, b.appearance.bins, atol=1e-7)

    def test_empty_file_is_empty_stream(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("# frame,detector_id,x,y,w,h,conf\n")
        assert fileio.load_detections(path, None, bins=8) == {}

    def test_malformed_line_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("0,0,1,1,10,10,1\nnot,a,valid,detection,row,x,y\n")
        with pytest.raises(ConfigError, match="bad.csv:2"):
            fileio.load_detections(path, None, bins=8)

    def test_decreasing_frames_rejected(self, tmp_path):
        path = tmp_path / "frames.csv"
        path.write_text("5,0,1,1,10,10,1\n3,0,1,1,10,10,1\n")
        with pytest.raises(ConfigError, match="non-decreasing"):
            fileio.load_detections(path, None, bins=8)

    def test_missing_sidecar_uses_uniform(self, tmp_path, caplog):
        path = tmp_path / "d.csv"
        path.write_text("0,0,1,1,10,10,1\n")
        with caplog.at_level("WARNING"):
            loaded = fileio.load_detections(path, tmp_path / "missing.csv", bins=4)
        assert "uniform" in caplog.text
        np.testing.assert_allclose(loaded[0][0].appearance.bins, np.full(4, 0.25))

    def test_sidecar_bin_count_must_match(self, tmp_path):
        det = tmp_path / "d.csv"
        det.write_text("0,0,1,1,10,10,1\n")
        hist = tmp_path / "d_hist.csv"
        hist.write_text("0,0,0.5,0.5\n")
        with pytest.raises(ConfigError, match="expects 8"):
            fileio.load_detections(det, hist, bins=8)

    def test_mot_style_minus_one_detector_id(self, tmp_path):
        path = tmp_path / "mot.csv"
        path.write_text("0,-1,1,1,10,10,0.9\n")
        loaded = fileio.load_detections(path, None, bins=4, n_detectors=1)
        assert loaded[0][0].detector_id == 0

    def test_detector_id_validated(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("0,5,1,1,10,10,1\n")
        with pytest.raises(ConfigError, match="detector id"):
            fileio.load_detections(path, None, bins=4, n_detectors=2)


class TestTrackAndTruthFiles:
    def test_track_round_trip(self, tmp_path, rng):
        rows = [
            fileio.TrackRow(frame, tid, rng.uniform(0, 500, 4), rng.random())
            for frame in range(4)
            for tid in (1, 2)
        ]
        path = tmp_path / "tracks.csv"
        fileio.write_tracks(path, rows)
        loaded = fileio.load_tracks(path)
        assert set(loaded) == {0, 1, 2, 3}
        for row in rows:
            ident, box = [
                (i, b) for i, b in loaded[row.frame] if i == row.track_id
            ][0]
            np.testing.assert_allclose(box, row.box, atol=1e-9)

    def test_truth_round_trip(self, tmp_path, rng):
        frames = {
            f: [(tid, rng.uniform(0, 500, 4)) for tid in (1, 2, 3)] for f in range(3)
        }
        path = tmp_path / "gt.csv"
        fileio.write_ground_truth(path, frames)
        loaded = fileio.load_ground_truth(path)
        for f in frames:
            for (ia, ba), (ib, bb) in zip(frames[f], loaded[f]):
                assert ia == ib
                np.testing.assert_allclose(ba, bb, atol=1e-9)

    def test_deterministic_bytes(self, tmp_path):
        rows = [fileio.TrackRow(0, 1, [1.0, 2.0, 3.0, 4.0], 0.5)]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        fileio.write_tracks(a, rows)
        fileio.write_tracks(b, rows)
        assert a.read_bytes() == b.read_bytes()


class TestConfigFiles:
    def test_round_trip(self, tmp_path):
        cfg = configmod.default_config(num_detectors=2, sim_targets=1)
        cfg["lambda_appearance"] = 3.25
        cfg["detector2_scale_w"] = 0.4
        path = tmp_path / "config.txt"
        fileio.write_config(path, cfg)
        loaded = fileio.load_config(path)
        assert loaded == cfg

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "config.txt"
        path.write_text("definitely_not_a_key = 3\n")
        with pytest.raises(ConfigError, match="unknown configuration key"):
            fileio.load_config(path)

    def test_detector_index_out_of_range(self, tmp_path):
        path = tmp_path / "config.txt"
        path.write_text("num_detectors = 1\ndetector3_scale_w = 0.5\n")
        with pytest.raises(ConfigError, match="out of range"):
            fileio.load_config(path)

    def test_bad_value_reports_line(self, tmp_path):
        path = tmp_path / "config.txt"
        path.write_text("# comment\nmax_tracks = not-a-number\n")
        with pytest.raises(ConfigError, match="config.txt:2"):
            fileio.load_config(path)

    def test_comments_and_blank_lines_ignored(self, tmp_path):
        path = tmp_path / "config.txt"
        path.write_text("\n# comment\nmax_tracks = 7\n\n")
        assert fileio.load_config(path)["max_tracks"] == 7

    def test_every_key_has_documented_help(self):
        text = configmod.config_help()
        for key in configmod.BASE_SCHEMA:
            assert key in text

    def test_overrides(self):
        cfg = configmod.default_config()
        out = configmod.apply_overrides(cfg, ["pi_v=0.8", "max_tracks=9"])
        assert out["pi_v"] == 0.8
        assert out["max_tracks"] == 9
        with pytest.raises(ConfigError):
            configmod.apply_overrides(cfg, ["nope=1"])
