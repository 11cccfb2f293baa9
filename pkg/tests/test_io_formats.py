"""File formats: CSV logs, PGM masks, geodetic helper, config JSON, reports."""
import json
import math

import numpy as np
import pytest

from swarmtrack.fusion import SensorRecord
from swarmtrack.geometry import CameraPose
from swarmtrack.io_formats import (
    FormatError,
    METERS_PER_DEG_LAT,
    geodetic_to_local,
    mask_sequence_paths,
    quantize_mask,
    read_binary_mask,
    read_mask,
    read_mask_sequence,
    read_poses,
    read_sensor_log,
    read_trajectory,
    scenario_config_from_json,
    scenario_config_to_json,
    write_mask,
    write_poses,
    write_report,
    write_sensor_log,
    write_trajectory,
)
from swarmtrack.shapes import BinaryMask
from swarmtrack.synth import write_scenario
from swarmtrack.tracker import SoftMask
from tests.conftest import small_scenario


def sample_log():
    recs = []
    for i in range(4):
        recs.append(SensorRecord(
            frame=i,
            t=i / 15.0,
            gps=(1.0 + i * 0.1, -2.0, 60.0 + 0.01 * i),
            vel=(0.31, -0.02, 0.001 * i),
            pitch=0.5,
            yaw=12.0 + i,
            roll=-0.25,
        ))
    return recs


class TestSensorLog:
    def test_round_trip_is_exact(self, tmp_path):
        path = tmp_path / "sensors.csv"
        log = sample_log()
        write_sensor_log(log, path)
        assert read_sensor_log(path) == log

    def test_header_only_rejected(self, tmp_path):
        path = tmp_path / "sensors.csv"
        write_sensor_log([], path)
        with pytest.raises(FormatError, match="empty log"):
            read_sensor_log(path)

    def test_non_increasing_time_names_the_line(self, tmp_path):
        path = tmp_path / "sensors.csv"
        log = sample_log()
        log[2] = SensorRecord(frame=2, t=log[1].t, gps=log[2].gps,
                              vel=log[2].vel, pitch=0, yaw=0, roll=0)
        write_sensor_log(log, path)
        with pytest.raises(FormatError, match=r":4: time"):
            read_sensor_log(path)

    def test_missing_column_rejected(self, tmp_path):
        path = tmp_path / "sensors.csv"
        write_sensor_log(sample_log(), path)
        lines = path.read_text().splitlines()
        lines[2] = ",".join(lines[2].split(",")[:-1])
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(FormatError, match=r":3: expected 11 columns, got 10"):
            read_sensor_log(path)

    def test_non_numeric_field_names_line_and_column(self, tmp_path):
        path = tmp_path / "sensors.csv"
        write_sensor_log(sample_log(), path)
        text = path.read_text().replace("0.31", "fast", 1)
        path.write_text(text)
        with pytest.raises(FormatError, match=r":2: column 'vx_mps'"):
            read_sensor_log(path)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "sensors.csv"
        path.write_text("frame,time\n0,0.0\n")
        with pytest.raises(FormatError, match="bad header"):
            read_sensor_log(path)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(FormatError, match="no such file"):
            read_sensor_log(tmp_path / "nope.csv")


class TestPoses:
    def test_round_trip_is_exact(self, tmp_path):
        poses = [
            CameraPose(0.0, 0.0, 50.0),
            CameraPose(1.5, -0.25, 50.1, pitch=2.0, yaw=91.0, roll=-0.5),
        ]
        path = tmp_path / "poses.csv"
        write_poses(poses, fps=15.0, path=path)
        assert read_poses(path) == poses

    def test_frames_must_be_consecutive(self, tmp_path):
        path = tmp_path / "poses.csv"
        write_poses([CameraPose(0, 0, 10), CameraPose(1, 0, 10)], 10.0, path)
        text = path.read_text().replace("\n1,", "\n3,")
        path.write_text(text)
        with pytest.raises(FormatError, match="expected consecutive 1"):
            read_poses(path)

    def test_header_only_rejected(self, tmp_path):
        path = tmp_path / "poses.csv"
        write_poses([], 10.0, path)
        with pytest.raises(FormatError, match="no poses"):
            read_poses(path)


class TestTrajectory:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "traj.csv"
        uv = np.array([[10.5, 20.25], [11.0, 21.0]])
        world = np.array([[1.0, 2.0], [1.1, 2.1]])
        lost = np.array([False, True])
        write_trajectory([0, 4], uv, world, lost, path)
        out = read_trajectory(path)
        np.testing.assert_array_equal(out["frame"], [0, 4])
        np.testing.assert_array_equal(out["uv"], uv)
        np.testing.assert_array_equal(out["world"], world)
        np.testing.assert_array_equal(out["lost"], lost)

    def test_frames_must_increase(self, tmp_path):
        path = tmp_path / "traj.csv"
        write_trajectory(
            [0, 1], np.zeros((2, 2)), np.zeros((2, 2)), np.zeros(2), path
        )
        text = path.read_text().replace("\n1,", "\n0,")
        path.write_text(text)
        with pytest.raises(FormatError, match="does not increase"):
            read_trajectory(path)

    def test_lost_flag_must_be_binary(self, tmp_path):
        path = tmp_path / "traj.csv"
        write_trajectory([0], np.zeros((1, 2)), np.zeros((1, 2)), np.ones(1), path)
        path.write_text(path.read_text().replace(",1\n", ",2\n"))
        with pytest.raises(FormatError, match="lost_flag"):
            read_trajectory(path)

    def test_inconsistent_arrays_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="inconsistent"):
            write_trajectory(
                [0, 1], np.zeros((3, 2)), np.zeros((2, 2)), np.zeros(2),
                tmp_path / "x.csv",
            )


class TestMasks:
    def test_byte_exact_round_trip(self, tmp_path):
        values = np.arange(256, dtype=float).reshape(16, 16) / 255.0
        path = tmp_path / "m.pgm"
        write_mask(SoftMask(values), path)
        out = read_mask(path)
        np.testing.assert_array_equal(out.values, values)

    def test_quantization_rounds_half_up(self):
        values = np.array([0.0, 1.0, 0.5, 127.4 / 255.0, 127.5 / 255.0])
        np.testing.assert_array_equal(
            quantize_mask(values), [0, 255, 128, 127, 128]
        )

    def test_binary_mask_writes_full_scale(self, tmp_path):
        bits = np.zeros((4, 4), dtype=bool)
        bits[1, 2] = True
        path = tmp_path / "b.pgm"
        write_mask(BinaryMask(bits), path)
        raw = path.read_bytes()
        assert raw.startswith(b"P5\n4 4\n255\n")
        np.testing.assert_array_equal(read_binary_mask(path).bits, bits)

    def test_all_zero_mask_round_trip(self, tmp_path):
        path = tmp_path / "z.pgm"
        write_mask(SoftMask(np.zeros((4, 4))), path)
        assert not read_mask(path).values.any()

    def test_comment_in_header_is_skipped(self, tmp_path):
        path = tmp_path / "c.pgm"
        path.write_bytes(b"P5\n# made elsewhere\n2 2\n255\n" + bytes([0, 255, 128, 64]))
        out = read_mask(path)
        assert out.values[0, 1] == 1.0
        assert out.values[1, 0] == pytest.approx(128 / 255)

    def test_wrong_magic_rejected(self, tmp_path):
        path = tmp_path / "w.pgm"
        path.write_bytes(b"P2\n2 2\n255\n0 0 0 0")
        with pytest.raises(FormatError, match="bad magic"):
            read_mask(path)

    def test_truncated_payload_rejected(self, tmp_path):
        path = tmp_path / "t.pgm"
        write_mask(SoftMask(np.ones((4, 4))), path)
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(FormatError, match="truncated"):
            read_mask(path)

    def test_unsupported_maxval_rejected(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P5\n1 1\n99\n\x00")
        with pytest.raises(FormatError, match="maxval"):
            read_mask(path)

    def test_sequence_must_be_contiguous(self, tmp_path):
        for i in (0, 1, 3):
            write_mask(SoftMask(np.zeros((2, 2))), tmp_path / f"{i:06d}.pgm")
        with pytest.raises(FormatError, match="000002.pgm"):
            mask_sequence_paths(tmp_path)

    def test_sequence_reads_in_frame_order(self, tmp_path):
        for i in range(3):
            write_mask(SoftMask(np.full((2, 2), i / 255.0)), tmp_path / f"{i:06d}.pgm")
        seq = list(read_mask_sequence(tmp_path))
        assert [m.values[0, 0] for m in seq] == [0.0, 1 / 255, 2 / 255]

    def test_empty_directory_rejected(self, tmp_path):
        with pytest.raises(FormatError, match="no .pgm"):
            mask_sequence_paths(tmp_path)
        with pytest.raises(FormatError, match="not a directory"):
            mask_sequence_paths(tmp_path / "missing")


class TestGeodetic:
    def test_origin_maps_to_zero(self):
        p = geodetic_to_local(47.5, 8.25, 430.0, 47.5, 8.25)
        assert (p.x, p.y, p.z) == (0.0, 0.0, 430.0)

    def test_latitude_degree_scale(self):
        p = geodetic_to_local(47.5 + 1e-5, 8.25, 0.0, 47.5, 8.25)
        assert p.y == pytest.approx(1e-5 * METERS_PER_DEG_LAT)
        assert p.x == 0.0

    def test_longitude_shrinks_with_latitude(self):
        near_equator = geodetic_to_local(0.0, 1e-5, 0.0, 0.0, 0.0)
        at_60 = geodetic_to_local(60.0, 1e-5, 0.0, 60.0, 0.0)
        assert at_60.x == pytest.approx(
            near_equator.x * math.cos(math.radians(60.0))
        )

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="lat"):
            geodetic_to_local(91.0, 0.0, 0.0, 0.0, 0.0)
        with pytest.raises(ValueError, match="lon"):
            geodetic_to_local(0.0, 181.0, 0.0, 0.0, 0.0)


class TestScenarioJson:
    def test_round_trip_preserves_config(self):
        config = scenario_config_from_json(json.dumps(small_scenario()))
        again = scenario_config_from_json(scenario_config_to_json(config))
        assert again == config

    def test_unknown_key_rejected(self):
        doc = small_scenario()
        doc["blur"] = 1.0
        with pytest.raises(FormatError, match="blur: unknown key"):
            scenario_config_from_json(json.dumps(doc))
        doc = small_scenario()
        doc["drone"]["zoom"] = 2
        with pytest.raises(FormatError, match="drone.zoom: unknown key"):
            scenario_config_from_json(json.dumps(doc))

    def test_missing_required_key_rejected(self):
        doc = small_scenario()
        del doc["shape"]
        with pytest.raises(FormatError, match="shape: missing required"):
            scenario_config_from_json(json.dumps(doc))

    def test_invalid_json_rejected(self):
        with pytest.raises(FormatError, match="not valid JSON"):
            scenario_config_from_json("{nope")

    def test_non_integer_duration_rejected(self):
        doc = small_scenario()
        doc["duration"] = 45.5
        with pytest.raises(FormatError, match="duration: must be an integer"):
            scenario_config_from_json(json.dumps(doc))

    def test_constraint_violations_surface_with_field_path(self):
        doc = small_scenario()
        doc["drone"]["altitude"] = 0.0
        with pytest.raises(FormatError, match="drone.altitude"):
            scenario_config_from_json(json.dumps(doc))


class TestReports:
    def test_text_form_is_sorted_flat_key_values(self, tmp_path):
        report = {
            "sdr": {"r30": 97.5, "r10": 80.0},
            "frames": 900,
            "degenerate": False,
            "label": "run1",
        }
        text = write_report(report, tmp_path)
        assert text.splitlines() == [
            "degenerate=0",
            "frames=900",
            "label=run1",
            "sdr.r10=80.0",
            "sdr.r30=97.5",
        ]
        loaded = json.loads((tmp_path / "report.json").read_text())
        assert loaded == report

    def test_unserializable_value_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="not serializable"):
            write_report({"bad": [1, 2]}, tmp_path)


class TestScenarioDirectory:
    def test_layout_and_determinism(self, tmp_path):
        config = scenario_config_from_json(json.dumps(small_scenario(duration=6)))
        a = tmp_path / "a"
        b = tmp_path / "b"
        write_scenario(config, a)
        write_scenario(config, b)
        names = sorted(p.relative_to(a).as_posix() for p in a.rglob("*") if p.is_file())
        assert names == (
            ["gt_masks/%06d.pgm" % i for i in range(6)]
            + ["gt_poses.csv", "gt_track.csv"]
            + ["masks/%06d.pgm" % i for i in range(6)]
            + ["scenario.json", "sensors.csv"]
        )
        for name in names:
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_written_track_matches_in_memory_generate(self, tmp_path):
        from swarmtrack.synth import generate
        config = scenario_config_from_json(json.dumps(small_scenario(duration=6)))
        write_scenario(config, tmp_path / "out")
        scen = generate(config)
        track = read_trajectory(tmp_path / "out" / "gt_track.csv")
        np.testing.assert_allclose(track["uv"], scen.gt_track2d, atol=1e-12)
        for i in range(6):
            disk = read_mask(tmp_path / "out" / "masks" / f"{i:06d}.pgm")
            np.testing.assert_array_equal(
                disk.values, quantize_mask(scen.masks[i].values) / 255.0
            )
