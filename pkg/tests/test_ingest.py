import numpy as np
import pandas as pd
import pytest

from lanepred.ingest import (
    DIR_LOWER,
    DIR_UPPER,
    FormatError,
    SensorModel,
    apply_sensor_model,
    filter_cars,
    lateral_jerk,
    normalize_direction,
    parse_recording,
    smooth5,
    write_recording,
)
from lanepred.synth import ScenarioConfig, generate_recording


def _write_minimal(tmp_path, *, drop_column=None, corrupt=None):
    frames = np.arange(5)
    rows = {
        "frame": frames, "id": np.ones(5, int),
        "x": 100.0 + 30.0 * frames / 25.0, "y": np.full(5, 20.0),
        "width": np.full(5, 4.0), "height": np.full(5, 2.0),
        "xVelocity": np.full(5, 30.0), "yVelocity": np.zeros(5),
        "xAcceleration": np.zeros(5), "yAcceleration": np.zeros(5),
        "frontSightDistance": np.full(5, 150.0),
        "backSightDistance": np.full(5, 150.0),
        "precedingId": np.zeros(5, int), "followingId": np.zeros(5, int),
        "leftPrecedingId": np.zeros(5, int), "leftAlongsideId": np.zeros(5, int),
        "leftFollowingId": np.zeros(5, int), "rightPrecedingId": np.zeros(5, int),
        "rightAlongsideId": np.zeros(5, int), "rightFollowingId": np.zeros(5, int),
        "laneId": np.full(5, 5, int),
    }
    tracks = pd.DataFrame(rows)
    if drop_column:
        tracks = tracks.drop(columns=[drop_column])
    if corrupt:
        tracks = tracks.astype(object)
        tracks.loc[2, corrupt] = "oops"
    meta = pd.DataFrame([{"id": 1, "initialFrame": 0, "finalFrame": 4,
                          "class": "Car", "drivingDirection": 2}])
    rec = pd.DataFrame([{"id": 7, "frameRate": 25.0,
                         "upperLaneMarkings": "2.0;6.0;10.0",
                         "lowerLaneMarkings": "16.0;20.0;24.0"}])
    paths = (tmp_path / "01_tracks.csv", tmp_path / "01_tracksMeta.csv",
             tmp_path / "01_recordingMeta.csv")
    tracks.to_csv(paths[0], index=False)
    meta.to_csv(paths[1], index=False)
    rec.to_csv(paths[2], index=False)
    return paths


def test_parse_converts_corner_to_center(tmp_path):
    rec = parse_recording(*_write_minimal(tmp_path))
    tr = rec.tracks[0]
    assert tr.x[0] == pytest.approx(102.0)  # corner 100 + width/2
    assert tr.y[0] == pytest.approx(21.0)  # corner 20 + height/2
    assert rec.meta.recording_id == 7
    assert rec.meta.frame_rate == 25.0


def test_parse_missing_column_names_it(tmp_path):
    paths = _write_minimal(tmp_path, drop_column="laneId")
    with pytest.raises(FormatError, match="laneId"):
        parse_recording(*paths)


def test_parse_non_numeric_names_column_and_row(tmp_path):
    paths = _write_minimal(tmp_path, corrupt="yVelocity")
    with pytest.raises(FormatError, match="yVelocity.*row 2"):
        parse_recording(*paths)


def test_normalize_lower_direction_flips_lateral_axis(tmp_path):
    rec = normalize_direction(parse_recording(*_write_minimal(tmp_path)))
    tr = rec.tracks[0]
    assert tr.direction == DIR_LOWER
    assert tr.y[0] == pytest.approx(-21.0)
    # image y = 21 lies in the middle lower lane (20..24 markings 16,20,24)
    # -> canonical marking span is (-24, -20), lane 1 = bottom-most image lane
    assert tr.lane_id[0] == 1
    assert tr.d_y_cl[0] == pytest.approx(-21.0 - (-22.0))
    assert np.all(tr.vx > 0)


def test_normalize_upper_direction_flips_longitudinal_axis():
    cfg = ScenarioConfig(duration=20.0, seed=3, lane_change_rate=0.0)
    rec, _, _ = generate_recording(cfg, 1, 10.0)
    norm = normalize_direction(rec)
    for tr in norm.tracks:
        assert np.all(tr.vx > 0), "travel direction must be canonical +x"
        assert np.all(np.diff(tr.x) > 0)
        geom = norm.meta.geometry[tr.direction]
        assert np.all((tr.lane_id >= 1) & (tr.lane_id <= geom.lane_count))


def test_normalize_is_involution_on_coordinates():
    # applying the canonical transform twice restores the raw image values
    cfg = ScenarioConfig(duration=15.0, seed=4, lane_change_rate=0.0)
    rec, _, _ = generate_recording(cfg, 1, 8.0)
    norm = normalize_direction(rec)
    for raw, can in zip(rec.tracks, norm.tracks):
        if raw.direction == DIR_UPPER:
            assert np.allclose(-can.x, raw.x) and np.allclose(can.y, raw.y)
        else:
            assert np.allclose(can.x, raw.x) and np.allclose(-can.y, raw.y)


def test_sensor_model_admissibility(tmp_path):
    rec = normalize_direction(parse_recording(*_write_minimal(tmp_path)))
    tr = rec.tracks[0]
    tr.front_sight[:2] = 79.9  # just below the sight requirement
    out = apply_sensor_model(rec, SensorModel())
    assert list(out.tracks[0].admissible) == [False, False, True, True, True]


def test_sensor_model_invariant():
    with pytest.raises(ValueError):
        SensorModel(max_range=50.0, min_sight=80.0)


def test_filter_cars_keeps_trucks_as_scene_objects(tmp_path):
    rec = parse_recording(*_write_minimal(tmp_path))
    rec.tracks[0].vehicle_class = "Truck"
    out = filter_cars(rec)
    assert len(out.tracks) == 1  # truck still present in the scene
    assert out.target_ids == frozenset()


def test_round_trip_parse_write_parse_identity(tmp_path):
    cfg = ScenarioConfig(duration=15.0, seed=5)
    rec, _, _ = generate_recording(cfg, 1, 10.0)
    write_recording(rec, tmp_path, "01")
    first = parse_recording(tmp_path / "01_tracks.csv",
                            tmp_path / "01_tracksMeta.csv",
                            tmp_path / "01_recordingMeta.csv")
    write_recording(first, tmp_path / "again", "01")
    second = parse_recording(tmp_path / "again" / "01_tracks.csv",
                             tmp_path / "again" / "01_tracksMeta.csv",
                             tmp_path / "again" / "01_recordingMeta.csv")
    assert len(first.tracks) == len(second.tracks)
    for a, b in zip(first.tracks, second.tracks):
        for name in ("frames", "vx", "vy", "ax", "ay",
                     "front_sight", "back_sight", "raw_lane"):
            assert np.array_equal(getattr(a, name), getattr(b, name)), name
        for name in ("x", "y"):  # corner<->center conversion costs 1 ulp
            assert np.allclose(getattr(a, name), getattr(b, name),
                               rtol=0, atol=1e-9), name


def test_smooth5_constant_and_edges():
    assert np.allclose(smooth5(np.full(10, 3.0)), 3.0)
    out = smooth5(np.arange(10.0))
    # centered average of a linear ramp is exact away from the edges
    assert np.allclose(out[2:-2], np.arange(10.0)[2:-2])


def test_lateral_jerk_of_linear_acceleration():
    fps = 25.0
    ay = 0.4 * np.arange(50) / fps  # slope 0.4 m/s^3
    jy = lateral_jerk(ay, fps)
    assert np.allclose(jy[3:-3], 0.4, atol=1e-9)
