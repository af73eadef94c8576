import numpy as np
import pytest

from lanepred.types import (
    NO_EVENT,
    LaneChangeEvent,
    LaneGeometry,
    ManeuverLabel,
    MixturePrediction,
    Recording,
    RecordingMeta,
    validate,
)
from conftest import make_geometry, track_from_kinematics


def test_no_event_sentinel_orders_after_any_finite_time():
    assert NO_EVENT > 1e12
    assert min(NO_EVENT, 3.0) == 3.0


def test_lane_geometry_basics():
    geom = make_geometry([0.0, 4.0, 8.0])
    assert geom.lane_count == 2
    assert np.allclose(geom.lane_centers, [2.0, 6.0])
    assert geom.lane_of(1.0) == 1
    assert geom.lane_of(5.0) == 2
    # clipping outside the marked region
    assert geom.lane_of(-1.0) == 1
    assert geom.lane_of(9.5) == 2
    assert geom.lane_width(1) == 4.0


def test_lane_geometry_rejects_bad_markings():
    with pytest.raises(ValueError):
        LaneGeometry(np.array([4.0, 0.0]))
    with pytest.raises(ValueError):
        LaneGeometry(np.array([1.0]))


def test_recording_meta_validation():
    geom = {2: make_geometry()}
    with pytest.raises(ValueError):
        RecordingMeta(1, 0.0, 400.0, geom)
    with pytest.raises(ValueError):
        RecordingMeta(1, 25.0, -1.0, geom)


def test_lane_change_event_invariant():
    with pytest.raises(ValueError):
        LaneChangeEvent(1, 1, "left", t_cross=5.0, t_begin=6.0, t_end=7.0,
                        duration=1.0, max_vy=1.0, traffic_density=0.0)
    # truncated events skip the ordering check
    LaneChangeEvent(1, 1, "left", t_cross=5.0, t_begin=4.0, t_end=4.5,
                    duration=0.5, max_vy=1.0, traffic_density=0.0, truncated=True)


def test_mixture_prediction_invariants():
    ok = MixturePrediction(
        weights=np.array([0.5, 0.5]),
        means=np.zeros((2, 2)),
        covariances=np.stack([np.eye(2)] * 2),
        component_maneuver=np.array([0, 1]),
        gate_probs=np.array([0.2, 0.5, 0.3]),
    )
    assert ok.weights.sum() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        MixturePrediction(np.array([0.7, 0.5]), np.zeros((2, 2)),
                          np.stack([np.eye(2)] * 2), np.array([0, 1]),
                          np.array([0.2, 0.5, 0.3]))
    bad_cov = np.stack([np.eye(2), np.array([[1.0, 2.0], [2.0, 1.0]])])
    with pytest.raises(ValueError):
        MixturePrediction(np.array([0.5, 0.5]), np.zeros((2, 2)), bad_cov,
                          np.array([0, 1]), np.array([0.2, 0.5, 0.3]))


def _recording_of(tracks):
    meta = RecordingMeta(1, 25.0, 400.0, {2: make_geometry()})
    return Recording(meta=meta, tracks=tracks, normalized=True)


def test_validate_clean_track():
    t = np.arange(100) / 25.0
    tr = track_from_kinematics(t, np.full(100, 2.0), np.zeros(100), np.zeros(100))
    assert validate(_recording_of([tr])) == []


def test_validate_reports_nonfinite_and_frame_order():
    t = np.arange(100) / 25.0
    tr = track_from_kinematics(t, np.full(100, 2.0), np.zeros(100), np.zeros(100))
    tr.y[10] = np.nan
    tr.frames[50] = tr.frames[49]
    violations = validate(_recording_of([tr]))
    assert any("non-finite y" in v for v in violations)
    assert any("frame order" in v for v in violations)


def test_maneuver_label_codes():
    assert [int(m) for m in (ManeuverLabel.LCL, ManeuverLabel.FLW,
                             ManeuverLabel.LCR, ManeuverLabel.NDEF)] == [0, 1, 2, 3]
