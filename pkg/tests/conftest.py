"""Shared helpers for the test suite."""
import numpy as np
import pytest

from lanepred.ingest import DIR_LOWER, lateral_jerk
from lanepred.types import LaneGeometry, Track

DEFAULT_MARKINGS = np.array([0.0, 4.0, 8.0, 12.0])


def make_geometry(markings=DEFAULT_MARKINGS) -> LaneGeometry:
    return LaneGeometry(np.asarray(markings, dtype=float))


def track_from_kinematics(t, y, vy, ay, geometry=None, fps=25.0,
                          vehicle_id=1, x=None, vx=30.0):
    """Canonical (normalized) track from explicit lateral kinematics.

    Lane ids, lane-center offsets and smoothed jerk are derived the same
    way the ingest stage derives them.
    """
    geometry = geometry or make_geometry()
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    frames = np.round(t * fps).astype(np.int64)
    lane_id = geometry.lane_of(y)
    d_y_cl = y - geometry.center_of(lane_id)
    n = t.size
    if x is None:
        x = vx * t
    return Track(
        vehicle_id=vehicle_id,
        vehicle_class="Car",
        direction=DIR_LOWER,
        frames=frames,
        x=np.asarray(x, dtype=float),
        y=y,
        vx=np.full(n, float(vx)),
        vy=np.asarray(vy, dtype=float),
        ax=np.zeros(n),
        ay=np.asarray(ay, dtype=float),
        length=np.full(n, 4.5),
        height=np.full(n, 1.9),
        front_sight=np.full(n, 200.0),
        back_sight=np.full(n, 200.0),
        lane_id=lane_id,
        d_y_cl=d_y_cl,
        jy=lateral_jerk(np.asarray(ay, dtype=float), fps),
        admissible=np.ones(n, dtype=bool),
    )


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)
