"""Scene features: environment model, traffic density, lane-change
detection and boundaries, and the classifier feature vector."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .ingest import SensorModel
from .types import (
    N_SLOTS,
    SLOT_NAMES,
    LaneChangeEvent,
    LaneGeometry,
    Recording,
    RecordingMeta,
    SceneContext,
    Track,
)

# Thresholds of the lane-change begin/end condition: the maneuver is
# considered active while any of |d_y_cl|, |v_y|, |a_y|, |j_y| exceeds
# its threshold (tuned on visual inspection of lane-change situations).
LC_D_THRESHOLD = 1.0  # m
LC_V_THRESHOLD = 0.1  # m/s
LC_A_THRESHOLD = 0.1  # m/s^2
LC_J_THRESHOLD = 0.1  # m/s^3


# ---------------------------------------------------------------------------
# Feature schema

@dataclass(frozen=True)
class FeatureField:
    index: int
    name: str
    unit: str


class FeatureSchema:
    """Self-describing ordered feature layout (name, unit, index)."""

    def __init__(self, fields: Sequence[FeatureField]):
        self.fields = tuple(fields)
        self.names = tuple(f.name for f in self.fields)

    def __len__(self) -> int:
        return len(self.fields)

    def index_of(self, name: str) -> int:
        return self.names.index(name)

    def to_json(self) -> str:
        return json.dumps(
            [{"index": f.index, "name": f.name, "unit": f.unit} for f in self.fields],
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "FeatureSchema":
        return cls([FeatureField(d["index"], d["name"], d["unit"]) for d in json.loads(text)])

    @classmethod
    def default(cls) -> "FeatureSchema":
        base = [
            ("d_y_cl", "m"),
            ("v_y", "m/s"),
            ("a_y", "m/s^2"),
            ("v_x", "m/s"),
            ("lane_id", "1"),
            ("marking_left_crossable", "bool"),
            ("marking_right_crossable", "bool"),
        ]
        for slot in SLOT_NAMES:
            base.append((f"{slot}_distance", "m"))
            base.append((f"{slot}_dv", "m/s"))
        return cls([FeatureField(i, n, u) for i, (n, u) in enumerate(base)])


# ---------------------------------------------------------------------------
# Frame snapshots and the environment model

@dataclass
class FrameSnapshot:
    """All vehicles of one driving direction at one frame."""

    frame: int
    ids: np.ndarray  # vehicle ids
    rows: np.ndarray  # per-vehicle sample index into its track
    x: np.ndarray
    vx: np.ndarray
    lane_id: np.ndarray
    half_len: np.ndarray


class FrameIndex:
    """Per-direction frame -> snapshot lookup for one recording."""

    def __init__(self, recording: Recording, direction: int):
        if not recording.normalized:
            raise ValueError("recording must be direction-normalized first")
        self.recording = recording
        self.direction = direction
        self.tracks = recording.tracks_by_direction(direction)
        self._by_frame: Dict[int, List[Tuple[int, int]]] = {}
        for ti, tr in enumerate(self.tracks):
            for ri, fr in enumerate(tr.frames):
                self._by_frame.setdefault(int(fr), []).append((ti, ri))

    @property
    def frames(self) -> List[int]:
        return sorted(self._by_frame)

    def snapshot(self, frame: int) -> FrameSnapshot:
        entries = self._by_frame.get(int(frame), [])
        ids = np.array([self.tracks[ti].vehicle_id for ti, _ in entries], dtype=np.int64)
        rows = np.array([ri for _, ri in entries], dtype=np.int64)
        x = np.array([self.tracks[ti].x[ri] for ti, ri in entries])
        vx = np.array([self.tracks[ti].vx[ri] for ti, ri in entries])
        lane = np.array([self.tracks[ti].lane_id[ri] for ti, ri in entries], dtype=np.int64)
        half_len = np.array([0.5 * self.tracks[ti].length[ri] for ti, ri in entries])
        return FrameSnapshot(int(frame), ids, rows, x, vx, lane, half_len)

    def vehicle_count(self, frame: int) -> int:
        return len(self._by_frame.get(int(frame), []))


def compute_traffic_density(snapshot: FrameSnapshot, meta: RecordingMeta,
                            direction: Optional[int] = None) -> float:
    """Vehicles per kilometer and lane for one directional snapshot."""
    if direction is None:
        lane_counts = [g.lane_count for g in meta.geometry.values()]
        n_lanes = lane_counts[0] if lane_counts else 0
    else:
        n_lanes = meta.geometry[direction].lane_count
    if n_lanes <= 0:
        raise ValueError("lane count must be positive")
    if meta.segment_length <= 0:
        raise ValueError("segment length must be positive")
    return snapshot.ids.size / ((meta.segment_length / 1000.0) * n_lanes)


def density_per_frame(index: FrameIndex) -> Dict[int, float]:
    meta = index.recording.meta
    n_lanes = meta.geometry[index.direction].lane_count
    km_lanes = (meta.segment_length / 1000.0) * n_lanes
    return {fr: index.vehicle_count(fr) / km_lanes for fr in index.frames}


def build_environment_model(snapshot: FrameSnapshot, target_id: int,
                            sensor: SensorModel,
                            geometry: LaneGeometry,
                            traffic_density: float = 0.0,
                            front_sight: float = np.inf,
                            back_sight: float = np.inf) -> SceneContext:
    """Relational 8-slot description of the scene around one target.

    Each slot holds the nearest vehicle by longitudinal gap; absent and
    out-of-range neighbors both default to (max_range, 0).
    """
    pos = np.flatnonzero(snapshot.ids == target_id)
    if pos.size == 0:
        raise ValueError(f"target vehicle {target_id} absent from snapshot")
    i = int(pos[0])
    dist, dv, present = kernels.neighbor_slots(
        snapshot.x, snapshot.vx, snapshot.lane_id, snapshot.half_len, sensor.max_range
    )
    lane = int(snapshot.lane_id[i])
    n_lanes = geometry.lane_count
    return SceneContext(
        slot_distance=dist[i],
        slot_dv=dv[i],
        slot_present=present[i].astype(bool),
        marking_left_crossable=lane < n_lanes,  # outermost markings are solid
        marking_right_crossable=lane > 1,
        traffic_density=traffic_density,
        front_sight=front_sight,
        back_sight=back_sight,
    )


# ---------------------------------------------------------------------------
# Lane-change detection and boundaries

def _maneuver_condition(track: Track) -> np.ndarray:
    return (
        (np.abs(track.d_y_cl) >= LC_D_THRESHOLD)
        | (np.abs(track.vy) >= LC_V_THRESHOLD)
        | (np.abs(track.ay) >= LC_A_THRESHOLD)
        | (np.abs(track.jy) >= LC_J_THRESHOLD)
    )


def compute_lc_boundaries(track: Track, t_cross: float, frame_rate: float):
    """Begin/end of the maneuver around a crossing instant.

    The maneuver condition must hold contiguously through the crossing:
    the begin is the start of the maximal contiguous run containing it,
    the end is the first frame after the crossing where the condition
    releases. Returns (t_begin, t_end, duration, max_vy, truncated).
    """
    times = track.frames / frame_rate
    cond = _maneuver_condition(track)
    n = times.size
    kc = int(np.searchsorted(times, t_cross))
    kc = min(kc, n - 1)
    anchor = None
    for k in (kc - 1, kc):
        if 0 <= k < n and cond[k]:
            anchor = k
    if anchor is None:
        vy_now = float(abs(track.vy[kc]))
        return t_cross, t_cross, 0.0, vy_now, False
    i = anchor
    while i > 0 and cond[i - 1]:
        i -= 1
    t_begin = float(min(times[i], t_cross))
    e = kc
    while e < n and cond[e]:
        e += 1
    truncated = e >= n
    t_end = t_cross if truncated else float(times[e])
    last = (n - 1) if truncated else e
    max_vy = float(np.max(np.abs(track.vy[i:last + 1])))
    if truncated:
        return t_begin, float(times[-1]), float(times[-1]) - t_begin, max_vy, True
    return t_begin, t_end, t_end - t_begin, max_vy, False


def detect_lane_changes(track: Track, geometry: LaneGeometry, frame_rate: float,
                        recording_id: int = 0,
                        density: Optional[Dict[int, float]] = None) -> List[LaneChangeEvent]:
    """Lane-change events of one direction-normalized track.

    One event per lane-id transition; the crossing instant is the linear
    interpolation of the lateral position through the crossed marking.
    Lane keepers yield an empty list.
    """
    events: List[LaneChangeEvent] = []
    lane = track.lane_id
    if lane is None:
        raise ValueError("track has no lane assignment; normalize first")
    transitions = np.flatnonzero(np.diff(lane) != 0)
    for k in transitions:
        l0, l1 = int(lane[k]), int(lane[k + 1])
        marking = float(geometry.markings[min(l0, l1)])
        y0, y1 = float(track.y[k]), float(track.y[k + 1])
        if y1 != y0:
            frac = np.clip((marking - y0) / (y1 - y0), 0.0, 1.0)
        else:
            frac = 1.0
        t_cross = (track.frames[k] + frac * (track.frames[k + 1] - track.frames[k])) / frame_rate
        t_b, t_e, dur, max_vy, truncated = compute_lc_boundaries(track, t_cross, frame_rate)
        td = 0.0
        if density is not None:
            nearest = int(track.frames[k if frac < 0.5 else k + 1])
            td = density.get(nearest, 0.0)
        events.append(
            LaneChangeEvent(
                vehicle_id=track.vehicle_id,
                recording_id=recording_id,
                direction="left" if l1 > l0 else "right",
                t_cross=float(t_cross),
                t_begin=t_b,
                t_end=t_e,
                duration=dur,
                max_vy=max_vy,
                traffic_density=td,
                truncated=truncated,
            )
        )
    return events


# ---------------------------------------------------------------------------
# Feature vector and standardization

def extract_features(track: Track, row: int, scene: SceneContext,
                     schema: FeatureSchema) -> np.ndarray:
    """Raw (unstandardized) feature vector for one sample.

    Only the default schema layout is supported; a schema of a different
    length or naming is rejected rather than silently reordered.
    """
    expected = FeatureSchema.default()
    if schema.names != expected.names:
        raise ValueError("feature schema does not match the pipeline layout")
    vec = np.empty(len(schema))
    vec[0] = track.d_y_cl[row]
    vec[1] = track.vy[row]
    vec[2] = track.ay[row]
    vec[3] = track.vx[row]
    vec[4] = track.lane_id[row]
    vec[5] = float(scene.marking_left_crossable)
    vec[6] = float(scene.marking_right_crossable)
    vec[7::2] = scene.slot_distance
    vec[8::2] = scene.slot_dv
    return vec


class Standardizer:
    """Z-score transform with statistics frozen from the training folds."""

    def __init__(self, mean: np.ndarray, std: np.ndarray):
        self.mean = np.asarray(mean, dtype=float)
        self.std = np.maximum(np.asarray(std, dtype=float), 1e-12)

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        return cls(X.mean(axis=0), X.std(axis=0))

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.std

    def inverse_transform(self, Z: np.ndarray) -> np.ndarray:
        return np.asarray(Z, dtype=float) * self.std + self.mean
