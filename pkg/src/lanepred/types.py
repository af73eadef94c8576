"""Shared domain types for the lateral-motion-prediction pipeline.

All types are plain dataclasses over numpy arrays and are treated as
immutable after construction: pipeline stages return new objects instead
of mutating their inputs, so instances can be shared across threads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Dict, List, Optional

import numpy as np

# Sentinel for "no upcoming lane change": compares greater than any finite
# time, so the labeling rule needs no special-casing.
NO_EVENT = math.inf

DEFAULT_HORIZON = 5.0  # s, prediction horizon T_H


class ManeuverLabel(IntEnum):
    """Maneuver classes. LCL/FLW/LCR are the model classes; NDEF marks
    samples whose remaining observation time is too short to decide and
    never enters training or evaluation sets."""

    LCL = 0
    FLW = 1
    LCR = 2
    NDEF = 3


CLASS_NAMES = ("LCL", "FLW", "LCR")

# Neighbor slot order of the 8-slot environment model:
# {preceding, alongside, following} x {left, ego, right}, without an
# ego-alongside slot (that is the target itself).
SLOT_NAMES = (
    "left_preceding",
    "left_alongside",
    "left_following",
    "ego_preceding",
    "ego_following",
    "right_preceding",
    "right_alongside",
    "right_following",
)
N_SLOTS = len(SLOT_NAMES)


@dataclass(frozen=True)
class LaneGeometry:
    """Lane layout of one driving direction in canonical coordinates.

    ``markings`` holds the lateral offsets of the lane markings sorted
    ascending; lane ``i`` (1-based, lane 1 is rightmost) spans
    ``markings[i-1]..markings[i]``.
    """

    markings: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.markings, dtype=float)
        if m.ndim != 1 or m.size < 2:
            raise ValueError("need at least two lane markings")
        if np.any(np.diff(m) <= 0):
            raise ValueError("lane markings must be strictly ascending")
        object.__setattr__(self, "markings", m)

    @property
    def lane_count(self) -> int:
        return self.markings.size - 1

    @property
    def lane_centers(self) -> np.ndarray:
        return 0.5 * (self.markings[:-1] + self.markings[1:])

    def lane_width(self, lane_id: int) -> float:
        return float(self.markings[lane_id] - self.markings[lane_id - 1])

    def center_of(self, lane_id) -> np.ndarray:
        return self.lane_centers[np.asarray(lane_id) - 1]

    def lane_of(self, y) -> np.ndarray:
        """Lane id containing lateral position ``y`` (clipped to 1..N)."""
        idx = np.searchsorted(self.markings, np.asarray(y, dtype=float), side="right")
        return np.clip(idx, 1, self.lane_count)


@dataclass(frozen=True)
class RecordingMeta:
    recording_id: int
    frame_rate: float
    segment_length: float  # m, recorded road length (derived from data extent)
    geometry: Dict[int, LaneGeometry]  # driving-direction code -> lanes

    def __post_init__(self):
        if self.frame_rate <= 0:
            raise ValueError("frame_rate must be positive")
        if self.segment_length <= 0:
            raise ValueError("segment_length must be positive")


@dataclass
class Track:
    """One vehicle's time series. Arrays share a common length.

    Coordinates are raw image coordinates after parsing and canonical
    road coordinates (x along travel, y increasing to the driver's left,
    lane 1 rightmost) after direction normalization.
    """

    vehicle_id: int
    vehicle_class: str  # "Car" or "Truck"
    direction: int  # highD driving-direction code (1 upper, 2 lower)
    frames: np.ndarray  # int, strictly increasing
    x: np.ndarray
    y: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    ax: np.ndarray
    ay: np.ndarray
    length: np.ndarray  # vehicle extent along x, m
    height: np.ndarray  # lateral extent, m
    front_sight: np.ndarray
    back_sight: np.ndarray
    raw_lane: Optional[np.ndarray] = None  # laneId column as parsed (file convention)
    # Derived after normalization:
    lane_id: Optional[np.ndarray] = None
    d_y_cl: Optional[np.ndarray] = None
    jy: Optional[np.ndarray] = None
    admissible: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.frames.size

    def copy_with(self, **kw) -> "Track":
        return replace(self, **kw)


@dataclass
class Recording:
    meta: RecordingMeta
    tracks: List[Track]
    normalized: bool = False
    # Prediction-target ids; None means every track. Non-target tracks
    # (trucks) stay visible as scene objects and count toward density.
    target_ids: Optional[frozenset] = None

    def tracks_by_direction(self, direction: int) -> List[Track]:
        return [t for t in self.tracks if t.direction == direction]

    @property
    def target_tracks(self) -> List[Track]:
        if self.target_ids is None:
            return list(self.tracks)
        return [t for t in self.tracks if t.vehicle_id in self.target_ids]


@dataclass(frozen=True)
class SceneContext:
    """Relational description of the scene around one target at one frame."""

    slot_distance: np.ndarray  # (8,) longitudinal gap, m, clamped to sensor range
    slot_dv: np.ndarray  # (8,) relative longitudinal velocity, m/s
    slot_present: np.ndarray  # (8,) bool
    marking_left_crossable: bool
    marking_right_crossable: bool
    traffic_density: float  # veh/(km*lane)
    front_sight: float
    back_sight: float


@dataclass(frozen=True)
class LaneChangeEvent:
    vehicle_id: int
    recording_id: int
    direction: str  # "left" or "right"
    t_cross: float  # s, marking-crossing instant
    t_begin: float
    t_end: float
    duration: float
    max_vy: float  # max |v_y| over [t_begin, t_end]
    traffic_density: float
    truncated: bool = False

    def __post_init__(self):
        if not self.truncated:
            if not (self.t_begin <= self.t_cross <= self.t_end):
                raise ValueError("t_begin <= t_cross <= t_end violated")
            if self.duration < 0:
                raise ValueError("negative lane-change duration")


@dataclass(frozen=True)
class MixturePrediction:
    """Weighted Gaussian mixture over (lateral position y, time t)."""

    weights: np.ndarray  # (K,)
    means: np.ndarray  # (K, 2)
    covariances: np.ndarray  # (K, 2, 2)
    component_maneuver: np.ndarray  # (K,) int, ManeuverLabel value per component
    gate_probs: np.ndarray  # (3,)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < -1e-12) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("component weights must be nonnegative and sum to 1")
        g = np.asarray(self.gate_probs, dtype=float)
        if abs(g.sum() - 1.0) > 1e-9:
            raise ValueError("gate probabilities must sum to 1")
        for c in np.asarray(self.covariances, dtype=float):
            if not np.allclose(c, c.T, atol=1e-9):
                raise ValueError("covariance not symmetric")
            if np.linalg.eigvalsh(c)[0] <= 0:
                raise ValueError("covariance not positive definite")


def validate(recording: Recording) -> List[str]:
    """Report structural violations of a recording; empty list iff valid.

    Checks monotone frame indices per vehicle, lane ids in range, finite
    kinematics, and lane-center consistency of d_y_cl. Report-only.
    """
    violations: List[str] = []
    for tr in recording.tracks:
        vid = tr.vehicle_id
        if tr.frames.size == 0:
            violations.append(f"vehicle {vid}: empty track")
            continue
        if np.any(np.diff(tr.frames) <= 0):
            bad = int(np.flatnonzero(np.diff(tr.frames) <= 0)[0])
            violations.append(
                f"vehicle {vid}: frame order violation at index {bad} "
                f"(frame {int(tr.frames[bad + 1])})"
            )
        for name in ("x", "y", "vx", "vy", "ax", "ay"):
            arr = getattr(tr, name)
            if not np.all(np.isfinite(arr)):
                bad = int(np.flatnonzero(~np.isfinite(arr))[0])
                violations.append(
                    f"vehicle {vid}: non-finite {name} at frame {int(tr.frames[bad])}"
                )
        if tr.lane_id is not None:
            geom = recording.meta.geometry.get(tr.direction)
            n_lanes = geom.lane_count if geom is not None else np.inf
            if np.any((tr.lane_id < 1) | (tr.lane_id > n_lanes)):
                bad = int(np.flatnonzero((tr.lane_id < 1) | (tr.lane_id > n_lanes))[0])
                violations.append(
                    f"vehicle {vid}: lane_id {int(tr.lane_id[bad])} out of range "
                    f"at frame {int(tr.frames[bad])}"
                )
            elif tr.d_y_cl is not None and geom is not None:
                widths = np.array([geom.lane_width(i) for i in range(1, geom.lane_count + 1)])
                lim = widths[np.clip(tr.lane_id, 1, geom.lane_count) - 1]
                if np.any(np.abs(tr.d_y_cl) > lim):
                    bad = int(np.flatnonzero(np.abs(tr.d_y_cl) > lim)[0])
                    violations.append(
                        f"vehicle {vid}: |d_y_cl| exceeds lane width at frame "
                        f"{int(tr.frames[bad])}"
                    )
    return violations
