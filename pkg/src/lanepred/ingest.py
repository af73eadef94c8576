"""Parsing and preprocessing of highD-format recordings.

A recording is three comma-separated text files with a header row:
``*_tracks`` (per-frame vehicle states), ``*_tracksMeta`` (per-vehicle
metadata) and ``*_recordingMeta`` (frame rate and lane-marking offsets).
Column names follow the dataset convention and are required verbatim.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List

import numpy as np
import pandas as pd

from .types import LaneGeometry, Recording, RecordingMeta, Track

TRACKS_COLUMNS = [
    "frame", "id", "x", "y", "width", "height",
    "xVelocity", "yVelocity", "xAcceleration", "yAcceleration",
    "frontSightDistance", "backSightDistance",
    "precedingId", "followingId",
    "leftPrecedingId", "leftAlongsideId", "leftFollowingId",
    "rightPrecedingId", "rightAlongsideId", "rightFollowingId",
    "laneId",
]
TRACKS_META_COLUMNS = ["id", "initialFrame", "finalFrame", "class", "drivingDirection"]
RECORDING_META_COLUMNS = ["id", "frameRate", "upperLaneMarkings", "lowerLaneMarkings"]

# drivingDirection codes of the file convention
DIR_UPPER = 1  # drives toward decreasing image x
DIR_LOWER = 2  # drives toward increasing image x


class FormatError(ValueError):
    """Raised for files that violate the expected column layout."""


@dataclass(frozen=True)
class SensorModel:
    """Virtual on-board sensing limits applied to the recorded ground truth."""

    max_range: float = 150.0  # m; relations beyond this get default values
    min_sight: float = 80.0  # m; shorter front/back sight excludes the sample

    def __post_init__(self):
        if not (self.max_range > self.min_sight > 0):
            raise ValueError("require max_range > min_sight > 0")


def _read_table(path, required, name):
    df = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise FormatError(f"{name}: missing required column '{missing[0]}'")
    for col in required:
        if col in ("upperLaneMarkings", "lowerLaneMarkings", "class"):
            continue
        coerced = pd.to_numeric(df[col], errors="coerce")
        bad = coerced.isna() & df[col].notna()
        if bad.any():
            row = int(np.flatnonzero(bad.values)[0])
            raise FormatError(f"{name}: non-numeric value in column '{col}' at data row {row}")
        if coerced.isna().any():
            row = int(np.flatnonzero(coerced.isna().values)[0])
            raise FormatError(f"{name}: missing value in column '{col}' at data row {row}")
        df[col] = coerced
    return df


def _parse_markings(cell) -> np.ndarray:
    vals = [float(v) for v in str(cell).split(";") if str(v).strip() != ""]
    if len(vals) < 2:
        raise FormatError("lane marking list needs at least two offsets")
    return np.array(vals, dtype=float)


def parse_recording(tracks_path, tracks_meta_path, recording_meta_path) -> Recording:
    """Parse one recording into raw (image-coordinate) tracks.

    Positions are converted from the file's bounding-box corner to the
    vehicle center. The recorded segment length is derived from the
    longitudinal data extent (it is not part of the file convention).
    """
    tracks_df = _read_table(tracks_path, TRACKS_COLUMNS, Path(str(tracks_path)).name)
    meta_df = _read_table(tracks_meta_path, TRACKS_META_COLUMNS, Path(str(tracks_meta_path)).name)
    rec_df = _read_table(recording_meta_path, RECORDING_META_COLUMNS, Path(str(recording_meta_path)).name)

    rec_row = rec_df.iloc[0]
    raw_markings = {
        DIR_UPPER: _parse_markings(rec_row["upperLaneMarkings"]),
        DIR_LOWER: _parse_markings(rec_row["lowerLaneMarkings"]),
    }
    vclass = {int(r["id"]): str(r["class"]) for _, r in meta_df.iterrows()}
    vdir = {int(r["id"]): int(r["drivingDirection"]) for _, r in meta_df.iterrows()}

    x_left = tracks_df["x"].to_numpy(float)
    x_right = x_left + tracks_df["width"].to_numpy(float)
    segment_length = float(x_right.max() - x_left.min()) if len(tracks_df) else 1.0

    tracks: List[Track] = []
    for vid, g in tracks_df.groupby("id", sort=True):
        g = g.sort_values("frame")
        vid = int(vid)
        w = g["width"].to_numpy(float)
        h = g["height"].to_numpy(float)
        tracks.append(
            Track(
                vehicle_id=vid,
                vehicle_class=vclass.get(vid, "Car"),
                direction=vdir.get(vid, DIR_LOWER),
                frames=g["frame"].to_numpy(np.int64),
                x=g["x"].to_numpy(float) + 0.5 * w,
                y=g["y"].to_numpy(float) + 0.5 * h,
                vx=g["xVelocity"].to_numpy(float),
                vy=g["yVelocity"].to_numpy(float),
                ax=g["xAcceleration"].to_numpy(float),
                ay=g["yAcceleration"].to_numpy(float),
                length=w,
                height=h,
                front_sight=g["frontSightDistance"].to_numpy(float),
                back_sight=g["backSightDistance"].to_numpy(float),
                raw_lane=g["laneId"].to_numpy(np.int64),
            )
        )

    meta = RecordingMeta(
        recording_id=int(rec_row["id"]),
        frame_rate=float(rec_row["frameRate"]),
        segment_length=max(segment_length, 1.0),
        geometry={d: LaneGeometry(m) for d, m in raw_markings.items()},
    )
    rec = Recording(meta=meta, tracks=tracks, normalized=False)
    rec._raw_markings = raw_markings  # kept for normalization
    return rec


def smooth5(values: np.ndarray) -> np.ndarray:
    """Centered 5-sample moving average with shrinking edge windows."""
    n = values.size
    if n == 0:
        return values.copy()
    kernel = np.ones(5)
    sums = np.convolve(values, kernel, mode="same")
    counts = np.convolve(np.ones(n), kernel, mode="same")
    return sums / counts


def lateral_jerk(ay: np.ndarray, frame_rate: float) -> np.ndarray:
    """Lateral jerk by first differences of the acceleration, smoothed.

    Raw frame-to-frame differences are too noisy for the threshold tests
    that define lane-change boundaries, hence the 5-sample smoothing.
    """
    if ay.size < 2:
        return np.zeros_like(ay)
    d = np.empty_like(ay)
    d[1:] = (ay[1:] - ay[:-1]) * frame_rate
    d[0] = d[1]
    return smooth5(d)


def _canonical_markings(raw: np.ndarray, direction: int) -> np.ndarray:
    if direction == DIR_LOWER:
        return np.sort(-raw)
    return np.sort(raw.copy())


def normalize_direction(recording: Recording) -> Recording:
    """Transform both driving directions into one canonical convention.

    Canonical coordinates: x increases along travel, y increases to the
    driver's left, lane 1 is the rightmost lane. The upper direction flips
    its longitudinal axis, the lower direction its lateral axis; each
    transform is an involution. Lane ids, lane-center distances and
    lateral jerk are derived here.
    """
    if recording.normalized:
        return recording
    raw_markings = getattr(recording, "_raw_markings", None)
    if raw_markings is None:
        raw_markings = {d: g.markings for d, g in recording.meta.geometry.items()}

    geometry: Dict[int, LaneGeometry] = {}
    for d, m in raw_markings.items():
        geometry[d] = LaneGeometry(_canonical_markings(np.asarray(m, float), d))

    fps = recording.meta.frame_rate
    new_tracks: List[Track] = []
    for tr in recording.tracks:
        if tr.direction == DIR_UPPER:
            x, vx, ax = -tr.x, -tr.vx, -tr.ax
            y, vy, ay = tr.y.copy(), tr.vy.copy(), tr.ay.copy()
        elif tr.direction == DIR_LOWER:
            x, vx, ax = tr.x.copy(), tr.vx.copy(), tr.ax.copy()
            y, vy, ay = -tr.y, -tr.vy, -tr.ay
        else:
            raise ValueError(f"unknown driving-direction code {tr.direction}")
        geom = geometry[tr.direction]
        lane_id = geom.lane_of(y)
        d_y_cl = y - geom.center_of(lane_id)
        new_tracks.append(
            tr.copy_with(
                x=x, y=y, vx=vx, vy=vy, ax=ax, ay=ay,
                lane_id=lane_id, d_y_cl=d_y_cl,
                jy=lateral_jerk(ay, fps),
            )
        )

    meta = RecordingMeta(
        recording_id=recording.meta.recording_id,
        frame_rate=recording.meta.frame_rate,
        segment_length=recording.meta.segment_length,
        geometry=geometry,
    )
    return Recording(meta=meta, tracks=new_tracks, normalized=True,
                     target_ids=recording.target_ids)


def apply_sensor_model(recording: Recording, sensor: SensorModel) -> Recording:
    """Flag samples admissible for training/evaluation under the sensor.

    A sample is admissible iff both sight distances reach ``min_sight``.
    Inadmissible frames still contribute to other vehicles' scene
    relations and to traffic density.
    """
    new_tracks = [
        tr.copy_with(
            admissible=(tr.front_sight >= sensor.min_sight)
            & (tr.back_sight >= sensor.min_sight)
        )
        for tr in recording.tracks
    ]
    return Recording(meta=recording.meta, tracks=new_tracks,
                     normalized=recording.normalized, target_ids=recording.target_ids)


def filter_cars(recording: Recording) -> Recording:
    """Restrict prediction targets to passenger cars.

    Trucks are removed only as targets; they remain scene objects because
    the exclusion concerns the predicted vehicle's motion, not its
    neighbors.
    """
    targets = frozenset(
        tr.vehicle_id for tr in recording.tracks if tr.vehicle_class == "Car"
    )
    return Recording(meta=recording.meta, tracks=recording.tracks,
                     normalized=recording.normalized, target_ids=targets)


def write_recording(recording: Recording, out_dir, prefix: str) -> Dict[str, Path]:
    """Serialize a raw recording back to the three-file convention.

    Full float precision is used so that parse -> write -> parse is the
    identity on every stored field up to one floating-point rounding of
    the corner/center position conversion. Neighbor-id columns the
    pipeline does not retain are written as 0.
    """
    if recording.normalized:
        raise ValueError("serialize raw (image-coordinate) recordings only")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    for tr in recording.tracks:
        n = len(tr)
        zeros = np.zeros(n, dtype=np.int64)
        lane = tr.raw_lane if tr.raw_lane is not None else zeros
        rows.append(
            pd.DataFrame({
                "frame": tr.frames,
                "id": np.full(n, tr.vehicle_id, dtype=np.int64),
                "x": tr.x - 0.5 * tr.length,
                "y": tr.y - 0.5 * tr.height,
                "width": tr.length,
                "height": tr.height,
                "xVelocity": tr.vx,
                "yVelocity": tr.vy,
                "xAcceleration": tr.ax,
                "yAcceleration": tr.ay,
                "frontSightDistance": tr.front_sight,
                "backSightDistance": tr.back_sight,
                "precedingId": zeros, "followingId": zeros,
                "leftPrecedingId": zeros, "leftAlongsideId": zeros,
                "leftFollowingId": zeros, "rightPrecedingId": zeros,
                "rightAlongsideId": zeros, "rightFollowingId": zeros,
                "laneId": lane,
            })
        )
    tracks_df = (pd.concat(rows, ignore_index=True)
                 if rows else pd.DataFrame(columns=TRACKS_COLUMNS))

    meta_rows = [
        {
            "id": tr.vehicle_id,
            "initialFrame": int(tr.frames[0]) if len(tr) else 0,
            "finalFrame": int(tr.frames[-1]) if len(tr) else 0,
            "class": tr.vehicle_class,
            "drivingDirection": tr.direction,
        }
        for tr in recording.tracks
    ]
    meta_df = pd.DataFrame(meta_rows, columns=TRACKS_META_COLUMNS)

    raw_markings = getattr(recording, "_raw_markings", None)
    if raw_markings is None:
        raw_markings = {d: g.markings for d, g in recording.meta.geometry.items()}
    rec_df = pd.DataFrame([{
        "id": recording.meta.recording_id,
        "frameRate": recording.meta.frame_rate,
        "upperLaneMarkings": ";".join(repr(float(v)) for v in raw_markings[DIR_UPPER]),
        "lowerLaneMarkings": ";".join(repr(float(v)) for v in raw_markings[DIR_LOWER]),
    }])

    paths = {
        "tracks": out_dir / f"{prefix}_tracks.csv",
        "tracksMeta": out_dir / f"{prefix}_tracksMeta.csv",
        "recordingMeta": out_dir / f"{prefix}_recordingMeta.csv",
    }
    tracks_df.to_csv(paths["tracks"], index=False, float_format="%.17g")
    meta_df.to_csv(paths["tracksMeta"], index=False)
    rec_df.to_csv(paths["recordingMeta"], index=False, float_format="%.17g")
    return paths
