"""End-to-end dataset preparation: corpus on disk -> labeled feature
table with folds, future trajectories and lane-change events, persisted
as a single npz artifact consumed by training, prediction and
evaluation."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .features import (
    FeatureSchema,
    FrameIndex,
    density_per_frame,
    detect_lane_changes,
)
from .gmm import horizon_grid
from .ingest import (
    DIR_LOWER,
    DIR_UPPER,
    SensorModel,
    apply_sensor_model,
    filter_cars,
    normalize_direction,
    parse_recording,
)
from .labeling import compute_times_track, label_samples, split_folds
from .types import DEFAULT_HORIZON, LaneChangeEvent, ManeuverLabel, Recording


def find_recordings(corpus_dir) -> List[Tuple[Path, Path, Path]]:
    corpus_dir = Path(corpus_dir)
    triples = []
    for tracks in sorted(corpus_dir.glob("*_tracks.csv")):
        prefix = tracks.name[: -len("_tracks.csv")]
        meta = corpus_dir / f"{prefix}_tracksMeta.csv"
        rec = corpus_dir / f"{prefix}_recordingMeta.csv"
        if meta.exists() and rec.exists():
            triples.append((tracks, meta, rec))
    if not triples:
        raise FileNotFoundError(f"no recording file sets under {corpus_dir}")
    return triples


def load_recording(paths: Tuple[Path, Path, Path],
                   sensor: SensorModel) -> Recording:
    rec = parse_recording(*paths)
    rec = normalize_direction(rec)
    rec = apply_sensor_model(rec, sensor)
    return filter_cars(rec)


@dataclass
class PreparedDataset:
    """Admissible, defined-label target samples of a corpus."""

    schema: FeatureSchema
    horizon: float
    grid: np.ndarray  # future horizons, s
    X: np.ndarray  # (N, F) raw features
    labels: np.ndarray  # (N,) in {0,1,2}
    t_lcl: np.ndarray
    t_lcr: np.ndarray
    t_o: np.ndarray
    time_to_event: np.ndarray  # time to own-class crossing; inf for FLW
    density: np.ndarray
    fold: np.ndarray
    recording_id: np.ndarray
    vehicle_id: np.ndarray
    frame: np.ndarray
    time: np.ndarray  # s within the recording
    y_future: np.ndarray  # (N, T) lane-center-relative truth; NaN if truncated
    events: List[LaneChangeEvent] = field(default_factory=list)

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    def save(self, path):
        ev = self.events
        np.savez_compressed(
            path,
            schema=self.schema.to_json(),
            meta=json.dumps({"horizon": self.horizon}),
            grid=self.grid,
            X=self.X, labels=self.labels,
            t_lcl=self.t_lcl, t_lcr=self.t_lcr, t_o=self.t_o,
            time_to_event=self.time_to_event,
            density=self.density, fold=self.fold,
            recording_id=self.recording_id, vehicle_id=self.vehicle_id,
            frame=self.frame, time=self.time, y_future=self.y_future,
            ev_recording=np.array([e.recording_id for e in ev], dtype=np.int64),
            ev_vehicle=np.array([e.vehicle_id for e in ev], dtype=np.int64),
            ev_left=np.array([e.direction == "left" for e in ev], dtype=bool),
            ev_t_cross=np.array([e.t_cross for e in ev]),
            ev_t_begin=np.array([e.t_begin for e in ev]),
            ev_t_end=np.array([e.t_end for e in ev]),
            ev_duration=np.array([e.duration for e in ev]),
            ev_max_vy=np.array([e.max_vy for e in ev]),
            ev_density=np.array([e.traffic_density for e in ev]),
            ev_truncated=np.array([e.truncated for e in ev], dtype=bool),
        )

    @classmethod
    def load(cls, path) -> "PreparedDataset":
        z = np.load(path, allow_pickle=False)
        meta = json.loads(str(z["meta"]))
        events = [
            LaneChangeEvent(
                vehicle_id=int(z["ev_vehicle"][i]),
                recording_id=int(z["ev_recording"][i]),
                direction="left" if z["ev_left"][i] else "right",
                t_cross=float(z["ev_t_cross"][i]),
                t_begin=float(z["ev_t_begin"][i]),
                t_end=float(z["ev_t_end"][i]),
                duration=float(z["ev_duration"][i]),
                max_vy=float(z["ev_max_vy"][i]),
                traffic_density=float(z["ev_density"][i]),
                truncated=bool(z["ev_truncated"][i]),
            )
            for i in range(z["ev_t_cross"].size)
        ]
        return cls(
            schema=FeatureSchema.from_json(str(z["schema"])),
            horizon=float(meta["horizon"]),
            grid=z["grid"],
            X=z["X"], labels=z["labels"],
            t_lcl=z["t_lcl"], t_lcr=z["t_lcr"], t_o=z["t_o"],
            time_to_event=z["time_to_event"],
            density=z["density"], fold=z["fold"],
            recording_id=z["recording_id"], vehicle_id=z["vehicle_id"],
            frame=z["frame"], time=z["time"], y_future=z["y_future"],
            events=events,
        )


def _environment_features(recording: Recording, direction: int,
                          sensor: SensorModel):
    """Neighbor-slot features for every sample of one direction, keyed by
    (track position in direction list, row)."""
    index = FrameIndex(recording, direction)
    tracks = index.tracks
    slot_dist = {ti: np.full((len(tr), 8), sensor.max_range)
                 for ti, tr in enumerate(tracks)}
    slot_dv = {ti: np.zeros((len(tr), 8)) for ti, tr in enumerate(tracks)}
    for fr in index.frames:
        snap = index.snapshot(fr)
        if snap.ids.size == 0:
            continue
        dist, dv, present = kernels.neighbor_slots(
            snap.x, snap.vx, snap.lane_id, snap.half_len, sensor.max_range)
        entries = index._by_frame[fr]
        for pos, (ti, ri) in enumerate(entries):
            slot_dist[ti][ri] = dist[pos]
            slot_dv[ti][ri] = dv[pos]
    return index, slot_dist, slot_dv


def prepare_corpus(corpus_dir, sensor: Optional[SensorModel] = None,
                   horizon: float = DEFAULT_HORIZON,
                   n_folds: int = 6, seed: int = 0,
                   grid: Optional[np.ndarray] = None) -> PreparedDataset:
    """Run ingestion, scene features, labeling and fold assignment over a
    corpus directory."""
    sensor = sensor or SensorModel()
    schema = FeatureSchema.default()
    grid = horizon_grid(horizon) if grid is None else np.asarray(grid, float)

    cols: Dict[str, List[np.ndarray]] = {k: [] for k in (
        "X", "labels", "t_lcl", "t_lcr", "t_o", "tte", "density",
        "rec", "veh", "frame", "time", "y_future")}
    all_events: List[LaneChangeEvent] = []
    track_keys: List[Tuple[int, int]] = []
    sample_track_key: List[Tuple[int, int]] = []

    for paths in find_recordings(corpus_dir):
        rec = load_recording(paths, sensor)
        rid = rec.meta.recording_id
        fps = rec.meta.frame_rate
        target_ids = rec.target_ids if rec.target_ids is not None else frozenset(
            t.vehicle_id for t in rec.tracks)
        for direction in (DIR_UPPER, DIR_LOWER):
            geom = rec.meta.geometry.get(direction)
            if geom is None or not rec.tracks_by_direction(direction):
                continue
            index, slot_dist, slot_dv = _environment_features(rec, direction, sensor)
            density = density_per_frame(index)
            n_lanes = geom.lane_count
            for ti, tr in enumerate(index.tracks):
                if tr.vehicle_id not in target_ids:
                    continue
                events = detect_lane_changes(tr, geom, fps, rid, density)
                all_events.extend(events)
                t_lcl, t_lcr, t_o = compute_times_track(tr, events, fps)
                labels = label_samples(t_lcl, t_lcr, t_o, horizon)
                keep = (tr.admissible if tr.admissible is not None
                        else np.ones(len(tr), bool)) & (labels != int(ManeuverLabel.NDEF))
                if not np.any(keep):
                    continue
                n = len(tr)
                feats = np.empty((n, len(schema)))
                feats[:, 0] = tr.d_y_cl
                feats[:, 1] = tr.vy
                feats[:, 2] = tr.ay
                feats[:, 3] = tr.vx
                feats[:, 4] = tr.lane_id
                feats[:, 5] = (tr.lane_id < n_lanes).astype(float)
                feats[:, 6] = (tr.lane_id > 1).astype(float)
                feats[:, 7::2] = slot_dist[ti]
                feats[:, 8::2] = slot_dv[ti]

                times = tr.frames / fps
                centers = tr.y - tr.d_y_cl
                future_t = times[:, None] + grid[None, :]
                y_fut = np.interp(future_t.ravel(), times, tr.y).reshape(future_t.shape)
                y_fut = y_fut - centers[:, None]
                y_fut[future_t > times[-1] + 1e-9] = np.nan

                tte = np.where(labels == int(ManeuverLabel.LCL), t_lcl,
                               np.where(labels == int(ManeuverLabel.LCR), t_lcr, np.inf))
                td = np.array([density.get(int(f), 0.0) for f in tr.frames])

                cols["X"].append(feats[keep])
                cols["labels"].append(labels[keep])
                cols["t_lcl"].append(t_lcl[keep])
                cols["t_lcr"].append(t_lcr[keep])
                cols["t_o"].append(t_o[keep])
                cols["tte"].append(tte[keep])
                cols["density"].append(td[keep])
                cols["rec"].append(np.full(int(keep.sum()), rid, dtype=np.int64))
                cols["veh"].append(np.full(int(keep.sum()), tr.vehicle_id, dtype=np.int64))
                cols["frame"].append(tr.frames[keep])
                cols["time"].append(times[keep])
                cols["y_future"].append(y_fut[keep])
                key = (rid, tr.vehicle_id)
                track_keys.append(key)
                sample_track_key.extend([key] * int(keep.sum()))

    if not cols["X"]:
        raise ValueError("corpus produced no admissible labeled samples")
    fold_of = split_folds(track_keys, n_folds, seed=seed)
    fold = np.array([fold_of[k] for k in sample_track_key], dtype=np.int64)

    return PreparedDataset(
        schema=schema,
        horizon=horizon,
        grid=grid,
        X=np.concatenate(cols["X"]),
        labels=np.concatenate(cols["labels"]),
        t_lcl=np.concatenate(cols["t_lcl"]),
        t_lcr=np.concatenate(cols["t_lcr"]),
        t_o=np.concatenate(cols["t_o"]),
        time_to_event=np.concatenate(cols["tte"]),
        density=np.concatenate(cols["density"]),
        fold=fold,
        recording_id=np.concatenate(cols["rec"]),
        vehicle_id=np.concatenate(cols["veh"]),
        frame=np.concatenate(cols["frame"]),
        time=np.concatenate(cols["time"]),
        y_future=np.concatenate(cols["y_future"]),
        events=all_events,
    )


def expert_points_from_samples(dataset: PreparedDataset,
                               indices: np.ndarray, label: int) -> np.ndarray:
    """Expert training points (v_y, d_y_cl, y_future, t) for one class,
    drawn from already-prepared samples."""
    sel = indices[dataset.labels[indices] == label]
    i_vy = dataset.schema.index_of("v_y")
    i_dy = dataset.schema.index_of("d_y_cl")
    blocks = []
    for i in sel:
        covered = np.isfinite(dataset.y_future[i])
        m = int(covered.sum())
        if m == 0:
            continue
        block = np.empty((m, 4))
        block[:, 0] = dataset.X[i, i_vy]
        block[:, 1] = dataset.X[i, i_dy]
        block[:, 2] = dataset.y_future[i][covered]
        block[:, 3] = dataset.grid[covered]
        blocks.append(block)
    return np.concatenate(blocks) if blocks else np.empty((0, 4))
