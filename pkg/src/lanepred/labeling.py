"""Maneuver labeling, timing quantities, fold splitting and the
balanced undersampling of the training set."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .types import DEFAULT_HORIZON, NO_EVENT, LaneChangeEvent, ManeuverLabel, Track


@dataclass(frozen=True)
class SamplingPlan:
    """Targets of the balanced training set: equal counts per maneuver
    class and per time-to-lane-change bin over (0, horizon]."""

    horizon: float = DEFAULT_HORIZON  # s
    bin_width: float = 0.5  # s
    seed: int = 0

    def __post_init__(self):
        n = self.horizon / self.bin_width
        if abs(n - round(n)) > 1e-9:
            raise ValueError("bin width must divide the horizon")

    @property
    def n_bins(self) -> int:
        return int(round(self.horizon / self.bin_width))


def compute_times(track: Track, row: int, events: Sequence[LaneChangeEvent],
                  frame_rate: float) -> Tuple[float, float, float]:
    """(T_LCL, T_LCR, T_O) for one sample: time to the next left/right
    crossing (NO_EVENT if none) and remaining observed time."""
    t_now = track.frames[row] / frame_rate
    t_lcl = t_lcr = NO_EVENT
    for ev in events:
        dt = ev.t_cross - t_now
        if dt < 0:
            continue
        if ev.direction == "left":
            t_lcl = min(t_lcl, dt)
        else:
            t_lcr = min(t_lcr, dt)
    t_o = track.frames[-1] / frame_rate - t_now
    return t_lcl, t_lcr, t_o


def compute_times_track(track: Track, events: Sequence[LaneChangeEvent],
                        frame_rate: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized compute_times over all samples of a track."""
    t = track.frames / frame_rate
    n = t.size
    t_lcl = np.full(n, NO_EVENT)
    t_lcr = np.full(n, NO_EVENT)
    for ev in events:
        dt = ev.t_cross - t
        dt[dt < 0] = NO_EVENT
        if ev.direction == "left":
            np.minimum(t_lcl, dt, out=t_lcl)
        else:
            np.minimum(t_lcr, dt, out=t_lcr)
    t_o = t[-1] - t
    return t_lcl, t_lcr, t_o


def label_sample(t_lcl: float, t_lcr: float, t_o: float,
                 horizon: float = DEFAULT_HORIZON) -> ManeuverLabel:
    """Four-way maneuver label from the timing triple.

    A left change wins ties against a right change (<= against <); a
    sample whose remaining observation is shorter than the horizon with
    no imminent change is undefined (NDEF).
    """
    if (np.isfinite(t_lcl) and t_lcl < 0) or (np.isfinite(t_lcr) and t_lcr < 0) or t_o < 0:
        raise ValueError("times must be nonnegative")
    if t_lcl <= horizon and t_lcl <= t_lcr and t_lcl <= t_o:
        return ManeuverLabel.LCL
    if t_lcr <= horizon and t_lcr < t_lcl and t_lcr <= t_o:
        return ManeuverLabel.LCR
    if horizon < t_lcl and horizon < t_lcr and horizon <= t_o:
        return ManeuverLabel.FLW
    return ManeuverLabel.NDEF


def label_samples(t_lcl: np.ndarray, t_lcr: np.ndarray, t_o: np.ndarray,
                  horizon: float = DEFAULT_HORIZON) -> np.ndarray:
    """Vectorized labeling; returns ManeuverLabel values as int array."""
    t_lcl = np.asarray(t_lcl, dtype=float)
    t_lcr = np.asarray(t_lcr, dtype=float)
    t_o = np.asarray(t_o, dtype=float)
    out = np.full(t_lcl.shape, int(ManeuverLabel.NDEF), dtype=np.int64)
    lcl = (t_lcl <= horizon) & (t_lcl <= t_lcr) & (t_lcl <= t_o)
    lcr = ~lcl & (t_lcr <= horizon) & (t_lcr < t_lcl) & (t_lcr <= t_o)
    flw = ~lcl & ~lcr & (horizon < t_lcl) & (horizon < t_lcr) & (horizon <= t_o)
    out[lcl] = int(ManeuverLabel.LCL)
    out[lcr] = int(ManeuverLabel.LCR)
    out[flw] = int(ManeuverLabel.FLW)
    return out


def split_folds(track_keys: Sequence, k: int, seed: int = 0) -> Dict:
    """Assign whole tracks to folds 1..k (all samples of a vehicle share
    a fold, so near-duplicate frames never leak across folds)."""
    keys = sorted(set(track_keys))
    if len(keys) < k:
        raise ValueError(f"need at least {k} tracks for {k} folds, got {len(keys)}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(keys))
    return {keys[idx]: (pos % k) + 1 for pos, idx in enumerate(order)}


def undersample(labels: np.ndarray, time_to_event: np.ndarray,
                plan: SamplingPlan) -> np.ndarray:
    """Indices of a balanced training subset.

    Lane-change samples are balanced per (class, time-to-event bin) cell
    to the minimum nonempty cell count; lane-following samples are then
    randomly downsampled to the lane-change class total. Deterministic
    under the plan's seed; output is a subset without duplicates.
    """
    labels = np.asarray(labels)
    tte = np.asarray(time_to_event, dtype=float)
    rng = np.random.default_rng(plan.seed)
    n_bins = plan.n_bins

    cells: Dict[Tuple[int, int], np.ndarray] = {}
    for cls in (ManeuverLabel.LCL, ManeuverLabel.LCR):
        mask = labels == int(cls)
        t = tte[mask]
        idx = np.flatnonzero(mask)
        bins = np.clip((np.ceil(t / plan.bin_width) - 1).astype(int), 0, n_bins - 1)
        for b in range(n_bins):
            cells[(int(cls), b)] = idx[bins == b]

    nonempty = {k: v.size for k, v in cells.items() if v.size > 0}
    empty = [k for k, v in cells.items() if v.size == 0]
    for cls, b in empty:
        warnings.warn(
            f"empty undersampling cell: class {ManeuverLabel(cls).name}, "
            f"bin {b * plan.bin_width:.1f}-{(b + 1) * plan.bin_width:.1f} s"
        )
    if not nonempty:
        raise ValueError("no lane-change samples to balance")
    target = min(nonempty.values())

    chosen: List[np.ndarray] = []
    totals = {int(ManeuverLabel.LCL): 0, int(ManeuverLabel.LCR): 0}
    for (cls, b), idx in sorted(cells.items()):
        if idx.size == 0:
            continue
        pick = np.sort(rng.choice(np.sort(idx), size=target, replace=False))
        chosen.append(pick)
        totals[cls] += target

    flw_idx = np.sort(np.flatnonzero(labels == int(ManeuverLabel.FLW)))
    flw_target = min(totals.values()) if min(totals.values()) > 0 else max(totals.values())
    flw_target = min(flw_target, flw_idx.size)
    if flw_idx.size > 0 and flw_target > 0:
        chosen.append(np.sort(rng.choice(flw_idx, size=flw_target, replace=False)))

    return np.sort(np.concatenate(chosen)) if chosen else np.array([], dtype=int)
