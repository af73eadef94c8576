"""Synthetic highway corpus generator.

Emits recordings in the exact three-file convention the ingest module
parses, together with a ground-truth manifest (every lane change with
its begin/cross/end instants and per-frame traffic density), so the
whole pipeline is testable without the licensed dataset.

Behavioral laws are configurable: lane-change duration and maximum
lateral speed grow affinely with traffic density, lane-keeping
oscillation amplitude shrinks with it, and the mean longitudinal speed
decreases with it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .ingest import DIR_LOWER, DIR_UPPER, write_recording
from .types import LaneGeometry, Recording, RecordingMeta, Track


# ---------------------------------------------------------------------------
# Analytic lane-change primitive

class SigmoidLaneChange:
    """Smooth monotone lateral transition between adjacent lane centers.

    Two-parameter family: total duration and peak lateral speed. The
    shape exponent couples them; the peak speed must be at least the
    mean speed |target - start| / duration. Position and velocity are
    continuous at both ends; closed forms of velocity and acceleration
    are available for oracle tests.
    """

    def __init__(self, start_center: float, target_center: float,
                 duration: float, peak_speed: float):
        if duration <= 0:
            raise ValueError("duration must be positive")
        self.y0 = float(start_center)
        self.delta = float(target_center - start_center)
        self.duration = float(duration)
        mean_speed = abs(self.delta) / duration
        if peak_speed < mean_speed - 1e-12:
            raise ValueError("peak speed below the mean transition speed")
        # shape exponent: s'(1/2) = a, so peak |v| = a*|delta|/duration
        self.shape = max(peak_speed * duration / abs(self.delta), 1.0)

    def _u(self, t):
        return np.clip(np.asarray(t, dtype=float) / self.duration, 0.0, 1.0)

    def y(self, t):
        u = self._u(t)
        a = self.shape
        with np.errstate(divide="ignore", invalid="ignore"):
            f = u ** a
            g = (1.0 - u) ** a
            s = np.where(u <= 0, 0.0, np.where(u >= 1, 1.0, f / (f + g)))
        return self.y0 + self.delta * s

    def vy(self, t):
        u = self._u(t)
        a = self.shape
        inside = (u > 0) & (u < 1)
        uu = np.clip(u, 1e-12, 1 - 1e-12)
        p = uu ** (a - 1) * (1 - uu) ** (a - 1)
        h = uu ** a + (1 - uu) ** a
        out = np.where(inside, a * p / h ** 2, 0.0)
        return self.delta / self.duration * out

    def ay(self, t):
        u = self._u(t)
        a = self.shape
        inside = (u > 0) & (u < 1)
        uu = np.clip(u, 1e-12, 1 - 1e-12)
        f = uu ** (a - 1)
        g = (1 - uu) ** (a - 1)
        p2 = uu ** (a - 2) * (1 - uu) ** (a - 2)
        h = uu ** a + (1 - uu) ** a
        hp = a * (f - g)
        sp2 = a * (
            (a - 1) * p2 * (1 - 2 * uu) * h - 2 * f * g * hp
        ) / h ** 3
        return self.delta / self.duration ** 2 * np.where(inside, sp2, 0.0)


def sigmoid_lane_change(start_center: float, target_center: float,
                        duration: float, peak_speed: float) -> SigmoidLaneChange:
    return SigmoidLaneChange(start_center, target_center, duration, peak_speed)


def _quintic(u):
    u = np.clip(u, 0.0, 1.0)
    return u ** 3 * (10.0 - 15.0 * u + 6.0 * u * u)


def _quintic_d1(u):
    inside = (u > 0) & (u < 1)
    uu = np.clip(u, 0.0, 1.0)
    return np.where(inside, 30.0 * uu ** 2 * (1 - uu) ** 2, 0.0)


def _quintic_d2(u):
    inside = (u > 0) & (u < 1)
    uu = np.clip(u, 0.0, 1.0)
    return np.where(inside, 60.0 * uu * (1 - uu) * (1 - 2 * uu), 0.0)


# ---------------------------------------------------------------------------
# Configuration

@dataclass(frozen=True)
class ScenarioConfig:
    lane_count: int = 3
    segment_length: float = 1000.0  # m
    frame_rate: float = 25.0  # Hz
    lane_width: float = 4.0  # m
    duration: float = 120.0  # s of simulated time per recording
    # traffic
    density_range: Tuple[float, float] = (12.0, 12.0)  # veh/(km*lane)
    speed_base: float = 33.0  # m/s at zero density
    speed_slope: float = -0.25  # m/s per density unit
    truck_fraction: float = 0.08
    # lane keeping: damped oscillation around the lane center
    osc_amp_base: float = 0.13  # m
    osc_amp_slope: float = -0.002  # m per density unit
    osc_freq: float = 0.09  # Hz
    osc_decay: float = 0.005  # 1/s
    # lane changes
    lane_change_rate: float = 0.02  # maneuvers per vehicle-second
    announce_time: float = 4.5  # s of pre-maneuver drift toward the marking
    announce_offset: float = 0.3  # m
    dur_base: float = 2.6  # s at zero density
    dur_slope: float = 0.05  # s per density unit
    vmax_base: float = 1.6  # m/s at zero density
    vmax_slope: float = 0.02  # m/s per density unit
    # measurement
    position_noise: float = 0.004  # m, applied to emitted positions only
    seed: int = 0

    def __post_init__(self):
        if self.lane_count < 1 or self.segment_length <= 0 or self.frame_rate <= 0:
            raise ValueError("invalid geometry")
        if self.lane_change_rate < 0 or self.truck_fraction < 0:
            raise ValueError("rates must be nonnegative")

    def mean_speed(self, density: float) -> float:
        return max(self.speed_base + self.speed_slope * density, 12.0)

    def osc_amp(self, density: float) -> float:
        return max(self.osc_amp_base + self.osc_amp_slope * density, 0.02)

    def lc_duration(self, density: float) -> float:
        return float(np.clip(self.dur_base + self.dur_slope * density, 1.2, 9.0))

    def lc_peak_speed(self, density: float) -> float:
        return max(self.vmax_base + self.vmax_slope * density, 0.5)


# ---------------------------------------------------------------------------
# Per-vehicle lateral plan

@dataclass
class _Maneuver:
    t0: float  # maneuver start (announcement precedes it)
    sigmoid: SigmoidLaneChange
    announce_time: float
    announce_offset: float  # signed, toward the target lane
    from_lane: int
    to_lane: int


class _LateralPlan:
    """Lane-center base path with announcements and sigmoid transitions,
    plus a decaying sinusoidal lane-keeping oscillation."""

    def __init__(self, home_center: float, amp: float, freq: float,
                 decay: float, phase: float):
        self.home_center = home_center
        self.amp = amp
        self.omega = 2.0 * math.pi * freq
        self.decay = decay
        self.phase = phase
        self.maneuvers: List[_Maneuver] = []

    def _osc(self, t):
        t = np.asarray(t, dtype=float)
        env = self.amp * np.exp(-self.decay * t)
        s = np.sin(self.omega * t + self.phase)
        c = np.cos(self.omega * t + self.phase)
        y = env * s
        vy = env * (self.omega * c - self.decay * s)
        ay = env * ((self.decay ** 2 - self.omega ** 2) * s
                    - 2.0 * self.decay * self.omega * c)
        return y, vy, ay

    def eval(self, t):
        t = np.asarray(t, dtype=float)
        y, vy, ay = self._osc(t)
        y = y + self.home_center
        for m in self.maneuvers:
            # announcement drift
            ta = (t - (m.t0 - m.announce_time)) / m.announce_time
            y = y + m.announce_offset * _quintic(ta)
            vy = vy + m.announce_offset / m.announce_time * _quintic_d1(ta)
            ay = ay + m.announce_offset / m.announce_time ** 2 * _quintic_d2(ta)
            # sigmoid transition
            tm = t - m.t0
            y = y + (m.sigmoid.y(tm) - m.sigmoid.y0)
            vy = vy + m.sigmoid.vy(tm)
            ay = ay + m.sigmoid.ay(tm)
        return y, vy, ay


# ---------------------------------------------------------------------------
# Ground-truth boundary scan (generator-side oracle)

def lc_condition(d_y_cl, vy, ay, jy):
    return ((np.abs(d_y_cl) >= 1.0) | (np.abs(vy) >= 0.1)
            | (np.abs(ay) >= 0.1) | (np.abs(jy) >= 0.1))


def smoothed_jerk(ay: np.ndarray, frame_rate: float) -> np.ndarray:
    """Frame-rate jerk definition shared with the measurement pipeline:
    first differences smoothed with a centered 5-sample average."""
    if ay.size < 2:
        return np.zeros_like(ay)
    d = np.empty_like(ay)
    d[1:] = (ay[1:] - ay[:-1]) * frame_rate
    d[0] = d[1]
    sums = np.convolve(d, np.ones(5), mode="same")
    counts = np.convolve(np.ones(d.size), np.ones(5), mode="same")
    return sums / counts


def boundaries_from_kinematics(times, d_y_cl, vy, ay, jy, t_cross):
    """Begin/end of the threshold-condition run containing the crossing.

    Direct scan over the given sampled kinematics; mirrors the boundary
    definition without using the measurement pipeline's code path.
    """
    cond = lc_condition(d_y_cl, vy, ay, jy)
    n = len(times)
    kc = min(int(np.searchsorted(times, t_cross)), n - 1)
    anchor = None
    for k in (kc - 1, kc):
        if 0 <= k < n and cond[k]:
            anchor = k
    if anchor is None:
        return t_cross, t_cross, 0.0, float(abs(vy[kc])), False
    i = anchor
    while i > 0 and cond[i - 1]:
        i -= 1
    e = kc
    while e < n and cond[e]:
        e += 1
    truncated = e >= n
    t_b = float(min(times[i], t_cross))
    t_e = float(times[-1]) if truncated else float(times[e])
    last = (n - 1) if truncated else e
    return t_b, t_e, t_e - t_b, float(np.max(np.abs(vy[i:last + 1]))), truncated


# ---------------------------------------------------------------------------
# Corpus generation

CAR_LENGTH = 4.5
CAR_WIDTH = 1.9
TRUCK_LENGTH = 12.5
TRUCK_WIDTH = 2.5


def _image_markings(config: ScenarioConfig) -> Dict[int, np.ndarray]:
    w, n = config.lane_width, config.lane_count
    upper = 2.0 + w * np.arange(n + 1)
    lower = upper[-1] + 4.0 + w * np.arange(n + 1)
    return {DIR_UPPER: upper, DIR_LOWER: lower}


def _canonical_geometry(config: ScenarioConfig, direction: int,
                        image_markings: Dict[int, np.ndarray]) -> LaneGeometry:
    m = image_markings[direction]
    return LaneGeometry(np.sort(-m) if direction == DIR_LOWER else np.sort(m))


def generate_recording(config: ScenarioConfig, recording_id: int,
                       density_target: float,
                       ) -> Tuple[Recording, List[Dict], pd.DataFrame]:
    """One synthetic recording plus its ground-truth manifest.

    Returns the raw (image-coordinate) recording, the lane-change event
    list and the per-frame density table. Deterministic under the config
    seed and recording id.
    """
    rng = np.random.default_rng((config.seed, recording_id))
    fps = config.frame_rate
    seg = config.segment_length
    image_markings = _image_markings(config)
    w = config.lane_width
    n_lanes = config.lane_count
    td = float(density_target)
    v_mean = config.mean_speed(td)

    per_lane_count = td * seg / 1000.0
    if per_lane_count * 12.0 > seg:
        raise ValueError("target density infeasible for the segment geometry")

    tracks: List[Track] = []
    events: List[Dict] = []
    vid = 0
    for direction in (DIR_UPPER, DIR_LOWER):
        geom = _canonical_geometry(config, direction, image_markings)
        centers = geom.lane_centers
        flow_per_lane = td * v_mean / 1000.0  # veh/s entering each lane
        for lane0 in range(1, n_lanes + 1):
            # steady state: vehicles already on the segment plus arrivals
            spawns = [(-x0 / v_mean) for x0 in
                      rng.uniform(0, seg, rng.poisson(per_lane_count))]
            n_arrivals = rng.poisson(flow_per_lane * config.duration)
            spawns += list(np.sort(rng.uniform(0, config.duration, n_arrivals)))
            for t_spawn in spawns:
                vid += 1
                is_truck = rng.uniform() < config.truck_fraction
                v = float(np.clip(rng.normal(v_mean - (4.0 if is_truck else 0.0), 2.0),
                                  14.0, 46.0))
                transit = seg / v
                t_enter = max(t_spawn, 0.0)
                t_exit = min(t_spawn + transit, config.duration)
                if t_exit - t_enter < 2.0 / fps:
                    continue
                amp = config.osc_amp(td) * rng.uniform(0.7, 1.3)
                freq = config.osc_freq * rng.uniform(0.85, 1.15)
                # keep lane-keeping speed below the maneuver threshold
                amp = min(amp, 0.095 / (2.0 * math.pi * freq))
                plan = _LateralPlan(centers[lane0 - 1], amp, freq,
                                    config.osc_decay, rng.uniform(0, 2 * math.pi))
                lane = lane0
                if not is_truck and config.lane_change_rate > 0:
                    n_lc = rng.poisson(config.lane_change_rate * (t_exit - t_enter))
                    t_free = t_enter + config.announce_time + 1.0
                    for _ in range(min(n_lc, 2)):
                        dur = config.lc_duration(td) * rng.uniform(0.9, 1.1)
                        if t_free + dur + 2.0 > t_exit:
                            break
                        t0 = rng.uniform(t_free, t_exit - dur - 2.0)
                        choices = [dl for dl in (-1, 1) if 1 <= lane + dl <= n_lanes]
                        dl = int(rng.choice(choices))
                        target = lane + dl
                        sign = math.copysign(1.0, centers[target - 1] - centers[lane - 1])
                        start_y = centers[lane - 1] + sign * config.announce_offset
                        span = abs(centers[target - 1] - start_y)
                        vp = config.lc_peak_speed(td) * rng.uniform(0.9, 1.1)
                        shape = float(np.clip(vp * dur / span, 1.05, 2.9))
                        vp = shape * span / dur
                        plan.maneuvers.append(_Maneuver(
                            t0=t0,
                            sigmoid=SigmoidLaneChange(start_y, centers[target - 1],
                                                      dur, vp),
                            announce_time=config.announce_time,
                            announce_offset=sign * config.announce_offset,
                            from_lane=lane, to_lane=target,
                        ))
                        lane = target
                        t_free = t0 + dur + config.announce_time + 2.0

                frames = np.arange(int(math.ceil(t_enter * fps)),
                                   int(math.floor(t_exit * fps)) + 1)
                if frames.size < 2:
                    continue
                t = frames / fps
                y_can, vy_can, ay_can = plan.eval(t)
                x_can = (t - t_spawn) * v
                length = TRUCK_LENGTH if is_truck else CAR_LENGTH
                width = TRUCK_WIDTH if is_truck else CAR_WIDTH

                # ground-truth lane-change records
                lane_ids = geom.lane_of(y_can)
                d_y_cl = y_can - geom.center_of(lane_ids)
                jy = smoothed_jerk(ay_can, fps)
                for m in plan.maneuvers:
                    marking = float(geom.markings[min(m.from_lane, m.to_lane)])
                    dense_t = np.arange(m.t0, m.t0 + m.sigmoid.duration, 1e-3)
                    dense_y = plan.eval(dense_t)[0]
                    crossings = np.flatnonzero(np.diff(np.sign(dense_y - marking)) != 0)
                    if crossings.size == 0 or dense_t[0] < t[0] or \
                            m.t0 + m.sigmoid.duration > t[-1]:
                        continue
                    k = crossings[0]
                    y0v, y1v = dense_y[k] - marking, dense_y[k + 1] - marking
                    t_cross = float(dense_t[k] + 1e-3 * y0v / (y0v - y1v))
                    t_b, t_e, dur_m, max_vy, trunc = boundaries_from_kinematics(
                        t, d_y_cl, vy_can, ay_can, jy, t_cross)
                    events.append({
                        "recording_id": recording_id,
                        "vehicle_id": vid,
                        "direction": "left" if m.to_lane > m.from_lane else "right",
                        "t_cross": t_cross,
                        "t_begin": t_b, "t_end": t_e, "duration": dur_m,
                        "max_vy": max_vy, "density": td, "truncated": trunc,
                    })

                # map canonical -> image coordinates
                if direction == DIR_UPPER:
                    x_img = seg - x_can
                    vx_img, ax_img = -v, 0.0
                    y_img, vy_img, ay_img = y_can, vy_can, ay_can
                else:
                    x_img = x_can
                    vx_img, ax_img = v, 0.0
                    y_img, vy_img, ay_img = -y_can, -vy_can, -ay_can
                y_img = y_img + rng.normal(0.0, config.position_noise, y_img.size)
                x_img = x_img + rng.normal(0.0, config.position_noise, y_img.size)

                front = np.clip(seg - x_can - 0.5 * length, 0.0, None)
                back = np.clip(x_can - 0.5 * length, 0.0, None)
                img_m = image_markings[direction]
                raw_lane = np.searchsorted(img_m, y_img, side="right")

                tracks.append(Track(
                    vehicle_id=vid,
                    vehicle_class="Truck" if is_truck else "Car",
                    direction=direction,
                    frames=frames,
                    x=x_img,
                    y=y_img,
                    vx=np.full(t.size, vx_img),
                    vy=vy_img,
                    ax=np.full(t.size, ax_img),
                    ay=ay_img,
                    length=np.full(t.size, float(length)),
                    height=np.full(t.size, float(width)),
                    front_sight=front,
                    back_sight=back,
                    raw_lane=raw_lane.astype(np.int64),
                ))

    meta = RecordingMeta(
        recording_id=recording_id,
        frame_rate=fps,
        segment_length=seg,
        geometry={d: LaneGeometry(np.sort(m)) for d, m in image_markings.items()},
    )
    rec = Recording(meta=meta, tracks=tracks, normalized=False)
    rec._raw_markings = image_markings

    # per-frame density with the same counting rule as the pipeline
    rows = []
    for direction in (DIR_UPPER, DIR_LOWER):
        counts: Dict[int, int] = {}
        for tr in tracks:
            if tr.direction != direction:
                continue
            for fr in tr.frames:
                counts[int(fr)] = counts.get(int(fr), 0) + 1
        km_lanes = (seg / 1000.0) * n_lanes
        for fr in sorted(counts):
            rows.append({"recording_id": recording_id, "direction": direction,
                         "frame": fr, "density": counts[fr] / km_lanes})
    density_df = pd.DataFrame(rows, columns=["recording_id", "direction",
                                             "frame", "density"])
    return rec, events, density_df


def generate_corpus(config: ScenarioConfig, n_recordings: int, out_dir,
                    ) -> Dict[str, Path]:
    """Write a corpus of recordings plus its ground-truth manifest.

    File sets are named 01_, 02_, ... in the three-file convention; the
    manifest tables are ``manifest_events.csv`` and
    ``manifest_density.csv``. Byte-identical under the same seed.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lo, hi = config.density_range
    if n_recordings > 1:
        densities = np.linspace(lo, hi, n_recordings)
    else:
        densities = np.array([0.5 * (lo + hi)])
    all_events: List[Dict] = []
    density_frames = []
    for i in range(n_recordings):
        rid = i + 1
        rec, events, density_df = generate_recording(config, rid, float(densities[i]))
        write_recording(rec, out_dir, f"{rid:02d}")
        all_events.extend(events)
        density_frames.append(density_df)
    events_df = pd.DataFrame(all_events, columns=[
        "recording_id", "vehicle_id", "direction", "t_cross", "t_begin",
        "t_end", "duration", "max_vy", "density", "truncated"])
    density_all = (pd.concat(density_frames, ignore_index=True)
                   if density_frames else pd.DataFrame())
    paths = {
        "events": out_dir / "manifest_events.csv",
        "density": out_dir / "manifest_density.csv",
    }
    events_df.to_csv(paths["events"], index=False, float_format="%.9g")
    density_all.to_csv(paths["density"], index=False, float_format="%.9g")
    return paths
