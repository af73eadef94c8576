import math

import numpy as np
import pytest

from lanepred.labeling import (
    SamplingPlan,
    compute_times,
    compute_times_track,
    label_sample,
    label_samples,
    split_folds,
    undersample,
)
from lanepred.types import NO_EVENT, LaneChangeEvent, ManeuverLabel
from conftest import track_from_kinematics


def _event(direction, t_cross, vid=1):
    return LaneChangeEvent(vid, 1, direction, t_cross=t_cross,
                           t_begin=max(t_cross - 1, 0.0), t_end=t_cross + 1,
                           duration=min(t_cross, 1.0) + 1, max_vy=1.0,
                           traffic_density=0.0)


def _flat_track(n=251, fps=25.0):
    t = np.arange(n) / fps
    z = np.zeros(n)
    return track_from_kinematics(t, np.full(n, 2.0), z, z, fps=fps)


# ---------------------------------------------------------------------------
# Timing quantities

def test_compute_times_basic():
    track = _flat_track()
    events = [_event("left", 6.0), _event("right", 3.0), _event("left", 8.0)]
    t_lcl, t_lcr, t_o = compute_times(track, 25, events, 25.0)  # t_now = 1 s
    assert t_lcl == pytest.approx(5.0)
    assert t_lcr == pytest.approx(2.0)
    assert t_o == pytest.approx(9.0)


def test_compute_times_no_events_and_last_frame():
    track = _flat_track()
    t_lcl, t_lcr, t_o = compute_times(track, len(track) - 1, [], 25.0)
    assert t_lcl == NO_EVENT and t_lcr == NO_EVENT
    assert t_o == 0.0


def test_compute_times_track_matches_scalar_brute_force(rng):
    track = _flat_track()
    events = [_event(d, tc) for d, tc in
              zip(rng.choice(["left", "right"], 6), rng.uniform(0, 10, 6))]
    t_lcl, t_lcr, t_o = compute_times_track(track, events, 25.0)
    for row in rng.choice(len(track), 40, replace=False):
        ref = compute_times(track, int(row), events, 25.0)
        assert (t_lcl[row], t_lcr[row], t_o[row]) == pytest.approx(ref)


# ---------------------------------------------------------------------------
# Labeling rule

def test_label_sample_named_cases():
    assert label_sample(3, 8, 20, 5) == ManeuverLabel.LCL
    assert label_sample(NO_EVENT, NO_EVENT, 10, 5) == ManeuverLabel.FLW
    assert label_sample(NO_EVENT, NO_EVENT, 2, 5) == ManeuverLabel.NDEF
    assert label_sample(4, 4, 20, 5) == ManeuverLabel.LCL  # tie goes left
    assert label_sample(8, 3, 20, 5) == ManeuverLabel.LCR
    assert label_sample(3, 8, 2, 5) == ManeuverLabel.NDEF  # leaves range first


def test_label_sample_rejects_negative_times():
    with pytest.raises(ValueError):
        label_sample(-1.0, 3.0, 10.0)
    with pytest.raises(ValueError):
        label_sample(3.0, 1.0, -0.5)


def test_label_samples_matches_scalar(rng):
    n = 3000
    vals = rng.uniform(0, 12, size=(n, 3))
    sentinel = rng.random((n, 2)) < 0.3
    t_lcl = np.where(sentinel[:, 0], NO_EVENT, vals[:, 0])
    t_lcr = np.where(sentinel[:, 1], NO_EVENT, vals[:, 1])
    out = label_samples(t_lcl, t_lcr, vals[:, 2])
    for i in range(n):
        assert out[i] == int(label_sample(t_lcl[i], t_lcr[i], vals[i, 2]))


# ---------------------------------------------------------------------------
# Folds

def test_split_folds_balanced_counts():
    keys = [(1, v) for v in range(60)]
    folds = split_folds(keys, 6, seed=0)
    counts = np.bincount([folds[k] for k in keys], minlength=7)[1:]
    assert np.all(counts == 10)


def test_split_folds_deterministic_and_errors():
    keys = [(1, v) for v in range(10)]
    assert split_folds(keys, 3, seed=7) == split_folds(keys, 3, seed=7)
    assert split_folds(keys, 3, seed=7) != split_folds(keys, 3, seed=8)
    with pytest.raises(ValueError):
        split_folds(keys, 11)


# ---------------------------------------------------------------------------
# Undersampling

def _labeled_population(rng, n_lcl=400, n_lcr=600, n_flw=5000):
    labels = np.concatenate([
        np.full(n_lcl, int(ManeuverLabel.LCL)),
        np.full(n_lcr, int(ManeuverLabel.LCR)),
        np.full(n_flw, int(ManeuverLabel.FLW)),
    ])
    tte = np.concatenate([
        rng.uniform(0.01, 5.0, n_lcl),
        rng.uniform(0.01, 5.0, n_lcr),
        np.full(n_flw, math.inf),
    ])
    return labels, tte


def test_undersample_balances_classes_and_bins(rng):
    labels, tte = _labeled_population(rng)
    plan = SamplingPlan(seed=0)
    idx = undersample(labels, tte, plan)
    sel_labels = labels[idx]
    sel_tte = tte[idx]
    n_lcl = int(np.sum(sel_labels == int(ManeuverLabel.LCL)))
    n_lcr = int(np.sum(sel_labels == int(ManeuverLabel.LCR)))
    n_flw = int(np.sum(sel_labels == int(ManeuverLabel.FLW)))
    assert n_lcl == n_lcr == n_flw
    # flat histogram over time-to-event bins for each lane-change class
    for cls in (ManeuverLabel.LCL, ManeuverLabel.LCR):
        t = sel_tte[sel_labels == int(cls)]
        bins = np.clip((np.ceil(t / 0.5) - 1).astype(int), 0, 9)
        counts = np.bincount(bins, minlength=10)
        assert counts.max() == counts.min()


def test_undersample_subset_and_deterministic(rng):
    labels, tte = _labeled_population(rng)
    plan = SamplingPlan(seed=3)
    idx1 = undersample(labels, tte, plan)
    idx2 = undersample(labels, tte, plan)
    assert np.array_equal(idx1, idx2)
    assert np.array_equal(np.unique(idx1), idx1)  # sorted, no duplicates
    assert idx1.max() < labels.size


def test_undersample_warns_on_empty_cell(rng):
    labels, tte = _labeled_population(rng, n_lcl=50)
    tte[labels == int(ManeuverLabel.LCL)] = rng.uniform(0.01, 2.0, 50)  # bins >2 s empty
    with pytest.warns(UserWarning, match="empty undersampling cell"):
        undersample(labels, tte, SamplingPlan(seed=0))


def test_sampling_plan_validates_bin_width():
    with pytest.raises(ValueError):
        SamplingPlan(horizon=5.0, bin_width=0.7)
    assert SamplingPlan(horizon=5.0, bin_width=0.5).n_bins == 10
