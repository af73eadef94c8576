"""Evaluation metrics and context studies: ROC/AUC, balanced accuracy,
decision time gain, lateral prediction errors, and the traffic-density
stratifications."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .types import CLASS_NAMES, LaneChangeEvent


# ---------------------------------------------------------------------------
# Maneuver classification metrics

def roc_curve(scores: np.ndarray, positives: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """ROC points (fpr, tpr) by threshold sweep over distinct scores.

    Tied scores move together, which makes the trapezoid area equal to
    the pairwise (Mann-Whitney) ranking statistic with ties counted 1/2.
    """
    scores = np.asarray(scores, dtype=float)
    positives = np.asarray(positives, dtype=bool)
    n_pos = int(positives.sum())
    n_neg = positives.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs at least one positive and one negative")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    p = positives[order].astype(float)
    tp = np.cumsum(p)
    fp = np.cumsum(1.0 - p)
    distinct = np.flatnonzero(np.diff(s) != 0)
    idx = np.concatenate([distinct, [s.size - 1]])
    tpr = np.concatenate([[0.0], tp[idx] / n_pos])
    fpr = np.concatenate([[0.0], fp[idx] / n_neg])
    return fpr, tpr


def auc_from_roc(fpr: np.ndarray, tpr: np.ndarray) -> float:
    return float(np.trapezoid(tpr, fpr))


def roc_auc(scores: np.ndarray, labels: np.ndarray,
            class_names: Sequence[str] = CLASS_NAMES) -> Dict[str, Dict]:
    """One-vs-rest ROC and AUC per class.

    ``scores`` is (N, C) class probabilities, ``labels`` the true class
    indices. Classes missing positives or negatives raise.
    """
    scores = np.atleast_2d(np.asarray(scores, dtype=float))
    labels = np.asarray(labels, dtype=int)
    out: Dict[str, Dict] = {}
    for c, name in enumerate(class_names):
        fpr, tpr = roc_curve(scores[:, c], labels == c)
        out[name] = {"fpr": fpr, "tpr": tpr, "auc": auc_from_roc(fpr, tpr)}
    return out


def bacc(predicted: np.ndarray, truth: np.ndarray, n_classes: int = 3,
         ) -> Tuple[float, List[str]]:
    """Balanced accuracy: mean of per-class recalls.

    Classes absent from the truth are excluded; their names are returned
    in the notes list.
    """
    predicted = np.asarray(predicted, dtype=int)
    truth = np.asarray(truth, dtype=int)
    if predicted.shape != truth.shape:
        raise ValueError("prediction/truth length mismatch")
    recalls = []
    notes = []
    for c in range(n_classes):
        mask = truth == c
        if not np.any(mask):
            notes.append(f"class {CLASS_NAMES[c] if c < 3 else c} absent from truth")
            continue
        recalls.append(float(np.mean(predicted[mask] == c)))
    return float(np.mean(recalls)), notes


def time_gain(times: np.ndarray, argmax_classes: np.ndarray, true_class: int,
              t_cross: float, probs: Optional[np.ndarray] = None,
              threshold: Optional[float] = None) -> float:
    """Decision time gain of one lane change.

    The classifier is "decided" from the earliest frame from which its
    argmax equals the true class at every frame up to the crossing (the
    end of the situation). Unstable sequences yield 0. With ``threshold``
    set (sensitivity variant), a frame additionally needs the true-class
    probability to reach the threshold to count as decided.
    """
    times = np.asarray(times, dtype=float)
    cls = np.asarray(argmax_classes, dtype=int)
    mask = times <= t_cross + 1e-9
    if not np.any(mask) or times.size == 0:
        raise ValueError("crossing instant outside the covered interval")
    times = times[mask]
    cls = cls[mask]
    correct = cls == true_class
    if threshold is not None:
        if probs is None:
            raise ValueError("threshold variant needs per-frame probabilities")
        p = np.atleast_2d(np.asarray(probs, dtype=float))[mask]
        correct &= p[:, true_class] >= threshold
    if not correct[-1]:
        return 0.0
    i = correct.size - 1
    while i > 0 and correct[i - 1]:
        i -= 1
    return float(t_cross - times[i])


def mean_time_gain(gains: Sequence[float]) -> Tuple[float, float]:
    """Average time gain with unstable situations counted as 0; also
    returns the unstable fraction."""
    g = np.asarray(list(gains), dtype=float)
    if g.size == 0:
        return 0.0, 0.0
    return float(g.mean()), float(np.mean(g == 0.0))


# ---------------------------------------------------------------------------
# Position prediction metrics

QUANTILE_LEVELS = (0.05, 0.25, 0.5, 0.75, 0.95)


def lateral_error(predicted: np.ndarray, truth: np.ndarray,
                  valid: Optional[np.ndarray] = None) -> Dict:
    """Absolute lateral errors per sample and horizon plus quantile
    summaries; samples with truncated futures are skipped per horizon."""
    predicted = np.atleast_2d(np.asarray(predicted, dtype=float))
    truth = np.atleast_2d(np.asarray(truth, dtype=float))
    if predicted.shape != truth.shape:
        raise ValueError("prediction/truth shape mismatch")
    if valid is None:
        valid = np.isfinite(truth)
    errors = np.where(valid, np.abs(predicted - truth), np.nan)
    n_t = errors.shape[1]
    quantiles = np.full((n_t, len(QUANTILE_LEVELS)), np.nan)
    counts = np.zeros(n_t, dtype=int)
    skipped = np.zeros(n_t, dtype=int)
    for t in range(n_t):
        col = errors[:, t]
        ok = np.isfinite(col)
        counts[t] = int(ok.sum())
        skipped[t] = int((~ok).sum())
        if counts[t]:
            quantiles[t] = np.quantile(col[ok], QUANTILE_LEVELS)
    return {"errors": errors, "quantiles": quantiles,
            "quantile_levels": QUANTILE_LEVELS, "counts": counts,
            "skipped": skipped}


def density_bin_edges(densities: np.ndarray, width: float = 1.0) -> np.ndarray:
    """Uniform bins of the given width covering the observed range."""
    d = np.asarray(densities, dtype=float)
    lo = np.floor(d.min() / width) * width
    hi = np.ceil(d.max() / width) * width
    if hi <= lo:
        hi = lo + width
    return np.arange(lo, hi + 0.5 * width, width)


def stratify_by_density(errors: np.ndarray, labels: np.ndarray,
                        densities: np.ndarray, bin_edges: np.ndarray,
                        min_count: int = 30) -> List[Dict]:
    """Median error per (maneuver class, density bin).

    Empty bins are reported with count 0 and bins below ``min_count``
    are flagged low-confidence rather than dropped.
    """
    errors = np.asarray(errors, dtype=float)
    labels = np.asarray(labels, dtype=int)
    densities = np.asarray(densities, dtype=float)
    bins = np.clip(np.digitize(densities, bin_edges) - 1, 0, len(bin_edges) - 2)
    rows = []
    for c, name in enumerate(CLASS_NAMES):
        for b in range(len(bin_edges) - 1):
            mask = (labels == c) & (bins == b) & np.isfinite(errors)
            count = int(mask.sum())
            rows.append({
                "class": name,
                "bin_low": float(bin_edges[b]),
                "bin_high": float(bin_edges[b + 1]),
                "count": count,
                "median_error": float(np.median(errors[mask])) if count else np.nan,
                "low_confidence": count < min_count,
            })
    return rows


def lc_stats_vs_density(events: Sequence[LaneChangeEvent],
                        bin_edges: np.ndarray) -> List[Dict]:
    """Per-density-bin quartile statistics of lane-change duration and
    maximum lateral speed. Truncated events are excluded."""
    kept = [e for e in events if not e.truncated]
    rows = []
    if not kept:
        return rows
    td = np.array([e.traffic_density for e in kept])
    dur = np.array([e.duration for e in kept])
    vmax = np.array([e.max_vy for e in kept])
    bins = np.clip(np.digitize(td, bin_edges) - 1, 0, len(bin_edges) - 2)
    for b in range(len(bin_edges) - 1):
        mask = bins == b
        count = int(mask.sum())
        row = {"bin_low": float(bin_edges[b]), "bin_high": float(bin_edges[b + 1]),
               "count": count}
        for key, arr in (("duration", dur), ("max_vy", vmax)):
            if count:
                q = np.quantile(arr[mask], (0.25, 0.5, 0.75))
                row[f"{key}_q25"], row[f"{key}_median"], row[f"{key}_q75"] = map(float, q)
            else:
                row[f"{key}_q25"] = row[f"{key}_median"] = row[f"{key}_q75"] = np.nan
        rows.append(row)
    return rows
