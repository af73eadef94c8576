"""Mixture-of-Experts combination: gate probabilities weight the
per-maneuver expert conditionals into one predictive (y, t) mixture,
plus the center-of-gravity point estimate and the constant-velocity
baseline."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from .features import FeatureSchema
from .gmm import GaussianMixtureModel, ManeuverExpert
from .mlp import ManeuverClassifier
from .types import DEFAULT_HORIZON, CLASS_NAMES, ManeuverLabel, MixturePrediction

LOG_2PI = float(np.log(2.0 * np.pi))


def _combine(gate: np.ndarray, conditionals) -> MixturePrediction:
    weights, means, covs, prov = [], [], [], []
    for cls_idx, cond in enumerate(conditionals):
        weights.append(gate[cls_idx] * cond.weights)
        means.append(cond.means)
        covs.append(cond.covariances)
        prov.append(np.full(cond.n_components, cls_idx, dtype=np.int64))
    w = np.concatenate(weights)
    w = w / w.sum()
    return MixturePrediction(
        weights=w,
        means=np.concatenate(means, axis=0),
        covariances=np.concatenate(covs, axis=0),
        component_maneuver=np.concatenate(prov),
        gate_probs=np.asarray(gate, dtype=float),
    )


def predict_distribution(features: np.ndarray, classifier: ManeuverClassifier,
                         experts: Dict[str, ManeuverExpert],
                         schema: Optional[FeatureSchema] = None) -> MixturePrediction:
    """Soft MoE prediction: every expert is conditioned on the current
    lateral state and its components are reweighted by the gate
    probability of the expert's maneuver class."""
    schema = schema or FeatureSchema.default()
    features = np.asarray(features, dtype=float)
    if features.size != len(schema):
        raise ValueError("feature vector does not match the schema length")
    gate = classifier.forward(features)
    v_y = float(features[schema.index_of("v_y")])
    d_y_cl = float(features[schema.index_of("d_y_cl")])
    conds = [experts[name].condition_on_state(v_y, d_y_cl) for name in CLASS_NAMES]
    return _combine(gate, conds)


def predict_with_labels(features: np.ndarray, label: ManeuverLabel,
                        experts: Dict[str, ManeuverExpert],
                        schema: Optional[FeatureSchema] = None) -> MixturePrediction:
    """Perfect-classifier variant: the gate is the one-hot true label."""
    if label == ManeuverLabel.NDEF:
        raise ValueError("undefined samples have no expert")
    schema = schema or FeatureSchema.default()
    features = np.asarray(features, dtype=float)
    gate = np.zeros(3)
    gate[int(label)] = 1.0
    v_y = float(features[schema.index_of("v_y")])
    d_y_cl = float(features[schema.index_of("d_y_cl")])
    conds = [experts[name].condition_on_state(v_y, d_y_cl) for name in CLASS_NAMES]
    return _combine(gate, conds)


def point_estimate(prediction: MixturePrediction, t_star: float,
                   horizon: float = DEFAULT_HORIZON) -> float:
    """Center of gravity of y after conditioning the mixture on t = t*."""
    if not (0.0 < t_star <= horizon):
        raise ValueError(f"prediction time {t_star} outside (0, {horizon}]")
    m_y = prediction.means[:, 0]
    m_t = prediction.means[:, 1]
    c_yt = prediction.covariances[:, 0, 1]
    c_tt = prediction.covariances[:, 1, 1]
    log_w = (np.log(np.maximum(prediction.weights, 1e-300))
             - 0.5 * (LOG_2PI + np.log(c_tt) + (t_star - m_t) ** 2 / c_tt))
    log_w -= logsumexp(log_w)
    w = np.exp(log_w)
    cond_mean = m_y + c_yt / c_tt * (t_star - m_t)
    return float(w @ cond_mean)


def cv_baseline(y: float, v_y: float, t_star: float) -> float:
    """Constant-velocity extrapolation of the lateral position."""
    if t_star < 0:
        raise ValueError("prediction time must be nonnegative")
    return y + v_y * t_star


# ---------------------------------------------------------------------------
# Vectorized batch path used by the CLI / evaluation pipeline

@dataclass
class _ExpertBlocks:
    """Per-component constants of one expert for fast conditioning."""

    mu_b: np.ndarray  # (K, 2) means of (v_y, d_y_cl)
    mu_a: np.ndarray  # (K, 2) means of (y, t)
    gain: np.ndarray  # (K, 2, 2) regression of (y, t) on the observation
    cond_cov: np.ndarray  # (K, 2, 2) conditional covariance, constant
    sbb_inv: np.ndarray  # (K, 2, 2)
    log_norm: np.ndarray  # (K,) log w_k - 0.5 log det(2 pi Sbb)


def _expert_blocks(expert: ManeuverExpert) -> _ExpertBlocks:
    model = expert.model
    b = [model.dim_labels.index("v_y"), model.dim_labels.index("d_y_cl")]
    a = [model.dim_labels.index("y"), model.dim_labels.index("t")]
    k = model.n_components
    mu_b = model.means[:, b]
    mu_a = model.means[:, a]
    gain = np.empty((k, 2, 2))
    cond_cov = np.empty((k, 2, 2))
    sbb_inv = np.empty((k, 2, 2))
    log_norm = np.empty(k)
    for j in range(k):
        s_bb = model.covariances[j][np.ix_(b, b)]
        s_ab = model.covariances[j][np.ix_(a, b)]
        s_aa = model.covariances[j][np.ix_(a, a)]
        inv = np.linalg.inv(s_bb)
        sbb_inv[j] = inv
        gain[j] = s_ab @ inv
        cond_cov[j] = s_aa - gain[j] @ s_ab.T
        sign, logdet = np.linalg.slogdet(s_bb)
        log_norm[j] = np.log(model.weights[j]) - 0.5 * (2 * LOG_2PI + logdet)
    return _ExpertBlocks(mu_b, mu_a, gain, cond_cov, sbb_inv, log_norm)


class MoEPredictor:
    """Batch predictor bundling the gate, the three experts and the
    feature schema."""

    def __init__(self, classifier: ManeuverClassifier,
                 experts: Dict[str, ManeuverExpert],
                 schema: Optional[FeatureSchema] = None,
                 horizon: float = DEFAULT_HORIZON):
        self.classifier = classifier
        self.experts = experts
        self.schema = schema or FeatureSchema.default()
        self.horizon = horizon
        self._blocks = [_expert_blocks(experts[name]) for name in CLASS_NAMES]

    def gate(self, X: np.ndarray) -> np.ndarray:
        return np.atleast_2d(self.classifier.forward(X))

    def _per_expert_t_conditionals(self, obs: np.ndarray, t_grid: np.ndarray):
        """For each expert: (log weight, conditional y-mean) per sample,
        component and prediction time; lists of (N, K, T) arrays."""
        out = []
        for blk in self._blocks:
            diff = obs[:, None, :] - blk.mu_b[None]  # (N, K, 2)
            maha = np.einsum("nki,kij,nkj->nk", diff, blk.sbb_inv, diff)
            log_w_state = blk.log_norm[None] - 0.5 * maha  # (N, K)
            # normalize the conditional weights within the expert so the
            # gate probabilities stay the exact class mixture weights
            log_w_state = log_w_state - logsumexp(log_w_state, axis=1, keepdims=True)
            cond_mean = blk.mu_a[None] + np.einsum("kij,nkj->nki", blk.gain, diff)
            m_y = cond_mean[..., 0]  # (N, K)
            m_t = cond_mean[..., 1]
            c_yt = blk.cond_cov[:, 0, 1][None]
            c_tt = blk.cond_cov[:, 1, 1][None]
            dt = t_grid[None, None, :] - m_t[..., None]  # (N, K, T)
            log_w = (log_w_state[..., None]
                     - 0.5 * (LOG_2PI + np.log(c_tt)[..., None] + dt ** 2 / c_tt[..., None]))
            mean_y = m_y[..., None] + (c_yt / c_tt)[..., None] * dt
            out.append((log_w, mean_y))
        return out

    def point_estimates(self, X: np.ndarray, t_grid: np.ndarray,
                        labels: Optional[np.ndarray] = None,
                        chunk: int = 2048) -> Dict[str, np.ndarray]:
        """Point estimates on a horizon grid for a batch of raw samples.

        Returns 'moe' and 'cv' (N, T) arrays plus 'gate' (N, 3); when
        true labels are given, also the perfect-classifier 'labels'
        variant.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        t_grid = np.asarray(t_grid, dtype=float)
        if np.any((t_grid <= 0) | (t_grid > self.horizon + 1e-9)):
            raise ValueError("prediction times must lie in (0, horizon]")
        n, t_len = X.shape[0], t_grid.size
        i_vy = self.schema.index_of("v_y")
        i_dy = self.schema.index_of("d_y_cl")

        gate = self.gate(X)
        y_moe = np.empty((n, t_len))
        y_lab = np.empty((n, t_len)) if labels is not None else None
        for start in range(0, n, chunk):
            sl = slice(start, min(start + chunk, n))
            obs = X[sl][:, [i_vy, i_dy]]
            conds = self._per_expert_t_conditionals(obs, t_grid)
            log_ws = []
            means = []
            for cls_idx, (log_w, mean_y) in enumerate(conds):
                g = np.maximum(gate[sl, cls_idx], 1e-300)
                log_ws.append(log_w + np.log(g)[:, None, None])
                means.append(mean_y)
            log_w_all = np.concatenate(log_ws, axis=1)  # (n, Ktot, T)
            mean_all = np.concatenate(means, axis=1)
            log_w_all -= logsumexp(log_w_all, axis=1, keepdims=True)
            y_moe[sl] = np.einsum("nkt,nkt->nt", np.exp(log_w_all), mean_all)

            if labels is not None:
                lab = np.asarray(labels)[sl]
                y_block = np.empty((lab.size, t_len))
                for cls_idx, (log_w, mean_y) in enumerate(conds):
                    mask = lab == cls_idx
                    if not np.any(mask):
                        continue
                    lw = log_w[mask] - logsumexp(log_w[mask], axis=1, keepdims=True)
                    y_block[mask] = np.einsum("nkt,nkt->nt", np.exp(lw), mean_y[mask])
                y_lab[sl] = y_block

        y_cv = X[:, [i_dy]] + X[:, [i_vy]] * t_grid[None, :]
        out = {"moe": y_moe, "cv": y_cv, "gate": gate}
        if labels is not None:
            out["labels"] = y_lab
        return out
