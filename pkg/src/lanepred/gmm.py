"""Per-maneuver experts: full-covariance Gaussian mixtures over the
joint (v_y, d_y_cl, y, t), fit by EM with automatic kernel-count
selection and conditionable to predictive distributions over (y, t)."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from . import kernels
from .types import DEFAULT_HORIZON, Track

MAX_KERNELS = 50
EXPERT_DIM_LABELS = ("v_y", "d_y_cl", "y", "t")
DEFAULT_GRID_STEP = 0.2  # s, trajectory grid over (0, horizon]
COV_REG = 1e-6  # eigenvalue floor of every covariance
MODEL_FORMAT_VERSION = 1


def horizon_grid(horizon: float = DEFAULT_HORIZON,
                 step: float = DEFAULT_GRID_STEP) -> np.ndarray:
    n = int(round(horizon / step))
    return step * np.arange(1, n + 1)


def _regularize_cov(cov: np.ndarray, floor: float = COV_REG) -> np.ndarray:
    cov = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(cov)
    vals = np.maximum(vals, floor)
    return (vecs * vals) @ vecs.T


class GaussianMixtureModel:
    """Weighted full-covariance Gaussian mixture with labeled dimensions."""

    def __init__(self, weights, means, covariances,
                 dim_labels: Optional[Sequence[str]] = None):
        self.weights = np.asarray(weights, dtype=float)
        self.means = np.atleast_2d(np.asarray(means, dtype=float))
        self.covariances = np.asarray(covariances, dtype=float)
        if self.covariances.ndim == 2:
            self.covariances = self.covariances[None]
        self.dim_labels = tuple(dim_labels) if dim_labels else tuple(
            f"x{i}" for i in range(self.means.shape[1]))
        if abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must sum to 1")
        self._chols = np.linalg.cholesky(self.covariances)

    @property
    def n_components(self) -> int:
        return self.weights.size

    @property
    def n_dim(self) -> int:
        return self.means.shape[1]

    def log_joint(self, points: np.ndarray) -> np.ndarray:
        """(N, K) array of log w_k + log N(x_n; mu_k, Sigma_k)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return kernels.mixture_log_joint(
            pts, self.means, self._chols, np.log(self.weights))

    def logpdf(self, points: np.ndarray) -> np.ndarray:
        """Log mixture density, computed stably in the log domain."""
        single = np.asarray(points).ndim == 1
        out = logsumexp(self.log_joint(points), axis=1)
        return float(out[0]) if single else out

    def marginal(self, dims: Sequence[int]) -> "GaussianMixtureModel":
        dims = list(dims)
        return GaussianMixtureModel(
            self.weights,
            self.means[:, dims],
            self.covariances[:, dims][:, :, dims],
            [self.dim_labels[i] for i in dims],
        )

    def mean(self) -> np.ndarray:
        return self.weights @ self.means

    def condition(self, observed: Dict[int, float]) -> "GaussianMixtureModel":
        """Condition on exact values of a subset of dimensions.

        Standard per-component Gaussian conditioning; component weights
        are reweighted by each component's marginal density at the
        observation and renormalized.
        """
        obs_idx = sorted(observed)
        if not obs_idx:
            return self
        rem_idx = [i for i in range(self.n_dim) if i not in obs_idx]
        if not rem_idx:
            raise ValueError("cannot condition on every dimension")
        xb = np.array([observed[i] for i in obs_idx], dtype=float)

        k = self.n_components
        new_means = np.empty((k, len(rem_idx)))
        new_covs = np.empty((k, len(rem_idx), len(rem_idx)))
        log_w = np.empty(k)
        for j in range(k):
            mu_a = self.means[j][rem_idx]
            mu_b = self.means[j][obs_idx]
            s_aa = self.covariances[j][np.ix_(rem_idx, rem_idx)]
            s_ab = self.covariances[j][np.ix_(rem_idx, obs_idx)]
            s_bb = self.covariances[j][np.ix_(obs_idx, obs_idx)]
            try:
                chol_b = np.linalg.cholesky(s_bb)
            except np.linalg.LinAlgError:
                raise np.linalg.LinAlgError(
                    f"singular observed-block covariance in component {j}")
            sol = np.linalg.solve(s_bb, xb - mu_b)
            gain = np.linalg.solve(s_bb, s_ab.T).T
            new_means[j] = mu_a + s_ab @ sol
            new_covs[j] = _regularize_cov(s_aa - gain @ s_ab.T)
            maha = float((xb - mu_b) @ sol)
            log_det = 2.0 * np.sum(np.log(np.diag(chol_b)))
            log_w[j] = (np.log(self.weights[j])
                        - 0.5 * (len(obs_idx) * np.log(2 * np.pi) + log_det + maha))
        log_w -= logsumexp(log_w)
        return GaussianMixtureModel(
            np.exp(log_w) / np.exp(log_w).sum(),
            new_means, new_covs,
            [self.dim_labels[i] for i in rem_idx],
        )

    def condition_on_labels(self, observed: Dict[str, float]) -> "GaussianMixtureModel":
        return self.condition({self.dim_labels.index(k): v for k, v in observed.items()})


# ---------------------------------------------------------------------------
# EM fitting

def _seed_means(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Distance-weighted (kmeans++-style) seeding for robust starts."""
    n = points.shape[0]
    means = np.empty((k, points.shape[1]))
    means[0] = points[rng.integers(n)]
    d2 = np.sum((points - means[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            means[j] = points[rng.integers(n)]
        else:
            means[j] = points[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((points - means[j]) ** 2, axis=1))
    return means


def fit_em(points: np.ndarray, n_components: int, regularization: float = COV_REG,
           seed: int = 0, max_iter: int = 500, tol: float = 1e-6,
           dim_labels: Optional[Sequence[str]] = None,
           ) -> Tuple[GaussianMixtureModel, List[float]]:
    """EM to convergence; returns the mixture and the per-iteration mean
    log-likelihood trace (non-decreasing by construction, asserted).

    Components whose weight collapses below 1e-8 are dropped with a
    notice. Deterministic under the seed.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = points.shape
    if n_components > MAX_KERNELS:
        raise ValueError(f"kernel count {n_components} exceeds the cap of {MAX_KERNELS}")
    if n < 10 * n_components:
        raise ValueError(f"need at least {10 * n_components} points for K={n_components}")

    rng = np.random.default_rng(seed)
    means = _seed_means(points, n_components, rng)
    base_cov = _regularize_cov(np.cov(points.T).reshape(d, d), regularization)
    covs = np.repeat(base_cov[None], n_components, axis=0)
    weights = np.full(n_components, 1.0 / n_components)

    trace: List[float] = []
    prev_ll = -np.inf
    for _ in range(max_iter):
        model = GaussianMixtureModel(weights, means, covs, dim_labels)
        log_joint = model.log_joint(points)
        log_norm = logsumexp(log_joint, axis=1)
        ll = float(np.mean(log_norm))
        assert ll >= prev_ll - 1e-9, "EM log-likelihood decreased"
        trace.append(ll)

        resp = np.exp(log_joint - log_norm[:, None])
        nk = resp.sum(axis=0)
        keep = nk / n >= 1e-8
        if not np.all(keep):
            warnings.warn(
                f"dropping {int(np.sum(~keep))} degenerate mixture component(s)")
            resp = resp[:, keep]
            nk = nk[keep]
            means = means[keep]
            covs = covs[keep]
        k = nk.size
        weights = nk / nk.sum()
        means = (resp.T @ points) / nk[:, None]
        for j in range(k):
            diff = points - means[j]
            cov = (resp[:, j][:, None] * diff).T @ diff / nk[j]
            covs[j] = _regularize_cov(cov, regularization)

        if ll - prev_ll < tol * max(1.0, abs(ll)) and np.isfinite(prev_ll):
            break
        prev_ll = ll

    model = GaussianMixtureModel(weights, means, covs, dim_labels)
    return model, trace


def select_kernels(points: np.ndarray, k_max: int = MAX_KERNELS, seed: int = 0,
                   regularization: float = COV_REG,
                   dim_labels: Optional[Sequence[str]] = None,
                   ) -> Tuple[GaussianMixtureModel, List[Dict]]:
    """Fit a geometric ladder of kernel counts and keep the best by the
    Bayesian information criterion; returns (model, selection trace)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = points.shape
    ladder = [k for k in (1, 2, 4, 8, 16, 32, 50) if k <= min(k_max, n // 10)]
    if not ladder:
        raise ValueError("too few points for even a single kernel")
    best = None
    trace: List[Dict] = []
    for k in ladder:
        model, ll_trace = fit_em(points, k, regularization, seed=seed,
                                 dim_labels=dim_labels)
        k_eff = model.n_components
        n_params = (k_eff - 1) + k_eff * d + k_eff * d * (d + 1) // 2
        total_ll = ll_trace[-1] * n
        bic = -2.0 * total_ll + n_params * np.log(n)
        trace.append({"requested_k": k, "effective_k": k_eff,
                      "loglik": total_ll, "bic": bic})
        if best is None or bic < best[0]:
            best = (bic, model)
    return best[1], trace


# ---------------------------------------------------------------------------
# Expert datasets and the expert wrapper

def build_expert_dataset(samples: Iterable[Tuple[Track, int]], frame_rate: float,
                         grid: Optional[np.ndarray] = None) -> np.ndarray:
    """4-dim point set (v_y, d_y_cl, y_future, t) for one maneuver class.

    ``y_future`` is the lateral offset at the future instant relative to
    the sample's current lane center, so the experts are pose-invariant
    along the road. Truncated futures contribute only covered grid
    points.
    """
    if grid is None:
        grid = horizon_grid()
    rows = []
    for track, row in samples:
        times = track.frames / frame_rate
        t_now = times[row]
        center_now = track.y[row] - track.d_y_cl[row]
        future_t = t_now + grid
        covered = future_t <= times[-1] + 1e-9
        if not np.any(covered):
            continue
        y_future = np.interp(future_t[covered], times, track.y) - center_now
        m = int(np.sum(covered))
        block = np.empty((m, 4))
        block[:, 0] = track.vy[row]
        block[:, 1] = track.d_y_cl[row]
        block[:, 2] = y_future
        block[:, 3] = grid[covered]
        rows.append(block)
    if not rows:
        return np.empty((0, 4))
    return np.concatenate(rows, axis=0)


@dataclass
class ManeuverExpert:
    """A fitted mixture plus its provenance for one maneuver class."""

    maneuver: str
    model: GaussianMixtureModel
    selection_trace: List[Dict] = field(default_factory=list)
    final_loglik: float = 0.0
    seed: int = 0

    def condition_on_state(self, v_y: float, d_y_cl: float) -> GaussianMixtureModel:
        """Predictive mixture over (y, t) given the current lateral state."""
        return self.model.condition_on_labels({"v_y": v_y, "d_y_cl": d_y_cl})

    def to_json(self) -> str:
        return json.dumps({
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "maneuver_expert",
            "maneuver": self.maneuver,
            "dim_labels": list(self.model.dim_labels),
            "weights": self.model.weights.tolist(),
            "means": self.model.means.tolist(),
            "covariances": self.model.covariances.tolist(),
            "selection_trace": self.selection_trace,
            "final_loglik": self.final_loglik,
            "seed": self.seed,
        })

    @classmethod
    def from_json(cls, text: str) -> "ManeuverExpert":
        d = json.loads(text)
        if d.get("kind") != "maneuver_expert":
            raise ValueError("not a maneuver expert artifact")
        return cls(
            maneuver=d["maneuver"],
            model=GaussianMixtureModel(
                np.array(d["weights"]), np.array(d["means"]),
                np.array(d["covariances"]), d["dim_labels"]),
            selection_trace=d["selection_trace"],
            final_loglik=float(d["final_loglik"]),
            seed=int(d["seed"]),
        )


def fit_expert(maneuver: str, points: np.ndarray, seed: int = 0,
               k_max: int = MAX_KERNELS) -> ManeuverExpert:
    model, trace = select_kernels(points, k_max=k_max, seed=seed,
                                  dim_labels=EXPERT_DIM_LABELS)
    chosen = min(trace, key=lambda r: r["bic"])
    return ManeuverExpert(maneuver=maneuver, model=model,
                          selection_trace=trace,
                          final_loglik=float(chosen["loglik"]), seed=seed)
