import numpy as np
import pytest
from scipy import integrate

from lanepred.features import FeatureField, FeatureSchema, Standardizer
from lanepred.gmm import EXPERT_DIM_LABELS, GaussianMixtureModel, ManeuverExpert
from lanepred.mlp import ManeuverClassifier
from lanepred.moe import (
    MoEPredictor,
    cv_baseline,
    point_estimate,
    predict_distribution,
    predict_with_labels,
)
from lanepred.types import CLASS_NAMES, ManeuverLabel


def _tiny_schema():
    return FeatureSchema([FeatureField(0, "d_y_cl", "m"),
                          FeatureField(1, "v_y", "m/s")])


def _expert(rng, shift=0.0, k=2):
    """Random well-conditioned 4-dim expert over (v_y, d_y_cl, y, t)."""
    w = rng.dirichlet(np.ones(k))
    means = rng.normal(size=(k, 4)) + shift
    means[:, 3] = np.abs(means[:, 3]) + 2.0  # keep t inside the horizon
    covs = np.empty((k, 4, 4))
    for j in range(k):
        a = rng.normal(size=(4, 4))
        covs[j] = a @ a.T + 4 * np.eye(4)
    return ManeuverExpert("FLW", GaussianMixtureModel(
        w, means, covs, dim_labels=EXPERT_DIM_LABELS))


def _experts(rng):
    return {name: _expert(rng, shift=2.0 * i)
            for i, name in enumerate(CLASS_NAMES)}


def _constant_gate_classifier(logits, d=2):
    """A classifier whose output is softmax(logits) regardless of input."""
    h = 1
    return ManeuverClassifier(
        w1=np.zeros((d, h)), b1=np.zeros(h),
        w2=np.zeros((h, 3)), b2=np.asarray(logits, float),
        standardizer=Standardizer(np.zeros(d), np.ones(d)))


# ---------------------------------------------------------------------------
# Mixture combination

def test_degenerate_gate_equals_single_expert_conditional(rng):
    experts = _experts(rng)
    clf = _constant_gate_classifier([50.0, 0.0, 0.0])  # gate ~ one-hot LCL
    x = np.array([0.3, -0.1])
    pred = predict_distribution(x, clf, experts, schema=_tiny_schema())
    direct = experts["LCL"].condition_on_state(v_y=-0.1, d_y_cl=0.3)
    sel = pred.component_maneuver == int(ManeuverLabel.LCL)
    assert np.allclose(pred.weights[sel], direct.weights, atol=1e-12)
    assert np.allclose(pred.means[sel], direct.means, atol=1e-12)
    assert pred.weights[~sel].sum() < 1e-12


def test_uniform_gate_mean_is_average_of_expert_means(rng):
    experts = _experts(rng)
    clf = _constant_gate_classifier([0.0, 0.0, 0.0])
    x = np.array([0.1, 0.2])
    pred = predict_distribution(x, clf, experts, schema=_tiny_schema())
    per_expert = [experts[n].condition_on_state(0.2, 0.1).mean()
                  for n in CLASS_NAMES]
    assert np.allclose(pred.weights @ pred.means, np.mean(per_expert, axis=0),
                       atol=1e-10)
    assert np.allclose(pred.gate_probs, 1 / 3)


def test_labels_variant_uses_only_true_expert(rng):
    experts = _experts(rng)
    x = np.array([0.0, 0.0])
    pred = predict_with_labels(x, ManeuverLabel.LCR, experts, schema=_tiny_schema())
    assert set(np.unique(pred.component_maneuver[pred.weights > 0])) == {
        int(ManeuverLabel.LCR)}
    direct = experts["LCR"].condition_on_state(0.0, 0.0)
    sel = pred.component_maneuver == int(ManeuverLabel.LCR)
    assert np.allclose(pred.means[sel], direct.means)


def test_labels_variant_rejects_ndef(rng):
    with pytest.raises(ValueError, match="undefined"):
        predict_with_labels(np.zeros(2), ManeuverLabel.NDEF, _experts(rng),
                            schema=_tiny_schema())


def test_feature_length_mismatch(rng):
    clf = _constant_gate_classifier([0.0, 0.0, 0.0], d=3)
    with pytest.raises(ValueError, match="schema"):
        predict_distribution(np.zeros(3), clf, _experts(rng),
                            schema=_tiny_schema())


# ---------------------------------------------------------------------------
# Point estimate

def test_point_estimate_matches_quadrature(rng):
    experts = _experts(rng)
    clf = _constant_gate_classifier([0.5, -0.2, 0.1])
    pred = predict_distribution(np.array([0.4, 0.3]), clf, experts,
                                schema=_tiny_schema())
    for t_star in (0.5, 2.0, 5.0):
        got = point_estimate(pred, t_star)
        # reference: E[y | t*] by 1-d quadrature over the joint density
        def joint(y):
            pts = np.column_stack([np.full_like(y, 0.0) + y, np.full_like(y, t_star)])
            return np.exp(pred_logpdf(pred, pts))
        ys = np.linspace(-40, 40, 20001)
        dens = joint(ys)
        ref = np.trapezoid(dens * ys, ys) / np.trapezoid(dens, ys)
        assert got == pytest.approx(ref, abs=1e-3)


def pred_logpdf(pred, pts):
    model = GaussianMixtureModel(pred.weights, pred.means, pred.covariances)
    return model.logpdf(pts)


def test_point_estimate_time_bounds(rng):
    pred = predict_with_labels(np.zeros(2), ManeuverLabel.FLW, _experts(rng),
                               schema=_tiny_schema())
    with pytest.raises(ValueError):
        point_estimate(pred, 0.0)
    with pytest.raises(ValueError):
        point_estimate(pred, 5.1)


# ---------------------------------------------------------------------------
# Constant-velocity baseline

def test_cv_baseline_cases():
    assert cv_baseline(0.0, 0.2, 5.0) == pytest.approx(1.0)
    assert cv_baseline(1.3, 0.0, 4.0) == pytest.approx(1.3)
    assert cv_baseline(-1.0, -0.5, 2.0) == pytest.approx(-2.0)
    # mirror symmetry
    assert cv_baseline(-0.7, -0.3, 1.5) == -cv_baseline(0.7, 0.3, 1.5)
    with pytest.raises(ValueError):
        cv_baseline(0.0, 0.0, -1.0)


# ---------------------------------------------------------------------------
# Vectorized batch path

def _full_schema_features(rng, n):
    schema = FeatureSchema.default()
    X = rng.normal(size=(n, len(schema)))
    return schema, X


def test_batch_point_estimates_match_scalar_path(rng):
    experts = _experts(rng)
    schema, X = _full_schema_features(rng, 12)
    clf = _constant_gate_classifier([0.3, -0.1, 0.2], d=len(schema))
    predictor = MoEPredictor(clf, experts, schema=schema)
    t_grid = np.array([0.2, 1.0, 2.5, 5.0])
    labels = rng.integers(0, 3, size=12)
    out = predictor.point_estimates(X, t_grid, labels=labels)
    for i in range(len(X)):
        pred = predict_distribution(X[i], clf, experts, schema=schema)
        lab_pred = predict_with_labels(X[i], ManeuverLabel(labels[i]), experts,
                                       schema=schema)
        for j, t in enumerate(t_grid):
            assert out["moe"][i, j] == pytest.approx(point_estimate(pred, t), abs=1e-9)
            assert out["labels"][i, j] == pytest.approx(
                point_estimate(lab_pred, t), abs=1e-9)
            i_vy, i_dy = schema.index_of("v_y"), schema.index_of("d_y_cl")
            assert out["cv"][i, j] == pytest.approx(
                cv_baseline(X[i, i_dy], X[i, i_vy], t))
        assert np.allclose(out["gate"][i], pred.gate_probs, atol=1e-12)


def test_batch_chunking_is_transparent(rng):
    experts = _experts(rng)
    schema, X = _full_schema_features(rng, 50)
    clf = _constant_gate_classifier([0.0, 0.1, -0.1], d=len(schema))
    predictor = MoEPredictor(clf, experts, schema=schema)
    t_grid = np.array([1.0, 3.0])
    a = predictor.point_estimates(X, t_grid, chunk=7)
    b = predictor.point_estimates(X, t_grid, chunk=2048)
    for key in ("moe", "cv", "gate"):
        assert np.array_equal(a[key], b[key]), key


def test_batch_rejects_out_of_horizon_grid(rng):
    experts = _experts(rng)
    schema, X = _full_schema_features(rng, 2)
    clf = _constant_gate_classifier([0.0, 0.0, 0.0], d=len(schema))
    predictor = MoEPredictor(clf, experts, schema=schema)
    with pytest.raises(ValueError):
        predictor.point_estimates(X, np.array([0.0, 1.0]))
    with pytest.raises(ValueError):
        predictor.point_estimates(X, np.array([6.0]))
