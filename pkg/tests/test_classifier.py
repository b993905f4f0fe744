import datetime as dt
import io
import json
import math

import numpy as np
import pytest
from scipy.optimize import minimize
from scipy.stats import entropy as scipy_entropy
from sklearn.metrics import roc_auc_score
from sklearn.svm import SVC

from fakeview.classifier import (
    BASE_SCHEMA, FAKE, FEATURES, NORMAL, UNLABELED, FeatureVector, LabeledExample, LinearModel, LinearSVM,
    SeedParams, TransductiveSVM, TsvmConfig, auc_from_points, classify, classify_many, evaluate_roc,
    extract_video_features, feature_matrix, fit_linear_svm, hinge_objective, roc_curve, seed_label, seed_labels,
    train_tsvm, write_roc_csv,
)
from fakeview.errors import SchemaError, TrainError, UndefinedAUCError
from fakeview.matrix import AccessMatrix
from fakeview.records import Category, VideoMeta


def _blobs(rng, n_pos=40, n_neg=40, gap=3.0):
    pos = rng.normal([3.0, 5.0], 0.5, size=(n_pos, 2))
    neg = rng.normal([3.0, 5.0 - gap], 0.5, size=(n_neg, 2))
    X = np.vstack([pos, neg])
    y = np.r_[np.ones(n_pos), -np.ones(n_neg)]
    return X, y


def _sklearn_objective(X, y, C, sample_weight=None):
    clf = SVC(kernel="linear", C=C, tol=1e-8).fit(X, y, sample_weight=sample_weight)
    cw = C * (np.ones(len(y)) if sample_weight is None else sample_weight)
    return hinge_objective(clf.coef_[0], clf.intercept_[0], X, y, cw)


# -- features and seeds ---------------------------------------------------


def test_log_views_of_hundred_views():
    m = AccessMatrix.from_rows({f"10.0.0.{i}": {"v": 1} for i in range(100)})
    fv = extract_video_features(m)["v"]
    assert fv.log_views == pytest.approx(2.0)
    assert fv.entropy == pytest.approx(math.log(100))


def test_single_ip_video_case():
    m = AccessMatrix.from_rows({"100.0.0.1": {"video1": 10552}})
    fv = extract_video_features(m)["video1"]
    assert fv.log_views == pytest.approx(4.023, abs=5e-4)
    assert fv.entropy == 0.0
    assert seed_label(fv) == FAKE


def test_feature_entropies_match_oracle():
    rng = np.random.default_rng(4)
    rows = {}
    for i in range(60):
        vids = rng.choice(30, size=rng.integers(1, 10), replace=False)
        rows[f"1.0.0.{i}"] = {f"v{j}": int(rng.integers(1, 20)) for j in vids}
    m = AccessMatrix.from_rows(rows)
    feats = extract_video_features(m)
    for vid, fv in feats.items():
        col = [r[vid] for r in rows.values() if vid in r]
        assert fv.entropy == pytest.approx(scipy_entropy(col), abs=1e-12)
        assert fv.log_views == pytest.approx(math.log10(sum(col)))


def test_day_diff_from_meta_and_missing():
    m = AccessMatrix.from_rows({"1.1.1.1": {"a": 3, "b": 2}})
    day = dt.date(2013, 9, 4)
    meta = {"a": VideoMeta("a", Category.MV, day - dt.timedelta(days=12))}
    feats = extract_video_features(m, meta, day)
    assert feats["a"].day_diff == 12.0
    assert feats["b"].day_diff is None
    assert np.isnan(feature_matrix([feats["b"]], FEATURES)[0, 2])


def test_min_views_filter():
    m = AccessMatrix.from_rows({"1.1.1.1": {"a": 3, "b": 200}})
    assert set(extract_video_features(m, min_views=100)) == {"b"}


@pytest.mark.parametrize("fv,expected", [
    (FeatureVector(2.0, math.log(100)), NORMAL),
    (FeatureVector(math.log10(10552), 0.0), FAKE),
    (FeatureVector(3.0, 3.0), UNLABELED),
    (FeatureVector(1.5, 0.1), UNLABELED),  # too few views for a fake seed
])
def test_seed_rule(fv, expected):
    assert seed_label(fv) == expected


def test_seed_params_respected():
    fv = FeatureVector(3.0, 0.4)
    assert seed_label(fv) == UNLABELED
    assert seed_label(fv, SeedParams(eps_lo=0.5)) == FAKE
    out = seed_labels({"x": fv})
    assert out["x"] == LabeledExample(fv, UNLABELED)


# -- inner SVM --------------------------------------------------------------


@pytest.mark.parametrize("seed", range(4))
def test_smo_matches_brute_force_on_tiny_instance(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(6, 2))
    y = np.array([1, 1, 1, -1, -1, -1], dtype=float)
    C = rng.uniform(0.2, 2.0, size=6)
    w, b, smo = fit_linear_svm(X, y, C, eps=1e-8)
    assert smo.converged
    ours = hinge_objective(w, b, X, y, C)
    best = min(
        minimize(lambda p: hinge_objective(p[:2], p[2], X, y, C), x0, method="Nelder-Mead",
                 options=dict(xatol=1e-10, fatol=1e-12, maxiter=20000)).fun
        for x0 in rng.normal(size=(20, 3))
    )
    assert ours <= best + 1e-6


@pytest.mark.parametrize("seed", range(3))
def test_smo_matches_libsvm_objective(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(80, 3))
    y = np.where(X @ [1.0, -2.0, 0.5] + rng.normal(0, 1.0, 80) > 0, 1.0, -1.0)
    w, b, _ = fit_linear_svm(X, y, np.full(80, 0.7), eps=1e-6)
    ours = hinge_objective(w, b, X, y, np.full(80, 0.7))
    ref = _sklearn_objective(X, y, 0.7)
    assert ours == pytest.approx(ref, rel=1e-4)


def test_per_sample_costs_match_libsvm_sample_weight():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(60, 2))
    y = np.where(X[:, 0] + 0.3 * rng.normal(size=60) > 0, 1.0, -1.0)
    sw = rng.uniform(0.1, 3.0, size=60)
    w, b, _ = fit_linear_svm(X, y, 1.5 * sw, eps=1e-7)
    assert hinge_objective(w, b, X, y, 1.5 * sw) == pytest.approx(_sklearn_objective(X, y, 1.5, sw), rel=1e-4)


def test_linear_svm_estimator_api():
    rng = np.random.default_rng(0)
    X, y = _blobs(rng)
    clf = LinearSVM(C=2.0).fit(X, y)
    assert clf.get_params() == {"C": 2.0, "standardize": True, "tol": 1e-4}
    assert clf.score(X, y) == 1.0
    with pytest.raises(TrainError):
        LinearSVM().fit(X, np.ones(len(y)))
    with pytest.raises(ValueError):
        LinearSVM().fit(X, np.r_[y[:-1], 2])


# -- TSVM -------------------------------------------------------------------


def _toy_tsvm(rng, n_lab=6, n_unl=150):
    """Normal cluster at entropy ~ ln v, fake cluster at low entropy and high views."""
    lv_n = rng.uniform(2.0, 3.5, size=n_unl)
    normal = np.c_[lv_n, lv_n * math.log(10) - rng.uniform(0, 0.4, size=n_unl)]
    lv_f = rng.uniform(3.0, 4.5, size=n_unl)
    fake = np.c_[lv_f, rng.uniform(0.0, 2.0, size=n_unl)]
    X = np.vstack([normal, fake])
    truth = np.r_[np.ones(n_unl), -np.ones(n_unl)].astype(int)
    y = np.zeros(len(truth), dtype=int)
    y[:n_lab] = NORMAL
    y[n_unl:n_unl + n_lab] = FAKE
    return X, y, truth


def test_tsvm_separable_toy_training_error_zero():
    X, y, truth = _toy_tsvm(np.random.default_rng(1))
    est = TransductiveSVM(c_unlabeled_max=1.0, positive_fraction=0.5).fit(X, y)
    assert np.all(est.predict(X) == truth)
    assert np.all(est.transductive_labels_ == truth[y == UNLABELED])


def test_tsvm_without_unlabeled_equals_inductive():
    rng = np.random.default_rng(2)
    X, y = _blobs(rng, gap=1.5)
    t = TransductiveSVM(c_labeled=0.8).fit(X, y.astype(int))
    s = LinearSVM(C=0.8).fit(X, y)
    assert t.objective_ == pytest.approx(s.objective_, rel=1e-9)
    assert np.allclose(t.coef_, s.coef_) and t.intercept_ == pytest.approx(s.intercept_)
    assert t.n_swaps_ == 0


@pytest.mark.parametrize("seed", range(3))
def test_tsvm_objective_non_increasing_within_each_level(seed):
    rng = np.random.default_rng(seed)
    X, y, _ = _toy_tsvm(rng, n_unl=60)
    X = X + rng.normal(0, 0.8, size=X.shape)  # overlap forces swaps
    est = TransductiveSVM(positive_fraction=0.8).fit(X, y)
    assert est.n_swaps_ > 0
    for _, level in est.objective_history_:
        assert all(b <= a + 1e-12 for a, b in zip(level, level[1:]))


def test_tsvm_keeps_tentative_label_share():
    rng = np.random.default_rng(5)
    X, y, _ = _toy_tsvm(rng, n_unl=80)
    est = TransductiveSVM(positive_fraction=0.3).fit(X, y)
    n_unl = int(np.sum(y == UNLABELED))
    assert np.sum(est.transductive_labels_ == NORMAL) == round(0.3 * n_unl)


def test_tsvm_default_fraction_is_labeled_share():
    rng = np.random.default_rng(6)
    X, y, _ = _toy_tsvm(rng, n_lab=5, n_unl=40)
    y[y == FAKE] = UNLABELED
    y[45] = FAKE
    est = TransductiveSVM().fit(X, y)
    assert est.positive_fraction_ == pytest.approx(5 / 6)


def test_tsvm_auto_picks_lowest_objective():
    rng = np.random.default_rng(7)
    X, y, truth = _toy_tsvm(rng, n_lab=3, n_unl=100)
    est = TransductiveSVM(positive_fraction="auto", class_weight="balanced", fraction_grid=(0.2, 0.5, 0.8)).fit(X, y)
    objs = est.fraction_objectives_
    assert set(objs) == {0.2, 0.5, 0.8}
    assert est.positive_fraction_ == min(objs, key=objs.get)
    assert est.objective_ == pytest.approx(min(objs.values()))
    assert np.mean(est.predict(X) == truth) > 0.95


def test_tsvm_warns_when_swap_budget_runs_out():
    rng = np.random.default_rng(8)
    X, y, _ = _toy_tsvm(rng, n_unl=60)
    with pytest.warns(RuntimeWarning):
        est = TransductiveSVM(positive_fraction=0.95, max_outer_iters=1).fit(X, y)
    assert not est.converged_


def test_tsvm_rejects_bad_input():
    X = np.zeros((3, 2))
    with pytest.raises(TrainError):
        TransductiveSVM().fit(X, [1, 1, 0])
    with pytest.raises(ValueError):
        TransductiveSVM().fit(X, [1, -1, 3])
    with pytest.raises(ValueError):
        TransductiveSVM(positive_fraction=1.5).fit(np.eye(3), [1, -1, 0])


def test_standardization_consistency():
    rng = np.random.default_rng(9)
    X, y, _ = _toy_tsvm(rng, n_unl=80)
    X[:, 0] *= 1000.0  # wildly different feature scales
    a = TransductiveSVM(positive_fraction=0.5, standardize=True).fit(X, y)
    Z = (X - a.mean_) / a.scale_
    b = TransductiveSVM(positive_fraction=0.5, standardize=False).fit(Z, y)
    assert np.array_equal(a.predict(X), b.predict(Z))
    model = LinearModel.from_estimator(a, BASE_SCHEMA)
    w, bias = model.raw_hyperplane()
    assert np.array_equal(np.where(X @ w + bias >= 0, 1, -1), np.where(model.margins(X) >= 0, 1, -1))


# -- model, classify, training wrapper ---------------------------------------


def _examples(rng, n=60):
    X, y, truth = _toy_tsvm(rng, n_lab=5, n_unl=n)
    return [LabeledExample(FeatureVector(*row), int(lab)) for row, lab in zip(X, y)], truth


def test_train_tsvm_and_held_out_agreement():
    rng = np.random.default_rng(10)
    train, _ = _examples(rng)
    model = train_tsvm(train, TsvmConfig(positive_fraction=0.5))
    test, truth = _examples(np.random.default_rng(99))
    labels = np.array([classify(model, ex.features)[0] for ex in test])
    assert np.mean(labels == truth) >= 0.95
    assert model.metadata["n_labeled"] == 10
    assert model.metadata["config"]["positive_fraction"] == 0.5


def test_train_tsvm_needs_both_seed_labels():
    ex = [LabeledExample(FeatureVector(2.0, 4.6), NORMAL), LabeledExample(FeatureVector(3.0, 2.0), UNLABELED)]
    with pytest.raises(TrainError):
        train_tsvm(ex)


def test_config_validation():
    for bad in (dict(c_labeled=0), dict(tolerance=0), dict(positive_fraction=1.0), dict(class_weight="x")):
        with pytest.raises(ValueError):
            TsvmConfig(**bad).validate()
    TsvmConfig(positive_fraction="auto", class_weight="balanced").validate()


def test_classify_tie_break_and_sign():
    model = LinearModel([1.0, 0.0], 0.0, BASE_SCHEMA)
    assert classify(model, FeatureVector(0.0, 5.0)) == (NORMAL, 0.0)
    assert classify(model, FeatureVector(2.0, 5.0))[0] == NORMAL
    assert classify(model, FeatureVector(-2.0, 5.0))[0] == FAKE


def test_classify_scaling_invariance():
    rng = np.random.default_rng(12)
    feats = {i: FeatureVector(*rng.normal(size=2)) for i in range(200)}
    model = LinearModel([0.7, -1.3], 0.2, BASE_SCHEMA)
    base = {k: lab for k, (lab, _) in classify_many(model, feats).items()}
    for c in (1e-6, 0.3, 17.0, 1e6):
        scaled = LinearModel([0.7 * c, -1.3 * c], 0.2 * c, BASE_SCHEMA)
        assert {k: lab for k, (lab, _) in classify_many(scaled, feats).items()} == base


def test_schema_mismatch():
    model = LinearModel([1.0, 1.0, 1.0], 0.0, FEATURES)
    with pytest.raises(SchemaError):
        model.margins(np.zeros((2, 2)))
    with pytest.raises(SchemaError):
        LinearModel([1.0], 0.0, BASE_SCHEMA)
    with pytest.raises(SchemaError):
        FeatureVector(1.0, 1.0).as_row(("bogus",))


def test_model_json_round_trip():
    rng = np.random.default_rng(13)
    train, _ = _examples(rng)
    model = train_tsvm(train, TsvmConfig(positive_fraction=0.5))
    again = LinearModel.from_json(json.loads(json.dumps(model.to_json())))
    pts = [ex.features for ex in train]
    assert np.array_equal(again.margins(pts), model.margins(pts))
    with pytest.raises(SchemaError):
        LinearModel.from_json({"weights": [1.0]})


def test_missing_feature_imputed_to_training_mean():
    model = LinearModel([1.0, 1.0, 2.0], -1.0, FEATURES, mean=[0, 0, 10], scale=[1, 1, 5])
    assert model.margins(FeatureVector(1.0, 0.5, None))[0] == pytest.approx(0.5)


# -- ROC --------------------------------------------------------------------


def test_roc_perfect_separation():
    margins = [-3, -2, -1, 1, 2, 3]
    labels = [FAKE] * 3 + [NORMAL] * 3
    pts = roc_curve(margins, labels)
    assert auc_from_points(pts) == 1.0
    assert (pts[0].fpr, pts[0].tpr) == (0.0, 0.0) and (pts[-1].fpr, pts[-1].tpr) == (1.0, 1.0)


def test_roc_random_is_half():
    aucs = []
    for seed in range(40):
        rng = np.random.default_rng(seed)
        labels = rng.choice([FAKE, NORMAL], size=400)
        labels[:2] = [FAKE, NORMAL]
        aucs.append(auc_from_points(roc_curve(rng.normal(size=400), labels)))
    assert abs(np.mean(aucs) - 0.5) <= 0.05


@pytest.mark.parametrize("seed", range(5))
def test_roc_matches_sklearn_with_ties(seed):
    rng = np.random.default_rng(seed)
    margins = np.round(rng.normal(size=300), 1)
    labels = np.where(margins + rng.normal(0, 1, 300) > 0, NORMAL, FAKE)
    ours = auc_from_points(roc_curve(margins, labels))
    assert ours == pytest.approx(roc_auc_score(labels == FAKE, -margins), abs=1e-12)


def test_roc_invariant_under_increasing_transform():
    rng = np.random.default_rng(3)
    margins = rng.normal(size=200)
    labels = np.where(margins + rng.normal(0, 1, 200) > 0, NORMAL, FAKE)
    base = auc_from_points(roc_curve(margins, labels))
    for f in (np.exp, lambda m: 5 * m + 2, np.arctan, lambda m: m ** 3):
        assert auc_from_points(roc_curve(f(margins), labels)) == pytest.approx(base, abs=1e-12)


def test_roc_single_class_is_undefined():
    with pytest.raises(UndefinedAUCError):
        roc_curve([1, 2], [NORMAL, NORMAL])


def test_evaluate_roc_and_csv():
    model = LinearModel([0.0, 1.0], -1.0, BASE_SCHEMA)
    ex = [LabeledExample(FeatureVector(2, e), NORMAL if e > 1 else FAKE) for e in (0.1, 0.5, 2.0, 3.0)]
    pts, auc = evaluate_roc(model, ex)
    assert auc == 1.0
    buf = io.StringIO()
    write_roc_csv(pts, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "threshold,fpr,tpr" and len(lines) == len(pts) + 1
    with pytest.raises(ValueError):
        evaluate_roc(model, [LabeledExample(FeatureVector(2, 1), UNLABELED)])
