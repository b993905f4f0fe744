"""Features, seed labels, transductive linear SVM, and ROC evaluation.

Videos (and IPs) are placed in the (log10 views, entropy) plane, optionally
with the age of the video in days. Rule-based seed labels mark the easy
cases; a transductive SVM fits a hyperplane using both the seeds and the
unlabeled middle ground.

Label convention: +1 normal, -1 fake, 0 unlabeled.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Optional, Sequence, Union

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .entropy import col_profiles, row_profiles
from .errors import SchemaError, TrainError, UndefinedAUCError

NORMAL, FAKE, UNLABELED = 1, -1, 0
FEATURES = ("log_views", "entropy", "day_diff")
BASE_SCHEMA = ("log_views", "entropy")
# starting fractions tried by ``positive_fraction="auto"``
AUTO_FRACTIONS = tuple(np.round(np.arange(0.05, 1.0, 0.05), 2))
LN10 = math.log(10.0)


class FeatureVector(NamedTuple):
    log_views: float
    entropy: float
    day_diff: Optional[float] = None

    @property
    def views(self) -> float:
        return 10.0 ** self.log_views

    def as_row(self, schema: Sequence[str]) -> list:
        row = []
        for name in schema:
            if name not in FEATURES:
                raise SchemaError(f"unknown feature {name!r}")
            value = getattr(self, name)
            row.append(np.nan if value is None else float(value))
        return row


class LabeledExample(NamedTuple):
    features: FeatureVector
    label: int


@dataclass
class SeedParams:
    eps_hi: float = 0.5
    eps_lo: float = 0.3
    v_min: int = 100


# -- features -----------------------------------------------------------


def extract_video_features(matrix, meta: Optional[Mapping] = None, day: Optional[dt.date] = None, min_views: int = 1) -> dict:
    """``{video: FeatureVector}`` for every column with at least ``min_views`` views."""
    meta = meta or {}
    out = {}
    for vid, prof in col_profiles(matrix).items():
        if prof.total_views < max(min_views, 1):
            continue
        day_diff = None
        m = meta.get(vid)
        if m is not None and day is not None:
            day_diff = float(max((day - m.release_date).days, 0))
        out[vid] = FeatureVector(math.log10(prof.total_views), prof.entropy, day_diff)
    return out


def extract_row_features(matrix) -> dict:
    """``{entity: FeatureVector}`` for every row (IP or user) of the matrix."""
    return {
        e: FeatureVector(math.log10(p.total_views), p.entropy)
        for e, p in row_profiles(matrix).items()
    }


def seed_label(fv: FeatureVector, params: SeedParams = SeedParams()) -> int:
    ln_v = fv.log_views * LN10
    if fv.entropy >= ln_v - params.eps_hi:
        return NORMAL
    if fv.entropy <= params.eps_lo and fv.views >= params.v_min - 1e-9:
        return FAKE
    return UNLABELED


def seed_labels(features: Mapping, params: SeedParams = SeedParams()) -> dict:
    """Label the easy cases: entropy near ln(views) is normal, near 0 with many views is fake."""
    return {k: LabeledExample(fv, seed_label(fv, params)) for k, fv in features.items()}


def feature_matrix(features, schema: Sequence[str]) -> np.ndarray:
    if isinstance(features, Mapping):
        features = list(features.values())
    return np.asarray([fv.as_row(schema) for fv in features], dtype=float).reshape(len(features), len(schema))


# -- inner solver -------------------------------------------------------


def hinge_objective(w, b, X, y, C) -> float:
    """Primal soft-margin objective ``0.5 |w|^2 + sum C_i max(0, 1 - y_i (w.x_i + b))``."""
    slack = np.maximum(0.0, 1.0 - y * (X @ w + b))
    return float(0.5 * np.dot(w, w) + np.dot(C, slack))


def _best_bias(f, y, C) -> float:
    """Exact minimizer over b of ``sum C_i max(0, 1 - y_i (f_i + b))``.

    The loss is convex piecewise-linear in b with kinks at ``y_i - f_i``;
    its slope starts at ``-sum C(y=+1)`` and rises by C_i at each kink.
    """
    kinks = y - f
    order = np.argsort(kinks, kind="stable")
    slope = -float(np.sum(C[y > 0]))
    if slope >= 0:
        # no positives: push b down until every negative is satisfied
        return float(np.min(kinks)) if kinks.size else 0.0
    csum = slope + np.cumsum(C[order])
    k = int(np.searchsorted(csum, 0.0, side="left"))
    if k >= kinks.size:
        return float(kinks[order[-1]])
    return float(kinks[order[k]])


class _SMO:
    """Dual SMO for the linear soft-margin SVM with per-sample costs.

    Uses maximal-violating-pair selection with second-order choice of the
    partner (as in LIBSVM) and keeps the primal weight vector explicitly.
    """

    def __init__(self, X, y, C, eps=1e-4, max_iter=200_000):
        self.X = X
        self.y = y.astype(float)
        self.C = C.astype(float)
        self.eps = eps
        self.max_iter = max_iter
        self.alpha = np.zeros(len(y))
        self.w = np.zeros(X.shape[1])
        self.Kdiag = np.einsum("ij,ij->i", X, X)
        self.iterations = 0
        self.converged = False

    def set_alpha(self, alpha):
        self.alpha = np.clip(alpha, 0.0, self.C)
        self.w = (self.alpha * self.y) @ self.X

    def solve(self):
        X, y, C = self.X, self.y, self.C
        alpha = self.alpha
        tau = 1e-12
        self.converged = False
        for _ in range(self.max_iter):
            G = y * (X @ self.w) - 1.0
            minus_yG = -y * G
            up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
            low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
            if not up.any() or not low.any():
                self.converged = True
                break
            cand_up = np.where(up, minus_yG, -np.inf)
            i = int(np.argmax(cand_up))
            m = cand_up[i]
            M = np.min(np.where(low, minus_yG, np.inf))
            if m - M < self.eps:
                self.converged = True
                break
            b_it = m - minus_yG
            ok = low & (b_it > 0)
            a_it = self.Kdiag[i] + self.Kdiag - 2.0 * (X @ X[i])
            a_it = np.where(a_it > tau, a_it, tau)
            score = np.where(ok, -(b_it * b_it) / a_it, np.inf)
            j = int(np.argmin(score))
            self._update(i, j, G, a_it[j])
            self.iterations += 1
        return self

    def _update(self, i, j, G, quad):
        y, C, alpha = self.y, self.C, self.alpha
        ai_old, aj_old = alpha[i], alpha[j]
        Ci, Cj = C[i], C[j]
        if y[i] != y[j]:
            delta = (-G[i] - G[j]) / quad
            diff = ai_old - aj_old
            ai, aj = ai_old + delta, aj_old + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > Ci - Cj:
                if ai > Ci:
                    ai, aj = Ci, Ci - diff
            elif aj > Cj:
                aj, ai = Cj, Cj + diff
        else:
            delta = (G[i] - G[j]) / quad
            total = ai_old + aj_old
            ai, aj = ai_old - delta, aj_old + delta
            if total > Ci:
                if ai > Ci:
                    ai, aj = Ci, total - Ci
            elif aj < 0:
                aj, ai = 0.0, total
            if total > Cj:
                if aj > Cj:
                    aj, ai = Cj, total - Cj
            elif ai < 0:
                ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        self.w = self.w + (ai - ai_old) * y[i] * self.X[i] + (aj - aj_old) * y[j] * self.X[j]

    def hyperplane(self):
        f = self.X @ self.w
        b = _best_bias(f, self.y, self.C)
        return self.w.copy(), b


def fit_linear_svm(X, y, C, eps=1e-4, alpha0=None):
    """Soft-margin linear SVM with per-sample costs ``C``; returns ``(w, b, solver)``."""
    smo = _SMO(X, y, np.broadcast_to(np.asarray(C, dtype=float), y.shape).copy(), eps=eps)
    if alpha0 is not None:
        smo.set_alpha(alpha0)
    smo.solve()
    w, b = smo.hyperplane()
    return w, b, smo


def _repair_balance(alpha, y):
    """Shrink alphas on the heavier side so that ``sum alpha_i y_i == 0``."""
    r = float(np.dot(alpha, y))
    if abs(r) < 1e-15:
        return alpha
    side = y > 0 if r > 0 else y < 0
    idx = np.flatnonzero(side & (alpha > 0))
    need = abs(r)
    for k in idx[np.argsort(-alpha[idx])]:
        take = min(alpha[k], need)
        alpha[k] -= take
        need -= take
        if need <= 0:
            break
    return alpha


# -- estimators ---------------------------------------------------------


def _standardize_fit(X):
    mean = np.nanmean(X, axis=0) if X.size else np.zeros(X.shape[1])
    mean = np.where(np.isnan(mean), 0.0, mean)
    Xf = np.where(np.isnan(X), mean, X)
    scale = Xf.std(axis=0)
    scale = np.where(scale > 1e-12, scale, 1.0)
    return mean, scale


class LinearSVM(ClassifierMixin, BaseEstimator):
    """Inductive soft-margin linear SVM (hinge loss, unregularized bias).

    Labels must be +1/-1. Exact zero margins predict +1.
    """

    def __init__(self, C=1.0, standardize=True, tol=1e-4):
        self.C = C
        self.standardize = standardize
        self.tol = tol

    def fit(self, X, y, sample_weight=None):
        X, y = check_X_y(X, y, ensure_all_finite="allow-nan", dtype=float)
        y = y.astype(int)
        if not set(np.unique(y)) <= {NORMAL, FAKE}:
            raise ValueError("labels must be +1 or -1")
        if len(np.unique(y)) < 2:
            raise TrainError("need both +1 and -1 examples")
        self.mean_, self.scale_ = _standardize_fit(X) if self.standardize else (np.zeros(X.shape[1]), np.ones(X.shape[1]))
        Z = self._scale(X)
        C = self.C * (np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=float))
        w, b, smo = fit_linear_svm(Z, y.astype(float), C, eps=self.tol)
        self.coef_, self.intercept_ = w, b
        self.objective_ = hinge_objective(w, b, Z, y, C)
        self.converged_ = smo.converged
        self.classes_ = np.array([FAKE, NORMAL])
        self.n_features_in_ = X.shape[1]
        return self

    def _scale(self, X):
        Z = (X - self.mean_) / self.scale_
        return np.where(np.isnan(Z), 0.0, Z)

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, ensure_all_finite="allow-nan", dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise SchemaError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return self._scale(X) @ self.coef_ + self.intercept_

    def predict(self, X):
        return np.where(self.decision_function(X) >= 0, NORMAL, FAKE)


class TransductiveSVM(LinearSVM):
    """Linear TSVM trained by label switching on the unlabeled points.

    ``y`` uses +1 / -1 for labeled points and 0 for unlabeled ones. After an
    inductive fit on the labeled part, unlabeled points get tentative labels
    (the top ``positive_fraction`` by margin are +1). Their cost starts tiny
    and doubles up to ``c_unlabeled_max``; at each cost level the pair of
    opposite tentative labels whose swap lowers the objective most is
    swapped and the SVM refit, until no swap gains more than ``tolerance``
    or ``max_outer_iters`` swaps were made at that level.

    ``positive_fraction`` may be a number, None (the labeled positive
    share), ``"inductive"`` (the share the inductive fit puts on the positive
    side) or ``"auto"``: one run per value of ``fraction_grid``, keeping the
    run that ends with the lowest objective.
    """

    def __init__(
        self, c_labeled=1.0, c_unlabeled_max=1.0, positive_fraction=None, max_outer_iters=200,
        tolerance=1e-6, standardize=True, tol=1e-4, c_unlabeled_start=1e-5, class_weight=None, fraction_grid=None,
        random_state=0,
    ):
        self.c_labeled = c_labeled
        self.c_unlabeled_max = c_unlabeled_max
        self.positive_fraction = positive_fraction
        self.max_outer_iters = max_outer_iters
        self.tolerance = tolerance
        self.standardize = standardize
        self.tol = tol
        self.c_unlabeled_start = c_unlabeled_start
        self.class_weight = class_weight
        self.fraction_grid = fraction_grid
        self.random_state = random_state

    def _class_costs(self, y):
        """Per-class cost multipliers ``(w_pos, w_neg)`` for labels ``y``."""
        if self.class_weight is None:
            return 1.0, 1.0
        if self.class_weight == "balanced":
            n_pos, n_neg = np.sum(y > 0), np.sum(y < 0)
            n = n_pos + n_neg
            return n / (2.0 * max(n_pos, 1)), n / (2.0 * max(n_neg, 1))
        return float(self.class_weight.get(NORMAL, 1.0)), float(self.class_weight.get(FAKE, 1.0))

    def fit(self, X, y):
        X, y = check_X_y(X, y, ensure_all_finite="allow-nan", dtype=float)
        y = y.astype(int)
        if not set(np.unique(y)) <= {NORMAL, FAKE, UNLABELED}:
            raise ValueError("labels must be +1, -1 or 0")
        lab = y != UNLABELED
        if not (np.any(y == NORMAL) and np.any(y == FAKE)):
            raise TrainError("need at least one +1 and one -1 labeled example")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([FAKE, NORMAL])
        self.mean_, self.scale_ = _standardize_fit(X) if self.standardize else (np.zeros(X.shape[1]), np.ones(X.shape[1]))
        Z = self._scale(X)

        # inductive start on labeled points only
        Zl, yl = Z[lab], y[lab].astype(float)
        wp, wn = self._class_costs(yl)
        Cl = float(self.c_labeled) * np.where(yl > 0, wp, wn)
        w, b, smo = fit_linear_svm(Zl, yl, Cl, eps=self.tol)
        self.inductive_coef_, self.inductive_intercept_ = w.copy(), b
        self.objective_history_ = []
        self.n_swaps_ = 0
        self.converged_ = smo.converged
        self.fraction_objectives_ = {}
        unl = np.flatnonzero(~lab)
        if unl.size == 0:
            self.coef_, self.intercept_ = w, b
            self.transductive_labels_ = np.zeros(0, dtype=int)
            self.objective_ = hinge_objective(w, b, Zl, yl, Cl)
            return self

        margins = Z[unl] @ w + b
        frac = self.positive_fraction
        if frac is None:
            candidates = [float(np.mean(yl > 0))]
        elif frac == "inductive":
            candidates = [float(np.mean(margins >= 0))]
        elif frac == "auto":
            candidates = [float(c) for c in (self.fraction_grid if self.fraction_grid is not None else AUTO_FRACTIONS)]
        elif not 0 < frac < 1:
            raise ValueError("positive_fraction must be in (0, 1)")
        else:
            candidates = [float(frac)]

        alpha0 = np.zeros(len(y))
        alpha0[lab] = smo.alpha
        best = None
        self.fraction_objectives_ = {}
        for cand in candidates:
            run = self._transduce(Z, y, lab, unl, Cl, alpha0, margins, cand)
            self.fraction_objectives_[cand] = run["objective"]
            if best is None or run["objective"] < best["objective"] - 1e-12:
                best = run
        self.positive_fraction_ = best["fraction"]
        self.objective_history_ = best["history"]
        self.n_swaps_ = best["swaps"]
        self.converged_ = self.converged_ and best["converged"]
        if not self.converged_:
            warnings.warn("TSVM stopped at max_outer_iters before running out of improving swaps", RuntimeWarning)
        self.coef_, self.intercept_ = best["w"], best["b"]
        self.objective_ = best["objective"]
        self.transductive_labels_ = best["labels"]
        return self

    def _transduce(self, Z, y, lab, unl, Cl, alpha0, margins, frac):
        """Label switching with annealed unlabeled cost for one starting fraction."""
        n_pos = int(round(frac * unl.size))
        order = np.argsort(-margins, kind="stable")
        yt = y.astype(float).copy()
        yt[unl] = FAKE
        yt[unl[order[:n_pos]]] = NORMAL

        C = np.zeros(len(y))
        C[lab] = Cl
        alpha = alpha0.copy()
        c_u = min(self.c_unlabeled_start, self.c_unlabeled_max)
        # unlabeled costs follow the tentative class sizes so both sides weigh the same
        n_upos = max(n_pos, 1)
        n_uneg = max(unl.size - n_pos, 1)
        up_w, un_w = (unl.size / (2.0 * n_upos), unl.size / (2.0 * n_uneg)) if self.class_weight == "balanced" else (1.0, 1.0)
        history, total_swaps, converged = [], 0, True
        while True:
            C[unl] = c_u * np.where(yt[unl] > 0, up_w, un_w)
            alpha = np.minimum(_repair_balance(alpha, yt), C)
            w, b, smo = fit_linear_svm(Z, yt, C, eps=self.tol, alpha0=alpha)
            converged = converged and smo.converged
            alpha = smo.alpha.copy()
            obj = hinge_objective(w, b, Z, yt, C)
            level = [obj]
            swaps = 0
            while True:
                f = Z[unl] @ w + b
                yu = yt[unl]
                xi = np.maximum(0.0, 1.0 - yu * f)
                xi_flipped = np.maximum(0.0, 1.0 + yu * f)
                cost_now = np.where(yu > 0, up_w, un_w)
                cost_flipped = np.where(yu > 0, un_w, up_w)
                gain = cost_now * xi - cost_flipped * xi_flipped
                pos = np.flatnonzero(yu > 0)
                neg = np.flatnonzero(yu < 0)
                if pos.size == 0 or neg.size == 0:
                    break
                i = pos[np.argmax(gain[pos])]
                j = neg[np.argmax(gain[neg])]
                delta = c_u * (gain[i] + gain[j])
                if delta <= self.tolerance:
                    break
                if swaps >= self.max_outer_iters:
                    converged = False
                    break
                gi, gj = unl[i], unl[j]
                yt[gi], yt[gj] = FAKE, NORMAL
                C[gi], C[gj] = c_u * un_w, c_u * up_w
                swaps += 1
                swapped_obj = hinge_objective(w, b, Z, yt, C)
                alpha[[gi, gj]] = 0.0
                alpha = _repair_balance(alpha, yt)
                w2, b2, smo = fit_linear_svm(Z, yt, C, eps=self.tol, alpha0=alpha)
                alpha = smo.alpha.copy()
                new_obj = hinge_objective(w2, b2, Z, yt, C)
                if new_obj <= swapped_obj:
                    w, b, obj = w2, b2, new_obj
                else:
                    # solver landed short of the swapped starting point; keep that
                    obj = swapped_obj
                assert obj <= level[-1] + 1e-12, "objective increased after a label swap"
                level.append(obj)
            history.append((c_u, level))
            total_swaps += swaps
            if c_u >= self.c_unlabeled_max:
                break
            c_u = min(2.0 * c_u, self.c_unlabeled_max)
        return dict(
            fraction=frac, w=w, b=b, objective=obj, labels=yt[unl].astype(int),
            history=history, swaps=total_swaps, converged=converged,
        )


# -- model file ---------------------------------------------------------


@dataclass
class TsvmConfig:
    c_labeled: float = 1.0
    c_unlabeled_max: float = 1.0
    positive_fraction: Union[float, str, None] = None
    max_outer_iters: int = 200
    tolerance: float = 1e-6
    rng_seed: int = 0
    standardize: bool = True
    class_weight: Optional[str] = None

    def validate(self) -> None:
        if not (self.c_labeled > 0 and self.c_unlabeled_max > 0):
            raise ValueError("costs must be > 0")
        if self.class_weight not in (None, "balanced"):
            raise ValueError("class_weight must be None or 'balanced'")
        if self.positive_fraction in ("inductive", "auto"):
            pass
        elif self.positive_fraction is not None and not 0 < self.positive_fraction < 1:
            raise ValueError("positive_fraction must be in (0, 1)")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")


@dataclass
class LinearModel:
    """Hyperplane over standardized features.

    ``margin(x) = weights . ((x - mean) / scale) + bias``; missing features
    are imputed with the training mean.
    """

    weights: list
    bias: float
    feature_schema: tuple
    mean: list = None
    scale: list = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.feature_schema = tuple(self.feature_schema)
        n = len(self.feature_schema)
        if len(self.weights) != n:
            raise SchemaError("weights length must equal schema length")
        self.mean = list(self.mean) if self.mean is not None else [0.0] * n
        self.scale = list(self.scale) if self.scale is not None else [1.0] * n
        if len(self.mean) != n or len(self.scale) != n:
            raise SchemaError("standardization constants must match schema length")

    def raw_hyperplane(self):
        """Equivalent ``(w, b)`` acting on unstandardized features."""
        w = np.asarray(self.weights) / np.asarray(self.scale)
        b = float(self.bias - np.dot(w, self.mean))
        return w, b

    def _rows(self, features) -> np.ndarray:
        if isinstance(features, FeatureVector):
            features = [features]
        elif isinstance(features, Mapping):
            features = list(features.values())
        if len(features) and not isinstance(features[0], FeatureVector):
            X = np.asarray(features, dtype=float)
            if X.ndim != 2 or X.shape[1] != len(self.feature_schema):
                raise SchemaError(f"model expects features {self.feature_schema}")
            return X
        return feature_matrix(features, self.feature_schema)

    def margins(self, features) -> np.ndarray:
        X = self._rows(features)
        Z = (X - np.asarray(self.mean)) / np.asarray(self.scale)
        Z = np.where(np.isnan(Z), 0.0, Z)
        return Z @ np.asarray(self.weights, dtype=float) + self.bias

    def to_json(self) -> dict:
        return {
            "feature_schema": list(self.feature_schema),
            "weights": [float(x) for x in self.weights],
            "bias": float(self.bias),
            "standardization": {"mean": [float(x) for x in self.mean], "scale": [float(x) for x in self.scale]},
            "metadata": self.metadata,
        }

    @classmethod
    def from_json(cls, data: dict) -> "LinearModel":
        try:
            std = data.get("standardization", {})
            return cls(
                data["weights"], data["bias"], tuple(data["feature_schema"]),
                std.get("mean"), std.get("scale"), data.get("metadata", {}),
            )
        except KeyError as exc:
            raise SchemaError(f"model JSON missing {exc}") from None

    @classmethod
    def from_estimator(cls, est: LinearSVM, schema: Sequence[str], metadata: Optional[dict] = None) -> "LinearModel":
        return cls(est.coef_.tolist(), float(est.intercept_), tuple(schema), est.mean_.tolist(), est.scale_.tolist(), metadata or {})


def train_tsvm(examples, config: TsvmConfig = None, schema: Sequence[str] = BASE_SCHEMA) -> LinearModel:
    """Fit a TSVM on LabeledExamples (a mapping or a sequence)."""
    config = config or TsvmConfig()
    config.validate()
    if isinstance(examples, Mapping):
        examples = list(examples.values())
    labels = np.asarray([ex.label for ex in examples], dtype=int)
    if not (np.any(labels == NORMAL) and np.any(labels == FAKE)):
        raise TrainError("need at least one +1 and one -1 seed label")
    X = feature_matrix([ex.features for ex in examples], schema)
    for k, name in enumerate(schema):
        if np.all(np.isnan(X[:, k])):
            raise TrainError(f"feature {name!r} is missing for every example")
    est = TransductiveSVM(
        c_labeled=config.c_labeled, c_unlabeled_max=config.c_unlabeled_max,
        positive_fraction=config.positive_fraction, max_outer_iters=config.max_outer_iters,
        tolerance=config.tolerance, standardize=config.standardize, class_weight=config.class_weight,
        random_state=config.rng_seed,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        est.fit(X, labels)
    meta = {
        "n_labeled": int(np.sum(labels != 0)),
        "n_unlabeled": int(np.sum(labels == 0)),
        "n_positive_seeds": int(np.sum(labels == NORMAL)),
        "n_negative_seeds": int(np.sum(labels == FAKE)),
        "n_swaps": int(est.n_swaps_),
        "objective": float(est.objective_),
        "converged": bool(est.converged_),
        "positive_fraction_used": getattr(est, "positive_fraction_", None),
        "config": dataclasses.asdict(config),
    }
    return LinearModel.from_estimator(est, schema, meta)


def classify(model: LinearModel, features) -> tuple:
    """``(label, margin)``; a margin of exactly 0 counts as normal."""
    margin = float(model.margins(features)[0])
    return (NORMAL if margin >= 0 else FAKE), margin


def classify_many(model: LinearModel, features: Mapping) -> dict:
    keys = list(features)
    margins = model.margins([features[k] for k in keys]) if keys else np.zeros(0)
    return {k: ((NORMAL if m >= 0 else FAKE), float(m)) for k, m in zip(keys, margins.tolist())}


# -- ROC ------------------------------------------------------------------


class RocPoint(NamedTuple):
    threshold: float
    fpr: float
    tpr: float


def roc_curve(margins, labels) -> list:
    """ROC for flagging fakes: a point is flagged when its margin < threshold.

    ``labels`` are the true +1 (normal) / -1 (fake). Thresholds sweep every
    distinct margin, from flag-nothing to flag-everything.
    """
    margins = np.asarray(margins, dtype=float)
    labels = np.asarray(labels, dtype=int)
    n_fake = int(np.sum(labels == FAKE))
    n_norm = int(np.sum(labels == NORMAL))
    if n_fake == 0 or n_norm == 0:
        raise UndefinedAUCError("ROC needs both normal and fake ground truth")
    order = np.argsort(margins, kind="stable")
    m = margins[order]
    fake = (labels[order] == FAKE).astype(int)
    cum_fake = np.cumsum(fake)
    cum_norm = np.cumsum(1 - fake)
    last_of_group = np.flatnonzero(np.r_[m[1:] != m[:-1], True])
    points = [RocPoint(float(m[0]), 0.0, 0.0)]
    for k in last_of_group.tolist():
        thr = float(np.nextafter(m[k], np.inf))
        points.append(RocPoint(thr, float(cum_norm[k] / n_norm), float(cum_fake[k] / n_fake)))
    return points


def auc_from_points(points) -> float:
    fpr = np.asarray([p.fpr for p in points])
    tpr = np.asarray([p.tpr for p in points])
    return float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))


def evaluate_roc(model: LinearModel, examples) -> tuple:
    """``(roc points, AUC)`` of the model's margins against true labels."""
    if isinstance(examples, Mapping):
        examples = list(examples.values())
    labels = [ex.label for ex in examples]
    if any(lab not in (NORMAL, FAKE) for lab in labels):
        raise ValueError("evaluation examples need true +1/-1 labels")
    margins = model.margins([ex.features for ex in examples])
    points = roc_curve(margins, labels)
    return points, auc_from_points(points)


def write_roc_csv(points, sink) -> None:
    sink.write("threshold,fpr,tpr\n")
    for p in points:
        sink.write(f"{p.threshold!r},{p.fpr!r},{p.tpr!r}\n")
