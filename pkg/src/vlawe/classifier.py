"""Linear max-margin classifier.

One binary L2-regularized L1-hinge SVM per class, trained by dual
coordinate descent over the box-constrained dual.  The bias is handled as
an implicit constant feature (so it is regularized together with the
weights), which keeps the dual free of an equality constraint.  Binary
problems train a single separating vector and store it as the +/- class
rows, so predict stays a plain argmax over per-class scores in every mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DataFormatError, DimensionMismatchError

_MODEL_MAGIC = "vlawe-model/1"
_MODES = ("binary", "multiclass-ovr", "multilabel-ovr")


@dataclass
class ClassifierConfig:
    C: float = 1.0
    tolerance: float = 1e-3
    max_iters: int = 1000  # full passes over the training set
    seed: int = 0

    def __post_init__(self):
        if self.C <= 0:
            raise ValueError(f"C must be positive, got {self.C}")


@dataclass
class ClassifierModel:
    mode: str
    classes: list
    weights: np.ndarray  # (n_classes, feature_dim)
    biases: np.ndarray  # (n_classes,)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        if self.weights.shape[0] != len(self.classes) or self.biases.shape != (
            len(self.classes),
        ):
            raise ValueError("weight/bias row count must equal class count")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.biases))):
            raise ValueError("model parameters contain non-finite values")

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1]


def _solve_binary_dense(X, y, C, tol, max_passes, rng):
    """Dual coordinate descent for min_w 0.5*||w||^2 + C * sum hinge(y, w.x + b).

    Maintains w = sum_i alpha_i y_i x_i (bias as an extra implicit feature).
    A pass updates each alpha_i by its clipped Newton step; iteration stops
    when the spread between the largest and smallest projected gradient seen
    in a pass drops below `tol`.
    """
    n, d = X.shape
    alpha = np.zeros(n)
    w = np.zeros(d)
    b = 0.0
    q = (X * X).sum(axis=1) + 1.0  # +1 for the bias feature
    for _ in range(max_passes):
        pg_max = -np.inf
        pg_min = np.inf
        for i in rng.permutation(n):
            xi = X[i]
            yi = y[i]
            g = yi * (w @ xi + b) - 1.0
            ai = alpha[i]
            if ai <= 0.0:
                pg = min(g, 0.0)
            elif ai >= C:
                pg = max(g, 0.0)
            else:
                pg = g
            if pg > pg_max:
                pg_max = pg
            if pg < pg_min:
                pg_min = pg
            if pg != 0.0:
                a_new = min(max(ai - g / q[i], 0.0), C)
                delta = a_new - ai
                if delta != 0.0:
                    alpha[i] = a_new
                    step = delta * yi
                    w += step * xi
                    b += step
        if pg_max - pg_min < tol:
            break
    return w, b


def _solve_binary_sparse(X, y, C, tol, max_passes, rng):
    """Sparse-row variant of `_solve_binary_dense` (CSR input)."""
    n, d = X.shape
    indptr, indices, data = X.indptr, X.indices, X.data
    alpha = np.zeros(n)
    w = np.zeros(d)
    b = 0.0
    q = np.asarray(X.multiply(X).sum(axis=1)).ravel() + 1.0
    for _ in range(max_passes):
        pg_max = -np.inf
        pg_min = np.inf
        for i in rng.permutation(n):
            lo, hi = indptr[i], indptr[i + 1]
            cols = indices[lo:hi]
            vals = data[lo:hi]
            yi = y[i]
            g = yi * (w[cols] @ vals + b) - 1.0
            ai = alpha[i]
            if ai <= 0.0:
                pg = min(g, 0.0)
            elif ai >= C:
                pg = max(g, 0.0)
            else:
                pg = g
            if pg > pg_max:
                pg_max = pg
            if pg < pg_min:
                pg_min = pg
            if pg != 0.0:
                a_new = min(max(ai - g / q[i], 0.0), C)
                delta = a_new - ai
                if delta != 0.0:
                    alpha[i] = a_new
                    step = delta * yi
                    w[cols] += step * vals
                    b += step
        if pg_max - pg_min < tol:
            break
    return w, b


def _solve_binary(X, y, cfg: ClassifierConfig, seed: int):
    rng = np.random.default_rng(seed)
    if sp.issparse(X):
        return _solve_binary_sparse(X, y, cfg.C, cfg.tolerance, cfg.max_iters, rng)
    return _solve_binary_dense(X, y, cfg.C, cfg.tolerance, cfg.max_iters, rng)


def _as_feature_matrix(X):
    if sp.issparse(X):
        return sp.csr_matrix(X, dtype=np.float64)
    try:
        M = np.asarray(X, dtype=np.float64)
    except ValueError as exc:
        raise DimensionMismatchError(f"inconsistent feature vectors: {exc}") from exc
    if M.ndim != 2:
        raise DimensionMismatchError("feature vectors must form a 2-D (n, d) matrix")
    return M


def _derive_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence((seed, index)).generate_state(1)[0])


def train(X, Y, cfg: ClassifierConfig | None = None, mode: str = "binary") -> ClassifierModel:
    """Fit per-class weight vectors; deterministic for fixed data order and seed.

    `Y` holds one label per sample in binary/multiclass mode, and an
    iterable of labels per sample in multilabel mode.
    """
    cfg = cfg or ClassifierConfig()
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")
    X = _as_feature_matrix(X)
    n = X.shape[0]
    Y = list(Y)
    if len(Y) != n:
        raise ValueError(f"{n} feature vectors but {len(Y)} labels")
    if n < 2:
        raise ValueError("need at least 2 training samples")

    if mode == "multilabel-ovr":
        label_sets = [frozenset(labels) for labels in Y]
        classes = sorted({c for s in label_sets for c in s})
        if not classes:
            raise ValueError("multilabel training data carries no labels at all")
        targets = [
            np.array([1.0 if c in s else -1.0 for s in label_sets]) for c in classes
        ]
    else:
        classes = sorted(set(Y))
        if len(classes) < 2:
            raise ValueError(f"need at least two distinct labels, got {classes}")
        if mode == "binary" and len(classes) != 2:
            raise ValueError(f"binary mode needs exactly 2 classes, got {len(classes)}")
        targets = [np.where(np.array(Y) == c, 1.0, -1.0) for c in classes]

    if mode == "binary":
        # one solve for the second class; the first class is its mirror image
        w, b = _solve_binary(X, targets[1], cfg, _derive_seed(cfg.seed, 1))
        weights = np.vstack([-w, w])
        biases = np.array([-b, b])
    else:
        rows = []
        biases_list = []
        for ci, y in enumerate(targets):
            w, b = _solve_binary(X, y, cfg, _derive_seed(cfg.seed, ci))
            rows.append(w)
            biases_list.append(b)
        weights = np.vstack(rows)
        biases = np.array(biases_list)

    return ClassifierModel(mode=mode, classes=classes, weights=weights, biases=biases)


def decision_scores(model: ClassifierModel, x) -> np.ndarray:
    """Raw per-class margins w_c . x + b_c for one vector or a matrix of rows."""
    if sp.issparse(x):
        if x.shape[1] != model.feature_dim:
            raise DimensionMismatchError(
                f"input dimension {x.shape[1]} != model dimension {model.feature_dim}"
            )
        return np.asarray(x @ model.weights.T) + model.biases
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.feature_dim:
        raise DimensionMismatchError(
            f"input dimension {x.shape[-1]} != model dimension {model.feature_dim}"
        )
    return x @ model.weights.T + model.biases


def predict(model: ClassifierModel, x):
    """Argmax label (binary/multiclass) or the set of positive-score labels.

    Accepts a single vector or a matrix; a matrix yields a list of
    per-row predictions.
    """
    scores = decision_scores(model, x)
    if scores.ndim == 1:
        return _predict_from_scores(model, scores)
    return [_predict_from_scores(model, row) for row in scores]


def _predict_from_scores(model: ClassifierModel, scores: np.ndarray):
    if model.mode == "multilabel-ovr":
        return frozenset(c for c, s in zip(model.classes, scores) if s > 0.0)
    return model.classes[int(np.argmax(scores))]


def save_model(model: ClassifierModel, path) -> None:
    with open(path, "wb") as fh:
        np.savez(
            fh,
            magic=np.array(_MODEL_MAGIC),
            mode=np.array(model.mode),
            classes=np.array(model.classes),
            feature_dim=np.array(model.feature_dim),
            weights=model.weights,
            biases=model.biases,
        )


def load_model(path) -> ClassifierModel:
    try:
        with np.load(path, allow_pickle=False) as data:
            if "magic" not in data or str(data["magic"]) != _MODEL_MAGIC:
                raise DataFormatError(path, "not a classifier model file (bad magic)")
            weights = data["weights"]
            if weights.shape[1] != int(data["feature_dim"]):
                raise DataFormatError(path, "weight matrix does not match header")
            return ClassifierModel(
                mode=str(data["mode"]),
                classes=list(data["classes"].tolist()),
                weights=weights,
                biases=data["biases"],
            )
    except DataFormatError:
        raise
    except Exception as exc:
        raise DataFormatError(path, f"corrupt model file ({exc})") from exc


def primal_objective(model_w, model_b, X, y, C) -> float:
    """0.5*(||w||^2 + b^2) + C * sum hinge; the quantity the solver minimizes."""
    if sp.issparse(X):
        margins = np.asarray(X @ model_w).ravel() + model_b
    else:
        margins = np.asarray(X, dtype=np.float64) @ model_w + model_b
    hinge = np.maximum(0.0, 1.0 - np.asarray(y) * margins).sum()
    return 0.5 * (model_w @ model_w + model_b * model_b) + C * hinge
