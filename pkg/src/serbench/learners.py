"""Feature standardization, logistic regression, a one-hidden-layer MLP, and
hyperparameter search over speaker-grouped inner folds.

Both classifiers are trained by explicit gradient code (full-batch descent
with backtracking for the linear model, mini-batch adaptive moments for the
MLP) so the analytic gradients can be checked against finite differences.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin

from .errors import DimensionMismatch, NotFinite, SingleClass
from .metrics import confusion_matrix, uar
from .partition import grouped_stratified_folds

_ARMIJO_C = 1e-4


def _check_X(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise NotFinite("non-finite values in feature matrix")
    return X


def _check_X_y(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = _check_X(X)
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or y.size != X.shape[0]:
        raise DimensionMismatch(f"y of size {y.size} does not match {X.shape[0]} rows")
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise ValueError("labels must be binary 0/1")
    if np.unique(y).size < 2:
        raise SingleClass("training data contains a single class")
    return X, y


def _sample_weights(y: np.ndarray, class_weight) -> np.ndarray:
    if class_weight is None:
        return np.ones(y.size)
    if class_weight == "balanced":
        n1 = float(np.sum(y))
        n0 = y.size - n1
        w = np.where(y == 1.0, y.size / (2.0 * n1), y.size / (2.0 * n0))
        return w
    raise ValueError(f"class_weight must be None or 'balanced', got {class_weight!r}")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _log_loss_terms(z: np.ndarray, y: np.ndarray) -> np.ndarray:
    # log(1 + e^z) - y z, computed without overflow
    return np.maximum(z, 0.0) - y * z + np.log1p(np.exp(-np.abs(z)))


def _clip_proba(p: np.ndarray) -> np.ndarray:
    # keep reported scores strictly inside (0, 1) even when sigmoid saturates
    return np.clip(p, 1e-15, 1.0 - 1e-15)


class FeatureScaler(BaseEstimator, TransformerMixin):
    """Per-feature standardization with statistics from the fit rows only.

    Uses population standard deviation; zero-variance features map to 0.
    """

    def fit(self, X, y=None):
        X = _check_X(X)
        if X.shape[0] < 2:
            raise ValueError("need at least 2 rows to fit a scaler")
        self.mean_ = X.mean(axis=0)
        self.scale_ = X.std(axis=0)
        self.n_fit_rows_ = X.shape[0]
        return self

    def transform(self, X):
        X = _check_X(X)
        if X.shape[1] != self.mean_.size:
            raise DimensionMismatch(f"{X.shape[1]} features, scaler has {self.mean_.size}")
        centered = X - self.mean_
        safe = np.where(self.scale_ > 0.0, self.scale_, 1.0)
        return np.where(self.scale_ > 0.0, centered / safe, 0.0)


def logreg_loss_grad(w, b, X, y, l2: float, sample_weight=None):
    """Mean cross-entropy plus (l2/2)||w||^2 and its analytic gradient."""
    X = np.asarray(X, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[1] != w.size:
        raise DimensionMismatch(f"{X.shape[1]} features vs weight vector of {w.size}")
    sw = np.ones(y.size) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    total = float(np.sum(sw))
    z = X @ w + b
    loss = float(np.dot(sw, _log_loss_terms(z, y)) / total) + 0.5 * l2 * float(np.dot(w, w))
    resid = sw * (_sigmoid(z) - y) / total
    grad_w = X.T @ resid + l2 * w
    grad_b = float(np.sum(resid))
    return loss, grad_w, grad_b


class LogisticRegressionGD(BaseEstimator, ClassifierMixin):
    """L2-regularized logistic regression, full-batch descent with backtracking.

    Deterministic: the fitted model is a pure function of (X, y, params).
    Stops when the gradient norm drops below tol or after max_iter steps; the
    recorded loss sequence is non-increasing by the Armijo condition.
    """

    def __init__(self, l2: float = 1e-2, tol: float = 1e-6, max_iter: int = 5000,
                 class_weight=None):
        self.l2 = l2
        self.tol = tol
        self.max_iter = max_iter
        self.class_weight = class_weight

    def fit(self, X, y):
        X, y = _check_X_y(X, y)
        sw = _sample_weights(y, self.class_weight)
        w = np.zeros(X.shape[1])
        b = 0.0
        loss, gw, gb = logreg_loss_grad(w, b, X, y, self.l2, sw)
        history = [loss]
        step = 1.0
        for _ in range(self.max_iter):
            gnorm2 = float(np.dot(gw, gw)) + gb * gb
            if np.sqrt(gnorm2) < self.tol:
                break
            step = min(step * 2.0, 1e4)
            while True:
                w_new = w - step * gw
                b_new = b - step * gb
                new_loss, new_gw, new_gb = logreg_loss_grad(w_new, b_new, X, y, self.l2, sw)
                if new_loss <= loss - _ARMIJO_C * step * gnorm2:
                    break
                step *= 0.5
                if step < 1e-16:
                    break
            if step < 1e-16:
                break
            w, b, loss, gw, gb = w_new, b_new, new_loss, new_gw, new_gb
            history.append(loss)
        if not (np.all(np.isfinite(w)) and np.isfinite(b)):
            raise NotFinite("logistic regression diverged to non-finite parameters")
        self.weights_ = w
        self.bias_ = b
        self.loss_history_ = history
        return self

    def predict_proba(self, X):
        X = _check_X(X)
        if X.shape[1] != self.weights_.size:
            raise DimensionMismatch(f"{X.shape[1]} features, model has {self.weights_.size}")
        p1 = _clip_proba(_sigmoid(X @ self.weights_ + self.bias_))
        return np.column_stack([1.0 - p1, p1])

    def decision_scores(self, X):
        return self.predict_proba(X)[:, 1]

    def predict(self, X):
        return (self.decision_scores(X) >= 0.5).astype(int)


def _mlp_init(n_features: int, hidden: int, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    return {
        "W1": rng.standard_normal((n_features, hidden)) / np.sqrt(n_features),
        "b1": np.zeros(hidden),
        "W2": rng.standard_normal(hidden) / np.sqrt(hidden),
        "b2": 0.0,
    }


def _mlp_forward(params: dict, X: np.ndarray):
    z1 = X @ params["W1"] + params["b1"]
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ params["W2"] + params["b2"]
    return z1, a1, z2


def mlp_loss_grad(params: dict, X, y, l2: float, sample_weight=None):
    """Cross-entropy + l2 on both weight matrices, with backprop gradients."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    sw = np.ones(y.size) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    total = float(np.sum(sw))
    z1, a1, z2 = _mlp_forward(params, X)
    loss = float(np.dot(sw, _log_loss_terms(z2, y)) / total)
    loss += 0.5 * l2 * (float(np.sum(params["W1"] ** 2)) + float(np.dot(params["W2"], params["W2"])))

    dz2 = sw * (_sigmoid(z2) - y) / total
    grads = {
        "W2": a1.T @ dz2 + l2 * params["W2"],
        "b2": float(np.sum(dz2)),
    }
    da1 = np.outer(dz2, params["W2"])
    dz1 = da1 * (z1 > 0.0)
    grads["W1"] = X.T @ dz1 + l2 * params["W1"]
    grads["b1"] = dz1.sum(axis=0)
    return loss, grads


def _stratified_carveout(y: np.ndarray, fraction: float, rng) -> np.ndarray:
    """Boolean validation mask taking floor(fraction * n_c) rows per class."""
    mask = np.zeros(y.size, dtype=bool)
    for c in (0.0, 1.0):
        idx = np.flatnonzero(y == c)
        take = int(np.floor(fraction * idx.size))
        if take:
            mask[rng.permutation(idx)[:take]] = True
    return mask


class MlpClassifier(BaseEstimator, ClassifierMixin):
    """One hidden rectifier layer trained with mini-batch adaptive moments.

    Initialization is scaled by 1/sqrt(fan-in) from the seeded generator. A
    stratified 10% carve-out drives early stopping: training halts once the
    carve-out loss fails to improve for `patience` epochs, and the best
    parameters seen are restored. Fully deterministic for a fixed seed.
    """

    def __init__(self, hidden: int = 64, learning_rate: float = 1e-2, l2: float = 1e-3,
                 seed: int = 0, max_epochs: int = 200, batch_size: int = 32,
                 patience: int = 20, val_fraction: float = 0.1, class_weight=None):
        self.hidden = hidden
        self.learning_rate = learning_rate
        self.l2 = l2
        self.seed = seed
        self.max_epochs = max_epochs
        self.batch_size = batch_size
        self.patience = patience
        self.val_fraction = val_fraction
        self.class_weight = class_weight

    def fit(self, X, y):
        X, y = _check_X_y(X, y)
        if self.hidden < 1:
            raise ValueError("need at least one hidden unit")
        sw = _sample_weights(y, self.class_weight)
        rng = np.random.default_rng(self.seed)
        params = _mlp_init(X.shape[1], self.hidden, int(rng.integers(2**31)))

        val_mask = _stratified_carveout(y, self.val_fraction, rng)
        X_tr, y_tr, sw_tr = X[~val_mask], y[~val_mask], sw[~val_mask]
        X_val, y_val, sw_val = X[val_mask], y[val_mask], sw[val_mask]
        use_early_stop = X_val.shape[0] > 0

        m = {k: np.zeros_like(np.asarray(v, dtype=np.float64)) for k, v in params.items()}
        v = {k: np.zeros_like(np.asarray(g, dtype=np.float64)) for k, g in params.items()}
        beta1, beta2, eps = 0.9, 0.999, 1e-8
        t = 0
        best_val = np.inf
        best_params = {k: np.copy(p) for k, p in params.items()}
        stall = 0
        n = X_tr.shape[0]
        for _epoch in range(self.max_epochs):
            order = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                batch = order[start : start + self.batch_size]
                loss, grads = mlp_loss_grad(params, X_tr[batch], y_tr[batch], self.l2, sw_tr[batch])
                if not np.isfinite(loss):
                    raise NotFinite("MLP training loss became non-finite")
                t += 1
                for k in params:
                    g = grads[k]
                    m[k] = beta1 * m[k] + (1 - beta1) * g
                    v[k] = beta2 * v[k] + (1 - beta2) * np.square(g)
                    m_hat = m[k] / (1 - beta1**t)
                    v_hat = v[k] / (1 - beta2**t)
                    params[k] = params[k] - self.learning_rate * m_hat / (np.sqrt(v_hat) + eps)
            if use_early_stop:
                val_loss, _ = mlp_loss_grad(params, X_val, y_val, self.l2, sw_val)
                if val_loss < best_val - 1e-12:
                    best_val = val_loss
                    best_params = {k: np.copy(p) for k, p in params.items()}
                    stall = 0
                else:
                    stall += 1
                    if stall >= self.patience:
                        break
        if use_early_stop:
            params = best_params
        for p in params.values():
            if not np.all(np.isfinite(p)):
                raise NotFinite("MLP parameters became non-finite")
        self.params_ = params
        return self

    def predict_proba(self, X):
        X = _check_X(X)
        if X.shape[1] != self.params_["W1"].shape[0]:
            raise DimensionMismatch(
                f"{X.shape[1]} features, model has {self.params_['W1'].shape[0]}"
            )
        _, _, z2 = _mlp_forward(self.params_, X)
        p1 = _clip_proba(_sigmoid(z2))
        return np.column_stack([1.0 - p1, p1])

    def decision_scores(self, X):
        return self.predict_proba(X)[:, 1]

    def predict(self, X):
        return (self.decision_scores(X) >= 0.5).astype(int)


@dataclass
class HyperGrid:
    logreg_l2: tuple = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)
    mlp_hidden: tuple = (32, 64, 128)
    mlp_learning_rate: tuple = (1e-3, 1e-2)
    mlp_l2: tuple = (1e-4, 1e-3)
    mode: str = "grid"  # or "randomized"
    n_draws: int = 0

    def candidates(self, family: str) -> list:
        if family == "logreg":
            cands = [{"l2": l2} for l2 in self.logreg_l2]
        elif family == "mlp":
            cands = [
                {"hidden": h, "learning_rate": lr, "l2": l2}
                for h, lr, l2 in itertools.product(
                    self.mlp_hidden, self.mlp_learning_rate, self.mlp_l2
                )
            ]
        else:
            raise ValueError(f"unknown model family {family!r}")
        if not cands:
            raise ValueError("hyperparameter grid is empty")
        return cands


def make_estimator(family: str, hyper: dict, seed: int = 0, class_weight=None):
    if family == "logreg":
        return LogisticRegressionGD(l2=hyper["l2"], class_weight=class_weight)
    if family == "mlp":
        return MlpClassifier(
            hidden=hyper["hidden"],
            learning_rate=hyper["learning_rate"],
            l2=hyper["l2"],
            seed=seed,
            class_weight=class_weight,
        )
    raise ValueError(f"unknown model family {family!r}")


def _prefer(candidate: dict, incumbent: dict) -> bool:
    """Tie-break towards the smaller model: lowest hidden size, then highest l2."""
    if candidate.get("hidden", 0) != incumbent.get("hidden", 0):
        return candidate.get("hidden", 0) < incumbent.get("hidden", 0)
    return candidate["l2"] > incumbent["l2"]


def search_hyperparams(
    family: str,
    grid: HyperGrid,
    X,
    y,
    groups,
    inner_k: int = 3,
    seed: int = 0,
    class_weight=None,
) -> tuple[dict, list]:
    """Pick the candidate with the best mean UAR over inner grouped folds.

    Candidates are scored on speaker-grouped stratified inner folds so the
    selection sees no speaker overlap. Returns (best_params, results) where
    results holds (params, mean_uar) pairs in evaluation order.
    """
    X, y = _check_X_y(X, y)
    cands = grid.candidates(family)
    if grid.mode == "randomized":
        n = grid.n_draws or len(cands)
        rng = np.random.default_rng(seed)
        picked = rng.choice(len(cands), size=min(n, len(cands)), replace=False)
        cands = [cands[i] for i in sorted(picked)]
    elif grid.mode != "grid":
        raise ValueError(f"search mode must be 'grid' or 'randomized', got {grid.mode!r}")

    folds = grouped_stratified_folds(groups, y.astype(int), inner_k, seed)
    results = []
    best, best_score = None, -np.inf
    for c_idx, params in enumerate(cands):
        scores = []
        for fold in range(inner_k):
            tr = folds != fold
            te = folds == fold
            est = make_estimator(
                family, params, seed=_derive_seed(seed, c_idx, fold), class_weight=class_weight
            )
            est.fit(X[tr], y[tr].astype(int))
            cm = confusion_matrix(y[te].astype(int), est.predict(X[te]), 2)
            scores.append(uar(cm))
        mean_uar = float(np.mean(scores))
        results.append((params, mean_uar))
        if best is None or mean_uar > best_score or (
            mean_uar == best_score and _prefer(params, best)
        ):
            best, best_score = params, mean_uar
    return best, results


def _derive_seed(*parts) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


# ---------------------------------------------------------------------------
# Flat-text model persistence (17 significant digits round-trips float64).


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _write_array(fh, name: str, arr: np.ndarray) -> None:
    flat = np.asarray(arr, dtype=np.float64).ravel()
    shape = ",".join(str(s) for s in np.asarray(arr).shape) or "scalar"
    fh.write(f"array {name} {shape}\n")
    fh.write(" ".join(_fmt(v) for v in flat) + "\n")


def save_model(path, model, preset: str, scaler: FeatureScaler | None = None) -> None:
    """Serialize a fitted classifier (and optional scaler) as flat text."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"descriptor {preset}\n")
        if isinstance(model, LogisticRegressionGD):
            fh.write("family logreg\n")
            fh.write(f"hyper l2 {_fmt(model.l2)}\n")
            _write_array(fh, "weights", model.weights_)
            _write_array(fh, "bias", np.asarray(model.bias_))
        elif isinstance(model, MlpClassifier):
            fh.write("family mlp\n")
            fh.write(f"hyper hidden {model.hidden}\n")
            fh.write(f"hyper learning_rate {_fmt(model.learning_rate)}\n")
            fh.write(f"hyper l2 {_fmt(model.l2)}\n")
            fh.write(f"hyper seed {model.seed}\n")
            for k in ("W1", "b1", "W2"):
                _write_array(fh, k, model.params_[k])
            _write_array(fh, "b2", np.asarray(model.params_["b2"]))
        else:
            raise ValueError(f"cannot serialize {type(model).__name__}")
        if scaler is not None:
            _write_array(fh, "scaler_mean", scaler.mean_)
            _write_array(fh, "scaler_scale", scaler.scale_)


def load_model(path):
    """Inverse of save_model; returns (model, preset, scaler_or_None)."""
    meta: dict[str, str] = {}
    hyper: dict[str, str] = {}
    arrays: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    i = 0
    while i < len(lines):
        parts = lines[i].split()
        if not parts:
            i += 1
            continue
        if parts[0] == "array":
            name, shape = parts[1], parts[2]
            vals = np.array([float(v) for v in lines[i + 1].split()])
            arrays[name] = (
                vals[0] if shape == "scalar" else vals.reshape(tuple(int(s) for s in shape.split(",")))
            )
            i += 2
        elif parts[0] == "hyper":
            hyper[parts[1]] = parts[2]
            i += 1
        else:
            meta[parts[0]] = parts[1]
            i += 1

    preset = meta["descriptor"]
    family = meta["family"]
    if family == "logreg":
        model = LogisticRegressionGD(l2=float(hyper["l2"]))
        model.weights_ = arrays["weights"]
        model.bias_ = float(arrays["bias"])
        model.loss_history_ = []
    elif family == "mlp":
        model = MlpClassifier(
            hidden=int(hyper["hidden"]),
            learning_rate=float(hyper["learning_rate"]),
            l2=float(hyper["l2"]),
            seed=int(hyper["seed"]),
        )
        model.params_ = {
            "W1": arrays["W1"],
            "b1": arrays["b1"],
            "W2": arrays["W2"],
            "b2": float(arrays["b2"]),
        }
    else:
        raise ValueError(f"unknown family {family!r} in {path}")

    scaler = None
    if "scaler_mean" in arrays:
        scaler = FeatureScaler()
        scaler.mean_ = arrays["scaler_mean"]
        scaler.scale_ = arrays["scaler_scale"]
        scaler.n_fit_rows_ = -1
    return model, preset, scaler
