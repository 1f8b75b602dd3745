"""From-scratch downstream models for the utility metrics.

Three model families per task: a gradient-descent linear model (softmax
logistic regression / least squares), a CART decision tree, and a small
MLP built on `netcore`. Every fit function returns an object with a
``predict(X)`` method, a ``kind`` label and a ``degenerate`` flag.
"""

from dataclasses import dataclass, field

import numpy as np

from ..data import Table
from ..netcore import AdamState, NetSpec, Network, adam_step
from .histograms import MetricError

CLASSIFICATION = "classification"
REGRESSION = "regression"

LINEAR_MAX_ITER = 500
GRAD_TOL = 1e-6
MLP_HIDDEN = 100
MLP_EPOCHS = 100
MLP_BATCH = 200
MLP_LR = 1e-3


def _check_task(task: str) -> None:
    if task not in (CLASSIFICATION, REGRESSION):
        raise MetricError(f"unknown task {task!r}")


# ---------------------------------------------------------------------------
# feature encoding


@dataclass(frozen=True)
class FeatureMap:
    """Column-to-matrix encoding fitted on the training table.

    Numerical columns are standardized for classification tasks and left
    raw for regression; categorical columns are one-hot either way. The
    target column is excluded."""

    target: str
    task: str
    numericals: tuple[str, ...]
    categoricals: tuple[str, ...]
    cardinalities: tuple[int, ...]
    means: np.ndarray
    stds: np.ndarray

    @property
    def width(self) -> int:
        return len(self.numericals) + int(sum(self.cardinalities))

    def apply(self, table: Table) -> np.ndarray:
        blocks = []
        for j, name in enumerate(self.numericals):
            v = table.numerical_column(name)
            blocks.append(((v - self.means[j]) / self.stds[j])[:, None])
        for name, card in zip(self.categoricals, self.cardinalities):
            blocks.append(np.eye(card)[table.categorical_codes(name)])
        if not blocks:
            return np.zeros((table.n_rows, 0))
        return np.hstack(blocks)


def feature_map(train: Table, target: str, task: str) -> FeatureMap:
    """Fit the feature encoding on `train` with `target` held out."""
    _check_task(task)
    schema = train.schema
    schema.column(target)  # existence check
    nums = tuple(n for n in schema.numerical_names if n != target)
    cats = tuple(n for n in schema.categorical_names if n != target)
    cards = tuple(schema.column(n).cardinality for n in cats)
    means = np.zeros(len(nums))
    stds = np.ones(len(nums))
    if task == CLASSIFICATION:
        for j, name in enumerate(nums):
            v = train.numerical_column(name)
            means[j] = v.mean() if v.size else 0.0
            s = v.std() if v.size else 0.0
            stds[j] = s if s > 1e-12 else 1.0
    return FeatureMap(target, task, nums, cats, cards, means, stds)


# ---------------------------------------------------------------------------
# predictors


@dataclass(frozen=True)
class ConstantPredictor:
    """Fallback when the target has a single class or there are no features."""

    kind: str
    task: str
    value: float
    degenerate: bool = True

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.full(X.shape[0], self.value)
        return out.astype(np.int64) if self.task == CLASSIFICATION else out


def _constant_fit(kind: str, y: np.ndarray, task: str) -> ConstantPredictor:
    if task == CLASSIFICATION:
        value = float(np.argmax(np.bincount(y.astype(np.int64))))
    else:
        value = float(y.mean()) if y.size else 0.0
    return ConstantPredictor(kind, task, value)


def _needs_constant(X: np.ndarray, y: np.ndarray, task: str) -> bool:
    if y.size == 0:
        raise MetricError("cannot fit a predictor on an empty target")
    if X.shape[1] == 0:
        return True
    return task == CLASSIFICATION and np.unique(y).size < 2


def _descend(value_grad, w0: np.ndarray, max_iter: int, tol: float = GRAD_TOL) -> np.ndarray:
    """Gradient descent with a backtracking line search (Armijo)."""
    w = np.asarray(w0, dtype=np.float64).copy()
    val, grad = value_grad(w)
    step = 1.0
    for _ in range(max_iter):
        gnorm = float(np.linalg.norm(grad))
        if gnorm < tol:
            break
        step *= 2.0  # optimistic restart, then back off
        while True:
            cand = w - step * grad
            cval, cgrad = value_grad(cand)
            if cval <= val - 1e-4 * step * gnorm * gnorm or step <= 1e-16:
                break
            step *= 0.5
        if cval >= val and step <= 1e-16:
            break  # line search stalled at machine precision
        w, val, grad = cand, cval, cgrad
    return w


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class LinearPredictor:
    """Softmax logistic regression or ordinary least squares."""

    task: str
    weights: np.ndarray  # (d, C) for classification, (d,) for regression
    bias: np.ndarray
    kind: str = "linear"
    degenerate: bool = False

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = X @ self.weights + self.bias
        if self.task == CLASSIFICATION:
            return np.argmax(out, axis=1).astype(np.int64)
        return out


def fit_logreg(
    X: np.ndarray,
    y: np.ndarray,
    task: str,
    n_classes: int | None = None,
    max_iter: int = LINEAR_MAX_ITER,
):
    """Linear model by full-batch gradient descent.

    Classification: multinomial cross-entropy. Regression: mean squared
    error. Runs until the gradient norm falls below 1e-6 or `max_iter`."""
    _check_task(task)
    X = np.asarray(X, dtype=np.float64)
    if _needs_constant(X, y, task):
        return _constant_fit("linear", y, task)
    n, d = X.shape

    if task == CLASSIFICATION:
        y = y.astype(np.int64)
        c = int(n_classes) if n_classes is not None else int(y.max()) + 1
        onehot = np.eye(c)[y]

        def value_grad(w):
            wm = w[: d * c].reshape(d, c)
            b = w[d * c :]
            p = _softmax(X @ wm + b)
            loss = -np.mean(np.log(p[np.arange(n), y] + 1e-300))
            dl = (p - onehot) / n
            return loss, np.concatenate([(X.T @ dl).ravel(), dl.sum(axis=0)])

        w = _descend(value_grad, np.zeros(d * c + c), max_iter)
        return LinearPredictor(task, w[: d * c].reshape(d, c), w[d * c :])

    y = np.asarray(y, dtype=np.float64)

    def value_grad(w):
        r = X @ w[:d] + w[d] - y
        loss = float(np.mean(r * r))
        g = np.concatenate([(2.0 / n) * (X.T @ r), [(2.0 / n) * r.sum()]])
        return loss, g

    w = _descend(value_grad, np.zeros(d + 1), max_iter)
    return LinearPredictor(task, w[:d], w[d:])


# ---------------------------------------------------------------------------
# CART


@dataclass
class _Node:
    feature: int = -1
    threshold: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None
    value: float = 0.0


def _node_summary(y: np.ndarray, task: str, n_classes: int) -> tuple[float, float]:
    """(leaf value, impurity): Gini for classification, variance otherwise."""
    if task == CLASSIFICATION:
        counts = np.bincount(y, minlength=n_classes)
        frac = counts / y.size
        return float(np.argmax(counts)), float(1.0 - np.sum(frac * frac))
    return float(y.mean()), float(y.var())


def _best_split(X, y, task, min_leaf, n_classes):
    """(feature, threshold, weighted child impurity) or None."""
    n = y.size
    best = (np.inf, -1, 0.0)
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        ys = y[order]
        cuts = np.nonzero(xs[1:] > xs[:-1])[0] + 1
        cuts = cuts[(cuts >= min_leaf) & (cuts <= n - min_leaf)]
        if cuts.size == 0:
            continue
        ln = cuts.astype(np.float64)
        rn = n - ln
        if task == CLASSIFICATION:
            cum = np.cumsum(np.eye(n_classes)[ys], axis=0)
            lc = cum[cuts - 1]
            rc = cum[-1] - lc
            gl = 1.0 - np.sum((lc / ln[:, None]) ** 2, axis=1)
            gr = 1.0 - np.sum((rc / rn[:, None]) ** 2, axis=1)
            weighted = (ln * gl + rn * gr) / n
        else:
            s1 = np.cumsum(ys)
            s2 = np.cumsum(ys * ys)
            sse_l = s2[cuts - 1] - s1[cuts - 1] ** 2 / ln
            sse_r = (s2[-1] - s2[cuts - 1]) - (s1[-1] - s1[cuts - 1]) ** 2 / rn
            weighted = (sse_l + sse_r) / n
        i = int(np.argmin(weighted))
        if weighted[i] < best[0]:
            thr = 0.5 * (xs[cuts[i] - 1] + xs[cuts[i]])
            best = (float(weighted[i]), j, thr)
    return None if best[1] < 0 else best


@dataclass
class TreePredictor:
    """CART tree grown to purity unless depth/leaf limits stop it."""

    task: str
    root: _Node = field(repr=False)
    kind: str = "tree"
    degenerate: bool = False

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.empty(X.shape[0])
        stack = [(self.root, np.arange(X.shape[0]))]
        while stack:
            node, idx = stack.pop()
            if idx.size == 0:
                continue
            if node.left is None:
                out[idx] = node.value
                continue
            mask = X[idx, node.feature] <= node.threshold
            stack.append((node.left, idx[mask]))
            stack.append((node.right, idx[~mask]))
        return out.astype(np.int64) if self.task == CLASSIFICATION else out


def fit_tree(
    X: np.ndarray,
    y: np.ndarray,
    task: str,
    n_classes: int | None = None,
    max_depth: int | None = None,
    min_leaf: int = 1,
):
    """Grow a CART tree: Gini impurity / variance, midpoint thresholds."""
    _check_task(task)
    X = np.asarray(X, dtype=np.float64)
    if _needs_constant(X, y, task):
        return _constant_fit("tree", y, task)
    if task == CLASSIFICATION:
        y = y.astype(np.int64)
        c = int(n_classes) if n_classes is not None else int(y.max()) + 1
    else:
        y = np.asarray(y, dtype=np.float64)
        c = 0

    root = _Node()
    stack = [(root, np.arange(y.size), 0)]
    while stack:
        node, idx, depth = stack.pop()
        sub_y = y[idx]
        node.value, impurity = _node_summary(sub_y, task, c)
        if (
            impurity <= 1e-12
            or idx.size < 2 * min_leaf
            or (max_depth is not None and depth >= max_depth)
        ):
            continue
        split = _best_split(X[idx], sub_y, task, min_leaf, c)
        if split is None or split[0] >= impurity - 1e-12:
            continue
        _, node.feature, node.threshold = split
        node.left, node.right = _Node(), _Node()
        mask = X[idx, node.feature] <= node.threshold
        stack.append((node.left, idx[mask], depth + 1))
        stack.append((node.right, idx[~mask], depth + 1))
    return TreePredictor(task=task, root=root)


# ---------------------------------------------------------------------------
# MLP


@dataclass(frozen=True)
class MlpPredictor:
    task: str
    net: Network
    kind: str = "mlp"
    degenerate: bool = False

    def predict(self, X: np.ndarray) -> np.ndarray:
        out, _ = self.net.forward(np.asarray(X, dtype=np.float64))
        if self.task == CLASSIFICATION:
            return np.argmax(out, axis=1).astype(np.int64)
        return out[:, 0]


def fit_mlp(
    X: np.ndarray,
    y: np.ndarray,
    task: str,
    n_classes: int | None = None,
    seed: int = 0,
    epochs: int = MLP_EPOCHS,
):
    """One-hidden-layer ReLU network (width 100), Adam, fixed epoch budget."""
    _check_task(task)
    X = np.asarray(X, dtype=np.float64)
    if _needs_constant(X, y, task):
        return _constant_fit("mlp", y, task)
    n, d = X.shape
    rng = np.random.default_rng(seed)

    if task == CLASSIFICATION:
        y = y.astype(np.int64)
        c = int(n_classes) if n_classes is not None else int(y.max()) + 1
        out_dim = c
        onehot = np.eye(c)[y]
    else:
        y = np.asarray(y, dtype=np.float64)
        out_dim = 1

    net = Network(NetSpec(d, (MLP_HIDDEN, out_dim), ("relu", "identity")), rng)
    adam = AdamState(lr=MLP_LR, beta1=0.9, beta2=0.999)
    batch = min(MLP_BATCH, n)
    for _ in range(epochs):
        perm = rng.permutation(n)
        for lo in range(0, n, batch):
            rows = perm[lo : lo + batch]
            out, cache = net.forward(X[rows])
            if task == CLASSIFICATION:
                dout = (_softmax(out) - onehot[rows]) / rows.size
            else:
                dout = (2.0 / rows.size) * (out - y[rows, None])
            grads, _ = net.backward(cache, dout)
            adam_step(net.parameters(), grads.arrays(), adam)
    return MlpPredictor(task=task, net=net)


# ---------------------------------------------------------------------------
# scores


def f1_score(predictions: np.ndarray, truth: np.ndarray, positive: int | None = None) -> float:
    """Binary F1 against `positive`, or macro-average when it is None."""
    pred = np.asarray(predictions, dtype=np.int64)
    true = np.asarray(truth, dtype=np.int64)
    if pred.shape != true.shape:
        raise MetricError("prediction/truth length mismatch")
    if true.size == 0:
        raise MetricError("cannot score an empty prediction set")

    def one(label: int) -> float:
        tp = float(np.sum((pred == label) & (true == label)))
        fp = float(np.sum((pred == label) & (true != label)))
        fn = float(np.sum((pred != label) & (true == label)))
        if tp == 0.0:
            return 0.0
        prec = tp / (tp + fp)
        rec = tp / (tp + fn)
        return 2.0 * prec * rec / (prec + rec)

    if positive is not None:
        return one(int(positive))
    labels = np.union1d(np.unique(true), np.unique(pred))
    return float(np.mean([one(int(lab)) for lab in labels]))


def r2_normalized(predictions: np.ndarray, truth: np.ndarray) -> float:
    """Coefficient of determination floored at -1, mapped onto [0, 1]."""
    pred = np.asarray(predictions, dtype=np.float64)
    true = np.asarray(truth, dtype=np.float64)
    if pred.shape != true.shape:
        raise MetricError("prediction/truth length mismatch")
    if true.size == 0:
        raise MetricError("cannot score an empty prediction set")
    ss_tot = float(np.sum((true - true.mean()) ** 2))
    if ss_tot == 0.0:
        r2 = 0.0
    else:
        r2 = 1.0 - float(np.sum((true - pred) ** 2)) / ss_tot
    return (max(r2, -1.0) + 1.0) / 2.0
