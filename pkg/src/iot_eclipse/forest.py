"""Random forest built from CART trees, with stratified k-fold evaluation."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .trace import ClassLabel

FOREST_FORMAT = "iot-eclipse/random-forest"
FOREST_VERSION = 1

# relative slack when comparing split scores, so float noise never decides a tie
_TIE_TOL = 1e-12


class ClassTooSmallError(ValueError):
    pass


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 30
    k_folds: int = 15
    max_depth: int | None = None
    min_samples_leaf: int = 1
    features_per_split: int | None = None  # None: ceil(sqrt(d))
    seed: int = 0
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.k_folds < 2:
            raise ValueError("k_folds must be >= 2")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ValueError("features_per_split must be >= 1")

    def resolve_features(self, d: int) -> int:
        m = math.ceil(math.sqrt(d)) if self.features_per_split is None else self.features_per_split
        if not 1 <= m <= d:
            raise ValueError(f"features_per_split={m} outside [1, {d}]")
        return m

    def replace(self, **changes) -> "ForestParams":
        return ForestParams(**{**asdict(self), **changes})

    @classmethod
    def from_dict(cls, d) -> "ForestParams":
        return cls(**d)


# ---------------------------------------------------------------------------
# trees

@dataclass(eq=False)
class DecisionTree:
    """Flat array tree. ``feature[i] == -1`` marks a leaf.

    Samples with ``x[feature] <= threshold`` go to ``left``. ``value`` holds
    the per-class sample counts reaching each node.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_features: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def apply(self, X) -> np.ndarray:
        """Leaf index for every row of ``X``."""
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(len(X), dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] >= 0]
        return node

    def predict(self, X) -> np.ndarray:
        # argmax takes the lowest class index on ties
        return np.argmax(self.value[self.apply(X)], axis=1)

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def to_dict(self) -> dict:
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "value": self.value.tolist(), "n_features": self.n_features}

    @classmethod
    def from_dict(cls, d) -> "DecisionTree":
        return cls(np.asarray(d["feature"], dtype=np.int64),
                   np.asarray(d["threshold"], dtype=np.float64),
                   np.asarray(d["left"], dtype=np.int64),
                   np.asarray(d["right"], dtype=np.int64),
                   np.asarray(d["value"], dtype=np.int64).reshape(len(d["feature"]), -1),
                   int(d["n_features"]))


def gini(counts) -> float:
    counts = np.asarray(counts, dtype=np.float64)
    n = counts.sum()
    return 0.0 if n == 0 else 1.0 - float(np.sum((counts / n) ** 2))


def best_split(X: np.ndarray, y: np.ndarray, features: Sequence[int], n_classes: int,
               min_samples_leaf: int = 1):
    """Best ``(feature, threshold, weighted_gini)`` over ``features`` or None.

    Candidate thresholds are midpoints between consecutive distinct values.
    Ties go to the lowest feature index, then the lowest threshold.
    """
    features = np.sort(np.asarray(features, dtype=np.int64))
    n = len(y)
    if n < 2 * min_samples_leaf or features.size == 0:
        return None
    xs = X[:, features]
    order = np.argsort(xs, axis=0, kind="stable")
    xs = np.take_along_axis(xs, order, axis=0)
    ys = y[order]
    onehot = (ys[:, :, None] == np.arange(n_classes)).astype(np.float64)
    left = np.cumsum(onehot, axis=0)[:-1]           # (n-1, m, C): split after row i
    total = left[-1] + onehot[-1]
    right = total - left
    n_left = np.arange(1, n, dtype=np.float64)[:, None]
    n_right = n - n_left
    # maximise sum(cL^2)/nL + sum(cR^2)/nR, i.e. minimise weighted Gini
    score = (left * left).sum(axis=2) / n_left + (right * right).sum(axis=2) / n_right
    valid = xs[1:] > xs[:-1]
    if min_samples_leaf > 1:
        ok = (n_left >= min_samples_leaf) & (n_right >= min_samples_leaf)
        valid &= ok
    if not valid.any():
        return None
    score = np.where(valid, score, -np.inf)
    col_best = score.max(axis=0)
    overall = col_best.max()
    tol = _TIE_TOL * max(abs(overall), 1.0)
    j = int(np.flatnonzero(col_best >= overall - tol)[0])
    i = int(np.flatnonzero(score[:, j] >= overall - tol)[0])
    threshold = (xs[i, j] + xs[i + 1, j]) / 2.0
    if not threshold < xs[i + 1, j]:  # midpoint rounded up onto the right value
        threshold = xs[i, j]
    weighted = (n - score[i, j]) / n
    return int(features[j]), float(threshold), float(weighted)


def train_tree(X, y, params: ForestParams, rng: np.random.Generator,
               n_classes: int | None = None) -> DecisionTree:
    """Grow one CART tree greedily, depth first.

    At each node ``features_per_split`` distinct features are drawn; if none
    of them admits a split, the remaining features are tried before giving
    up, so an impure node only becomes a leaf when no split exists at all.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2:
        raise ValueError("samples must form a 2-d matrix (all vectors the same length)")
    if len(X) < 1 or len(X) != len(y):
        raise ValueError("need at least one sample and one label per sample")
    n, d = X.shape
    C = int(y.max()) + 1 if n_classes is None else n_classes
    m = params.resolve_features(d)
    max_depth = math.inf if params.max_depth is None else params.max_depth

    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(np.bincount(y[idx], minlength=C))
        return len(feature) - 1

    root = new_node(np.arange(n))
    stack = [(root, np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        counts = value[node]
        if depth >= max_depth or np.count_nonzero(counts) <= 1 \
                or len(idx) < 2 * params.min_samples_leaf:
            continue
        perm = rng.permutation(d)
        Xn, yn = X[idx], y[idx]
        split = best_split(Xn, yn, perm[:m], C, params.min_samples_leaf)
        if split is None and m < d:
            split = best_split(Xn, yn, perm[m:], C, params.min_samples_leaf)
        if split is None:
            continue
        f, thr, _ = split
        go_left = Xn[:, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        feature[node], threshold[node] = f, thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        # right pushed first so the left subtree is numbered first
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))

    return DecisionTree(np.asarray(feature, dtype=np.int64), np.asarray(threshold),
                        np.asarray(left, dtype=np.int64), np.asarray(right, dtype=np.int64),
                        np.vstack(value).astype(np.int64), d)


# ---------------------------------------------------------------------------
# forests

class Prediction(NamedTuple):
    label: object
    votes: dict


@dataclass(eq=False)
class RandomForest:
    trees: list
    classes: tuple
    params: ForestParams
    n_features: int

    def votes(self, X) -> np.ndarray:
        """(n_samples, n_classes) vote counts, one vote per tree."""
        X = self._check(X)
        out = np.zeros((len(X), len(self.classes)), dtype=np.int64)
        rows = np.arange(len(X))
        for tree in self.trees:
            np.add.at(out, (rows, tree.predict(X)), 1)
        return out

    def predict_index(self, X) -> np.ndarray:
        return np.argmax(self.votes(X), axis=1)

    def predict_labels(self, X) -> list:
        return [self.classes[i] for i in self.predict_index(X)]

    def predict(self, vector) -> Prediction:
        """Majority vote for one vector; ties go to the earliest class."""
        values = getattr(vector, "values", vector)
        v = self.votes(np.asarray(values, dtype=np.float64)[None, :])[0]
        return Prediction(self.classes[int(np.argmax(v))],
                          {c: int(k) for c, k in zip(self.classes, v)})

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        return X

    def to_dict(self) -> dict:
        return {"format": FOREST_FORMAT, "version": FOREST_VERSION,
                "params": asdict(self.params), "n_features": self.n_features,
                "classes": [str(c) for c in self.classes],
                "trees": [t.to_dict() for t in self.trees]}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d) -> "RandomForest":
        if d.get("format") != FOREST_FORMAT:
            raise ValueError(f"not a serialized forest (format={d.get('format')!r})")
        if d.get("version") != FOREST_VERSION:
            raise ValueError(f"unsupported forest version {d.get('version')!r}")
        return cls([DecisionTree.from_dict(t) for t in d["trees"]],
                   tuple(_parse_class(c) for c in d["classes"]),
                   ForestParams.from_dict(d["params"]), int(d["n_features"]))

    @classmethod
    def loads(cls, text: str) -> "RandomForest":
        return cls.from_dict(json.loads(text))


def _parse_class(text):
    try:
        return ClassLabel.parse(text)
    except ValueError:
        return text


def train_forest(X, y, classes: Sequence, params: ForestParams,
                 stream: tuple = ()) -> RandomForest:
    """Bagged ensemble of ``params.n_trees`` trees.

    Tree ``i`` draws its bootstrap sample and feature subsets from a
    generator seeded with ``(params.seed, *stream, i)``, so trees are
    independent of training order.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2:
        raise ValueError("samples must form a 2-d matrix (all vectors the same length)")
    n, d = X.shape
    if n < 1:
        raise ValueError("cannot train on an empty dataset")
    C = len(classes)
    if y.min() < 0 or y.max() >= C:
        raise ValueError("labels must index into classes")
    params.resolve_features(d)
    trees = []
    for i in range(params.n_trees):
        rng = np.random.default_rng([params.seed, *stream, i])
        idx = rng.integers(0, n, size=n) if params.bootstrap else np.arange(n)
        trees.append(train_tree(X[idx], y[idx], params, rng, C))
    return RandomForest(trees, tuple(classes), params, d)


def fit_dataset(dataset, params: ForestParams, stream: tuple = ()) -> RandomForest:
    return train_forest(dataset.X, dataset.labels, dataset.classes, params, stream)


# ---------------------------------------------------------------------------
# evaluation

def _undefined_div(a, b):
    return None if b == 0 else a / b


@dataclass
class EvaluationReport:
    classes: tuple
    confusion: np.ndarray          # rows: true class, columns: predicted
    fold_accuracies: list = field(default_factory=list)
    predictions: np.ndarray | None = None
    notes: tuple = ()

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.confusion)) / self.total

    def recall(self) -> list:
        return [_undefined_div(self.confusion[i, i], self.confusion[i].sum())
                for i in range(len(self.classes))]

    def precision(self) -> list:
        return [_undefined_div(self.confusion[i, i], self.confusion[:, i].sum())
                for i in range(len(self.classes))]

    def confusion_csv(self, comments: Sequence[str] = ()) -> str:
        out = io.StringIO()
        for c in comments:
            out.write(f"# {c}\n")
        w = csv.writer(out, lineterminator="\n")
        names = [_name(c) for c in self.classes]
        w.writerow(["true\\predicted", *names])
        for name, row in zip(names, self.confusion.tolist()):
            w.writerow([name, *row])
        return out.getvalue()

    def summary(self) -> str:
        lines = [f"samples: {self.total}", f"classes: {len(self.classes)}",
                 f"accuracy: {self.accuracy:.4f}"]
        if self.fold_accuracies:
            fa = np.asarray(self.fold_accuracies)
            lines.append(f"fold accuracy: mean {fa.mean():.4f}, min {fa.min():.4f}, "
                         f"max {fa.max():.4f} over {len(fa)} folds")
        for c, p, r in zip(self.classes, self.precision(), self.recall()):
            lines.append(f"  {_name(c):<16} precision {_fmt(p)}  recall {_fmt(r)}")
        lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines) + "\n"


def _name(c) -> str:
    return c.short_name if isinstance(c, ClassLabel) else str(c)


def _fmt(v) -> str:
    return "undefined" if v is None else f"{v:.4f}"


def stratified_folds(labels, k: int, seed: int = 0) -> np.ndarray:
    """Fold id for every sample.

    Each class is shuffled and dealt round-robin, continuing from where the
    previous class stopped, so per-class fold counts differ by at most one
    and fold totals stay even.
    """
    labels = np.asarray(labels)
    folds = np.empty(len(labels), dtype=np.int64)
    rng = np.random.default_rng([seed, 0xF0])
    offset = 0
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(len(idx))]
        folds[idx] = (offset + np.arange(len(idx))) % k
        offset += len(idx)
    return folds


def cross_validate(dataset, params: ForestParams, test_dataset=None) -> EvaluationReport:
    """Stratified k-fold evaluation; every sample is predicted exactly once.

    With ``test_dataset`` (row-aligned with ``dataset``), each fold's forest
    is trained on ``dataset`` and scored on the held-out rows of
    ``test_dataset``, e.g. clean training and reshaped testing.
    """
    labels = np.asarray(dataset.labels)
    C = len(dataset.classes)
    counts = np.bincount(labels, minlength=C)
    for c, k in zip(dataset.classes, counts):
        if k < params.k_folds:
            raise ClassTooSmallError(
                f"class {c} has {k} samples, fewer than k_folds={params.k_folds}")
    test = dataset if test_dataset is None else test_dataset
    if len(test) != len(dataset) or not np.array_equal(test.labels, labels):
        raise ValueError("test dataset must be row-aligned with the training dataset")

    folds = stratified_folds(labels, params.k_folds, params.seed)
    pred = np.full(len(labels), -1, dtype=np.int64)
    fold_acc = []
    for f in range(params.k_folds):
        held = folds == f
        forest = train_forest(dataset.X[~held], labels[~held], dataset.classes, params,
                              stream=(f + 1,))
        pred[held] = forest.predict_index(test.X[held])
        fold_acc.append(float(np.mean(pred[held] == labels[held])))
    confusion = np.zeros((C, C), dtype=np.int64)
    np.add.at(confusion, (labels, pred), 1)
    return EvaluationReport(tuple(dataset.classes), confusion, fold_acc, pred)


class BinaryMetrics(NamedTuple):
    tpr: float | None
    fpr: float | None
    accuracy: float | None


def binary_metrics(report, positive) -> BinaryMetrics:
    """One-vs-rest rates for ``positive``; undefined rates are ``None``.

    ``report`` may be an :class:`EvaluationReport` or a ``(classes,
    confusion)`` pair.
    """
    if isinstance(report, EvaluationReport):
        classes, cm = report.classes, report.confusion
    else:
        classes, cm = report
    cm = np.asarray(cm)
    if positive not in classes:
        raise ValueError(f"positive class {positive} not in report")
    p = list(classes).index(positive)
    tp = int(cm[p, p])
    fn = int(cm[p].sum()) - tp
    fp = int(cm[:, p].sum()) - tp
    tn = int(cm.sum()) - tp - fn - fp
    return BinaryMetrics(_undefined_div(tp, tp + fn), _undefined_div(fp, fp + tn),
                         _undefined_div(tp + tn, int(cm.sum())))
