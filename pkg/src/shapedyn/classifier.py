"""Small classifiers over distance-feature vectors, and stratified cross-validation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError, ShapeDynError

CLASSIFIERS = ("svm", "knn", "centroid")


@dataclass
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    class_names: list = field(default_factory=list)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if not self.class_names:
            self.class_names = [str(c) for c in range(int(self.labels.max()) + 1)]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @classmethod
    def from_names(cls, features, names) -> "LabeledDataset":
        classes = sorted(set(names))
        index = {c: i for i, c in enumerate(classes)}
        return cls(features, np.array([index[n] for n in names]), classes)


@dataclass
class EvaluationReport:
    accuracy: float
    confusion: np.ndarray  # row-normalized
    counts: np.ndarray
    fold_accuracies: list
    class_names: list

    def to_dict(self) -> dict:
        return {"accuracy": self.accuracy, "fold_accuracies": self.fold_accuracies,
                "confusion": self.confusion.tolist(), "counts": self.counts.tolist(),
                "class_names": self.class_names}

    def table(self) -> str:
        width = max(8, *(len(c) for c in self.class_names)) + 1
        head = " " * width + "".join(f"{c:>{width}}" for c in self.class_names)
        rows = [head]
        for name, row in zip(self.class_names, self.confusion):
            rows.append(f"{name:>{width}}" + "".join(f"{v:>{width}.3f}" for v in row))
        rows.append(f"accuracy {self.accuracy:.4f}")
        return "\n".join(rows)


class Standardizer:
    def fit(self, x):
        self.mean = x.mean(axis=0)
        sd = x.std(axis=0)
        self.scale = np.where(sd > 1e-12, sd, 1.0)
        return self

    def transform(self, x):
        return (x - self.mean) / self.scale


class LinearSVM:
    """One-vs-rest linear SVMs fitted by full-batch subgradient descent.

    Each binary problem minimizes ``lambda/2 |(w, b)|^2 + mean_i hinge(y_i f(x_i))``
    with ``lambda = 1 / C_reg``, using step
    ``1 / (lambda t)`` and returning the average of the second half of the
    iterates. Features are standardized on the training data. The objective
    is strongly convex and the updates are full-batch, so training is
    deterministic; ``seed`` is accepted for interface symmetry.
    """

    def __init__(self, C_reg: float = 1.0, epochs: int = 2000, seed: int = 0):
        self.C_reg = C_reg
        self.epochs = epochs
        self.seed = seed

    def fit(self, x, y, n_classes=None):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=int)
        self.n_classes = int(n_classes or y.max() + 1)
        if len(np.unique(y)) < 2:
            raise ShapeDynError("need at least two classes", module="classifier",
                                operation="train_linear_svm")
        self.scaler = Standardizer().fit(x)
        z = self.scaler.transform(x)
        lam = 1.0 / self.C_reg
        # constant column folds the bias into w (so it is mildly regularized too)
        z = np.hstack([z, np.ones((len(z), 1))])
        n, dim = z.shape
        targets = np.where(y[None, :] == np.arange(self.n_classes)[:, None], 1.0, -1.0)
        w = np.zeros((self.n_classes, dim))
        w_avg = np.zeros_like(w)
        start = self.epochs // 2
        for t in range(1, self.epochs + 1):
            margins = targets * (w @ z.T)
            active = (margins < 1) * targets  # (C, n)
            w -= (lam * w - active @ z / n) / (lam * t)
            if t > start:
                w_avg += w
        w_avg /= self.epochs - start
        self.coef_ = w_avg[:, :-1]
        self.intercept_ = w_avg[:, -1]
        return self

    def decision_function(self, x):
        z = self.scaler.transform(np.asarray(x, dtype=float))
        return z @ self.coef_.T + self.intercept_

    def predict(self, x):
        return np.argmax(self.decision_function(x), axis=1)  # ties go to the lowest id


def train_linear_svm(data: LabeledDataset, C_reg: float = 1.0, *, epochs: int = 2000,
                     seed: int = 0) -> LinearSVM:
    return LinearSVM(C_reg, epochs, seed).fit(data.features, data.labels, data.n_classes)


def _vote(labels, n_classes):
    return int(np.argmax(np.bincount(labels, minlength=n_classes)))


def predict_knn(train: LabeledDataset, query, k: int = 1) -> np.ndarray:
    """Majority vote of the ``k`` nearest training rows; ties to the smallest class id."""
    query = np.atleast_2d(np.asarray(query, dtype=float))
    if k > len(train.labels):
        raise ShapeDynError("k exceeds the training set size", module="classifier",
                            operation="predict_knn")
    d2 = ((query[:, None, :] - train.features[None]) ** 2).sum(axis=2)
    order = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return np.array([_vote(train.labels[row], train.n_classes) for row in order])


class KNN:
    def __init__(self, k: int = 1):
        self.k = k

    def fit(self, x, y, n_classes=None):
        self.train = LabeledDataset(x, y, [str(c) for c in range(int(n_classes or max(y) + 1))])
        return self

    def predict(self, x):
        return predict_knn(self.train, x, self.k)


class NearestCentroid:
    def fit(self, x, y, n_classes=None):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=int)
        n_classes = int(n_classes or y.max() + 1)
        self.scaler = Standardizer().fit(x)
        z = self.scaler.transform(x)
        self.centroids = np.array([z[y == c].mean(axis=0) if np.any(y == c)
                                   else np.full(z.shape[1], np.inf) for c in range(n_classes)])
        return self

    def predict(self, x):
        z = self.scaler.transform(np.atleast_2d(np.asarray(x, dtype=float)))
        d2 = ((z[:, None, :] - self.centroids[None]) ** 2).sum(axis=2)
        return np.argmin(d2, axis=1)


def make_classifier(name: str = "svm", **kw):
    name = name.lower()
    if name == "svm":
        return LinearSVM(**kw)
    if name == "knn":
        return KNN(**kw)
    if name == "centroid":
        return NearestCentroid()
    raise ValueError(f"unknown classifier {name!r}; choose from {CLASSIFIERS}")


def stratified_folds(labels, folds: int, seed: int = 0) -> np.ndarray:
    """Fold index per sample; each class is shuffled and dealt round-robin."""
    labels = np.asarray(labels, dtype=int)
    if folds < 2:
        raise ValueError("folds must be at least 2")
    counts = np.bincount(labels)
    small = [c for c, n in enumerate(counts) if 0 < n < folds]
    if small:
        raise InsufficientDataError(f"classes {small} have fewer members than folds={folds}",
                                    module="classifier", operation="cross_validate")
    rng = np.random.default_rng(seed)
    assign = np.empty(len(labels), dtype=int)
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(len(idx))]
        assign[idx] = np.arange(len(idx)) % folds
    return assign


def evaluate(truth, predicted, n_classes, class_names=None, fold_accuracies=None) -> EvaluationReport:
    truth = np.asarray(truth, dtype=int)
    predicted = np.asarray(predicted, dtype=int)
    counts = np.zeros((n_classes, n_classes), dtype=int)
    np.add.at(counts, (truth, predicted), 1)
    rows = counts.sum(axis=1, keepdims=True)
    confusion = np.divide(counts, rows, out=np.zeros(counts.shape), where=rows > 0)
    return EvaluationReport(float(np.trace(counts) / counts.sum()), confusion, counts,
                            list(fold_accuracies or []),
                            list(class_names or [str(c) for c in range(n_classes)]))


def cross_validate(data: LabeledDataset | None = None, folds: int = 5, classifier="svm",
                   seed: int = 0, *, labels=None, featurize=None, class_names=None,
                   **clf_kw) -> EvaluationReport:
    """Stratified k-fold evaluation.

    With a fixed feature matrix pass ``data``. To rebuild features from
    training data only in every fold, pass ``labels`` and
    ``featurize(train_idx, test_idx) -> (X_train, X_test)``. ``classifier``
    is a name from :data:`CLASSIFIERS` or a factory returning an object
    with ``fit(x, y, n_classes)`` and ``predict(x)``.
    """
    if data is not None:
        labels = data.labels
        class_names = data.class_names

        def featurize(tr, te):
            return data.features[tr], data.features[te]
    labels = np.asarray(labels, dtype=int)
    n_classes = len(class_names) if class_names else int(labels.max()) + 1
    assign = stratified_folds(labels, folds, seed)
    predicted = np.empty_like(labels)
    fold_acc = []
    for f in range(folds):
        tr, te = np.flatnonzero(assign != f), np.flatnonzero(assign == f)
        x_tr, x_te = featurize(tr, te)
        clf = classifier() if callable(classifier) else make_classifier(classifier, **clf_kw)
        clf.fit(x_tr, labels[tr], n_classes)
        predicted[te] = clf.predict(x_te)
        fold_acc.append(float(np.mean(predicted[te] == labels[te])))
    return evaluate(labels, predicted, n_classes, class_names, fold_acc)
