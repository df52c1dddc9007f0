"""End-to-end wiring: sequences -> TSRVF -> PCA series -> features -> classifier.

Per-sequence work that does not depend on the training set (frame
alignment, TSRVF, kinematics) is computed once. Everything fitted to data
(reference base, PCA basis) is recomputed from the training indices of
each fold, so test sequences never influence training artifacts.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import classifier as cl
from . import motility_features as mf
from . import shape_dynamics as sd
from .curve_geometry import DEFAULT_N_POINTS
from .shape_dynamics import DEFAULT_PCA_DIM

LAG_MODES = ("fixed", "best", "all")
FEATURE_KINDS = ("shape", "kinematics", "combined")


@dataclass
class PipelineConfig:
    n_points: int = DEFAULT_N_POINTS
    d: int = DEFAULT_PCA_DIM
    p_max: int = 5
    criterion: str = "bic"
    lag_mode: str = "fixed"
    lag: int | None = 1
    weights: tuple = (1.0, 1.0)
    features: str = "shape"
    classifier: str = "svm"
    C_reg: float = 1.0
    k: int = 1
    folds: int = 5
    seed: int = 0

    def validate(self):
        for name in ("n_points", "d", "p_max", "folds"):
            if int(getattr(self, name)) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.lag_mode not in LAG_MODES:
            raise ValueError(f"lag_mode must be one of {LAG_MODES}")
        if self.lag_mode == "fixed" and not self.lag:
            raise ValueError("lag_mode 'fixed' needs a lag")
        if self.features not in FEATURE_KINDS:
            raise ValueError(f"features must be one of {FEATURE_KINDS}")
        if self.criterion.lower() not in ("aic", "bic", "hq"):
            raise ValueError("criterion must be aic, bic or hq")
        if self.classifier not in cl.CLASSIFIERS:
            raise ValueError(f"classifier must be one of {cl.CLASSIFIERS}")
        return self

    def classifier_kwargs(self) -> dict:
        if self.classifier == "svm":
            return {"C_reg": self.C_reg}
        if self.classifier == "knn":
            return {"k": self.k}
        return {}


@dataclass
class PreparedSequence:
    id: str
    label: str | None
    sequence: sd.ShapeSequence
    tsrvf: sd.TsrvfSequence
    kinematics: mf.PreparedKinematics | None = None


def prepare(raw_sequences, config: PipelineConfig, *, kinematics: bool = False) -> list:
    """Align frames and compute the TSRVF of every raw sequence (and kinematics if asked)."""
    out = []
    for raw in raw_sequences:
        frames = getattr(raw, "frames", None)
        if frames is None:
            frames = raw.contours
        seq = sd.build_sequence(frames, raw.id, n_points=config.n_points, label=raw.label)
        kin = None
        if kinematics:
            kin = mf.prepare_kinematics(mf.kinematics_features(frames, raw.id,
                                                               n_points=config.n_points))
        out.append(PreparedSequence(raw.id, raw.label, seq, sd.compute_tsrvf(seq), kin))
    return out


@dataclass
class FoldModel:
    """Training artifacts of one fit: reference base, PCA basis, training features."""

    reference_id: str
    basis: sd.PcaBasis
    train_ids: list
    train_shape: list = field(default_factory=list)
    train_kin: list = field(default_factory=list)


def embed(prepared, basis: sd.PcaBasis) -> list[sd.EuclideanSeries]:
    """TSRVF-PCA series of each prepared sequence in the tangent space of ``basis``."""
    return [sd.project(sd.to_reference(p.tsrvf, basis.base), basis) for p in prepared]


def fit_basis(train, d: int) -> sd.PcaBasis:
    """PCA basis at the first training sequence's base."""
    reference = train[0].tsrvf.base
    moved = [sd.to_reference(p.tsrvf, reference) for p in train]
    return sd.fit_pca(moved, d)


def shape_features(series, config: PipelineConfig) -> list:
    out = []
    for x in series:
        if config.lag_mode == "all":
            out.append(mf.all_lag_shape_feature(x))
        elif config.lag_mode == "best":
            out.append(mf.fit_shape_feature(x, None, p_max=config.p_max,
                                            criterion=config.criterion))
        else:
            out.append(mf.fit_shape_feature(x, config.lag))
    return out


def fit_fold(train, config: PipelineConfig) -> FoldModel:
    basis = fit_basis(train, config.d)
    model = FoldModel(train[0].id, basis, [p.id for p in train])
    if config.features != "kinematics":
        model.train_shape = shape_features(embed(train, basis), config)
    if config.features != "shape":
        model.train_kin = [p.kinematics for p in train]
    return model


def distance_features(model: FoldModel, queries, config: PipelineConfig,
                      *, query_shape=None) -> np.ndarray:
    """Distance vectors of ``queries`` to the training sequences of ``model``."""
    shape_d = kin_d = None
    if config.features != "kinematics":
        if query_shape is None:
            query_shape = shape_features(embed(queries, model.basis), config)
        shape_d = mf.distance_matrix(query_shape, model.train_shape)
    if config.features != "shape":
        kin_d = mf.distance_matrix([q.kinematics for q in queries], model.train_kin)
    if config.features == "shape":
        return shape_d
    if config.features == "kinematics":
        return kin_d
    return mf.build_distance_features(shape_d, kin_d, config.weights)


def fold_featurizer(prepared, config: PipelineConfig, on_fold=None):
    """``featurize(train_idx, test_idx)`` for :func:`classifier.cross_validate`."""

    def featurize(tr, te):
        train = [prepared[i] for i in tr]
        test = [prepared[i] for i in te]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", mf.ZeroBlockWarning)
            model = fit_fold(train, config)
            x_train = distance_features(model, train, config, query_shape=model.train_shape
                                        if config.features != "kinematics" else None)
            x_test = distance_features(model, test, config)
        if on_fold is not None:
            on_fold(model, tr, te, x_train, x_test)
        return x_train, x_test

    return featurize


def classify(prepared, config: PipelineConfig, on_fold=None) -> cl.EvaluationReport:
    config.validate()
    names = [p.label for p in prepared]
    classes = sorted(set(names))
    labels = np.array([classes.index(n) for n in names])
    clf_kw = config.classifier_kwargs()
    return cl.cross_validate(labels=labels, class_names=classes, folds=config.folds,
                             seed=config.seed, classifier=config.classifier,
                             featurize=fold_featurizer(prepared, config, on_fold), **clf_kw)
