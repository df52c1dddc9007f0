"""Motility features: kinematics, VAR-parameter shape features and their distances.

Every sequence is summarized twice: by its kinematics (centroid steps,
perimeter changes, mean h-step rotations) and by the parameters of a VAR
fitted to its TSRVF-PCA series. Distances to every training sequence then
serve as the classifier input.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import shape_space as ss
from . import var_model as vm
from .curve_geometry import DEFAULT_N_POINTS, area_centroid, perimeter
from .errors import DegenerateContourError, InsufficientDataError, ShapeDynError
from .shape_dynamics import preshape

ROTATION_HORIZON = 5
ALL_LAGS = (1, 2, 3, 4, 5)


class ZeroBlockWarning(RuntimeWarning):
    """A feature block had zero norm and was left at zero."""


def normalize_block(block) -> tuple[np.ndarray, bool]:
    """``block / |block|``; a zero block stays zero and is flagged."""
    arr = np.asarray(block, dtype=float)
    nrm = np.linalg.norm(arr)
    if nrm == 0 or not np.isfinite(nrm):
        return np.zeros_like(arr), True
    return arr / nrm, False


def normalize_feature_blocks(blocks: dict, item_id: str = "") -> tuple[dict, list]:
    """Normalize each named block by its own Euclidean (Frobenius) norm.

    Returns the normalized blocks and the names of zero-norm blocks, which
    are left as zeros with a :class:`ZeroBlockWarning`.
    """
    out, flagged = {}, []
    for name, block in blocks.items():
        out[name], zero = normalize_block(block)
        if zero:
            flagged.append(name)
    if flagged:
        warnings.warn(f"{item_id}: zero-norm feature blocks {flagged}", ZeroBlockWarning,
                      stacklevel=2)
    return out, flagged


# -- kinematics -------------------------------------------------------------

@dataclass
class KinematicsFeature:
    upsilon: np.ndarray  # (T-1, 2) centroid steps
    eta: np.ndarray  # (T-1,) perimeter changes
    xi: np.ndarray  # (5,) mean h-step rotation angles
    id: str = ""

    @property
    def length(self) -> int:
        return len(self.eta)

    def omega(self) -> np.ndarray:
        """Raw concatenation ``[upsilon, eta, xi]`` of length ``3(T-1) + 5``."""
        return np.concatenate([self.upsilon.ravel(), self.eta, self.xi])


@dataclass
class PreparedKinematics:
    """Zero-padded, block-normalized kinematics ready for distances."""

    xi: np.ndarray
    upsilon: np.ndarray
    eta: np.ndarray
    zero_blocks: list = field(default_factory=list)
    id: str = ""

    def vector(self) -> np.ndarray:
        return np.concatenate([self.xi, self.upsilon.ravel(), self.eta])


def kinematics_features(raw_contours, seq_id: str = "", *,
                        n_points: int = DEFAULT_N_POINTS,
                        horizon: int = ROTATION_HORIZON) -> KinematicsFeature:
    """Centroid steps, perimeter changes and mean rotations over 1..horizon frames.

    The rotation ``theta_h(t)`` is the angle of the rotation that carries the
    SRVF of frame ``t`` onto that of frame ``t + h`` (rotation only, no
    re-parameterization), wrapped to ``(-pi, pi]``.
    """
    frames = [np.asarray(c, dtype=float) for c in raw_contours]
    T = len(frames)
    if T < horizon + 2:
        raise InsufficientDataError(f"need at least {horizon + 2} frames, got {T}",
                                    module="motility_features",
                                    operation="kinematics_features", item_id=seq_id)
    cents, perims, srvfs = [], [], []
    for t, c in enumerate(frames):
        try:
            srvfs.append(preshape(c, n_points))
        except (DegenerateContourError, ValueError) as exc:
            raise DegenerateContourError(f"frame {t}: {exc}", module="motility_features",
                                         operation="kinematics_features",
                                         item_id=seq_id) from exc
        cents.append(area_centroid(c))
        perims.append(perimeter(c))
    cents = np.array(cents)
    perims = np.array(perims)
    xi = np.empty(horizon)
    for h in range(1, horizon + 1):
        angles = []
        for t in range(T - h):
            rot, _ = ss.align_rotation(srvfs[t], srvfs[t + h])
            angles.append(-ss.rotation_angle(rot))
        xi[h - 1] = np.mean(angles)
    xi = np.where(xi <= -np.pi, xi + 2 * np.pi, xi)
    return KinematicsFeature(upsilon=np.diff(cents, axis=0), eta=np.diff(perims), xi=xi,
                             id=seq_id)


def prepare_kinematics(feature: KinematicsFeature, length: int | None = None) -> PreparedKinematics:
    """Zero-pad ``upsilon`` and ``eta`` to ``length`` steps, then normalize each block."""
    length = feature.length if length is None else length
    if length < feature.length:
        raise ShapeDynError(f"cannot pad {feature.length} steps down to {length}",
                            module="motility_features", operation="prepare_kinematics",
                            item_id=feature.id)
    pad = length - feature.length
    ups = np.vstack([feature.upsilon, np.zeros((pad, 2))])
    eta = np.concatenate([feature.eta, np.zeros(pad)])
    blocks, zero = normalize_feature_blocks({"xi": feature.xi, "upsilon": ups, "eta": eta},
                                            feature.id)
    return PreparedKinematics(blocks["xi"], blocks["upsilon"], blocks["eta"], zero, feature.id)


def kinematics_distance(i: PreparedKinematics, j: PreparedKinematics) -> float:
    """``sqrt(|xi_i - xi_j|^2 + |ups_i - ups_j|^2 + |eta_i - eta_j|^2)``.

    Shorter sequences are zero-padded to the longer one. Padding does not
    change a block's norm, so padding before or after normalization, and to
    any common length, gives the same value.
    """
    n = max(len(i.eta), len(j.eta))

    def pad(a):
        return np.concatenate([a, np.zeros((n - len(a),) + a.shape[1:])])

    return float(np.sqrt(np.sum((i.xi - j.xi) ** 2)
                         + np.sum((pad(i.upsilon) - pad(j.upsilon)) ** 2)
                         + np.sum((pad(i.eta) - pad(j.eta)) ** 2)))


# -- VAR-parameter shape features ------------------------------------------

@dataclass
class ShapeFeature:
    p: int
    beta: np.ndarray  # normalized [c; A_1^T; ...; A_p^T]
    abar: np.ndarray  # normalized mean of the A_j
    sigma: np.ndarray  # normalized noise covariance
    zero_blocks: list = field(default_factory=list)
    id: str = ""

    @property
    def d(self) -> int:
        return self.sigma.shape[0]


def shape_feature(model: vm.VarModel, item_id: str = "") -> ShapeFeature:
    blocks, zero = normalize_feature_blocks(
        {"beta": model.beta(), "abar": model.A.mean(axis=0), "sigma": model.sigma}, item_id)
    return ShapeFeature(model.p, blocks["beta"], blocks["abar"], blocks["sigma"], zero, item_id)


def fit_shape_feature(x, p: int | None = None, *, p_max: int = 5,
                      criterion: str = "bic") -> ShapeFeature:
    """VAR fit of a series turned into a :class:`ShapeFeature`.

    With ``p=None`` the lag is chosen per series by ``criterion``.
    """
    if p is None:
        p = vm.select_lag(x, p_max, criterion)
    return shape_feature(vm.fit_var(x, p), getattr(x, "source_id", ""))


def shape_param_distance(i: ShapeFeature, j: ShapeFeature, *, use_mean: bool | None = None) -> float:
    """Parameter distance between two VAR shape features.

    Equal lags compare the stacked coefficients and covariances; unequal
    lags (or ``use_mean=True``) compare the mean coefficient matrices
    instead of the stacks.
    """
    if i.d != j.d:
        raise ShapeDynError(f"feature dimensions differ ({i.d} vs {j.d})",
                            module="motility_features", operation="shape_param_distance",
                            item_id=f"{i.id}|{j.id}")
    if use_mean is None:
        use_mean = i.p != j.p
    coef = np.sum((i.abar - j.abar) ** 2) if use_mean else np.sum((i.beta - j.beta) ** 2)
    return float(np.sqrt(coef + np.sum((i.sigma - j.sigma) ** 2)))


def all_lag_shape_feature(x, lags=ALL_LAGS) -> list[ShapeFeature]:
    """One normalized :class:`ShapeFeature` per lag, in lag order."""
    return [shape_feature(vm.fit_var(x, p), getattr(x, "source_id", "")) for p in lags]


def all_lag_distance(i: list, j: list) -> float:
    """Distance of concatenated per-lag blocks: root-sum-square of per-lag distances."""
    if [f.p for f in i] != [f.p for f in j]:
        raise ShapeDynError("all-lag features must cover the same lags",
                            module="motility_features", operation="all_lag_distance")
    return float(np.sqrt(sum(shape_param_distance(a, b) ** 2 for a, b in zip(i, j))))


def feature_distance(i, j) -> float:
    """Dispatch on feature type (single-lag, all-lag list, or kinematics)."""
    if isinstance(i, PreparedKinematics):
        return kinematics_distance(i, j)
    if isinstance(i, (list, tuple)):
        return all_lag_distance(i, j)
    return shape_param_distance(i, j)


def distance_matrix(queries, train) -> np.ndarray:
    """``D[a, b] = distance(queries[a], train[b])``."""
    return np.array([[feature_distance(q, t) for t in train] for q in queries])


def build_distance_features(shape_dist=None, kin_dist=None, weights=(1.0, 1.0)) -> np.ndarray:
    """Combine distance vectors (or matrices): ``w1 V_S + w2 V_K``.

    Either part may be ``None``, in which case it contributes nothing.
    """
    w1, w2 = weights
    parts = []
    if shape_dist is not None:
        parts.append(w1 * np.asarray(shape_dist, dtype=float))
    if kin_dist is not None:
        parts.append(w2 * np.asarray(kin_dist, dtype=float))
    if not parts:
        raise ValueError("need at least one distance block")
    return sum(parts[1:], parts[0])
