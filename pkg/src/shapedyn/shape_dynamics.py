"""Shape sequences as Euclidean time series: TSRVF, I-TSRVF and TSRVF-PCA.

A sequence of contours becomes a path on the pre-shape sphere. Its shooting
vectors between consecutive frames are parallel-transported back to the
first frame, giving a time series of tangent fields in one vector space
(the TSRVF). PCA of pooled TSRVFs flattens those fields to ``d`` numbers per
time step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import shape_space as ss
from .curve_geometry import DEFAULT_N_POINTS, center_and_scale, resample_uniform, to_srvf
from .errors import AntipodalError, DegenerateContourError, InsufficientDataError, ShapeDynError

DEFAULT_PCA_DIM = 5


@dataclass
class ShapeSequence:
    """Pre-shapes of one sequence, each aligned to its predecessor.

    ``frames`` has shape ``(T, N, 2)``; ``raw_contours`` keeps the contours
    as ingested (before normalization) for kinematics.
    """

    id: str
    frames: np.ndarray
    raw_contours: list = field(default_factory=list)
    label: str | None = None

    def __len__(self):
        return len(self.frames)


@dataclass
class TsrvfSequence:
    """Transported fields ``F(1..T-1)``, all tangent at ``base``; ``fields`` is ``(T-1, N, 2)``."""

    base: np.ndarray
    fields: np.ndarray
    source_id: str = ""

    def __len__(self):
        return len(self.fields)


@dataclass
class EuclideanSeries:
    """TSRVF-PCA coefficients, one row per time step."""

    values: np.ndarray
    source_id: str = ""

    def __len__(self):
        return len(self.values)


@dataclass
class PcaBasis:
    mean: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray
    base: np.ndarray

    @property
    def d(self) -> int:
        return len(self.components)

    @property
    def grid_size(self) -> int:
        return self.mean.shape[0]

    def to_dict(self) -> dict:
        return {
            "grid_size": self.grid_size,
            "d": self.d,
            "eigenvalues": self.eigenvalues.tolist(),
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "reference_base": self.base.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PcaBasis":
        return cls(
            mean=np.asarray(data["mean"], dtype=float),
            components=np.asarray(data["components"], dtype=float),
            eigenvalues=np.asarray(data["eigenvalues"], dtype=float),
            base=np.asarray(data["reference_base"], dtype=float),
        )


def preshape(contour, n_points: int = DEFAULT_N_POINTS) -> np.ndarray:
    """Resample, normalize and convert one contour to a unit-norm SRVF."""
    return ss.as_preshape(to_srvf(center_and_scale(resample_uniform(contour, n_points))))


def build_sequence(contours, seq_id: str = "", *, n_points: int = DEFAULT_N_POINTS,
                   label=None, reference=None, align_kw=None) -> ShapeSequence:
    """Turn raw contours into a :class:`ShapeSequence`.

    Every frame is aligned to the already-aligned previous frame; with
    ``reference`` the first frame is aligned to it too.
    """
    align_kw = align_kw or {}
    frames = []
    prev = reference
    for t, contour in enumerate(contours):
        try:
            q = preshape(contour, n_points)
        except DegenerateContourError as exc:
            raise DegenerateContourError(
                f"frame {t}: {exc}", module="shape_dynamics",
                operation="build_sequence", item_id=seq_id) from exc
        if prev is not None:
            _, q = ss.align_reparam(prev, q, **align_kw)
        frames.append(q)
        prev = q
    return ShapeSequence(id=seq_id, frames=np.array(frames),
                         raw_contours=[np.asarray(c, dtype=float) for c in contours],
                         label=label)


def _transport_batch(vs: np.ndarray, q_from: np.ndarray, q_to: np.ndarray) -> np.ndarray:
    n = q_from.shape[0]
    c = np.sum(q_from * q_to) / n
    if c < np.cos(np.pi - ss.ANTIPODAL_MARGIN):
        raise AntipodalError("cannot transport between antipodal frames",
                             module="shape_dynamics", operation="transport")
    coef = np.einsum("kij,ij->k", vs, q_to) / n / (1.0 + c)
    return vs - coef[:, None, None] * (q_from + q_to)[None]


def compute_tsrvf(seq: ShapeSequence) -> TsrvfSequence:
    """TSRVF of a sequence whose frames are already mutually aligned.

    ``F(tau)`` is the shooting vector from frame ``tau-1`` to frame ``tau``,
    transported to frame 0 by chaining single-step transports back along
    the sequence.
    """
    frames = np.asarray(seq.frames, dtype=float)
    if len(frames) < 2:
        raise InsufficientDataError("need at least two frames",
                                    module="shape_dynamics", operation="compute_tsrvf",
                                    item_id=seq.id)
    shoots = []
    for t in range(1, len(frames)):
        try:
            shoots.append(ss.log_map(frames[t - 1], frames[t], align=False))
        except AntipodalError as exc:
            raise AntipodalError(f"frames {t - 1} and {t} are antipodal",
                                 module="shape_dynamics", operation="compute_tsrvf",
                                 item_id=seq.id) from exc
    fields = np.array(shoots)
    # fields[t-1] sits at frame t-1; walk every field still above frame k down to k
    for k in range(len(frames) - 2, 0, -1):
        fields[k:] = _transport_batch(fields[k:], frames[k], frames[k - 1])
    return TsrvfSequence(base=frames[0].copy(), fields=fields, source_id=seq.id)


def integrate_tsrvf(tsrvf: TsrvfSequence) -> TsrvfSequence:
    """I-TSRVF: running sums of the transported fields."""
    return TsrvfSequence(base=tsrvf.base, fields=np.cumsum(tsrvf.fields, axis=0),
                         source_id=tsrvf.source_id)


def reconstruct_sequence(base, tsrvf: TsrvfSequence, seq_id: str = "") -> ShapeSequence:
    """Covariant integration: rebuild frames from ``base`` and transported fields."""
    base = np.asarray(base, dtype=float)
    pending = np.array(tsrvf.fields, dtype=float)
    frames = [base]
    current = base
    for t in range(len(pending)):
        nxt = ss.exp_map(current, pending[t])
        if t + 1 < len(pending):
            try:
                pending[t + 1:] = _transport_batch(pending[t + 1:], current, nxt)
            except AntipodalError as exc:
                raise AntipodalError(f"step {t + 1} is antipodal",
                                     module="shape_dynamics",
                                     operation="reconstruct_sequence",
                                     item_id=seq_id) from exc
        frames.append(nxt)
        current = nxt
    return ShapeSequence(id=seq_id or tsrvf.source_id, frames=np.array(frames))


def to_reference(tsrvf: TsrvfSequence, reference, *, align: bool = True,
                 align_kw=None) -> TsrvfSequence:
    """Express a TSRVF in the tangent space at ``reference``.

    The sequence base is first aligned to ``reference`` (the same group
    element is applied to every field, which is a linear isometry up to
    interpolation), then all fields are transported along the single
    geodesic from the aligned base to ``reference``.
    """
    reference = np.asarray(reference, dtype=float)
    base = tsrvf.base
    fields = np.array(tsrvf.fields, dtype=float)
    if align:
        alignment, _ = ss.align_reparam(reference, base, **(align_kw or {}))
        moved = ss.apply_alignment(base, alignment)
        scale = ss.norm(moved)
        base = moved / scale
        fields = np.array([ss.project_tangent(ss.apply_alignment(f, alignment) / scale, base)
                           for f in fields])
    if len(fields):
        fields = _transport_batch(fields, base, reference)
    return TsrvfSequence(base=reference.copy(), fields=fields, source_id=tsrvf.source_id)


def from_reference(tsrvf: TsrvfSequence, base) -> TsrvfSequence:
    """Inverse transport of :func:`to_reference` (fields back to ``base``)."""
    base = np.asarray(base, dtype=float)
    fields = np.array(tsrvf.fields, dtype=float)
    if len(fields):
        fields = _transport_batch(fields, tsrvf.base, base)
    return TsrvfSequence(base=base.copy(), fields=fields, source_id=tsrvf.source_id)


def _flatten(fields: np.ndarray) -> np.ndarray:
    # scaled so the Euclidean dot product equals the discrete L2 product
    n = fields.shape[1]
    return fields.reshape(len(fields), -1) / np.sqrt(n)


def fit_pca(tsrvfs, d: int = DEFAULT_PCA_DIM, *, rank_tol: float = 1e-10) -> PcaBasis:
    """Pooled PCA of the fields of several TSRVFs sharing one base point.

    Time labels are ignored. Components are orthonormal in L2 and stored as
    tangent fields; eigenvalues are sample variances (divisor ``n - 1``).
    """
    tsrvfs = list(tsrvfs)
    if not tsrvfs:
        raise InsufficientDataError("no TSRVFs to pool", module="shape_dynamics",
                                    operation="fit_pca")
    base = tsrvfs[0].base
    for t in tsrvfs[1:]:
        if t.base.shape != base.shape or not np.allclose(t.base, base, atol=1e-12):
            raise ShapeDynError("TSRVFs must share a common base; use to_reference",
                                module="shape_dynamics", operation="fit_pca",
                                item_id=t.source_id)
    fields = np.concatenate([t.fields for t in tsrvfs if len(t.fields)])
    n_grid = base.shape[0]
    x = _flatten(fields)
    n = len(x)
    if n < 2:
        raise InsufficientDataError("need at least two pooled fields",
                                    module="shape_dynamics", operation="fit_pca")
    mean = x.mean(axis=0)
    xc = x - mean
    if n < xc.shape[1]:
        gram = xc @ xc.T
        vals, vecs = np.linalg.eigh(gram)
        order = np.argsort(vals)[::-1]
        vals, vecs = np.clip(vals[order], 0, None), vecs[:, order]
        keep = vals > rank_tol * max(vals[0], 1e-300)
        comps = (xc.T @ vecs[:, keep]) / np.sqrt(vals[keep])
        vals = vals[keep]
    else:
        cov = xc.T @ xc
        vals, vecs = np.linalg.eigh(cov)
        order = np.argsort(vals)[::-1]
        vals, comps = np.clip(vals[order], 0, None), vecs[:, order]
        keep = vals > rank_tol * max(vals[0], 1e-300)
        vals, comps = vals[keep], comps[:, keep]
    rank = len(vals)
    if d > rank:
        raise ShapeDynError(f"d={d} exceeds pooled rank {rank}",
                            module="shape_dynamics", operation="fit_pca")
    comps = comps[:, :d]
    # deterministic sign: largest-magnitude entry positive
    idx = np.argmax(np.abs(comps), axis=0)
    comps = comps * np.sign(comps[idx, np.arange(d)])
    scale = np.sqrt(n_grid)
    return PcaBasis(
        mean=(mean * scale).reshape(n_grid, 2),
        components=(comps.T * scale).reshape(d, n_grid, 2),
        eigenvalues=vals[:d] / (n - 1),
        base=base.copy(),
    )


def project(tsrvf: TsrvfSequence, basis: PcaBasis) -> EuclideanSeries:
    """Principal coefficients ``<F(tau) - mean, component_i>`` per time step."""
    if tsrvf.fields.shape[1:] != basis.mean.shape:
        raise ShapeDynError(
            f"grid mismatch: fields {tsrvf.fields.shape[1:]} vs basis {basis.mean.shape}",
            module="shape_dynamics", operation="project", item_id=tsrvf.source_id)
    n = basis.grid_size
    centred = tsrvf.fields - basis.mean[None]
    values = np.einsum("tij,kij->tk", centred, basis.components) / n
    return EuclideanSeries(values=values, source_id=tsrvf.source_id)


def lift(series, basis: PcaBasis) -> TsrvfSequence:
    """Fields ``mean + sum_i x_i component_i``, kept tangent at the basis base."""
    values = np.asarray(getattr(series, "values", series), dtype=float)
    if values.ndim != 2 or values.shape[1] != basis.d:
        raise ShapeDynError(f"series needs {basis.d} columns, got {values.shape}",
                            module="shape_dynamics", operation="lift")
    fields = basis.mean[None] + np.einsum("tk,kij->tij", values, basis.components)
    n = basis.grid_size
    normal = np.einsum("tij,ij->t", fields, basis.base) / n
    fields = fields - normal[:, None, None] * basis.base[None]
    return TsrvfSequence(base=basis.base.copy(), fields=fields,
                         source_id=getattr(series, "source_id", ""))


def reconstruction_errors(original: ShapeSequence, rebuilt: ShapeSequence,
                          **align_kw) -> np.ndarray:
    """Frame-wise elastic shape distance between two sequences of equal length."""
    return np.array([ss.shape_distance(a, b, **align_kw)
                     for a, b in zip(original.frames, rebuilt.frames)])
