"""Geometry of the SRVF pre-shape sphere with rotation and warp alignment.

Pre-shapes are ``(N, 2)`` SRVF arrays of unit discrete L2 norm; tangent
vectors are ``(N, 2)`` arrays orthogonal to their base point. Geodesics,
logarithms and parallel transport are those of the unit sphere, applied
after the second argument has been aligned to the first (rotation, start
point and reparameterization). This is a first-order stand-in for the
quotient shape space, not an exact path-straightening geodesic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _dp
from .errors import AntipodalError

ANTIPODAL_MARGIN = 1e-6
DEFAULT_TOP_SEEDS = 3
DEFAULT_ROUNDS = 2


def inner(a: np.ndarray, b: np.ndarray) -> float:
    """Discrete L2 inner product ``sum_k a_k . b_k / N``."""
    return float(np.sum(a * b) / len(a))


def norm(v: np.ndarray) -> float:
    return float(np.sqrt(inner(v, v)))


def as_preshape(q) -> np.ndarray:
    """Return ``q`` rescaled to unit L2 norm."""
    q = np.asarray(q, dtype=float)
    nrm = norm(q)
    if nrm == 0:
        raise ValueError("zero SRVF has no pre-shape")
    return q / nrm


def project_tangent(v: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Remove the component of ``v`` normal to the sphere at ``q``."""
    return v - inner(v, q) * q


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def rotation_angle(rotation: np.ndarray) -> float:
    """Angle in ``(-pi, pi]`` of a 2x2 rotation matrix."""
    return float(np.arctan2(rotation[1, 0], rotation[0, 0]))


def rotate(q: np.ndarray, rotation: np.ndarray) -> np.ndarray:
    return q @ rotation.T


def optimal_rotation(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """``argmin_R |q1 - R q2|`` over SO(2) (Procrustes with det correction)."""
    cross = q1.T @ q2
    u, _, vt = np.linalg.svd(cross)
    if np.linalg.det(u @ vt) < 0:
        u[:, -1] = -u[:, -1]
    rot = u @ vt
    return rot


def align_rotation(q1: np.ndarray, q2: np.ndarray):
    """Best rotation of ``q2`` onto ``q1``; returns ``(R, R q2)``."""
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    if q1.shape != q2.shape:
        raise ValueError(f"grid sizes differ: {q1.shape} vs {q2.shape}")
    if np.array_equal(q1, q2):
        return np.eye(2), q2.copy()
    rot = optimal_rotation(q1, q2)
    return rot, rotate(q2, rot)


@dataclass
class Alignment:
    """Group element taking ``q2`` onto ``q1``.

    ``warp`` holds ``gamma`` at ``t_k = k/N`` for ``k = 0..N`` (so
    ``warp[0] == 0`` and ``warp[-1] == 1``), measured after the start point
    has been moved to sample ``seed``, which may be fractional. The aligned
    function is ``rotation @ sqrt(gamma') q(gamma)``.
    """

    rotation: np.ndarray
    seed: float
    warp: np.ndarray
    residual: float

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.warp) * (len(self.warp) - 1)

    @classmethod
    def identity(cls, n: int) -> "Alignment":
        return cls(np.eye(2), 0, np.linspace(0.0, 1.0, n + 1), 0.0)


def apply_alignment(v: np.ndarray, alignment: Alignment) -> np.ndarray:
    """Act on an SRVF or tangent field with a stored alignment.

    The action is linear, so tangent fields at ``q`` map to (approximately,
    up to interpolation) tangent fields at the aligned ``q``.
    """
    n = len(v)
    shifted = shift_start(v, alignment.seed)
    positions = alignment.warp * n
    warped = _dp.apply_warp(shifted, positions, alignment.slopes)
    return rotate(warped, alignment.rotation)


def seed_scores(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Best rotational inner product of ``q1`` with every cyclic shift of ``q2``.

    Entry ``s`` is ``max_R <q1, R roll(q2, -s)>``, computed for all shifts
    at once by FFT cross-correlation of the complexified curves.
    """
    z1 = q1[:, 0] + 1j * q1[:, 1]
    z2 = q2[:, 0] + 1j * q2[:, 1]
    corr = np.fft.ifft(np.conj(np.fft.fft(z1)) * np.fft.fft(z2))
    return np.abs(corr)


def _complex(q):
    return q[:, 0] + 1j * q[:, 1]


def shift_start(q: np.ndarray, seed: float) -> np.ndarray:
    """Move the start of a periodic sampled function to position ``seed``.

    Integer seeds are an exact cyclic roll. Fractional seeds use the
    trigonometric interpolant (a phase ramp in the Fourier domain), which
    is unitary, so norms and inner products are preserved.
    """
    n = len(q)
    if float(seed).is_integer():
        return np.roll(q, -int(seed), axis=0)
    freqs = np.fft.fftfreq(n) * n
    z = np.fft.ifft(np.fft.fft(_complex(q)) * np.exp(2j * np.pi * freqs * seed / n))
    return np.column_stack([z.real, z.imag])


def _refine_seed(spectrum, freqs, n, peak, current):
    grid = peak + np.linspace(-1.0, 1.0, 41)
    phases = np.exp(2j * np.pi * np.outer(grid, freqs) / n)
    vals = np.abs(phases @ spectrum) / n
    k = int(np.argmax(vals))
    if vals[k] > current * (1 + 1e-12):
        return float(grid[k] % n)
    return float(peak)


def _candidate_seeds(q1, q2, seed_stride, top_seeds):
    n = len(q1)
    if seed_stride is not None:
        return list(range(0, n, max(1, int(seed_stride))))
    spectrum = np.conj(np.fft.fft(_complex(q1))) * np.fft.fft(_complex(q2))
    scores = np.abs(np.fft.ifft(spectrum))
    freqs = np.fft.fftfreq(n) * n
    peaks = [s for s in range(n)
             if scores[s] >= scores[(s - 1) % n] and scores[s] >= scores[(s + 1) % n]]
    peaks.sort(key=lambda s: (-scores[s], s))
    return [_refine_seed(spectrum, freqs, n, s, scores[s]) for s in peaks[:top_seeds]]


def align_reparam(q1, q2, *, seed_stride: int | None = None,
                  top_seeds: int = DEFAULT_TOP_SEEDS, rounds: int = DEFAULT_ROUNDS):
    """Align ``q2`` to ``q1`` over start point, warp and rotation.

    By default the start point is chosen among the ``top_seeds`` strongest
    local maxima of :func:`seed_scores` (all N cyclic shifts scored at once,
    each peak refined to sub-sample precision). Passing ``seed_stride``
    instead tries every ``seed_stride``-th sample as the start point. For
    each start point, rotation and a dynamic-programming warp are alternated
    ``rounds`` times; the unwarped candidate is always kept as a fallback.

    Returns ``(Alignment, q2_aligned)`` where ``q2_aligned`` has unit norm.
    """
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    if q1.shape != q2.shape:
        raise ValueError(f"grid sizes differ: {q1.shape} vs {q2.shape}")
    n = len(q1)
    ident_pos = np.arange(n + 1, dtype=float)
    ident_slopes = np.ones(n)

    best_score = -np.inf
    best = None
    for seed in _candidate_seeds(q1, q2, seed_stride, top_seeds):
        q2s = shift_start(q2, seed)
        rot = optimal_rotation(q1, q2s)
        candidates = [(ident_pos, ident_slopes, rot)]
        for _ in range(rounds):
            _, pi, pj = _dp.dp_match(q1, rotate(q2s, rot))
            positions, slopes = _dp.path_to_warp(pi, pj, n)
            warped = _dp.apply_warp(q2s, positions, slopes)
            rot = optimal_rotation(q1, warped)
            candidates.append((positions, slopes, rot))
        for positions, slopes, rot in candidates:
            out = rotate(_dp.apply_warp(q2s, positions, slopes), rot)
            nrm = norm(out)
            score = inner(q1, out) / nrm
            if score > best_score:
                best_score = score
                best = (seed, positions, rot, out / nrm)
    seed, positions, rot, aligned = best
    residual = float(np.sum((q1 - aligned) ** 2) / n)
    alignment = Alignment(rotation=rot, seed=seed, warp=positions / n, residual=residual)
    return alignment, aligned


def sphere_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Great-circle distance between unit vectors (stable near zero)."""
    chord = min(norm(a - b), 2.0)
    return float(2.0 * np.arcsin(chord / 2.0))


def shape_distance(q1, q2, **align_kw) -> float:
    """Elastic shape distance: arc length on the sphere after full alignment."""
    _, aligned = align_reparam(q1, q2, **align_kw)
    return sphere_distance(np.asarray(q1, dtype=float), aligned)


def exp_map(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Sphere exponential ``cos|v| q + sin|v| v/|v|``."""
    nv = norm(v)
    if nv < 1e-10:
        return np.array(q, dtype=float)
    out = np.cos(nv) * q + np.sin(nv) * (v / nv)
    return out / norm(out)


def _check_antipodal(theta, operation):
    if theta > np.pi - ANTIPODAL_MARGIN:
        raise AntipodalError(
            f"points are antipodal (angle {theta:.9f})",
            module="shape_space", operation=operation)


def log_map(q1, q2, *, align: bool = True, **align_kw) -> np.ndarray:
    """Shooting vector at ``q1`` of the geodesic to (aligned) ``q2``.

    With ``align=False`` the two pre-shapes are used as given.
    """
    q1 = np.asarray(q1, dtype=float)
    if align:
        _, target = align_reparam(q1, q2, **align_kw)
    else:
        target = np.asarray(q2, dtype=float)
    theta = sphere_distance(q1, target)
    _check_antipodal(theta, "log_map")
    u = target - inner(q1, target) * q1
    nu = norm(u)
    if theta < 1e-14 or nu < 1e-300:
        return np.zeros_like(q1)
    return u * (theta / nu)


def parallel_transport(v: np.ndarray, q_from: np.ndarray, q_to: np.ndarray) -> np.ndarray:
    """Transport ``v`` along the minimal great circle from ``q_from`` to ``q_to``."""
    c = inner(q_from, q_to)
    if c < np.cos(np.pi - ANTIPODAL_MARGIN):
        raise AntipodalError("cannot transport between antipodal points",
                             module="shape_space", operation="parallel_transport")
    return v - (inner(v, q_to) / (1.0 + c)) * (q_from + q_to)


def geodesic_path(q1, q2, k: int, **align_kw) -> list[np.ndarray]:
    """``k`` equally spaced points on the geodesic from ``q1`` to aligned ``q2``."""
    if k < 2:
        raise ValueError("k must be at least 2")
    q1 = np.asarray(q1, dtype=float)
    v = log_map(q1, q2, **align_kw)
    return [exp_map(q1, (i / (k - 1)) * v) for i in range(k)]
