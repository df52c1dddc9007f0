"""Synthetic contour sequences from VAR dynamics of Fourier coefficients.

Each coordinate function of a closed contour is expanded in the real
orthonormal basis ``{1, sqrt2 sin(2 pi n t), sqrt2 cos(2 pi n t)}``,
``n = 1..m``. A VAR(1) fitted to the coefficient series of a seed sequence
(one model per coordinate) generates new coefficient series, which are
mapped back to contours.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import var_model as vm
from .curve_geometry import DEFAULT_N_POINTS
from .errors import InsufficientDataError, ShapeDynError

DEFAULT_HARMONICS = 10
DEFAULT_LENGTH = 150
UNSTABLE_RADIUS = 1.05
CLAMPED_RADIUS = 0.99


@dataclass
class FourierCoeffSeries:
    c1: np.ndarray  # (T, 2m+1)
    c2: np.ndarray
    m: int
    n_points: int

    def __len__(self):
        return len(self.c1)


@dataclass
class SimulatedSequence:
    id: str
    label: str
    contours: np.ndarray  # (T, N, 2)


def fourier_basis(n_points: int, m: int) -> np.ndarray:
    """``(N, 2m+1)`` matrix of basis functions on the grid ``t_k = k/N``."""
    t = np.arange(n_points) / n_points
    cols = [np.ones(n_points)]
    for n in range(1, m + 1):
        cols.append(np.sqrt(2) * np.sin(2 * np.pi * n * t))
        cols.append(np.sqrt(2) * np.cos(2 * np.pi * n * t))
    return np.column_stack(cols)


def contour_to_fourier(contours, m: int = DEFAULT_HARMONICS) -> FourierCoeffSeries:
    """Coefficients by discrete inner products with the basis (contours share one grid)."""
    arr = np.asarray(contours, dtype=float)
    if arr.ndim == 2:
        arr = arr[None]
    n_points = arr.shape[1]
    if n_points < 2 * (2 * m + 1):
        raise ShapeDynError(f"{n_points} points cannot resolve {m} harmonics "
                            f"(need at least {2 * (2 * m + 1)})",
                            module="simulator", operation="contour_to_fourier")
    basis = fourier_basis(n_points, m)
    coeffs = np.einsum("kb,tkc->tcb", basis, arr) / n_points
    return FourierCoeffSeries(c1=coeffs[:, 0], c2=coeffs[:, 1], m=m, n_points=n_points)


def fourier_to_contour(coeffs: FourierCoeffSeries, n_points: int | None = None) -> np.ndarray:
    """Evaluate the expansion; returns ``(T, N, 2)``."""
    n_points = n_points or coeffs.n_points
    basis = fourier_basis(n_points, coeffs.m)
    return np.stack([coeffs.c1 @ basis.T, coeffs.c2 @ basis.T], axis=-1)


def _stabilize(model: vm.VarModel, target_mean, item_id=""):
    radius = model.spectral_radius()
    if radius < UNSTABLE_RADIUS:
        return model
    warnings.warn(f"{item_id}: coefficient VAR spectral radius {radius:.3f}; "
                  f"shrinking dynamics to radius {CLAMPED_RADIUS}", RuntimeWarning,
                  stacklevel=3)
    A = model.A * (CLAMPED_RADIUS / radius)
    c = (np.eye(model.d) - A.sum(axis=0)) @ target_mean
    return vm.VarModel(model.p, c, A, model.sigma)


def fit_coefficient_models(seed_contours, m: int = DEFAULT_HARMONICS, item_id: str = ""):
    """VAR(1) for each coordinate's coefficient series of a seed sequence."""
    coeffs = contour_to_fourier(seed_contours, m)
    models = []
    for series in (coeffs.c1, coeffs.c2):
        try:
            model = vm.fit_var(series, 1)
        except InsufficientDataError as exc:
            raise InsufficientDataError(f"seed sequence too short: {exc}",
                                        module="simulator", operation="simulate_class",
                                        item_id=item_id) from exc
        models.append(_stabilize(model, series.mean(axis=0), item_id))
    return coeffs, models


def simulate_class(seed_contours, *, m: int = DEFAULT_HARMONICS, T_out: int = DEFAULT_LENGTH,
                   n_sequences: int = 1, seed: int = 0, label: str = "",
                   n_points: int | None = None) -> list[SimulatedSequence]:
    """Resample new contour sequences from VAR(1) fits to a seed sequence.

    Sequence ``i`` draws its ``c1`` and ``c2`` noise from generators seeded
    by ``(seed, i, 0)`` and ``(seed, i, 1)``; every sequence starts from the
    seed's first coefficient row.
    """
    coeffs, (m1, m2) = fit_coefficient_models(seed_contours, m, label)
    n_points = n_points or coeffs.n_points
    out = []
    for i in range(n_sequences):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            c1 = vm.synthesize(m1, coeffs.c1[:1], T_out, seed=[seed, i, 0])
            c2 = vm.synthesize(m2, coeffs.c2[:1], T_out, seed=[seed, i, 1])
        contours = fourier_to_contour(FourierCoeffSeries(c1, c2, m, n_points), n_points)
        out.append(SimulatedSequence(id=f"{label or 'sim'}_{i:04d}", label=label,
                                     contours=contours))
    return out


# -- class seed generator --------------------------------------------------

@dataclass
class ClassSpec:
    """Radial-harmonic dynamics used to draw one class's seed sequence.

    The radius is ``r(t) = 1 + sum_n a_n cos(2 pi n t) + b_n sin(2 pi n t)``.
    ``mean`` gives the mean ``a_n`` per harmonic. Each ``active`` harmonic's
    pair ``(a_n, b_n)`` follows ``mean + rho R(omega) (state - mean) + noise``
    (``R`` a planar rotation), so ``omega != 0`` makes protrusions travel
    around the contour.
    """

    name: str
    mean: dict
    active: tuple
    persistence: float
    noise: float
    rotation: float = 0.0
    drift: float = 0.002


def default_class_specs() -> list[ClassSpec]:
    return [
        ClassSpec("persistent_low", {2: 0.15}, (2, 3), 0.9, 0.025),
        ClassSpec("jitter_low", {2: 0.15}, (2, 3), 0.0, 0.04),
        ClassSpec("wave_mid", {3: 0.1}, (4, 5), 0.97, 0.012, rotation=0.3),
        ClassSpec("jitter_high", {3: 0.1}, (5, 6, 7), 0.0, 0.02),
    ]


def seed_sequence(spec: ClassSpec, T: int = DEFAULT_LENGTH, n_points: int = DEFAULT_N_POINTS,
                  seed: int = 0, background: float = 0.002) -> np.ndarray:
    """Draw a seed contour sequence ``(T, N, 2)`` from a radial AR(1) model.

    Every harmonic amplitude of the radius gets a little background noise
    (so no coefficient is constant) and the centroid performs a small
    random walk.
    """
    rng = np.random.default_rng(seed)
    h = 2 * DEFAULT_HARMONICS
    t = np.arange(n_points) / n_points
    mean = np.zeros(h)
    for n, amp in spec.mean.items():
        mean[2 * (n - 1)] = amp
    scale = np.full(h, background)
    trans = np.zeros((h, h))
    rot = spec.persistence * np.array([[np.cos(spec.rotation), -np.sin(spec.rotation)],
                                       [np.sin(spec.rotation), np.cos(spec.rotation)]])
    for n in spec.active:
        sl = slice(2 * (n - 1), 2 * n)
        scale[sl] = spec.noise
        trans[sl, sl] = rot
    harmonics = np.arange(1, DEFAULT_HARMONICS + 1)
    cos_t = np.cos(2 * np.pi * np.outer(harmonics, t))
    sin_t = np.sin(2 * np.pi * np.outer(harmonics, t))
    ang = 2 * np.pi * t
    state = mean.copy()
    pos = np.zeros(2)
    frames = np.empty((T, n_points, 2))
    for k in range(T):
        state = mean + trans @ (state - mean) + scale * rng.standard_normal(h)
        pos = pos + spec.drift * rng.standard_normal(2)
        r = 1 + state[0::2] @ cos_t + state[1::2] @ sin_t
        frames[k] = pos + np.column_stack([r * np.cos(ang), r * np.sin(ang)])
    return frames


def simulate_dataset(specs=None, *, n_per_class: int = 100, T: int = DEFAULT_LENGTH,
                     n_points: int = DEFAULT_N_POINTS, m: int = DEFAULT_HARMONICS,
                     seed: int = 0) -> list[SimulatedSequence]:
    """Class-conditional dataset: one seed per class, then :func:`simulate_class`."""
    specs = specs or default_class_specs()
    data = []
    for k, spec in enumerate(specs):
        key = class_seed(seed, k)
        seed_frames = seed_sequence(spec, T, n_points, seed=key)
        data.extend(simulate_class(seed_frames, m=m, T_out=T, n_sequences=n_per_class,
                                   seed=key, label=spec.name))
    return data


def class_seed(root: int, k: int) -> int:
    """Integer seed of class ``k`` derived from the root seed."""
    return int(root) * 1000 + int(k)
