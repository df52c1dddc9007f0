"""Planar closed contours and their square-root velocity functions (SRVFs).

Contours are ``(N, 2)`` float arrays of ordered boundary points; the closing
edge from the last point back to the first is implicit. SRVFs are ``(N, 2)``
arrays sampled on the parameter grid ``t_k = k / N``.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateContourError

DEFAULT_N_POINTS = 100


def as_contour(points) -> np.ndarray:
    """Coerce to a float ``(N, 2)`` array, dropping a duplicated closing point."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DegenerateContourError(
            f"contour must have shape (N, 2), got {pts.shape}",
            module="curve_geometry", operation="as_contour")
    if len(pts) > 1 and np.array_equal(pts[0], pts[-1]):
        pts = pts[:-1]
    return pts


def edge_lengths(contour: np.ndarray) -> np.ndarray:
    """Lengths of the N edges of the closed polygon (last edge closes it)."""
    return np.linalg.norm(np.roll(contour, -1, axis=0) - contour, axis=1)


def perimeter(contour: np.ndarray) -> float:
    return float(edge_lengths(as_contour(contour)).sum())


def centroid(contour: np.ndarray) -> np.ndarray:
    """Arc-length centroid of the closed polyline.

    Each edge contributes its midpoint weighted by its length, so the result
    does not depend on how densely the boundary is sampled.
    """
    pts = as_contour(contour)
    nxt = np.roll(pts, -1, axis=0)
    lengths = np.linalg.norm(nxt - pts, axis=1)
    total = lengths.sum()
    if total < 1e-12:
        return pts.mean(axis=0)
    return ((pts + nxt) / 2 * lengths[:, None]).sum(axis=0) / total


def area_centroid(contour: np.ndarray) -> np.ndarray:
    """Centre of mass of the region enclosed by the polygon (shoelace formula).

    Falls back to the arc-length centroid when the signed area vanishes.
    """
    pts = as_contour(contour)
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = cross.sum() / 2
    if abs(area) < 1e-12 * max(1.0, perimeter(pts) ** 2):
        return centroid(pts)
    cx = ((x + xn) * cross).sum() / (6 * area)
    cy = ((y + yn) * cross).sum() / (6 * area)
    return np.array([cx, cy])


def resample_uniform(contour, n_points: int = DEFAULT_N_POINTS) -> np.ndarray:
    """Resample a closed polyline at ``n_points`` equally spaced arc-length positions.

    The first output point is the first input point; orientation is kept.
    """
    pts = as_contour(contour)
    if n_points < 3:
        raise ValueError("n_points must be at least 3")
    if len(np.unique(pts, axis=0)) < 3:
        raise DegenerateContourError(
            "contour needs at least 3 distinct points",
            module="curve_geometry", operation="resample_uniform")
    closed = np.vstack([pts, pts[:1]])
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    total = arc[-1]
    if total < 1e-12:
        raise DegenerateContourError(
            f"contour length {total:.3g} is degenerate",
            module="curve_geometry", operation="resample_uniform")
    # zero-length edges would make arc non-increasing for interp
    keep = np.concatenate([[True], seg > 0])
    arc, closed = arc[keep], closed[keep]
    target = np.arange(n_points) * (total / n_points)
    x = np.interp(target, arc, closed[:, 0])
    y = np.interp(target, arc, closed[:, 1])
    return np.column_stack([x, y])


def center_and_scale(contour) -> np.ndarray:
    """Translate the centroid to the origin and rescale to unit perimeter."""
    pts = as_contour(contour)
    length = perimeter(pts)
    if length < 1e-12:
        raise DegenerateContourError(
            "zero-perimeter contour cannot be normalized",
            module="curve_geometry", operation="center_and_scale")
    return (pts - centroid(pts)) / length


def velocity(contour: np.ndarray) -> np.ndarray:
    """Cyclic central-difference derivative on the grid ``t_k = k/N``."""
    n = len(contour)
    return (np.roll(contour, -1, axis=0) - np.roll(contour, 1, axis=0)) * (n / 2.0)


def to_srvf(contour) -> np.ndarray:
    """SRVF ``q = y' / sqrt(|y'|)`` of a uniformly sampled closed contour."""
    pts = as_contour(contour)
    vel = velocity(pts)
    speed = np.linalg.norm(vel, axis=1)
    bad = np.flatnonzero(speed < 1e-10)
    if bad.size:
        raise DegenerateContourError(
            f"coincident samples around index {int(bad[0])}",
            module="curve_geometry", operation="to_srvf")
    return vel / np.sqrt(speed)[:, None]


def from_srvf(srvf, basepoint=(0.0, 0.0)) -> tuple[np.ndarray, float]:
    """Integrate ``q |q|`` back to a curve starting at ``basepoint``.

    Returns the ``(N, 2)`` points and the closure gap ``|y(1) - y(0)|``;
    the gap is not removed.
    """
    q = np.asarray(srvf, dtype=float)
    n = len(q)
    vel = q * np.linalg.norm(q, axis=1)[:, None]
    # trapezoid over the closed grid, vel(1) == vel(0)
    steps = (vel + np.roll(vel, -1, axis=0)) / (2.0 * n)
    walk = np.concatenate([np.zeros((1, 2)), np.cumsum(steps, axis=0)])
    pts = np.asarray(basepoint, dtype=float) + walk
    gap = float(np.linalg.norm(walk[-1]))
    return pts[:-1], gap


def l2_norm(q: np.ndarray) -> float:
    """Discrete L2 norm ``(sum_k |q_k|^2 / N)^(1/2)``."""
    return float(np.sqrt(np.sum(q * q) / len(q)))


def hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two point sets."""
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def reflect(contour: np.ndarray, axis: int = 0) -> np.ndarray:
    """Mirror across a coordinate axis (negates the given coordinate)."""
    out = np.array(contour, dtype=float)
    out[:, axis] = -out[:, axis]
    return out
