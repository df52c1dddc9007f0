import numpy as np
import pytest


def blob(n=100, seed=0, bumps=3, amp=0.2, center=(0.0, 0.0), phase=0.0):
    """Smooth star-shaped closed curve sampled at ``n`` angle-uniform points."""
    rng = np.random.default_rng(seed)
    t = np.arange(n) / n
    r = np.ones(n)
    for k in range(2, 2 + bumps):
        r += amp / k * rng.normal() * np.cos(2 * np.pi * k * t + rng.uniform(0, 2 * np.pi))
    ang = 2 * np.pi * t + phase
    return np.column_stack([r * np.cos(ang), r * np.sin(ang)]) + np.asarray(center)


def ellipse(n=100, a=2.0, b=1.0):
    t = 2 * np.pi * np.arange(n) / n
    return np.column_stack([a * np.cos(t), b * np.sin(t)])


def circle(n=100, radius=1.0, center=(0.0, 0.0)):
    t = 2 * np.pi * np.arange(n) / n
    return np.column_stack([radius * np.cos(t), radius * np.sin(t)]) + np.asarray(center)


def rot(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def deforming_sequence(T=30, n=200, seed=0, speed=0.1):
    """Smoothly deforming blob sequence, as raw contours."""
    t = np.arange(n) / n
    out = []
    for k in range(T):
        r = 1 + 0.2 * np.sin(2 * np.pi * 3 * t + speed * k) \
            + 0.1 * np.cos(2 * np.pi * 2 * t) * np.sin(0.2 * k + seed)
        out.append(np.column_stack([r * np.cos(2 * np.pi * t) * (1 + 0.02 * k),
                                    r * np.sin(2 * np.pi * t)]))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def persistent_var2():
    """d=3 VAR(2) with three damped oscillatory modes of modulus 0.98.

    The modes are mixed by a fixed matrix. Started from an O(1) state with
    innovations of scale 1e-3, the long-lived transient excites every
    regressor direction far above the noise.
    """
    from shapedyn.var_model import VarModel

    mix = np.array([[1, 0.3, -0.2], [0.2, 1, 0.4], [-0.1, 0.3, 1.0]])
    inv = np.linalg.inv(mix)
    r, angles = 0.98, np.array([0.8, 1.6, 2.4])
    A1 = mix @ np.diag(2 * r * np.cos(angles)) @ inv
    A2 = mix @ np.diag(np.full(3, -r * r)) @ inv
    return VarModel(2, np.array([1e-3, -2e-3, 5e-4]), np.stack([A1, A2]), 1e-6 * np.eye(3))
