import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shapedyn import motility_features as mf
from shapedyn import var_model as vm
from shapedyn.errors import DegenerateContourError, InsufficientDataError, ShapeDynError

from conftest import blob, circle, rot


# -- normalization ---------------------------------------------------------

def test_normalize_examples(rng):
    block = rng.normal(size=(3, 4))
    out, zero = mf.normalize_block(block)
    assert np.linalg.norm(out) == pytest.approx(1, abs=1e-12) and not zero
    again, _ = mf.normalize_block(out)
    assert np.allclose(again, out, atol=1e-12)
    scaled, _ = mf.normalize_block(7 * block)
    assert np.allclose(scaled, out, atol=1e-15)


def test_zero_block_flagged_not_raised():
    with pytest.warns(mf.ZeroBlockWarning):
        out, flagged = mf.normalize_feature_blocks({"a": np.ones(3), "b": np.zeros(2)}, "x")
    assert flagged == ["b"]
    assert np.array_equal(out["b"], np.zeros(2))


# -- kinematics ------------------------------------------------------------

def test_pure_translation():
    frames = [circle(80, center=(0.3 * t, -0.1 * t)) for t in range(10)]
    k = mf.kinematics_features(frames)
    assert np.allclose(k.upsilon, [0.3, -0.1], atol=1e-12)
    assert np.allclose(k.eta, 0, atol=1e-12)
    assert np.allclose(k.xi, 0, atol=1e-8)


def test_rigid_rotation_angles():
    base = blob(120, seed=3, amp=0.4)
    step = np.deg2rad(2.0)
    frames = [base @ rot(step * t).T for t in range(12)]
    k = mf.kinematics_features(frames)
    assert np.allclose(k.xi, step * np.arange(1, 6), atol=np.deg2rad(0.1))


def test_static_sequence_is_all_zero():
    k = mf.kinematics_features([blob(seed=1)] * 8)
    assert np.allclose(k.omega(), 0, atol=1e-8)
    assert k.omega().shape == (3 * 7 + 5,)
    with pytest.warns(mf.ZeroBlockWarning):
        prepared = mf.prepare_kinematics(mf.KinematicsFeature(np.zeros((7, 2)), np.zeros(7),
                                                              np.zeros(5)))
    assert set(prepared.zero_blocks) == {"xi", "upsilon", "eta"}


def test_global_rotation_leaves_xi_unchanged():
    frames = [blob(100, seed=2, amp=0.3) @ rot(0.05 * t).T * (1 + 0.01 * t) for t in range(9)]
    turned = [f @ rot(1.1).T + [3, 4] for f in frames]
    a, b = mf.kinematics_features(frames), mf.kinematics_features(turned)
    assert np.allclose(a.xi, b.xi, atol=1e-6)
    assert np.allclose(a.eta, b.eta, atol=1e-12)


def test_kinematics_errors():
    with pytest.raises(InsufficientDataError):
        mf.kinematics_features([circle()] * 5)
    frames = [circle()] * 7 + [np.zeros((10, 2))]
    with pytest.raises(DegenerateContourError, match="frame 7"):
        mf.kinematics_features(frames)


def _prepared(rng, steps):
    return mf.prepare_kinematics(mf.KinematicsFeature(rng.normal(size=(steps, 2)),
                                                      rng.normal(size=steps),
                                                      rng.normal(size=5)))


def test_kinematics_distance_matches_concatenation(rng):
    a = _prepared(rng, 9)
    b = mf.prepare_kinematics(mf.KinematicsFeature(rng.normal(size=(6, 2)), rng.normal(size=6),
                                                   rng.normal(size=5)), 9)
    direct = np.linalg.norm(a.vector() - b.vector())
    assert mf.kinematics_distance(a, b) == pytest.approx(direct, abs=1e-12)
    assert mf.kinematics_distance(a, a) == 0
    assert mf.kinematics_distance(a, b) == mf.kinematics_distance(b, a)


def test_padding_length_does_not_matter(rng):
    feat = mf.KinematicsFeature(rng.normal(size=(6, 2)), rng.normal(size=6), rng.normal(size=5))
    other = _prepared(rng, 9)
    short, padded = mf.prepare_kinematics(feat), mf.prepare_kinematics(feat, 9)
    assert mf.kinematics_distance(short, other) == pytest.approx(
        mf.kinematics_distance(padded, other), abs=1e-14)
    with pytest.raises(ShapeDynError):
        mf.prepare_kinematics(feat, 3)


def test_orthogonal_unit_blocks_give_sqrt6():
    e5, ups, e4 = np.eye(5), np.zeros((2, 4, 2)), np.eye(4)
    ups[0, 0, 0] = ups[1, 0, 1] = 1.0
    a = mf.PreparedKinematics(e5[0], ups[0], e4[0])
    b = mf.PreparedKinematics(e5[1], ups[1], e4[1])
    assert mf.kinematics_distance(a, b) == pytest.approx(np.sqrt(6), abs=1e-12)


# -- shape features --------------------------------------------------------

def _feature(rng, p=1, d=3):
    A = 0.2 * rng.normal(size=(p, d, d))
    m = vm.VarModel(p, rng.normal(size=d), A, np.diag(rng.uniform(0.5, 1.5, d)))
    return mf.shape_feature(m)


def test_shape_feature_blocks_unit(rng):
    f = _feature(rng, 2)
    for block in (f.beta, f.abar, f.sigma):
        assert np.linalg.norm(block) == pytest.approx(1, abs=1e-10)
    assert f.beta.shape == (2 * 3 + 1, 3)


def test_shape_distance_examples(rng):
    f = _feature(rng)
    assert mf.shape_param_distance(f, f) == 0
    g = mf.ShapeFeature(1, np.zeros_like(f.beta), f.abar, f.sigma)
    g.beta[0, 0] = 1.0
    f.beta = np.zeros_like(f.beta)
    f.beta[1, 1] = 1.0
    assert mf.shape_param_distance(f, g) == pytest.approx(np.sqrt(2), abs=1e-12)


def test_unequal_lag_formula_by_hand(rng):
    a, b = _feature(rng, 1), _feature(rng, 2)
    expect = np.sqrt(np.sum((a.abar - b.abar) ** 2) + np.sum((a.sigma - b.sigma) ** 2))
    assert mf.shape_param_distance(a, b) == pytest.approx(expect, abs=1e-12)
    c = _feature(rng, 1)
    forced = mf.shape_param_distance(a, c, use_mean=True)
    expect = np.sqrt(np.sum((a.abar - c.abar) ** 2) + np.sum((a.sigma - c.sigma) ** 2))
    assert forced == pytest.approx(expect, abs=1e-12) and forced >= 0


def test_shape_distance_dimension_mismatch(rng):
    with pytest.raises(ShapeDynError):
        mf.shape_param_distance(_feature(rng, d=2), _feature(rng, d=3))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_distances_symmetric(seed):
    rng = np.random.default_rng(seed)
    feats = [_feature(rng, p) for p in (1, 1, 2)]
    D = mf.distance_matrix(feats, feats)
    assert np.allclose(D, D.T, atol=1e-10)
    assert np.allclose(np.diag(D), 0, atol=1e-10)


def test_all_lag_pythagorean(rng):
    xs = [vm.synthesize(vm.VarModel(1, np.zeros(2), np.array([0.5 * np.eye(2)]), np.eye(2)),
                        np.zeros((1, 2)), 80, seed=s) for s in (0, 1)]
    fa, fb = mf.all_lag_shape_feature(xs[0]), mf.all_lag_shape_feature(xs[1])
    assert [f.p for f in fa] == [1, 2, 3, 4, 5]
    per_lag = [mf.shape_param_distance(a, b) for a, b in zip(fa, fb)]
    assert mf.all_lag_distance(fa, fb) ** 2 == pytest.approx(sum(d * d for d in per_lag), rel=1e-12)
    assert mf.all_lag_distance(fa, fa) == 0
    with pytest.raises(ShapeDynError):
        mf.all_lag_distance(fa, fb[:3])


def test_fit_shape_feature_best_lag(rng):
    x = vm.synthesize(vm.VarModel(1, np.zeros(2), np.array([0.6 * np.eye(2)]), np.eye(2)),
                      np.zeros((1, 2)), 400, seed=3)
    assert mf.fit_shape_feature(x, None, p_max=4).p == 1
    assert mf.fit_shape_feature(x, 3).p == 3


# -- distance vectors ------------------------------------------------------

def test_distance_feature_vectors(rng):
    feats = [_feature(rng) for _ in range(4)]
    kin = [_prepared(rng, 8) for _ in range(4)]
    vs, vk = mf.distance_matrix(feats, feats), mf.distance_matrix(kin, kin)
    assert np.allclose(np.diag(vs), 0)
    assert np.array_equal(mf.build_distance_features(vs, vk, (1.0, 0.0)), vs)
    combo = mf.build_distance_features(vs, vk, (0.3, 2.0))
    assert np.allclose(combo, 0.3 * vs + 2.0 * vk, atol=1e-12)
    with pytest.raises(ValueError):
        mf.build_distance_features(None, None)


def test_shape_features_rigid_invariance():
    from shapedyn import shape_dynamics as sd

    def features(frames_list):
        seqs = [sd.compute_tsrvf(sd.build_sequence(f, str(i))) for i, f in enumerate(frames_list)]
        ref = seqs[0].base
        moved = [sd.to_reference(s, ref) for s in seqs]
        basis = sd.fit_pca(moved, 3)
        return [mf.fit_shape_feature(sd.project(m, basis), 1) for m in moved]

    def seq(seed):
        rng = np.random.default_rng(seed)
        amps = 0.2 + 0.02 * rng.normal(size=(30, 3)).cumsum(axis=0)
        t = np.arange(100) / 100
        out = []
        for a in amps:
            r = 1 + a[0] * np.cos(4 * np.pi * t) + a[1] * np.sin(6 * np.pi * t) \
                + 0.5 * a[2] * np.cos(8 * np.pi * t)
            out.append(np.column_stack([r * np.cos(2 * np.pi * t), r * np.sin(2 * np.pi * t)]))
        return out

    data = [seq(s) for s in range(3)]
    rng = np.random.default_rng(9)
    moved = [[f @ rot(th).T + shift for f in s]
             for s, th, shift in zip(data, rng.uniform(0, 6, 3), rng.normal(size=(3, 2)) * 4)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", mf.ZeroBlockWarning)
        d0 = mf.distance_matrix(features(data), features(data))
        d1 = mf.distance_matrix(features(moved), features(moved))
    assert np.max(np.abs(d0 - d1)) < 5e-2
