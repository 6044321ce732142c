import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import leafstem.svm as svm_mod
from leafstem.cloud import LEAF, STEM
from leafstem.svm import SvmFormatError, SvmParams, load_model, predict, rbf_kernel, save_model, train

from svm_checks import assert_optimal


def test_rbf_kernel_values():
    assert rbf_kernel([1, 2, 3], [1, 2, 3], 5.0) == 1.0
    assert rbf_kernel([0, 0, 0], [9, 9, 9], 0.0) == 1.0
    assert rbf_kernel([0, 0, 0], [1, 0, 0], 1.0) == pytest.approx(math.exp(-1), abs=1e-15)
    assert round(rbf_kernel([0, 0, 0], [1, 0, 0], 1.0), 7) == 0.3678794
    with pytest.raises(ValueError):
        rbf_kernel([0, 0, 0], [1, 0, 0], -1.0)


def blobs(rng, sep=10.0, n=100):
    a = rng.normal(size=(n, 3))
    b = rng.normal(size=(n, 3)) + [sep, 0, 0]
    return a, b


def test_separated_blobs(rng):
    a, b = blobs(rng)
    model = train(a, b)
    assert (predict(model, a) == LEAF).all()
    assert (predict(model, b) == STEM).all()
    assert_optimal(model)


def test_identical_point_in_both_classes():
    p = np.array([[1.0, 2.0, 3.0]])
    model = train(p, p, SvmParams(C=1.0))
    labels = predict(model, np.vstack([p, p]))
    correct = int(labels[0] == LEAF) + int(labels[1] == STEM)
    assert correct <= 1
    assert_optimal(model)


@pytest.mark.parametrize("scaling", [True, False])
def test_xor_pattern(scaling):
    leaf = np.array([[0, 0, 0], [1, 1, 0.2]], dtype=float)
    stem = np.array([[1, 0, 0.1], [0, 1, 0.3]], dtype=float)
    model = train(leaf, stem, SvmParams(C=100, gamma=1.0, scaling=scaling))
    assert (predict(model, leaf) == LEAF).all()
    assert (predict(model, stem) == STEM).all()
    assert_optimal(model)


def test_support_vectors_keep_their_class(rng):
    a, b = blobs(rng, sep=6.0)
    model = train(a, b)
    raw = model.support_vectors * model.scale + model.mean
    expected = np.where(model.dual_coefs > 0, LEAF, STEM)
    assert (predict(model, raw) == expected).all()


def test_far_point_takes_sign_of_bias(rng):
    a, b = blobs(rng, sep=4.0)
    model = train(a, b)
    far = np.array([[1e6, -1e6, 1e6]])
    assert model.decision_function(far)[0] == pytest.approx(model.bias)
    assert predict(model, far)[0] == (LEAF if model.bias >= 0 else STEM)


def test_duplicate_queries_identical(rng):
    a, b = blobs(rng, sep=3.0)
    model = train(a, b)
    q = rng.normal(size=(50, 3)) * 3
    lab = predict(model, np.vstack([q, q]))
    assert (lab[:50] == lab[50:]).all()


def test_tie_goes_to_leaf():
    model = svm_mod.SvmModel(np.zeros((1, 3)), np.array([1.0]), -1.0, 1.0, np.zeros(3), np.ones(3))
    assert predict(model, [[0, 0, 0]])[0] == LEAF


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("scaling", [True, False])
def test_translation_invariance(seed, scaling):
    rng = np.random.default_rng(seed)
    a, b = blobs(rng, sep=2.0, n=60)
    q = rng.normal(size=(300, 3)) * 2 + [1, 0, 0]
    t = rng.normal(size=3) * 100
    p = SvmParams(C=10, gamma=0.5, scaling=scaling)
    m0 = train(a, b, p)
    m1 = train(a + t, b + t, p)
    f0 = m0.decision_function(q)
    assert (predict(m0, q) == predict(m1, q + t))[np.abs(f0) > 1e-6].all()
    assert_optimal(m0)
    assert_optimal(m1)


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1), st.integers(1, 30), st.integers(1, 30), st.floats(4.5, 50))
def test_separable_sets_fully_recovered(seed, na, nb, dist):
    rng = np.random.default_rng(seed)

    def in_ball(n):
        v = rng.normal(size=(n, 3))
        return v / np.linalg.norm(v, axis=1)[:, None] * rng.random((n, 1))

    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    a = in_ball(na)
    b = in_ball(nb) + dist * direction
    model = train(a, b, SvmParams(C=1000, gamma="auto"))
    assert (predict(model, a) == LEAF).all() and (predict(model, b) == STEM).all()
    assert_optimal(model)


def test_gamma_auto_resolution(rng):
    a, b = blobs(rng)
    assert train(a, b).gamma == pytest.approx(1 / 3)
    raw = train(a, b, SvmParams(scaling=False))
    X = np.vstack([a, b])
    assert raw.gamma == pytest.approx(1 / (3 * X.var(axis=0).mean()))


def test_linear_kernel_baseline(rng):
    a, b = blobs(rng, sep=8.0)
    model = train(a, b, SvmParams(kernel="linear", C=1.0))
    assert (predict(model, a) == LEAF).all() and (predict(model, b) == STEM).all()
    assert_optimal(model)


def test_row_cache_path_matches_full_gram(rng, monkeypatch):
    a, b = blobs(rng, sep=1.5, n=150)
    full = train(a, b, SvmParams(C=5, gamma=0.5))
    monkeypatch.setattr(svm_mod, "GRAM_LIMIT", 8)
    cached = train(a, b, SvmParams(C=5, gamma=0.5))
    # kernel rows round differently from the full Gram, so compare optima, not paths
    assert cached.diagnostics.objective[-1] == pytest.approx(full.diagnostics.objective[-1], rel=1e-5)
    assert_optimal(cached)


def test_overlapping_classes_hit_box_constraints(rng):
    a, b = blobs(rng, sep=0.5, n=120)
    model = train(a, b, SvmParams(C=0.5, gamma=2.0))
    assert (model.diagnostics.alpha == 0.5).any()
    assert_optimal(model)


def test_non_convergence_is_reported(rng):
    a, b = blobs(rng, sep=0.5, n=200)
    model = train(a, b, SvmParams(C=100, gamma=5.0, max_passes=1, tol=1e-9))
    assert not model.diagnostics.converged
    assert model.diagnostics.iterations == 1000


def test_empty_class():
    with pytest.raises(ValueError):
        train(np.zeros((0, 3)), np.ones((2, 3)))


@pytest.mark.parametrize("kw", [dict(C=0), dict(tol=0), dict(gamma=-1.0), dict(max_passes=0), dict(kernel="poly")])
def test_bad_params(kw):
    with pytest.raises(ValueError):
        SvmParams(**kw)


def test_model_roundtrip(tmp_path, rng):
    a, b = blobs(rng, sep=2.0)
    model = train(a, b)
    p = tmp_path / "m.svm"
    save_model(p, model)
    back = load_model(p)
    q = rng.normal(size=(100, 3)) * 3
    assert np.array_equal(model.decision_function(q), back.decision_function(q))
    assert p.read_text().startswith("leafstem-svm 1\n")


def test_model_bad_header(tmp_path):
    p = tmp_path / "m.svm"
    p.write_text("something else\n")
    with pytest.raises(SvmFormatError):
        load_model(p)
    p.write_text("leafstem-svm 1\nkernel rbf\n")
    with pytest.raises(SvmFormatError):
        load_model(p)
