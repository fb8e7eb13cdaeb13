"""Fidelity maps D and the fidelity error."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from confmask.fidelity import (
    FidelityMetricSpec,
    compute_fidelity,
    d_neighborhood,
    d_pointwise,
    d_semantic,
    fidelity_error,
    load_annotation,
)
from confmask.kernels import convolve2d, make_box, make_gaussian

lab_images = arrays(np.float64, (5, 6, 3), elements=st.floats(0, 1))
NEUTRAL = 128 / 255


def test_pointwise_basic():
    y = np.random.default_rng(0).uniform(size=(4, 4, 3))
    assert not d_pointwise(y, y).any()
    white = np.tile([1.0, NEUTRAL, NEUTRAL], (3, 3, 1))
    black = np.tile([0.0, NEUTRAL, NEUTRAL], (3, 3, 1))
    np.testing.assert_array_equal(d_pointwise(white, black), np.ones((3, 3)))


def test_pointwise_naive_oracle():
    g = np.random.default_rng(1)
    y, yh = g.uniform(size=(2, 4, 5, 3))
    expected = np.zeros((4, 5))
    for i, j in itertools.product(range(4), range(5)):
        expected[i, j] = sum(abs(y[i, j, c] - yh[i, j, c]) for c in range(3))
    np.testing.assert_allclose(d_pointwise(y, yh), expected, atol=1e-15)


def test_neighborhood_cases():
    g = np.random.default_rng(2)
    y, yh = g.uniform(size=(2, 6, 6, 3))
    np.testing.assert_allclose(d_neighborhood(y, yh, make_box(0)), d_pointwise(y, yh), atol=1e-7)

    a = np.full((7, 7, 3), 0.5)
    b = a.copy()
    b[3, 3, 0] += 0.5
    d = d_neighborhood(a, b, make_box(1))
    expected = np.zeros((7, 7))
    expected[2:5, 2:5] = 0.5 / 9
    np.testing.assert_allclose(d, expected, atol=1e-15)

    k = make_gaussian(1.0)
    oracle = np.abs(convolve2d(y, k) - convolve2d(yh, k)).sum(axis=2)
    np.testing.assert_allclose(d_neighborhood(y, yh, k), oracle, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(lab_images, lab_images)
def test_range_symmetry_and_contraction(y, yh):
    k = make_gaussian(1.0)
    dp = d_pointwise(y, yh)
    dn = d_neighborhood(y, yh, k)
    for d in (dp, dn):
        assert d.min() >= 0 and d.max() <= 3
    np.testing.assert_array_equal(dp, d_pointwise(yh, y))
    np.testing.assert_allclose(dn, d_neighborhood(yh, y, k), atol=1e-15)
    assert dn.max() <= dp.max() + 1e-7


def test_dimension_and_range_errors():
    with pytest.raises(ValueError):
        d_pointwise(np.zeros((3, 3, 3)), np.zeros((3, 4, 3)))
    with pytest.raises(ValueError):
        d_pointwise(np.zeros((3, 3, 1)), np.zeros((3, 3, 1)))
    with pytest.raises(ValueError):
        fidelity_error(np.zeros((3, 3)), np.ones((2, 3), bool))


def test_semantic():
    assert not d_semantic(np.zeros((4, 4))).any()
    assert np.all(d_semantic(np.ones((4, 4))) == 1.0)
    ann = np.zeros((4, 4, 3))
    ann[2, 1, 2] = 1.0
    out = d_semantic(ann)
    assert out[2, 1] == 1.0 and out.sum() == 1.0
    with pytest.raises(ValueError):
        d_semantic(np.full((4, 4), 0.5))
    with pytest.raises(ValueError):
        d_semantic(np.zeros((4, 4)), shape=(4, 5))


def test_load_annotation_nonzero_is_different(tmp_path):
    arr = np.zeros((3, 3), np.uint8)
    arr[0, 0] = 7
    arr[2, 2] = 255
    path = tmp_path / "ann.png"
    Image.fromarray(arr, mode="L").save(path)
    ann = load_annotation(path)
    assert d_semantic(ann).tolist() == [[1, 0, 0], [0, 0, 0], [0, 0, 1]]


def test_fidelity_error_examples():
    d = np.arange(16, dtype=float).reshape(4, 4) / 8
    assert fidelity_error(d, np.zeros((4, 4), bool)) == 0.0
    assert fidelity_error(d, np.ones((4, 4), bool)) == d.max()
    checker = (np.add.outer(np.arange(4), np.arange(4)) % 2) == 0
    best = max(d[i, j] for i in range(4) for j in range(4) if checker[i, j])
    assert fidelity_error(d, checker) == best


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (4, 4), elements=st.floats(0, 3)), arrays(bool, (4, 4)), arrays(bool, (4, 4)))
def test_fidelity_error_monotone_in_mask(d, m1, extra):
    assert fidelity_error(d, m1) <= fidelity_error(d, m1 | extra)


def test_metric_spec():
    with pytest.raises(ValueError):
        FidelityMetricSpec("neighborhood")
    with pytest.raises(ValueError):
        FidelityMetricSpec("pointwise", make_box(1))
    with pytest.raises(ValueError):
        FidelityMetricSpec("lpips")
    spec = FidelityMetricSpec("neighborhood", make_gaussian(1.0))
    assert FidelityMetricSpec.from_dict(spec.to_dict()) == spec


def test_compute_fidelity_dispatch():
    g = np.random.default_rng(3)
    y, yh = g.uniform(size=(2, 5, 5, 3))
    np.testing.assert_array_equal(compute_fidelity(FidelityMetricSpec(), y, yh), d_pointwise(y, yh))
    ann = np.eye(5)
    np.testing.assert_array_equal(compute_fidelity(FidelityMetricSpec("semantic"), yhat_lab=yh, annotation=ann), ann)
    with pytest.raises(ValueError):
        compute_fidelity(FidelityMetricSpec("semantic"), y, yh)
    with pytest.raises(ValueError):
        compute_fidelity(FidelityMetricSpec(), y)
