import numpy as np
import pytest

from pairhash.errors import NonFinite, ShapeMismatch, StaleCache
from pairhash.extractor import (
    ExtractorParams,
    ExtractorSpec,
    extractor_backward,
    extractor_forward,
    init_extractor,
)


def _mlp(rng, dims=(3, 4, 2)):
    spec = ExtractorSpec("mlp", dims)
    return spec, init_extractor(spec, rng)


def test_identity_passes_input_through():
    X = np.random.default_rng(0).normal(size=(4, 3))
    spec = ExtractorSpec.identity(3)
    phi, cache = extractor_forward(spec, ExtractorParams(), X)
    np.testing.assert_array_equal(phi, X)
    grads = extractor_backward(spec, cache.params, cache, np.ones((4, 3)))
    assert grads.arrays() == []


def test_zero_linear_gives_zero_output():
    spec = ExtractorSpec("linear", (3, 5))
    params = ExtractorParams((np.zeros((3, 5)),), (np.zeros(5),))
    phi, _ = extractor_forward(spec, params, np.ones((2, 3)))
    np.testing.assert_array_equal(phi, 0.0)


def test_hand_evaluated_mlp():
    spec = ExtractorSpec("mlp", (2, 2, 1))
    params = ExtractorParams((np.eye(2), np.array([[1.0], [-1.0]])), (np.zeros(2), np.zeros(1)))
    phi, cache = extractor_forward(spec, params, [[3.0, -4.0]])
    assert phi.tolist() == [[3.0]]
    np.testing.assert_array_equal(np.maximum(cache.pre[0], 0), [[3.0, 0.0]])


def test_relu_derivative_at_zero_is_zero():
    spec = ExtractorSpec("mlp", (1, 1, 1))
    params = ExtractorParams((np.array([[1.0]]), np.array([[2.0]])), (np.array([-1.0]), np.zeros(1)))
    phi, cache = extractor_forward(spec, params, [[1.0]])  # hidden pre-activation is exactly 0
    assert cache.pre[0][0, 0] == 0.0 and phi[0, 0] == 0.0
    g = extractor_backward(spec, params, cache, [[1.0]])
    assert g.weights[0][0, 0] == 0.0 and g.biases[0][0] == 0.0
    assert g.weights[1][0, 0] == 0.0 and g.biases[1][0] == 1.0


def test_forward_is_deterministic():
    rng = np.random.default_rng(1)
    spec, params = _mlp(rng)
    X = rng.normal(size=(7, 3))
    a, _ = extractor_forward(spec, params, X)
    b, _ = extractor_forward(spec, params, X)
    assert a.tobytes() == b.tobytes()


def test_backward_zero_and_linearity():
    rng = np.random.default_rng(2)
    spec, params = _mlp(rng)
    _, cache = extractor_forward(spec, params, rng.normal(size=(5, 3)))
    zero = extractor_backward(spec, params, cache, np.zeros((5, 2)))
    assert all(np.all(a == 0) for a in zero.arrays())
    G = rng.normal(size=(5, 2))
    base = extractor_backward(spec, params, cache, G).arrays()
    scaled = extractor_backward(spec, params, cache, -2.5 * G).arrays()
    for x, y in zip(base, scaled):
        np.testing.assert_allclose(y, -2.5 * x, rtol=1e-13, atol=1e-14)


def test_stale_cache_rejected():
    rng = np.random.default_rng(3)
    spec, params = _mlp(rng)
    _, cache = extractor_forward(spec, params, rng.normal(size=(2, 3)))
    other = params.scaled(1.0)
    with pytest.raises(StaleCache):
        extractor_backward(spec, other, cache, np.zeros((2, 2)))


def test_forward_errors():
    rng = np.random.default_rng(4)
    spec, params = _mlp(rng)
    with pytest.raises(ShapeMismatch):
        extractor_forward(spec, params, np.zeros((2, 4)))
    X = np.zeros((2, 3))
    X[1, 2] = np.inf
    with pytest.raises(NonFinite):
        extractor_forward(spec, params, X)
    _, cache = extractor_forward(spec, params, np.zeros((2, 3)))
    with pytest.raises(ShapeMismatch):
        extractor_backward(spec, params, cache, np.zeros((3, 2)))


def test_spec_validation_and_roundtrip():
    with pytest.raises(ValueError):
        ExtractorSpec("identity", (3, 4))
    with pytest.raises(ValueError):
        ExtractorSpec("linear", (3, 4, 5))
    with pytest.raises(ValueError):
        ExtractorSpec("mlp", (3,))
    with pytest.raises(ValueError):
        ExtractorSpec("conv", (3, 4))
    spec = ExtractorSpec("mlp", (2, 16, 8))
    assert ExtractorSpec.from_dict(spec.to_dict()) == spec
    assert ExtractorSpec.identity(5).num_layers == 0


def test_init_shapes_and_seeding():
    spec = ExtractorSpec("mlp", (4, 6, 3))
    a = init_extractor(spec, np.random.default_rng(9))
    b = init_extractor(spec, np.random.default_rng(9))
    a.check(spec)
    assert [x.shape for x in a.arrays()] == [(4, 6), (6,), (6, 3), (3,)]
    assert all(np.array_equal(x, y) for x, y in zip(a.arrays(), b.arrays()))
    assert not a.weights[0].flags.writeable
