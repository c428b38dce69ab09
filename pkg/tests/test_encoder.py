import numpy as np

from pairhash.core import Dataset, ModelParameters
from pairhash.encoder import encode
from pairhash.extractor import ExtractorParams, ExtractorSpec
from pairhash.synth import make_blobs
from pairhash.trainer import TrainConfig, train


def test_constant_head():
    params = ModelParameters(ExtractorParams(), np.zeros((2, 3)), np.array([1.0, -1.0, 0.0]))
    codes = encode(params, ExtractorSpec.identity(2), np.random.default_rng(0).normal(size=(5, 2)))
    np.testing.assert_array_equal(codes.to_signs(), np.tile([1, -1, -1], (5, 1)))


def test_direct_sign():
    params = ModelParameters(ExtractorParams(), np.eye(2), np.zeros(2))
    assert encode(params, ExtractorSpec.identity(2), [0.5, -2.0]).to_signs().tolist() == [[1, -1]]


def test_training_points_reencode_to_final_codes():
    train_ds, _ = make_blobs(n_train=64, n_query=8, seed=3)
    spec = ExtractorSpec("mlp", (8, 6, 5))
    state = train(train_ds, spec, TrainConfig(code_length=10, iterations=20, learning_rate=1e-4))
    assert encode(state.params, spec, train_ds.features) == state.codes


def test_row_wise_batching_and_sign_values():
    rng = np.random.default_rng(5)
    spec = ExtractorSpec("linear", (4, 3))
    params = ModelParameters(
        ExtractorParams((rng.normal(size=(4, 3)),), (rng.normal(size=3),)), rng.normal(size=(3, 9)), rng.normal(size=9)
    )
    X = rng.normal(size=(12, 4))
    full = encode(params, spec, X)
    for r in range(12):
        assert encode(params, spec, X[r]) == full.take([r])
    assert set(np.unique(full.to_signs())) <= {-1.0, 1.0}
