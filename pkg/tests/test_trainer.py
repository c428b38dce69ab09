import numpy as np
import pytest

from pairhash.core import CodeMatrix, Dataset, ModelParameters, pairs_from_labels
from pairhash.errors import NonFiniteLoss, UnlabeledRow
from pairhash.extractor import ExtractorParams, ExtractorSpec, extractor_forward
from pairhash.objective import nll_loss, pair_thetas
from pairhash.synth import make_blobs
from pairhash.trainer import (
    TrainConfig,
    binarize,
    compute_u,
    full_codes,
    init_params,
    smoothed,
    train,
    train_step,
)


def _same_params(a: ModelParameters, b: ModelParameters) -> bool:
    arrays = lambda p: [p.W, p.v, *p.theta.arrays()]
    return all(x.tobytes() == y.tobytes() for x, y in zip(arrays(a), arrays(b), strict=True))


def test_init_params_distribution_and_determinism():
    spec = ExtractorSpec.identity(4096)
    p = init_params(spec, 48, seed=0)
    assert p.W.shape == (4096, 48) and p.v.shape == (48,)
    assert 0.009 <= p.W.var() <= 0.011
    assert abs(p.W.mean()) < 0.005
    assert _same_params(p, init_params(spec, 48, seed=0))
    assert not _same_params(p, init_params(spec, 48, seed=1))


def test_compute_u_examples():
    params = ModelParameters(ExtractorParams(), np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([1.0, -1.0]))
    assert compute_u(params, [[1.0, 1.0]]).u.tolist() == [[5.0, 5.0]]
    zero = ModelParameters(ExtractorParams(), np.zeros((2, 3)), np.array([0.1, 0.2, 0.3]))
    np.testing.assert_array_equal(compute_u(zero, np.ones((4, 2))).u, np.tile([0.1, 0.2, 0.3], (4, 1)))
    phi = np.random.default_rng(0).normal(size=(3, 2))
    np.testing.assert_array_equal(compute_u(ModelParameters(ExtractorParams(), np.eye(2), np.zeros(2)), phi).u, phi)


def test_binarize_convention_and_idempotence():
    assert binarize([[0.3, -0.2]]).to_signs().tolist() == [[1, -1]]
    assert binarize([[0.0]]).to_signs().tolist() == [[-1]]
    assert binarize([[-0.0]]).to_signs().tolist() == [[-1]]
    u = np.random.default_rng(1).normal(size=(5, 70))
    b = binarize(u)
    assert binarize(b.to_signs()) == b


def _toy():
    X = np.array([[1.0, 0.0], [0.9, 0.1], [-1.0, 0.2], [-0.8, -0.1]])
    return Dataset(X, ({0}, {0}, {1}, {1}))


def test_tiny_learning_rate_leaves_params_but_refreshes_codes():
    ds = _toy()
    spec = ExtractorSpec("linear", (2, 3))
    cfg = TrainConfig(code_length=5, learning_rate=1e-300, minibatch_size=4)
    params = init_params(spec, 5, 0)
    stale = CodeMatrix.from_signs(np.ones((4, 5)))
    from pairhash.trainer import TrainState

    out = train_step(TrainState(params, stale), cfg, [0, 1, 2, 3], ds, spec)
    assert _same_params(out.params, params)
    assert out.codes == full_codes(params, spec, ds.features)
    assert out.iteration == 1 and len(out.loss_history) == 1


def test_batch_codes_equal_binarized_forward():
    ds, _ = make_blobs(n_train=40, n_query=4, seed=2)
    spec = ExtractorSpec("mlp", (8, 5, 4))
    cfg = TrainConfig(code_length=6, minibatch_size=8)
    from pairhash.trainer import initial_state

    state = initial_state(ds, spec, cfg)
    batch = [3, 17, 0, 25, 9, 11, 38, 30]
    new = train_step(state, cfg, batch, ds, spec)
    assert new.codes.take(batch) == full_codes(state.params, spec, ds.features[batch])


def test_freeze_backbone_keeps_theta():
    ds, _ = make_blobs(n_train=60, n_query=4, seed=1)
    spec = ExtractorSpec("mlp", (8, 6, 4))
    cfg = TrainConfig(code_length=8, iterations=30, freeze_backbone=True)
    state = train(ds, spec, cfg)
    init = init_params(spec, 8, cfg.seed)
    for a, b in zip(state.params.theta.arrays(), init.theta.arrays()):
        assert a.tobytes() == b.tobytes()
    assert state.params.W.tobytes() != init.W.tobytes()


def _stationary_theta(c, eta):
    """Minimizer of the one-pair objective along u_i = u_j = a * ones(c), by dense grid."""
    a = np.linspace(0.5, 2.0, 150001)
    J = np.logaddexp(0.0, -0.5 * c * a * a) + 2 * eta * c * (a - 1.0) ** 2
    return 0.5 * c * a[J.argmin()] ** 2


@pytest.mark.parametrize("c", [4, 6])
def test_single_pair_converges_to_stationary_point(c):
    X = np.array([[0.5, -0.3, 0.8, 0.1], [0.45, -0.25, 0.75, 0.15]])
    ds = Dataset(X, ({0}, {0}))
    spec = ExtractorSpec.identity(4)
    cfg = TrainConfig(code_length=c, eta=1.0, learning_rate=0.1, minibatch_size=2, iterations=200)
    state = train(ds, spec, cfg)
    u = compute_u(state.params, X).u
    S = pairs_from_labels(ds, "single-label")
    target = _stationary_theta(c, 1.0)
    assert pair_thetas(u, S)[0] == pytest.approx(target, abs=5e-3)
    lik = [rec.likelihood_term for rec in state.loss_history]
    assert lik[-1] < 0.5 * lik[0]
    if c >= 6:
        assert pair_thetas(u, S)[0] > 3 and nll_loss(u, S) < 0.05


def test_zero_iterations_and_determinism():
    ds, _ = make_blobs(n_train=50, n_query=4, seed=4)
    spec = ExtractorSpec("linear", (8, 4))
    s0 = train(ds, spec, TrainConfig(code_length=6, iterations=0, seed=5))
    assert _same_params(s0.params, init_params(spec, 6, 5))
    assert s0.loss_history == ()
    cfg = TrainConfig(code_length=6, iterations=25, seed=5)
    a, b = train(ds, spec, cfg), train(ds, spec, cfg)
    assert _same_params(a.params, b.params)
    assert a.codes == b.codes
    assert [x.total for x in a.loss_history] == [x.total for x in b.loss_history]
    assert a.iteration == len(a.loss_history) == 25


def test_heldout_pair_loss_decreases():
    train_ds, query_ds = make_blobs(seed=0)
    spec = ExtractorSpec.identity(8)
    S = pairs_from_labels(query_ds, "single-label")

    def heldout(params):
        return nll_loss(compute_u(params, query_ds.features).u, S)

    cfg = TrainConfig(code_length=12, learning_rate=1e-5, iterations=500)
    state = train(train_ds, spec, cfg)
    assert heldout(state.params) < 0.5 * heldout(init_params(spec, 12, cfg.seed))


def test_errors_and_validation():
    ds = Dataset(np.zeros((3, 2)), ({0}, set(), {1}))
    with pytest.raises(UnlabeledRow):
        train(ds, ExtractorSpec.identity(2), TrainConfig(minibatch_size=2))
    with pytest.raises(ValueError):
        train(_toy(), ExtractorSpec.identity(2), TrainConfig(minibatch_size=5))
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ValueError):
        TrainConfig(label_mode="other")
    spec = ExtractorSpec.identity(2)
    cfg = TrainConfig(code_length=3, minibatch_size=2)
    from pairhash.trainer import initial_state

    st = initial_state(_toy(), spec, cfg)
    with pytest.raises(ValueError):
        train_step(st, cfg, [1, 1], _toy(), spec)
    with pytest.raises(IndexError):
        train_step(st, cfg, [0, 9], _toy(), spec)
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_raises():
    ds, _ = make_blobs(n_train=64, n_query=4, seed=0)
    cfg = TrainConfig(code_length=12, learning_rate=1.0, iterations=50)
    with pytest.raises(NonFiniteLoss):
        train(ds, ExtractorSpec.identity(8), cfg)


def test_smoothed_windows():
    np.testing.assert_array_equal(smoothed(np.arange(45.0), 20), [9.5, 29.5])
