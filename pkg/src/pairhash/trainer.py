"""Minibatch alternating optimization of codes and network parameters.

Each step refreshes the batch codes with ``sgn(u)``, then takes one plain
SGD step on (W, v, theta) with the codes held fixed.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .core import (
    LABEL_MODES,
    CodeMatrix,
    Dataset,
    LabelMode,
    ModelParameters,
    RelaxedCodes,
    pairs_from_labels,
)
from .errors import NonFiniteLoss, ShapeMismatch, UnlabeledRow
from .extractor import (
    ExtractorParams,
    ExtractorSpec,
    extractor_backward,
    extractor_forward,
    init_extractor,
)
from .gradients import grad_phi, grad_u, grad_v, grad_W
from .objective import LossBreakdown, regularized_loss

log = logging.getLogger(__name__)

HEAD_INIT_STD = 0.1  # variance 0.01
DEFAULT_ETA = {"single-label": 10.0, "multi-label": 100.0}


@dataclass(frozen=True)
class TrainConfig:
    code_length: int = 12
    eta: float = 10.0
    learning_rate: float = 1e-4
    minibatch_size: int = 32
    iterations: int = 500
    seed: int = 0
    freeze_backbone: bool = False
    label_mode: LabelMode = "single-label"

    def __post_init__(self):
        if self.code_length < 1:
            raise ValueError("code_length must be positive")
        if self.eta < 0:
            raise ValueError("eta must be non-negative")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.minibatch_size < 1:
            raise ValueError("minibatch_size must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.label_mode not in LABEL_MODES:
            raise ValueError(f"unknown label mode {self.label_mode!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass(frozen=True, eq=False)
class TrainState:
    params: ModelParameters
    codes: CodeMatrix
    iteration: int = 0
    loss_history: tuple[LossBreakdown, ...] = field(default_factory=tuple)


def init_params(spec: ExtractorSpec, c: int, seed: int) -> ModelParameters:
    """Head entries ~ N(0, 0.01); extractor drawn after the head from the same stream."""
    rng = np.random.default_rng(seed)
    W = rng.normal(0.0, HEAD_INIT_STD, size=(spec.output_dim, c))
    v = rng.normal(0.0, HEAD_INIT_STD, size=c)
    theta = init_extractor(spec, rng)
    return ModelParameters(theta, W, v)


def compute_u(params: ModelParameters, phi) -> RelaxedCodes:
    phi = np.asarray(phi, dtype=np.float64)
    if phi.ndim != 2 or phi.shape[1] != params.W.shape[0]:
        raise ShapeMismatch(f"phi {phi.shape} vs W {params.W.shape}")
    return RelaxedCodes(phi @ params.W + params.v)


def binarize(u) -> CodeMatrix:
    """Entrywise sign with sgn(0) = -1."""
    u = u.u if isinstance(u, RelaxedCodes) else np.asarray(u, dtype=np.float64)
    return CodeMatrix.from_signs(np.where(u > 0, 1, -1))


def initial_state(dataset: Dataset, spec: ExtractorSpec, config: TrainConfig) -> TrainState:
    params = init_params(spec, config.code_length, config.seed)
    return TrainState(params, full_codes(params, spec, dataset.features))


def full_codes(params: ModelParameters, spec: ExtractorSpec, X) -> CodeMatrix:
    phi, _ = extractor_forward(spec, params.theta, X)
    return binarize(compute_u(params, phi))


def train_step(state: TrainState, config: TrainConfig, batch, dataset: Dataset, spec: ExtractorSpec) -> TrainState:
    batch = np.asarray(batch, dtype=np.int64)
    if len(np.unique(batch)) != len(batch):
        raise ValueError("batch indices must be distinct")
    if len(batch) and (batch.min() < 0 or batch.max() >= dataset.n):
        raise IndexError("batch index out of range")

    params = state.params
    phi, cache = extractor_forward(spec, params.theta, dataset.features[batch])
    u = compute_u(params, phi)
    b = binarize(u)
    codes = state.codes.with_rows(batch, b)
    S = pairs_from_labels(dataset, config.label_mode, rows=batch)

    loss = regularized_loss(u, b, S, config.eta)
    if not np.isfinite(loss.total):
        raise NonFiniteLoss(f"non-finite loss at iteration {state.iteration}: {loss}")

    d_u = grad_u(u, b, S, config.eta)
    lr = config.learning_rate
    W = params.W - lr * grad_W(phi, d_u)
    v = params.v - lr * grad_v(d_u)
    theta = params.theta
    if not config.freeze_backbone and spec.num_layers:
        d_theta = extractor_backward(spec, params.theta, cache, grad_phi(params.W, d_u))
        theta = params.theta.step(d_theta, lr)
    if not (np.all(np.isfinite(W)) and np.all(np.isfinite(v))):
        raise NonFiniteLoss(f"parameters diverged at iteration {state.iteration}")

    log.debug(
        "iter %d likelihood %.6g quantization %.6g total %.6g",
        state.iteration, loss.likelihood_term, loss.quantization_term, loss.total,
    )
    return TrainState(
        ModelParameters(theta, W, v),
        codes,
        state.iteration + 1,
        state.loss_history + (loss,),
    )


def train(dataset: Dataset, spec: ExtractorSpec, config: TrainConfig, callback=None) -> TrainState:
    """Run ``config.iterations`` steps on uniformly sampled minibatches.

    ``callback(state)`` is invoked after every step when given.
    """
    if not dataset.is_labeled:
        raise UnlabeledRow(next(r for r, row in enumerate(dataset.labels) if not row))
    if config.minibatch_size > dataset.n:
        raise ValueError(f"minibatch_size {config.minibatch_size} exceeds n={dataset.n}")
    log.info(
        "training c=%d eta=%g lr=%g batch=%d iters=%d seed=%d freeze_backbone=%s",
        config.code_length, config.eta, config.learning_rate, config.minibatch_size,
        config.iterations, config.seed, config.freeze_backbone,
    )
    state = initial_state(dataset, spec, config)
    # separate stream from init so batch order does not depend on model size
    rng = np.random.default_rng([config.seed, 1])
    for _ in range(config.iterations):
        batch = rng.choice(dataset.n, size=config.minibatch_size, replace=False)
        state = train_step(state, config, batch, dataset, spec)
        if callback is not None:
            callback(state)
    return replace(state, codes=full_codes(state.params, spec, dataset.features))


def smoothed(values, window: int = 20) -> np.ndarray:
    """Means over consecutive non-overlapping windows; a partial tail is dropped."""
    values = np.asarray(values, dtype=np.float64)
    k = len(values) // window
    return values[: k * window].reshape(k, window).mean(axis=1)
