"""Differentiable feature extractors: identity, linear, and ReLU MLP.

Layers compute ``h @ weight + bias``; hidden layers apply ReLU, the
output layer is linear. The ReLU derivative at exactly 0 is taken as 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import NonFinite, ShapeMismatch, StaleCache

ExtractorKind = Literal["identity", "linear", "mlp"]
BIAS_INIT_STD = 0.1


@dataclass(frozen=True)
class ExtractorSpec:
    kind: ExtractorKind
    layer_dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(x) for x in self.layer_dims)
        object.__setattr__(self, "layer_dims", dims)
        if any(x < 1 for x in dims):
            raise ValueError("layer dimensions must be positive")
        if self.kind == "identity":
            if len(dims) == 1:
                object.__setattr__(self, "layer_dims", (dims[0], dims[0]))
            elif len(dims) != 2 or dims[0] != dims[1]:
                raise ValueError("identity extractor needs output dim == input dim")
        elif self.kind == "linear":
            if len(dims) != 2:
                raise ValueError("linear extractor takes exactly [d, p]")
        elif self.kind == "mlp":
            if len(dims) < 2:
                raise ValueError("mlp extractor needs at least [d, p]")
        else:
            raise ValueError(f"unknown extractor kind {self.kind!r}")

    @classmethod
    def identity(cls, d: int) -> "ExtractorSpec":
        return cls("identity", (d, d))

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    @property
    def num_layers(self) -> int:
        return 0 if self.kind == "identity" else len(self.layer_dims) - 1

    def to_dict(self) -> dict:
        return {"kind": self.kind, "layer_dims": list(self.layer_dims)}

    @classmethod
    def from_dict(cls, d: dict) -> "ExtractorSpec":
        return cls(d["kind"], tuple(d["layer_dims"]))


@dataclass(frozen=True, eq=False)
class ExtractorParams:
    weights: tuple[np.ndarray, ...] = ()
    biases: tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        ws, bs = [], []
        for w, b in zip(self.weights, self.biases, strict=True):
            w = np.array(w, dtype=np.float64)
            b = np.array(b, dtype=np.float64).reshape(-1)
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError("extractor parameters must be finite")
            w.setflags(write=False)
            b.setflags(write=False)
            ws.append(w)
            bs.append(b)
        object.__setattr__(self, "weights", tuple(ws))
        object.__setattr__(self, "biases", tuple(bs))

    def arrays(self) -> list[np.ndarray]:
        """Flat list [W0, b0, W1, b1, ...]."""
        return [a for pair in zip(self.weights, self.biases) for a in pair]

    @classmethod
    def from_arrays(cls, arrays) -> "ExtractorParams":
        arrays = list(arrays)
        return cls(tuple(arrays[0::2]), tuple(arrays[1::2]))

    def check(self, spec: ExtractorSpec) -> None:
        if len(self.weights) != spec.num_layers:
            raise ShapeMismatch(f"{len(self.weights)} layers for a {spec.kind} extractor")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (spec.layer_dims[k], spec.layer_dims[k + 1])
            if w.shape != expected or b.shape != (expected[1],):
                raise ShapeMismatch(f"layer {k}: W {w.shape}, b {b.shape}, expected {expected}")

    def step(self, grads: "ExtractorParams", lr: float) -> "ExtractorParams":
        return ExtractorParams(
            tuple(w - lr * g for w, g in zip(self.weights, grads.weights)),
            tuple(b - lr * g for b, g in zip(self.biases, grads.biases)),
        )

    def scaled(self, alpha: float) -> "ExtractorParams":
        return ExtractorParams(
            tuple(alpha * w for w in self.weights), tuple(alpha * b for b in self.biases)
        )


@dataclass(frozen=True, eq=False)
class ForwardCache:
    spec: ExtractorSpec
    params: ExtractorParams
    inputs: tuple[np.ndarray, ...]  # input to each layer
    pre: tuple[np.ndarray, ...]  # pre-activations of each layer


def init_extractor(
    spec: ExtractorSpec,
    rng: np.random.Generator,
    weight_std: float | None = None,
    bias_std: float = BIAS_INIT_STD,
) -> ExtractorParams:
    """Zero-mean Gaussian init; weight std defaults to sqrt(2 / fan_in).

    Weights much smaller than that leave every point with the same initial
    code, and the quantization term then holds the codes there.
    """
    dims = spec.layer_dims
    ws, bs = [], []
    for k in range(spec.num_layers):
        std = np.sqrt(2.0 / dims[k]) if weight_std is None else weight_std
        ws.append(rng.normal(0.0, std, size=(dims[k], dims[k + 1])))
        bs.append(rng.normal(0.0, bias_std, size=dims[k + 1]))
    return ExtractorParams(tuple(ws), tuple(bs))


def extractor_forward(spec: ExtractorSpec, params: ExtractorParams, X) -> tuple[np.ndarray, ForwardCache]:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != spec.input_dim:
        raise ShapeMismatch(f"input {X.shape} for extractor with input dim {spec.input_dim}")
    if not np.all(np.isfinite(X)):
        bad = np.argwhere(~np.isfinite(X))[0]
        raise NonFinite(int(bad[0]), int(bad[1]))
    params.check(spec)
    h = X
    inputs, pre = [], []
    last = spec.num_layers - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(h)
        z = h @ w + b
        pre.append(z)
        h = z if k == last else np.maximum(z, 0.0)
    return h.copy(), ForwardCache(spec, params, tuple(inputs), tuple(pre))


def extractor_backward(spec: ExtractorSpec, params: ExtractorParams, cache: ForwardCache, d_phi) -> ExtractorParams:
    """Gradients of the loss w.r.t. every layer weight and bias."""
    if cache.params is not params or cache.spec != spec:
        raise StaleCache("cache was produced by a different forward call")
    d = np.asarray(d_phi, dtype=np.float64)
    n = cache.inputs[0].shape[0] if cache.inputs else None
    if d.ndim != 2 or d.shape[1] != spec.output_dim or (n is not None and d.shape[0] != n):
        raise ShapeMismatch(f"upstream gradient {d.shape} does not match forward output")
    gw: list[np.ndarray] = [None] * spec.num_layers
    gb: list[np.ndarray] = [None] * spec.num_layers
    for k in reversed(range(spec.num_layers)):
        if k != spec.num_layers - 1:
            d = d * (cache.pre[k] > 0)
        gw[k] = cache.inputs[k].T @ d
        gb[k] = d.sum(axis=0)
        d = d @ params.weights[k].T
    return ExtractorParams(tuple(gw), tuple(gb))
