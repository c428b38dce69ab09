"""Finite-difference verification of the analytic gradients.

The reference loss below is a separate, loop-based evaluation in extended
precision (``np.longdouble``); it shares no code with the objective or
extractor modules, so agreement checks both routes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ModelParameters, PairwiseLabelSet
from .extractor import ExtractorParams, ExtractorSpec, extractor_backward, extractor_forward
from .gradients import grad_phi, grad_u, grad_v, grad_W
from .trainer import compute_u

ETAS = (0.0, 1.0, 10.0, 100.0)
KINDS = ("identity", "linear", "mlp")
SKIP_BELOW = 1e-8

LD = np.longdouble


def reference_forward(kind: str, arrays, X) -> np.ndarray:
    h = np.asarray(X, dtype=LD)
    layers = list(zip(arrays[0::2], arrays[1::2]))
    for k, (w, b) in enumerate(layers):
        w = np.asarray(w, dtype=LD)
        b = np.asarray(b, dtype=LD)
        out = np.empty((h.shape[0], w.shape[1]), dtype=LD)
        for r in range(h.shape[0]):
            for col in range(w.shape[1]):
                z = b[col]
                for m in range(w.shape[0]):
                    z += h[r, m] * w[m, col]
                out[r, col] = z if (k == len(layers) - 1 or z > 0) else LD(0)
        h = out
    return h


def reference_loss_u(u, signs, pairs, eta) -> LD:
    u = np.asarray(u, dtype=LD)
    total = LD(0)
    for i, j, s in pairs:
        theta = LD(0.5) * sum(u[i, k] * u[j, k] for k in range(u.shape[1]))
        # softplus(theta) - s*theta rewritten as softplus(+-theta) to avoid cancellation
        z = -theta if s else theta
        total += np.log1p(np.exp(z)) if z < 0 else z + np.log1p(np.exp(-z))
    quant = LD(0)
    for i in range(u.shape[0]):
        for k in range(u.shape[1]):
            quant += (LD(signs[i, k]) - u[i, k]) ** 2
    return total + LD(eta) * quant


def reference_loss(kind, arrays, W, v, X, signs, pairs, eta) -> LD:
    phi = reference_forward(kind, arrays, X)
    W = np.asarray(W, dtype=LD)
    v = np.asarray(v, dtype=LD)
    u = phi @ W + v
    return reference_loss_u(u, signs, pairs, eta)


def central_difference(f, x: np.ndarray, eps: float) -> np.ndarray:
    x = np.asarray(x, dtype=LD)
    out = np.zeros(x.shape, dtype=np.float64)
    for idx in np.ndindex(x.shape):
        up, down = x.copy(), x.copy()
        up[idx] += LD(eps)
        down[idx] -= LD(eps)
        out[idx] = float((f(up) - f(down)) / (up[idx] - down[idx]))
    return out


def relative_error(analytic: np.ndarray, numeric: np.ndarray, skip_below: float = SKIP_BELOW) -> float:
    """max |a - n| / max(|a|, |n|) over components with |a| >= skip_below."""
    a = np.ravel(analytic)
    n = np.ravel(numeric)
    mask = np.abs(a) >= skip_below
    if not mask.any():
        return 0.0
    a, n = a[mask], n[mask]
    return float(np.max(np.abs(a - n) / np.maximum(np.abs(a), np.abs(n))))


@dataclass
class Instance:
    spec: ExtractorSpec
    params: ModelParameters
    X: np.ndarray
    signs: np.ndarray
    pairs: PairwiseLabelSet
    eta: float


@dataclass
class InstanceResult:
    kind: str
    eta: float
    shape: tuple[int, int, int, int]  # n, d, p, c
    errors: dict[str, float] = field(default_factory=dict)

    @property
    def head_error(self) -> float:
        return max(v for k, v in self.errors.items() if k in ("u", "W", "v")) if self.errors else 0.0

    @property
    def theta_error(self) -> float:
        vals = [v for k, v in self.errors.items() if k.startswith("theta")]
        return max(vals) if vals else 0.0


def random_instance(rng: np.random.Generator, kind: str, eta: float, max_dim: int = 8) -> Instance:
    n = int(rng.integers(2, max_dim + 1))
    c = int(rng.integers(1, max_dim + 1))
    d = int(rng.integers(1, max_dim + 1))
    if kind == "identity":
        spec = ExtractorSpec.identity(d)
    elif kind == "linear":
        spec = ExtractorSpec("linear", (d, int(rng.integers(1, max_dim + 1))))
    else:
        spec = ExtractorSpec("mlp", (d, int(rng.integers(1, max_dim + 1)), int(rng.integers(1, max_dim + 1))))
    dims = spec.layer_dims
    theta = ExtractorParams(
        tuple(rng.normal(0.0, 0.6, size=(dims[k], dims[k + 1])) for k in range(spec.num_layers)),
        tuple(rng.normal(0.0, 0.3, size=dims[k + 1]) for k in range(spec.num_layers)),
    )
    params = ModelParameters(theta, rng.normal(0.0, 0.6, size=(spec.output_dim, c)), rng.normal(0.0, 0.3, size=c))
    X = rng.normal(size=(n, d))
    signs = np.where(rng.random((n, c)) < 0.5, -1.0, 1.0)
    all_pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    m = int(rng.integers(1, len(all_pairs) + 1))
    chosen = rng.choice(len(all_pairs), size=m, replace=False)
    triples = [(*all_pairs[k], int(rng.integers(0, 2))) for k in chosen]
    return Instance(spec, params, X, signs, PairwiseLabelSet.from_triples(triples, n), eta)


def check_instance(inst: Instance, eps: float = 1e-5) -> InstanceResult:
    spec, p = inst.spec, inst.params
    phi, cache = extractor_forward(spec, p.theta, inst.X)
    u = compute_u(p, phi).u
    d_u = grad_u(u, inst.signs, inst.pairs, inst.eta)
    d_theta = extractor_backward(spec, p.theta, cache, grad_phi(p.W, d_u))
    analytic = {"u": d_u, "W": grad_W(phi, d_u), "v": grad_v(d_u)}
    for k, a in enumerate(d_theta.arrays()):
        analytic[f"theta{k}"] = a

    triples = list(inst.pairs)
    arrays = p.theta.arrays()

    def loss_with(name, value):
        if name == "u":
            return reference_loss_u(value, inst.signs, triples, inst.eta)
        W, v, arr = p.W, p.v, list(arrays)
        if name == "W":
            W = value
        elif name == "v":
            v = value
        else:
            arr[int(name[5:])] = value
        return reference_loss(spec.kind, arr, W, v, inst.X, inst.signs, triples, inst.eta)

    base = {"u": u, "W": p.W, "v": p.v}
    for k, a in enumerate(arrays):
        base[f"theta{k}"] = a
    result = InstanceResult(spec.kind, inst.eta, (inst.X.shape[0], spec.input_dim, spec.output_dim, p.c))
    for name, a in analytic.items():
        numeric = central_difference(lambda x, name=name: loss_with(name, x), base[name], eps)
        result.errors[name] = relative_error(a, numeric)
    return result


def run_suite(seed: int = 0, instances: int = 24, eps: float = 1e-5) -> list[InstanceResult]:
    """Check ``instances`` random problems cycling through extractor kinds and eta values."""
    rng = np.random.default_rng(seed)
    out = []
    for t in range(instances):
        kind = KINDS[t % len(KINDS)]
        eta = ETAS[(t // len(KINDS)) % len(ETAS)]
        out.append(check_instance(random_instance(rng, kind, eta), eps))
    return out
