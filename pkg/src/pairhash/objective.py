"""Pairwise likelihood loss and its quantization-regularized form."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CodeMatrix, PairwiseLabelSet, RelaxedCodes
from .errors import DimensionMismatch, IndexOutOfRange, ShapeMismatch


@dataclass(frozen=True)
class LossBreakdown:
    likelihood_term: float
    quantization_term: float
    eta: float
    total: float
    num_pairs: int = 0

    @property
    def mean_pair_likelihood(self) -> float:
        """Per-pair average of the likelihood term, for logging only."""
        return self.likelihood_term / self.num_pairs if self.num_pairs else 0.0


def softplus(x):
    """log(1 + e^x) without overflow."""
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return out if out.ndim else float(out)


def theta_ij(u_i, u_j) -> float:
    u_i = np.asarray(u_i, dtype=np.float64)
    u_j = np.asarray(u_j, dtype=np.float64)
    if u_i.shape != u_j.shape:
        raise DimensionMismatch(f"{u_i.shape} vs {u_j.shape}")
    return 0.5 * float(u_i @ u_j)


def pair_likelihood(theta: float, s: int) -> float:
    return sigmoid(theta) if s == 1 else sigmoid(-theta)


def _as_matrix(u) -> np.ndarray:
    return u.u if isinstance(u, RelaxedCodes) else np.asarray(u, dtype=np.float64)


def _check_pairs(u: np.ndarray, S: PairwiseLabelSet) -> None:
    if len(S) and S.max_index() >= u.shape[0]:
        raise IndexOutOfRange(f"pair index {S.max_index()} for {u.shape[0]} codes")


def pair_thetas(u, S: PairwiseLabelSet) -> np.ndarray:
    """Theta for every stored pair, in storage order."""
    u = _as_matrix(u)
    _check_pairs(u, S)
    return 0.5 * np.einsum("kc,kc->k", u[S.i], u[S.j])


def nll_loss(u, S: PairwiseLabelSet) -> float:
    """Negative log-likelihood summed once over each stored pair."""
    theta = pair_thetas(u, S)
    return float(np.sum(softplus(theta) - S.s * theta))


def quantization_loss(u, b) -> float:
    u = _as_matrix(u)
    signs = b.to_signs() if isinstance(b, CodeMatrix) else np.asarray(b, dtype=np.float64)
    if signs.shape != u.shape:
        raise ShapeMismatch(f"codes {signs.shape} vs relaxed {u.shape}")
    return float(np.sum((signs - u) ** 2))


def regularized_loss(u, b, S: PairwiseLabelSet, eta: float) -> LossBreakdown:
    if eta < 0:
        raise ValueError("eta must be non-negative")
    q = quantization_loss(u, b)
    nll = nll_loss(u, S)
    return LossBreakdown(nll, q, float(eta), nll + eta * q, len(S))
