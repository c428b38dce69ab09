"""Analytic gradients of the regularized pairwise loss.

The binary codes are constants here; the sign step is never differentiated.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CodeMatrix, PairwiseLabelSet
from .errors import ShapeMismatch
from .objective import _as_matrix, pair_thetas, sigmoid


@dataclass(frozen=True, eq=False)
class HeadGradients:
    d_u: np.ndarray
    d_W: np.ndarray
    d_v: np.ndarray
    d_phi: np.ndarray


def grad_u(u, b, S: PairwiseLabelSet, eta: float) -> np.ndarray:
    """dJ/du for every row of ``u``.

    Each stored pair (i, j) adds 0.5 * (a_ij - s_ij) * u_j to row i and
    0.5 * (a_ij - s_ij) * u_i to row j, where a_ij = sigmoid(0.5 u_i.u_j).
    """
    u = _as_matrix(u)
    signs = b.to_signs() if isinstance(b, CodeMatrix) else np.asarray(b, dtype=np.float64)
    if signs.shape != u.shape:
        raise ShapeMismatch(f"codes {signs.shape} vs relaxed {u.shape}")
    g = 2.0 * eta * (u - signs)
    if len(S):
        coef = 0.5 * (sigmoid(pair_thetas(u, S)) - S.s)
        # np.add.at accumulates in pair order, so results are reproducible
        np.add.at(g, S.i, coef[:, None] * u[S.j])
        np.add.at(g, S.j, coef[:, None] * u[S.i])
    return g


def grad_W(phi: np.ndarray, d_u: np.ndarray) -> np.ndarray:
    """Sum over the batch of outer(phi_i, dJ/du_i)."""
    phi = np.asarray(phi, dtype=np.float64)
    d_u = np.asarray(d_u, dtype=np.float64)
    if phi.ndim != 2 or d_u.ndim != 2 or phi.shape[0] != d_u.shape[0]:
        raise ShapeMismatch(f"phi {phi.shape} vs d_u {d_u.shape}")
    return phi.T @ d_u


def grad_v(d_u: np.ndarray) -> np.ndarray:
    return np.asarray(d_u, dtype=np.float64).sum(axis=0)


def grad_phi(W: np.ndarray, d_u: np.ndarray) -> np.ndarray:
    """Row i is W @ dJ/du_i."""
    W = np.asarray(W, dtype=np.float64)
    d_u = np.asarray(d_u, dtype=np.float64)
    if d_u.ndim != 2 or W.shape[1] != d_u.shape[1]:
        raise ShapeMismatch(f"W {W.shape} vs d_u {d_u.shape}")
    return d_u @ W.T


def head_gradients(phi, W, u, b, S: PairwiseLabelSet, eta: float) -> HeadGradients:
    d_u = grad_u(u, b, S, eta)
    return HeadGradients(d_u, grad_W(phi, d_u), grad_v(d_u), grad_phi(W, d_u))
