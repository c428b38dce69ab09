"""Hash unseen points with one forward pass through a trained model."""
from __future__ import annotations

import numpy as np

from .core import CodeMatrix, ModelParameters
from .extractor import ExtractorSpec
from .trainer import full_codes


def encode(params: ModelParameters, spec: ExtractorSpec, X_query) -> CodeMatrix:
    """b_q = sgn(W^T phi(x_q) + v) for every query row."""
    X_query = np.asarray(X_query, dtype=np.float64)
    if X_query.ndim == 1:
        X_query = X_query[None, :]
    return full_codes(params, spec, X_query)
