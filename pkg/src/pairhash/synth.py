"""Synthetic labeled datasets for demos and end-to-end checks."""
from __future__ import annotations

import numpy as np

from .core import Dataset


def make_blobs(
    n_train: int = 200,
    n_query: int = 50,
    d: int = 8,
    separation: float = 6.0,
    seed: int = 0,
) -> tuple[Dataset, Dataset]:
    """Two isotropic unit-variance Gaussian classes whose centers are ``separation`` apart."""
    rng = np.random.default_rng(seed)
    direction = rng.normal(size=d)
    direction /= np.linalg.norm(direction)
    centers = np.stack([-0.5 * separation * direction, 0.5 * separation * direction])

    def draw(m: int) -> Dataset:
        y = np.arange(m) % 2
        rng.shuffle(y)
        x = centers[y] + rng.normal(size=(m, d))
        return Dataset(x, tuple({int(k)} for k in y), num_labels=2)

    return draw(n_train), draw(n_query)


def make_circles(
    n_train: int = 400,
    n_query: int = 100,
    inner: float = 1.0,
    outer: float = 2.0,
    noise: float = 0.1,
    seed: int = 0,
) -> tuple[Dataset, Dataset]:
    """Two concentric noisy rings in the plane; class 0 is the inner ring."""
    rng = np.random.default_rng(seed)

    def draw(m: int) -> Dataset:
        y = np.arange(m) % 2
        rng.shuffle(y)
        angle = rng.uniform(0.0, 2.0 * np.pi, size=m)
        radius = np.where(y == 0, inner, outer) + noise * rng.normal(size=m)
        x = np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=1)
        return Dataset(x, tuple({int(k)} for k in y), num_labels=2)

    return draw(n_train), draw(n_query)
