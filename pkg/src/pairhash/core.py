"""Domain types shared across the package.

All containers are immutable after construction: array fields are copied
and flagged read-only.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np

from .errors import (
    ConflictingPair,
    EmptyDataset,
    IndexOutOfRange,
    LabelOutOfUniverse,
    NonFinite,
    ShapeMismatch,
    UnlabeledRow,
)

LabelMode = Literal["single-label", "multi-label"]
LABEL_MODES = ("single-label", "multi-label")


def _frozen(a, dtype) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix (n x d) with per-row label sets.

    ``num_labels`` is the size of the label universe; when omitted it is
    inferred as ``max(label) + 1``.
    """

    features: np.ndarray
    labels: tuple[frozenset[int], ...]
    ids: tuple[str, ...] | None = None
    num_labels: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "features", _frozen(self.features, np.float64))
        labels = tuple(frozenset(int(x) for x in row) for row in self.labels)
        object.__setattr__(self, "labels", labels)
        if self.ids is not None:
            object.__setattr__(self, "ids", tuple(str(x) for x in self.ids))
        if self.num_labels is None:
            top = max((max(row) for row in labels if row), default=-1)
            object.__setattr__(self, "num_labels", top + 1)

    @property
    def n(self) -> int:
        return self.features.shape[0] if self.features.ndim == 2 else 0

    @property
    def d(self) -> int:
        return self.features.shape[1] if self.features.ndim == 2 else 0

    @property
    def is_labeled(self) -> bool:
        return all(len(row) > 0 for row in self.labels)

    def label_matrix(self, rows: Sequence[int] | None = None) -> np.ndarray:
        """Multi-hot boolean matrix of shape (len(rows), num_labels)."""
        idx = range(self.n) if rows is None else rows
        out = np.zeros((len(idx), max(self.num_labels, 1)), dtype=bool)
        for k, r in enumerate(idx):
            for lab in self.labels[r]:
                out[k, lab] = True
        return out

    def subset(self, rows: Sequence[int]) -> "Dataset":
        rows = list(rows)
        ids = None if self.ids is None else tuple(self.ids[r] for r in rows)
        return Dataset(
            self.features[rows],
            tuple(self.labels[r] for r in rows),
            ids,
            self.num_labels,
        )


def validate_dataset(raw: Dataset) -> Dataset:
    """Return ``raw`` unchanged if every dataset invariant holds, else raise."""
    x = raw.features
    if x.ndim != 2 or x.shape[0] == 0:
        raise EmptyDataset("dataset must have at least one row")
    if x.shape[1] == 0:
        raise EmptyDataset("dataset must have at least one feature column")
    bad = np.argwhere(~np.isfinite(x))
    if len(bad):
        raise NonFinite(int(bad[0, 0]), int(bad[0, 1]))
    if len(raw.labels) != x.shape[0]:
        raise ShapeMismatch(f"{len(raw.labels)} label sets for {x.shape[0]} rows")
    if raw.ids is not None and len(raw.ids) != x.shape[0]:
        raise ShapeMismatch(f"{len(raw.ids)} ids for {x.shape[0]} rows")
    for r, row in enumerate(raw.labels):
        for lab in row:
            if lab < 0 or lab >= raw.num_labels:
                raise LabelOutOfUniverse(r, lab)
    return raw


@dataclass(frozen=True, eq=False)
class PairwiseLabelSet:
    """Sparse set of unordered pairs (i, j, s) with s in {0, 1}.

    Each unordered pair is stored once, in insertion order; lookup is
    symmetric.
    """

    i: np.ndarray
    j: np.ndarray
    s: np.ndarray
    n: int | None = None

    def __post_init__(self):
        i = _frozen(self.i, np.int64).reshape(-1)
        j = _frozen(self.j, np.int64).reshape(-1)
        s = _frozen(self.s, np.int8).reshape(-1)
        if not (len(i) == len(j) == len(s)):
            raise ShapeMismatch("pair index and label arrays differ in length")
        if np.any((s != 0) & (s != 1)):
            raise ValueError("pair labels must be 0 or 1")
        if np.any(i == j):
            raise ValueError("self-pairs are not allowed")
        if np.any((i < 0) | (j < 0)) or (self.n is not None and len(i) and max(i.max(), j.max()) >= self.n):
            raise IndexOutOfRange("pair index outside [0, n)")
        lo, hi = np.minimum(i, j), np.maximum(i, j)
        lookup: dict[tuple[int, int], int] = {}
        keep = np.ones(len(i), dtype=bool)
        for k, key in enumerate(zip(lo.tolist(), hi.tolist())):
            prev = lookup.get(key)
            if prev is None:
                lookup[key] = int(s[k])
            elif prev != s[k]:
                raise ConflictingPair(f"pair {key} given both s=0 and s=1")
            else:
                keep[k] = False
        if not keep.all():
            i, j, s = (_frozen(a[keep], a.dtype) for a in (i, j, s))
        object.__setattr__(self, "i", i)
        object.__setattr__(self, "j", j)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "_lookup", lookup)

    @classmethod
    def from_triples(cls, triples: Iterable[tuple[int, int, int]], n: int | None = None) -> "PairwiseLabelSet":
        arr = np.asarray(list(triples), dtype=np.int64).reshape(-1, 3)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2], n)

    def __len__(self) -> int:
        return len(self.s)

    def __iter__(self):
        return zip(self.i.tolist(), self.j.tolist(), self.s.tolist())

    def get(self, i: int, j: int) -> int | None:
        return self._lookup.get((min(i, j), max(i, j)))

    def __contains__(self, key) -> bool:
        return self.get(*key) is not None

    def max_index(self) -> int:
        return int(max(self.i.max(), self.j.max())) if len(self) else -1

    def permuted(self, order: Sequence[int]) -> "PairwiseLabelSet":
        order = np.asarray(order)
        return PairwiseLabelSet(self.i[order], self.j[order], self.s[order], self.n)


def similarity_matrix(a: np.ndarray, b: np.ndarray, mode: LabelMode) -> np.ndarray:
    """Boolean similarity between rows of two multi-hot label matrices."""
    if mode not in LABEL_MODES:
        raise ValueError(f"unknown label mode {mode!r}")
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    width = max(a.shape[1], b.shape[1])
    a = np.pad(a, ((0, 0), (0, width - a.shape[1])))
    b = np.pad(b, ((0, 0), (0, width - b.shape[1])))
    shared = a.astype(np.int64) @ b.T.astype(np.int64)
    if mode == "multi-label":
        return shared > 0
    single_a = a.sum(axis=1) == 1
    single_b = b.sum(axis=1) == 1
    return (shared > 0) & single_a[:, None] & single_b[None, :]


def pairs_from_labels(
    ds: Dataset, mode: LabelMode, rows: Sequence[int] | None = None
) -> PairwiseLabelSet:
    """All unordered pairs over ``rows`` with similarity derived from labels.

    With ``rows`` given, pair indices are positions within ``rows`` (the
    layout a minibatch of relaxed codes uses).
    """
    rows = list(range(ds.n)) if rows is None else [int(r) for r in rows]
    for r in rows:
        if not ds.labels[r]:
            raise UnlabeledRow(r)
    y = ds.label_matrix(rows)
    sim = similarity_matrix(y, y, mode)
    i, j = np.triu_indices(len(rows), k=1)
    return PairwiseLabelSet(i, j, sim[i, j].astype(np.int8), len(rows))


def _pack_signs(signs: np.ndarray) -> np.ndarray:
    n, c = signs.shape
    words = max(1, (c + 63) // 64)
    bits = np.zeros((n, words * 64), dtype=bool)
    bits[:, :c] = signs > 0
    packed = np.packbits(bits, axis=1, bitorder="little")
    return np.ascontiguousarray(packed).view("<u8").reshape(n, words)


@dataclass(frozen=True, eq=False)
class CodeMatrix:
    """n binary codes of length c, bit-packed into little-endian 64-bit words.

    Bit k of code row r lives in word ``k // 64`` at bit ``k % 64``;
    +1 is stored as 1 and -1 as 0. Padding bits are always 0.
    """

    packed: np.ndarray
    c: int

    def __post_init__(self):
        packed = np.asarray(self.packed)
        if packed.ndim == 1:
            packed = packed[None, :]
        words = max(1, (self.c + 63) // 64)
        if self.c < 1 or packed.ndim != 2 or packed.shape[1] != words:
            raise ShapeMismatch(f"packed shape {packed.shape} does not fit code length {self.c}")
        packed = _frozen(packed, np.uint64)
        if self.c % 64 and np.any(packed[:, -1] >> np.uint64(self.c % 64)):
            raise ValueError("padding bits must be zero")
        object.__setattr__(self, "packed", packed)

    @classmethod
    def from_signs(cls, signs) -> "CodeMatrix":
        signs = np.asarray(signs)
        if signs.ndim == 1:
            signs = signs[None, :]
        if not np.all((signs == 1) | (signs == -1)):
            raise ValueError("codes must contain only -1 and +1")
        return cls(_pack_signs(signs), signs.shape[1])

    @property
    def n(self) -> int:
        return self.packed.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.c)

    def to_signs(self) -> np.ndarray:
        """Unpack to an (n, c) float64 array of -1.0/+1.0."""
        raw = np.ascontiguousarray(self.packed.astype("<u8")).view(np.uint8)
        bits = np.unpackbits(raw, axis=1, bitorder="little")[:, : self.c]
        return np.where(bits == 1, 1.0, -1.0)

    def row(self, r: int) -> "CodeMatrix":
        return CodeMatrix(self.packed[r : r + 1], self.c)

    def take(self, rows: Sequence[int]) -> "CodeMatrix":
        return CodeMatrix(self.packed[np.asarray(rows, dtype=np.int64)], self.c)

    def with_rows(self, rows: Sequence[int], other: "CodeMatrix") -> "CodeMatrix":
        """Copy of self with ``rows`` replaced by the rows of ``other``."""
        if other.c != self.c:
            raise ShapeMismatch("code length mismatch")
        packed = self.packed.copy()
        packed[np.asarray(rows, dtype=np.int64)] = other.packed
        return CodeMatrix(packed, self.c)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, CodeMatrix)
            and self.c == other.c
            and np.array_equal(self.packed, other.packed)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class RelaxedCodes:
    """Real-valued surrogate codes, n x c."""

    u: np.ndarray

    def __post_init__(self):
        u = _frozen(self.u, np.float64)
        if u.ndim != 2:
            raise ShapeMismatch("relaxed codes must be a 2-D array")
        if not np.all(np.isfinite(u)):
            bad = np.argwhere(~np.isfinite(u))[0]
            raise NonFinite(int(bad[0]), int(bad[1]))
        object.__setattr__(self, "u", u)

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape


@dataclass(frozen=True, eq=False)
class ModelParameters:
    """Extractor parameters ``theta`` plus the hashing head (W, v)."""

    theta: object
    W: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        W = _frozen(self.W, np.float64)
        v = _frozen(self.v, np.float64).reshape(-1)
        if W.ndim != 2 or W.shape[1] != v.shape[0] or v.shape[0] < 1:
            raise ShapeMismatch(f"W {W.shape} incompatible with v {v.shape}")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(v))):
            raise ValueError("head parameters must be finite")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "v", v)

    @property
    def c(self) -> int:
        return self.v.shape[0]

    @property
    def p(self) -> int:
        return self.W.shape[0]
