"""Hamming ranking and MAP / precision@K evaluation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np

from .core import CodeMatrix, LabelMode, similarity_matrix
from .errors import EmptyDatabase, InvalidCutoff, LengthMismatch

Normalizer = Literal["retrieved", "total"]


@dataclass(frozen=True, eq=False)
class RankedResult:
    query_index: int
    neighbor_indices: np.ndarray
    distances: np.ndarray


@dataclass(frozen=True)
class EvalReport:
    map: float
    per_query_ap: tuple[float, ...]
    precision_at: dict[int, float]
    top_R: int
    normalizer: Normalizer = "retrieved"

    def lines(self) -> list[str]:
        out = [f"map\t{self.map:.6f}", f"top_R\t{self.top_R}", f"queries\t{len(self.per_query_ap)}"]
        out += [f"precision@{k}\t{v:.6f}" for k, v in sorted(self.precision_at.items())]
        return out

    def to_dict(self) -> dict:
        return {
            "map": self.map,
            "top_R": self.top_R,
            "normalizer": self.normalizer,
            "precision_at": {str(k): v for k, v in sorted(self.precision_at.items())},
            "per_query_ap": list(self.per_query_ap),
        }


def _packed(code) -> tuple[np.ndarray, int | None]:
    if isinstance(code, CodeMatrix):
        if code.n != 1:
            raise LengthMismatch("expected a single code")
        return code.packed[0], code.c
    return np.asarray(code, dtype=np.uint64).reshape(-1), None


def hamming_distance(b1, b2) -> int:
    """Differing bit count between two packed codes (CodeMatrix rows or word arrays)."""
    w1, c1 = _packed(b1)
    w2, c2 = _packed(b2)
    if w1.shape != w2.shape or (c1 is not None and c2 is not None and c1 != c2):
        raise LengthMismatch("codes differ in length")
    return int(np.bitwise_count(w1 ^ w2).sum())


def hamming_distances(query, db: CodeMatrix) -> np.ndarray:
    """Distances from one packed query to every database row."""
    words, c = _packed(query)
    if words.shape[0] != db.packed.shape[1] or (c is not None and c != db.c):
        raise LengthMismatch(f"query code does not match database code length {db.c}")
    return np.bitwise_count(db.packed ^ words).sum(axis=1, dtype=np.int64)


def rank(query_code, db: CodeMatrix, query_index: int = 0) -> RankedResult:
    """Order the database by (Hamming distance, index) by bucketing on distance."""
    if db.n == 0:
        raise EmptyDatabase("database has no rows")
    dist = hamming_distances(query_code, db)
    # bucket by distance; np.flatnonzero keeps ascending index inside a bucket
    order = np.concatenate([np.flatnonzero(dist == d) for d in range(db.c + 1)])
    return RankedResult(query_index, order, dist[order])


def average_precision(
    ranked: RankedResult | Sequence[int],
    relevant: Iterable[int],
    R: int | None = None,
    normalizer: Normalizer = "retrieved",
    num_relevant: int | None = None,
) -> float:
    """AP over the top ``R`` results.

    ``normalizer="retrieved"`` divides by the relevant items found in the
    top R; ``"total"`` divides by all relevant items (``num_relevant`` or
    ``len(relevant)``).
    """
    order = ranked.neighbor_indices if isinstance(ranked, RankedResult) else np.asarray(ranked)
    if R is None:
        R = len(order)
    if R < 1:
        raise InvalidCutoff(f"cutoff must be >= 1, got {R}")
    rel = set(int(x) for x in relevant)
    hits = np.fromiter((int(k) in rel for k in order[:R]), dtype=bool, count=min(R, len(order)))
    return _ap_from_hits(hits, len(rel) if num_relevant is None else num_relevant, normalizer)


def _ap_from_hits(hits: np.ndarray, total_relevant: int, normalizer: Normalizer) -> float:
    found = int(hits.sum())
    if found == 0:
        return 0.0
    ranks = np.flatnonzero(hits) + 1
    prec = np.arange(1, found + 1) / ranks
    if normalizer == "retrieved":
        denom = found
    elif normalizer == "total":
        denom = max(total_relevant, found)
    else:
        raise ValueError(f"unknown normalizer {normalizer!r}")
    return float(prec.sum() / denom)


def _multi_hot(labels, width: int | None = None) -> np.ndarray:
    if isinstance(labels, np.ndarray) and labels.dtype == bool and labels.ndim == 2:
        return labels
    labels = [frozenset(int(x) for x in row) for row in labels]
    top = max((max(row) for row in labels if row), default=-1) + 1
    out = np.zeros((len(labels), max(top, width or 0, 1)), dtype=bool)
    for r, row in enumerate(labels):
        out[r, list(row)] = True
    return out


def evaluate(
    query_codes: CodeMatrix,
    query_labels,
    db_codes: CodeMatrix,
    db_labels,
    mode: LabelMode = "single-label",
    R: int | None = None,
    precision_ks: Sequence[int] = (1, 10, 100),
    normalizer: Normalizer = "retrieved",
    exclude_self: bool = False,
) -> EvalReport:
    """Hamming-rank every query against the database and score MAP within top R.

    ``R=None`` ranks the full database. ``exclude_self`` drops database row q
    from query q's list, for evaluating a set against itself.
    """
    if query_codes.c != db_codes.c:
        raise LengthMismatch(f"query codes c={query_codes.c}, database c={db_codes.c}")
    if db_codes.n == 0:
        raise EmptyDatabase("database has no rows")
    if exclude_self and query_codes.n != db_codes.n:
        raise LengthMismatch("exclude_self needs the query set to equal the database")
    qy = _multi_hot(query_labels)
    dy = _multi_hot(db_labels)
    if qy.shape[0] != query_codes.n or dy.shape[0] != db_codes.n:
        raise LengthMismatch("label rows do not match code rows")
    sim = similarity_matrix(qy, dy, mode)
    size = db_codes.n - (1 if exclude_self else 0)
    top_R = size if R is None else int(R)
    if top_R < 1:
        raise InvalidCutoff(f"cutoff must be >= 1, got {top_R}")

    aps = []
    prec_sums = {int(k): 0.0 for k in precision_ks}
    for q in range(query_codes.n):
        order = rank(query_codes.row(q), db_codes, q).neighbor_indices
        if exclude_self:
            order = order[order != q]
        hits = sim[q, order]
        relevant_total = int(hits.sum())
        aps.append(_ap_from_hits(hits[:top_R], relevant_total, normalizer))
        for k in prec_sums:
            prec_sums[k] += hits[:k].sum() / k
    nq = query_codes.n
    return EvalReport(
        float(np.mean(aps)) if aps else 0.0,
        tuple(aps),
        {k: float(v / nq) for k, v in prec_sums.items()} if nq else {},
        top_R,
        normalizer,
    )
