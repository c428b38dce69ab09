"""Slow, independent evaluation oracles shared by the retrieval and acceptance tests."""
from fractions import Fraction

import numpy as np


def naive_distance(a, b) -> int:
    return sum(1 for x, y in zip(a, b) if x != y)


def naive_rank(q_signs, db_signs) -> list[int]:
    keyed = [(naive_distance(q_signs, row), k) for k, row in enumerate(db_signs)]
    return [k for _, k in sorted(keyed)]


def reference_map(q_signs, q_labels, db_signs, db_labels, mode="single-label", R=None, normalizer="retrieved"):
    """Quadratic-time MAP with exact rational AP sums."""
    aps = []
    for q, row in enumerate(q_signs):
        order = naive_rank(row, db_signs)
        top = len(order) if R is None else R
        rel = []
        for k in order:
            shared = set(q_labels[q]) & set(db_labels[k])
            if mode == "single-label":
                ok = bool(shared) and len(q_labels[q]) == 1 and len(db_labels[k]) == 1
            else:
                ok = bool(shared)
            rel.append(ok)
        found, acc = 0, Fraction(0)
        for pos, ok in enumerate(rel[:top], start=1):
            if ok:
                found += 1
                acc += Fraction(found, pos)
        if found == 0:
            aps.append(Fraction(0))
            continue
        denom = found if normalizer == "retrieved" else max(found, sum(rel))
        aps.append(acc / denom)
    return sum(aps, Fraction(0)) / len(aps), aps


def random_eval_instance(rng):
    nq = int(rng.integers(1, 21))
    ndb = int(rng.integers(1, 101))
    c = int(rng.integers(1, 17))
    k = int(rng.integers(2, 5))
    q = np.where(rng.random((nq, c)) < 0.5, -1, 1)
    db = np.where(rng.random((ndb, c)) < 0.5, -1, 1)
    # reuse query codes inside the db so that exact ties occur
    for r in range(min(nq, ndb) // 2):
        db[int(rng.integers(ndb))] = q[r]
    ql = [{int(rng.integers(k))} for _ in range(nq)]
    dl = [{int(rng.integers(k))} for _ in range(ndb)]
    R = None if rng.random() < 0.5 else int(rng.integers(1, ndb + 1))
    return q, ql, db, dl, R
