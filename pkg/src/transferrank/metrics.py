"""Ranking metrics: relevance labeling, DCG/NDCG, deterministic ordering.

Every ordering in the package goes through `ranking_order` so ties are always
resolved the same way: higher value first, then ascending sort key (the
candidate's language code where one exists, the input position otherwise).
"""

from __future__ import annotations

import math
from typing import Sequence

from .errors import SchemaError


def ranking_order(
    values: Sequence[float | None],
    keys: Sequence | None = None,
    *,
    descending: bool = True,
) -> list[int]:
    """Indices that sort `values`, missing entries (None) always last.

    Ties are broken by ascending `keys`; with no keys, by input position.
    """
    if keys is not None and len(keys) != len(values):
        raise SchemaError(f"{len(values)} values but {len(keys)} tie-break keys")

    def sort_key(i: int):
        v = values[i]
        missing = v is None
        rank_v = 0.0 if missing else (-v if descending else v)
        return (missing, rank_v, keys[i] if keys is not None else i)

    return sorted(range(len(values)), key=sort_key)


def assign_relevance(
    gold_scores: Sequence[float],
    gamma_max: int,
    keys: Sequence | None = None,
) -> list[int]:
    """Integer relevance labels from gold scores.

    The best-scoring candidate gets `gamma_max`, the next `gamma_max - 1`, and
    so on down to 1; everything below the top `gamma_max` candidates gets 0.
    Groups smaller than `gamma_max` still start at `gamma_max` for the best
    candidate.
    """
    if gamma_max < 1:
        raise ValueError(f"gamma_max must be >= 1, got {gamma_max}")
    if not gold_scores:
        raise ValueError("cannot assign relevance labels to an empty group")
    order = ranking_order(gold_scores, keys)
    labels = [0] * len(gold_scores)
    for position, idx in enumerate(order):
        labels[idx] = max(gamma_max - position, 0)
    return labels


def dcg_at_p(relevances_in_rank_order: Sequence[int], p: int) -> float:
    """Discounted cumulative gain of the first `p` ranks: sum of
    (2^rel - 1) / log2(rank + 1)."""
    if p < 1:
        raise ValueError(f"truncation p must be >= 1, got {p}")
    total = 0.0
    for i, rel in enumerate(relevances_in_rank_order[:p], start=1):
        total += (2.0 ** rel - 1.0) / math.log2(i + 1)
    return total


def ideal_dcg_at_p(relevances: Sequence[int], p: int) -> float:
    """DCG of the gold-optimal ordering (relevances sorted descending)."""
    return dcg_at_p(sorted(relevances, reverse=True), p)


def ndcg_at_p(
    predicted_scores: Sequence[float],
    relevances: Sequence[int],
    p: int,
    keys: Sequence | None = None,
) -> float:
    """Normalized DCG of the ranking induced by `predicted_scores`.

    A degenerate group with no positive relevance (ideal DCG of 0) scores 1:
    any ordering of an unrankable group is vacuously perfect.
    """
    if len(predicted_scores) != len(relevances):
        raise SchemaError(
            f"{len(predicted_scores)} scores but {len(relevances)} relevance labels"
        )
    order = ranking_order(predicted_scores, keys)
    dcg = dcg_at_p([relevances[i] for i in order], p)
    idcg = ideal_dcg_at_p(relevances, p)
    if idcg == 0.0:
        return 1.0
    return dcg / idcg
