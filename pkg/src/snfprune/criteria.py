"""Filter importance scoring and kept-index selection.

Criteria score raw (uncentered) filter rows; ``select_kept`` keeps the d
highest scores with ties broken toward lower indices. Coupled layers are
scored jointly by summing member scores position by position.
"""

from dataclasses import dataclass

import numpy as np

from snfprune._rng import SplitMix64

CRITERIA = ("l1", "l2", "geometric_median", "random")


@dataclass(frozen=True)
class CriterionKind:
    kind: str
    seed: int = None

    def __post_init__(self):
        if self.kind not in CRITERIA:
            raise ValueError("unknown criterion %r (choose from %s)"
                             % (self.kind, ", ".join(CRITERIA)))
        if (self.seed is not None) != (self.kind == "random"):
            raise ValueError("criterion %r %s a seed"
                             % (self.kind,
                                "does not take" if self.kind != "random" else "requires"))


def score_filters(m, criterion):
    """Importance score per filter row; larger means more worth keeping."""
    if m.centered:
        raise ValueError("layer %r: criteria score raw weights, not centered ones"
                         % m.layer)
    values = m.values
    if criterion.kind == "l1":
        return np.abs(values).sum(axis=1)
    if criterion.kind == "l2":
        return np.sqrt((values ** 2).sum(axis=1))
    if criterion.kind == "geometric_median":
        # Summed pairwise distances; the smallest sums mark the most
        # replaceable filters. Plain double loop keeps it cancellation-free.
        scores = np.empty(m.rows)
        for i in range(m.rows):
            diff = values - values[i]
            scores[i] = np.sqrt((diff ** 2).sum(axis=1)).sum()
        return scores
    return SplitMix64(criterion.seed).unit_array(m.rows)


def select_kept(scores, d):
    """Indices of the d largest scores, sorted ascending, low index wins ties."""
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.shape[0]
    if not 1 <= d <= n:
        raise ValueError("d must be in [1, %d], got %r" % (n, d))
    order = np.argsort(-scores, kind="stable")
    return sorted(int(i) for i in order[:d])


def select_kept_grouped(matrices, criterion, d):
    """Joint selection for coupled layers: sum member scores positionally."""
    if not matrices:
        raise ValueError("grouped selection needs at least one matrix")
    rows = {m.rows for m in matrices}
    if len(rows) != 1:
        raise ValueError("coupled matrices disagree on filter count: %s" % sorted(rows))
    total = np.zeros(matrices[0].rows)
    for m in matrices:
        total += score_filters(m, criterion)
    return select_kept(total, d)
