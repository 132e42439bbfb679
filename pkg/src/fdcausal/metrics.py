"""Graph-comparison scores on the shared adjacency convention.

A directed edge i -> j sets entry [i, j]; an undirected edge sets both
entries.  The structural Hamming distance is the elementwise L1 distance
between adjacency matrices, so a reversed edge costs 2 and a direction-only
mismatch costs 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .graphs import MixedGraph


@dataclass(frozen=True)
class GraphScore:
    """SHD plus orientation precision/recall; undefined ratios stay None."""

    shd: int
    shd_norm: float
    precision: float | None
    recall: float | None

    def to_json(self) -> dict:
        return {
            "shd": self.shd,
            "shd_norm": self.shd_norm,
            "precision": self.precision,
            "recall": self.recall,
        }


def _check_same_size(g1: MixedGraph, g2: MixedGraph):
    if g1.d != g2.d:
        raise InvalidArgumentError(f"graphs have {g1.d} and {g2.d} nodes")


def shd(g1: MixedGraph, g2: MixedGraph) -> int:
    """Sum of elementwise absolute adjacency differences."""
    _check_same_size(g1, g2)
    return int(np.abs(g1.adjacency() - g2.adjacency()).sum())


def shd_norm(g1: MixedGraph, g2: MixedGraph) -> float:
    """SHD divided by the number of possible directed edges d(d-1)."""
    _check_same_size(g1, g2)
    if g1.d < 2:
        raise InvalidArgumentError("normalized SHD needs at least two nodes")
    return shd(g1, g2) / (g1.d * (g1.d - 1))


def precision(learned: MixedGraph, truth: MixedGraph) -> float | None:
    """Share of the learnt oriented edges that match the truth exactly.

    Correct edges contribute no adjacency difference, reversed edges
    contribute 2; edges contributing 1 (orientation-versus-undirected or
    spurious) count in neither tally.  None when nothing is comparable.
    """
    _check_same_size(learned, truth)
    A1, A2 = learned.adjacency(), truth.adjacency()
    correct = wrong = 0
    for i, j in learned.directed:
        diff = abs(A1[i, j] - A2[i, j]) + abs(A1[j, i] - A2[j, i])
        if diff == 0:
            correct += 1
        elif diff == 2:
            wrong += 1
    if correct + wrong == 0:
        return None
    return correct / (correct + wrong)


def recall(learned: MixedGraph) -> float | None:
    """Fraction of the learnt graph's edges that carry an orientation.

    A property of the learnt graph alone; None for an empty graph.
    """
    total = learned.num_edges
    if total == 0:
        return None
    return len(learned.directed) / total


def score_graphs(learned: MixedGraph, truth: MixedGraph) -> GraphScore:
    return GraphScore(
        shd=shd(learned, truth),
        shd_norm=shd_norm(learned, truth),
        precision=precision(learned, truth),
        recall=recall(learned),
    )
