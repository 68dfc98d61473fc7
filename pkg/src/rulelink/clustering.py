"""Redundancy clusters: thresholded BFS over a rule similarity matrix."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .rule_model import Direction, RuleType

# position of each unordered type pair in a threshold vector
_COMBO = {
    frozenset([RuleType.C]): 0,
    frozenset([RuleType.C, RuleType.AC1]): 1,
    frozenset([RuleType.C, RuleType.AC2]): 2,
    frozenset([RuleType.AC1, RuleType.AC2]): 3,
    frozenset([RuleType.AC1]): 4,
    frozenset([RuleType.AC2]): 5,
}

COMBO_NAMES = ("C/C", "C/AC1", "C/AC2", "AC1/AC2", "AC1/AC1", "AC2/AC2")


class Mode(enum.Enum):
    MAXIMUM = "maximum"
    NOISY_OR = "noisy-or"
    MIXED = "mixed"


def type_combo(a, b) -> int:
    """Threshold-vector index for a pair of rules or rule types (symmetric)."""
    ta = getattr(a, "rule_type", a)
    tb = getattr(b, "rule_type", b)
    return _COMBO[frozenset([ta, tb])]


@dataclass(frozen=True)
class ThresholdVector:
    """Six cutoffs ordered C/C, C/AC1, C/AC2, AC1/AC2, AC1/AC1, AC2/AC2."""

    values: tuple[float, ...]
    relation: int = -1
    direction: Direction = Direction.TAIL

    def __post_init__(self):
        if len(self.values) != 6:
            raise ValueError("threshold vector needs 6 components")
        for v in self.values:
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"threshold {v} outside [0, 1]")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @classmethod
    def uniform(cls, t: float, relation: int = -1, direction: Direction = Direction.TAIL):
        return cls((t,) * 6, relation, direction)

    def __getitem__(self, i: int) -> float:
        return self.values[i]


def degenerate_mode(t: ThresholdVector) -> Mode:
    if all(v == 0.0 for v in t.values):
        return Mode.MAXIMUM
    if all(v == 1.0 for v in t.values):
        return Mode.NOISY_OR
    return Mode.MIXED


@dataclass(frozen=True)
class ClusterModel:
    relation: int
    direction: Direction
    clusters: tuple[tuple[int, ...], ...]
    thresholds: ThresholdVector

    def labels(self) -> dict[int, int]:
        """rule id -> cluster index."""
        return {r: c for c, members in enumerate(self.clusters) for r in members}


def _type_codes(types: Sequence[RuleType]) -> np.ndarray:
    return np.array([t.order for t in types], dtype=np.intp)


# combo index by (type order, type order)
_COMBO_TABLE = np.array([
    [0, 1, 2],
    [1, 4, 3],
    [2, 3, 5],
], dtype=np.intp)


def edge_matrix(types: Sequence[RuleType], sims: np.ndarray, t: ThresholdVector) -> np.ndarray:
    """Boolean adjacency: sim(i, j) strictly above the pair's threshold."""
    codes = _type_codes(types)
    cut = np.asarray(t.values)[_COMBO_TABLE[codes[:, None], codes[None, :]]]
    return np.asarray(sims) > cut


def cluster(rule_ids: Sequence[int], types: Sequence[RuleType], sims, t: ThresholdVector) -> ClusterModel:
    """Connected components of the thresholded similarity graph.

    An all-zero vector puts the whole group into one cluster so it behaves
    exactly like Maximum aggregation even where similarities are 0.
    """
    rule_ids = list(rule_ids)
    n = len(rule_ids)
    values = getattr(sims, "values", sims)
    if n and np.shape(values) != (n, n):
        raise ValueError("similarity matrix does not cover the rule group")
    if degenerate_mode(t) is Mode.MAXIMUM:
        groups = [tuple(rule_ids)] if n else []
        return ClusterModel(t.relation, t.direction, tuple(groups), t)
    adj = edge_matrix(types, values, t) if n else np.zeros((0, 0), dtype=bool)
    visited = np.zeros(n, dtype=bool)
    groups = []
    for i in range(n):
        if visited[i]:
            continue
        members = []
        queue = deque([i])
        visited[i] = True
        while queue:
            j = queue.popleft()
            members.append(j)
            for k in np.flatnonzero(adj[j] & ~visited):
                visited[k] = True
                queue.append(int(k))
        groups.append(tuple(rule_ids[m] for m in sorted(members)))
    return ClusterModel(t.relation, t.direction, tuple(groups), t)
