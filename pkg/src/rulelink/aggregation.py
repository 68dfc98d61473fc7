"""Candidate scoring: Maximum, Noisy-OR, Non-redundant Noisy-OR and the VS selector."""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .clustering import ClusterModel, Mode, degenerate_mode
from .rule_model import Direction, RuleSet

DEFAULT_TOP_K = 100


class Strategy(enum.Enum):
    MAX = "max"
    NOISY_OR = "noisyor"
    NRNO = "nrno"
    VS = "vs"


@dataclass
class CandidateRanking:
    """Candidates ordered by score, best first.

    ``keys`` holds the full ordering key of each entry; for Maximum it is the
    descending confidence sequence, otherwise the score itself.
    """

    entries: list[tuple[int, float]]
    strategy: Strategy
    k: int = DEFAULT_TOP_K
    keys: list = field(default_factory=list, repr=False)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def entities(self) -> list[int]:
        return [e for e, _ in self.entries]

    def scores(self) -> dict[int, float]:
        return dict(self.entries)

    def top(self) -> Optional[tuple[int, float]]:
        return self.entries[0] if self.entries else None


def noisy_or(confidences) -> float:
    """1 - prod(1 - c), accumulated as s + (1 - s) * c in descending order.

    This form never drops below the largest confidence in floating point, and
    the fixed order makes equal multisets agree bit for bit.
    """
    score = 0.0
    for c in sorted(confidences, reverse=True):
        score = min(1.0, score + (1.0 - score) * c)
    return score


def _top(scored: list[tuple], k: Optional[int]) -> list[tuple]:
    # scored items are (sort key, entity, score); best = largest key, then smallest entity
    order = lambda item: (item[0], -item[1])  # noqa: E731
    if k is None or k >= len(scored):
        return sorted(scored, key=order, reverse=True)
    return heapq.nlargest(k, scored, key=order)


def _ranking(scored, strategy: Strategy, k: Optional[int]) -> CandidateRanking:
    best = _top(scored, k)
    return CandidateRanking([(e, s) for _, e, s in best], strategy,
                            k if k is not None else len(scored), [key for key, _, _ in best])


def aggregate_max(firings: Mapping[int, Sequence[float]], k: Optional[int] = DEFAULT_TOP_K) -> CandidateRanking:
    """Rank by the best confidence, breaking ties with the next best and so on."""
    scored = []
    for e, confs in firings.items():
        seq = tuple(sorted(confs, reverse=True))
        if seq:
            scored.append((seq, e, seq[0]))
    return _ranking(scored, Strategy.MAX, k)


def aggregate_noisy_or(firings: Mapping[int, Sequence[float]], k: Optional[int] = DEFAULT_TOP_K) -> CandidateRanking:
    scored = []
    for e, confs in firings.items():
        if confs:
            s = noisy_or(confs)
            scored.append((s, e, s))
    return _ranking(scored, Strategy.NOISY_OR, k)


def aggregate_nrno(cluster_firings: Mapping[int, Mapping[int, Sequence[float]]],
                   k: Optional[int] = DEFAULT_TOP_K) -> CandidateRanking:
    """Maximum inside each cluster, Noisy-OR across clusters.

    ``cluster_firings`` maps entity -> cluster id -> confidences of the
    cluster's rules that predicted the entity.
    """
    scored = []
    for e, per_cluster in cluster_firings.items():
        maxima = [max(confs) for confs in per_cluster.values() if confs]
        if maxima:
            s = noisy_or(maxima)
            scored.append((s, e, s))
    return _ranking(scored, Strategy.NRNO, k)


def confidence_firings(fired: Mapping[int, Sequence[int]], rules: RuleSet) -> dict[int, list[float]]:
    """entity -> rule ids  ==>  entity -> confidences."""
    return {e: [rules[r].confidence for r in rids] for e, rids in fired.items()}


def cluster_firings(fired: Mapping[int, Sequence[int]], rules: RuleSet,
                    model: ClusterModel) -> dict[int, dict[int, list[float]]]:
    labels = model.labels()
    out: dict[int, dict[int, list[float]]] = {}
    for e, rids in fired.items():
        per = out.setdefault(e, {})
        for r in rids:
            per.setdefault(labels[r], []).append(rules[r].confidence)
    return out


def rank(fired: Mapping[int, Sequence[int]], rules: RuleSet, strategy: Strategy,
         model: Optional[ClusterModel] = None, k: Optional[int] = DEFAULT_TOP_K) -> CandidateRanking:
    """Rank one task's firings (entity -> rule ids) with a concrete strategy.

    NRNO with an all-zero threshold vector, or without a cluster model, is
    plain Maximum aggregation.
    """
    if strategy is Strategy.NRNO:
        if model is None or degenerate_mode(model.thresholds) is Mode.MAXIMUM:
            return aggregate_max(confidence_firings(fired, rules), k)
        return aggregate_nrno(cluster_firings(fired, rules, model), k)
    if strategy is Strategy.MAX:
        return aggregate_max(confidence_firings(fired, rules), k)
    if strategy is Strategy.NOISY_OR:
        return aggregate_noisy_or(confidence_firings(fired, rules), k)
    raise ValueError(f"strategy {strategy} needs a per-relation selection first")


def select_vs(validation: Mapping[tuple[int, Direction], tuple[float, float]],
              keys: Sequence[tuple[int, Direction]] = ()) -> dict[tuple[int, Direction], Strategy]:
    """Per (relation, direction): Noisy-OR if its validation MRR beats Maximum.

    ``validation`` maps a pair to ``(max_mrr, noisy_or_mrr)``. Ties, and pairs
    listed in ``keys`` without validation results, use Maximum.
    """
    out = {key: Strategy.MAX for key in keys}
    for key, (max_mrr, no_mrr) in validation.items():
        out[key] = Strategy.NOISY_OR if no_mrr > max_mrr else Strategy.MAX
    return out
