"""Filtered ranking metrics (MRR, Hits@k) under the same-score policies."""

from __future__ import annotations

import enum
import math
import random
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .inference_engine import PredictionTask
from .kg_store import KnowledgeGraph
from .rule_model import Direction

INF = math.inf
HITS_AT = (1, 3, 10)


class TiePolicy(enum.Enum):
    TOP = "top"
    BOTTOM = "bottom"
    AVERAGE = "average"
    ORDINAL = "ordinal"
    RANDOM = "random"


def _entries(ranking) -> Sequence[tuple[int, float]]:
    return getattr(ranking, "entries", ranking)


def rank_of(target: int, ranking, policy: TiePolicy = TiePolicy.AVERAGE,
            rng: Optional[random.Random] = None) -> float:
    """1-based rank of ``target`` in a filtered ranking; ``inf`` when absent.

    Entries with equal scores form one group and the policy decides where in
    its group the target lands.
    """
    entries = _entries(ranking)
    pos = next((i for i, (e, _) in enumerate(entries) if e == target), None)
    if pos is None:
        return INF
    if policy is TiePolicy.ORDINAL:
        return pos + 1
    score = entries[pos][1]
    first = pos
    while first > 0 and entries[first - 1][1] == score:
        first -= 1
    last = pos
    while last + 1 < len(entries) and entries[last + 1][1] == score:
        last += 1
    top, bottom = first + 1, last + 1
    if policy is TiePolicy.TOP:
        return top
    if policy is TiePolicy.BOTTOM:
        return bottom
    if policy is TiePolicy.AVERAGE:
        return (top + bottom) / 2
    rng = rng or random.Random(0)
    return rng.randint(top, bottom)


def mrr(ranks: Sequence[float]) -> float:
    if not ranks:
        raise ValueError("MRR of an empty task set is undefined")
    return sum(0.0 if r == INF else 1.0 / r for r in ranks) / len(ranks)


def hits_at(ranks: Sequence[float], k: int) -> float:
    # rank <= k; a strict bound would make Hits@1 identically zero
    if not ranks:
        raise ValueError("Hits@k of an empty task set is undefined")
    return sum(1 for r in ranks if r <= k) / len(ranks)


def build_filter(task: PredictionTask, splits: Iterable[KnowledgeGraph]) -> frozenset[int]:
    """Every known answer for the task slot across ``splits``, minus the target."""
    known: set[int] = set()
    for g in splits:
        if task.direction is Direction.TAIL:
            known |= g.index_hr.get((task.known, task.relation), frozenset())
        else:
            known |= g.index_tr.get((task.known, task.relation), frozenset())
    known.discard(task.target)
    return frozenset(known)


def tasks_for(triples: Iterable[tuple[int, int, int]], splits: Sequence[KnowledgeGraph],
              directions: Sequence[Direction] = (Direction.HEAD, Direction.TAIL)) -> list[PredictionTask]:
    """Filtered head and tail tasks for every triple, in triple order."""
    out = []
    for tr in triples:
        for d in directions:
            task = PredictionTask.from_triple(tr, d)
            out.append(PredictionTask(task.known, task.relation, d, task.target,
                                      build_filter(task, splits)))
    return out


def task_rng(seed: int, index: int) -> random.Random:
    return random.Random(seed * 7_919_317 + index)


@dataclass
class Metrics:
    mrr: float
    hits: dict[int, float]
    count: int

    @classmethod
    def of(cls, ranks: Sequence[float]) -> "Metrics":
        return cls(mrr(ranks), {k: hits_at(ranks, k) for k in HITS_AT}, len(ranks))


@dataclass
class EvalReport:
    """Metrics per tie policy, overall and broken down by relation and direction."""

    overall: dict[TiePolicy, Metrics]
    by_direction: dict[TiePolicy, dict[str, Metrics]] = field(default_factory=dict)
    by_relation: dict[TiePolicy, dict[str, Metrics]] = field(default_factory=dict)
    tasks: int = 0

    def as_text(self) -> str:
        lines = [f"tasks: {self.tasks}", ""]
        header = f"{'policy':<10}{'scope':<40}{'MRR':>9}{'H@1':>9}{'H@3':>9}{'H@10':>9}{'n':>8}"
        lines.append(header)
        lines.append("-" * len(header))

        def row(policy, scope, m: Metrics):
            return (f"{policy.value:<10}{scope[:39]:<40}{m.mrr:>9.4f}{m.hits[1]:>9.4f}"
                    f"{m.hits[3]:>9.4f}{m.hits[10]:>9.4f}{m.count:>8}")

        for policy, m in self.overall.items():
            lines.append(row(policy, "all", m))
            for scope, dm in sorted(self.by_direction.get(policy, {}).items()):
                lines.append(row(policy, f"direction={scope}", dm))
            for scope, rm in sorted(self.by_relation.get(policy, {}).items()):
                lines.append(row(policy, f"relation={scope}", rm))
        return "\n".join(lines) + "\n"

    def as_keyvalue(self) -> str:
        out = [f"tasks={self.tasks}"]

        def emit(prefix: str, m: Metrics):
            out.append(f"{prefix}.mrr={m.mrr!r}")
            for k in HITS_AT:
                out.append(f"{prefix}.hits@{k}={m.hits[k]!r}")
            out.append(f"{prefix}.n={m.count}")

        for policy, m in self.overall.items():
            emit(policy.value, m)
            for scope, dm in sorted(self.by_direction.get(policy, {}).items()):
                emit(f"{policy.value}.direction.{scope}", dm)
            for scope, rm in sorted(self.by_relation.get(policy, {}).items()):
                emit(f"{policy.value}.relation.{scope}", rm)
        return "\n".join(out) + "\n"


def evaluate(rankings: Sequence[tuple[PredictionTask, object]],
             policies: Sequence[TiePolicy] = (TiePolicy.AVERAGE,),
             relation_names: Optional[Mapping[int, str]] = None,
             seed: int = 0) -> EvalReport:
    """Score ``(task, ranking)`` pairs; filtered entities are dropped from rankings first."""
    if not rankings:
        raise ValueError("no prediction tasks to evaluate")
    report = EvalReport({}, {}, {}, len(rankings))
    for policy in policies:
        ranks, by_dir, by_rel = [], defaultdict(list), defaultdict(list)
        for i, (task, ranking) in enumerate(rankings):
            entries = [(e, s) for e, s in _entries(ranking) if e not in task.filter]
            r = rank_of(task.target, entries, policy, task_rng(seed, i))
            ranks.append(r)
            by_dir[task.direction.label].append(r)
            name = relation_names[task.relation] if relation_names else str(task.relation)
            by_rel[name].append(r)
        report.overall[policy] = Metrics.of(ranks)
        report.by_direction[policy] = {k: Metrics.of(v) for k, v in by_dir.items()}
        report.by_relation[policy] = {k: Metrics.of(v) for k, v in by_rel.items()}
    return report
