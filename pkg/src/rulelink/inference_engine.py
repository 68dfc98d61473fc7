"""Grounding rule bodies: inferred head sets, confidences and task candidates."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .kg_store import KnowledgeGraph, Triple
from .rule_model import Chain, Direction, Rule, RuleSet, RuleType, Step

logger = logging.getLogger(__name__)

DEFAULT_CAP = 100_000

_NONE: frozenset[int] = frozenset()


class ContractViolation(ValueError):
    pass


class UndefinedConfidence(ValueError):
    """The rule infers nothing on the graph."""


@dataclass(frozen=True)
class InferredSet:
    rule_id: Optional[int]
    triples: frozenset[Triple]
    approximate: bool = False

    def __len__(self) -> int:
        return len(self.triples)


@dataclass(frozen=True)
class PredictionTask:
    """A query ``(known, relation, ?)`` or ``(?, relation, known)``.

    ``direction`` names the slot to predict; ``filter`` holds the other
    known answers for that slot and never contains ``target``.
    """

    known: int
    relation: int
    direction: Direction
    target: Optional[int] = None
    filter: frozenset[int] = field(default=frozenset(), compare=False)

    def __post_init__(self):
        if self.target is not None and self.target in self.filter:
            raise ContractViolation("target inside the filter set")

    @classmethod
    def from_triple(cls, triple: Triple, direction: Direction,
                    filter: Iterable[int] = ()) -> "PredictionTask":
        h, r, t = triple
        if direction is Direction.TAIL:
            return cls(h, r, direction, t, frozenset(filter) - {t})
        return cls(t, r, direction, h, frozenset(filter) - {h})

    def triple_for(self, entity: int) -> Triple:
        if self.direction is Direction.TAIL:
            return (self.known, self.relation, entity)
        return (entity, self.relation, self.known)


class _Budget:
    __slots__ = ("left", "tripped")

    def __init__(self, cap: Optional[int]):
        self.left = cap if cap is not None else -1
        self.tripped = False

    def spend(self, n: int) -> bool:
        if self.left < 0:
            return True
        self.left -= n
        if self.left < 0:
            self.left = 0
            self.tripped = True
            return False
        return True


def _neighbours(g: KnowledgeGraph, entity: int, step: Step) -> frozenset[int]:
    rel, forward = step
    if forward:
        return g.index_hr.get((entity, rel), _NONE)
    return g.index_tr.get((entity, rel), _NONE)


def _walk(g: KnowledgeGraph, frontier: Iterable[int], steps: Iterable[Step],
          budget: _Budget) -> set[int]:
    """Entities reachable from ``frontier`` along ``steps`` (existential chain)."""
    current = set(frontier)
    for step in steps:
        nxt: set[int] = set()
        for e in sorted(current):
            adj = _neighbours(g, e, step)
            if not budget.spend(len(adj) or 1):
                return nxt
            nxt |= adj
        current = nxt
        if not current:
            break
    return current


def _step_domain(g: KnowledgeGraph, step: Step) -> frozenset[int]:
    """Entities from which ``step`` can be taken."""
    rel, forward = step
    return (g.subjects if forward else g.objects).get(rel, _NONE)


def _sources(g: KnowledgeGraph, chain: Chain, budget: _Budget) -> set[int]:
    """Bindings of the head variable for which the AC body holds."""
    back = chain.reversed_steps()
    if chain.terminal is not None:
        return _walk(g, [chain.terminal], back, budget)
    return _walk(g, _step_domain(g, chain.steps[-1]), back[1:], budget)


def _body_holds(g: KnowledgeGraph, chain: Chain, entity: int, budget: _Budget) -> bool:
    reach = _walk(g, [entity], chain.steps, budget)
    if chain.terminal is not None:
        return chain.terminal in reach
    return bool(reach)


def infer_heads(rule: Rule, g: KnowledgeGraph, cap: Optional[int] = None,
                rule_id: Optional[int] = None) -> InferredSet:
    """All head triples derivable from the rule body over ``g``."""
    budget = _Budget(cap)
    chain = rule.chain
    rel = rule.relation
    triples: set[Triple] = set()
    if rule.rule_type is RuleType.C:
        for x in sorted(_step_domain(g, chain.steps[0])):
            for y in _walk(g, [x], chain.steps, budget):
                triples.add((x, rel, y))
            if budget.tripped:
                break
    else:
        c0 = chain.head_constant
        for x in _sources(g, chain, budget):
            triples.add((x, rel, c0) if chain.var_slot == 0 else (c0, rel, x))
    if budget.tripped:
        logger.warning("grounding cap %s reached for rule %s; inferred set is partial", cap, rule_id)
    return InferredSet(rule_id, frozenset(triples), budget.tripped)


@dataclass(frozen=True)
class ConfidenceResult:
    confidence: float
    predicted: int
    correct: int


def confidence(rule: Rule, g_train: KnowledgeGraph, cap: Optional[int] = None) -> ConfidenceResult:
    """``|H ∩ T| / |H|`` for the inferred set H over the training triples T."""
    inferred = infer_heads(rule, g_train, cap).triples
    if not inferred:
        raise UndefinedConfidence("rule infers no triples")
    correct = sum(1 for tr in inferred if tr in g_train.triples)
    return ConfidenceResult(correct / len(inferred), len(inferred), correct)


def score_rule(rule: Rule, g_train: KnowledgeGraph, cap: Optional[int] = None) -> Optional[Rule]:
    """Rule with recomputed stats, or None (logged) when it never fires."""
    try:
        res = confidence(rule, g_train, cap)
    except UndefinedConfidence:
        logger.warning("dropping rule with empty inferred set: %s", rule)
        return None
    return rule.with_stats(res.confidence, res.predicted, res.correct)


def candidates(rule: Rule, task: PredictionTask, g: KnowledgeGraph,
               cap: Optional[int] = DEFAULT_CAP) -> set[int]:
    """Entities y such that the task triple filled with y is in the rule's inferred set.

    Grounds from the known entity instead of materialising the inferred set.
    """
    if rule.relation != task.relation:
        raise ContractViolation(
            f"rule head relation {rule.relation} does not match task relation {task.relation}")
    if task.direction not in rule.directions():
        raise ContractViolation(f"rule does not answer direction {task.direction.name}")
    chain = rule.chain
    predict = int(task.direction)
    budget = _Budget(cap)
    if rule.rule_type is RuleType.C:
        # chain runs from head slot 0 to head slot 1
        if predict == 1:
            out = _walk(g, [task.known], chain.steps, budget)
        else:
            out = _walk(g, [task.known], chain.reversed_steps(), budget)
    elif predict == chain.var_slot:
        out = _sources(g, chain, budget) if task.known == chain.head_constant else set()
    else:
        out = {chain.head_constant} if _body_holds(g, chain, task.known, budget) else set()
    if budget.tripped:
        logger.warning("grounding cap %s reached for task %s; candidates are partial", cap, task)
    return out


def fire_rules(rules: RuleSet, task: PredictionTask, g: KnowledgeGraph,
               cap: Optional[int] = DEFAULT_CAP) -> dict[int, list[int]]:
    """entity -> ids of the rules predicting it, with filtered entities removed."""
    fired: dict[int, list[int]] = {}
    for rid in rules.group(task.relation, task.direction):
        for e in candidates(rules[rid], task, g, cap):
            if e in task.filter:
                continue
            fired.setdefault(e, []).append(rid)
    return fired
