"""Per (relation, direction) threshold learning on validation tasks."""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from ._parallel import parallel_map
from .aggregation import DEFAULT_TOP_K, Strategy, rank
from .clustering import ClusterModel, ThresholdVector, cluster
from .evaluation import TiePolicy, mrr, rank_of
from .inference_engine import DEFAULT_CAP, PredictionTask, fire_rules
from .kg_store import KnowledgeGraph, Vocabulary
from .rule_model import Direction, RuleSet
from .similarity import SimilarityMatrix, estimated_matrix

logger = logging.getLogger(__name__)


class NoValidationTasks(ValueError):
    pass


@dataclass
class SearchContext:
    """Everything a fitness evaluation needs for one (relation, direction).

    ``fired`` holds, per validation task, entity -> ids of rules predicting
    it (already filtered), so candidate vectors only re-cluster and re-score.
    """

    relation: int
    direction: Direction
    rules: RuleSet
    sims: SimilarityMatrix
    tasks: list[PredictionTask]
    fired: list[dict[int, list[int]]]
    k: int = DEFAULT_TOP_K

    @property
    def rule_ids(self) -> list[int]:
        return self.sims.rule_ids

    @property
    def types(self):
        return [self.rules[r].rule_type for r in self.rule_ids]

    def vector(self, values) -> ThresholdVector:
        return ThresholdVector(tuple(values), self.relation, self.direction)


def build_context(relation: int, direction: Direction, rules: RuleSet, sims: SimilarityMatrix,
                  tasks: Sequence[PredictionTask], graph: KnowledgeGraph,
                  k: int = DEFAULT_TOP_K, cap: Optional[int] = DEFAULT_CAP) -> SearchContext:
    tasks = [t for t in tasks if t.relation == relation and t.direction is direction]
    fired = [fire_rules(rules, t, graph, cap) for t in tasks]
    return SearchContext(relation, direction, rules, sims, tasks, fired, k)


def cluster_for(ctx: SearchContext, t: ThresholdVector) -> ClusterModel:
    return cluster(ctx.rule_ids, ctx.types, ctx.sims.values, t)


def fitness(ctx: SearchContext, t: ThresholdVector) -> float:
    """Validation MRR (average policy, top-k lists) of NRNO with thresholds ``t``."""
    if not ctx.tasks:
        raise NoValidationTasks(f"no validation tasks for relation {ctx.relation}")
    model = cluster_for(ctx, t)
    ranks = []
    for task, fired in zip(ctx.tasks, ctx.fired):
        ranking = rank(fired, ctx.rules, Strategy.NRNO, model, ctx.k)
        ranks.append(rank_of(task.target, ranking, TiePolicy.AVERAGE))
    return mrr(ranks)


def strategy_mrr(ctx: SearchContext, strategy: Strategy) -> float:
    if not ctx.tasks:
        raise NoValidationTasks(f"no validation tasks for relation {ctx.relation}")
    ranks = [rank_of(task.target, rank(fired, ctx.rules, strategy, None, ctx.k), TiePolicy.AVERAGE)
             for task, fired in zip(ctx.tasks, ctx.fired)]
    return mrr(ranks)


@dataclass
class SearchResult:
    thresholds: ThresholdVector
    fitness: Optional[float]
    trace: list[float] = field(default_factory=list, repr=False)


def _better(fit: float, values: tuple, best_fit: float, best_values: tuple) -> bool:
    return fit > best_fit or (fit == best_fit and values < best_values)


def grid_candidates(n: int) -> list[float]:
    if n < 1:
        raise ValueError("grid needs at least one step")
    return [i / n for i in range(n + 1)]


def grid_search(ctx: SearchContext, n: int = 200) -> SearchResult:
    """Best uniform vector [t]*6 for t in {0, 1/n, ..., 1}; ties go to the smaller t."""
    if not ctx.tasks:
        return SearchResult(ctx.vector((0.0,) * 6), None)
    best, best_fit, trace = None, -math.inf, []
    for t in grid_candidates(n):
        vec = ctx.vector((t,) * 6)
        fit = fitness(ctx, vec)
        if best is None or _better(fit, vec.values, best_fit, best.values):
            best, best_fit = vec, fit
        trace.append(best_fit)
    return SearchResult(best, best_fit, trace)


def pair_seed(seed: int, relation: int, direction: Direction) -> int:
    return (seed * 1_000_003 + relation) * 2 + int(direction)


def random_search(ctx: SearchContext, levels: int = 10, iterations: int = 10_000,
                  seed: int = 0, continuous: bool = False) -> SearchResult:
    """Sample six type-pair thresholds per iteration, keep the best by fitness.

    The all-zeros and all-ones vectors are always evaluated first. Components
    come from the lattice {0, 1/levels, ..., 1}, or U[0, 1] with ``continuous``.
    """
    if not ctx.tasks:
        return SearchResult(ctx.vector((0.0,) * 6), None)
    rng = random.Random(pair_seed(seed, ctx.relation, ctx.direction))
    best, best_fit, trace = None, -math.inf, []
    seen: dict[tuple, float] = {}

    def consider(values: tuple):
        nonlocal best, best_fit
        fit = seen.get(values)
        if fit is None:
            fit = seen[values] = fitness(ctx, ctx.vector(values))
        if best is None or _better(fit, values, best_fit, best.values):
            best, best_fit = ctx.vector(values), fit
        trace.append(best_fit)

    consider((0.0,) * 6)
    consider((1.0,) * 6)
    for _ in range(iterations):
        if continuous:
            values = tuple(rng.random() for _ in range(6))
        else:
            values = tuple(rng.randint(0, levels) / levels for _ in range(6))
        consider(values)
    return SearchResult(best, best_fit, trace)


# -- whole rule set ----------------------------------------------------------

def relation_matrices(rules: RuleSet, signatures, k: int, threads: int = 1) -> dict[int, SimilarityMatrix]:
    """One estimated similarity matrix per head relation."""
    out = {}
    for rel in rules.relations():
        ids = sorted({r for d in Direction for r in rules.group(rel, d)})
        values = estimated_matrix([signatures[i] for i in ids], k, threads)
        out[rel] = SimilarityMatrix(rel, None, ids, values)
    return out


def contexts(rules: RuleSet, matrices: Optional[Mapping[int, SimilarityMatrix]], tasks: Sequence[PredictionTask],
             graph: KnowledgeGraph, k: int = DEFAULT_TOP_K, cap: Optional[int] = DEFAULT_CAP,
             threads: int = 1) -> dict[tuple[int, Direction], SearchContext]:
    by_pair: dict[tuple[int, Direction], list[PredictionTask]] = {}
    for t in tasks:
        by_pair.setdefault((t.relation, t.direction), []).append(t)
    keys = rules.keys()

    def build(key):
        rel, d = key
        ids = rules.group(rel, d)
        if matrices is None:
            # Maximum / Noisy-OR only: similarities are never consulted
            sims = SimilarityMatrix(rel, d, list(ids), np.eye(len(ids)))
        else:
            sims = matrices[rel].subset(ids, d)
        return build_context(rel, d, rules, sims, by_pair.get(key, []), graph, k, cap)

    return dict(zip(keys, parallel_map(build, keys, threads)))


def learn_thresholds(ctxs: Mapping[tuple[int, Direction], SearchContext], strategy: str = "random",
                     grid_steps: int = 200, levels: int = 10, iterations: int = 10_000, seed: int = 0,
                     continuous: bool = False, threads: int = 1) -> dict[tuple[int, Direction], SearchResult]:
    keys = sorted(ctxs)

    def run(key):
        ctx = ctxs[key]
        if strategy == "grid":
            return grid_search(ctx, grid_steps)
        if strategy == "random":
            return random_search(ctx, levels, iterations, seed, continuous)
        raise ValueError(f"unknown search strategy {strategy!r}")

    return dict(zip(keys, parallel_map(run, keys, threads)))


def validation_mrrs(ctxs: Mapping[tuple[int, Direction], SearchContext]) -> dict[tuple[int, Direction], tuple[float, float]]:
    """(Maximum MRR, Noisy-OR MRR) for every pair that has validation tasks."""
    return {key: (strategy_mrr(ctx, Strategy.MAX), strategy_mrr(ctx, Strategy.NOISY_OR))
            for key, ctx in sorted(ctxs.items()) if ctx.tasks}


# -- files -------------------------------------------------------------------

def write_thresholds(path, results: Mapping[tuple[int, Direction], SearchResult], vocab: Vocabulary,
                     header: str = "") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header)
        for (rel, d), res in sorted(results.items()):
            vals = " ".join(repr(v) for v in res.thresholds.values)
            fit = "nan" if res.fitness is None else repr(res.fitness)
            fh.write(f"{vocab.relations.name(rel)}\t{d.label}\t{vals}\t{fit}\n")


def read_thresholds(path, vocab: Vocabulary) -> dict[tuple[int, Direction], tuple[ThresholdVector, Optional[float]]]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 tab-separated fields")
            rel = vocab.relations.id(fields[0])
            d = Direction.parse(fields[1])
            vals = tuple(float(x) for x in fields[2].split())
            fit = float(fields[3])
            out[rel, d] = (ThresholdVector(vals, rel, d), None if math.isnan(fit) else fit)
    return out


def write_clusters(path, models: Sequence[ClusterModel], vocab: Vocabulary, header: str = "") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header)
        for m in sorted(models, key=lambda m: (m.relation, m.direction)):
            for cid, members in enumerate(m.clusters):
                for r in members:
                    fh.write(f"{vocab.relations.name(m.relation)}\t{m.direction.label}\t{cid}\t{r}\n")
