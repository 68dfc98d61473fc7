"""Applying a rule set to a split and reading/writing prediction files."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from ._parallel import parallel_map
from .aggregation import DEFAULT_TOP_K, CandidateRanking, Strategy, rank
from .clustering import ClusterModel
from .inference_engine import DEFAULT_CAP, PredictionTask, fire_rules
from .kg_store import KnowledgeGraph, Triple, Vocabulary
from .rule_model import Direction, RuleSet


@dataclass
class TriplePrediction:
    triple: Triple
    heads: list[tuple[int, float]]
    tails: list[tuple[int, float]]

    def ranking(self, direction: Direction) -> list[tuple[int, float]]:
        return self.heads if direction is Direction.HEAD else self.tails


def predict_task(task: PredictionTask, rules: RuleSet, graph: KnowledgeGraph,
                 strategies: Mapping[tuple[int, Direction], Strategy], default: Strategy,
                 models: Mapping[tuple[int, Direction], ClusterModel],
                 k: int = DEFAULT_TOP_K, cap: Optional[int] = DEFAULT_CAP) -> CandidateRanking:
    key = (task.relation, task.direction)
    strategy = strategies.get(key, default)
    fired = fire_rules(rules, task, graph, cap)
    return rank(fired, rules, strategy, models.get(key), k)


def predict_split(triples: Sequence[Triple], tasks_by_triple: Sequence[tuple[PredictionTask, PredictionTask]],
                  rules: RuleSet, graph: KnowledgeGraph,
                  strategies: Mapping[tuple[int, Direction], Strategy], default: Strategy,
                  models: Mapping[tuple[int, Direction], ClusterModel],
                  k: int = DEFAULT_TOP_K, cap: Optional[int] = DEFAULT_CAP,
                  threads: int = 1) -> list[TriplePrediction]:
    """Head and tail rankings for every triple; ``tasks_by_triple`` holds (head task, tail task)."""

    def one(i: int) -> TriplePrediction:
        head_task, tail_task = tasks_by_triple[i]
        heads = predict_task(head_task, rules, graph, strategies, default, models, k, cap)
        tails = predict_task(tail_task, rules, graph, strategies, default, models, k, cap)
        return TriplePrediction(triples[i], heads.entries, tails.entries)

    return parallel_map(one, range(len(triples)), threads)


def _fmt_entries(entries, vocab: Vocabulary) -> str:
    return "\t".join(f"{vocab.entities.name(e)}\t{s!r}" for e, s in entries)


def write_predictions(path, predictions: Sequence[TriplePrediction], vocab: Vocabulary,
                      header: str = "") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header)
        for p in predictions:
            h, r, t = vocab.decode(p.triple)
            fh.write(f"{h}\t{r}\t{t}\n")
            fh.write(f"Heads: {_fmt_entries(p.heads, vocab)}\n")
            fh.write(f"Tails: {_fmt_entries(p.tails, vocab)}\n")


def _parse_entries(text: str, vocab: Vocabulary) -> list[tuple[int, float]]:
    fields = text.split("\t") if text else []
    if len(fields) % 2:
        raise ValueError("odd number of fields in a candidate line")
    return [(vocab.entities.id(fields[i]), float(fields[i + 1])) for i in range(0, len(fields), 2)]


def read_predictions(path, vocab: Vocabulary) -> list[TriplePrediction]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\r\n") for ln in fh if not ln.startswith("#")]
    lines = [ln for ln in lines if ln]
    if len(lines) % 3:
        raise ValueError(f"{path}: expected 3 lines per triple")
    out = []
    for i in range(0, len(lines), 3):
        parts = lines[i].split("\t")
        if len(parts) != 3:
            raise ValueError(f"{path}: bad triple line {lines[i]!r}")
        triple = (vocab.entities.id(parts[0]), vocab.relations.id(parts[1]), vocab.entities.id(parts[2]))
        head_line, tail_line = lines[i + 1], lines[i + 2]
        if not head_line.startswith("Heads:") or not tail_line.startswith("Tails:"):
            raise ValueError(f"{path}: missing Heads:/Tails: lines after {lines[i]!r}")
        out.append(TriplePrediction(triple, _parse_entries(head_line[6:].strip(" "), vocab),
                                    _parse_entries(tail_line[6:].strip(" "), vocab)))
    return out
