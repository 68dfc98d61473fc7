"""Command line pipeline: mine -> calc-sims -> search -> apply -> eval.

All stages read one ``key = value`` config file; relative paths resolve
against the config file's directory.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import __version__
from ._parallel import parallel_map, resolve_threads
from .aggregation import Strategy, select_vs
from .application import predict_split, read_predictions, write_predictions
from .clustering import cluster
from .evaluation import TiePolicy, build_filter, evaluate, tasks_for
from .inference_engine import PredictionTask, infer_heads
from .kg_store import Dataset
from .miner import MinerConfig, mine
from .rule_model import Direction, RuleSet, load_ruleset, save_ruleset
from .search import contexts, learn_thresholds, read_thresholds, relation_matrices, validation_mrrs, \
    write_clusters, write_thresholds
from .similarity import UndefinedSimilarity, load_signatures, make_seeds, save_signatures, signature

logger = logging.getLogger("rulelink")

DEFAULTS = {
    "seed": "0",
    "threads": "1",
    "top_k": "100",
    "minhash_k": "256",
    "cap": "100000",
    "apply_graph": "train",
    "miner_iterations": "0",
    "miner_seconds": "60",
    "max_len_cyclic": "3",
    "max_len_acyclic": "1",
    "reflexive": "false",
    "min_support": "2",
    "min_confidence": "0.0001",
    "search": "random",
    "grid_steps": "200",
    "random_levels": "10",
    "random_iterations": "10000",
    "random_continuous": "false",
    "aggregation": "nrno",
    "policies": "average",
    "split": "test",
}

PATH_KEYS = ("train", "valid", "test", "rules", "signatures", "thresholds", "clusters",
             "predictions", "report")

# keys that may change without changing any output
_UNHASHED = {"threads"}


class PipelineError(RuntimeError):
    pass


@dataclass
class Config:
    values: dict
    base: Path

    @classmethod
    def load(cls, path) -> "Config":
        path = Path(path)
        values = dict(DEFAULTS)
        if not path.exists():
            raise PipelineError(f"config file {path} not found")
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise PipelineError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key] = value
        return cls(values, path.parent)

    def get(self, key: str) -> str:
        return self.values[key]

    def int(self, key: str) -> int:
        return int(self.values[key])

    def float(self, key: str) -> float:
        return float(self.values[key])

    def bool(self, key: str) -> bool:
        return self.values[key].lower() in ("1", "true", "yes", "on")

    def path(self, key: str) -> Optional[Path]:
        value = self.values.get(key)
        if not value:
            return None
        p = Path(value)
        return p if p.is_absolute() else self.base / p

    def digest(self) -> str:
        text = "\n".join(f"{k}={v}" for k, v in sorted(self.values.items()) if k not in _UNHASHED)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]

    def header(self, stage: str, **extra) -> str:
        parts = [f"rulelink {__version__}", f"stage={stage}", f"config={self.digest()}",
                 f"seed={self.get('seed')}"]
        parts += [f"{k}={v}" for k, v in extra.items()]
        return "# " + " ".join(parts) + "\n"


def _require(cfg: Config, key: str, producer: Optional[str] = None) -> Path:
    p = cfg.path(key)
    if p is None:
        raise PipelineError(f"config key '{key}' is not set")
    if producer and not p.exists():
        raise PipelineError(f"{key} file {p} is missing; run `rulelink {producer}` first")
    if not producer and not p.exists():
        raise PipelineError(f"{key} file {p} not found")
    return p


def _dataset(cfg: Config) -> Dataset:
    return Dataset.load(_require(cfg, "train"), cfg.path("valid"), cfg.path("test"))


def _rules(cfg: Config, ds: Dataset) -> RuleSet:
    return load_ruleset(_require(cfg, "rules", "mine"), ds.vocab)


def _file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()[:16]


def _cap(cfg: Config) -> Optional[int]:
    cap = cfg.int("cap")
    return cap if cap > 0 else None


# -- stages ------------------------------------------------------------------

def cmd_mine(cfg: Config) -> None:
    ds = _dataset(cfg)
    mcfg = MinerConfig(
        max_len_cyclic=cfg.int("max_len_cyclic"), max_len_acyclic=cfg.int("max_len_acyclic"),
        allow_reflexive=cfg.bool("reflexive"), min_support=cfg.int("min_support"),
        min_confidence=cfg.float("min_confidence"), seed=cfg.int("seed"),
        threads=resolve_threads(cfg.int("threads")), cap=_cap(cfg))
    iterations = cfg.int("miner_iterations")
    if iterations > 0:
        rules = mine(ds.train, config=mcfg, iterations=iterations)
    else:
        rules = mine(ds.train, budget=cfg.float("miner_seconds"), config=mcfg)
    out = cfg.path("rules")
    if out is None:
        raise PipelineError("config key 'rules' is not set")
    save_ruleset(rules, out, ds.vocab, cfg.header("mine"))
    logger.info("wrote %d rules to %s", len(rules), out)


def cmd_calc_sims(cfg: Config) -> None:
    ds = _dataset(cfg)
    rules_path = _require(cfg, "rules", "mine")
    rules = load_ruleset(rules_path, ds.vocab)
    k, seed = cfg.int("minhash_k"), cfg.int("seed")
    cap = _cap(cfg)
    seeds = make_seeds(k, seed)

    def sig(i: int):
        inferred = infer_heads(rules[i], ds.train, cap, i).triples
        try:
            return signature(inferred, k, seed, i, seeds)
        except UndefinedSimilarity:
            logger.info("rule %d infers nothing on train; left out of clustering", i)
            return None

    sigs = parallel_map(sig, range(len(rules)), resolve_threads(cfg.int("threads")))
    out = cfg.path("signatures")
    if out is None:
        raise PipelineError("config key 'signatures' is not set")
    save_signatures(out, sigs, k, seed, cfg.header("calc-sims", k=k), _file_digest(rules_path))
    logger.info("wrote %d signatures to %s", sum(s is not None for s in sigs), out)


def _load_sigs(cfg: Config, rules: RuleSet):
    path = _require(cfg, "signatures", "calc-sims")
    sigs, k, _, digest = load_signatures(path)
    if digest != _file_digest(_require(cfg, "rules", "mine")) or len(sigs) != len(rules):
        raise PipelineError(f"{path} was built from a different rule file; run `rulelink calc-sims` again")
    return sigs, k


def _tasks(ds: Dataset, split: str) -> list[PredictionTask]:
    return tasks_for(sorted(ds.split(split).triples), ds.known())


def cmd_search(cfg: Config, strategy: Optional[str] = None) -> None:
    ds = _dataset(cfg)
    rules = _rules(cfg, ds)
    sigs, k = _load_sigs(cfg, rules)
    threads = resolve_threads(cfg.int("threads"))
    matrices = relation_matrices(rules, sigs, k, threads)
    graph = ds.application_graph(cfg.get("apply_graph"))
    ctxs = contexts(rules, matrices, _tasks(ds, "valid"), graph, cfg.int("top_k"), _cap(cfg), threads)
    strategy = strategy or cfg.get("search")
    results = learn_thresholds(
        ctxs, strategy, grid_steps=cfg.int("grid_steps"), levels=cfg.int("random_levels"),
        iterations=cfg.int("random_iterations"), seed=cfg.int("seed"),
        continuous=cfg.bool("random_continuous"), threads=threads)
    out = cfg.path("thresholds")
    if out is None:
        raise PipelineError("config key 'thresholds' is not set")
    write_thresholds(out, results, ds.vocab, cfg.header("search", strategy=strategy))
    clusters_path = cfg.path("clusters")
    if clusters_path is not None:
        models = [cluster(ctxs[key].rule_ids, ctxs[key].types, ctxs[key].sims.values, res.thresholds)
                  for key, res in results.items()]
        write_clusters(clusters_path, models, ds.vocab, cfg.header("search"))
    logger.info("wrote thresholds for %d (relation, direction) pairs to %s", len(results), out)


def cmd_apply(cfg: Config, aggregation: Optional[str] = None, split: Optional[str] = None) -> None:
    ds = _dataset(cfg)
    rules = _rules(cfg, ds)
    strategy = Strategy(aggregation or cfg.get("aggregation"))
    split = split or cfg.get("split")
    threads = resolve_threads(cfg.int("threads"))
    graph = ds.application_graph(cfg.get("apply_graph"))
    k, cap = cfg.int("top_k"), _cap(cfg)
    strategies, models = {}, {}
    default = Strategy.MAX if strategy in (Strategy.VS, Strategy.NRNO) else strategy

    if strategy is Strategy.NRNO:
        tpath = _require(cfg, "thresholds", "search")
        sigs, mk = _load_sigs(cfg, rules)
        thresholds = read_thresholds(tpath, ds.vocab)
        matrices = relation_matrices(rules, sigs, mk, threads)
        for (rel, d), (vec, _) in thresholds.items():
            ids = rules.group(rel, d)
            if not ids:
                continue
            sims = matrices[rel].subset(ids, d)
            models[rel, d] = cluster(ids, [rules[i].rule_type for i in ids], sims.values, vec)
            strategies[rel, d] = Strategy.NRNO
    elif strategy is Strategy.VS:
        ctxs = contexts(rules, None, _tasks(ds, "valid"), graph, k, cap, threads)
        strategies = select_vs(validation_mrrs(ctxs), rules.keys())

    triples = sorted(ds.split(split).triples)
    task_pairs = []
    for tr in triples:
        pair = []
        for d in (Direction.HEAD, Direction.TAIL):
            t = PredictionTask.from_triple(tr, d)
            pair.append(PredictionTask(t.known, t.relation, d, t.target, build_filter(t, ds.known())))
        task_pairs.append(tuple(pair))
    preds = predict_split(triples, task_pairs, rules, graph, strategies, default, models, k, cap, threads)
    out = cfg.path("predictions")
    if out is None:
        raise PipelineError("config key 'predictions' is not set")
    write_predictions(out, preds, ds.vocab, cfg.header("apply", aggregation=strategy.value, split=split))
    logger.info("wrote predictions for %d triples to %s", len(preds), out)


def cmd_eval(cfg: Config, policies: Optional[list[str]] = None) -> str:
    ds = _dataset(cfg)
    preds = read_predictions(_require(cfg, "predictions", "apply"), ds.vocab)
    names = policies or [p.strip() for p in cfg.get("policies").split(",") if p.strip()]
    pols = [TiePolicy(p) for p in names]
    rankings = []
    for p in preds:
        for d in (Direction.HEAD, Direction.TAIL):
            t = PredictionTask.from_triple(p.triple, d)
            task = PredictionTask(t.known, t.relation, d, t.target, build_filter(t, ds.known()))
            rankings.append((task, p.ranking(d)))
    rel_names = {i: n for i, n in enumerate(ds.vocab.relations)}
    report = evaluate(rankings, pols, rel_names, cfg.int("seed"))
    text = cfg.header("eval") + report.as_text() + "\n" + report.as_keyvalue()
    out = cfg.path("report")
    if out is not None:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text


def cmd_synth(directory: str, seed: int) -> None:
    from .synthetic import write_planted

    cfg = write_planted(directory, seed)
    print(cfg)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rulelink", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"rulelink {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mine", help="learn rules from the training split")
    p.add_argument("config")
    p = sub.add_parser("calc-sims", help="MinHash signatures of every rule's inferred set")
    p.add_argument("config")
    p = sub.add_parser("search", help="learn clustering thresholds on the validation split")
    p.add_argument("config")
    p.add_argument("--strategy", choices=["grid", "random"])
    p = sub.add_parser("apply", help="write ranked predictions for a split")
    p.add_argument("config")
    p.add_argument("--aggregation", choices=[s.value for s in Strategy])
    p.add_argument("--split", choices=["valid", "test"])
    p = sub.add_parser("eval", help="filtered MRR / Hits@k of a prediction file")
    p.add_argument("config")
    p.add_argument("--policy", action="append", choices=[t.value for t in TiePolicy])
    p = sub.add_parser("synth", help="write the planted-rule demo dataset and config")
    p.add_argument("directory")
    p.add_argument("--seed", type=int, default=7)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            cmd_synth(args.directory, args.seed)
            return 0
        cfg = Config.load(args.config)
        if args.command == "mine":
            cmd_mine(cfg)
        elif args.command == "calc-sims":
            cmd_calc_sims(cfg)
        elif args.command == "search":
            cmd_search(cfg, args.strategy)
        elif args.command == "apply":
            cmd_apply(cfg, args.aggregation, args.split)
        elif args.command == "eval":
            sys.stdout.write(cmd_eval(cfg, args.policy))
    except (PipelineError, ValueError, KeyError, OSError) as exc:
        print(f"rulelink {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
