"""Flat bottom-up rule sampler: random walks generalised into C/AC1/AC2 rules.

There is no saturation check or refinement schedule; each round samples one
ground path, generalises it, and the union of all rounds is scored once.
"""

from __future__ import annotations

import logging
import random
import time
from dataclasses import dataclass
from typing import Optional

from ._parallel import parallel_map
from .inference_engine import score_rule
from .kg_store import KnowledgeGraph, Triple
from .rule_model import Atom, Const, Rule, RuleSet, RuleType, Term, Var, make_rule

logger = logging.getLogger(__name__)

_BODY_VARS = "ABCDEFGHIJKLMNOPQRSTUVW"


class WalkFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class GroundPath:
    """Anchor ``h(c0, c1)`` plus a walk ``c1 -> c2 -> ... -> c_{n+1}``.

    ``start_slot`` is the anchor slot holding c1; ``edges[i]`` is the triple
    traversed at step i and ``forward[i]`` tells whether it was followed from
    its head to its tail.
    """

    anchor: Triple
    start_slot: int
    edges: tuple[Triple, ...]
    forward: tuple[bool, ...]

    @property
    def entities(self) -> list[int]:
        first = self.anchor[0] if self.start_slot == 0 else self.anchor[2]
        out = [first]
        for (h, _, t), fwd in zip(self.edges, self.forward):
            out.append(t if fwd else h)
        return out

    @property
    def other_entity(self) -> int:
        return self.anchor[2] if self.start_slot == 0 else self.anchor[0]

    @property
    def cyclic(self) -> bool:
        return self.entities[-1] == self.other_entity

    def __len__(self) -> int:
        return len(self.edges)


@dataclass
class MinerConfig:
    max_len_cyclic: int = 3
    max_len_acyclic: int = 1
    allow_reflexive: bool = False
    min_support: int = 2
    min_confidence: float = 0.0001
    max_retries: int = 20
    seed: int = 0
    threads: int = 1
    cap: Optional[int] = None


def sample_path(g: KnowledgeGraph, n: int, rng: random.Random,
                anchor: Optional[Triple] = None, start_slot: Optional[int] = None,
                allow_reflexive: bool = False, max_retries: int = 20) -> GroundPath:
    """Random walk of ``n`` edges from a uniformly drawn anchor triple.

    Walks never reuse the anchor or an earlier edge and never step over a
    reflexive triple; ``allow_reflexive`` only admits reflexive anchors.
    """
    if n < 1:
        raise ValueError("path length must be >= 1")
    if not len(g):
        raise WalkFailed("empty graph")
    pool = g.sorted_triples
    if not allow_reflexive:
        pool = tuple(tr for tr in pool if tr[0] != tr[2])
    if anchor is None and not pool:
        raise WalkFailed("no usable anchor triple")
    inc = g.incidence
    for _ in range(max_retries):
        a = anchor if anchor is not None else pool[rng.randrange(len(pool))]
        slot = start_slot if start_slot is not None else rng.randrange(2)
        cur = a[0] if slot == 0 else a[2]
        used = {a}
        edges, fwd = [], []
        for _ in range(n):
            options = [tr for tr in inc.get(cur, ()) if tr not in used and tr[0] != tr[2]]
            if not options:
                break
            edge = options[rng.randrange(len(options))]
            used.add(edge)
            edges.append(edge)
            forward = edge[0] == cur
            fwd.append(forward)
            cur = edge[2] if forward else edge[0]
        if len(edges) == n:
            return GroundPath(a, slot, tuple(edges), tuple(fwd))
    raise WalkFailed(f"no walk of length {n} after {max_retries} attempts")


def _body(path: GroundPath, terms: list[Term], reverse: bool) -> tuple[Atom, ...]:
    atoms = []
    for i, ((_, rel, _), fwd) in enumerate(zip(path.edges, path.forward)):
        a, b = terms[i], terms[i + 1]
        atoms.append(Atom(rel, a, b) if fwd else Atom(rel, b, a))
    return tuple(reversed(atoms)) if reverse else tuple(atoms)


def _named(positions: int, first: Term, last: Optional[Term], reverse: bool) -> list[Term]:
    """Terms for path positions 0..positions-1; inner positions get A, B, ...

    Inner letters follow body order, which runs backwards when ``reverse``.
    """
    inner = positions - 2
    letters = [Var(_BODY_VARS[i]) for i in range(inner + (last is None))]
    if last is None:
        last = letters.pop()
    mids = letters if not reverse else letters[::-1]
    return [first, *mids, last]


def generalize(path: GroundPath) -> set[Rule]:
    """Rules generalised from a ground path.

    A cyclic path gives the C rule and one AC1 rule per head constant; an
    acyclic one gives an AC1 rule (terminal constant) and an AC2 rule
    (terminal variable). Head variables are X in slot 0 and Y in slot 1, and
    bodies are listed starting from a head variable.
    """
    n = len(path)
    if n < 1:
        raise ValueError("cannot generalise an empty path")
    rel = path.anchor[1]
    s = path.start_slot
    ents = path.entities
    c0, c1 = path.other_entity, ents[0]
    head_var = [Var("X"), Var("Y")]
    rules = set()

    def ac_head(var_slot: int, constant: int) -> Atom:
        return Atom(rel, head_var[0], Const(constant)) if var_slot == 0 else Atom(rel, Const(constant), head_var[1])

    if path.cyclic:
        # C rule, body listed from X
        rev = s == 1
        terms = _named(n + 1, head_var[s], head_var[1 - s], rev)
        rules.add(make_rule(Atom(rel, head_var[0], head_var[1]), _body(path, terms, rev)))
        # head constant c0, variable at c1's slot
        terms = _named(n + 1, head_var[s], Const(c0), False)
        rules.add(make_rule(ac_head(s, c0), _body(path, terms, False)))
        # head constant c1, variable at c0's slot, body listed from that end
        terms = _named(n + 1, Const(c1), head_var[1 - s], True)
        rules.add(make_rule(ac_head(1 - s, c1), _body(path, terms, True)))
    else:
        terms = _named(n + 1, head_var[s], Const(ents[-1]), False)
        rules.add(make_rule(ac_head(s, c0), _body(path, terms, False)))
        terms = _named(n + 1, head_var[s], None, False)
        rules.add(make_rule(ac_head(s, c0), _body(path, terms, False)))
    return rules


def _within_limits(rule: Rule, cfg: MinerConfig) -> bool:
    if rule.rule_type is RuleType.C:
        return len(rule) <= cfg.max_len_cyclic
    return len(rule) <= cfg.max_len_acyclic


def _round(g: KnowledgeGraph, cfg: MinerConfig, index: int) -> set[Rule]:
    rng = random.Random(cfg.seed * 1_000_003 + index)
    n = rng.randint(1, max(cfg.max_len_cyclic, cfg.max_len_acyclic))
    try:
        path = sample_path(g, n, rng, allow_reflexive=cfg.allow_reflexive,
                           max_retries=cfg.max_retries)
    except WalkFailed:
        return set()
    return {r for r in generalize(path) if _within_limits(r, cfg)}


def _rounds(args) -> set[Rule]:
    g, cfg, lo, hi = args
    found: set[Rule] = set()
    for i in range(lo, hi):
        found |= _round(g, cfg, i)
    return found


def _score(args) -> Optional[Rule]:
    rule, g, cap = args
    return score_rule(rule, g, cap)


def mine(g: KnowledgeGraph, budget: Optional[float] = None, config: Optional[MinerConfig] = None,
         iterations: Optional[int] = None) -> RuleSet:
    """Sample rules from ``g`` and score them by confidence on ``g``.

    With ``iterations`` the run is deterministic for a given seed and any
    thread count; otherwise rounds continue until ``budget`` seconds elapse.
    """
    cfg = config or MinerConfig()
    if iterations is None and (budget is None or budget <= 0):
        raise ValueError("need a positive time budget or an iteration count")
    if not len(g):
        return RuleSet()
    found: set[Rule] = set()
    if iterations is not None:
        chunk = 256
        spans = [(g, cfg, lo, min(lo + chunk, iterations)) for lo in range(0, iterations, chunk)]
        for part in parallel_map(_rounds, spans, cfg.threads):
            found |= part
    else:
        deadline = time.monotonic() + budget
        i = 0
        while time.monotonic() < deadline:
            found |= _round(g, cfg, i)
            i += 1
        logger.info("mined %d rounds in %.1fs", i, budget)
    ordered = sorted(found, key=Rule.sort_key)
    scored = parallel_map(_score, [(r, g, cfg.cap) for r in ordered], cfg.threads)
    kept = [r for r in scored
            if r is not None and r.predicted >= cfg.min_support and r.confidence >= cfg.min_confidence]
    logger.info("kept %d of %d distinct rules", len(kept), len(ordered))
    return RuleSet(kept)
