"""Horn rules of type C, AC1 and AC2, their text format and rule files."""

from __future__ import annotations

import enum
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Optional, Union

from .kg_store import UnknownIdError, Vocabulary

logger = logging.getLogger(__name__)


class RuleParseError(ValueError):
    pass


class ResolutionError(RuleParseError):
    """A token names an entity or relation missing from sealed dictionaries."""


class ClassificationError(RuleParseError):
    """The rule structure matches none of the C / AC1 / AC2 schemas."""


class RuleFileError(ValueError):
    pass


class RuleType(enum.Enum):
    C = "C"
    AC1 = "AC1"
    AC2 = "AC2"

    @property
    def order(self) -> int:
        return _TYPE_ORDER[self]


_TYPE_ORDER = {RuleType.C: 0, RuleType.AC1: 1, RuleType.AC2: 2}


class Direction(enum.IntEnum):
    """Head-atom slot that a prediction task asks for.

    HEAD answers ``(?, r, t)``, TAIL answers ``(h, r, ?)``.
    """

    HEAD = 0
    TAIL = 1

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, text: str) -> "Direction":
        return cls[text.upper()]


@dataclass(frozen=True, order=True)
class Var:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True, order=True)
class Const:
    entity: int


Term = Union[Var, Const]


@dataclass(frozen=True)
class Atom:
    relation: int
    first: Term
    second: Term

    @property
    def terms(self) -> tuple[Term, Term]:
        return (self.first, self.second)


# One hop along a body chain: (relation, forward). Forward means the atom reads
# rel(previous, next) so the hop follows head -> tail edges.
Step = tuple[int, bool]


@dataclass(frozen=True)
class Chain:
    """Body of a rule rewritten as a path that starts at a head variable.

    For C rules the path runs from the variable in head slot 0 to the one in
    slot 1. For AC rules it runs from the head variable (in ``var_slot``) to
    the terminal term, which is a constant (AC1) or a free variable (AC2).
    """

    steps: tuple[Step, ...]
    var_slot: int
    head_constant: Optional[int] = None
    terminal: Optional[int] = None

    def reversed_steps(self) -> tuple[Step, ...]:
        return tuple((rel, not fwd) for rel, fwd in reversed(self.steps))


@dataclass(frozen=True)
class Rule:
    head: Atom
    body: tuple[Atom, ...]
    rule_type: RuleType
    chain: Chain = field(compare=False, repr=False)
    confidence: float = field(default=0.0, compare=False)
    predicted: Optional[int] = field(default=None, compare=False)
    correct: Optional[int] = field(default=None, compare=False)

    @property
    def relation(self) -> int:
        return self.head.relation

    def __len__(self) -> int:
        return len(self.body)

    def directions(self) -> tuple[Direction, ...]:
        # AC rules answer both slots: the variable slot yields every binding,
        # the constant slot yields the head constant when the body holds.
        return (Direction.HEAD, Direction.TAIL)

    def with_stats(self, confidence: float, predicted: Optional[int] = None,
                   correct: Optional[int] = None) -> "Rule":
        return replace(self, confidence=confidence, predicted=predicted, correct=correct)

    def sort_key(self) -> tuple:
        def term_key(t: Term):
            return (0, t.name) if isinstance(t, Var) else (1, str(t.entity))

        def atom_key(a: Atom):
            return (a.relation, term_key(a.first), term_key(a.second))

        return (self.head.relation, self.rule_type.order, len(self.body),
                atom_key(self.head), tuple(atom_key(a) for a in self.body))


def is_variable(token: str) -> bool:
    return len(token) == 1 and "A" <= token <= "Z"


def make_rule(head: Atom, body: Iterable[Atom], confidence: float = 0.0,
              predicted: Optional[int] = None, correct: Optional[int] = None) -> Rule:
    """Classify ``head <= body`` and build the rule, or raise ClassificationError."""
    body = tuple(body)
    rule_type, chain = classify(head, body)
    return Rule(head, body, rule_type, chain, confidence, predicted, correct)


def _chain_terms(body: tuple[Atom, ...]) -> list[Term]:
    """Terms c_1..c_{n+1} of the body path in listed order."""
    if not body:
        raise ClassificationError("empty body")
    for atom in body:
        if atom.first == atom.second:
            raise ClassificationError("body atom repeats a term")
    if len(body) == 1:
        return [body[0].first, body[0].second]
    shared = []
    for a, b in zip(body, body[1:]):
        common = set(a.terms) & set(b.terms)
        if len(common) != 1:
            raise ClassificationError("body atoms do not form a chain")
        shared.append(common.pop())
    first = body[0].second if body[0].first == shared[0] else body[0].first
    last = body[-1].second if body[-1].first == shared[-1] else body[-1].first
    terms = [first, *shared, last]
    for i, atom in enumerate(body):
        if set(atom.terms) != {terms[i], terms[i + 1]}:
            raise ClassificationError("body atoms do not form a chain")
    return terms


def _steps(body: tuple[Atom, ...], terms: list[Term]) -> tuple[Step, ...]:
    return tuple((atom.relation, atom.first == terms[i]) for i, atom in enumerate(body))


def _chain_order(body: tuple[Atom, ...]) -> tuple[Atom, ...]:
    """Body atoms rearranged so consecutive atoms share a term, when possible.

    Files usually list atoms along the chain already; any other listing is
    accepted and only the chain built from it is reordered.
    """
    if len(body) < 3:
        return body
    links = {i: {j for j, b in enumerate(body) if j != i and set(a.terms) & set(b.terms)}
             for i, a in enumerate(body)}
    ends = sorted(i for i, nb in links.items() if len(nb) == 1)
    if len(ends) != 2:
        return body
    order, prev = [ends[0]], None
    while len(order) < len(body):
        step = links[order[-1]] - {prev} - set(order)
        if len(step) != 1:
            return body
        prev = order[-1]
        order.append(step.pop())
    return tuple(body[i] for i in order)


def classify(head: Atom, body: tuple[Atom, ...]) -> tuple[RuleType, Chain]:
    body = _chain_order(body)
    terms = _chain_terms(body)
    inner = terms[1:-1]
    for t in inner:
        if isinstance(t, Const):
            raise ClassificationError("constant inside the body chain")
    if len(set(inner)) != len(inner):
        raise ClassificationError("body chain revisits a variable")
    h0, h1 = head.terms
    head_vars = {t for t in head.terms if isinstance(t, Var)}
    if set(inner) & head_vars or set(inner) & set(terms[::len(terms) - 1]):
        raise ClassificationError("head variable used inside the body chain")

    if isinstance(h0, Var) and isinstance(h1, Var):
        if h0 == h1:
            raise ClassificationError("head repeats its variable")
        if terms[0] == h0 and terms[-1] == h1:
            return RuleType.C, Chain(_steps(body, terms), var_slot=0)
        if terms[0] == h1 and terms[-1] == h0:
            rev = tuple(reversed(body))
            return RuleType.C, Chain(_steps(rev, terms[::-1]), var_slot=0)
        raise ClassificationError("body chain does not connect the head variables")

    if isinstance(h0, Const) and isinstance(h1, Const):
        raise ClassificationError("head has no variable")

    var_slot = 0 if isinstance(h0, Var) else 1
    var = head.terms[var_slot]
    const = head.terms[1 - var_slot].entity
    if terms[0] == var:
        path, ordered = terms, body
    elif terms[-1] == var:
        path, ordered = terms[::-1], tuple(reversed(body))
    else:
        raise ClassificationError("body chain does not start at the head variable")
    end = path[-1]
    if isinstance(end, Const):
        return RuleType.AC1, Chain(_steps(ordered, path), var_slot, const, end.entity)
    if end in head_vars:
        raise ClassificationError("terminal variable occurs in the head")
    return RuleType.AC2, Chain(_steps(ordered, path), var_slot, const, None)


# -- text format -------------------------------------------------------------

def _split_top(text: str, sep: str = ",") -> list[str]:
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == sep and depth == 0:
            parts.append(text[start:i])
            start = i + 1
    parts.append(text[start:])
    return [p.strip() for p in parts]


def _parse_atom(text: str, vocab: Vocabulary, sealed: bool) -> Atom:
    text = text.strip()
    open_at = text.find("(")
    if open_at <= 0 or not text.endswith(")"):
        raise RuleParseError(f"malformed atom {text!r}")
    rel_name = text[:open_at].strip()
    args = _split_top(text[open_at + 1:-1])
    if len(args) != 2 or not all(args):
        raise RuleParseError(f"atom needs two arguments: {text!r}")

    def term(tok: str) -> Term:
        if is_variable(tok):
            return Var(tok)
        if sealed:
            idx = vocab.entities.get(tok)
            if idx is None:
                raise ResolutionError(f"unknown entity {tok!r}")
            return Const(idx)
        return Const(vocab.entities.add(tok))

    if sealed:
        rel = vocab.relations.get(rel_name)
        if rel is None:
            raise ResolutionError(f"unknown relation {rel_name!r}")
    else:
        rel = vocab.relations.add(rel_name)
    return Atom(rel, term(args[0]), term(args[1]))


def parse_rule(text: str, vocab: Vocabulary, sealed: bool = True) -> Rule:
    """Parse ``head <= atom, atom, ...``.

    Single uppercase letters are variables, every other token is a constant.
    With ``sealed`` unknown names raise ResolutionError instead of being added.
    """
    if "<=" not in text:
        raise RuleParseError(f"missing '<=' in {text!r}")
    head_text, body_text = text.split("<=", 1)
    head = _parse_atom(head_text, vocab, sealed)
    body = tuple(_parse_atom(a, vocab, sealed) for a in _split_top(body_text))
    return make_rule(head, body)


def _format_atom(atom: Atom, vocab: Vocabulary) -> str:
    def fmt(t: Term) -> str:
        return t.name if isinstance(t, Var) else vocab.entities.name(t.entity)

    return f"{vocab.relations.name(atom.relation)}({fmt(atom.first)},{fmt(atom.second)})"


def serialize_rule(rule: Rule, vocab: Vocabulary) -> str:
    body = ", ".join(_format_atom(a, vocab) for a in rule.body)
    return f"{_format_atom(rule.head, vocab)} <= {body}"


# -- rule sets ---------------------------------------------------------------

class RuleSet:
    """Rules in a fixed order; ``rules[i]`` has id ``i``."""

    def __init__(self, rules: Iterable[Rule] = ()):
        self.rules: list[Rule] = list(rules)
        groups: dict[tuple[int, Direction], list[int]] = defaultdict(list)
        for i, rule in enumerate(self.rules):
            for d in rule.directions():
                groups[rule.relation, d].append(i)
        self._groups = dict(groups)

    def __len__(self) -> int:
        return len(self.rules)

    def __iter__(self) -> Iterator[Rule]:
        return iter(self.rules)

    def __getitem__(self, i: int) -> Rule:
        return self.rules[i]

    def group(self, relation: int, direction: Direction) -> list[int]:
        return self._groups.get((relation, direction), [])

    def keys(self) -> list[tuple[int, Direction]]:
        return sorted(self._groups)

    def relations(self) -> list[int]:
        return sorted({r for r, _ in self._groups})


def format_rule_line(rule: Rule, vocab: Vocabulary) -> str:
    predicted = rule.predicted if rule.predicted is not None else 0
    correct = rule.correct if rule.correct is not None else 0
    return f"{predicted}\t{correct}\t{rule.confidence!r}\t{serialize_rule(rule, vocab)}"


def parse_rule_line(line: str, vocab: Vocabulary, sealed: bool = True) -> Rule:
    fields = line.split("\t", 3)
    if len(fields) != 4:
        raise RuleFileError(f"expected 4 tab-separated fields: {line!r}")
    try:
        predicted, correct = int(fields[0]), int(fields[1])
        conf = float(fields[2])
    except ValueError as exc:
        raise RuleFileError(f"bad number in {line!r}") from exc
    if not (0.0 <= conf <= 1.0) or math.isnan(conf):
        raise RuleFileError(f"confidence {conf} outside [0, 1]")
    if correct > predicted:
        raise RuleFileError(f"correct {correct} exceeds predicted {predicted}")
    rule = parse_rule(fields[3], vocab, sealed)
    return rule.with_stats(conf, predicted, correct)


def load_ruleset(path, vocab: Vocabulary, sealed: bool = True) -> RuleSet:
    rules = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line or line.startswith("#"):
                continue
            try:
                rules.append(parse_rule_line(line, vocab, sealed))
            except (RuleFileError, RuleParseError) as exc:
                raise type(exc)(f"{path}:{lineno}: {exc}") from exc
    logger.info("loaded %d rules from %s", len(rules), path)
    return RuleSet(rules)


def save_ruleset(rules: Iterable[Rule], path, vocab: Vocabulary, header: str = "") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header:
            fh.write(header)
        for rule in rules:
            fh.write(format_rule_line(rule, vocab) + "\n")
