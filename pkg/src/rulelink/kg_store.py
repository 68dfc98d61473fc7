"""In-memory triple store with the adjacency indices used for rule grounding."""

from __future__ import annotations

import logging
from collections import defaultdict
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Optional

logger = logging.getLogger(__name__)

Triple = tuple[int, int, int]

_EMPTY: frozenset[int] = frozenset()


class TripleParseError(ValueError):
    """Malformed line in a triple file."""

    def __init__(self, path, lineno: int, line: str):
        super().__init__(f"{path}:{lineno}: expected 3 tab-separated fields, got {line!r}")
        self.path = path
        self.lineno = lineno


class UnknownIdError(KeyError):
    pass


class Dictionary:
    """Dense ids for surface strings; existing entries are never renumbered."""

    def __init__(self, names: Iterable[str] = ()):
        self._ids: dict[str, int] = {}
        self._names: list[str] = []
        for name in names:
            self.add(name)

    def add(self, name: str) -> int:
        idx = self._ids.get(name)
        if idx is None:
            idx = len(self._names)
            self._ids[name] = idx
            self._names.append(name)
        return idx

    def id(self, name: str) -> int:
        try:
            return self._ids[name]
        except KeyError:
            raise UnknownIdError(name) from None

    def get(self, name: str) -> Optional[int]:
        return self._ids.get(name)

    def name(self, idx: int) -> str:
        if not 0 <= idx < len(self._names):
            raise UnknownIdError(idx)
        return self._names[idx]

    def __contains__(self, name) -> bool:
        return name in self._ids

    def __len__(self) -> int:
        return len(self._names)

    def __iter__(self) -> Iterator[str]:
        return iter(self._names)


class Vocabulary:
    """Entity and relation dictionaries shared by all splits of a dataset."""

    def __init__(self):
        self.entities = Dictionary()
        self.relations = Dictionary()

    def encode(self, head: str, relation: str, tail: str) -> Triple:
        return (self.entities.add(head), self.relations.add(relation), self.entities.add(tail))

    def decode(self, triple: Triple) -> tuple[str, str, str]:
        h, r, t = triple
        return self.entities.name(h), self.relations.name(r), self.entities.name(t)


class KnowledgeGraph:
    """Immutable set of (head, relation, tail) id triples.

    ``index_hr`` maps (head, relation) to the tail set, ``index_tr`` maps
    (tail, relation) to the head set and ``index_r`` maps a relation to its
    triples in sorted order.
    """

    def __init__(self, triples: Iterable[Triple], vocab: Vocabulary, split: str = "train"):
        self.vocab = vocab
        self.split = split
        self.triples: frozenset[Triple] = frozenset(triples)
        hr: dict[tuple[int, int], set[int]] = defaultdict(set)
        tr: dict[tuple[int, int], set[int]] = defaultdict(set)
        by_rel: dict[int, list[Triple]] = defaultdict(list)
        for h, r, t in self.triples:
            hr[h, r].add(t)
            tr[t, r].add(h)
            by_rel[r].append((h, r, t))
        self.index_hr = {k: frozenset(v) for k, v in hr.items()}
        self.index_tr = {k: frozenset(v) for k, v in tr.items()}
        self.index_r = {r: tuple(sorted(v)) for r, v in by_rel.items()}

    def __len__(self) -> int:
        return len(self.triples)

    def __iter__(self) -> Iterator[Triple]:
        return iter(sorted(self.triples))

    def __contains__(self, triple) -> bool:
        return triple in self.triples

    def contains(self, triple: Triple) -> bool:
        return triple in self.triples

    @property
    def num_entities(self) -> int:
        return len(self.vocab.entities)

    @property
    def num_relations(self) -> int:
        return len(self.vocab.relations)

    def _check(self, entity: int, relation: int) -> None:
        if not 0 <= entity < len(self.vocab.entities):
            raise UnknownIdError(f"entity id {entity}")
        if not 0 <= relation < len(self.vocab.relations):
            raise UnknownIdError(f"relation id {relation}")

    def tails_of(self, head: int, relation: int) -> frozenset[int]:
        self._check(head, relation)
        return self.index_hr.get((head, relation), _EMPTY)

    def heads_of(self, tail: int, relation: int) -> frozenset[int]:
        self._check(tail, relation)
        return self.index_tr.get((tail, relation), _EMPTY)

    @cached_property
    def subjects(self) -> dict[int, frozenset[int]]:
        """relation -> entities occurring as head of that relation."""
        return {r: frozenset(h for h, _, _ in ts) for r, ts in self.index_r.items()}

    @cached_property
    def objects(self) -> dict[int, frozenset[int]]:
        """relation -> entities occurring as tail of that relation."""
        return {r: frozenset(t for _, _, t in ts) for r, ts in self.index_r.items()}

    @cached_property
    def incidence(self) -> dict[int, tuple[Triple, ...]]:
        """entity -> every triple touching it, sorted."""
        inc: dict[int, set[Triple]] = defaultdict(set)
        for tr in self.triples:
            inc[tr[0]].add(tr)
            inc[tr[2]].add(tr)
        return {e: tuple(sorted(ts)) for e, ts in inc.items()}

    @cached_property
    def sorted_triples(self) -> tuple[Triple, ...]:
        return tuple(sorted(self.triples))

    def union(self, other: "KnowledgeGraph", split: Optional[str] = None) -> "KnowledgeGraph":
        if other.vocab is not self.vocab:
            raise ValueError("graphs use different vocabularies")
        return KnowledgeGraph(self.triples | other.triples, self.vocab, split or f"{self.split}+{other.split}")


def read_tsv(path) -> list[tuple[str, str, str]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise TripleParseError(path, lineno, line)
            rows.append((fields[0], fields[1], fields[2]))
    return rows


def load_tsv(path, vocab: Optional[Vocabulary] = None, split: Optional[str] = None) -> KnowledgeGraph:
    """Load a ``head<TAB>relation<TAB>tail`` file.

    Passing a shared ``vocab`` extends it in file order; ids already
    assigned are kept.
    """
    if vocab is None:
        vocab = Vocabulary()
    rows = read_tsv(path)
    triples = [vocab.encode(*row) for row in rows]
    g = KnowledgeGraph(triples, vocab, split or Path(path).stem)
    logger.info("loaded %s: %d triples (%d lines)", path, len(g), len(rows))
    return g


class Dataset:
    """train/valid/test graphs over one vocabulary built from all three files."""

    def __init__(self, train: KnowledgeGraph, valid: KnowledgeGraph, test: KnowledgeGraph):
        self.train, self.valid, self.test = train, valid, test
        self.vocab = train.vocab

    @classmethod
    def load(cls, train_path, valid_path=None, test_path=None) -> "Dataset":
        vocab = Vocabulary()
        rows = {}
        for split, path in (("train", train_path), ("valid", valid_path), ("test", test_path)):
            rows[split] = read_tsv(path) if path else []
        # ids follow train, then valid, then test order
        graphs = {
            split: KnowledgeGraph([vocab.encode(*row) for row in rs], vocab, split)
            for split, rs in rows.items()
        }
        return cls(graphs["train"], graphs["valid"], graphs["test"])

    def split(self, name: str) -> KnowledgeGraph:
        if name not in ("train", "valid", "test"):
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)

    def application_graph(self, mode: str = "train") -> KnowledgeGraph:
        if mode == "train":
            return self.train
        if mode == "train+valid":
            return self.train.union(self.valid)
        raise ValueError(f"unknown application graph {mode!r}")

    def known(self) -> list[KnowledgeGraph]:
        return [self.train, self.valid, self.test]
