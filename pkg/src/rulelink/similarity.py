"""Exact and MinHash-estimated Jaccard similarity of inferred triple sets."""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from ._parallel import parallel_map
from .kg_store import Triple

logger = logging.getLogger(__name__)

DEFAULT_K = 256

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


class UndefinedSimilarity(ValueError):
    pass


def _mix(x: np.ndarray) -> np.ndarray:
    """splitmix64 finaliser over uint64 arrays (wrapping arithmetic)."""
    with np.errstate(over="ignore"):
        x = x + _GOLDEN
        x = (x ^ (x >> np.uint64(30))) * _M1
        x = (x ^ (x >> np.uint64(27))) * _M2
        return x ^ (x >> np.uint64(31))


def triple_keys(triples: Iterable[Triple]) -> np.ndarray:
    """One 64-bit key per triple from its (head, relation, tail) encoding."""
    arr = np.asarray(sorted(triples), dtype=np.int64).reshape(-1, 3).astype(np.uint64)
    key = _mix(arr[:, 0])
    key = _mix(key ^ arr[:, 1])
    return _mix(key ^ arr[:, 2])


def make_seeds(k: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, np.iinfo(np.uint64).max, size=k, dtype=np.uint64, endpoint=True)


@dataclass(frozen=True)
class MinHashSignature:
    values: np.ndarray
    seed: int
    rule_id: Optional[int] = None

    @property
    def k(self) -> int:
        return len(self.values)


def exact_jaccard(a: set, b: set) -> float:
    if not a and not b:
        raise UndefinedSimilarity("Jaccard index of two empty sets")
    inter = len(a & b) if len(a) <= len(b) else len(b & a)
    return inter / (len(a) + len(b) - inter)


def signature(triples, k: int = DEFAULT_K, seed: int = 0, rule_id: Optional[int] = None,
              seeds: Optional[np.ndarray] = None, chunk: int = 4096) -> MinHashSignature:
    """Per-function minima of k seeded 64-bit hashes over the set."""
    if not triples:
        raise UndefinedSimilarity("signature of an empty set")
    if seeds is None:
        seeds = make_seeds(k, seed)
    keys = triple_keys(triples)
    mins = np.full(len(seeds), np.iinfo(np.uint64).max, dtype=np.uint64)
    for lo in range(0, len(keys), chunk):
        block = _mix(keys[lo:lo + chunk, None] ^ seeds[None, :])
        np.minimum(mins, block.min(axis=0), out=mins)
    return MinHashSignature(mins, seed, rule_id)


def estimate_jaccard(sa: MinHashSignature, sb: MinHashSignature) -> float:
    if sa.k != sb.k or sa.seed != sb.seed:
        raise ValueError("signatures built with different k or seeds")
    return float(np.count_nonzero(sa.values == sb.values)) / sa.k


@dataclass
class SimilarityMatrix:
    """Symmetric similarities between the rules ``rule_ids`` of one relation."""

    relation: int
    direction: object
    rule_ids: list[int]
    values: np.ndarray

    def __getitem__(self, ij) -> float:
        return float(self.values[ij])

    def subset(self, rule_ids: Sequence[int], direction=None) -> "SimilarityMatrix":
        pos = {r: i for i, r in enumerate(self.rule_ids)}
        idx = np.array([pos[r] for r in rule_ids], dtype=np.intp)
        return SimilarityMatrix(self.relation, direction, list(rule_ids), self.values[np.ix_(idx, idx)])


def signature_matrix(sigs: Sequence[Optional[MinHashSignature]], k: int) -> np.ndarray:
    """Stack signatures; missing ones become rows that never agree with anything."""
    out = np.zeros((len(sigs), k), dtype=np.uint64)
    for i, s in enumerate(sigs):
        if s is not None:
            out[i] = s.values
    return out


def estimated_matrix(sigs: Sequence[Optional[MinHashSignature]], k: int,
                     threads: int = 1, block: int = 64) -> np.ndarray:
    n = len(sigs)
    stack = signature_matrix(sigs, k)
    present = np.array([s is not None for s in sigs], dtype=bool)

    def rows(lo: int) -> np.ndarray:
        part = stack[lo:lo + block]
        return (part[:, None, :] == stack[None, :, :]).sum(axis=2) / k

    parts = parallel_map(rows, range(0, n, block), threads)
    values = np.vstack(parts) if parts else np.zeros((0, 0))
    values[~present, :] = 0.0
    values[:, ~present] = 0.0
    np.fill_diagonal(values, 1.0)
    return values


def exact_matrix(sets: Sequence[frozenset]) -> np.ndarray:
    n = len(sets)
    values = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            v = exact_jaccard(sets[i], sets[j]) if (sets[i] or sets[j]) else 0.0
            values[i, j] = values[j, i] = v
    return values


# -- signature cache -------------------------------------------------------

_MAGIC = b"RLMINHASH"
_VERSION = 1


def save_signatures(path, sigs: Sequence[Optional[MinHashSignature]], k: int, seed: int,
                    header: str = "", ruleset_digest: str = "") -> None:
    """Binary cache: text comment line, then magic, version, k, seed, count,
    presence mask and the signature rows."""
    digest = ruleset_digest.encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8"))
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIQIH", _VERSION, k, seed, len(sigs), len(digest)))
        fh.write(digest)
        fh.write(np.array([s is not None for s in sigs], dtype=np.uint8).tobytes())
        fh.write(signature_matrix(sigs, k).astype("<u8").tobytes())


def load_signatures(path) -> tuple[list[Optional[MinHashSignature]], int, int, str]:
    with open(path, "rb") as fh:
        data = fh.read()
    at = data.find(_MAGIC)
    if at < 0:
        raise ValueError(f"{path}: not a signature cache")
    at += len(_MAGIC)
    version, k, seed, count, dlen = struct.unpack_from("<IIQIH", data, at)
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported cache version {version}")
    at += struct.calcsize("<IIQIH")
    digest = data[at:at + dlen].decode("ascii")
    at += dlen
    mask = np.frombuffer(data, dtype=np.uint8, count=count, offset=at).astype(bool)
    at += count
    rows = np.frombuffer(data, dtype="<u8", count=count * k, offset=at).reshape(count, k)
    sigs = [MinHashSignature(rows[i].astype(np.uint64), seed, i) if mask[i] else None
            for i in range(count)]
    return sigs, k, seed, digest
