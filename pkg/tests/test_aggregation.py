import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rulelink.aggregation import (Strategy, aggregate_max, aggregate_noisy_or, aggregate_nrno,
                                  noisy_or, rank, select_vs)
from rulelink.clustering import ThresholdVector, cluster
from rulelink.kg_store import Vocabulary
from rulelink.rule_model import Direction, RuleSet, parse_rule

A, B, C = 0, 1, 2
WORKED_EXAMPLE = {A: [0.9, 0.1], B: [0.9, 0.3], C: [0.8, 0.7]}


def test_worked_example_maximum():
    assert aggregate_max(WORKED_EXAMPLE).entries == [(B, 0.9), (A, 0.9), (C, 0.8)]


def test_worked_example_noisy_or():
    ranking = aggregate_noisy_or(WORKED_EXAMPLE)
    assert ranking.entities() == [C, B, A]
    scores = ranking.scores()
    assert scores[C] == pytest.approx(0.94, abs=1e-12)
    assert scores[B] == pytest.approx(0.93, abs=1e-12)
    assert scores[A] == pytest.approx(0.91, abs=1e-12)


def test_noisy_or_values():
    assert noisy_or([0.9, 0.7, 0.6]) == pytest.approx(0.988, abs=1e-12)
    assert noisy_or([0.9]) == 0.9


def test_nrno_examples():
    ranking = aggregate_nrno({C: {0: [0.8, 0.7]}, B: {0: [0.9], 1: [0.3]}})
    scores = ranking.scores()
    assert scores[C] == 0.8
    assert scores[B] == pytest.approx(0.93, abs=1e-12)
    assert aggregate_nrno({A: {0: [0.9, 0.7, 0.6]}}).scores()[A] == 0.9


def test_single_firing():
    assert aggregate_max({5: [0.4]}).entries == [(5, 0.4)]


def test_identical_sequences_break_ties_by_entity():
    assert aggregate_max({7: [0.5, 0.2], 3: [0.2, 0.5]}).entities() == [3, 7]
    assert aggregate_noisy_or({9: [0.5], 1: [0.5]}).entities() == [1, 9]


def test_longer_sequence_beats_its_prefix():
    assert aggregate_max({1: [0.5], 2: [0.5, 0.1]}).entities() == [2, 1]


def test_top_k_truncates():
    firings = {e: [e / 10] for e in range(1, 10)}
    assert aggregate_max(firings, k=3).entities() == [9, 8, 7]
    assert aggregate_noisy_or(firings, k=3).entities() == [9, 8, 7]
    assert len(aggregate_max(firings, k=None)) == 9


def test_vs_selection():
    keys = [(0, Direction.HEAD), (0, Direction.TAIL), (1, Direction.TAIL), (2, Direction.HEAD)]
    chosen = select_vs({keys[0]: (0.4, 0.3), keys[1]: (0.3, 0.4), keys[2]: (0.5, 0.5)}, keys)
    assert chosen == {keys[0]: Strategy.MAX, keys[1]: Strategy.NOISY_OR,
                      keys[2]: Strategy.MAX, keys[3]: Strategy.MAX}


def rule_set(confs):
    vocab = Vocabulary()
    rules = [parse_rule(f"h(X,Y) <= b{i}(X,Y)", vocab, sealed=False).with_stats(c) for i, c in enumerate(confs)]
    return RuleSet(rules), vocab.relations.id("h")


def random_fixture(rng: random.Random):
    n_rules = rng.randint(1, 30)
    confs = [rng.choice([0.1, 0.25, 0.5, 0.75, 0.9, 1.0, rng.random()]) for _ in range(n_rules)]
    rules, rel = rule_set(confs)
    fired = {}
    for e in rng.sample(range(50), rng.randint(1, 50)):
        fired[e] = sorted(rng.sample(range(n_rules), rng.randint(1, min(4, n_rules))))
    sims = np.array([[rng.random() for _ in range(n_rules)] for _ in range(n_rules)])
    sims = np.triu(sims, 1) + np.triu(sims, 1).T + np.eye(n_rules)
    return rules, rel, fired, sims


def model_for(rules, rel, sims, t):
    ids = rules.group(rel, Direction.TAIL)
    return cluster(ids, [rules[i].rule_type for i in ids], sims, ThresholdVector((t,) * 6, rel, Direction.TAIL))


@given(st.randoms(use_true_random=False))
@settings(max_examples=50, deadline=None)
def test_degenerate_vectors_reproduce_max_and_noisy_or(rnd):
    rules, rel, fired, sims = random_fixture(rnd)
    zeros = rank(fired, rules, Strategy.NRNO, model_for(rules, rel, sims, 0.0), k=None)
    maximum = rank(fired, rules, Strategy.MAX, None, k=None)
    assert zeros.top() == maximum.top()
    assert zeros.scores() == maximum.scores()
    ones = rank(fired, rules, Strategy.NRNO, model_for(rules, rel, sims, 1.0), k=None)
    assert ones.entries == rank(fired, rules, Strategy.NOISY_OR, None, k=None).entries


@given(st.randoms(use_true_random=False), st.floats(0.0, 1.0))
@settings(max_examples=80, deadline=None)
def test_nrno_between_max_and_noisy_or(rnd, t):
    rules, rel, fired, sims = random_fixture(rnd)
    model = model_for(rules, rel, sims, t)
    # one-cluster aggregation goes through the explicit cluster path too
    nrno = rank(fired, rules, Strategy.NRNO, model, k=None).scores()
    maximum = rank(fired, rules, Strategy.MAX, None, k=None).scores()
    noisy = rank(fired, rules, Strategy.NOISY_OR, None, k=None).scores()
    for e in fired:
        assert maximum[e] <= nrno[e] <= noisy[e]
        assert 0.0 <= nrno[e] <= 1.0


@given(st.dictionaries(st.integers(0, 20), st.lists(st.one_of(st.just(0.0), st.floats(1e-9, 1)), min_size=1, max_size=5), min_size=1))
@settings(max_examples=100, deadline=None)
def test_rankings_are_sorted_and_bounded(firings):
    for ranking in (aggregate_max(firings, k=5), aggregate_noisy_or(firings, k=5)):
        scores = [s for _, s in ranking]
        assert scores == sorted(scores, reverse=True)
        assert len(ranking) <= 5
        for e, s in ranking:
            assert (s == 0.0) == all(c == 0.0 for c in firings[e])


def test_vs_must_be_resolved_first():
    rules, _ = rule_set([0.5])
    with pytest.raises(ValueError):
        rank({0: [0]}, rules, Strategy.VS)
