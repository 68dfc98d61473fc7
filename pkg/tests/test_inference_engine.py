import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rulelink.inference_engine import (ContractViolation, PredictionTask, UndefinedConfidence,
                                       candidates, confidence, fire_rules, infer_heads, score_rule)
from rulelink.kg_store import KnowledgeGraph, Vocabulary
from rulelink.rule_model import Direction, RuleSet, parse_rule

from oracles import brute_force_heads, project, random_graph, random_rule_text

PLANTED = "speaks(X,Y) <= lives(X,A), lang(A,Y)"
SWAPPED_HEAD = "speaks(Y,X) <= lives(X,A), lang(A,Y)"


def names(g, triples):
    return {g.vocab.decode(t) for t in triples}


def test_c_rule_on_g0(g0):
    rule = parse_rule(PLANTED, g0.vocab)
    inferred = infer_heads(rule, g0)
    assert names(g0, inferred.triples) == {("max", "speaks", "english"), ("john", "speaks", "english")}
    assert not inferred.approximate
    assert inferred.triples == brute_force_heads(rule, set(g0.triples), range(len(g0.vocab.entities)))


def test_c_rule_confidence_on_g0(g0):
    res = confidence(parse_rule(PLANTED, g0.vocab), g0)
    assert (res.confidence, res.predicted, res.correct) == (0.5, 2, 1)


def test_literal_head_order_is_honoured(g0):
    # the same body with the head arguments swapped predicts the reversed triples
    rule = parse_rule(SWAPPED_HEAD, g0.vocab)
    assert names(g0, infer_heads(rule, g0).triples) == {("english", "speaks", "max"), ("english", "speaks", "john")}
    assert confidence(rule, g0).confidence == 0.0


def test_ac1_rule_on_g0(g0):
    rule = parse_rule("speaks(X,english) <= lives(X,A), lang(A,english)", g0.vocab)
    assert names(g0, infer_heads(rule, g0).triples) == {("max", "speaks", "english"), ("john", "speaks", "english")}
    rule = parse_rule("speaks(english,X) <= lives(X,A), lang(A,english)", g0.vocab)
    assert names(g0, infer_heads(rule, g0).triples) == {("english", "speaks", "max"), ("english", "speaks", "john")}


def test_any_rule_on_empty_graph(g0):
    empty = KnowledgeGraph([], g0.vocab)
    assert len(infer_heads(parse_rule(PLANTED, g0.vocab), empty)) == 0


def test_confidence_bounds(g0):
    full = parse_rule("speaks(X,Y) <= speaks(X,Y)", g0.vocab, sealed=False)
    assert confidence(full, g0).confidence == 1.0
    none_right = parse_rule("speaks(X,Y) <= lives(X,Y)", g0.vocab)
    assert confidence(none_right, g0).confidence == 0.0


def test_empty_inferred_set_has_no_confidence(g0):
    rule = parse_rule("speaks(X,Y) <= lang(X,A), lives(A,Y)", g0.vocab)
    with pytest.raises(UndefinedConfidence):
        confidence(rule, g0)
    assert score_rule(rule, g0) is None


def test_candidates_on_g0(g0):
    e, r = g0.vocab.entities.id, g0.vocab.relations.id
    rule = parse_rule(PLANTED, g0.vocab)
    assert candidates(rule, PredictionTask(e("max"), r("speaks"), Direction.TAIL), g0) == {e("english")}
    assert candidates(rule, PredictionTask(e("english"), r("speaks"), Direction.HEAD), g0) == {e("max"), e("john")}


def test_candidates_relation_mismatch(g0):
    e, r = g0.vocab.entities.id, g0.vocab.relations.id
    rule = parse_rule(PLANTED, g0.vocab)
    with pytest.raises(ContractViolation):
        candidates(rule, PredictionTask(e("max"), r("lives"), Direction.TAIL), g0)


def test_ac_rule_answers_its_constant_slot(g0):
    # speaks(X,english) also answers speaks(john, ?) with english
    e, r = g0.vocab.entities.id, g0.vocab.relations.id
    rule = parse_rule("speaks(X,english) <= lives(X,A), lang(A,english)", g0.vocab)
    assert candidates(rule, PredictionTask(e("john"), r("speaks"), Direction.TAIL), g0) == {e("english")}
    assert candidates(rule, PredictionTask(e("uk"), r("speaks"), Direction.TAIL), g0) == set()
    assert candidates(rule, PredictionTask(e("english"), r("speaks"), Direction.HEAD), g0) == {e("max"), e("john")}
    assert candidates(rule, PredictionTask(e("uk"), r("speaks"), Direction.HEAD), g0) == set()


def test_target_cannot_be_filtered():
    with pytest.raises(ContractViolation):
        PredictionTask(0, 0, Direction.TAIL, target=1, filter=frozenset({1}))


def test_fire_rules_drops_filtered(g0):
    e, r = g0.vocab.entities.id, g0.vocab.relations.id
    rules = RuleSet([parse_rule(PLANTED, g0.vocab)])
    task = PredictionTask(e("english"), r("speaks"), Direction.HEAD, target=e("john"),
                          filter=frozenset({e("max")}))
    assert fire_rules(rules, task, g0) == {e("john"): [0]}


def test_cap_flags_partial_result():
    vocab = Vocabulary()
    rows = [vocab.encode(f"a{i}", "r", f"b{j}") for i in range(30) for j in range(30)]
    g = KnowledgeGraph(rows, vocab)
    rule = parse_rule("r(X,Y) <= r(X,A), r(B,A), r(B,Y)", vocab)
    assert infer_heads(rule, g, cap=50).approximate
    assert not infer_heads(rule, g).approximate


def random_instance(rnd: random.Random, length: int):
    n_ent = rnd.randint(3, {1: 30, 2: 14, 3: 8}[length])
    vocab = Vocabulary()
    ents = [vocab.entities.add(f"e{i}") for i in range(n_ent)]
    rels = [vocab.relations.add(f"r{i}") for i in range(3)]
    rows = random_graph(rnd, n_ent, len(rels), rnd.randint(n_ent, 4 * n_ent))
    g = KnowledgeGraph(rows, vocab)
    text = random_rule_text(rnd, [f"r{i}" for i in rels], [f"e{i}" for i in ents], length)
    return g, parse_rule(text, vocab), ents


def check_against_oracle(g, rule, ents):
    expected = brute_force_heads(rule, set(g.triples), ents)
    assert infer_heads(rule, g).triples == expected
    for known in ents:
        for d in Direction:
            task = PredictionTask(known, rule.relation, d)
            assert candidates(rule, task, g) == project(expected, rule.relation, known, d is Direction.TAIL)
    if expected:
        res = confidence(rule, g)
        assert res.confidence == len(expected & g.triples) / len(expected)


@given(st.randoms(use_true_random=False), st.integers(1, 3))
@settings(max_examples=120, deadline=None)
def test_matches_brute_force(rnd, length):
    check_against_oracle(*random_instance(rnd, length))


@given(st.randoms(use_true_random=False), st.integers(1, 3))
@settings(max_examples=60, deadline=None)
def test_adding_triples_never_shrinks_inferred_set(rnd, length):
    g, rule, ents = random_instance(rnd, length)
    extra = random_graph(rnd, len(ents), len(g.vocab.relations), 5)
    bigger = KnowledgeGraph(g.triples | extra, g.vocab)
    assert infer_heads(rule, g).triples <= infer_heads(rule, bigger).triples


@given(st.randoms(use_true_random=False), st.integers(1, 3))
@settings(max_examples=60, deadline=None)
def test_confidence_in_unit_interval(rnd, length):
    g, rule, _ = random_instance(rnd, length)
    try:
        res = confidence(rule, g)
    except UndefinedConfidence:
        return
    assert 0.0 <= res.confidence <= 1.0 and res.correct <= res.predicted
