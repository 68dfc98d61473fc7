import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rulelink.rule_model import (ClassificationError, Direction, ResolutionError, RuleFileError,
                                 RuleSet, RuleType, load_ruleset, parse_rule, parse_rule_line,
                                 save_ruleset, serialize_rule)

from conftest import make_g0
from oracles import random_rule_text

GROUND_PATH_RULES = [
    ("speaks(Y,X) <= lives(X,A), lang(A,Y)", RuleType.C),
    ("speaks(english,X) <= lives(X,A), lang(A,english)", RuleType.AC1),
    ("speaks(Y,max) <= lives(max,A), lang(A,Y)", RuleType.AC1),
]


@pytest.mark.parametrize("text,kind", GROUND_PATH_RULES)
def test_ground_path_rules_classify(g0, text, kind):
    rule = parse_rule(text, g0.vocab)
    assert rule.rule_type is kind
    assert g0.vocab.relations.name(rule.relation) == "speaks"


@pytest.mark.parametrize("text,kind", GROUND_PATH_RULES)
def test_ground_path_rules_round_trip(g0, text, kind):
    rule = parse_rule(text, g0.vocab)
    assert serialize_rule(rule, g0.vocab) == text
    assert parse_rule(serialize_rule(rule, g0.vocab), g0.vocab) == rule


def test_ac2_classification(g0):
    rule = parse_rule("speaks(X,english) <= lives(X,A)", g0.vocab)
    assert rule.rule_type is RuleType.AC2


def test_disconnected_body(g0):
    vocab = g0.vocab
    vocab.relations.add("h")
    vocab.relations.add("b")
    with pytest.raises(ClassificationError):
        parse_rule("h(X,Y) <= b(A,B)", vocab)


def test_head_without_variable_is_rejected(g0):
    with pytest.raises(ClassificationError):
        parse_rule("speaks(max,english) <= lives(max,uk)", g0.vocab)


def test_sealed_vocabulary(g0):
    with pytest.raises(ResolutionError):
        parse_rule("speaks(X,Y) <= knows(X,Y)", g0.vocab)
    rule = parse_rule("speaks(X,Y) <= knows(X,Y)", g0.vocab, sealed=False)
    assert rule.rule_type is RuleType.C


def test_serialization_is_deterministic(g0):
    rule = parse_rule(GROUND_PATH_RULES[0][0], g0.vocab)
    assert serialize_rule(rule, g0.vocab) == serialize_rule(rule, g0.vocab)


def test_rule_line_from_file_format(g0):
    rule = parse_rule_line("2\t1\t0.5\tspeaks(X,Y) <= lives(X,A), lang(A,Y)", g0.vocab)
    assert rule.rule_type is RuleType.C
    assert (rule.confidence, rule.predicted, rule.correct) == (0.5, 2, 1)


@pytest.mark.parametrize("line", [
    "2\t1\t1.2\tspeaks(X,Y) <= lives(X,A), lang(A,Y)",
    "2\t3\t0.5\tspeaks(X,Y) <= lives(X,A), lang(A,Y)",
    "2\t1\tspeaks(X,Y) <= lives(X,A), lang(A,Y)",
])
def test_bad_rule_lines(g0, line):
    with pytest.raises(RuleFileError):
        parse_rule_line(line, g0.vocab)


def test_empty_rule_file(tmp_path, g0):
    path = tmp_path / "rules.txt"
    path.write_text("")
    assert len(load_ruleset(path, g0.vocab)) == 0


def test_save_load_round_trip(tmp_path, g0):
    rules = [parse_rule_line(f"4\t{i}\t{i / 4!r}\t{text}", g0.vocab) for i, (text, _) in enumerate(GROUND_PATH_RULES)]
    path = tmp_path / "rules.txt"
    save_ruleset(rules, path, g0.vocab, header="# test\n")
    loaded = load_ruleset(path, g0.vocab)
    assert list(loaded) == rules
    assert [r.confidence for r in loaded] == [r.confidence for r in rules]


def test_ruleset_groups_cover_both_directions(g0):
    rs = RuleSet([parse_rule(text, g0.vocab) for text, _ in GROUND_PATH_RULES])
    speaks = g0.vocab.relations.id("speaks")
    assert rs.group(speaks, Direction.HEAD) == [0, 1, 2]
    assert rs.group(speaks, Direction.TAIL) == [0, 1, 2]


@given(st.randoms(use_true_random=False), st.integers(1, 3))
@settings(max_examples=150, deadline=None)
def test_random_rules_round_trip(rnd, length):
    g0 = make_g0()
    text = random_rule_text(rnd, ["lives", "lang", "speaks"], ["max", "john", "uk", "english"], length)
    rule = parse_rule(text, g0.vocab)
    again = parse_rule(serialize_rule(rule, g0.vocab), g0.vocab)
    assert again == rule and again.rule_type is rule.rule_type
