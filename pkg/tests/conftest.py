import pytest

from rulelink.kg_store import KnowledgeGraph, Vocabulary

G0_ROWS = [
    ("max", "lives", "uk"),
    ("john", "lives", "uk"),
    ("uk", "lang", "english"),
    ("max", "speaks", "english"),
]


def make_g0() -> KnowledgeGraph:
    vocab = Vocabulary()
    return KnowledgeGraph([vocab.encode(*row) for row in G0_ROWS], vocab)


@pytest.fixture
def g0():
    return make_g0()


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
