"""Small planted-rule dataset: ``speaks(X,Y) <= lives(X,A), lang(A,Y)`` holds exactly.

60 entities: 40 people, 10 countries, 10 languages. Every country has one
language; each person lives in one country and speaks its language. People
are split 24/8/8. Train holds everything about train people plus ``lang``,
``borders`` and ``friend`` noise; valid holds ``lives`` for valid and test
people and ``speaks`` for valid people; test holds ``speaks`` for test people.
The planted rule therefore has confidence 1.0 on train, and applying rules to
train+valid predicts every test triple.
"""

from __future__ import annotations

import random
from pathlib import Path

PEOPLE, COUNTRIES = 40, 10


def planted_dataset(seed: int = 7) -> dict[str, list[tuple[str, str, str]]]:
    rng = random.Random(seed)
    people = [f"p{i:02d}" for i in range(PEOPLE)]
    countries = [f"c{j}" for j in range(COUNTRIES)]
    languages = [f"l{j}" for j in range(COUNTRIES)]
    home = {p: countries[i % COUNTRIES] if i < 2 * COUNTRIES else rng.choice(countries)
            for i, p in enumerate(people)}
    order = people[:]
    rng.shuffle(order)
    train_p, valid_p, test_p = order[:24], order[24:32], order[32:]

    lang = [(c, "lang", languages[j]) for j, c in enumerate(countries)]
    borders = set()
    while len(borders) < 8:
        a, b = rng.sample(countries, 2)
        if (b, a) not in borders:
            borders.add((a, b))
    friends = set()
    while len(friends) < 50:
        a, b = rng.sample(people, 2)
        if (b, a) not in friends:
            friends.add((a, b))

    def lives(p):
        return (p, "lives", home[p])

    def speaks(p):
        return (p, "speaks", languages[countries.index(home[p])])

    train = ([lives(p) for p in train_p] + [speaks(p) for p in train_p] + lang
             + [(a, "borders", b) for a, b in sorted(borders)]
             + [(a, "friend", b) for a, b in sorted(friends)])
    valid = [lives(p) for p in valid_p + test_p] + [speaks(p) for p in valid_p]
    test = [speaks(p) for p in test_p]
    return {"train": sorted(train), "valid": sorted(valid), "test": sorted(test)}


PLANTED_CONFIG = """\
# planted-rule demo pipeline
train = train.txt
valid = valid.txt
test = test.txt
rules = rules.txt
signatures = signatures.bin
thresholds = thresholds.txt
clusters = clusters.txt
predictions = predictions.txt
report = report.txt
apply_graph = train+valid
seed = 1
threads = 1
miner_iterations = 3000
max_len_cyclic = 3
max_len_acyclic = 1
top_k = 100
minhash_k = 256
search = random
random_levels = 10
random_iterations = 200
grid_steps = 20
"""


def write_planted(directory, seed: int = 7) -> Path:
    """Write the splits and a pipeline config into ``directory``; returns the config path."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    for split, rows in planted_dataset(seed).items():
        with open(out / f"{split}.txt", "w", encoding="utf-8", newline="\n") as fh:
            for row in rows:
                fh.write("\t".join(row) + "\n")
    cfg = out / "pipeline.cfg"
    cfg.write_text(PLANTED_CONFIG, encoding="utf-8")
    return cfg
