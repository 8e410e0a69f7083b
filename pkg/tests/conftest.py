import json

import pytest

from syngen.data import parse_sentence
from syngen.model import ModelConfig, SynGenModel
from syngen.data import Vocabulary

# Hand-annotated fixture: 10 tokens, one (aspect, opinion, polarity)
# triplet on positions 1 and 6.
FRESH_REVIEW = {
    "id": "fresh-review",
    "tokens": ["Food", "is", "always", "fresh", "and", "hot", "ready", "to", "eat", "!"],
    "pos": ["NOUN", "AUX", "ADV", "ADJ", "CCONJ", "ADJ", "ADJ", "PART", "VERB", "PUNCT"],
    "deps": [[4, 1], [4, 2], [4, 3], [0, 4], [6, 5], [4, 6], [4, 7], [9, 8], [7, 9], [4, 10]],
    "triplets": [{"aspect": [1, 1], "opinion": [6, 6], "polarity": "positive"}],
}

# 10-token fixture with aspect "sushi" (6) and opinion "best" (5).
SUSHI_REVIEW = {
    "id": "sushi-review",
    "tokens": ["This", "place", "has", "the", "best", "sushi", "in", "the", "city", "."],
    "pos": ["DET", "NOUN", "VERB", "DET", "ADJ", "NOUN", "ADP", "DET", "NOUN", "PUNCT"],
    "deps": [[2, 1], [3, 2], [0, 3], [6, 4], [6, 5], [3, 6], [9, 7], [9, 8], [6, 9], [3, 10]],
    "triplets": [{"aspect": [6, 6], "opinion": [5, 5], "polarity": "positive"}],
}


@pytest.fixture
def fresh_review():
    return parse_sentence(FRESH_REVIEW)


@pytest.fixture
def sushi_review():
    return parse_sentence(SUSHI_REVIEW)


def write_jsonl(path, objects):
    with open(path, "w", encoding="utf-8") as fh:
        for obj in objects:
            fh.write(json.dumps(obj) + "\n")


def tiny_config(**overrides):
    defaults = dict(
        d=8, enc_layers=1, dec_layers=1, heads=2,
        max_positions=16, dec_max_positions=16,
    )
    defaults.update(overrides)
    return ModelConfig(**defaults)


def tiny_model(sentences, seed=0, **overrides):
    vocab = Vocabulary.build(sentences)
    return SynGenModel(vocab, tiny_config(**overrides), seed=seed)
