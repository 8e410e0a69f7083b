"""Seeded synthetic datasets: template sentences with fixed POS tags,
random dependency trees, and gold triplets consistent with an opinion
lexicon. Small enough to overfit in minutes, rich enough to exercise
multi-token aspects and multi-triplet sentences."""

import json

import numpy as np

from .data import parse_sentence

ASPECTS = [
    ("pizza",), ("service",), ("battery", "life"), ("screen",), ("soup",),
    ("keyboard",), ("waiter",), ("price",), ("menu",), ("touch", "pad"),
]

OPINION_WORDS = {
    "positive": ["great", "fresh", "friendly", "bright", "tasty"],
    "negative": ["terrible", "stale", "rude", "dim", "bland"],
    "neutral": ["average", "plain"],
}

_WORD_POS = {
    "the": "DET", "was": "AUX", "seemed": "VERB", "and": "CCONJ",
    "really": "ADV", ".": "PUNCT", "but": "CCONJ",
}


def _pos_tag(word, role):
    if word in _WORD_POS:
        return _WORD_POS[word]
    return "NOUN" if role == "aspect" else "ADJ"


def _random_tree(n, rng):
    """Random recursive tree over 1..n as [head, dependent] edges."""
    order = [int(v) for v in rng.permutation(n) + 1]
    edges = [[0, order[0]]]
    for i, node in enumerate(order[1:], start=1):
        edges.append([order[int(rng.integers(0, i))], node])
    return edges


def _pick_opinion(rng):
    polarity = ["positive", "negative", "neutral"][int(rng.integers(0, 3))]
    words = OPINION_WORDS[polarity]
    return words[int(rng.integers(0, len(words)))], polarity


def _single_clause(rng, tokens, roles, triplets):
    """Append 'the ASPECT was OPINION' and record its triplet."""
    aspect = ASPECTS[int(rng.integers(0, len(ASPECTS)))]
    opinion, polarity = _pick_opinion(rng)
    verb = "was" if rng.integers(0, 2) == 0 else "seemed"
    tokens.append("the")
    roles.append("other")
    a_start = len(tokens) + 1
    for w in aspect:
        tokens.append(w)
        roles.append("aspect")
    a_end = len(tokens)
    tokens.append(verb)
    roles.append("other")
    if rng.integers(0, 3) == 0:
        tokens.append("really")
        roles.append("other")
    o_pos = len(tokens) + 1
    tokens.append(opinion)
    roles.append("opinion")
    triplets.append(
        {"aspect": [a_start, a_end], "opinion": [o_pos, o_pos], "polarity": polarity}
    )


def generate_sentence(rng, sentence_id):
    tokens, roles, triplets = [], [], []
    _single_clause(rng, tokens, roles, triplets)
    if rng.integers(0, 2) == 0:
        tokens.append("and" if rng.integers(0, 2) == 0 else "but")
        roles.append("other")
        _single_clause(rng, tokens, roles, triplets)
    tokens.append(".")
    roles.append("other")
    pos = [_pos_tag(w, r) for w, r in zip(tokens, roles)]
    obj = {
        "id": sentence_id,
        "tokens": tokens,
        "pos": pos,
        "deps": _random_tree(len(tokens), rng),
        "triplets": triplets,
    }
    # Round-trip through the validator so generation bugs fail loudly.
    parse_sentence(obj, sentence_id=sentence_id)
    return obj


def generate_dataset(count, seed):
    rng = np.random.default_rng(seed)
    return [generate_sentence(rng, f"synth{seed}_{i:04d}") for i in range(count)]


def write_jsonl(path, objects):
    with open(path, "w", encoding="utf-8") as fh:
        for obj in objects:
            fh.write(json.dumps(obj, sort_keys=True))
            fh.write("\n")
