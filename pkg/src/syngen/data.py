"""Annotated-sentence ingestion: parsing, validation, vocabularies,
dependency-graph adjacency, and gold-target linearization.

Dataset files are UTF-8 JSON lines:

    {"tokens": ["Food", "is", ...], "pos": ["NOUN", "AUX", ...],
     "deps": [[2, 1], [0, 2], ...],
     "triplets": [{"aspect": [1, 1], "opinion": [6, 6], "polarity": "positive"}]}

Span indices are 1-based inclusive; "deps" entries are [head, dependent]
with head 0 for the root; "opinion"/"polarity" may be omitted when the
subtask does not need them.
"""

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from .errors import IncompleteGoldError, ParseError, ValidationError

POLARITIES = ("neutral", "positive", "negative")

# The 17-tag Universal POS inventory.
UPOS_TAGS = (
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
)

POS_PAD = "<pad>"
POS_TAG_TO_ID = {POS_PAD: 0, **{tag: i + 1 for i, tag in enumerate(UPOS_TAGS)}}


@dataclass(frozen=True, order=True)
class Span:
    start: int  # 1-based, inclusive
    end: int


@dataclass(frozen=True)
class GoldTriplet:
    aspect: Span
    opinion: Optional[Span] = None
    polarity: Optional[str] = None


@dataclass(frozen=True)
class Sentence:
    tokens: Tuple[str, ...]
    pos_tags: Tuple[str, ...]
    dep_edges: Tuple[Tuple[int, int], ...]  # (head, dependent), head 0 = root
    gold: Tuple[GoldTriplet, ...] = ()
    sentence_id: str = ""

    def __post_init__(self):
        n = len(self.tokens)
        if n < 1:
            raise ValidationError("tokens", "sentence must contain at least one token")
        if len(self.pos_tags) != n:
            raise ValidationError(
                "pos_tags", f"{len(self.pos_tags)} POS tags for {n} tokens"
            )
        for tag in self.pos_tags:
            if tag not in POS_TAG_TO_ID:
                raise ValidationError("pos_tags", f"unknown POS tag {tag!r}")
        self._check_tree(n)
        for t in self.gold:
            for label, span in (("aspect", t.aspect), ("opinion", t.opinion)):
                if span is None:
                    continue
                if not (1 <= span.start <= span.end <= n):
                    raise ValidationError(
                        label, f"span ({span.start}, {span.end}) out of range for n={n}"
                    )
            if t.polarity is not None and t.polarity not in POLARITIES:
                raise ValidationError("polarity", f"unknown polarity {t.polarity!r}")

    def _check_tree(self, n):
        if len(self.dep_edges) != n:
            raise ValidationError(
                "deps", f"{len(self.dep_edges)} edges for {n} tokens (expected {n})"
            )
        seen = set()
        head_of = {}
        for head, dep in self.dep_edges:
            if not (1 <= dep <= n):
                raise ValidationError("deps", f"dependent {dep} out of range 1..{n}")
            if not (0 <= head <= n):
                raise ValidationError("deps", f"head {head} out of range 0..{n}")
            if head == dep:
                raise ValidationError("deps", f"self-loop on word {dep}")
            if dep in seen:
                raise ValidationError("deps", f"dependent {dep} appears twice")
            seen.add(dep)
            head_of[dep] = head
        roots = [d for d, h in head_of.items() if h == 0]
        if len(roots) != 1:
            raise ValidationError("deps", f"expected exactly one root edge, got {len(roots)}")
        # Reachability from the root proves the edges form a tree.
        children = {}
        for dep, head in head_of.items():
            children.setdefault(head, []).append(dep)
        reached = set()
        frontier = [roots[0]]
        while frontier:
            node = frontier.pop()
            if node in reached:
                continue
            reached.add(node)
            frontier.extend(children.get(node, ()))
        if len(reached) != n:
            raise ValidationError("deps", "dependency edges contain a cycle")

    @property
    def n(self):
        return len(self.tokens)


class SubtaskKind(Enum):
    AESC = "aesc"
    PAIR = "pair"
    TRIPLET = "triplet"

    @property
    def frame_length(self):
        return {SubtaskKind.AESC: 3, SubtaskKind.PAIR: 4, SubtaskKind.TRIPLET: 5}[self]

    @property
    def needs_opinion(self):
        return self in (SubtaskKind.PAIR, SubtaskKind.TRIPLET)

    @property
    def needs_polarity(self):
        return self in (SubtaskKind.AESC, SubtaskKind.TRIPLET)


class IndexKind(Enum):
    BOS = "bos"
    POINTER = "pointer"
    EOS = "eos"
    POLARITY = "polarity"


@dataclass(frozen=True)
class CandidateIndexSpace:
    """The n+5 decoding outcomes: index 0 is begin-of-sequence, 1..n point
    at tokens, n+1 is end-of-sequence, n+2..n+4 are the polarity classes
    (neutral, positive, negative)."""

    n: int

    @property
    def total(self):
        return self.n + 5

    @property
    def eos(self):
        return self.n + 1

    @property
    def bos(self):
        return 0

    def polarity_index(self, polarity):
        return self.n + 2 + POLARITIES.index(polarity)

    def kind(self, y):
        if not 0 <= y <= self.n + 4:
            raise IndexError(f"candidate index {y} out of range 0..{self.n + 4}")
        if y == 0:
            return IndexKind.BOS
        if y <= self.n:
            return IndexKind.POINTER
        if y == self.n + 1:
            return IndexKind.EOS
        return IndexKind.POLARITY

    def polarity_class(self, y):
        if self.kind(y) is not IndexKind.POLARITY:
            raise IndexError(f"index {y} is not a polarity index")
        return y - (self.n + 2)


def index_kind(y, space):
    return space.kind(y)


@dataclass(frozen=True)
class AdjacencyMatrix:
    n: int
    bits: np.ndarray  # (n, n) bool, symmetric, True diagonal


def build_adjacency(sentence):
    """Bidirectional dependency-graph adjacency with self-loops; the root
    edge (head 0) contributes nothing."""
    n = sentence.n
    bits = np.zeros((n, n), dtype=bool)
    np.fill_diagonal(bits, True)
    for head, dep in sentence.dep_edges:
        if head == 0:
            continue
        bits[head - 1, dep - 1] = True
        bits[dep - 1, head - 1] = True
    return AdjacencyMatrix(n=n, bits=bits)


class Vocabulary:
    """Token ids with reserved specials. Ids are dense from 0 and the
    reserved block is stable across save/load."""

    PAD = "<pad>"
    BOS = "<s>"
    EOS = "</s>"
    UNK = "<unk>"
    CLASS_TOKENS = ("<neutral>", "<positive>", "<negative>")
    RESERVED = (PAD, BOS, EOS, UNK) + CLASS_TOKENS

    def __init__(self, tokens=()):
        self._token_to_id = {}
        for tok in self.RESERVED:
            self._token_to_id[tok] = len(self._token_to_id)
        for tok in tokens:
            if tok not in self._token_to_id:
                self._token_to_id[tok] = len(self._token_to_id)
        self._id_to_token = {i: t for t, i in self._token_to_id.items()}

    @classmethod
    def build(cls, sentences):
        seen = []
        known = set()
        for s in sentences:
            for tok in s.tokens:
                if tok not in known:
                    known.add(tok)
                    seen.append(tok)
        return cls(seen)

    def __len__(self):
        return len(self._token_to_id)

    def __contains__(self, token):
        return token in self._token_to_id

    @property
    def pad_id(self):
        return self._token_to_id[self.PAD]

    @property
    def bos_id(self):
        return self._token_to_id[self.BOS]

    @property
    def eos_id(self):
        return self._token_to_id[self.EOS]

    @property
    def unk_id(self):
        return self._token_to_id[self.UNK]

    @property
    def class_token_ids(self):
        return tuple(self._token_to_id[t] for t in self.CLASS_TOKENS)

    def encode(self, token):
        return self._token_to_id.get(token, self._token_to_id[self.UNK])

    def decode(self, idx):
        return self._id_to_token[idx]

    def to_list(self):
        return [self._id_to_token[i] for i in range(len(self._id_to_token))]

    @classmethod
    def from_list(cls, tokens):
        if tuple(tokens[: len(cls.RESERVED)]) != cls.RESERVED:
            raise ValidationError("vocab", "reserved token block is corrupted")
        return cls(tokens[len(cls.RESERVED):])


def _parse_span(obj, label, line_no):
    if (
        not isinstance(obj, (list, tuple))
        or len(obj) != 2
        or not all(isinstance(v, int) for v in obj)
    ):
        raise ParseError(line_no, f"{label} must be a [start, end] pair of integers")
    return Span(obj[0], obj[1])


def parse_sentence(obj, line_no=0, sentence_id=""):
    try:
        tokens = tuple(obj["tokens"])
        pos = tuple(obj["pos"])
        deps = tuple((int(h), int(d)) for h, d in obj["deps"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(line_no, f"missing or malformed field: {exc}")
    triplets = []
    for raw in obj.get("triplets", []):
        if "aspect" not in raw:
            raise ParseError(line_no, "triplet without an aspect span")
        aspect = _parse_span(raw["aspect"], "aspect", line_no)
        opinion = _parse_span(raw["opinion"], "opinion", line_no) if "opinion" in raw else None
        triplets.append(
            GoldTriplet(aspect=aspect, opinion=opinion, polarity=raw.get("polarity"))
        )
    return Sentence(
        tokens=tokens,
        pos_tags=pos,
        dep_edges=deps,
        gold=tuple(triplets),
        sentence_id=sentence_id or obj.get("id", f"line{line_no}"),
    )


def parse_dataset(path):
    """Read a JSONL dataset; every sentence is validated on construction."""
    sentences = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(line_no, f"invalid JSON: {exc}")
            sentences.append(parse_sentence(obj, line_no))
    return sentences


def _require_gold_fields(sentence, kind):
    for t in sentence.gold:
        if kind.needs_opinion and t.opinion is None:
            raise IncompleteGoldError(
                f"{sentence.sentence_id}: {kind.value} needs opinion spans"
            )
        if kind.needs_polarity and t.polarity is None:
            raise IncompleteGoldError(
                f"{sentence.sentence_id}: {kind.value} needs polarity labels"
            )


def gold_frames(sentence, kind, space):
    """Per-prediction candidate-index frames, sorted and deduplicated."""
    _require_gold_fields(sentence, kind)
    frames = []
    for t in sentence.gold:
        frame = [t.aspect.start, t.aspect.end]
        if kind.needs_opinion:
            frame += [t.opinion.start, t.opinion.end]
        if kind.needs_polarity:
            frame.append(space.polarity_index(t.polarity))
        frames.append(tuple(frame))
    out = []
    for frame in sorted(set(frames)):
        out.append(frame)
    return out


def linearize_targets(sentence, kind, space):
    """Gold predictions flattened to one index sequence, sorted by
    (aspect start, aspect end, opinion start) and terminated by </s>."""
    seq = []
    for frame in gold_frames(sentence, kind, space):
        seq.extend(frame)
    seq.append(space.eos)
    return seq
