"""Exact-span micro-averaged precision/recall/F1 and the attention-gap
analysis comparing an enhanced model against a baseline."""

import csv
import json
from dataclasses import dataclass, field
from typing import List

import numpy as np

from . import autograd as ag
from .errors import SynGenError
from .layers import Diagnostics


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    predicted: int
    gold: int
    correct: int

    def to_dict(self):
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "predicted": self.predicted,
            "gold": self.gold,
            "correct": self.correct,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _prediction_tuple(p, kind):
    """Project a Prediction/GoldTriplet onto the subtask's tuple form."""
    parts = [p.aspect.start, p.aspect.end]
    if kind.needs_opinion:
        if p.opinion is None:
            raise SynGenError(f"{kind.value} comparison needs opinion spans")
        parts += [p.opinion.start, p.opinion.end]
    if kind.needs_polarity:
        if p.polarity is None:
            raise SynGenError(f"{kind.value} comparison needs polarity labels")
        parts.append(p.polarity)
    return tuple(parts)


def span_f1(pred_sets, gold_sets, kind):
    """Micro-averaged exact-match scores. A prediction counts iff its full
    tuple (all span boundaries, plus polarity when applicable) appears in
    the same sentence's gold set; duplicates count once."""
    if len(pred_sets) != len(gold_sets):
        raise SynGenError(
            f"prediction/gold lists are misaligned: {len(pred_sets)} vs {len(gold_sets)}"
        )
    n_pred = n_gold = n_correct = 0
    for preds, golds in zip(pred_sets, gold_sets):
        p = {_prediction_tuple(x, kind) for x in preds}
        g = {_prediction_tuple(x, kind) for x in golds}
        n_pred += len(p)
        n_gold += len(g)
        n_correct += len(p & g)
    precision = n_correct / n_pred if n_pred else 0.0
    recall = n_correct / n_gold if n_gold else 0.0
    f1 = 2 * precision * recall / (precision + recall) if n_correct else 0.0
    return EvalReport(
        precision=precision, recall=recall, f1=f1,
        predicted=n_pred, gold=n_gold, correct=n_correct,
    )


def attention_extract(model, sentence, layer=-1, head=None):
    """Self-attention of one semantic-encoder layer on the fused forward
    pass, shape (n+2) x (n+2); head-averaged unless `head` is given."""
    diag = Diagnostics()
    with ag.no_grad():
        model.encode(sentence, diag=diag)
    maps = diag.encoder_attention[layer]
    if head is None:
        return maps.mean(axis=0)
    return maps[head]


@dataclass
class AttentionGapReport:
    """Corpus-level aspect-to-opinion attention comparison.

    value_gap: mean difference of attention mass A_ours - A_baseline;
    rank_gap: mean normalized rank improvement of the opinion tokens;
    prop: mean of (A_ours - A_baseline) / A_ours over pairs with
    A_ours != 0 (others are excluded and counted).
    """

    value_gap: float
    rank_gap: float
    prop: float
    pairs: int
    excluded_prop_pairs: int
    per_example: List[dict] = field(default_factory=list)

    COLUMNS = ("Value", "Rank", "Prop")

    def to_dict(self):
        return {
            "Value": self.value_gap,
            "Rank": self.rank_gap,
            "Prop": self.prop,
            "pairs": self.pairs,
            "excluded_prop_pairs": self.excluded_prop_pairs,
        }


def _pair_mass(matrix, aspect, opinion):
    """Mean over aspect-token rows of the attention mass on the opinion
    tokens. Token i occupies row/column i (0 is <s>)."""
    rows = range(aspect.start, aspect.end + 1)
    cols = slice(opinion.start, opinion.end + 1)
    return float(np.mean([matrix[r, cols].sum() for r in rows]))


def _pair_rank(matrix, aspect, opinion, n):
    """Mean 0-based descending rank of the opinion columns among all token
    columns, averaged over aspect rows and normalized by (n - 1)."""
    if n <= 1:
        return 0.0
    ranks = []
    for r in range(aspect.start, aspect.end + 1):
        row = matrix[r, 1:n + 1]
        for c in range(opinion.start, opinion.end + 1):
            ranks.append(float(np.sum(row > row[c - 1])))
    return float(np.mean(ranks)) / (n - 1)


def attention_gap_pairs(ours, baseline, pairs, n):
    """Per-pair (value_gap, rank_gap, prop-or-None) rows for one sentence;
    `pairs` is a list of (aspect Span, opinion Span)."""
    if ours.shape != baseline.shape:
        raise SynGenError(f"attention shapes differ: {ours.shape} vs {baseline.shape}")
    rows = []
    for aspect, opinion in pairs:
        a_ours = _pair_mass(ours, aspect, opinion)
        a_base = _pair_mass(baseline, aspect, opinion)
        value = a_ours - a_base
        # Positive rank gap = the opinion climbs the ranking under ours.
        rank = _pair_rank(baseline, aspect, opinion, n) - _pair_rank(ours, aspect, opinion, n)
        prop = (a_ours - a_base) / a_ours if a_ours != 0.0 else None
        rows.append((value, rank, prop))
    return rows


def attention_gap(examples):
    """Aggregate pair rows over a corpus.

    `examples` is a list of (ours_matrix, baseline_matrix, pairs, n,
    sentence_id) tuples; returns an AttentionGapReport averaging over all
    pairs, excluding undefined proportions.
    """
    values, rank_gaps, props = [], [], []
    excluded = 0
    per_example = []
    for ours, baseline, pairs, n, sid in examples:
        rows = attention_gap_pairs(ours, baseline, pairs, n)
        for value, rank, prop in rows:
            values.append(value)
            rank_gaps.append(rank)
            if prop is None:
                excluded += 1
            else:
                props.append(prop)
        per_example.append({"sentence_id": sid, "rows": rows})
    return AttentionGapReport(
        value_gap=float(np.mean(values)) if values else 0.0,
        rank_gap=float(np.mean(rank_gaps)) if rank_gaps else 0.0,
        prop=float(np.mean(props)) if props else 0.0,
        pairs=len(values),
        excluded_prop_pairs=excluded,
        per_example=per_example,
    )


def position_labels(sentence):
    return ["<s>", *sentence.tokens, "</s>"]


def write_attention_csv(path, matrix, labels):
    """Matrix as CSV: row = query position, column = key position."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["query\\key", *labels])
        for label, row in zip(labels, matrix):
            writer.writerow([label, *(repr(float(v)) for v in row)])


def write_heatmap_dat(path, matrix):
    """Gnuplot-compatible heatmap data: 'x y value' triples, one blank
    line between rows (splot ... with image-compatible)."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, row in enumerate(matrix):
            for j, v in enumerate(row):
                fh.write(f"{j} {i} {float(v)!r}\n")
            fh.write("\n")


def write_gap_csv(path, report):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(AttentionGapReport.COLUMNS)
        writer.writerow([repr(report.value_gap), repr(report.rank_gap), repr(report.prop)])
