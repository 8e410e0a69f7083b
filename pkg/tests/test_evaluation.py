import csv

import numpy as np
import pytest

from syngen.data import Span, SubtaskKind, parse_sentence
from syngen.errors import SynGenError
from syngen.evaluation import (
    attention_extract,
    attention_gap,
    attention_gap_pairs,
    position_labels,
    span_f1,
    write_attention_csv,
)
from syngen.inference import Prediction
from syngen.synth import generate_dataset

from conftest import tiny_model


def _pred(a, o=None, p=None):
    return Prediction(
        aspect=Span(*a),
        opinion=None if o is None else Span(*o),
        polarity=p,
    )


# ---------------------------------------------------------------------------
# span F1


def test_perfect_match_scores_one():
    golds = [[_pred((1, 2), (3, 3), "positive")]]
    report = span_f1(golds, golds, SubtaskKind.TRIPLET)
    assert report.precision == report.recall == report.f1 == 1.0


def test_disjoint_sets_score_zero():
    preds = [[_pred((1, 1), (2, 2), "positive")]]
    golds = [[_pred((3, 3), (4, 4), "negative")]]
    report = span_f1(preds, golds, SubtaskKind.TRIPLET)
    assert report.precision == report.recall == report.f1 == 0.0


def test_harmonic_mean_fixture():
    # 2 correct of 3 predicted, 4 gold -> P=2/3, R=1/2, F1=4/7.
    preds = [[
        _pred((1, 1), (2, 2), "positive"),
        _pred((3, 3), (4, 4), "negative"),
        _pred((5, 5), (6, 6), "neutral"),
    ]]
    golds = [[
        _pred((1, 1), (2, 2), "positive"),
        _pred((3, 3), (4, 4), "negative"),
        _pred((7, 7), (8, 8), "neutral"),
        _pred((9, 9), (9, 9), "positive"),
    ]]
    report = span_f1(preds, golds, SubtaskKind.TRIPLET)
    assert abs(report.precision - 2 / 3) < 1e-15
    assert abs(report.recall - 1 / 2) < 1e-15
    assert abs(report.f1 - 4 / 7) < 1e-15


def test_polarity_mismatch_is_incorrect():
    preds = [[_pred((1, 1), (2, 2), "positive")]]
    golds = [[_pred((1, 1), (2, 2), "negative")]]
    assert span_f1(preds, golds, SubtaskKind.TRIPLET).correct == 0
    # PAIR ignores polarity, so the same spans match.
    assert span_f1(preds, golds, SubtaskKind.PAIR).correct == 1


def test_duplicates_count_once():
    preds = [[_pred((1, 1), (2, 2), "positive"), _pred((1, 1), (2, 2), "positive")]]
    golds = [[_pred((1, 1), (2, 2), "positive")]]
    report = span_f1(preds, golds, SubtaskKind.TRIPLET)
    assert report.predicted == 1 and report.correct == 1


def test_alignment_error():
    with pytest.raises(SynGenError, match="misaligned"):
        span_f1([[]], [[], []], SubtaskKind.TRIPLET)


def test_span_f1_matches_set_oracle():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n_sent = int(rng.integers(1, 4))
        preds, golds = [], []
        for _ in range(n_sent):
            def random_set():
                out = []
                for _ in range(int(rng.integers(0, 4))):
                    a = int(rng.integers(1, 5))
                    o = int(rng.integers(1, 5))
                    pol = ["neutral", "positive", "negative"][int(rng.integers(0, 3))]
                    out.append(_pred((a, a), (o, o), pol))
                return out

            preds.append(random_set())
            golds.append(random_set())
        report = span_f1(preds, golds, SubtaskKind.TRIPLET)

        def key(p):
            return (p.aspect.start, p.aspect.end, p.opinion.start, p.opinion.end, p.polarity)

        np_, ng, nc = 0, 0, 0
        for ps, gs in zip(preds, golds):
            pset = {key(p) for p in ps}
            gset = {key(g) for g in gs}
            np_ += len(pset)
            ng += len(gset)
            nc += len(pset & gset)
        p_ref = nc / np_ if np_ else 0.0
        r_ref = nc / ng if ng else 0.0
        f_ref = 2 * p_ref * r_ref / (p_ref + r_ref) if nc else 0.0
        assert report.precision == p_ref
        assert report.recall == r_ref
        assert report.f1 == f_ref


def test_f1_identities():
    rng = np.random.default_rng(1)
    for _ in range(200):
        preds = [[_pred((int(rng.integers(1, 4)),) * 2, (1, 1), "positive")
                  for _ in range(int(rng.integers(0, 3)))]]
        golds = [[_pred((int(rng.integers(1, 4)),) * 2, (1, 1), "positive")
                  for _ in range(int(rng.integers(0, 3)))]]
        r = span_f1(preds, golds, SubtaskKind.TRIPLET)
        assert abs(r.f1 * (r.precision + r.recall) - 2 * r.precision * r.recall) < 1e-12
        assert r.f1 <= max(r.precision, r.recall) + 1e-12


# ---------------------------------------------------------------------------
# attention extraction


def _fixture_model_and_sentence(seed=0):
    sentences = [parse_sentence(o) for o in generate_dataset(3, seed=seed)]
    return tiny_model(sentences), sentences[0]


def test_attention_matrix_shape_and_row_sums():
    model, s = _fixture_model_and_sentence()
    att = attention_extract(model, s)
    assert att.shape == (s.n + 2, s.n + 2)
    assert np.max(np.abs(att.sum(axis=1) - 1.0)) < 1e-12


def test_attention_single_head_selection():
    model, s = _fixture_model_and_sentence(seed=1)
    avg = attention_extract(model, s)
    h0 = attention_extract(model, s, head=0)
    h1 = attention_extract(model, s, head=1)
    assert np.allclose((h0 + h1) / 2.0, avg, atol=1e-15)


def test_attention_csv_header_lists_tokens(tmp_path, sushi_review):
    model = tiny_model([sushi_review])
    att = attention_extract(model, sushi_review)
    path = tmp_path / "attn.csv"
    write_attention_csv(path, att, position_labels(sushi_review))
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    for token in sushi_review.tokens:
        assert token in header
    assert len(rows) == sushi_review.n + 3  # header + n+2 positions
    # the ("sushi", "best") cell exists: row with label sushi, column best
    sushi_row = next(r for r in rows[1:] if r[0] == "sushi")
    best_col = header.index("best")
    float(sushi_row[best_col])  # parses as a number


# ---------------------------------------------------------------------------
# attention gap


def test_gap_of_identical_matrices_is_zero():
    rng = np.random.default_rng(2)
    m = rng.uniform(size=(7, 7))
    pairs = [(Span(1, 2), Span(4, 4)), (Span(3, 3), Span(5, 5))]
    report = attention_gap([(m, m, pairs, 5, "s")])
    assert report.value_gap == 0.0
    assert report.rank_gap == 0.0
    assert report.prop == 0.0


def test_prop_fixture():
    # A_ours = 0.5, A_baseline = 0.3 -> prop = 0.4
    ours = np.zeros((3, 3))
    base = np.zeros((3, 3))
    ours[1, 1] = 0.5
    base[1, 1] = 0.3
    rows = attention_gap_pairs(ours, base, [(Span(1, 1), Span(1, 1))], 1)
    value, rank, prop = rows[0]
    assert abs(prop - 0.4) < 1e-15
    assert abs(value - 0.2) < 1e-15


def test_prop_scale_covariance():
    rng = np.random.default_rng(3)
    ours = rng.uniform(0.1, 1.0, size=(6, 6))
    base = rng.uniform(0.1, 1.0, size=(6, 6))
    pairs = [(Span(1, 1), Span(3, 4))]
    before = attention_gap_pairs(ours, base, pairs, 4)[0][2]
    after = attention_gap_pairs(3.7 * ours, 3.7 * base, pairs, 4)[0][2]
    assert abs(before - after) < 1e-12


def test_prop_undefined_pairs_are_excluded_and_counted():
    ours = np.zeros((4, 4))
    base = np.ones((4, 4))
    pairs = [(Span(1, 1), Span(2, 2))]
    report = attention_gap([(ours, base, pairs, 2, "s")])
    assert report.excluded_prop_pairs == 1
    assert report.pairs == 1


def test_rank_gap_direction_positive_when_ours_ranks_higher():
    n = 4
    ours = np.full((6, 6), 0.1)
    base = np.full((6, 6), 0.1)
    # aspect row 1; opinion column 3. ours ranks it 0th, baseline 2nd.
    ours[1, 3] = 0.9
    base[1, 1] = 0.9
    base[1, 2] = 0.8
    rows = attention_gap_pairs(ours, base, [(Span(1, 1), Span(3, 3))], n)
    assert rows[0][1] > 0


def test_report_emits_value_rank_prop_columns(tmp_path):
    from syngen.evaluation import AttentionGapReport, write_gap_csv

    rng = np.random.default_rng(4)
    m1 = rng.uniform(size=(5, 5))
    m2 = rng.uniform(size=(5, 5))
    report = attention_gap([(m1, m2, [(Span(1, 1), Span(2, 3))], 3, "x")])
    assert AttentionGapReport.COLUMNS == ("Value", "Rank", "Prop")
    assert set(report.to_dict()) >= {"Value", "Rank", "Prop"}
    path = tmp_path / "gaps.csv"
    write_gap_csv(path, report)
    header = path.read_text(encoding="utf-8").splitlines()[0]
    assert header == "Value,Rank,Prop"


def test_multi_token_spans_average():
    # Aspect spanning rows 1-2, opinion spanning columns 3-4.
    m_ours = np.zeros((7, 7))
    m_base = np.zeros((7, 7))
    m_ours[1, 3], m_ours[1, 4] = 0.2, 0.1
    m_ours[2, 3], m_ours[2, 4] = 0.4, 0.1
    m_base[1, 3], m_base[2, 4] = 0.1, 0.1
    rows = attention_gap_pairs(m_ours, m_base, [(Span(1, 2), Span(3, 4))], 5)
    a_ours = ((0.2 + 0.1) + (0.4 + 0.1)) / 2.0
    a_base = (0.1 + 0.1) / 2.0
    assert abs(rows[0][0] - (a_ours - a_base)) < 1e-15
    assert abs(rows[0][2] - (a_ours - a_base) / a_ours) < 1e-15
