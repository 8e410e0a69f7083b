import numpy as np
import pytest

from syngen import autograd as ag
from syngen.data import CandidateIndexSpace, parse_sentence
from syngen.decoder import candidate_states, index_to_token, step_distribution
from syngen.errors import ConfigurationError
from syngen.layers import Diagnostics
from syngen.synth import generate_dataset

from conftest import tiny_model


def _sentences(count, seed=0):
    return [parse_sentence(o) for o in generate_dataset(count, seed=seed)]


# ---------------------------------------------------------------------------
# index-to-token conversion


def test_pointer_index_maps_to_pointed_word(fresh_review):
    model = tiny_model([fresh_review])
    space = CandidateIndexSpace(fresh_review.n)
    got = index_to_token(6, fresh_review, space, model.vocab)
    assert got == model.vocab.encode("hot")


def test_polarity_index_maps_to_class_token(fresh_review):
    model = tiny_model([fresh_review])
    space = CandidateIndexSpace(10)
    assert index_to_token(13, fresh_review, space, model.vocab) == model.vocab.class_token_ids[1]


def test_bos_eos_indices_map_to_special_tokens(fresh_review):
    model = tiny_model([fresh_review])
    space = CandidateIndexSpace(10)
    assert index_to_token(0, fresh_review, space, model.vocab) == model.vocab.bos_id
    assert index_to_token(11, fresh_review, space, model.vocab) == model.vocab.eos_id


def test_out_of_range_index_raises(fresh_review):
    model = tiny_model([fresh_review])
    space = CandidateIndexSpace(10)
    with pytest.raises(IndexError):
        index_to_token(15, fresh_review, space, model.vocab)


def test_index_to_token_total_over_candidate_space(fresh_review):
    model = tiny_model([fresh_review])
    space = CandidateIndexSpace(fresh_review.n)
    for y in range(space.total):
        tok = index_to_token(y, fresh_review, space, model.vocab)
        assert 0 <= tok < len(model.vocab)


# ---------------------------------------------------------------------------
# decoder forward


def _decode_states(model, sentence, prefix):
    space = CandidateIndexSpace(sentence.n)
    with ag.no_grad():
        _, _, h_e = model.encode(sentence)
        return model.decoder.forward(h_e, prefix, sentence, space, model.vocab).data


def test_single_step_shape():
    sentences = _sentences(2)
    model = tiny_model(sentences)
    states = _decode_states(model, sentences[0], [0])
    assert states.shape == (1, 8)


def test_step_state_accessor_returns_last_position():
    from syngen.decoder import decoder_forward

    sentences = _sentences(2, seed=12)
    model = tiny_model(sentences)
    s = sentences[0]
    space = CandidateIndexSpace(s.n)
    prefix = [0, 1, 2]
    with ag.no_grad():
        _, _, h_e = model.encode(s)
        step = decoder_forward(model.decoder, h_e, prefix, s, space, model.vocab)
        full = model.decoder.forward(h_e, prefix, s, space, model.vocab)
    assert step.shape == (1, 8)
    assert np.array_equal(step.data[0], full.data[-1])


def test_prefix_states_unchanged_by_appended_step():
    sentences = _sentences(3, seed=1)
    model = tiny_model(sentences)
    s = sentences[0]
    prefix = [0, 1, 1, 3]
    base = _decode_states(model, s, prefix)
    extended = _decode_states(model, s, prefix + [2])
    assert np.array_equal(base, extended[: len(prefix)])


def test_step_distribution_ignores_future_target_permutation():
    sentences = _sentences(3, seed=2)
    model = tiny_model(sentences)
    s = sentences[0]
    space = CandidateIndexSpace(s.n)
    a = [0, 1, 2, 3, 4]
    b = [0, 1, 2, 4, 3]  # same prefix up to position 2, future permuted
    sa = _decode_states(model, s, a)
    sb = _decode_states(model, s, b)
    assert np.array_equal(sa[:3], sb[:3])


def test_empty_prefix_rejected():
    sentences = _sentences(2, seed=3)
    model = tiny_model(sentences)
    with pytest.raises(ConfigurationError):
        _decode_states(model, sentences[0], [])


def test_prefix_must_start_with_bos():
    sentences = _sentences(2, seed=4)
    model = tiny_model(sentences)
    with pytest.raises(ConfigurationError):
        _decode_states(model, sentences[0], [1, 2])


def test_cross_attention_rows_sum_to_one():
    sentences = _sentences(2, seed=5)
    model = tiny_model(sentences)
    s = sentences[0]
    space = CandidateIndexSpace(s.n)
    diag = Diagnostics()
    with ag.no_grad():
        _, _, h_e = model.encode(s)
        model.decoder.forward(h_e, [0, 1, 2], s, space, model.vocab, diag=diag)
    for attn in diag.decoder_cross_attention + diag.decoder_self_attention:
        assert np.max(np.abs(attn.sum(axis=2) - 1.0)) < 1e-12


# ---------------------------------------------------------------------------
# candidate states


def _candidate_fixture(seed=6, d=8):
    rng = np.random.default_rng(seed)
    h_e = ag.tensor(rng.standard_normal((5, d)))
    e_se = ag.tensor(rng.standard_normal((5, d)))
    table = ag.tensor(rng.standard_normal((9, d)))
    return h_e, e_se, table


def test_blend_alpha_zero_returns_embeddings_exactly():
    h_e, e_se, table = _candidate_fixture()
    mlp = lambda x: x  # noqa: E731
    h_bar, c_d = candidate_states(h_e, e_se, mlp, table, (4, 5, 6), blend_alpha=0.0)
    assert np.array_equal(h_bar.data, e_se.data)
    assert c_d.shape == (3, 8)


def test_blend_alpha_one_returns_mlp_output():
    h_e, e_se, table = _candidate_fixture()
    mlp = lambda x: ag.scale(x, 2.0)  # noqa: E731
    h_bar, _ = candidate_states(h_e, e_se, mlp, table, (4, 5, 6), blend_alpha=1.0)
    assert np.allclose(h_bar.data, 2.0 * h_e.data, atol=1e-15)


def test_blend_half_with_identity_mlp_averages():
    h_e, e_se, table = _candidate_fixture()
    mlp = lambda x: x  # noqa: E731
    h_bar, _ = candidate_states(h_e, e_se, mlp, table, (4, 5, 6), blend_alpha=0.5)
    assert np.max(np.abs(h_bar.data - (h_e.data + e_se.data) / 2.0)) < 1e-15


def test_polarity_rows_come_from_embedding_table():
    h_e, e_se, table = _candidate_fixture()
    _, c_d = candidate_states(h_e, e_se, lambda x: x, table, (4, 5, 6), 0.5)
    assert np.array_equal(c_d.data, table.data[[4, 5, 6]])


# ---------------------------------------------------------------------------
# step distribution


def test_zero_hidden_state_gives_uniform_distribution():
    h_e, e_se, table = _candidate_fixture(seed=7)
    h_bar, c_d = candidate_states(h_e, e_se, lambda x: x, table, (4, 5, 6), 0.5)
    pro = step_distribution(h_bar, c_d, ag.zeros((1, 8)))
    n_plus_5 = 8
    assert pro.shape == (n_plus_5,)
    assert np.allclose(pro.data, 1.0 / n_plus_5, atol=1e-15)


def test_step_distribution_sums_to_one():
    rng = np.random.default_rng(8)
    for _ in range(100):
        h_e, e_se, table = _candidate_fixture(seed=int(rng.integers(1 << 30)))
        h_bar, c_d = candidate_states(h_e, e_se, lambda x: x, table, (4, 5, 6), 0.3)
        pro = step_distribution(h_bar, c_d, ag.tensor(rng.standard_normal((1, 8))))
        assert abs(pro.data.sum() - 1.0) < 1e-12


def test_doubling_hidden_state_sharpens_distribution():
    rng = np.random.default_rng(9)
    for _ in range(50):
        h_e, e_se, table = _candidate_fixture(seed=int(rng.integers(1 << 30)))
        h_bar, c_d = candidate_states(h_e, e_se, lambda x: x, table, (4, 5, 6), 0.5)
        ht = rng.standard_normal((1, 8))
        p1 = step_distribution(h_bar, c_d, ag.tensor(ht))
        p2 = step_distribution(h_bar, c_d, ag.tensor(2.0 * ht))
        assert np.argmax(p1.data) == np.argmax(p2.data)
        assert p2.data.max() >= p1.data.max() - 1e-15


def test_blend_zero_model_ignores_candidate_side_mlp():
    # With blend_alpha = 0 the candidate rows equal the embedding output
    # exactly, untrained MLP and all.
    sentences = _sentences(2, seed=11)
    model = tiny_model(sentences, blend_alpha=0.0)
    s = sentences[0]
    with ag.no_grad():
        e_se, h_se, h_e = model.encode(s)
        h_bar, _ = model.candidate_states(h_e, e_se)
    assert np.array_equal(h_bar.data, e_se.data)


def test_model_distribution_contract_end_to_end():
    sentences = _sentences(2, seed=10)
    model = tiny_model(sentences)
    s = sentences[0]
    session = model.start_session(s)
    lp = session.log_probs([0])
    assert lp.shape == (s.n + 5,)
    assert abs(np.exp(lp).sum() - 1.0) < 1e-12
