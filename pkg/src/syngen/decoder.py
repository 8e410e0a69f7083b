"""Pointer-network decoder.

Previously generated candidate indices are converted back to vocabulary
tokens (pointer index -> the pointed-at word, polarity index -> its class
token), embedded, and run through a causal decoder stack with
cross-attention over the fused encoder output. The per-step distribution
is a softmax over inner products between the step's hidden state and the
n+5 candidate states: the blended encoder rows plus the three polarity
class embeddings.
"""

from . import autograd as ag
from .data import IndexKind
from .errors import ConfigurationError
from .layers import DecoderLayer, Linear, causal_mask


def index_to_token(y, sentence, space, vocab):
    """Vocabulary id for one candidate index."""
    kind = space.kind(y)
    if kind is IndexKind.BOS:
        return vocab.bos_id
    if kind is IndexKind.EOS:
        return vocab.eos_id
    if kind is IndexKind.POINTER:
        return vocab.encode(sentence.tokens[y - 1])
    return vocab.class_token_ids[space.polarity_class(y)]


class CandidateMlp:
    """d -> d -> d with one hidden nonlinearity, no final activation."""

    def __init__(self, reg, name, d):
        self.lin1 = Linear(reg, f"{name}.lin1", d, d)
        self.lin2 = Linear(reg, f"{name}.lin2", d, d)

    def __call__(self, x):
        return self.lin2(ag.relu(self.lin1(x)))


class PointerDecoder:
    """Causal decoder stack sharing the token embedding table with the
    semantic channel (the three polarity class tokens included)."""

    def __init__(self, reg, d, n_layers, heads, d_ff, max_positions, tok_embed,
                 blend_alpha=0.5):
        if not 0.0 <= blend_alpha <= 1.0:
            raise ConfigurationError(f"blend_alpha must lie in [0, 1], got {blend_alpha}")
        self.tok_embed = tok_embed
        self.pos_embed = reg.make("dec_pos", (max_positions, d), fan_in=d)
        self.layers = [DecoderLayer(reg, f"dec{i}", d, heads, d_ff) for i in range(n_layers)]
        self.mlp = CandidateMlp(reg, "mlp", d)
        self.blend_alpha = blend_alpha

    def forward(self, h_e, prev_indices, sentence, space, vocab, diag=None):
        """Hidden states for every decoding position, shape T x d where
        T == len(prev_indices). `prev_indices` must start with <s>."""
        if not prev_indices:
            raise ConfigurationError("prev_indices is empty; expected at least [<s>]")
        if space.kind(prev_indices[0]) is not IndexKind.BOS:
            raise ConfigurationError("prev_indices must begin with the <s> index 0")
        if len(prev_indices) > self.pos_embed.shape[0]:
            raise ConfigurationError(
                f"prefix length {len(prev_indices)} exceeds the decoder's "
                f"{self.pos_embed.shape[0]} positions"
            )
        ids = [index_to_token(y, sentence, space, vocab) for y in prev_indices]
        t = len(ids)
        x = ag.embedding_lookup(self.tok_embed, ids) + ag.embedding_lookup(
            self.pos_embed, list(range(t))
        )
        mask = causal_mask(t)
        self_sink = diag.decoder_self_attention if diag is not None else None
        cross_sink = diag.decoder_cross_attention if diag is not None else None
        for layer in self.layers:
            x = layer(x, h_e, mask, self_sink=self_sink, cross_sink=cross_sink)
        return x


def decoder_forward(decoder, h_e, prev_indices, sentence, space, vocab, diag=None):
    """Hidden state of the next decoding step, shape 1 x d (the last
    position of the causal stack run over `prev_indices`)."""
    states = decoder.forward(h_e, prev_indices, sentence, space, vocab, diag=diag)
    return ag.slice_rows(states, states.shape[0] - 1, states.shape[0])


def candidate_states(h_e, e_se, mlp, tok_embed, class_token_ids, blend_alpha):
    """Blended candidate rows and polarity class embeddings.

    h_bar = alpha * MLP(h_e) + (1 - alpha) * e_se, shape (n+2) x d;
    c_d = embedding rows of the polarity class tokens, shape 3 x d.
    """
    h_hat = mlp(h_e)
    h_bar = ag.scale(h_hat, blend_alpha) + ag.scale(e_se, 1.0 - blend_alpha)
    c_d = ag.embedding_lookup(tok_embed, list(class_token_ids))
    return h_bar, c_d


def candidate_matrix(h_bar, c_d):
    """All n+5 candidate states, ordered to match the candidate index
    layout (<s>, pointers, </s>, then the three polarity classes)."""
    return ag.concat([h_bar, c_d], axis=0)


def step_distribution(h_bar, c_d, h_t):
    """Softmax over candidate scores for one step; h_t is 1 x d, output
    is a probability vector of length n+5."""
    cands = candidate_matrix(h_bar, c_d)
    scores = ag.matmul(cands, ag.transpose(h_t))  # (n+5, 1)
    return ag.softmax(ag.reshape(scores, (scores.shape[0],)), axis=-1)


def step_scores(h_bar, c_d, h_dec):
    """Raw candidate scores for every decoding position: T x (n+5)."""
    cands = candidate_matrix(h_bar, c_d)
    return ag.matmul(h_dec, ag.transpose(cands))
