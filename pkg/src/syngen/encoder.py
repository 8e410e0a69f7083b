"""Dual-channel encoder: a compact transformer over the token sequence, a
graph-attention channel over the dependency tree initialized from POS
embeddings, and a position-wise sigmoid gate fusing the two.

Ablation switches mirror the model variants: `no_graph` bypasses graph
attention and pads the raw POS embeddings instead, `no_gate` adds the two
channel outputs directly.
"""

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .data import POS_TAG_TO_ID
from .errors import ConfigurationError, DimensionError
from .layers import EncoderLayer

NODE_INIT_STRATEGIES = ("pos_only", "token_only", "pos_plus_token")

ABLATION_NAMES = ("full", "no_graph", "no_gate", "no_graph_no_gate")

# Number of graph-attention layer invocations since import; tests use this
# to prove the no_graph path never touches the GAT.
GAT_FORWARD_CALLS = 0


@dataclass(frozen=True)
class AblationConfig:
    use_graph: bool = True
    use_gate: bool = True

    @property
    def name(self):
        if self.use_graph and self.use_gate:
            return "full"
        if self.use_graph:
            return "no_gate"
        if self.use_gate:
            return "no_graph"
        return "no_graph_no_gate"

    @classmethod
    def from_name(cls, name):
        if name not in ABLATION_NAMES:
            raise ConfigurationError(f"unknown ablation {name!r}; expected one of {ABLATION_NAMES}")
        return cls(use_graph="no_graph" not in name, use_gate="no_gate" not in name)


class GatLayer:
    """Single-head graph attention: per-node softmax over neighbors of
    LeakyReLU-scored pairs, then attention-weighted sum of projected
    neighbor features."""

    def __init__(self, reg, name, d, leaky_slope=0.2):
        self.d = d
        self.w = reg.make(f"{name}.w", (d, d), fan_in=d)
        # Attention vector over the concatenated pair [h_i W || h_j W].
        self.a = reg.make(f"{name}.a", (2 * d, 1), fan_in=2 * d)
        self.leaky_slope = leaky_slope


def gat_layer_forward(h, adj, layer, alpha_sink=None):
    """One graph-attention layer over node features `h` (n x d).

    Scores e[i, j] = LeakyReLU([h_i W || h_j W] . a) are normalized by a
    softmax restricted to the neighborhood N(i) = {j : adj[i, j]}, and the
    output row i is sum_j alpha[i, j] (h_j W).
    """
    global GAT_FORWARD_CALLS
    GAT_FORWARD_CALLS += 1
    d = layer.d
    hw = ag.matmul(h, layer.w)
    src = ag.matmul(hw, ag.slice_rows(layer.a, 0, d))       # (n, 1): query part
    dst = ag.matmul(hw, ag.slice_rows(layer.a, d, 2 * d))   # (n, 1): neighbor part
    scores = ag.leaky_relu(src + ag.transpose(dst), layer.leaky_slope)
    alpha = ag.softmax(scores, axis=1, mask=adj.bits)
    if alpha_sink is not None:
        alpha_sink.append(alpha.data)
    return ag.matmul(alpha, hw)


class SemanticChannel:
    """Token + learned positional embeddings through a small transformer
    encoder stack; returns both the embedding output and the final hidden
    states, each (n+2) x d with <s> and </s> at rows 0 and n+1."""

    def __init__(self, reg, d, n_layers, heads, d_ff, max_positions, tok_embed):
        self.tok_embed = tok_embed
        self.pos_embed = reg.make("enc_pos", (max_positions, d), fan_in=d)
        self.layers = [EncoderLayer(reg, f"enc{i}", d, heads, d_ff) for i in range(n_layers)]

    def forward(self, full_token_ids, attn_sink=None):
        if len(full_token_ids) < 3:
            raise ConfigurationError("semantic channel needs <s> tokens </s>")
        e = ag.embedding_lookup(self.tok_embed, full_token_ids) + ag.embedding_lookup(
            self.pos_embed, list(range(len(full_token_ids)))
        )
        h = e
        for layer in self.layers:
            h = layer(h, attn_sink=attn_sink)
        return e, h


class SyntacticChannel:
    """POS-initialized graph attention over the dependency graph; output
    is zero-padded to (n+2) x d so it aligns with the special tokens."""

    def __init__(self, reg, d, n_gat_layers, node_init, leaky_slope=0.2, with_pos_table=True):
        if node_init not in NODE_INIT_STRATEGIES:
            raise ConfigurationError(
                f"unknown node init {node_init!r}; expected one of {NODE_INIT_STRATEGIES}"
            )
        self.d = d
        self.node_init = node_init
        self.pos_embed = (
            reg.make("pos_tag_embed", (len(POS_TAG_TO_ID), d), fan_in=d)
            if with_pos_table else None
        )
        self.gat_layers = [
            GatLayer(reg, f"gat{i}", d, leaky_slope) for i in range(n_gat_layers)
        ]

    def pos_embeddings(self, sentence):
        ids = [POS_TAG_TO_ID[tag] for tag in sentence.pos_tags]
        return ag.embedding_lookup(self.pos_embed, ids)

    def initial_nodes(self, sentence, semantic_token_states):
        if self.node_init == "pos_only":
            return self.pos_embeddings(sentence)
        if semantic_token_states is None:
            raise ConfigurationError(
                f"node init {self.node_init!r} requires semantic token states"
            )
        if self.node_init == "token_only":
            return semantic_token_states
        return self.pos_embeddings(sentence) + semantic_token_states

    def forward(self, sentence, adj, semantic_token_states=None, alpha_sink=None):
        h = self.initial_nodes(sentence, semantic_token_states)
        for layer in self.gat_layers:
            h = gat_layer_forward(h, adj, layer, alpha_sink=alpha_sink)
        return zero_pad_rows(h)


def zero_pad_rows(h):
    """Prepend and append one all-zero row (the special-token positions)."""
    pad = ag.zeros((1, h.shape[1]))
    return ag.concat([pad, h, pad], axis=0)


class GateFusion:
    """H_e = H_se + sigmoid(Linear(H_se)) * H_sy, with the scalar gate
    broadcast across the feature dimension."""

    def __init__(self, reg, d):
        self.w = reg.make("gate.w", (d, 1), fan_in=d)
        self.b = reg.make("gate.b", (1,), fan_in=d, fill=0.0)

    def gate_values(self, h_se):
        return ag.sigmoid(ag.matmul(h_se, self.w) + self.b)

    def __call__(self, h_se, h_sy, override=None):
        if h_se.shape != h_sy.shape:
            raise DimensionError(f"gate fusion: shapes {h_se.shape} != {h_sy.shape}")
        if override is not None:
            g = ag.tensor(np.full((h_se.shape[0], 1), float(override)))
        else:
            g = self.gate_values(h_se)
        return h_se + ag.hadamard(g, h_sy), g.data


def gate_fuse(gate, h_se, h_sy, override=None):
    fused, _ = gate(h_se, h_sy, override=override)
    return fused


class DualChannelEncoder:
    """Runs both channels under the active ablation config and fuses them.

    no_graph replaces the graph output with zero-padded POS embeddings;
    no_gate adds the channels without the sigmoid gate.
    """

    def __init__(self, semantic, syntactic, gate, ablation):
        self.semantic = semantic
        self.syntactic = syntactic
        self.gate = gate
        self.ablation = ablation

    def forward(self, sentence, adj, full_token_ids, diag=None, ablation=None,
                gate_override=None):
        cfg = self.ablation if ablation is None else ablation
        attn_sink = diag.encoder_attention if diag is not None else None
        alpha_sink = diag.gat_alpha if diag is not None else None
        e_se, h_se = self.semantic.forward(full_token_ids, attn_sink=attn_sink)
        n = sentence.n
        if cfg.use_graph:
            token_states = None
            if self.syntactic.node_init != "pos_only":
                token_states = ag.slice_rows(h_se, 1, n + 1)
            h_sy = self.syntactic.forward(
                sentence, adj, semantic_token_states=token_states, alpha_sink=alpha_sink
            )
        else:
            h_sy = zero_pad_rows(self.syntactic.pos_embeddings(sentence))
        if cfg.use_gate:
            h_e, gates = self.gate(h_se, h_sy, override=gate_override)
        else:
            h_e = h_se + h_sy
            gates = np.ones((h_se.shape[0], 1))
        if diag is not None:
            diag.gate_values = gates.reshape(-1).copy()
        return e_se, h_se, h_e
