"""Model assembly: parameters, forward passes, loss, decoding sessions,
and JSON checkpointing."""

import json
import re
from dataclasses import asdict, dataclass

import numpy as np

from . import autograd as ag
from .data import CandidateIndexSpace, Vocabulary, build_adjacency
from .decoder import PointerDecoder, candidate_matrix, candidate_states, step_scores
from .encoder import (
    AblationConfig,
    DualChannelEncoder,
    GateFusion,
    SemanticChannel,
    SyntacticChannel,
)
from .errors import ConfigurationError, IncompatibilityError
from .layers import ParamRegistry

CHECKPOINT_FORMAT = "syngen-checkpoint-v1"

_GAT_NAME = re.compile(r"gat\d+\.")


def is_gat_param(name):
    """Graph-attention parameters get their own learning-rate group.

    Careful matching: the fusion gate's "gate.*" names share the first
    three letters."""
    return bool(_GAT_NAME.match(name))


@dataclass
class ModelConfig:
    d: int = 64
    enc_layers: int = 2
    dec_layers: int = 2
    gat_layers: int = 2
    heads: int = 4
    ff_mult: int = 4
    max_positions: int = 64
    dec_max_positions: int = 64
    blend_alpha: float = 0.5
    leaky_slope: float = 0.2
    node_init: str = "pos_only"
    ablation: str = "full"
    init_scale: float = 1.0

    def __post_init__(self):
        if self.d < 4:
            raise ConfigurationError(f"hidden width must be >= 4, got {self.d}")
        if self.d % self.heads != 0:
            raise ConfigurationError(f"width {self.d} not divisible by {self.heads} heads")
        AblationConfig.from_name(self.ablation)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


class SynGenModel:
    """Dual-channel encoder + pointer decoder over a fixed vocabulary.

    All trainable tensors live in `self.params` (name -> Tensor); graph
    attention parameters are the ones whose names start with "gat".
    """

    def __init__(self, vocab, config, seed=0):
        self.vocab = vocab
        self.config = config
        rng = np.random.default_rng(seed)
        reg = ParamRegistry(rng, scale=config.init_scale)
        d = config.d
        d_ff = d * config.ff_mult
        self.ablation = AblationConfig.from_name(config.ablation)

        self.tok_embed = reg.make("tok_embed", (len(vocab), d), fan_in=d)
        semantic = SemanticChannel(
            reg, d, config.enc_layers, config.heads, d_ff,
            config.max_positions, self.tok_embed,
        )
        needs_pos_table = (not self.ablation.use_graph) or config.node_init != "token_only"
        syntactic = SyntacticChannel(
            reg, d,
            config.gat_layers if self.ablation.use_graph else 0,
            config.node_init,
            leaky_slope=config.leaky_slope,
            with_pos_table=needs_pos_table,
        )
        gate = GateFusion(reg, d) if self.ablation.use_gate else None
        self.encoder = DualChannelEncoder(semantic, syntactic, gate, self.ablation)
        self.decoder = PointerDecoder(
            reg, d, config.dec_layers, config.heads, d_ff,
            config.dec_max_positions, self.tok_embed,
            blend_alpha=config.blend_alpha,
        )
        self.params = reg.tensors

    # ------------------------------------------------------------------
    # forward

    def full_token_ids(self, sentence):
        return (
            [self.vocab.bos_id]
            + [self.vocab.encode(tok) for tok in sentence.tokens]
            + [self.vocab.eos_id]
        )

    def encode(self, sentence, diag=None, ablation=None, gate_override=None):
        """Returns (E_se, H_se, H_e), each (n+2) x d."""
        if sentence.n + 2 > self.config.max_positions:
            raise ConfigurationError(
                f"sentence length {sentence.n} exceeds max_positions "
                f"{self.config.max_positions}"
            )
        adj = build_adjacency(sentence)
        return self.encoder.forward(
            sentence, adj, self.full_token_ids(sentence),
            diag=diag, ablation=ablation, gate_override=gate_override,
        )

    def candidate_states(self, h_e, e_se):
        return candidate_states(
            h_e, e_se, self.decoder.mlp, self.tok_embed,
            self.vocab.class_token_ids, self.decoder.blend_alpha,
        )

    def teacher_forced_loss(self, sentence, target, diag=None):
        """Mean negative log-likelihood of `target` (a candidate-index
        sequence ending in </s>) under teacher forcing."""
        if not target:
            raise ConfigurationError("empty target sequence")
        space = CandidateIndexSpace(sentence.n)
        for y in target:
            space.kind(y)  # raises IndexError when out of candidate range
        if len(target) > self.config.dec_max_positions:
            raise ConfigurationError(
                f"target length {len(target)} exceeds dec_max_positions"
            )
        e_se, h_se, h_e = self.encode(sentence, diag=diag)
        h_bar, c_d = self.candidate_states(h_e, e_se)
        dec_input = [space.bos] + list(target[:-1])
        h_dec = self.decoder.forward(h_e, dec_input, sentence, space, self.vocab, diag=diag)
        scores = step_scores(h_bar, c_d, h_dec)
        return nll_from_scores(scores, target)

    def start_session(self, sentence):
        return DecodingSession(self, sentence)

    # ------------------------------------------------------------------
    # parameters

    def param_groups(self, lr_gat, lr_other):
        from .optim import ParamGroup

        gat = {n: t for n, t in self.params.items() if is_gat_param(n)}
        other = {n: t for n, t in self.params.items() if not is_gat_param(n)}
        return [ParamGroup("gat", gat, lr_gat), ParamGroup("other", other, lr_other)]

    def zero_grad(self):
        for t in self.params.values():
            t.grad = None

    def copy_param_data(self):
        return {name: t.data.copy() for name, t in self.params.items()}

    def set_param_data(self, snapshot):
        for name, t in self.params.items():
            t.data[...] = snapshot[name]

    # ------------------------------------------------------------------
    # checkpoints

    def save(self, path):
        doc = {
            "format": CHECKPOINT_FORMAT,
            "config": self.config.to_dict(),
            "vocab": self.vocab.to_list(),
            "params": {
                name: {"shape": list(t.data.shape), "data": t.data.reshape(-1).tolist()}
                for name, t in self.params.items()
            },
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("format") != CHECKPOINT_FORMAT:
            raise IncompatibilityError(f"{path}: not a {CHECKPOINT_FORMAT} file")
        config = ModelConfig.from_dict(doc["config"])
        vocab = Vocabulary.from_list(doc["vocab"])
        model = cls(vocab, config, seed=0)
        saved = doc["params"]
        if set(saved) != set(model.params):
            missing = set(model.params) ^ set(saved)
            raise IncompatibilityError(f"{path}: parameter set mismatch ({sorted(missing)[:4]}...)")
        for name, t in model.params.items():
            entry = saved[name]
            if list(t.data.shape) != entry["shape"]:
                raise IncompatibilityError(
                    f"{path}: {name} shape {entry['shape']} != expected {list(t.data.shape)}"
                )
            t.data[...] = np.asarray(entry["data"], dtype=np.float64).reshape(t.data.shape)
        return model


def nll_from_scores(scores, targets):
    """-(1/T) * sum_t log softmax(scores)[t, targets[t]]."""
    t = len(targets)
    if scores.shape[0] != t:
        raise ConfigurationError(f"{scores.shape[0]} score rows for {t} targets")
    logp = ag.log_softmax(scores, axis=1)
    picked = ag.take_per_row(logp, targets)
    return ag.scale(ag.sum_all(picked), -1.0 / t)


class DecodingSession:
    """Frozen-model decoding state for one sentence: caches the encoder
    pass and scores arbitrary prefixes of candidate indices."""

    def __init__(self, model, sentence):
        self.model = model
        self.sentence = sentence
        self.space = CandidateIndexSpace(sentence.n)
        # Longest generatable sequence: one slot goes to the <s> prefix.
        self.max_generate = model.config.dec_max_positions - 1
        with ag.no_grad():
            e_se, h_se, h_e = model.encode(sentence)
            h_bar, c_d = model.candidate_states(h_e, e_se)
            self._h_e = h_e
            self._cands = candidate_matrix(h_bar, c_d)

    def log_probs(self, prefix):
        """Log distribution over the n+5 candidates for the step after
        `prefix` (which must start with the <s> index 0)."""
        from .backend import kernels as K

        with ag.no_grad():
            h_dec = self.model.decoder.forward(
                self._h_e, list(prefix), self.sentence, self.space, self.model.vocab
            )
            scores = self._cands.data @ h_dec.data[-1]
            return K.log_softmax_rows(scores[None, :])[0]
