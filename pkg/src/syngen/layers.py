"""Transformer building blocks on top of the autograd primitives."""

import math
from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag


@dataclass
class Diagnostics:
    """Attention maps and gate values captured during one forward pass.

    All arrays are detached numpy values. Encoder/decoder attention lists
    hold one (heads, Tq, Tk) array per layer.
    """

    encoder_attention: list = field(default_factory=list)
    decoder_self_attention: list = field(default_factory=list)
    decoder_cross_attention: list = field(default_factory=list)
    gat_alpha: list = field(default_factory=list)
    gate_values: np.ndarray = None


class ParamRegistry:
    """Creates and names every trainable tensor of a model.

    Random tensors are drawn at fan-in scale (std = scale / sqrt(fan_in)),
    which keeps activations and gradients at a healthy magnitude across
    widths; `scale` is a global multiplier.
    """

    def __init__(self, rng, scale=1.0):
        self.rng = rng
        self.scale = scale
        self.tensors = {}

    def make(self, name, shape, fan_in, fill=None):
        if name in self.tensors:
            raise ValueError(f"duplicate parameter name {name!r}")
        if fill is not None:
            data = np.full(shape, float(fill))
        else:
            data = self.rng.normal(0.0, self.scale / math.sqrt(fan_in), size=shape)
        t = ag.Tensor(data, requires_grad=True, name=name)
        self.tensors[name] = t
        return t


class Linear:
    def __init__(self, reg, name, d_in, d_out, bias=True):
        self.w = reg.make(f"{name}.w", (d_in, d_out), fan_in=d_in)
        self.b = reg.make(f"{name}.b", (d_out,), fan_in=d_in, fill=0.0) if bias else None

    def __call__(self, x):
        y = ag.matmul(x, self.w)
        return y if self.b is None else y + self.b


class LayerNorm:
    def __init__(self, reg, name, d):
        self.gamma = reg.make(f"{name}.gamma", (d,), fan_in=d, fill=1.0)
        self.beta = reg.make(f"{name}.beta", (d,), fan_in=d, fill=0.0)

    def __call__(self, x):
        return ag.layer_norm(x, self.gamma, self.beta)


class MultiHeadAttention:
    """Scaled dot-product attention; query and key/value inputs may differ
    (cross-attention). `mask` is boolean (Tq, Tk), True = may attend."""

    def __init__(self, reg, name, d, heads):
        if d % heads != 0:
            raise ValueError(f"width {d} not divisible by {heads} heads")
        self.heads = heads
        self.dh = d // heads
        self.wq = Linear(reg, f"{name}.wq", d, d)
        # No key bias: a shared offset on every key cancels inside the
        # row-wise softmax, leaving a parameter with an identically zero
        # gradient.
        self.wk = Linear(reg, f"{name}.wk", d, d, bias=False)
        self.wv = Linear(reg, f"{name}.wv", d, d)
        self.wo = Linear(reg, f"{name}.wo", d, d)

    def __call__(self, q_in, kv_in, mask=None, attn_sink=None):
        q = self.wq(q_in)
        k = self.wk(kv_in)
        v = self.wv(kv_in)
        outs = []
        maps = []
        inv = 1.0 / math.sqrt(self.dh)
        for h in range(self.heads):
            lo, hi = h * self.dh, (h + 1) * self.dh
            qh = ag.slice_cols(q, lo, hi)
            kh = ag.slice_cols(k, lo, hi)
            vh = ag.slice_cols(v, lo, hi)
            scores = ag.scale(ag.matmul(qh, ag.transpose(kh)), inv)
            att = ag.softmax(scores, axis=1, mask=mask)
            outs.append(ag.matmul(att, vh))
            if attn_sink is not None:
                maps.append(att.data)
        if attn_sink is not None:
            attn_sink.append(np.stack(maps))
        return self.wo(ag.concat(outs, axis=1))


class FeedForward:
    def __init__(self, reg, name, d, d_ff):
        self.lin1 = Linear(reg, f"{name}.lin1", d, d_ff)
        self.lin2 = Linear(reg, f"{name}.lin2", d_ff, d)

    def __call__(self, x):
        return self.lin2(ag.relu(self.lin1(x)))


class EncoderLayer:
    """Post-norm transformer encoder layer."""

    def __init__(self, reg, name, d, heads, d_ff):
        self.attn = MultiHeadAttention(reg, f"{name}.attn", d, heads)
        self.ln1 = LayerNorm(reg, f"{name}.ln1", d)
        self.ff = FeedForward(reg, f"{name}.ff", d, d_ff)
        self.ln2 = LayerNorm(reg, f"{name}.ln2", d)

    def __call__(self, x, attn_sink=None):
        x = self.ln1(x + self.attn(x, x, attn_sink=attn_sink))
        return self.ln2(x + self.ff(x))


class DecoderLayer:
    """Post-norm causal decoder layer with cross-attention."""

    def __init__(self, reg, name, d, heads, d_ff):
        self.self_attn = MultiHeadAttention(reg, f"{name}.self", d, heads)
        self.ln1 = LayerNorm(reg, f"{name}.ln1", d)
        self.cross_attn = MultiHeadAttention(reg, f"{name}.cross", d, heads)
        self.ln2 = LayerNorm(reg, f"{name}.ln2", d)
        self.ff = FeedForward(reg, f"{name}.ff", d, d_ff)
        self.ln3 = LayerNorm(reg, f"{name}.ln3", d)

    def __call__(self, x, enc, causal_mask, self_sink=None, cross_sink=None):
        x = self.ln1(x + self.self_attn(x, x, mask=causal_mask, attn_sink=self_sink))
        x = self.ln2(x + self.cross_attn(x, enc, attn_sink=cross_sink))
        return self.ln3(x + self.ff(x))


def causal_mask(t):
    return np.tril(np.ones((t, t), dtype=bool))
