"""Differentiable building blocks: attention, transformer layers, encodings.

All modules operate on 2-D token matrices of shape (tokens, width) — batching
happens one scene at a time upstream. Layers use pre-norm residual wiring:
each sublayer reads a layer-normed copy of the stream and adds its output
back onto the stream.

Test hooks (``init_identity_``, ``zero_output_projections_``) exist so the
closed-form attention examples are assertable; they are never used by the
model itself.
"""

import math

import torch
from torch import nn

__all__ = [
    "MultiHeadAttention",
    "FeedForward",
    "EncoderLayer",
    "DecoderLayer",
    "FourierPositionalEncoding",
    "sinusoid_pe",
    "mlp",
]


def _check_mask(mask, n, m):
    if mask.shape != (n, m):
        raise ValueError(f"mask shape {tuple(mask.shape)} != ({n}, {m})")
    if mask.dtype != torch.bool:
        raise ValueError("mask must be boolean (True = attend allowed)")
    if not bool(mask.any(dim=-1).all()):
        raise ValueError("every query row must have at least one allowed key")


class MultiHeadAttention(nn.Module):
    """Scaled dot-product attention with learned projections and head split.

    Masked key positions receive exactly zero weight; each query row of the
    mask must allow at least one key.
    """

    def __init__(self, d_model, num_heads):
        super().__init__()
        if d_model % num_heads != 0:
            raise ValueError("d_model must be divisible by num_heads")
        self.d_model = d_model
        self.num_heads = num_heads
        self.head_dim = d_model // num_heads
        self.proj_q = nn.Linear(d_model, d_model)
        self.proj_k = nn.Linear(d_model, d_model)
        self.proj_v = nn.Linear(d_model, d_model)
        self.proj_out = nn.Linear(d_model, d_model)

    def init_identity_(self):
        """Test hook: all four projections become the identity map."""
        for lin in (self.proj_q, self.proj_k, self.proj_v, self.proj_out):
            with torch.no_grad():
                lin.weight.copy_(torch.eye(self.d_model, dtype=lin.weight.dtype))
                lin.bias.zero_()
        return self

    def zero_output_projection_(self):
        """Test hook: attention contributes nothing to the residual stream."""
        with torch.no_grad():
            self.proj_out.weight.zero_()
            self.proj_out.bias.zero_()
        return self

    def attention_weights(self, queries, keys, mask=None):
        """Per-head softmax weights, shape (heads, n, m). Diagnostic path."""
        n, m = queries.shape[0], keys.shape[0]
        q = self.proj_q(queries).view(n, self.num_heads, self.head_dim).transpose(0, 1)
        k = self.proj_k(keys).view(m, self.num_heads, self.head_dim).transpose(0, 1)
        scores = q @ k.transpose(1, 2) / math.sqrt(self.head_dim)
        if mask is not None:
            _check_mask(mask, n, m)
            scores = scores.masked_fill(~mask.unsqueeze(0), float("-inf"))
        return torch.softmax(scores, dim=-1)

    def forward(self, queries, keys, values, mask=None):
        if keys.shape[0] != values.shape[0]:
            raise ValueError("keys and values must have the same token count")
        if queries.shape[1] != self.d_model or keys.shape[1] != self.d_model:
            raise ValueError("token width must equal d_model")
        n, m = queries.shape[0], keys.shape[0]
        weights = self.attention_weights(queries, keys, mask)
        v = self.proj_v(values).view(m, self.num_heads, self.head_dim).transpose(0, 1)
        out = (weights @ v).transpose(0, 1).reshape(n, self.d_model)
        return self.proj_out(out)


class FeedForward(nn.Module):
    """Two-layer position-wise network with a smooth nonlinearity."""

    def __init__(self, d_model, hidden):
        super().__init__()
        self.lin1 = nn.Linear(d_model, hidden)
        self.lin2 = nn.Linear(hidden, d_model)
        self.act = nn.GELU()

    def zero_output_projection_(self):
        with torch.no_grad():
            self.lin2.weight.zero_()
            self.lin2.bias.zero_()
        return self

    def forward(self, x):
        return self.lin2(self.act(self.lin1(x)))


class EncoderLayer(nn.Module):
    """Pre-norm self-attention block: LN -> attention -> residual, LN -> FFN -> residual."""

    def __init__(self, d_model, num_heads, ffn_hidden, dropout=0.0):
        super().__init__()
        self.norm1 = nn.LayerNorm(d_model)
        self.norm2 = nn.LayerNorm(d_model)
        self.attn = MultiHeadAttention(d_model, num_heads)
        self.ffn = FeedForward(d_model, ffn_hidden)
        self.dropout = nn.Dropout(dropout)

    def zero_output_projections_(self):
        """Test hook: the layer collapses to the identity map."""
        self.attn.zero_output_projection_()
        self.ffn.zero_output_projection_()
        return self

    def forward(self, x, mask=None):
        h = self.norm1(x)
        x = x + self.dropout(self.attn(h, h, h, mask))
        x = x + self.dropout(self.ffn(self.norm2(x)))
        return x


class DecoderLayer(nn.Module):
    """Pre-norm block with self-attention, cross-attention to a shared memory, and FFN.

    ``memory_pe`` is an already-encoded positional feature matrix added to the
    cross-attention keys only; values aggregate the raw memory features.
    """

    def __init__(self, d_model, num_heads, ffn_hidden, dropout=0.0):
        super().__init__()
        self.norm1 = nn.LayerNorm(d_model)
        self.norm2 = nn.LayerNorm(d_model)
        self.norm3 = nn.LayerNorm(d_model)
        self.self_attn = MultiHeadAttention(d_model, num_heads)
        self.cross_attn = MultiHeadAttention(d_model, num_heads)
        self.ffn = FeedForward(d_model, ffn_hidden)
        self.dropout = nn.Dropout(dropout)

    def zero_output_projections_(self):
        self.self_attn.zero_output_projection_()
        self.cross_attn.zero_output_projection_()
        self.ffn.zero_output_projection_()
        return self

    def forward(self, x, memory, memory_pe=None, self_mask=None, cross_mask=None):
        h = self.norm1(x)
        x = x + self.dropout(self.self_attn(h, h, h, self_mask))
        keys = memory if memory_pe is None else memory + memory_pe
        x = x + self.dropout(self.cross_attn(self.norm2(x), keys, memory, cross_mask))
        x = x + self.dropout(self.ffn(self.norm3(x)))
        return x


class FourierPositionalEncoding(nn.Module):
    """sin/cos features of 3D positions against a fixed Gaussian frequency matrix.

    The frequency matrix is drawn once at construction from the given seed and
    registered as a buffer, so the encoding is deterministic for the lifetime
    of a model. Output entries lie in [-1, 1]. Not translation invariant.
    """

    def __init__(self, d_model, seed=0, scale=1.0, in_dim=3):
        super().__init__()
        if d_model % 2 != 0:
            raise ValueError("d_model must be even")
        gen = torch.Generator().manual_seed(seed)
        freq = torch.randn(in_dim, d_model // 2, generator=gen) * scale
        self.register_buffer("freq", freq)

    def forward(self, positions):
        if positions.shape[-1] != self.freq.shape[0]:
            raise ValueError("position dimensionality mismatch")
        phase = 2.0 * math.pi * positions.to(self.freq.dtype) @ self.freq
        return torch.cat([torch.sin(phase), torch.cos(phase)], dim=-1)


def sinusoid_pe(length, d_model, dtype=torch.float32):
    """Classic interleaved sin/cos table over integer positions 0..length-1.

    Row p is [sin(p/10000^(0/d)), cos(p/10000^(0/d)), sin(p/10000^(2/d)), ...],
    so any table is a prefix of every longer one.
    """
    if d_model % 2 != 0:
        raise ValueError("d_model must be even")
    pos = torch.arange(length, dtype=torch.float64).unsqueeze(1)
    idx = torch.arange(d_model // 2, dtype=torch.float64)
    angle = pos / torch.pow(10000.0, 2.0 * idx / d_model)
    table = torch.zeros(length, d_model, dtype=torch.float64)
    table[:, 0::2] = torch.sin(angle)
    table[:, 1::2] = torch.cos(angle)
    return table.to(dtype)


def mlp(dims, final_activation=False):
    """Stack of Linear+GELU blocks; the last Linear is bare unless asked."""
    layers = []
    for i in range(len(dims) - 1):
        layers.append(nn.Linear(dims[i], dims[i + 1]))
        if i < len(dims) - 2 or final_activation:
            layers.append(nn.GELU())
    return nn.Sequential(*layers)
