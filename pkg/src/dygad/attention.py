"""Kernel-smoothing attention and the temporal-aware transformer stack.

Attention weights come from an exponential kernel between *structural*
embeddings (queries and keys), while values carry the raw event features:

    out_i = sum_j softmax_j(<W_Q s_i + b_Q, W_K s_j + b_K> / sqrt(d_out)) (W_V z_j + b_V)

Block 1 takes the structural stream for Q/K and the projected raw features
for V; deeper blocks apply standard self-attention to the mixed
representation.  Attention is bidirectional: the sequence is a completed
historical ego-graph, not an autoregressive stream.
"""

from __future__ import annotations

import math

import torch
from torch import nn

from .errors import DataError

MASKED_LOGIT = -1e30  # finite so padded rows stay NaN-free


def kernel_attention(values_src: torch.Tensor, qk_src: torch.Tensor,
                     W_q, b_q, W_k, b_k, W_v, b_v, return_weights: bool = False):
    """Single-head kernel attention over one unpadded sequence.

    ``values_src`` (tokens, d_v) supplies values; ``qk_src`` (tokens, d_q)
    supplies queries and keys; weight matrices are (d_out, d_in) as in
    ``nn.Linear``.  Rows of the returned weight matrix sum to 1.
    """
    if values_src.shape[0] == 0:
        raise DataError("attention over an empty token list")
    if values_src.shape[0] != qk_src.shape[0]:
        raise DataError("value and query/key streams are not row-aligned")
    q = qk_src @ W_q.transpose(0, 1) + b_q
    k = qk_src @ W_k.transpose(0, 1) + b_k
    v = values_src @ W_v.transpose(0, 1) + b_v
    d_out = q.shape[1]
    logits = q @ k.transpose(0, 1) / math.sqrt(d_out)
    weights = torch.softmax(logits, dim=1)
    out = weights @ v
    if return_weights:
        return out, weights
    return out


class MultiHeadKernelAttention(nn.Module):
    """Batched multi-head kernel attention with padding masks."""

    def __init__(self, d_model: int, num_heads: int, d_qk_in: int = None):
        super().__init__()
        if d_model % num_heads != 0:
            raise DataError(f"model width {d_model} not divisible by "
                            f"{num_heads} heads")
        self.num_heads = num_heads
        self.d_out = d_model // num_heads
        d_qk_in = d_model if d_qk_in is None else d_qk_in
        self.q_proj = nn.Linear(d_qk_in, d_model)
        self.k_proj = nn.Linear(d_qk_in, d_model)
        self.v_proj = nn.Linear(d_model, d_model)

    def forward(self, values_src, qk_src, mask=None, return_weights: bool = False):
        """values_src (B, T, d_model), qk_src (B, T, d_qk_in), mask (B, T) bool."""
        B, T, _ = values_src.shape
        H, d = self.num_heads, self.d_out

        def split(x):
            return x.view(B, T, H, d).transpose(1, 2)  # (B, H, T, d)

        q = split(self.q_proj(qk_src))
        k = split(self.k_proj(qk_src))
        v = split(self.v_proj(values_src))
        logits = q @ k.transpose(2, 3) / math.sqrt(d)
        if mask is not None:
            pad = ~mask[:, None, None, :]  # (B, 1, 1, T) over keys
            logits = logits.masked_fill(pad, MASKED_LOGIT)
        weights = torch.softmax(logits, dim=-1)
        out = (weights @ v).transpose(1, 2).reshape(B, T, H * d)
        if return_weights:
            return out, weights
        return out


class TransformerBlock(nn.Module):
    """Multi-head kernel attention + mixer, then feed-forward; post-norm residuals."""

    def __init__(self, d_model: int, num_heads: int, ffn_dim: int,
                 d_qk_in: int = None):
        super().__init__()
        self.attn = MultiHeadKernelAttention(d_model, num_heads, d_qk_in=d_qk_in)
        self.mix = nn.Linear(d_model, d_model)
        self.norm1 = nn.LayerNorm(d_model)
        self.norm2 = nn.LayerNorm(d_model)
        self.ff1 = nn.Linear(d_model, ffn_dim)
        self.ff2 = nn.Linear(ffn_dim, d_model)

    def forward(self, x, qk_src, mask=None):
        a = self.mix(self.attn(x, qk_src, mask=mask))
        x = self.norm1(x + a)
        x = self.norm2(x + self.ff2(torch.relu(self.ff1(x))))
        return x


class TemporalAwareTransformer(nn.Module):
    """Stack of blocks; structure enters the first block's queries and keys."""

    def __init__(self, d_model: int, num_heads: int, num_layers: int,
                 ffn_dim: int, struct_dim: int):
        super().__init__()
        if num_layers < 1:
            raise DataError(f"need >= 1 transformer layer, got {num_layers}")
        # structural embeddings grow with ego-graph degree; normalize them
        # before the query/key projection so attention stays soft at init
        self.struct_norm = nn.LayerNorm(struct_dim)
        self.struct_proj = nn.Linear(struct_dim, d_model)
        self.blocks = nn.ModuleList(
            TransformerBlock(d_model, num_heads, ffn_dim)
            for _ in range(num_layers))

    def forward(self, x0, struct, mask=None, use_structure: bool = True):
        """x0 (B, T, d_model) raw-projected tokens; struct (B, T, struct_dim)."""
        qk = self.struct_proj(self.struct_norm(struct)) if use_structure else x0
        x = self.blocks[0](x0, qk, mask=mask)
        for block in self.blocks[1:]:
            x = block(x, x, mask=mask)
        return x


class ScoringHead(nn.Module):
    """Affine map to one logit, squashed to an anomaly score in (0, 1)."""

    def __init__(self, d_model: int):
        super().__init__()
        self.lin = nn.Linear(d_model, 1)

    def forward(self, emb: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.lin(emb)).squeeze(-1)
