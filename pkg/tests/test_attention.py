import math

import numpy as np
import pytest
import torch

from dygad.attention import (MultiHeadKernelAttention, ScoringHead,
                             TemporalAwareTransformer, TransformerBlock,
                             kernel_attention)
from dygad.errors import DataError
from dygad.graph import EDGE, Event
from dygad.model import EventScorer, ModelConfig

from conftest import random_graph

torch.set_num_threads(1)


def head_params(d_v, d_q, d_out, seed=0):
    g = torch.Generator().manual_seed(seed)
    mk = lambda *shape: torch.randn(*shape, generator=g, dtype=torch.float64)
    return dict(W_q=mk(d_out, d_q), b_q=mk(d_out), W_k=mk(d_out, d_q),
                b_k=mk(d_out), W_v=mk(d_out, d_v), b_v=mk(d_out))


class TestKernelAttention:
    def test_single_token_returns_value_projection(self):
        p = head_params(3, 2, 4)
        z = torch.randn(1, 3, dtype=torch.float64)
        phi = torch.randn(1, 2, dtype=torch.float64)
        out = kernel_attention(z, phi, **p)
        expect = z @ p["W_v"].T + p["b_v"]
        assert torch.equal(out, expect)

    def test_identical_phi_rows_half_weights(self):
        p = head_params(3, 2, 4)
        z = torch.randn(2, 3, dtype=torch.float64)
        phi = torch.randn(1, 2, dtype=torch.float64).repeat(2, 1)
        _, w = kernel_attention(z, phi, **p, return_weights=True)
        assert torch.all(w == 0.5)

    def test_three_token_scalar_oracle(self):
        # 1-D everything; evaluate the kernel-smoothing formula by hand
        phi = [0.5, -1.0, 2.0]
        z = [1.0, 2.0, -3.0]
        wq, bq, wk, bk, wv, bv = 0.7, 0.1, -1.2, 0.3, 2.0, -0.5
        out = kernel_attention(
            torch.tensor(z, dtype=torch.float64).reshape(3, 1),
            torch.tensor(phi, dtype=torch.float64).reshape(3, 1),
            W_q=torch.tensor([[wq]], dtype=torch.float64),
            b_q=torch.tensor([bq], dtype=torch.float64),
            W_k=torch.tensor([[wk]], dtype=torch.float64),
            b_k=torch.tensor([bk], dtype=torch.float64),
            W_v=torch.tensor([[wv]], dtype=torch.float64),
            b_v=torch.tensor([bv], dtype=torch.float64))
        for i in range(3):
            q = wq * phi[i] + bq
            kern = [math.exp(q * (wk * phi[j] + bk) / math.sqrt(1.0))
                    for j in range(3)]
            s = sum(kern)
            expect = sum(kern[j] / s * (wv * z[j] + bv) for j in range(3))
            assert out[i, 0].item() == pytest.approx(expect, rel=1e-12)

    def test_empty_tokens_rejected(self):
        p = head_params(2, 2, 2)
        with pytest.raises(DataError):
            kernel_attention(torch.zeros(0, 2, dtype=torch.float64),
                             torch.zeros(0, 2, dtype=torch.float64), **p)

    def test_misaligned_rows_rejected(self):
        p = head_params(2, 2, 2)
        with pytest.raises(DataError):
            kernel_attention(torch.zeros(2, 2, dtype=torch.float64),
                             torch.zeros(3, 2, dtype=torch.float64), **p)

    def test_rows_sum_to_one(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 12))
            p = head_params(3, 3, 4, seed=int(rng.integers(1 << 30)))
            z = torch.randn(n, 3, dtype=torch.float64)
            phi = torch.randn(n, 3, dtype=torch.float64)
            _, w = kernel_attention(z, phi, **p, return_weights=True)
            assert torch.allclose(w.sum(dim=1),
                                  torch.ones(n, dtype=torch.float64), atol=1e-6)

    def test_stability_huge_logits(self):
        p = head_params(2, 2, 2)
        phi = torch.tensor([[1e4, -1e4], [-1e4, 1e4], [1e4, 1e4]],
                           dtype=torch.float64)
        z = torch.randn(3, 2, dtype=torch.float64)
        out, w = kernel_attention(z, phi, **p, return_weights=True)
        assert torch.all(torch.isfinite(out)) and torch.all(torch.isfinite(w))
        assert torch.allclose(w.sum(dim=1), torch.ones(3, dtype=torch.float64))


class TestMultiHead:
    def test_matches_single_head_composition(self):
        torch.manual_seed(1)
        mha = MultiHeadKernelAttention(8, 2).to(torch.float64)
        x = torch.randn(1, 5, 8, dtype=torch.float64)
        qk = torch.randn(1, 5, 8, dtype=torch.float64)
        out = mha(x, qk)
        for h in range(2):
            sl = slice(4 * h, 4 * (h + 1))
            single = kernel_attention(
                x[0], qk[0],
                W_q=mha.q_proj.weight[sl], b_q=mha.q_proj.bias[sl],
                W_k=mha.k_proj.weight[sl], b_k=mha.k_proj.bias[sl],
                W_v=mha.v_proj.weight[sl], b_v=mha.v_proj.bias[sl])
            assert torch.allclose(out[0, :, sl], single, atol=1e-12)

    def test_padding_mask_matches_unpadded(self):
        torch.manual_seed(2)
        mha = MultiHeadKernelAttention(4, 2).to(torch.float64)
        x = torch.randn(1, 3, 4, dtype=torch.float64)
        qk = torch.randn(1, 3, 4, dtype=torch.float64)
        full = mha(x, qk)
        xp = torch.cat([x, torch.zeros(1, 2, 4, dtype=torch.float64)], dim=1)
        qkp = torch.cat([qk, torch.zeros(1, 2, 4, dtype=torch.float64)], dim=1)
        mask = torch.tensor([[True, True, True, False, False]])
        padded = mha(xp, qkp, mask=mask)
        assert torch.allclose(padded[0, :3], full[0], atol=1e-12)

    def test_indivisible_heads_rejected(self):
        with pytest.raises(DataError):
            MultiHeadKernelAttention(6, 4)


class TestTransformer:
    def make(self, d=4, heads=1, layers=1, sd=3):
        torch.manual_seed(0)
        return TemporalAwareTransformer(d, heads, layers, ffn_dim=d,
                                        struct_dim=sd).to(torch.float64)

    def test_width_one_output_is_bias_function(self):
        # LayerNorm at width 1 collapses every row to its (default zero) shift,
        # so the output depends on nothing but the norm parameters
        tf = self.make(d=1, sd=1)
        x = torch.randn(1, 3, 1, dtype=torch.float64)
        s = torch.randn(1, 3, 1, dtype=torch.float64)
        out = tf(x, s)
        assert torch.all(out == 0)

    def test_zero_inputs_deterministic(self):
        tf = self.make(d=4, heads=2, layers=2)
        x = torch.zeros(1, 4, 4, dtype=torch.float64)
        s = torch.zeros(1, 4, 3, dtype=torch.float64)
        a = tf(x, s)
        b = tf(x, s)
        assert torch.equal(a, b)
        assert torch.all(torch.isfinite(a))

    def test_duplicate_token_symmetry(self):
        tf = self.make(d=4, heads=2, layers=2)
        x = torch.randn(1, 3, 4, dtype=torch.float64)
        s = torch.randn(1, 3, 3, dtype=torch.float64)
        x2 = x[:, [1, 0, 2]]
        s2 = s[:, [1, 0, 2]]
        out = tf(x, s)
        out2 = tf(x2, s2)
        assert torch.allclose(out[0, [1, 0, 2]], out2[0], atol=1e-12)

    def test_use_structure_false_ignores_struct(self):
        tf = self.make(d=4, heads=2, layers=1)
        x = torch.randn(1, 3, 4, dtype=torch.float64)
        s1 = torch.randn(1, 3, 3, dtype=torch.float64)
        s2 = torch.randn(1, 3, 3, dtype=torch.float64)
        assert torch.equal(tf(x, s1, use_structure=False),
                           tf(x, s2, use_structure=False))


class TestScoringHead:
    def test_zero_weights_give_half(self):
        head = ScoringHead(4).to(torch.float64)
        with torch.no_grad():
            head.lin.weight.zero_()
            head.lin.bias.zero_()
        out = head(torch.zeros(2, 4, dtype=torch.float64))
        assert torch.all(out == 0.5)

    def test_large_positive_logit_saturates(self):
        head = ScoringHead(2).to(torch.float64)
        with torch.no_grad():
            head.lin.weight.fill_(1e3)
            head.lin.bias.zero_()
        out = head(torch.ones(1, 2, dtype=torch.float64))
        assert out.item() > 1 - 1e-12

    def test_scalar_oracle(self):
        head = ScoringHead(3).to(torch.float64)
        emb = torch.randn(1, 3, dtype=torch.float64)
        w = head.lin.weight.detach().numpy()[0]
        b = float(head.lin.bias.detach())
        expect = 1.0 / (1.0 + math.exp(-(float(emb.numpy()[0] @ w) + b)))
        assert head(emb).item() == pytest.approx(expect, rel=1e-12)

    def test_score_in_open_interval(self, rng):
        head = ScoringHead(4).to(torch.float64)
        emb = torch.randn(50, 4, dtype=torch.float64)
        out = head(emb)
        assert torch.all(out > 0) and torch.all(out < 1)


class TestCenterScoring:
    def test_score_reads_center_row(self, rng):
        g = random_graph(rng, n_max=12, m_max=30)
        cfg = ModelConfig(task=EDGE, node_dim=g.d_n, edge_dim=g.d_e, k=1,
                          hop_budget=4, gnn_hidden=4, gnn_depth=1, model_dim=4,
                          num_heads=1, num_layers=1, dtype="float64")
        torch.manual_seed(0)
        model = EventScorer(cfg)
        enc = model.encode_event(g, Event.from_edge(g, g.m - 1), base_seed=0)
        score = model([enc])
        # moving the head over a non-center row must change the score
        # (so the head is really wired to center_pos, not a pooled row)
        enc.center_pos = 0  # a KHS marker position
        score2 = model([enc])
        assert not torch.equal(score, score2)
