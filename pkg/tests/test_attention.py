import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swdstyle.attention import AttentionBlock, adain, shared_attention
from swdstyle.errors import DimensionError


def _block(gen, tokens, dim, role="target"):
    return AttentionBlock(
        queries=gen.standard_normal((tokens, dim)),
        keys=gen.standard_normal((tokens, dim)),
        values=gen.standard_normal((tokens, dim)),
        role=role,
    )


class TestAdain:
    def test_self_normalization_is_near_identity(self, rng):
        x = rng.standard_normal((50, 6)) * 2 + 1
        out = adain(x, x)
        scale = x.std(axis=0)
        assert np.all(np.abs(out - x) < 1e-4 * np.maximum(scale, 1.0))

    def test_output_statistics_match_target(self, rng):
        x = rng.standard_normal((80, 5)) * 3
        y = rng.standard_normal((40, 5)) * 0.5 + 2
        out = adain(x, y)
        assert np.allclose(out.mean(axis=0), y.mean(axis=0), atol=1e-5)
        assert np.allclose(out.std(axis=0), y.std(axis=0), atol=1e-5)

    def test_constant_input_lands_on_target_mean(self, rng):
        x = np.full((10, 3), 0.7)
        y = rng.standard_normal((12, 3))
        out = adain(x, y)
        assert np.all(np.isfinite(out))
        assert np.allclose(out, y.mean(axis=0)[None, :], atol=1e-12)

    def test_idempotent_in_statistics(self, rng):
        x = rng.standard_normal((30, 4))
        y = rng.standard_normal((25, 4)) * 2 + 1
        once = adain(x, y)
        twice = adain(once, y)
        assert np.allclose(once, twice, atol=1e-5)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            adain(np.empty((0, 3)), np.ones((2, 3)))

    def test_feature_dim_mismatch_rejected(self, rng):
        with pytest.raises(DimensionError):
            adain(rng.standard_normal((4, 3)), rng.standard_normal((4, 2)))


class TestSharedAttention:
    def test_empty_reference_is_plain_self_attention(self, rng):
        target = _block(rng, 6, 4)
        empty = AttentionBlock(
            queries=np.empty((0, 4)), keys=np.empty((0, 4)), values=np.empty((0, 4)),
            role="reference",
        )
        out = shared_attention(target, empty)
        scores = target.queries @ target.keys.T / 2.0
        e = np.exp(scores - scores.max(axis=1, keepdims=True))
        expected = (e / e.sum(axis=1, keepdims=True)) @ target.values
        assert np.allclose(out, expected, atol=1e-12)

    def test_rows_are_stochastic(self, rng):
        target = _block(rng, 5, 8)
        reference = _block(rng, 5, 8, role="reference")
        q_hat = adain(target.queries, reference.queries)
        k_hat = adain(target.keys, reference.keys)
        keys = np.vstack([reference.keys, k_hat])
        scores = q_hat @ keys.T / np.sqrt(8)
        e = np.exp(scores - scores.max(axis=1, keepdims=True))
        rows = e / e.sum(axis=1, keepdims=True)
        assert np.allclose(rows.sum(axis=1), 1.0, atol=1e-6)
        assert np.all(rows >= 0)

    def test_two_token_hand_example(self):
        # d_k = 1; all participating scalars distinct, evaluated by hand
        target = AttentionBlock(
            queries=np.array([[1.0], [2.0]]),
            keys=np.array([[0.5], [-0.5]]),
            values=np.array([[3.0], [-1.0]]),
        )
        reference = AttentionBlock(
            queries=np.array([[0.0], [4.0]]),
            keys=np.array([[1.0], [2.0]]),
            values=np.array([[0.25], [0.75]]),
            role="reference",
        )
        out = shared_attention(target, reference)

        def ref_softmax_row(q, keys):
            scores = np.array([q * k for k in keys])
            e = np.exp(scores - scores.max())
            return e / e.sum()

        q_hat = adain(target.queries, reference.queries)
        k_hat = adain(target.keys, reference.keys)
        keys = [reference.keys[0, 0], reference.keys[1, 0], k_hat[0, 0], k_hat[1, 0]]
        values = np.array([0.25, 0.75, 3.0, -1.0])
        expected = np.array(
            [
                ref_softmax_row(q_hat[0, 0], keys) @ values,
                ref_softmax_row(q_hat[1, 0], keys) @ values,
            ]
        )[:, None]
        assert np.allclose(out, expected, atol=1e-12)

    @given(seed=st.integers(0, 2000))
    @settings(max_examples=40)
    def test_output_is_convex_combination_of_values(self, seed):
        gen = np.random.default_rng(seed)
        target = _block(gen, 4, 3)
        reference = _block(gen, 3, 3, role="reference")
        out = shared_attention(target, reference)
        pool = np.vstack([reference.values, target.values])
        assert np.all(out <= pool.max(axis=0) + 1e-9)
        assert np.all(out >= pool.min(axis=0) - 1e-9)

    def test_duplicated_reference_changes_output_but_stays_stochastic(self, rng):
        target = _block(rng, 4, 2)
        reference = AttentionBlock(
            queries=target.queries.copy(),
            keys=target.keys.copy(),
            values=target.values.copy(),
            role="reference",
        )
        out = shared_attention(target, reference)
        pool = np.vstack([reference.values, target.values])
        assert np.all(out <= pool.max(axis=0) + 1e-9)
        assert np.all(out >= pool.min(axis=0) - 1e-9)

    def test_head_dim_mismatch_rejected(self, rng):
        with pytest.raises(DimensionError):
            shared_attention(_block(rng, 3, 4), _block(rng, 3, 5, role="reference"))

    def test_empty_target_rejected(self, rng):
        empty = AttentionBlock(
            queries=np.empty((0, 3)), keys=np.empty((0, 3)), values=np.empty((0, 3))
        )
        with pytest.raises(ValueError):
            shared_attention(empty, _block(rng, 3, 3, role="reference"))
