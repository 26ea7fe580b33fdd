import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swdstyle.ebsw import (
    DiscreteMeasure,
    EnergyFunction,
    bound_check,
    importance_combine,
    is_ebsw,
    projected_distances,
    sw_hat,
    wasserstein_1d_pp,
)
from swdstyle.errors import DimensionError
from swdstyle.slicing import sample_projections
from swdstyle.swdloss import iw_swd, softmax_combine
from swdstyle.tensors import FeatureMap

from .oracles import angular_quadrature_sw_pp, weighted_w1d_reference

EXP = EnergyFunction("exponential")


def _measure(gen, n, d, shift=0.0):
    return DiscreteMeasure(points=gen.standard_normal((n, d)) + shift)


class TestSwHat:
    def test_identical_measures_zero(self, rng):
        mu = _measure(rng, 8, 3)
        assert sw_hat(mu, mu, p=2, count=32, seed=0) == 0.0

    def test_d1_exact_for_any_count(self, rng):
        a = rng.standard_normal((6, 1))
        b = rng.standard_normal((6, 1))
        sa, sb = np.sort(a[:, 0]), np.sort(b[:, 0])
        exact_w2 = np.sqrt(np.mean((sa - sb) ** 2))
        for count in (1, 4, 17):
            value = sw_hat(
                DiscreteMeasure(a), DiscreteMeasure(b), p=2, count=count, seed=count
            )
            assert value == pytest.approx(exact_w2, rel=1e-12)

    def test_d2_matches_angular_quadrature(self, rng):
        a = rng.standard_normal((4, 2))
        b = rng.standard_normal((4, 2)) + 0.7
        reference = angular_quadrature_sw_pp(a, b, p=2, n_angles=100_000) ** 0.5
        value = sw_hat(DiscreteMeasure(a), DiscreteMeasure(b), p=2, count=8192, seed=4)
        assert value == pytest.approx(reference, rel=0.01)

    def test_symmetry_under_same_seed(self, rng):
        mu = _measure(rng, 9, 4)
        nu = _measure(rng, 9, 4, shift=0.5)
        assert sw_hat(mu, nu, 2, 64, seed=8) == pytest.approx(
            sw_hat(nu, mu, 2, 64, seed=8), abs=1e-12
        )

    def test_dim_mismatch_rejected(self, rng):
        with pytest.raises(DimensionError):
            sw_hat(_measure(rng, 4, 2), _measure(rng, 4, 3), 2, 4, 0)

    def test_zero_projections_rejected(self, rng):
        with pytest.raises(DimensionError):
            sw_hat(_measure(rng, 4, 2), _measure(rng, 4, 2), 2, 0, 0)

    def test_unbiasedness_and_variance_decay(self, rng):
        mu = _measure(rng, 12, 4)
        nu = _measure(rng, 12, 4, shift=0.4)
        reference = sw_hat(mu, nu, p=2, count=65536, seed=999) ** 2
        est4 = np.array([sw_hat(mu, nu, 2, 4, seed=s) ** 2 for s in range(1000)])
        est64 = np.array([sw_hat(mu, nu, 2, 64, seed=s) ** 2 for s in range(1000)])
        assert abs(est4.mean() - reference) / reference < 0.01
        ratio = est4.var() / est64.var()
        assert 8.0 <= ratio <= 32.0  # 16x expected, within a factor of 2


class TestWeighted1d:
    @given(
        n=st.integers(1, 6),
        m=st.integers(1, 6),
        seed=st.integers(0, 999),
        p=st.sampled_from([1.0, 2.0, 3.0]),
    )
    @settings(max_examples=60)
    def test_matches_two_pointer_reference(self, n, m, seed, p):
        gen = np.random.default_rng(seed)
        u = gen.standard_normal(n)
        v = gen.standard_normal(m)
        uw = gen.random(n) + 0.1
        uw /= uw.sum()
        vw = gen.random(m) + 0.1
        vw /= vw.sum()
        ours = wasserstein_1d_pp(u, v, uw, vw, p)
        ref = weighted_w1d_reference(u, v, uw, vw, p)
        assert ours == pytest.approx(ref, rel=1e-9, abs=1e-12)

    def test_uniform_equal_size_is_sorted_difference(self, rng):
        u = rng.standard_normal(8)
        v = rng.standard_normal(8)
        w = np.full(8, 1 / 8)
        expected = np.mean((np.sort(u) - np.sort(v)) ** 2)
        assert wasserstein_1d_pp(u, v, w, w, 2) == pytest.approx(expected, rel=1e-12)


class TestIsEbsw:
    def test_equal_distances_reduce_to_sw_hat(self, rng):
        # d=1 measures: both directions yield the same projected distance
        mu = _measure(rng, 6, 1)
        nu = _measure(rng, 6, 1, shift=0.3)
        value, weights = is_ebsw(mu, nu, p=2, count=9, energy=EXP, seed=5)
        assert np.allclose(weights, 1.0 / 9.0, atol=1e-15)
        assert value == pytest.approx(sw_hat(mu, nu, 2, 9, seed=5), rel=1e-12)

    def test_single_projection(self, rng):
        mu = _measure(rng, 5, 3)
        nu = _measure(rng, 5, 3, shift=0.2)
        proj = sample_projections(3, 1, seed=3)
        d = projected_distances(mu, nu, proj.vectors, 2)
        value, weights = is_ebsw(mu, nu, p=2, count=1, energy=EXP, seed=3)
        assert weights.tolist() == [1.0]
        assert value == pytest.approx(float(d[0]) ** 0.5, rel=1e-12)

    def test_hand_computed_combination_agrees_with_loss_module(self):
        d = np.array([0.0, np.log(3.0)])
        value, weights = importance_combine(d, EXP, p=1)
        loss_value, loss_weights = softmax_combine(d)
        assert value == loss_value  # p=1 skips the root: exact agreement
        assert np.array_equal(weights, loss_weights)
        assert value == pytest.approx(0.75 * np.log(3.0), abs=1e-12)

    def test_squared_p2_value_reproduces_iw_swd(self, rng):
        # same features, same projections: the p=2 energy weights are the
        # softmax of the per-projection squared costs, so the squared
        # estimator equals the importance-weighted loss exactly
        src = rng.standard_normal((10, 4))
        tgt = rng.standard_normal((10, 4)) + 0.25
        proj = sample_projections(4, 7, seed=42)
        fm_s = FeatureMap(1, (10, 1), src)
        fm_t = FeatureMap(1, (10, 1), tgt)
        v_loss, _, w_loss = iw_swd(fm_s, fm_t, proj)
        v_ebsw, w_ebsw = is_ebsw(
            DiscreteMeasure(src), DiscreteMeasure(tgt), p=2, count=7,
            energy=EXP, seed=42,
        )
        assert v_ebsw**2 == pytest.approx(v_loss, abs=1e-9)
        assert np.allclose(w_ebsw, w_loss, atol=1e-12)

    def test_polynomial_energy_fallback_on_zero_distances(self, rng):
        mu = _measure(rng, 5, 2)
        value, weights = is_ebsw(
            mu, mu, p=2, count=4, energy=EnergyFunction("polynomial", 2.0), seed=1
        )
        assert value == 0.0
        assert np.allclose(weights, 0.25)

    def test_non_increasing_energy_rejected(self):
        with pytest.raises(ValueError):
            EnergyFunction("polynomial", 0.0)
        with pytest.raises(ValueError):
            EnergyFunction("sqrt-decay")


class TestBound:
    def test_identical_measures(self, rng):
        mu = _measure(rng, 6, 3)
        result = bound_check(mu, mu, p=2, count=16, seed=0)
        assert (result.sw, result.ebsw, result.holds) == (0.0, 0.0, True)

    def test_holds_on_random_sweep(self):
        for seed in range(200):
            gen = np.random.default_rng(seed)
            d = int(gen.integers(1, 17))
            n = int(gen.integers(1, 65))
            m = int(gen.integers(1, 65))
            mu = DiscreteMeasure(gen.standard_normal((n, d)))
            nu = DiscreteMeasure(gen.standard_normal((m, d)) + gen.normal())
            result = bound_check(mu, nu, p=2, count=8, seed=seed)
            assert result.holds

    def test_equality_when_distances_equal(self, rng):
        mu = _measure(rng, 6, 1)
        nu = _measure(rng, 6, 1, shift=0.4)
        result = bound_check(mu, nu, p=2, count=12, seed=6)
        assert result.ebsw == pytest.approx(result.sw, rel=1e-12)

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=50)
    def test_bound_property(self, seed):
        gen = np.random.default_rng(seed)
        mu = DiscreteMeasure(gen.standard_normal((8, 3)))
        nu = DiscreteMeasure(gen.standard_normal((8, 3)) * 1.5)
        assert bound_check(mu, nu, p=2, count=6, seed=seed).holds


class TestMeasureValidation:
    def test_weights_must_sum_to_one(self, rng):
        with pytest.raises(ValueError):
            DiscreteMeasure(rng.standard_normal((4, 2)), weights=np.full(4, 0.3))

    def test_negative_weights_rejected(self, rng):
        w = np.array([0.5, 0.75, -0.25])
        with pytest.raises(ValueError):
            DiscreteMeasure(rng.standard_normal((3, 2)), weights=w)

    def test_non_uniform_weights_accepted(self, rng):
        w = np.array([0.5, 0.3, 0.2])
        mu = DiscreteMeasure(rng.standard_normal((3, 2)), weights=w)
        nu = DiscreteMeasure(rng.standard_normal((5, 2)))
        assert np.isfinite(sw_hat(mu, nu, 2, 8, seed=0))
