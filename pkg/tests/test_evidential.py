import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import gamma as gamma_fn

from epinn.evidential import (EvidentialOutput, constrain_heads, interval_bounds, nll,
                              predictive_interval, predictive_variance, sample_marginal)


def density(out, y):
    """Independent numeric evaluation of the marginal t-density."""
    g, nu, a, b = out.gamma, out.nu, out.alpha, out.beta
    norm = gamma_fn(a + 0.5) / (gamma_fn(a) * math.sqrt(2 * math.pi * b * (1 + nu) / nu))
    return norm * (1 + (y - g) ** 2 / (2 * b * (1 + nu) / nu)) ** (-(a + 0.5))


def random_outputs(n, seed=0):
    rng = np.random.default_rng(seed)
    raws = rng.normal(0, 2, size=(n, 4))
    return [constrain_heads(r) for r in raws]


class TestConstrainHeads:
    def test_zero_raw(self):
        out = constrain_heads(np.zeros(4))
        ln2 = math.log(2.0)
        assert out.gamma == 0.0
        assert out.nu == pytest.approx(ln2)
        assert out.alpha == pytest.approx(1.0 + ln2)
        assert out.beta == pytest.approx(ln2)

    def test_alpha_limits(self):
        hi = constrain_heads([0, 0, 50.0, 0])
        lo = constrain_heads([0, 0, -50.0, 0])
        assert hi.alpha == pytest.approx(51.0, rel=1e-10)
        assert 1.0 < lo.alpha < 1.0 + 1e-13

    def test_invariants_hold_for_random_raws(self):
        for out in random_outputs(200, seed=3):
            assert out.nu > 0 and out.alpha > 1 and out.beta > 0
            var = predictive_variance(out)
            assert np.isfinite(var) and var > 0

    def test_bad_shape(self):
        with pytest.raises(ValueError):
            constrain_heads([1.0, 2.0])


class TestNll:
    def test_reference_value(self):
        # -log[Gamma(2.5) / (Gamma(2) * sqrt(4 pi))], evaluated independently
        out = EvidentialOutput(0.0, 1.0, 2.0, 1.0)
        ref = -math.log(gamma_fn(2.5) / (gamma_fn(2.0) * math.sqrt(4 * math.pi)))
        assert nll(out, 0.0) == pytest.approx(ref, abs=1e-12)
        assert nll(out, 0.0) == pytest.approx(0.9808, abs=1e-4)

    def test_matches_density_for_random_outputs(self):
        rng = np.random.default_rng(1)
        for out in random_outputs(20, seed=5):
            y = out.gamma + rng.normal() * 2
            assert nll(out, y) == pytest.approx(-math.log(density(out, y)), rel=1e-10)

    def test_minimized_at_gamma(self):
        for out in random_outputs(10, seed=8):
            base = nll(out, out.gamma)
            for d in (0.1, 1.0, 5.0):
                assert nll(out, out.gamma + d) > base
                assert nll(out, out.gamma - d) > base

    def test_even_in_y_minus_gamma(self):
        out = EvidentialOutput(1.7, 0.4, 3.0, 2.0)
        for d in (0.3, 1.9, 7.0):
            assert nll(out, out.gamma + d) == pytest.approx(nll(out, out.gamma - d), rel=1e-14)

    def test_density_integrates_to_one(self):
        for out in random_outputs(8, seed=2):
            left, _ = quad(lambda y: math.exp(-nll(out, y)), -np.inf, out.gamma, limit=200)
            right, _ = quad(lambda y: math.exp(-nll(out, y)), out.gamma, np.inf, limit=200)
            assert left + right == pytest.approx(1.0, abs=1e-6)


class TestPredictiveVariance:
    def test_direct_substitution(self):
        assert predictive_variance(EvidentialOutput(0, 1.0, 2.0, 1.0)) == pytest.approx(2.0)

    def test_large_nu_limit(self):
        out = EvidentialOutput(0, 1e9, 2.0, 1.0)
        assert predictive_variance(out) == pytest.approx(1.0, rel=1e-8)

    def test_against_monte_carlo(self):
        out = EvidentialOutput(0.5, 2.0, 4.0, 1.5)
        draws = sample_marginal(out, 10 ** 6, seed=0)
        assert draws.var() == pytest.approx(predictive_variance(out), rel=0.02)

    def test_alpha_at_most_one_rejected(self):
        with pytest.raises(ValueError):
            EvidentialOutput(0, 1.0, 1.0, 1.0)


class TestPredictiveInterval:
    def test_collapses_as_level_vanishes(self):
        out = EvidentialOutput(3.0, 1.0, 2.0, 1.0)
        lo, hi = predictive_interval(out, 1e-9)
        assert lo == pytest.approx(3.0, abs=1e-6)
        assert hi == pytest.approx(3.0, abs=1e-6)

    def test_monte_carlo_coverage(self):
        out = EvidentialOutput(-1.0, 0.8, 3.0, 2.0)
        draws = sample_marginal(out, 10 ** 5, seed=4)
        lo, hi = predictive_interval(out, 0.68)
        cover = np.mean((draws >= lo) & (draws <= hi))
        assert cover == pytest.approx(0.68, abs=0.01)

    def test_nested(self):
        out = EvidentialOutput(0.0, 1.0, 2.5, 1.2)
        lo5, hi5 = predictive_interval(out, 0.5)
        lo9, hi9 = predictive_interval(out, 0.9)
        assert lo9 < lo5 < hi5 < hi9

    def test_gaussian_method(self):
        out = EvidentialOutput(2.0, 1.0, 30.0, 1.0)
        lo_t, hi_t = predictive_interval(out, 0.9)
        lo_g, hi_g = predictive_interval(out, 0.9, method="gaussian")
        # high alpha: the two conventions nearly agree
        assert hi_g == pytest.approx(hi_t, rel=0.02)

    def test_bad_level(self):
        out = EvidentialOutput(0, 1, 2, 1)
        for level in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(ValueError):
                predictive_interval(out, level)

    def test_vectorized_bounds(self):
        g = np.array([0.0, 1.0])
        nu = np.array([1.0, 2.0])
        alpha = np.array([2.0, 3.0])
        beta = np.array([1.0, 0.5])
        lo, hi = interval_bounds(g, nu, alpha, beta, 0.68)
        for i in range(2):
            out = EvidentialOutput(g[i], nu[i], alpha[i], beta[i])
            ref = predictive_interval(out, 0.68)
            assert lo[i] == pytest.approx(ref[0]) and hi[i] == pytest.approx(ref[1])
