import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loopfair.errors import DomainError
from loopfair.numerics import (
    LogitModel,
    SeededRng,
    bernoulli,
    categorical,
    fit_logit,
    logit_gradient,
    logit_score,
    std_normal_cdf,
)


def normal_cdf_series(t, terms=120):
    """Independent oracle: Taylor series of the standard normal CDF,
    Phi(t) = 1/2 + (1/sqrt(2 pi)) sum (-1)^n t^(2n+1) / (n! 2^n (2n+1))."""
    acc = 0.0
    term_coeff = 1.0  # t^(2n+1) / (n! 2^n), built incrementally
    power = t
    for n in range(terms):
        acc += term_coeff * power / (2 * n + 1)
        power *= t * t
        term_coeff *= -1.0 / (2.0 * (n + 1))
    return 0.5 + acc / math.sqrt(2 * math.pi)


class TestStdNormalCdf:
    def test_zero_is_half(self):
        assert std_normal_cdf(0.0) == 0.5

    def test_oracle_values(self):
        for t in [0.0, 1.0, -1.0, 2.0, -2.0, 3.622]:
            assert std_normal_cdf(t) == pytest.approx(normal_cdf_series(t), abs=1e-7)

    def test_paper_operating_point(self):
        # the repayment probability at latent state 0.7244 with slope 5
        assert std_normal_cdf(3.622) == pytest.approx(0.99985, abs=1e-5)

    def test_symmetry(self):
        assert std_normal_cdf(1.0) + std_normal_cdf(-1.0) == pytest.approx(1.0, abs=1e-12)

    @given(st.floats(-8, 8), st.floats(-8, 8))
    def test_monotone(self, t1, t2):
        lo, hi = min(t1, t2), max(t1, t2)
        assert std_normal_cdf(lo) <= std_normal_cdf(hi)

    def test_nonfinite_rejected(self):
        with pytest.raises(DomainError):
            std_normal_cdf(float("nan"))


class TestSeededRng:
    def test_reproducible_streams(self):
        a = SeededRng(123).substream(4, 5)
        b = SeededRng(123).substream(4, 5)
        assert [bernoulli(0.5, a) for _ in range(50)] == [bernoulli(0.5, b) for _ in range(50)]

    def test_distinct_substreams_differ(self):
        a = SeededRng(123).substream(0)
        b = SeededRng(123).substream(1)
        assert [a.uniform() for _ in range(8)] != [b.uniform() for _ in range(8)]

    def test_categorical_sequence_reproducible(self):
        w = [0.2, 0.3, 0.5]
        a = SeededRng(9, (1, 2))
        b = SeededRng(9, (1, 2))
        assert [categorical(w, a) for _ in range(100)] == [categorical(w, b) for _ in range(100)]


class TestBernoulli:
    def test_degenerate(self):
        rng = SeededRng(0)
        assert all(bernoulli(0.0, rng) == 0 for _ in range(100))
        assert all(bernoulli(1.0, rng) == 1 for _ in range(100))

    def test_fair_coin_mean(self):
        rng = SeededRng(1)
        draws = [bernoulli(0.5, rng) for _ in range(100000)]
        assert 0.49 <= np.mean(draws) <= 0.51

    def test_out_of_range(self):
        with pytest.raises(DomainError):
            bernoulli(1.5, SeededRng(0))


class TestCategorical:
    def test_point_mass(self):
        rng = SeededRng(2)
        assert all(categorical([1, 0, 0], rng) == 0 for _ in range(100))

    def test_race_distribution_frequencies(self):
        weights = [0.1235, 0.8406, 0.0359]
        rng = SeededRng(3)
        draws = np.array([categorical(weights, rng) for _ in range(100000)])
        for i, w in enumerate(weights):
            assert abs(np.mean(draws == i) - w) < 0.01

    def test_bad_sum(self):
        with pytest.raises(DomainError):
            categorical([0.5, 0.6], SeededRng(0))

    def test_negative_weight(self):
        with pytest.raises(DomainError):
            categorical([1.2, -0.2], SeededRng(0))


class TestLogitScore:
    def test_scorecard_fixture(self):
        model = LogitModel(weights=np.array([-8.17, 5.77]))
        assert logit_score(model, [0.1, 1.0]) == pytest.approx(4.953, abs=1e-12)

    def test_zero_model(self):
        model = LogitModel(weights=np.zeros(3))
        assert logit_score(model, [1.0, 2.0, 3.0]) == 0.0

    def test_hand_dot_product(self):
        model = LogitModel(weights=np.array([-8.17, 5.77]))
        assert logit_score(model, [0.5, 0.0]) == pytest.approx(-4.085, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            logit_score(LogitModel(weights=np.array([1.0])), [1.0, 2.0])

    @given(st.lists(st.floats(-5, 5), min_size=2, max_size=2),
           st.lists(st.floats(-5, 5), min_size=2, max_size=2))
    def test_linearity(self, f1, f2):
        model = LogitModel(weights=np.array([0.7, -1.3]), intercept=0.4)
        lhs = logit_score(model, np.add(f1, f2))
        rhs = logit_score(model, f1) + logit_score(model, f2) - model.intercept
        assert lhs == pytest.approx(rhs, abs=1e-9)


class TestFitLogit:
    def test_symmetric_data_gives_zero(self):
        X = np.zeros((10, 2))
        y = np.array([0, 1] * 5)
        model = fit_logit(X, y, l2_lambda=1e-4)
        assert np.allclose(model.weights, 0.0, atol=1e-8)
        assert model.intercept == pytest.approx(0.0, abs=1e-8)

    def test_separable_data_stays_finite(self):
        x = np.array([-2.0, -1.5, -1.0, 1.0, 1.5, 2.0])
        y = np.array([0, 0, 0, 1, 1, 1])
        model = fit_logit(x, y, l2_lambda=1e-4)
        assert np.all(np.isfinite(model.weights))
        for xi, yi in zip(x, y):
            p = 1 / (1 + math.exp(-logit_score(model, [xi])))
            assert (p > 0.99) == (yi == 1)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(20)
        X = rng.normal(size=(20, 2))
        y = (rng.random(20) < 0.5).astype(int)
        w = np.array([0.3, -0.7, 1.1])  # [intercept, w1, w2]
        lam = 1e-4
        analytic = logit_gradient(w, X, y, lam)

        def nll(wv):
            Xi = np.column_stack([np.ones(20), X])
            z = Xi @ wv
            return float(np.sum(np.logaddexp(0.0, z) - y * z)
                         + 0.5 * lam * (wv[1:] @ wv[1:]))

        h = 1e-5
        fd = np.zeros_like(w)
        for i in range(w.size):
            wp, wm = w.copy(), w.copy()
            wp[i] += h
            wm[i] -= h
            fd[i] = (nll(wp) - nll(wm)) / (2 * h)
        assert np.max(np.abs(analytic - fd)) <= 1e-6

    def test_fitted_gradient_is_small(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(200, 2))
        logits = 0.5 + X @ np.array([1.0, -2.0])
        y = (rng.random(200) < 1 / (1 + np.exp(-logits))).astype(int)
        model = fit_logit(X, y, l2_lambda=1e-4)
        w = np.concatenate([[model.intercept], model.weights])
        g = logit_gradient(w, X, y, 1e-4)
        assert np.max(np.abs(g)) <= 1e-6

    def test_rejects_bad_labels(self):
        with pytest.raises(DomainError):
            fit_logit(np.ones((3, 1)), np.array([0, 1, 2]))

    def test_rejects_nonfinite(self):
        with pytest.raises(DomainError):
            fit_logit(np.array([[np.nan]]), np.array([1]))
