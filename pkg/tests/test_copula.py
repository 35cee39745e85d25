"""Gaussian-copula estimation and sampling."""

import numpy as np
import pytest
from scipy import stats

from bivemos.copula import CopulaModel, copula_sample, estimate_correlation
from bivemos.distributions import UnivariateLaw


def _history(obs, law_w=None, law_t=None):
    law_w = law_w or UnivariateLaw.zero_truncated(5.0, 1.5)
    law_t = law_t or UnivariateLaw.normal(283.0, 2.0)
    return [((law_w, law_t), o) for o in obs]


class TestEstimateCorrelation:
    def test_independent_coordinates_give_small_gamma(self):
        rng = np.random.default_rng(0)
        law_w = UnivariateLaw.zero_truncated(5.0, 1.5)
        law_t = UnivariateLaw.normal(283.0, 2.0)
        obs = np.column_stack([law_w.sample(1000, rng), law_t.sample(1000, rng)])
        model = estimate_correlation(_history(obs, law_w, law_t))
        assert abs(model.gamma) < 0.1

    def test_comonotone_margins_push_gamma_to_one(self):
        # identical latent variable driving both coordinates
        rng = np.random.default_rng(1)
        law_w = UnivariateLaw.zero_truncated(5.0, 1.5)
        law_t = UnivariateLaw.normal(283.0, 2.0)
        u = rng.random(800)
        obs = np.column_stack([law_w.quantile_array(u), law_t.quantile_array(u)])
        model = estimate_correlation(_history(obs, law_w, law_t))
        assert model.gamma > 0.99

    def test_history_of_one_rejected(self):
        with pytest.raises(ValueError):
            estimate_correlation(_history(np.array([[5.0, 283.0]])))

    def test_boundary_cdf_values_winsorized(self):
        # zero wind observations have margin CDF exactly 0
        obs = np.array([[0.0, 283.0]] * 5 + [[5.0, 284.0]] * 5)
        model = estimate_correlation(_history(obs))
        assert -1.0 < model.gamma < 1.0

    def test_gamma_recovery(self):
        rng = np.random.default_rng(7)
        law_w = UnivariateLaw.zero_truncated(5.0, 1.5)
        law_t = UnivariateLaw.normal(283.0, 2.0)
        truth = CopulaModel(gamma=0.55)
        obs = copula_sample((law_w, law_t), truth, 3000, rng)
        model = estimate_correlation(_history(obs, law_w, law_t))
        assert model.gamma == pytest.approx(0.55, abs=0.05)


class TestCopulaSample:
    margins = (
        UnivariateLaw.zero_truncated(5.0, 1.5),
        UnivariateLaw.normal(283.0, 2.0),
    )

    def test_independence_copula(self):
        s = copula_sample(self.margins, CopulaModel(0.0), 10000, 2)
        r = np.corrcoef(s[:, 0], s[:, 1])[0, 1]
        assert abs(r) < 0.05

    def test_margins_preserved_ks(self):
        for gamma in (-0.8, 0.0, 0.8):
            s = copula_sample(self.margins, CopulaModel(gamma), 4000, 3)
            for j, law in enumerate(self.margins):
                res = stats.kstest(s[:, j], lambda x: np.vectorize(law.cdf)(x))
                assert res.pvalue > 0.01, (gamma, j, res)

    def test_standard_normal_margins_close_under_gaussian(self):
        # with standard normal margins the sample is bivariate normal
        margins = (UnivariateLaw.normal(0.0, 1.0), UnivariateLaw.normal(0.0, 1.0))
        s = copula_sample(margins, CopulaModel(0.9), 10000, 4)
        r = np.corrcoef(s[:, 0], s[:, 1])[0, 1]
        assert r == pytest.approx(0.9, abs=0.03)

    def test_truncated_margin_support(self):
        margins = (UnivariateLaw.zero_truncated(-1.0, 1.0), UnivariateLaw.normal(0.0, 1.0))
        s = copula_sample(margins, CopulaModel(0.4), 5000, 5)
        assert np.all(s[:, 0] >= 0.0)

    def test_monotone_dependence_in_gamma(self):
        rhos = []
        for gamma in (-0.8, 0.0, 0.8):
            s = copula_sample(self.margins, CopulaModel(gamma), 6000, 6)
            rhos.append(stats.spearmanr(s[:, 0], s[:, 1]).statistic)
        assert rhos[0] < rhos[1] < rhos[2]

    def test_deterministic_for_seed(self):
        a = copula_sample(self.margins, CopulaModel(0.3), 100, 9)
        b = copula_sample(self.margins, CopulaModel(0.3), 100, 9)
        assert np.array_equal(a, b)

    def test_gamma_bounds_enforced(self):
        with pytest.raises(ValueError):
            CopulaModel(1.0)
        with pytest.raises(ValueError):
            CopulaModel(-1.2)
