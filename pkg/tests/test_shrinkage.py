import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from bvgm.data import ChainState, PriorSpec
from bvgm.rand import make_rng
from bvgm.shrinkage import (kappa_density, kappa_of_tau, marginal_beta_density, sample_tau_prior, tau_scale,
                            update_tau)


def log_prior_tau(kind, tau):
    if kind == "cauchy":
        return -0.5 * np.log(tau) - 0.5 * tau
    if kind == "laplace":
        return -2 * np.log(tau) - 0.5 / tau
    return -0.5 * np.log(tau) - np.log1p(tau)


def conditional_cdf(kind, beta, b):
    """CDF of tau | beta on a log grid, by quadrature of the unnormalized density."""
    def logf(l):
        tau = math.exp(l)
        return 0.5 * l - tau * beta**2 / (2 * b**2) + log_prior_tau(kind, tau) + l

    grid = np.linspace(-25, 12, 2000)
    lf = np.array([logf(l) for l in grid])
    w = np.exp(lf - lf.max())
    cum = integrate.cumulative_trapezoid(w, grid, initial=0.0)
    return np.exp(grid), cum / cum[-1]


def parallel_tau_draws(kind, beta, b, copies=20_000, sweeps=60, seed=0):
    """Final tau of many independent short chains run at a fixed beta."""
    st_ = ChainState.initial(copies)
    st_.beta[:] = beta
    g = make_rng(seed)
    prior = PriorSpec(kind, b)
    idx = np.arange(copies)
    for _ in range(sweeps):
        update_tau(st_, idx, prior, g)
    return st_


class TestUpdateTau:
    def test_laplace_mean(self):
        s = ChainState.initial(N := 100_000)
        s.beta[:] = 1.0
        update_tau(s, np.arange(N), PriorSpec("laplace", 1.0), make_rng(1), scale=2.0)
        assert s.tau.mean() == pytest.approx(2.0, abs=0.03)

    def test_cauchy_zero_beta(self):
        s = ChainState.initial(N := 100_000)
        s.beta[:] = 0.0
        update_tau(s, np.arange(N), PriorSpec("cauchy", 3.0), make_rng(2))
        assert s.tau.mean() == pytest.approx(2.0, abs=0.03)

    def test_laplace_zero_beta_finite(self):
        s = ChainState.initial(10)
        s.beta[:] = 0.0
        update_tau(s, np.arange(10), PriorSpec("laplace", 1.0), make_rng(3))
        assert np.all(np.isfinite(s.tau)) and np.all(s.tau > 0)

    @pytest.mark.parametrize("kind", ["cauchy", "laplace", "horseshoe"])
    def test_conditional_matches_quadrature(self, kind):
        beta, b = 0.7, 1.3
        s = parallel_tau_draws(kind, beta, b)
        grid, cdf = conditional_cdf(kind, beta, b)
        emp = np.searchsorted(np.sort(s.tau), grid) / s.tau.size
        assert np.max(np.abs(emp - cdf)) <= 0.015
        if kind == "horseshoe":
            np.testing.assert_allclose(s.tau, s.u / s.v, rtol=0, atol=0)

    def test_scalar_and_array_returns(self):
        s = ChainState.initial(3)
        s.beta[:] = [0.1, 1.0, 2.0]
        assert isinstance(update_tau(s, 1, PriorSpec("cauchy", 1.0), make_rng(4)), float)
        assert update_tau(s, [0, 2], PriorSpec("cauchy", 1.0), make_rng(4)).shape == (2,)

    def test_tau_scale(self):
        pr = PriorSpec("cauchy", 2.0)
        assert tau_scale(pr, 4.0) == 2.0
        assert tau_scale(pr, 4.0, scaleless=True) == 1.0


class TestKappa:
    def test_examples(self):
        assert kappa_of_tau(2.0 * 4.0, 2.0, 2.0) == pytest.approx(0.5)
        assert kappa_of_tau(3.0, 1.0, 1.0) == pytest.approx(0.75)
        assert kappa_of_tau(1e-300, 1.0, 1.0) < 1e-299

    @settings(max_examples=200)
    @given(st.floats(1e-8, 1e8), st.floats(1e-8, 1e8), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
    def test_monotone_and_bounded(self, t1, t2, b, phi):
        k1, k2 = kappa_of_tau(t1, b, phi), kappa_of_tau(t2, b, phi)
        assert 0.0 <= k1 <= 1.0
        if t1 < t2:
            assert k1 <= k2

    def test_horseshoe_unit_b_is_arcsine(self):
        assert kappa_density("horseshoe", 1.0)(0.5) == pytest.approx(2 / math.pi, rel=1e-12)

    @pytest.mark.parametrize("kind", ["cauchy", "laplace", "horseshoe"])
    @pytest.mark.parametrize("b", [0.1, 1.0, 100.0])
    def test_normalization(self, kind, b):
        kd = kappa_density(kind, b)
        c = -2 * math.log(b)
        total, _ = integrate.quad(lambda t: math.exp(kd.log_pdf_logit(t)), c - 150, c + 150,
                                  points=[c - 10, c, c + 10], limit=500, epsabs=1e-13)
        assert total == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("kind", ["cauchy", "laplace", "horseshoe"])
    @pytest.mark.parametrize("b", [0.1, 1.0, 10.0])
    def test_change_of_variables(self, kind, b):
        k = np.sort(kappa_of_tau(sample_tau_prior(kind, make_rng(5), 100_000), b, 1.0))
        kd = kappa_density(kind, b)
        probe = k[np.linspace(0, k.size - 1, 300).astype(int)]
        probe = probe[(probe > 0) & (probe < 1)]
        emp = np.searchsorted(k, probe, side="right") / k.size
        model = np.array([kd.cdf(x) for x in probe])
        assert np.max(np.abs(emp - model)) <= 0.02


class TestMarginalBeta:
    def test_laplace_at_zero(self):
        assert marginal_beta_density("laplace", 1.0, 0.0) == pytest.approx(0.5)

    def test_cauchy_at_zero(self):
        assert marginal_beta_density("cauchy", 1.0, 0.0) == pytest.approx(1 / math.pi)

    @pytest.mark.parametrize("kind", ["cauchy", "laplace"])
    def test_integrates_to_one(self, kind):
        val, _ = integrate.quad(lambda x: marginal_beta_density(kind, 2.0, x), -np.inf, np.inf)
        assert val == pytest.approx(1.0, abs=1e-8)

    def test_horseshoe_vs_mixture_mc(self):
        tau = sample_tau_prior("horseshoe", make_rng(6), 2_000_000)
        mc = np.mean(np.sqrt(tau / (2 * np.pi)) * np.exp(-0.5 * tau * 4.0))
        assert marginal_beta_density("horseshoe", 1.0, 2.0) == pytest.approx(mc, rel=0.01)

    def test_horseshoe_spike(self):
        assert marginal_beta_density("horseshoe", 1.0, 0.0) == math.inf
