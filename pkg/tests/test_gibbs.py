import math

import numpy as np
import pytest
from scipy import stats

from bvgm.data import ChainState, Design, PriorSpec, standardize
from bvgm.diagnostics import run_chain
from bvgm.errors import DegenerateResidual, ValidationError
from bvgm.gibbs import (GammaUpdater, beta_block_conditional, gibbs_sweep, update_beta, update_intercept,
                        update_phi)
from bvgm.rand import make_rng
from bvgm.theory import enumerate_gamma_beta_integrated


def orthogonal_data():
    X = np.array([[1.0, 1.0], [-1.0, 1.0], [1.0, -1.0], [-1.0, -1.0]]) / 2
    y = np.array([0.8, -0.5, 0.3, -0.6])
    return standardize(X, y)


def batch_se(x, batches=50):
    m = x[: len(x) // batches * batches].reshape(batches, -1).mean(axis=1)
    return m.std(ddof=1) / math.sqrt(batches)


class TestBetaConditional:
    def test_orthogonal_shrinkage(self):
        d = orthogonal_data()
        s = ChainState.initial(2)
        s.tau[:] = [0.7, 2.0]
        s.phi = 1.6
        b = 0.9
        a = d.X.T @ d.y
        bc = beta_block_conditional(d, s, [0], PriorSpec("cauchy", b))
        kappa = (s.tau[0] / (b**2 * s.phi)) / (1 + s.tau[0] / (b**2 * s.phi))
        # beta_2 is included too, but orthogonality removes it from the residual
        assert bc.mu[0] == pytest.approx((1 - kappa) * a[0], rel=1e-12)
        assert bc.Sigma[0, 0] == pytest.approx((1 - kappa) / s.phi, rel=1e-12)

    def test_prior_branch(self):
        d = orthogonal_data()
        s = ChainState.initial(2)
        s.gamma[:] = 0
        s.tau[:] = [4.0, 0.25]
        bc = beta_block_conditional(d, s, [0, 1], PriorSpec("laplace", 2.0))
        np.testing.assert_allclose(bc.mu, 0.0)
        np.testing.assert_allclose(np.diag(bc.Sigma), [1.0, 16.0])

    def test_prior_draw_variance(self):
        d = orthogonal_data()
        s = ChainState.initial(2)
        s.gamma[:] = 0
        s.tau[:] = [4.0, 0.25]
        pr = PriorSpec("laplace", 2.0)
        g = make_rng(1)
        draws = np.empty((50_000, 2))
        for k in range(draws.shape[0]):
            update_beta(d, s, pr, g)
            draws[k] = s.beta
        np.testing.assert_allclose(draws.var(axis=0), [1.0, 16.0], rtol=0.03)

    def test_two_by_two_oracle(self, rng):
        X = rng.normal(size=(9, 2))
        X[:, 1] += X[:, 0]
        d = standardize(X, rng.normal(size=9))
        s = ChainState.initial(2)
        s.tau[:] = [0.3, 1.7]
        s.phi = 2.2
        b = 1.4
        bc = beta_block_conditional(d, s, [0, 1], PriorSpec("horseshoe", b))
        Dc = np.diag(s.tau / b**2)
        Sigma = np.linalg.inv(s.phi * d.X.T @ d.X + Dc)
        np.testing.assert_allclose(bc.Sigma, Sigma, atol=1e-12)
        np.testing.assert_allclose(bc.mu, s.phi * Sigma @ d.X.T @ d.y, atol=1e-12)

    def test_mixed_block_rejected(self):
        d = orthogonal_data()
        s = ChainState.initial(2)
        s.gamma[1] = 0
        with pytest.raises(ValidationError):
            beta_block_conditional(d, s, [0, 1], PriorSpec("cauchy", 1.0))

    def test_blockwise_vs_coordinatewise(self, rng):
        X = rng.normal(size=(20, 3))
        X[:, 2] += 0.7 * X[:, 0]
        d = standardize(X, X @ [1.0, -0.5, 0.3] + 0.5 * rng.normal(size=20))
        pr = PriorSpec("cauchy", 1.0)
        sweeps = 100_000
        s = ChainState.initial(3, phi=4.0)
        g = make_rng(2)
        block = np.empty((sweeps, 3))
        for k in range(sweeps):
            update_beta(d, s, pr, g)
            block[k] = s.beta
        s = ChainState.initial(3, phi=4.0)
        g = make_rng(3)
        coord = np.empty((sweeps, 3))
        for k in range(sweeps):
            for j in range(3):
                s.beta[j] = beta_block_conditional(d, s, [j], pr).draw(g)[0]
            coord[k] = s.beta
        for j in range(3):
            z = (block[:, j].mean() - coord[:, j].mean()) / math.hypot(batch_se(block[:, j]), batch_se(coord[:, j]))
            assert 2 * stats.norm.sf(abs(z)) > 0.01


class TestPhi:
    def test_gamma_mean(self):
        Z = np.zeros((4, 1))
        Z[0, 0] = 1.0
        design = Design.linear(Z)
        y = np.array([1.0, -1.0, 0.0, 0.0])
        s = ChainState.initial(1)
        s.gamma[:] = 0
        g = make_rng(4)
        draws = np.array([update_phi((design, y), s, g) for _ in range(100_000)])
        assert draws.mean() == pytest.approx(2.0, abs=0.03)

    def test_rss_oracle(self, rng):
        d = standardize(rng.normal(size=(7, 3)), rng.normal(size=7))
        s = ChainState.initial(3)
        s.beta = rng.normal(size=3)
        s.gamma[:] = [1, 0, 1]
        r = [d.y[i] - sum(d.X[i, j] * s.beta[j] * s.gamma[j] for j in range(3)) for i in range(7)]
        rss = sum(v * v for v in r)
        ga, gb = make_rng(5), np.random.Generator(np.random.PCG64(0))
        gb.bit_generator.state = ga.bit_generator.state
        phi = update_phi(d, s, ga)
        assert phi == pytest.approx(gb.standard_gamma(3.5) / (rss / 2), rel=1e-12)

    def test_interpolation_error(self):
        Z = np.eye(2)
        s = ChainState.initial(2)
        s.beta[:] = [1.0, 2.0]
        with pytest.raises(DegenerateResidual):
            update_phi((Design.linear(Z), np.array([1.0, 2.0])), s, make_rng(0))


class TestIntercept:
    def test_plug_in(self):
        design = Design.linear(np.zeros((1, 1)))
        s = ChainState.initial(1)
        s.gamma[:] = 0
        s.tau_mu = 1.0
        pr = PriorSpec("cauchy", 1.0, intercept=True, intercept_prior=(4.0, 2.0))
        g = make_rng(6)
        mus = []
        for _ in range(40_000):
            s.tau_mu = 1.0
            mus.append(update_intercept((design, np.array([2.0])), s, pr, g)[0])
        mus = np.array(mus)
        assert mus.mean() == pytest.approx(1.0, abs=0.015)
        assert mus.var() == pytest.approx(0.5, abs=0.015)

    def test_zero_residual_mean(self):
        design = Design.linear(np.zeros((5, 1)))
        s = ChainState.initial(1, phi=1e12)
        s.gamma[:] = 0
        pr = PriorSpec("cauchy", 1.0, intercept=True, intercept_prior=(1.0, 1.0))
        mu, tmu = update_intercept((design, np.zeros(5)), s, pr, make_rng(7))
        assert abs(mu) < 1e-5 and tmu > 0


class TestSweep:
    def test_determinism(self, rng):
        d = standardize(rng.normal(size=(25, 4)), rng.normal(size=25))
        out = []
        for _ in range(2):
            s = ChainState.initial(4)
            g = make_rng(8)
            for _ in range(20):
                gibbs_sweep(d, s, PriorSpec("horseshoe", 1.0), GammaUpdater("cluster"), g)
            out.append(s)
        np.testing.assert_array_equal(out[0].beta, out[1].beta)
        np.testing.assert_array_equal(out[0].gamma, out[1].gamma)
        assert out[0].phi == out[1].phi

    def test_state_invariants_hold(self, rng):
        d = standardize(rng.normal(size=(25, 4)), rng.normal(size=25))
        s = ChainState.initial(4)
        g = make_rng(9)
        pr = PriorSpec("horseshoe", 0.5, intercept=True, intercept_prior=(4.0, 2.0))
        for _ in range(50):
            gibbs_sweep(d, s, pr, GammaUpdater(), g)
            s.check()
            np.testing.assert_allclose(s.tau, s.u / s.v, rtol=1e-12)

    def test_p1_conjugate_mean(self, rng):
        d = standardize(rng.normal(size=(15, 1)), rng.normal(size=15))
        s = ChainState.initial(1, phi=2.5)
        s.tau[:] = 0.6
        b = 0.8
        design = Design.linear(d.X)
        out = run_chain(design, d.y, PriorSpec("cauchy", b), GammaUpdater("fixed"), 50_000, 0, make_rng(10),
                        state=s, hold_tau=True, hold_phi=True)
        prec = s.phi + 0.6 / b**2
        mean = s.phi * float(d.X[:, 0] @ d.y) / prec
        se = math.sqrt(1 / prec / 50_000)
        assert abs(out.beta_mean[0] - mean) <= 3 * se

    @pytest.mark.parametrize("algorithm", ["single_site", "cluster"])
    def test_p8_full_chain_vs_integrated_enumeration(self, algorithm):
        r = np.random.default_rng(77)
        X = r.normal(size=(40, 8)) + 0.6 * r.normal(size=(40, 1))
        y = X[:, :3] @ [0.9, -0.6, 0.5] + r.normal(size=40)
        d = standardize(X, y)
        tau, phi, b = np.full(8, 1.0), 1.0 / np.var(d.y), 0.7
        s = ChainState.initial(8, phi=phi)
        exact = enumerate_gamma_beta_integrated(d, tau, phi, b).marginals
        out = run_chain(Design.linear(d.X), d.y, PriorSpec("cauchy", b), GammaUpdater(algorithm), 60_000, 1_000,
                        make_rng(11), state=s, hold_tau=True, hold_phi=True)
        G = out.gamma.astype(float)
        for j in range(8):
            assert abs(G[:, j].mean() - exact[j]) <= max(3 * batch_se(G[:, j]), 1e-3)
