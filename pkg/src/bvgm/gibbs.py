"""Full-conditional updates for coefficients, noise precision and intercept,
and the sweep that strings them together with an indicator update."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .data import ChainState, Dataset, Design, PriorSpec
from .errors import DegenerateResidual, ValidationError
from .ising import IsingField, build_field, flavor_code, single_site_sweep_kernel
from .rand import cholesky_jittered
from .shrinkage import update_tau
from .wolff import ClusterStats, ClusterUpdater


@dataclass
class BlockConditional:
    """Gaussian conditional N(mu, Q^-1) of the coefficients at ``coords``.

    The precision Q and its lower Cholesky factor are stored; the covariance
    is formed only on request.
    """

    indices: np.ndarray
    coords: np.ndarray
    precision: np.ndarray
    mean: np.ndarray
    chol: np.ndarray

    @property
    def Sigma(self) -> np.ndarray:
        k = self.precision.shape[0]
        return sla.cho_solve((self.chol, True), np.eye(k))

    @property
    def mu(self) -> np.ndarray:
        return self.mean

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal(self.mean.size)
        return self.mean + sla.solve_triangular(self.chol, z, lower=True, trans="T")


def _as_design(data) -> tuple[Design, np.ndarray]:
    if isinstance(data, Dataset):
        return Design.linear(data.X), data.y
    if isinstance(data, tuple):
        return data
    raise ValidationError("expected a Dataset or a (Design, y) pair")


def prior_precision(design: Design, tau: np.ndarray, b: float) -> np.ndarray:
    """Per-coefficient prior precision tau / b^2 (spline blocks use edge/interior tau)."""
    tau = np.asarray(tau, dtype=float)
    blk = design.block_of_coord()
    t = tau[blk] if tau.ndim == 1 else tau[blk, design.coord_kind]
    return t / b**2


def beta_block_conditional(data, state: ChainState, c, prior: PriorSpec, b: float | None = None) -> BlockConditional:
    """Conditional of the coefficient blocks of predictor set ``c``.

    When every gamma in ``c`` is 1 the conditional is N(mu_c, (phi Z_c^T Z_c + D_c)^-1)
    with mu_c = phi Sigma_c Z_c^T (y - mu - sum over included j outside c of Z_j beta_j).
    When every gamma is 0 it is the prior N(0, D_c^-1).
    """
    design, y = _as_design(data)
    b = prior.b if b is None else b
    c = np.atleast_1d(np.asarray(c, dtype=np.int64))
    coords = design.coords(c)
    d = prior_precision(design, state.tau, b)[coords]
    g = state.gamma[c]
    if np.all(g == 0):
        Q = np.diag(d)
        return BlockConditional(c, coords, Q, np.zeros(coords.size), np.diag(np.sqrt(d)))
    if not np.all(g == 1):
        raise ValidationError("block must be all included or all excluded")
    phi = state.phi
    mask = np.repeat(state.gamma.astype(float), np.diff(design.offsets))
    mask[coords] = 0.0
    resid = (y - state.mu) - design.Z @ (state.beta * mask)
    Zc = design.Z[:, coords]
    Q = phi * design.ZtZ[np.ix_(coords, coords)] + np.diag(d)
    L = cholesky_jittered(Q)
    rhs = phi * (Zc.T @ resid)
    mean = sla.cho_solve((L, True), rhs)
    return BlockConditional(c, coords, Q, mean, L)


def residual(data, state: ChainState) -> np.ndarray:
    design, y = _as_design(data)
    return y - state.mu - design.fitted(state.beta, state.gamma)


def update_phi(data, state: ChainState, rng: np.random.Generator) -> float:
    """phi ~ Gamma(n/2, RSS/2) under the 1/phi prior."""
    r = residual(data, state)
    rss = float(r @ r)
    if not rss >= 1e-300:
        raise DegenerateResidual(f"residual sum of squares {rss!r} is zero: the fit interpolates y")
    state.phi = float(rng.standard_gamma(0.5 * r.size) / (0.5 * rss))
    return state.phi


def update_intercept(data, state: ChainState, prior: PriorSpec, rng: np.random.Generator) -> tuple[float, float]:
    """mu | rest ~ N(phi 1^T r / (n phi + tau_mu), 1 / (n phi + tau_mu)), then
    tau_mu | mu ~ Gamma(shape + 1/2, rate + mu^2 / 2)."""
    design, y = _as_design(data)
    r = y - design.fitted(state.beta, state.gamma)
    n = r.size
    prec = n * state.phi + state.tau_mu
    state.mu = float(state.phi * r.sum() / prec + rng.standard_normal() / math.sqrt(prec))
    shape, rate = prior.intercept_prior
    state.tau_mu = float(rng.standard_gamma(shape + 0.5) / (rate + 0.5 * state.mu**2))
    return state.mu, state.tau_mu


@dataclass
class GammaUpdater:
    """Strategy for the indicator half of a sweep.

    ``algorithm`` is "single_site" or "cluster". ``W`` and ``mask`` carry a
    graph prior; ``stats`` collects cluster co-membership counts if given.
    """

    algorithm: str = "single_site"
    flavor: str = "mh_antithetic"
    lam: float = 1.0
    growth: str = "incremental"
    rest: str = "all"
    W: np.ndarray | None = None
    mask: np.ndarray | None = None
    stats: ClusterStats | None = None
    _cluster: ClusterUpdater | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.algorithm not in ("single_site", "cluster", "fixed"):
            raise ValidationError(f"unknown algorithm {self.algorithm!r}")

    def update(self, fld: IsingField, gamma: np.ndarray, rng: np.random.Generator) -> None:
        if self.algorithm == "fixed":
            return
        if self.algorithm == "single_site":
            single_site_sweep_kernel(np.ascontiguousarray(fld.J_eff), np.ascontiguousarray(fld.h_eff), gamma, flavor_code(self.flavor), rng)
            return
        if self._cluster is None:
            self._cluster = ClusterUpdater(fld, self.lam, self.flavor, self.growth, self.rest)
        else:
            self._cluster.set_field(fld, self.lam)
        self._cluster.sweep(gamma, rng, self.stats)


def update_beta(data, state: ChainState, prior: PriorSpec, rng: np.random.Generator) -> None:
    """Included blocks jointly from their Gaussian conditional, excluded ones from the prior."""
    design, y = _as_design(data)
    inc = np.flatnonzero(state.gamma == 1)
    exc = np.flatnonzero(state.gamma == 0)
    if exc.size:
        coords = design.coords(exc)
        d = prior_precision(design, state.tau, prior.b)[coords]
        state.beta[coords] = rng.standard_normal(coords.size) / np.sqrt(d)
    if inc.size:
        bc = beta_block_conditional((design, y), state, inc, prior)
        state.beta[bc.coords] = bc.draw(rng)


def gibbs_sweep(
    data,
    state: ChainState,
    prior: PriorSpec,
    updater: GammaUpdater,
    rng: np.random.Generator,
    tau_update=None,
    hold_tau: bool = False,
    hold_phi: bool = False,
) -> ChainState:
    """One sweep in the order gamma, beta, tau, phi, mu (mu only with an intercept).

    ``tau_update(state, rng)`` replaces the default local-precision refresh;
    the spline model passes its edge/interior variance update here.
    """
    design, y = _as_design(data)
    fld = build_field(design, state, W=updater.W, mask=updater.mask, y=y)
    updater.update(fld, state.gamma, rng)
    update_beta((design, y), state, prior, rng)
    if not hold_tau:
        if tau_update is not None:
            tau_update(state, rng)
        else:
            update_tau(state, np.arange(design.p), prior, rng)
    if not hold_phi:
        update_phi((design, y), state, rng)
    if prior.intercept:
        update_intercept((design, y), state, prior, rng)
    return state
