"""Local shrinkage: tau updates, kappa densities and marginal coefficient priors.

The coefficient prior is beta_j ~ N(0, b^2 / tau_j) with

* cauchy:    tau_j ~ Gamma(1/2, 1/2)
* laplace:   tau_j ~ InvGamma(1, 1/2)
* horseshoe: tau_j = u_j / v_j with u_j, v_j ~ Gamma(1/2, 1/2)

and the shrinkage coefficient is kappa = s / (1 + s) with s = tau / (b^2 phi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np
from scipy import integrate

from .data import ChainState, PriorSpec, PRIOR_KINDS
from .errors import ValidationError
from .rand import LAPLACE_MEAN_CAP, gamma_draw, gig_draw, inverse_gaussian_draw

CHI_FLOOR = 1e-300


def _check_kind(kind: str) -> str:
    kind = str(kind).lower()
    if kind not in PRIOR_KINDS:
        raise ValidationError(f"unknown prior kind {kind!r}")
    return kind


_KIND_CODE = {"cauchy": 0, "laplace": 1, "horseshoe": 2}


@nb.njit(cache=True)
def _tau_kernel(code, beta, scale, idx, tau, u, v, rng):
    """Refresh tau (and u, v) at positions ``idx`` given coefficients ``beta``."""
    s2 = scale * scale
    for k in range(idx.size):
        j = idx[k]
        b2 = beta[j] * beta[j]
        if code == 0:
            tau[j] = gamma_draw(1.0, 0.5 * (b2 / s2 + 1.0), rng)
        elif code == 1:
            ab = abs(beta[j])
            mean = LAPLACE_MEAN_CAP
            if ab > 0.0 and scale / ab < LAPLACE_MEAN_CAP:
                mean = scale / ab
            tau[j] = inverse_gaussian_draw(mean, 1.0, rng)
        else:
            u[j] = gamma_draw(1.0, 0.5 * (b2 / (s2 * v[j]) + 1.0), rng)
            chi = b2 * u[j] / s2
            if chi < 1e-300:
                chi = 1e-300
            v[j] = gig_draw(0.0, chi, 1.0, rng)
            tau[j] = u[j] / v[j]


def tau_scale(prior: PriorSpec, phi: float, scaleless: bool = False) -> float:
    """Scale entering the tau conditionals.

    The default is ``b``, which is what the Gaussian prior N(0, b^2/tau)
    implies. ``scaleless=True`` returns ``b/sqrt(phi)`` for users who want
    the variant in which the prior variance is also divided by phi.
    """
    return prior.b / math.sqrt(phi) if scaleless else prior.b


def update_tau(state: ChainState, j, prior: PriorSpec, rng: np.random.Generator, scale: float | None = None) -> np.ndarray:
    """Draw tau_j from its full conditional for one index or an index array.

    ``scale`` overrides the prior scale (see :func:`tau_scale`). Returns the
    new tau values; ``state`` is updated in place.
    """
    idx = np.atleast_1d(np.asarray(j, dtype=np.int64))
    s = prior.b if scale is None else float(scale)
    beta = np.ascontiguousarray(state.beta, dtype=float)
    _tau_kernel(_KIND_CODE[prior.kind], beta, s, idx, state.tau, state.u, state.v, rng)
    out = state.tau[idx]
    return float(out[0]) if np.ndim(j) == 0 else out


def kappa_of_tau(tau, b, phi=1.0):
    """Shrinkage coefficient kappa = s/(1+s), s = tau/(b^2 phi)."""
    s = np.asarray(tau, dtype=float) / (np.asarray(b, dtype=float) ** 2 * np.asarray(phi, dtype=float))
    out = s / (1.0 + s)
    return float(out) if np.ndim(out) == 0 else out


def sample_tau_prior(kind: str, rng: np.random.Generator, size) -> np.ndarray:
    """Draws of tau from its prior p(tau)."""
    kind = _check_kind(kind)
    if kind == "cauchy":
        return rng.gamma(0.5, 2.0, size=size)
    if kind == "laplace":
        return 1.0 / rng.gamma(1.0, 2.0, size=size)
    return rng.gamma(0.5, 2.0, size=size) / rng.gamma(0.5, 2.0, size=size)


@dataclass(frozen=True)
class KappaDensity:
    """Normalized density of kappa under the prior of ``kind`` with phi = 1.

    The normalizers are exact: sqrt(2 pi)/b (cauchy), 2 b^2 (laplace) and
    pi/b (horseshoe), obtained by the change of variables tau = b^2 k/(1-k).
    """

    kind: str
    b: float

    @property
    def log_norm(self) -> float:
        b = self.b
        if self.kind == "cauchy":
            return 0.5 * math.log(2 * math.pi) - math.log(b)
        if self.kind == "laplace":
            return math.log(2.0) + 2 * math.log(b)
        return math.log(math.pi) - math.log(b)

    def log_unnormalized(self, kappa):
        k = np.asarray(kappa, dtype=float)
        b2 = self.b**2
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.kind == "cauchy":
                return -0.5 * np.log(k) - 1.5 * np.log1p(-k) - b2 * k / (2 * (1 - k))
            if self.kind == "laplace":
                return -2 * np.log(k) - (1 - k) / (2 * b2 * k)
            return -0.5 * np.log(k) - 0.5 * np.log1p(-k) - np.log(1 - k + b2 * k)

    def logpdf(self, kappa):
        return self.log_unnormalized(kappa) - self.log_norm

    def __call__(self, kappa):
        out = np.exp(self.logpdf(kappa))
        return float(out) if np.ndim(out) == 0 else out

    def log_pdf_logit(self, t):
        """Log density of t = log(kappa/(1-kappa)) (Jacobian included)."""
        t = np.asarray(t, dtype=float)
        b2 = self.b**2
        # log kappa and log(1-kappa) computed stably from t
        lk = -np.logaddexp(0.0, -t)
        l1k = -np.logaddexp(0.0, t)
        if self.kind == "cauchy":
            core = 0.5 * lk - 0.5 * l1k - b2 * np.exp(t) / 2
        elif self.kind == "laplace":
            core = -lk + l1k - np.exp(-t) / (2 * b2)
        else:
            core = 0.5 * lk + 0.5 * l1k - np.logaddexp(l1k, math.log(b2) + lk)
        return core - self.log_norm

    def cdf(self, kappa: float) -> float:
        """CDF via quadrature in logit space."""
        if kappa <= 0:
            return 0.0
        if kappa >= 1:
            return 1.0
        t_hi = math.log(kappa) - math.log1p(-kappa)
        centre = -2 * math.log(self.b)
        lo = min(centre, t_hi) - 120.0
        pts = [x for x in (centre - 5, centre, centre + 5) if lo < x < t_hi]
        val, _ = integrate.quad(lambda t: math.exp(self.log_pdf_logit(t)), lo, t_hi, points=pts or None, limit=400, epsabs=1e-12)
        return min(max(val, 0.0), 1.0)


def kappa_density(kind: str, b: float) -> KappaDensity:
    kind = _check_kind(kind)
    if not b > 0:
        raise ValidationError("b must be positive")
    return KappaDensity(kind, float(b))


def marginal_beta_density(kind: str, b: float, beta):
    """Marginal prior density of a coefficient, integrating tau out."""
    kind = _check_kind(kind)
    x = np.asarray(beta, dtype=float)
    if kind == "cauchy":
        out = b / (math.pi * (x**2 + b**2))
    elif kind == "laplace":
        out = np.exp(-np.abs(x) / b) / (2 * b)
    else:
        out = np.vectorize(lambda v: _horseshoe_marginal(b, v))(x)
    return float(out) if np.ndim(out) == 0 else out


def _horseshoe_marginal(b: float, beta: float) -> float:
    if beta == 0.0:
        return math.inf
    z2 = (beta / b) ** 2

    # integrate over l = log tau: N(beta; 0, b^2/tau) p(tau) tau
    def f(l):
        tau = math.exp(l)
        log_normal = 0.5 * (l - math.log(2 * math.pi)) - math.log(b) - 0.5 * tau * z2
        log_prior = -math.log(math.pi) - 0.5 * l - math.log1p(tau)
        return math.exp(log_normal + log_prior + l)

    centre = -math.log(z2)
    val, _ = integrate.quad(f, -80.0, centre + 40.0, points=[centre - 2, centre, centre + 2], limit=400, epsabs=0, epsrel=1e-10)
    return val
