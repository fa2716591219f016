"""Seedable sampling primitives.

All samplers take a ``numpy.random.Generator``; the scalar kernels are
compiled with numba and consume the same generator, so replaying a seed
reproduces every draw bit for bit.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np
import scipy.linalg as sla

from .errors import DomainError, NotSPD

LAPLACE_MEAN_CAP = 1e12


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Independent PCG64 stream ``stream`` derived from ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.PCG64(ss))


# ---------------------------------------------------------------- kernels


@nb.njit(cache=True)
def gamma_draw(shape, rate, rng):
    # numpy's standard_gamma is Marsaglia-Tsang with the shape<1 boost.
    return rng.standard_gamma(shape) / rate


@nb.njit(cache=True)
def inverse_gaussian_draw(mean, shape, rng):
    """Michael-Schucany-Haas transform, written to avoid cancellation at huge means."""
    nu = rng.standard_normal()
    w = mean * nu * nu / (2.0 * shape)
    # mean * (1 + w - sqrt(w^2 + 2w)) rewritten as mean / (1 + w + sqrt(w^2 + 2w))
    x = mean / (1.0 + w + math.sqrt(w * w + 2.0 * w))
    if rng.random() * (mean + x) <= mean:
        return x
    return mean * (mean / x)


@nb.njit(cache=True)
def _psi(x, alpha, lam):
    return -alpha * (math.cosh(x) - 1.0) - lam * (math.exp(x) - x - 1.0)


@nb.njit(cache=True)
def _dpsi(x, alpha, lam):
    return -alpha * math.sinh(x) - lam * (math.exp(x) - 1.0)


@nb.njit(cache=True)
def gig_draw(lam, chi, psi, rng):
    """GIG(lam >= 0, chi, psi) with density ~ x^(lam-1) exp(-(chi/x + psi x)/2).

    Devroye's (2014) uniformly bounded rejection sampler on log x for the
    two-parameter form GIG(lam, omega, omega), then rescaled by sqrt(chi/psi).
    """
    omega = math.sqrt(chi * psi)
    alpha = math.sqrt(omega * omega + lam * lam) - lam

    x = -_psi(1.0, alpha, lam)
    if 0.5 <= x <= 2.0:
        t = 1.0
    elif x > 2.0:
        t = math.sqrt(2.0 / (alpha + lam))
    else:
        t = math.log(4.0 / (alpha + 2.0 * lam))

    x = -_psi(-1.0, alpha, lam)
    if 0.5 <= x <= 2.0:
        s = 1.0
    elif x > 2.0:
        s = math.sqrt(4.0 / (alpha * math.cosh(1.0) + lam))
    else:
        ia = 1.0 / alpha
        s = math.log(1.0 + ia + math.sqrt(ia * ia + 2.0 * ia))
        if lam > 0.0:
            s = min(1.0 / lam, s)

    eta = -_psi(t, alpha, lam)
    zeta = -_dpsi(t, alpha, lam)
    theta = -_psi(-s, alpha, lam)
    xi = _dpsi(-s, alpha, lam)
    p = 1.0 / xi
    r = 1.0 / zeta
    td = t - r * eta
    sd = s - p * theta
    q = td + sd
    total = p + q + r

    while True:
        U = rng.random()
        V = rng.random()
        W = rng.random()
        if U * total < q:
            X = -sd + q * V
        elif U * total < q + r:
            X = td - r * math.log(V)
        else:
            X = -sd + p * math.log(V)
        if X > td:
            bound = math.exp(-eta - zeta * (X - t))
        elif X < -sd:
            bound = math.exp(-theta + xi * (X + s))
        else:
            bound = 1.0
        if W * bound <= math.exp(_psi(X, alpha, lam)):
            break
    w = math.exp(X) * (lam / omega + math.sqrt(1.0 + (lam / omega) ** 2))
    return w * math.sqrt(chi / psi)


@nb.njit(cache=True)
def _gamma_array(shape, rate, out, rng):
    for i in range(out.size):
        out[i] = gamma_draw(shape[i], rate[i], rng)


@nb.njit(cache=True)
def _ig_array(mean, shape, out, rng):
    for i in range(out.size):
        out[i] = inverse_gaussian_draw(mean[i], shape[i], rng)


@nb.njit(cache=True)
def _gig_array(chi, psi, out, rng):
    for i in range(out.size):
        out[i] = gig_draw(0.0, chi[i], psi[i], rng)


# ---------------------------------------------------------------- public API


def _broadcast(size, *params):
    arrs = np.broadcast_arrays(*[np.asarray(a, dtype=float) for a in params])
    shape = arrs[0].shape if size is None else tuple(np.atleast_1d(size))
    arrs = [np.ascontiguousarray(np.broadcast_to(a, shape)).ravel() for a in arrs]
    return shape, arrs


def _positive(name, value):
    v = np.asarray(value, dtype=float)
    if not (np.all(np.isfinite(v)) and np.all(v > 0)):
        raise DomainError(f"{name} must be positive and finite, got {value!r}")


def _finish(out, shape):
    if shape == ():
        return float(out[0])
    return out.reshape(shape)


def sample_gamma(shape, rate, rng: np.random.Generator, size=None):
    """Gamma(shape, rate) draws (mean shape/rate)."""
    _positive("shape", shape)
    _positive("rate", rate)
    oshape, (a, r) = _broadcast(size, shape, rate)
    a, r = np.atleast_1d(a), np.atleast_1d(r)
    out = np.empty(a.size)
    _gamma_array(a, r, out, rng)
    return _finish(out, oshape)


def sample_inverse_gaussian(mean, shape, rng: np.random.Generator, size=None):
    """Inverse Gaussian ING(mean, shape) draws."""
    _positive("mean", mean)
    _positive("shape", shape)
    oshape, (m, s) = _broadcast(size, mean, shape)
    m, s = np.atleast_1d(m), np.atleast_1d(s)
    out = np.empty(m.size)
    _ig_array(m, s, out, rng)
    return _finish(out, oshape)


def sample_gig_zero(chi, psi, rng: np.random.Generator, size=None):
    """Index-zero GIG draws, density ~ v^-1 exp(-(chi/v + psi v)/2)."""
    _positive("chi", chi)
    _positive("psi", psi)
    oshape, (c, q) = _broadcast(size, chi, psi)
    c, q = np.atleast_1d(c), np.atleast_1d(q)
    out = np.empty(c.size)
    _gig_array(c, q, out, rng)
    return _finish(out, oshape)


def cholesky_jittered(A: np.ndarray, attempts: int = 3) -> np.ndarray:
    """Lower Cholesky factor, adding 1e-10*trace/k to the diagonal on failure."""
    A = np.asarray(A, dtype=float)
    k = A.shape[0]
    if k == 0:
        return np.zeros((0, 0))
    jitter = 1e-10 * np.trace(A) / k
    M = A
    for attempt in range(attempts + 1):
        try:
            return sla.cholesky(M, lower=True, check_finite=True)
        except (sla.LinAlgError, ValueError):
            if attempt == attempts or not np.isfinite(jitter) or jitter <= 0:
                break
            M = M + jitter * np.eye(k)
    raise NotSPD(f"matrix of size {k} is not positive definite")


def sample_mvn(mean, matrix, rng: np.random.Generator, form: str = "covariance", chol: np.ndarray | None = None):
    """One multivariate normal draw.

    ``form="precision"`` treats ``matrix`` as Q = Sigma^-1 and solves
    L^T x = z instead of inverting. A precomputed lower factor may be passed
    through ``chol``.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    k = mean.size
    z = rng.standard_normal(k)
    L = cholesky_jittered(matrix) if chol is None else chol
    if form == "covariance":
        return mean + L @ z
    if form == "precision":
        return mean + sla.solve_triangular(L, z, lower=True, trans="T")
    raise ValueError(f"unknown form {form!r}")
