"""Natural cubic spline basis for additive models, with a two-variance block prior.

Each predictor gets a natural cubic spline parameterized by its ordinates
g at K quantile knots. Slopes at the knots follow from the C2 continuity
conditions (natural ends) as s = A^-1 C g, so the spline is

    f(x) = Phi(x) g + Psi(x) s = t(x) g,     t(x) = Phi(x) + Psi(x) A^-1 C

where Phi and Psi are the piecewise Hermite cardinal functions. Imposing
sum(g) = 0 by eliminating g_1 gives the raw design Z* (K - 1 columns).
The coefficients actually sampled are beta = Delta g~ (end slopes and
interior second differences), so Z = Z* Delta^-1 and the prior is
beta ~ N(0, b^2 T) with T = diag(1/tau_e, 1/tau_d, ..., 1/tau_d, 1/tau_e).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import ChainState, Dataset, Design, PriorSpec
from .errors import DegenerateKnots, ValidationError
from .gibbs import BlockConditional, beta_block_conditional

log = logging.getLogger(__name__)

EDGE, INTERIOR = 0, 1
DEFAULT_KNOTS = 7


def quantile_knots(x: np.ndarray, K: int) -> np.ndarray:
    """Knots at the 100 (k-1)/(K-1) percent sample quantiles.

    Collisions caused by ties are separated by 1e-9 of the range (with a
    logged warning) as long as x has at least K distinct values.
    """
    x = np.asarray(x, dtype=float)
    if K < 4:
        raise ValidationError("a natural spline basis needs at least 4 knots")
    if np.unique(x).size < K:
        raise DegenerateKnots(f"need at least {K} distinct x values, got {np.unique(x).size}")
    nu = np.quantile(x, np.linspace(0.0, 1.0, K))
    if np.all(np.diff(nu) > 0):
        return nu
    eps = 1e-9 * (x.max() - x.min())
    log.warning("quantile knots collide because of ties; jittering by %.3g", eps)
    for k in range(1, K):
        if nu[k] <= nu[k - 1]:
            nu[k] = nu[k - 1] + eps
    # pull back from the top so the last knot stays at max(x)
    nu[-1] = x.max()
    for k in range(K - 2, -1, -1):
        if nu[k] >= nu[k + 1]:
            nu[k] = nu[k + 1] - eps
    if not np.all(np.diff(nu) > 0):
        raise DegenerateKnots("could not separate tied knots")
    return nu


def slope_system(knots: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Matrices A, C with A s = C g for a natural cubic spline through (knots, g)."""
    nu = np.asarray(knots, dtype=float)
    K = nu.size
    h = np.diff(nu)  # h[i] = nu[i+1] - nu[i]
    A = np.zeros((K, K))
    C = np.zeros((K, K))
    A[0, :2] = (2.0, 1.0)
    C[0, :2] = (-3.0 / h[0], 3.0 / h[0])
    for k in range(1, K - 1):
        hl, hr = h[k - 1], h[k]
        w = hr / (hl + hr)  # weight on the left slope
        m = hl / (hl + hr)
        A[k, k - 1 : k + 2] = (w, 2.0, m)
        C[k, k - 1] = -3.0 * w / hl
        C[k, k] = 3.0 * (w / hl - m / hr)
        C[k, k + 1] = 3.0 * m / hr
    A[-1, -2:] = (1.0, 2.0)
    C[-1, -2:] = (-3.0 / h[-1], 3.0 / h[-1])
    return A, C


def hermite_cardinals(x: np.ndarray, knots: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Value (Phi) and slope (Psi) cardinal functions evaluated at ``x``.

    Phi_k(nu_l) = [k == l], Phi_k'(nu_l) = 0, Psi_k(nu_l) = 0 and
    Psi_k'(nu_l) = [k == l]. Points outside the knot range are clamped.
    """
    x = np.clip(np.asarray(x, dtype=float), knots[0], knots[-1])
    K = knots.size
    i = np.clip(np.searchsorted(knots, x, side="right") - 1, 0, K - 2)
    h = knots[i + 1] - knots[i]
    s = (x - knots[i]) / h
    s2, s3 = s * s, s * s * s
    rows = np.arange(x.size)
    Phi = np.zeros((x.size, K))
    Psi = np.zeros((x.size, K))
    Phi[rows, i] = 1 - 3 * s2 + 2 * s3
    Phi[rows, i + 1] = 3 * s2 - 2 * s3
    Psi[rows, i] = h * (s - 2 * s2 + s3)
    Psi[rows, i + 1] = h * (s3 - s2)
    return Phi, Psi


def difference_matrix(knots: np.ndarray) -> np.ndarray:
    """Delta mapping g~ = (g_2..g_K) to (first slope, interior second differences, last slope).

    The first row folds in g_1 = -sum(g~).
    """
    h = np.diff(np.asarray(knots, dtype=float))
    K = h.size + 1
    M = K - 1
    D = np.zeros((M, M))
    D[0, :] = 1.0 / h[0]
    D[0, 0] = 2.0 / h[0]
    # row r looks at knot index r + 1 (0-based) with neighbours r and r + 2,
    # i.e. columns r - 1, r, r + 1 of g~
    for r in range(1, K - 2):
        hl, hr = h[r], h[r + 1]
        D[r, r - 1] = 1.0 / hl
        D[r, r] = -(1.0 / hl + 1.0 / hr)
        D[r, r + 1] = 1.0 / hr
    D[-1, -2] = -1.0 / h[-1]
    D[-1, -1] = 1.0 / h[-1]
    return D


@dataclass(frozen=True)
class SplineBasis:
    """Basis for one predictor.

    ``col_mean`` is the sample mean of each column of Z* Delta^-1, removed so
    that the additive components do not absorb a level shift.
    """

    knots: np.ndarray
    A: np.ndarray
    C: np.ndarray
    Delta: np.ndarray
    Z_star: np.ndarray
    Z: np.ndarray
    col_mean: np.ndarray
    slopes: np.ndarray = field(repr=False)  # A^-1 C

    @property
    def K(self) -> int:
        return int(self.knots.size)

    @property
    def M(self) -> int:
        return self.K - 1

    @property
    def coord_kind(self) -> np.ndarray:
        kind = np.full(self.M, INTERIOR, dtype=np.int64)
        kind[[0, -1]] = EDGE
        return kind

    def t_matrix(self, x) -> np.ndarray:
        """Rows t(x) with f(x) = t(x) g for the full ordinate vector g."""
        Phi, Psi = hermite_cardinals(np.atleast_1d(x), self.knots)
        return Phi + Psi @ self.slopes

    def z_star(self, x) -> np.ndarray:
        t = self.t_matrix(x)
        return t[:, 1:] - t[:, :1]

    def evaluate(self, x) -> np.ndarray:
        """Centred design rows Z(x) for new points."""
        return np.linalg.solve(self.Delta.T, self.z_star(x).T).T - self.col_mean


def build_ls_basis(x, K: int = DEFAULT_KNOTS, center: bool = True) -> SplineBasis:
    x = np.asarray(x, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise ValidationError("x must be finite")
    knots = quantile_knots(x, K)
    A, C = slope_system(knots)
    slopes = np.linalg.solve(A, C)
    Delta = difference_matrix(knots)
    if not np.isfinite(np.linalg.cond(Delta)) or np.linalg.cond(Delta) > 1e14:
        raise DegenerateKnots("difference matrix is numerically singular")
    Phi, Psi = hermite_cardinals(x, knots)
    t = Phi + Psi @ slopes
    Z_star = t[:, 1:] - t[:, :1]
    Z = np.linalg.solve(Delta.T, Z_star.T).T  # Z* Delta^-1
    mean = Z.mean(axis=0) if center else np.zeros(Z.shape[1])
    return SplineBasis(knots, A, C, Delta, Z_star, Z - mean, mean, slopes)


def build_bsam_design(X, K: int | Sequence[int] = DEFAULT_KNOTS, center: bool = True) -> tuple[list[SplineBasis], Design]:
    """Spline bases for every column of ``X`` and the stacked block design."""
    X = np.asarray(X, dtype=float)
    Ks = [K] * X.shape[1] if np.ndim(K) == 0 else list(K)
    if len(Ks) != X.shape[1]:
        raise ValidationError("one knot count per predictor is required")
    bases = [build_ls_basis(X[:, j], int(k), center) for j, k in enumerate(Ks)]
    design = Design.from_blocks([B.Z for B in bases], [B.coord_kind for B in bases])
    return bases, design


def block_prior_cov(tau_ej: float, tau_dj: float, M: int, b: float) -> np.ndarray:
    """b^2 T_j for one predictor."""
    diag = np.full(M, 1.0 / tau_dj)
    diag[[0, -1]] = 1.0 / tau_ej
    return b**2 * np.diag(diag)


def bsam_block_conditional(d: Dataset | np.ndarray, design: Design, state: ChainState, c, prior: PriorSpec) -> BlockConditional:
    """Gaussian conditional of the stacked spline blocks in ``c``.

    ``d`` is the Dataset (or the centred response) supplying y.
    """
    y = d.y if isinstance(d, Dataset) else np.asarray(d, dtype=float)
    return beta_block_conditional((design, y), state, c, prior)


def update_bsam_variances(state: ChainState, design: Design, j: int, prior: PriorSpec, rng: np.random.Generator) -> tuple[float, float]:
    """Conjugate Gamma draws of the edge and interior precisions of block j.

    With beta_j ~ N(0, b^2 T_j) and tau ~ Gamma(1/2, 1/2) a priori, a group
    of m coordinates sharing tau gives Gamma(1/2 + m/2, 1/2 + sum(beta^2)/(2 b^2)).
    """
    sl = design.block(j)
    beta = state.beta[sl]
    kind = design.coord_kind[sl]
    b2 = prior.b**2
    out = []
    for k in (EDGE, INTERIOR):
        bk = beta[kind == k]
        shape = 0.5 + 0.5 * bk.size
        rate = 0.5 + 0.5 * float(bk @ bk) / b2
        state.tau[j, k] = rng.standard_gamma(shape) / rate
        out.append(float(state.tau[j, k]))
    return out[0], out[1]


def bsam_tau_updater(design: Design, prior: PriorSpec):
    """Callable suitable for the ``tau_update`` hook of the Gibbs sweep."""

    def _update(state: ChainState, rng: np.random.Generator) -> None:
        for j in range(design.p):
            update_bsam_variances(state, design, j, prior, rng)

    return _update


@dataclass
class FunctionEstimate:
    predictor: int
    x: np.ndarray
    f_hat: np.ndarray
    lo95: np.ndarray
    hi95: np.ndarray
    selection_prob: float
    never_selected: bool


def estimate_functions(beta_draws, gamma_draws, design: Design, mode: str = "conditional",
                       x: np.ndarray | None = None, level: float = 0.95) -> list[FunctionEstimate]:
    """Posterior curve estimates and pointwise credible bands per predictor.

    ``conditional`` averages Z_j beta_j over the draws with gamma_j = 1 and
    returns the zero function (flagged) when there are none. ``unconditional``
    averages gamma_j Z_j beta_j over all draws. ``x`` optionally supplies the
    abscissae reported with each curve (one column per predictor).
    """
    if mode not in ("conditional", "unconditional"):
        raise ValidationError(f"unknown mode {mode!r}")
    B = np.asarray(beta_draws, dtype=float)
    G = np.asarray(gamma_draws)
    if B.ndim != 2 or G.ndim != 2 or B.shape[0] != G.shape[0]:
        raise ValidationError("beta and gamma draws must be 2-D with matching rows")
    n = design.Z.shape[0]
    q = (1 - level) / 2
    out = []
    for j in range(design.p):
        sl = design.block(j)
        Zj = design.Z[:, sl]
        sel = G[:, j] == 1
        xj = np.arange(n, dtype=float) if x is None else np.asarray(x)[:, j]
        if mode == "conditional":
            if not sel.any():
                z = np.zeros(n)
                out.append(FunctionEstimate(j, xj, z, z.copy(), z.copy(), 0.0, True))
                continue
            curves = B[sel][:, sl] @ Zj.T
        else:
            curves = (B[:, sl] * G[:, j : j + 1]) @ Zj.T
        lo, hi = np.quantile(curves, [q, 1 - q], axis=0)
        out.append(FunctionEstimate(j, xj, curves.mean(axis=0), lo, hi, float(sel.mean()), not sel.any()))
    return out
