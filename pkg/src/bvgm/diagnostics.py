"""Chain driver, magnetization autocorrelation and b-grid profile curves."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .data import ChainState, Dataset, Design, PriorSpec
from .errors import ValidationError, ZeroVariance
from .gibbs import GammaUpdater, gibbs_sweep
from .rand import make_rng
from .wolff import ClusterStats

ACF_FIT_THRESHOLD = 0.05


def magnetization(gamma_draws) -> np.ndarray:
    """Per-sweep fraction of included predictors."""
    G = np.asarray(gamma_draws, dtype=float)
    if G.ndim == 1:
        G = G[None, :]
    if G.shape[0] < 1:
        raise ValidationError("need at least one draw")
    return G.mean(axis=1)


def acf(series, L: int) -> np.ndarray:
    """C(t) = sum_{i<=N-t} (M_i - Mbar)(M_{i+t} - Mbar) / sum_i (M_i - Mbar)^2 for t = 0..L.

    The numerator is the truncated lag sum and the denominator the full sum,
    so C(0) = 1 exactly and |C(t)| <= 1 by Cauchy-Schwarz.
    """
    x = np.asarray(series, dtype=float).ravel()
    N = x.size
    if not 0 <= L < N:
        raise ValidationError(f"max lag {L} must be below the series length {N}")
    d = x - x.mean()
    den = float(d @ d)
    if np.ptp(x) == 0 or den == 0.0:
        raise ZeroVariance("series is constant: the chain appears frozen")
    return np.array([d[: N - t] @ d[t:] for t in range(L + 1)]) / den


def exp_corr_time(C: np.ndarray, threshold: float = ACF_FIT_THRESHOLD) -> float:
    """Least-squares fit of log|C(t)| = log C0 - t/tau over the leading lags with |C| > threshold.

    Only the contiguous run starting at t = 0 is used, which keeps noise-floor
    lags out of the fit. Returns nan when fewer than two lags qualify or the
    fitted slope is not negative.
    """
    a = np.abs(np.asarray(C, dtype=float))
    below = np.flatnonzero(a <= threshold)
    stop = below[0] if below.size else a.size
    if stop < 2:
        return float("nan")
    t = np.arange(stop)
    slope = np.polyfit(t, np.log(a[:stop]), 1)[0]
    return float(-1.0 / slope) if slope < 0 else float("nan")


@dataclass
class MixingReport:
    magnetization: np.ndarray
    acf: np.ndarray
    acf_abs_sum: float
    exp_corr_time: float

    @property
    def L(self) -> int:
        return self.acf.size - 1


def mixing_report(gamma_draws, L: int = 100, threshold: float = ACF_FIT_THRESHOLD) -> MixingReport:
    G = np.asarray(gamma_draws)
    M = magnetization(G) if G.ndim == 2 else np.asarray(G, dtype=float)
    if M.size < 2 * L:
        raise ValidationError(f"need at least {2 * L} draws for {L} lags")
    C = acf(M, L)
    return MixingReport(M, C, float(np.abs(C).sum()), exp_corr_time(C, threshold))


# ------------------------------------------------------------------ chains


@dataclass
class ChainOutput:
    """Post-burn-in record of one chain."""

    gamma: np.ndarray  # (N, p) int8
    beta_mean: np.ndarray
    beta_cond_mean: np.ndarray  # mean of beta over draws with its block included
    phi: np.ndarray
    tau_mean: np.ndarray
    beta: np.ndarray | None = None
    stats: ClusterStats | None = None
    state: ChainState | None = field(default=None, repr=False)

    @property
    def probs(self) -> np.ndarray:
        return self.gamma.mean(axis=0)

    @property
    def magnetization(self) -> np.ndarray:
        return magnetization(self.gamma)


def run_chain(
    design: Design,
    y: np.ndarray,
    prior: PriorSpec,
    updater: GammaUpdater,
    iters: int,
    burn_in: int,
    rng: np.random.Generator,
    state: ChainState | None = None,
    tau_update: Callable | None = None,
    store_beta: bool = False,
    hold_tau: bool = False,
    hold_phi: bool = False,
) -> ChainOutput:
    """Run ``iters`` Gibbs sweeps and keep the draws after ``burn_in``."""
    if not iters > burn_in >= 0:
        raise ValidationError("need iters > burn_in >= 0")
    y = np.asarray(y, dtype=float)
    bsam = not design.scalar_blocks
    if state is None:
        state = ChainState.initial(design.p, design.n_coef, phi=1.0 / max(float(np.var(y)), 1e-12), bsam=bsam)
    N = iters - burn_in
    G = np.zeros((N, design.p), dtype=np.int8)
    phis = np.zeros(N)
    bsum = np.zeros(design.n_coef)
    bcond = np.zeros(design.n_coef)
    tsum = np.zeros_like(state.tau, dtype=float)
    B = np.zeros((N, design.n_coef)) if store_beta else None
    widths = np.diff(design.offsets)
    for it in range(iters):
        gibbs_sweep((design, y), state, prior, updater, rng, tau_update=tau_update, hold_tau=hold_tau, hold_phi=hold_phi)
        if it < burn_in:
            continue
        k = it - burn_in
        G[k] = state.gamma
        phis[k] = state.phi
        bsum += state.beta
        bcond += state.beta * np.repeat(state.gamma, widths)
        tsum += state.tau
        if B is not None:
            B[k] = state.beta
    counts = np.repeat(G.sum(axis=0), widths).astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        cond = np.where(counts > 0, bcond / counts, 0.0)
    return ChainOutput(G, bsum / N, cond, phis, tsum / N, B, updater.stats, state)


def run_field_chain(fld, updater: GammaUpdater, iters: int, burn_in: int, rng: np.random.Generator,
                    gamma0: np.ndarray | None = None) -> np.ndarray:
    """Indicator draws on a fixed field (coefficients and precisions held)."""
    if not iters > burn_in >= 0:
        raise ValidationError("need iters > burn_in >= 0")
    g = np.zeros(fld.p, dtype=np.int64) if gamma0 is None else np.array(gamma0, dtype=np.int64)
    out = np.zeros((iters - burn_in, fld.p), dtype=np.int8)
    for it in range(iters):
        updater.update(fld, g, rng)
        if it >= burn_in:
            out[it - burn_in] = g
    return out


# ---------------------------------------------------------------- profiles


def default_b_grid(n: int = 30, lo: float = 1e-3, hi: float = 1e4) -> np.ndarray:
    return np.logspace(np.log10(lo), np.log10(hi), n)


@dataclass
class ProfileCurve:
    b_grid: np.ndarray
    probs: np.ndarray  # (len(b_grid), p)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.b_grid = np.asarray(self.b_grid, dtype=float)
        self.probs = np.asarray(self.probs, dtype=float)
        if np.any(np.diff(self.b_grid) <= 0) or np.any(self.b_grid <= 0):
            raise ValidationError("b grid must be positive and strictly increasing")

    def rows(self):
        """(b, predictor, probability) triples in grid-major order."""
        for i, b in enumerate(self.b_grid):
            for j, pr in enumerate(self.probs[i]):
                yield b, j, pr


def profile_sweep(
    data: Dataset | tuple[Design, np.ndarray] | None,
    prior: PriorSpec,
    make_updater: Callable[[float], GammaUpdater],
    b_grid: Sequence[float],
    iters: int,
    burn_in: int,
    seed: int,
    tau_update_for: Callable[[PriorSpec], Callable] | None = None,
    field_for: Callable[[float], object] | None = None,
) -> ProfileCurve:
    """One independent chain per grid value of b, on RNG stream i of ``seed``.

    ``make_updater(b)`` builds the indicator update for that b, so a graph
    prior can follow a b-dependent schedule. With ``field_for(b)`` the chain
    only updates the indicators on that fixed field and ``data`` is unused.
    """
    grid = np.asarray(b_grid, dtype=float)
    if field_for is None:
        design, y = (Design.linear(data.X), data.y) if isinstance(data, Dataset) else data
    probs = []
    for i, b in enumerate(grid):
        pr = prior.with_b(b)
        rng = make_rng(seed, i)
        if field_for is not None:
            G = run_field_chain(field_for(b), make_updater(b), iters, burn_in, rng)
            probs.append(G.mean(axis=0))
            continue
        tu = None if tau_update_for is None else tau_update_for(pr)
        out = run_chain(design, y, pr, make_updater(b), iters, burn_in, rng, tau_update=tu)
        probs.append(out.probs)
    meta = dict(iters=iters, burn_in=burn_in, prior=prior.kind, seed=seed)
    return ProfileCurve(grid, np.array(probs), meta)
