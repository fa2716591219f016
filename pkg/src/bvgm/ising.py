"""Ising representation of the inclusion indicators.

Given (beta, phi) the indicators follow P(gamma) ~ exp(-U(gamma)) with

    U(gamma) = -gamma^T J gamma - h^T gamma,
    J = -phi R^T R / 2,   h = phi R^T y,

where R has columns r_j = Z_j beta_j. Writing delta_ij = 1 when gamma_i and
gamma_j agree, the same distribution is

    U(gamma) = -sum_{i<j} K_ij delta_ij - h*^T gamma + const,

with K the off-diagonal part of J and h* = phi R^T (y - R 1/2) = h + J 1.
A graph prior exp(sum_{i<j} W_ij delta_ij) adds W to K; in the quadratic
form it shifts J by W and h by -W 1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numba as nb
import numpy as np
from scipy.special import ndtr

from .data import ChainState, Dataset, Design
from .errors import ValidationError

GIBBS, MH_ANTITHETIC = 0, 1
FLAVORS = {"gibbs": GIBBS, "mh_antithetic": MH_ANTITHETIC, "mh": MH_ANTITHETIC}


def flavor_code(flavor) -> int:
    if isinstance(flavor, (int, np.integer)):
        return int(flavor)
    try:
        return FLAVORS[str(flavor).lower()]
    except KeyError:
        raise ValidationError(f"unknown single-site flavor {flavor!r}") from None


@dataclass(frozen=True)
class IsingField:
    """Interaction matrix ``J`` (diagonal included), fields ``h`` and ``h_star``.

    ``W`` is the graph-prior coupling (zero diagonal) and ``mask`` the
    adjacency that restricts cluster bonds when a graph prior is active.
    """

    J: np.ndarray
    h: np.ndarray
    h_star: np.ndarray
    W: np.ndarray | None = None
    mask: np.ndarray | None = None

    @property
    def p(self) -> int:
        return self.h.shape[0]

    @property
    def J_eff(self) -> np.ndarray:
        return self.J if self.W is None else self.J + self.W

    @property
    def h_eff(self) -> np.ndarray:
        return self.h if self.W is None else self.h - self.W.sum(axis=1)

    @property
    def coupling(self) -> np.ndarray:
        """Pairwise coupling K_ij of the delta form (zero diagonal)."""
        K = self.J_eff.copy()
        np.fill_diagonal(K, 0.0)
        return K


def field_from_parts(J, h, W=None, mask=None) -> IsingField:
    """Assemble a field from a symmetric ``J`` and ``h``; ``h_star = h + J 1``."""
    J = np.asarray(J, dtype=float)
    J = 0.5 * (J + J.T)
    h = np.asarray(h, dtype=float).copy()
    if W is not None:
        W = _check_prior_matrix(W)
    if mask is not None:
        mask = np.asarray(mask, dtype=float)
    return IsingField(J=J, h=h, h_star=h + J.sum(axis=1), W=W, mask=mask)


def _check_prior_matrix(W) -> np.ndarray:
    W = np.asarray(W, dtype=float)
    if not np.allclose(W, W.T, atol=1e-10):
        raise ValidationError("prior interaction matrix must be symmetric")
    if np.any(np.diag(W) != 0):
        raise ValidationError("prior interaction matrix must have zero diagonal")
    return 0.5 * (W + W.T)


def gram_blocks(design: Design, beta: np.ndarray, y: np.ndarray | None = None):
    """Return (R^T R, R^T y) for R with columns Z_j beta_j, without forming R."""
    beta = np.asarray(beta, dtype=float)
    if design.scalar_blocks:
        G = design.ZtZ * np.outer(beta, beta)
        Rty = None if y is None else beta * (design.Z.T @ y)
    else:
        starts = design.offsets[:-1]
        P = np.add.reduceat(design.ZtZ * beta[None, :], starts, axis=1)
        G = np.add.reduceat(P * beta[:, None], starts, axis=0)
        Rty = None if y is None else np.add.reduceat(beta * (design.Z.T @ y), starts)
    return 0.5 * (G + G.T), Rty


def build_field(
    data: Dataset | Design,
    state: ChainState,
    W: np.ndarray | None = None,
    mask: np.ndarray | None = None,
    y: np.ndarray | None = None,
    design: Design | None = None,
) -> IsingField:
    """Ising field for the current (beta, phi, mu) of ``state``.

    ``data`` is a Dataset (its X is the design) or a Design plus explicit
    ``y``. A spline Design can be supplied through ``design`` next to a
    Dataset. The intercept, if any, is removed from the response first.
    """
    if isinstance(data, Dataset):
        y = data.y if y is None else y
        design = Design.linear(data.X) if design is None else design
    else:
        design = data
        if y is None:
            raise ValidationError("y is required when a Design is passed")
    y = np.asarray(y, dtype=float) - state.mu
    G, Rty = gram_blocks(design, state.beta, y)
    phi = state.phi
    J = -0.5 * phi * G
    h = phi * Rty
    h_star = phi * (Rty - 0.5 * G.sum(axis=1))
    if W is not None:
        W = _check_prior_matrix(W)
    return IsingField(J=J, h=h, h_star=h_star, W=W, mask=None if mask is None else np.asarray(mask, dtype=float))


def energy(field: IsingField, gamma) -> float:
    """U(gamma) = -gamma^T J gamma - h^T gamma (graph prior folded in when present)."""
    g = np.asarray(gamma, dtype=float)
    return float(-g @ field.J_eff @ g - field.h_eff @ g)


def pairwise_energy(field: IsingField, gamma) -> float:
    """-sum_{i<j} K_ij delta_ij - h*^T gamma."""
    g = np.asarray(gamma, dtype=float)
    delta = (g[:, None] == g[None, :]).astype(float)
    K = field.coupling
    return float(-0.5 * np.sum(K * delta) - field.h_star @ g)


# ---------------------------------------------------------------- kernels


@nb.njit(cache=True)
def site_delta(J, h, gamma, j):
    """U(gamma_j = 1) - U(gamma_j = 0) with the rest fixed; O(p)."""
    s = 0.0
    for k in range(gamma.size):
        if k != j and gamma[k] != 0:
            s += J[j, k]
    return -J[j, j] - 2.0 * s - h[j]


@nb.njit(cache=True)
def site_update(J, h, gamma, j, flavor, rng):
    d = site_delta(J, h, gamma, j)
    if flavor == 0:
        # P(gamma_j = 1) = 1 / (1 + exp(d))
        if d > 0:
            e = math.exp(-d)
            p1 = e / (1.0 + e)
        else:
            p1 = 1.0 / (1.0 + math.exp(d))
        gamma[j] = 1 if rng.random() < p1 else 0
    else:
        dflip = d if gamma[j] == 0 else -d
        if dflip <= 0.0 or rng.random() < math.exp(-dflip):
            gamma[j] = 1 - gamma[j]


@nb.njit(cache=True)
def shuffle_range(order, rng):
    """Fill ``order`` with a uniform random permutation of 0..n-1 (Fisher-Yates)."""
    n = order.size
    for i in range(n):
        order[i] = i
    for i in range(n - 1, 0, -1):
        k = int(rng.random() * (i + 1))
        if k > i:
            k = i
        t = order[i]
        order[i] = order[k]
        order[k] = t


@nb.njit(cache=True)
def sweep_in_order(J, h, gamma, flavor, rng, order):
    shuffle_range(order, rng)
    for i in range(order.size):
        site_update(J, h, gamma, order[i], flavor, rng)


@nb.njit(cache=True)
def single_site_sweep_kernel(J, h, gamma, flavor, rng):
    order = np.empty(gamma.size, dtype=np.int64)
    sweep_in_order(J, h, gamma, flavor, rng, order)


@nb.njit(cache=True)
def run_single_site_chain(J, h, gamma, flavor, n_sweeps, n_batches, rng):
    """Run ``n_sweeps`` sweeps and return per-batch means of gamma."""
    p = gamma.size
    out = np.zeros((n_batches, p))
    per = n_sweeps // n_batches
    order = np.empty(p, dtype=np.int64)
    for b in range(n_batches):
        for it in range(per):
            sweep_in_order(J, h, gamma, flavor, rng, order)
            for j in range(p):
                out[b, j] += gamma[j]
        for j in range(p):
            out[b, j] /= per
    return out


def _as_gamma(gamma) -> np.ndarray:
    g = np.ascontiguousarray(gamma, dtype=np.int64)
    if not np.all((g == 0) | (g == 1)):
        raise ValidationError("gamma must be binary")
    return g


def single_site_step(field: IsingField, gamma, j: int, rng: np.random.Generator, flavor="mh_antithetic") -> np.ndarray:
    """Update gamma_j; int64 arrays are modified in place, others are copied."""
    g = _as_gamma(gamma)
    site_update(np.ascontiguousarray(field.J_eff), np.ascontiguousarray(field.h_eff), g, int(j), flavor_code(flavor), rng)
    return g


def single_site_sweep(field: IsingField, gamma, rng: np.random.Generator, flavor="mh_antithetic") -> np.ndarray:
    """One random-permutation sweep over all sites; updates gamma in place."""
    g = _as_gamma(gamma)
    single_site_sweep_kernel(np.ascontiguousarray(field.J_eff), np.ascontiguousarray(field.h_eff), g, flavor_code(flavor), rng)
    return g


def site_probability(field: IsingField, gamma, j: int) -> float:
    """Exact conditional P(gamma_j = 1 | gamma_-j)."""
    d = site_delta(np.ascontiguousarray(field.J_eff), np.ascontiguousarray(field.h_eff), _as_gamma(gamma), int(j))
    return float(0.5 * (1.0 - math.tanh(0.5 * d)))


# ---------------------------------------------------------------- graph prior


@dataclass(frozen=True)
class GraphPrior:
    """Positive prior couplings between predictors.

    ``adjacency`` marks connected pairs (strength ``w0``). ``groups`` lists
    node sets whose internal pairs receive the extra ``delta_w``. With
    ``schedule="phi-of-log-b"`` both strengths are multiplied by
    Phi(log b), the standard normal CDF.
    """

    adjacency: np.ndarray
    w0: float = 1.0
    delta_w: float = 0.0
    schedule: str = "fixed"
    groups: tuple = field(default_factory=tuple)

    def __post_init__(self):
        A = np.asarray(self.adjacency, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValidationError("adjacency must be square")
        if not np.array_equal(A, A.T) or np.any(np.diag(A) != 0) or not np.all((A == 0) | (A == 1)):
            raise ValidationError("adjacency must be symmetric, binary, with zero diagonal")
        if self.w0 < 0 or self.delta_w < 0:
            raise ValidationError("prior strengths must be non-negative")
        if self.schedule not in ("fixed", "phi-of-log-b"):
            raise ValidationError(f"unknown schedule {self.schedule!r}")
        object.__setattr__(self, "adjacency", A)
        object.__setattr__(self, "groups", tuple(np.asarray(g, dtype=np.int64) for g in self.groups))

    @property
    def p(self) -> int:
        return self.adjacency.shape[0]

    def group_matrix(self) -> np.ndarray:
        G = np.zeros((self.p, self.p))
        for g in self.groups:
            G[np.ix_(g, g)] = 1.0
        np.fill_diagonal(G, 0.0)
        return G

    def bond_mask(self) -> np.ndarray:
        """Pairs allowed to bond in the cluster update."""
        return np.maximum(self.adjacency, self.group_matrix())

    def strength(self, b: float) -> float:
        return 1.0 if self.schedule == "fixed" else float(ndtr(math.log(b)))


def build_graph_prior_matrix(g: GraphPrior, b: float) -> np.ndarray:
    s = g.strength(b)
    W = s * (g.w0 * g.adjacency + g.delta_w * g.group_matrix())
    return W


def linear_chain_adjacency(p: int, wrap: bool = True) -> np.ndarray:
    """Nearest neighbours on a line; ``wrap`` joins nodes 1 and p."""
    A = np.zeros((p, p))
    i = np.arange(p - 1)
    A[i, i + 1] = A[i + 1, i] = 1.0
    if wrap and p > 2:
        A[0, p - 1] = A[p - 1, 0] = 1.0
    return A


def read_edge_list(path: str | Path, names: Sequence[str]) -> np.ndarray:
    """Adjacency from a CSV of node pairs given as names or 1-based indices."""
    names = list(names)
    lookup = {n: k for k, n in enumerate(names)}
    p = len(names)
    A = np.zeros((p, p))
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if len(row) < 2 or not row[0].strip():
                continue
            ends = []
            for tok in row[:2]:
                tok = tok.strip()
                if tok in lookup:
                    ends.append(lookup[tok])
                elif tok.isdigit():
                    ends.append(int(tok) - 1)
                else:
                    ends = None
                    break
            if ends is None:  # header line
                continue
            i, j = ends
            if not (0 <= i < p and 0 <= j < p):
                raise ValidationError(f"edge {row} refers to an unknown node")
            if i != j:
                A[i, j] = A[j, i] = 1.0
    return A
