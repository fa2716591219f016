"""Datasets, prior configuration and chain state.

Every formula downstream assumes the standardization convention enforced
here: each predictor column has zero mean and unit Euclidean norm (not unit
sample variance), and the response is centered.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConstantColumn, NonFinite, ValidationError

PRIOR_KINDS = ("cauchy", "laplace", "horseshoe")


@dataclass(frozen=True)
class Dataset:
    """Standardized predictors ``X`` (n x p) and centered response ``y``.

    ``x_center``/``x_scale``/``y_center`` record how the raw data were
    transformed so coefficients can be mapped back to raw units.
    """

    X: np.ndarray
    y: np.ndarray
    names: tuple[str, ...]
    x_center: np.ndarray
    x_scale: np.ndarray
    y_center: float = 0.0

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def beta_to_raw(self, beta: np.ndarray) -> np.ndarray:
        """Map coefficients on the standardized scale back to raw units."""
        return np.asarray(beta, dtype=float) / self.x_scale


def standardize(raw_X, raw_y, names: Sequence[str] | None = None) -> Dataset:
    """Center every column of ``raw_X`` and scale it to unit norm; center ``raw_y``.

    Raises ``ConstantColumn`` for a zero-variance column and ``NonFinite`` for
    NaN/Inf entries.
    """
    X = np.array(raw_X, dtype=float)
    y = np.array(raw_y, dtype=float).ravel()
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValidationError("raw_X must be a 2-D array")
    n, p = X.shape
    if y.shape[0] != n:
        raise ValidationError(f"raw_y has {y.shape[0]} entries, expected {n}")
    if n < 2 or p < 1:
        raise ValidationError("need n >= 2 and p >= 1")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NonFinite("input contains NaN or Inf")

    center = X.mean(axis=0)
    Xc = X - center
    # A column is constant when its centered values vanish relative to its magnitude.
    scale = np.sqrt(np.sum(Xc**2, axis=0))
    tiny = 1e-12 * np.maximum(1.0, np.max(np.abs(X), axis=0)) * np.sqrt(n)
    for j in range(p):
        if scale[j] <= tiny[j]:
            raise ConstantColumn(j)
    Xs = Xc / scale
    # One refinement pass pushes the sums down to rounding level.
    Xs -= Xs.mean(axis=0)
    Xs /= np.sqrt(np.sum(Xs**2, axis=0))

    y_center = float(y.mean())
    ys = y - y_center
    ys -= ys.mean()

    if names is None:
        names = tuple(f"x{j + 1}" for j in range(p))
    names = tuple(str(s) for s in names)
    if len(names) != p:
        raise ValidationError("names must have one entry per column")
    return Dataset(X=Xs, y=ys, names=names, x_center=center, x_scale=scale, y_center=y_center)


def projections(d: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Return ``a = X^T y`` and the correlation matrix ``C = X^T X``."""
    a = d.X.T @ d.y
    C = d.X.T @ d.X
    C = 0.5 * (C + C.T)
    return a, C


def load_csv(path: str | Path, response: str, columns: Sequence[str] | None = None) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    """Read a headed CSV and split it into (raw_X, raw_y, predictor names).

    ``response`` names the response column; every other column (or the subset
    listed in ``columns``) becomes a predictor.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        rows = [r for r in reader if r]
    if response not in header:
        raise ValidationError(f"response column {response!r} not in header {header}")
    data = np.array([[float(v) for v in r] for r in rows], dtype=float)
    if columns is None:
        columns = [h for h in header if h != response]
    idx = [header.index(c) for c in columns]
    return data[:, idx], data[:, header.index(response)], tuple(columns)


def load_dataset(path: str | Path, response: str = "y") -> Dataset:
    raw_X, raw_y, names = load_csv(path, response)
    return standardize(raw_X, raw_y, names)


@dataclass(frozen=True)
class PriorSpec:
    """Prior configuration shared by every update in a chain."""

    kind: str = "horseshoe"
    b: float = 1.0
    lambda_cluster: float = 1.0
    intercept: bool = False
    intercept_prior: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        kind = str(self.kind).lower()
        if kind not in PRIOR_KINDS:
            raise ValidationError(f"unknown prior kind {self.kind!r}; expected one of {PRIOR_KINDS}")
        object.__setattr__(self, "kind", kind)
        if not (np.isfinite(self.b) and self.b > 0):
            raise ValidationError("b must be positive and finite")
        if not (0.0 <= self.lambda_cluster <= 1.0):
            raise ValidationError("lambda_cluster must lie in [0, 1]")
        shape, rate = self.intercept_prior
        if not (shape > 0 and rate > 0):
            raise ValidationError("intercept prior shape and rate must be positive")

    def with_b(self, b: float) -> "PriorSpec":
        return PriorSpec(self.kind, float(b), self.lambda_cluster, self.intercept, self.intercept_prior)


@dataclass
class ChainState:
    """Mutable state of one chain.

    ``beta`` is flat: p scalars in the linear model, or the concatenated
    spline blocks in additive mode. ``tau`` is a length-p vector in the linear
    model and a (p, 2) array of (edge, interior) precisions in additive mode.
    """

    gamma: np.ndarray
    beta: np.ndarray
    tau: np.ndarray
    u: np.ndarray
    v: np.ndarray
    phi: float = 1.0
    mu: float = 0.0
    tau_mu: float = 1.0

    @classmethod
    def initial(cls, p: int, n_coef: int | None = None, phi: float = 1.0, bsam: bool = False) -> "ChainState":
        """All predictors included, zero coefficients, unit precisions."""
        n_coef = p if n_coef is None else n_coef
        tau = np.ones((p, 2)) if bsam else np.ones(p)
        return cls(
            gamma=np.ones(p, dtype=np.int64),
            beta=np.zeros(n_coef),
            tau=tau,
            u=np.ones(p),
            v=np.ones(p),
            phi=float(phi),
        )

    def copy(self) -> "ChainState":
        return ChainState(
            gamma=self.gamma.copy(),
            beta=self.beta.copy(),
            tau=self.tau.copy(),
            u=self.u.copy(),
            v=self.v.copy(),
            phi=self.phi,
            mu=self.mu,
            tau_mu=self.tau_mu,
        )

    def check(self) -> None:
        positives = [self.tau, self.u, self.v, np.array([self.phi, self.tau_mu])]
        for arr in positives:
            if not (np.all(np.isfinite(arr)) and np.all(arr > 0)):
                raise ValidationError("chain state has a non-positive or non-finite precision")
        if not np.all((self.gamma == 0) | (self.gamma == 1)):
            raise ValidationError("gamma entries must be 0 or 1")


@dataclass(frozen=True)
class Design:
    """Column blocks used by the coefficient and field updates.

    In the linear model block j is the single column x_j. In additive mode it
    is the spline basis Z_j. ``coord_kind`` selects which column of the
    (p, k) ``tau`` array scales each coefficient's prior precision.
    """

    Z: np.ndarray
    offsets: np.ndarray
    coord_kind: np.ndarray
    ZtZ: np.ndarray = field(repr=False)

    @classmethod
    def from_blocks(cls, blocks: Sequence[np.ndarray], kinds: Sequence[np.ndarray] | None = None) -> "Design":
        mats = [np.asarray(B, dtype=float).reshape(len(B), -1) for B in blocks]
        sizes = [m.shape[1] for m in mats]
        offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        Z = np.hstack(mats)
        if kinds is None:
            coord_kind = np.zeros(Z.shape[1], dtype=np.int64)
        else:
            coord_kind = np.concatenate([np.asarray(k, dtype=np.int64) for k in kinds])
        return cls(Z=Z, offsets=offsets, coord_kind=coord_kind, ZtZ=Z.T @ Z)

    @classmethod
    def linear(cls, X: np.ndarray) -> "Design":
        X = np.asarray(X, dtype=float)
        p = X.shape[1]
        return cls(Z=X, offsets=np.arange(p + 1, dtype=np.int64), coord_kind=np.zeros(p, dtype=np.int64), ZtZ=X.T @ X)

    @property
    def p(self) -> int:
        return len(self.offsets) - 1

    @property
    def n_coef(self) -> int:
        return int(self.offsets[-1])

    @property
    def scalar_blocks(self) -> bool:
        return self.n_coef == self.p

    def block(self, j: int) -> slice:
        return slice(int(self.offsets[j]), int(self.offsets[j + 1]))

    def coords(self, idx) -> np.ndarray:
        """Flat coefficient indices belonging to the predictor set ``idx``."""
        idx = np.asarray(idx, dtype=np.int64).ravel()
        if idx.size == 0:
            return np.zeros(0, dtype=np.int64)
        if self.scalar_blocks:
            return idx
        return np.concatenate([np.arange(self.offsets[j], self.offsets[j + 1]) for j in idx])

    def block_of_coord(self) -> np.ndarray:
        return np.repeat(np.arange(self.p), np.diff(self.offsets))

    def fitted(self, beta: np.ndarray, gamma: np.ndarray) -> np.ndarray:
        """``sum_j gamma_j Z_j beta_j``."""
        mask = np.repeat(np.asarray(gamma, dtype=float), np.diff(self.offsets))
        return self.Z @ (beta * mask)
