"""Synthetic data for the linear and additive simulation settings, and selection metrics."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .rand import make_rng

BSAM_NOISE_VAR = 1.74


@dataclass(frozen=True)
class LinearSpec:
    """y = sum_{j in S} beta_j x_j + eps with standard normal x and eps.

    ``S`` holds 1-based predictor indices.
    """

    n: int
    p: int
    S: tuple[int, ...] = ()
    beta: tuple[float, ...] = ()
    seed: int = 0

    def __post_init__(self):
        if len(self.S) != len(self.beta):
            raise ValidationError("S and beta must have the same length")
        if self.n < 2 or self.p < 1:
            raise ValidationError("need n >= 2 and p >= 1")
        if any(not 1 <= s <= self.p for s in self.S) or len(set(self.S)) != len(self.S):
            raise ValidationError("S must hold distinct indices in 1..p")

    @property
    def beta_full(self) -> np.ndarray:
        b = np.zeros(self.p)
        b[np.asarray(self.S, dtype=int) - 1] = self.beta
        return b


def _alternating(S: Sequence[int], odd: float, even: float) -> tuple[float, ...]:
    return tuple(odd if s % 2 else even for s in S)


def preset(name: str, seed: int = 0, n: int | None = None, p: int | None = None) -> LinearSpec:
    """Named simulation settings; ``n`` and ``p`` override the preset sizes."""
    name = name.lower()
    if name in ("case1-large", "case1-small", "mixing"):
        S = (2, 3, 5, 10)
        beta = (-0.9, 0.7, -0.6, 0.8) if name == "case1-small" else (-4.0, 2.0, -1.0, 2.5)
        n0, p0 = (200, 100) if name == "mixing" else (50, 100)
    elif name in ("modelia", "modelib"):
        S = tuple(sorted(list(range(31, 932, 60)) + list(range(60, 961, 60))))
        beta = _alternating(S, 0.8, 1.0)
        n0, p0 = (200 if name == "modelia" else 500), 1000
    elif name in ("modeliia", "modeliib"):
        S = tuple(sorted(list(range(31, 452, 60)) + list(range(60, 481, 60))))
        beta = _alternating(S, -0.8, 0.8)
        n0, p0 = (100 if name == "modeliia" else 500), 500
    elif name == "chain":
        S = tuple(range(1, 16))
        beta = _alternating(S, 0.4, 0.8)
        n0, p0 = 100, 100
    else:
        raise ValidationError(f"unknown preset {name!r}")
    return LinearSpec(n or n0, p or p0, S, beta, seed)


PRESETS = ("case1-large", "case1-small", "modelIA", "modelIB", "modelIIA", "modelIIB", "chain", "mixing")


def generate_linear(spec: LinearSpec) -> tuple[np.ndarray, np.ndarray]:
    rng = make_rng(spec.seed, 0)
    X = rng.standard_normal((spec.n, spec.p))
    eps = rng.standard_normal(spec.n)
    return X, X @ spec.beta_full + eps


def f1(x):
    return np.asarray(x, dtype=float)


def f2(x):
    return (2 * np.asarray(x) - 1) ** 2


def f3(x):
    s = np.sin(2 * np.pi * np.asarray(x))
    return s / (2 - s)


def f4(x):
    a = 2 * np.pi * np.asarray(x)
    s, c = np.sin(a), np.cos(a)
    return 0.1 * s + 0.2 * c + 0.3 * s**2 + 0.4 * c**3 + 0.5 * s**3


TRUE_FUNCTIONS = (f1, f2, f3, f4)


def generate_bsam(n: int, p: int, t: float = 0.0, seed: int = 0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Additive data with the four test functions on x_1..x_4.

    x_j = (w_j + t u)/(1 + t) with w_j, u ~ U(0, 1), so two predictors have
    correlation t^2/(1 + t^2). Returns (X, y, F) where F[:, j] = f_{j+1}(x_{j+1}).
    """
    if t < 0:
        raise ValidationError("t must be non-negative")
    if p < 4:
        raise ValidationError("the additive setting needs p >= 4")
    rng = make_rng(seed, 0)
    W = rng.random((n, p))
    u = rng.random(n)
    X = (W + t * u[:, None]) / (1 + t)
    F = np.column_stack([f(X[:, j]) for j, f in enumerate(TRUE_FUNCTIONS)])
    y = F.sum(axis=1) + np.sqrt(BSAM_NOISE_VAR) * rng.standard_normal(n)
    return X, y, F


def write_csv(path: str | Path, X: np.ndarray, y: np.ndarray, names: Sequence[str] | None = None) -> None:
    """Full-precision CSV with a header; the response column is named ``y``."""
    names = list(names) if names is not None else [f"x{j + 1}" for j in range(X.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["y"])
        for row, yi in zip(X, y):
            w.writerow([repr(float(v)) for v in row] + [repr(float(yi))])


@dataclass(frozen=True)
class SelectionMetrics:
    fp_rate: float
    fn_rate: float
    ms: int
    se: tuple[float, ...] = ()


def selection_metrics(probs, truth: Sequence[int], cutoff: float = 0.5) -> SelectionMetrics:
    """FP-rate = FP/(FP+TN), FN-rate = FN/(FN+TP), MS = number selected.

    ``truth`` holds 0-based indices of the true predictors. A rate whose
    denominator is empty is reported as 0.
    """
    probs = np.asarray(probs, dtype=float)
    sel = probs > cutoff
    true = np.zeros(probs.size, dtype=bool)
    true[np.asarray(truth, dtype=int)] = True
    fp = np.sum(sel & ~true)
    tn = np.sum(~sel & ~true)
    fn = np.sum(~sel & true)
    tp = np.sum(sel & true)
    fpr = fp / (fp + tn) if fp + tn else 0.0
    fnr = fn / (fn + tp) if fn + tp else 0.0
    return SelectionMetrics(float(fpr), float(fnr), int(sel.sum()))


def squared_error(f_true, f_hat) -> float:
    """sum_i (f_i - fhat_i)^2 / n."""
    f_true = np.asarray(f_true, dtype=float)
    return float(np.mean((f_true - np.asarray(f_hat, dtype=float)) ** 2))
