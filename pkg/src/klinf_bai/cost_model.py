"""Experiment cost as a function of the batch size m.

With A = beta_tilde / V the predicted sample count is A + m, the number of
solves is (A + m)/m and a solve on n samples costs c21 + c22 n, giving

    cost(m) = (c1 + c21/m)(A + m) + 0.5 c22 (A + m)^2 / m,

a convex function of m > 0 whose minimizer has a closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCost, DomainError, Underdetermined


@dataclass(frozen=True)
class CostParams:
    c1: float  # seconds per sample
    c21: float  # seconds per solve, fixed part
    c22: float  # seconds per solve per sample already drawn

    def __post_init__(self):
        if min(self.c1, self.c21, self.c22) < 0:
            raise ValueError("cost parameters must be nonnegative")


@dataclass(frozen=True)
class SolverFit:
    c21: float
    c22: float
    residual: float
    clamped: bool


def fit_solver_cost(timings) -> SolverFit:
    """Least-squares line seconds = c21 + c22 n through (n, seconds) pairs."""
    arr = np.asarray(timings, dtype=float)
    n, sec = arr[:, 0], arr[:, 1]
    if np.unique(n).size < 2:
        raise Underdetermined("need at least two distinct n values")
    X = np.column_stack([np.ones_like(n), n])
    (c21, c22), *_ = np.linalg.lstsq(X, sec, rcond=None)
    clamped = c21 < 0 or c22 < 0
    c21, c22 = max(float(c21), 0.0), max(float(c22), 0.0)
    resid = float(np.sqrt(np.mean((sec - (c21 + c22 * n)) ** 2)))
    return SolverFit(c21, c22, resid, clamped)


def beta_tilde(delta: float, C: float, alpha: float) -> float:
    """log(C/delta (log(C/delta))^alpha)."""
    r = C / delta
    if not r > math.e:
        raise DomainError("beta_tilde needs C/delta > e")
    lr = math.log(r)
    return lr + alpha * math.log(lr)


def complexity_proxy(delta: float, C: float, alpha: float, V: float, m: float) -> float:
    return beta_tilde(delta, C, alpha) / V + m


def total_cost(m: float, cp: CostParams, delta: float, C: float, alpha: float,
               V: float) -> float:
    if m < 1:
        raise ValueError("m must be at least 1")
    A = beta_tilde(delta, C, alpha) / V
    return (cp.c1 + cp.c21 / m) * (A + m) + 0.5 * cp.c22 * (A + m) ** 2 / m


def optimal_batch(cp: CostParams, delta: float, C: float, alpha: float, V: float) -> float:
    """Continuous minimizer sqrt((c21 A + 0.5 c22 A^2) / (c1 + 0.5 c22))."""
    den = cp.c1 + 0.5 * cp.c22
    if den <= 0:
        raise DegenerateCost("c1 + 0.5 c22 must be positive")
    A = beta_tilde(delta, C, alpha) / V
    return math.sqrt((cp.c21 * A + 0.5 * cp.c22 * A * A) / den)


def integer_batch(m_star: float, K: int) -> int:
    """Round up and floor at (K+1)^2."""
    return max(int(math.ceil(m_star)), (K + 1) ** 2)


def resolve_auto_batch(cp: CostParams, delta: float, alpha: float, V: float, K: int,
                       C_of_m, C0: float | None = None, max_iter: int = 50) -> tuple[int, float]:
    """Joint (m, C) when both are automatic: C depends on m through the series."""
    m = (K + 1) ** 2
    C = C_of_m(m) if C0 is None else C0
    for _ in range(max_iter):
        m_new = integer_batch(optimal_batch(cp, delta, C, alpha, V), K)
        C = C_of_m(m_new)
        if m_new == m:
            return m, C
        m = m_new
    return m, C
