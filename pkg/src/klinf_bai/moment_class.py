"""The moment-constrained class L = {eta : E f(|X|) <= B} and its dual geometry.

Two convex families are shipped: ``power`` (f(y) = y**p, p > 1) and
``xlogx`` (f(y) = y log y for y >= 1, zero on [0, 1]).  Everything the
KL_inf solver needs from f goes through three methods: ``f``, ``finv_B`` and
``conjugate``.  A new family can subclass :class:`MomentClass` and override
those; :func:`numeric_conjugate` covers the conjugate if no closed form exists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import lambertw

KINDS = ("power", "xlogx")


@dataclass(frozen=True)
class MomentClass:
    kind: str = "power"
    B: float = 9.0
    p: float = 2.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown f kind {self.kind!r}; expected one of {KINDS}")
        if not self.B > 0:
            raise ValueError("B must be positive")
        if self.kind == "power" and not self.p > 1:
            raise ValueError("power family needs p > 1")

    def f(self, y):
        """f(|y|), vectorized."""
        y = np.abs(np.asarray(y, dtype=float))
        if self.kind == "power":
            return y ** self.p
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(y > 1.0, y * np.log(np.maximum(y, 1.0)), 0.0)

    def f_scalar(self, y: float) -> float:
        y = abs(y)
        if self.kind == "power":
            return y ** self.p
        return y * math.log(y) if y > 1.0 else 0.0

    def fprime(self, y: float) -> float:
        """Right derivative of f on [0, inf)."""
        if self.kind == "power":
            return self.p * y ** (self.p - 1)
        return math.log(y) + 1.0 if y >= 1.0 else 0.0

    @cached_property
    def finv_B(self) -> float:
        """The positive root of f(y) = B (right end of the feasible means)."""
        if self.kind == "power":
            return self.B ** (1.0 / self.p)
        return float(self.B / lambertw(self.B).real)

    def conjugate(self, theta: float) -> tuple[float, float]:
        """Return (y0, f*(theta)) with f*(theta) = sup_{y>=0} theta*y - f(y).

        ``y0`` is the largest maximizer, i.e. the right derivative of f* at
        theta; for xlogx at theta = 0 that is 1 rather than 0.
        """
        if theta <= 0.0:
            return (0.0 if self.kind == "power" else 1.0), 0.0
        if self.kind == "power":
            y0 = (theta / self.p) ** (1.0 / (self.p - 1.0))
            return y0, (self.p - 1.0) * y0 ** self.p
        if theta <= 1.0:
            return 1.0, theta
        try:
            y0 = math.exp(theta - 1.0)
        except OverflowError:
            return math.inf, math.inf
        return y0, y0


def feasible_mean_interval(mc: MomentClass) -> tuple[float, float]:
    """Open interval of means x with f(|x|) < B."""
    r = mc.finv_B
    return -r, r


def membership_margin(dist, mc: MomentClass) -> float:
    """B - E f(|X|); nonnegative iff ``dist`` lies in L."""
    return float(mc.B - np.dot(dist.weights, mc.f(dist.atoms)))


def h_tilde(mc: MomentClass, x: float, lam1: float, lam2: float, y):
    """1 - (y - x) lam1 - (B - f(|y|)) lam2."""
    y = np.asarray(y, dtype=float)
    return 1.0 - (y - x) * lam1 - (mc.B - mc.f(y)) * lam2


def dual_constraint_min(mc: MomentClass, x: float, dual) -> tuple[float, float]:
    """Global minimizer and minimum over y of h_tilde(y) for a dual pair.

    With lam2 = 0 and lam1 > 0 the infimum is -inf and y_min is reported
    as +inf.  With lam1 = 0 any |y| below the first point where f grows is a
    minimizer; the smallest |y| (zero) is returned.
    """
    lam1, lam2 = float(dual[0]), float(dual[1])
    if lam2 <= 0.0:
        if lam1 > 0.0:
            return math.inf, -math.inf
        return 0.0, 1.0
    if lam1 <= 0.0:
        y0 = 0.0
    else:
        y0, _ = mc.conjugate(lam1 / lam2)
    h = 1.0 - (y0 - x) * lam1 - (mc.B - mc.f_scalar(y0)) * lam2
    return y0, h


def numeric_conjugate(f: Callable[[float], float], theta: float, y_hi: float,
                      xatol: float = 1e-12) -> tuple[float, float]:
    """Bracketed evaluation of sup_{0<=y<=y_hi} theta*y - f(y) for a convex f."""
    res = minimize_scalar(lambda y: f(y) - theta * y, bounds=(0.0, y_hi),
                          method="bounded", options={"xatol": xatol, "maxiter": 500})
    y0 = float(res.x)
    return y0, theta * y0 - f(y0)


def constraint_min_bracketed(mc: MomentClass, x: float, dual,
                             y_hi: float | None = None) -> tuple[float, float]:
    """dual_constraint_min by 1-D bounded minimization instead of a closed form.

    This is the route a family without a closed-form conjugate would use;
    it also serves as a cross-check of the closed forms.
    """
    lam1, lam2 = float(dual[0]), float(dual[1])
    if lam2 <= 0.0:
        return dual_constraint_min(mc, x, dual)
    if y_hi is None:
        # h_tilde grows once lam2 f'(y) exceeds lam1; push the bracket past that point
        y_hi = max(1.0, mc.finv_B)
        while lam2 * mc.fprime(y_hi) <= lam1:
            y_hi *= 2.0
        y_hi *= 2.0

    def g(y):
        return 1.0 - (y - x) * lam1 - (mc.B - mc.f_scalar(y)) * lam2

    res = minimize_scalar(g, bounds=(0.0, y_hi), method="bounded",
                          options={"xatol": 1e-12, "maxiter": 1000})
    y0 = float(res.x)
    if lam1 > 0.0 and mc.kind == "power":
        # polish on the stationarity condition, which is smooth for power f
        dg = lambda y: lam2 * mc.fprime(y) - lam1
        if dg(0.0) < 0.0 < dg(y_hi):
            y0 = brentq(dg, 0.0, y_hi, xtol=1e-14, rtol=1e-15)
    return y0, g(y0)
