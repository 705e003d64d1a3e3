"""KL_inf(eta, x): KL projection of eta onto {kappa in L : m(kappa) >= x}.

The concave dual

    max_{lam in R2}  sum_i w_i log(1 - (x_i - x) lam1 - (B - f(|x_i|)) lam2)

is solved along rays lam = r * (omega, 1 - omega), omega in [0, 1).  On a
fixed ray the objective is a concave function of r on [0, r_max(omega)],
where r_max = 1/Q(omega) comes from the conjugate of f, so a safeguarded
Newton step finds the ray maximum.  The ray maximum psi(omega) is
quasi-concave (its superlevel sets are the cones over convex superlevel sets
of the dual), and its derivative has a closed form through the envelope
theorem, so the outer search is a root find on psi'(omega).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np
from scipy.optimize import brentq

from .distributions import DiscreteDistribution
from .errors import BadSide, BadSupport, InfeasibleTarget, NotConverged, OutOfRange
from .moment_class import MomentClass, dual_constraint_min

DEFAULT_TOL = 1e-9
H_FLOOR = 1e-300
_OMEGA_XTOL = 1e-14


@dataclass(frozen=True)
class DualPair:
    lam1: float
    lam2: float

    def __iter__(self):
        yield self.lam1
        yield self.lam2

    def __getitem__(self, i):
        return (self.lam1, self.lam2)[i]


@dataclass(frozen=True)
class KlinfResult:
    value: float
    dual: DualPair
    side: str  # "upper" (m(kappa) >= x) or "lower" (m(kappa) <= x)
    primal_extra_atom: Optional[tuple[float, float]] = None
    omega: float = 0.0  # ray parameter of the optimum, reused as a warm start

    @property
    def slope(self) -> float:
        """d KL_inf / dx at the solved x (lam1 on the upper side, -lam1 on the lower)."""
        return self.dual.lam1 if self.side == "upper" else -self.dual.lam1


# ---------------------------------------------------------------------------
# compiled inner step
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _ray_max(A, Bv, w, om, rmax, r0):
    """Maximize sum w log(1 - r c) over r in [0, rmax], c = A om + Bv (1 - om).

    Returns (r, value, G1, G2, S, at_boundary) where G1 = sum w A/h,
    G2 = sum w Bv/h and S = sum w/h at the maximizer.
    """
    n = A.size
    c = np.empty(n)
    g0 = 0.0
    for i in range(n):
        c[i] = A[i] * om + Bv[i] * (1.0 - om)
        g0 -= w[i] * c[i]
    if g0 <= 0.0 or rmax <= 0.0:
        s1 = 0.0
        s2 = 0.0
        for i in range(n):
            s1 += w[i] * A[i]
            s2 += w[i] * Bv[i]
        return 0.0, 0.0, s1, s2, 1.0, False

    # slope at rmax; an atom touching the boundary makes it -inf
    hmin = 1.0
    gb = 0.0
    for i in range(n):
        h = 1.0 - rmax * c[i]
        if h < hmin:
            hmin = h
        if h > 0.0:
            gb -= w[i] * c[i] / h
    boundary = False
    if hmin > 1e-12 and gb >= 0.0:
        boundary = True
        r = rmax
    else:
        lo = 0.0
        hi = rmax
        r = r0
        if not (r > lo and r < hi):
            r = 0.5 * hi
        for _ in range(200):
            g = 0.0
            gp = 0.0
            bad = False
            for i in range(n):
                h = 1.0 - r * c[i]
                if h <= 0.0:
                    bad = True
                    break
                q = c[i] / h
                g -= w[i] * q
                gp -= w[i] * q * q
            if bad:
                hi = r
                r = 0.5 * (lo + hi)
                continue
            if g > 0.0:
                lo = r
            else:
                hi = r
            # Newton decrement: value error is about g^2 / |gp|
            if g * g <= 1e-26 * (-gp) or hi - lo <= 1e-16 * rmax:
                break
            step = -g / gp
            rn = r - step
            if rn <= lo or rn >= hi:
                rn = 0.5 * (lo + hi)
            r = rn

    val = 0.0
    G1 = 0.0
    G2 = 0.0
    S = 0.0
    for i in range(n):
        h = 1.0 - r * c[i]
        if h < 1e-300:
            h = 1e-300
        val += w[i] * math.log(h)
        G1 += w[i] * A[i] / h
        G2 += w[i] * Bv[i] / h
        S += w[i] / h
    return r, val, G1, G2, S, boundary


# ---------------------------------------------------------------------------
# outer search over the ray angle
# ---------------------------------------------------------------------------


class _RayProblem:
    """Upper-side dual at level x for fixed atoms; evaluated ray by ray."""

    def __init__(self, atoms, weights, x, mc: MomentClass):
        self.mc = mc
        self.x = x
        self.w = weights
        self.A = atoms - x
        self.Bv = mc.B - mc.f(atoms)
        self.g1 = -float(np.dot(weights, self.A))  # x - m
        self.g2 = -float(np.dot(weights, self.Bv))  # E f - B
        self._last_r = 0.0
        self._memo: dict[float, tuple] = {}

    def q(self, om):
        """(Q, Q', y0) with r_max = 1/Q along the ray at om."""
        mc, x = self.mc, self.x
        cc = 1.0 - om
        theta = om / cc
        y0, fstar = mc.conjugate(theta)
        if not math.isfinite(fstar):
            return math.inf, math.inf, y0
        Q = cc * (mc.B + fstar) - x * om
        dQ = -mc.B - fstar + y0 / cc - x
        return Q, dQ, y0

    def solve_ray(self, om):
        hit = self._memo.get(om)
        if hit is not None:
            return hit
        Q, dQ, y0 = self.q(om)
        rmax = 1.0 / Q if Q > 0 else math.inf
        if not math.isfinite(rmax):
            rmax = 1e300
        out = _ray_max(self.A, self.Bv, self.w, om, rmax, self._last_r)
        r = out[0]
        if r > 0:
            self._last_r = r
        res = (out, Q, dQ, y0, rmax)
        self._memo[om] = res
        return res

    def dpsi(self, om):
        """psi'(om) / r, sign-equivalent to psi'(om)."""
        (r, val, G1, G2, S, boundary), Q, dQ, _, _ = self.solve_ray(om)
        if boundary:
            dlog = -dQ / Q  # r_max' / r_max
            return -(dlog * (G1 * om + G2 * (1.0 - om)) + (G1 - G2))
        return -(G1 - G2)


def _positive_range(g1, g2):
    """Ray parameters om with directional derivative g0 . d(om) > 0 at the origin."""
    if g1 > 0.0 and g2 >= 0.0:
        return 0.0, 1.0
    if g1 > 0.0:
        return -g2 / (g1 - g2), 1.0
    if g2 > 0.0:
        return 0.0, g2 / (g2 - g1)
    return None


def _solve_upper(atoms, weights, x, mc: MomentClass, omega0=None):
    """Returns (value, lam1, lam2, S, y0, omega)."""
    prob = _RayProblem(atoms, weights, x, mc)
    rng = _positive_range(prob.g1, prob.g2)
    if rng is None:
        return 0.0, 0.0, 0.0, 1.0, 0.0, 0.0
    a, b = rng
    if a >= 1.0 - 1e-12 or b <= 1e-12:
        # the positive cone is a sliver next to an axis: x sits at m(eta) up to roundoff
        return 0.0, 0.0, 0.0, 1.0, 0.0, 0.0
    # open ends carry a known sign: D > 0 just above a, D < 0 just below b < 1
    if a == 0.0 and prob.dpsi(0.0) <= 0.0:
        om = 0.0
    else:
        lo, hi = _bracket(prob, a, b, omega0)
        if hi - lo <= _OMEGA_XTOL:
            om = hi if prob.solve_ray(hi)[0][1] >= prob.solve_ray(lo)[0][1] else lo
        else:
            om = brentq(prob.dpsi, lo, hi, xtol=_OMEGA_XTOL, rtol=4 * np.finfo(float).eps,
                        maxiter=200)
    (r, val, G1, G2, S, boundary), Q, dQ, y0, rmax = prob.solve_ray(om)
    return max(val, 0.0), r * om, r * (1.0 - om), S, y0, om


def _bracket(prob: _RayProblem, a, b, omega0):
    """Interval [lo, hi] inside (a, b) with dpsi(lo) > 0 >= dpsi(hi)."""
    lo, hi = a, b
    if b >= 1.0:
        hi = None
    if omega0 is not None and a < omega0 < b:
        d0 = prob.dpsi(omega0)
        if d0 > 0.0:
            lo = omega0
        else:
            hi = omega0
        # probe on the other side of the warm start with growing steps
        step = 1e-4
        for _ in range(40):
            if d0 > 0.0:
                span = (b - omega0) if b < 1.0 else (1.0 - omega0)
                if step >= 1.0:
                    break
                cand = omega0 + step * span
                if prob.dpsi(cand) > 0.0:
                    lo = cand
                else:
                    hi = cand
                    break
            else:
                span = omega0 - a
                if step >= 1.0:
                    break
                cand = omega0 - step * span
                if prob.dpsi(cand) <= 0.0:
                    hi = cand
                else:
                    lo = cand
                    break
            step *= 8.0
    if hi is None:
        # psi'' sign unknown at om = 1; approach it geometrically
        gap = 1.0 - lo
        for k in range(1, 60):
            cand = 1.0 - gap * 0.25 ** k
            if cand >= 1.0:
                break
            if prob.dpsi(cand) <= 0.0:
                hi = cand
                break
            lo = cand
        if hi is None:
            hi = lo
    return lo, hi


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------


def _check_target(x, mc: MomentClass):
    if not mc.f_scalar(x) < mc.B:
        raise InfeasibleTarget(f"f(|{x}|) >= B = {mc.B}")


def klinf_upper(eta: DiscreteDistribution, x: float, mc: MomentClass,
                tol: float = DEFAULT_TOL, omega0: float | None = None) -> KlinfResult:
    """KL_inf onto {kappa in L : m(kappa) >= x}, for x >= m(eta)."""
    _check_target(x, mc)
    if x < eta.mean - tol:
        raise BadSide(f"x = {x} lies below m(eta) = {eta.mean}")
    return _upper_core(eta.atoms, eta.weights, x, mc, "upper", omega0)


def _upper_core(atoms, weights, x, mc, side, omega0=None) -> KlinfResult:
    val, l1, l2, S, y0, om = _solve_upper(atoms, weights, float(x), mc, omega0)
    extra = None
    if 1.0 - S > 1e-8 and l2 > 0.0:
        yy = y0 if l1 > 0.0 else 0.0
        extra = (yy if side == "upper" else -yy, 1.0 - S)
    return KlinfResult(val, DualPair(l1, l2), side, extra, om)


def klinf(eta: DiscreteDistribution, x: float, mc: MomentClass,
          tol: float = DEFAULT_TOL, side: str | None = None,
          omega0: float | None = None) -> KlinfResult:
    """KL_inf(eta, x) on the side selected by x versus m(eta).

    ``side`` forces "upper" ({m(kappa) >= x}) or "lower" ({m(kappa) <= x})
    regardless of where x sits; with eta outside L both are positive at
    x = m(eta), so callers that sweep x across the mean pass it explicitly.
    """
    _check_target(x, mc)
    if side is None:
        side = "upper" if x >= eta.mean else "lower"
    if side == "upper":
        return _upper_core(eta.atoms, eta.weights, x, mc, "upper", omega0)
    if side != "lower":
        raise ValueError(f"side must be 'upper' or 'lower', got {side!r}")
    # f(|.|) is even, so reflecting X -> -X swaps the two sides exactly
    return _upper_core(-eta.atoms[::-1], eta.weights[::-1], -x, mc, "lower", omega0)


def klinf_bounded(eta: DiscreteDistribution, x: float, hi: float,
                  tol: float = DEFAULT_TOL) -> float:
    """KL_inf for laws supported on (-inf, hi]: max_lam E log(1 - (X - x) lam)."""
    if eta.atoms[-1] > hi:
        raise BadSupport(f"atom {eta.atoms[-1]} exceeds hi = {hi}")
    if not x < hi:
        raise ValueError("need x < hi")
    if x <= eta.mean:
        return 0.0
    A = eta.atoms - x
    zero = np.zeros_like(A)
    r, val, *_ = _ray_max(A, zero, eta.weights, 1.0, 1.0 / (hi - x), 0.0)
    return max(float(val), 0.0)


def primal_reconstruct(eta: DiscreteDistribution, x: float, mc: MomentClass,
                       dual, side: str = "upper"):
    """Optimal kappa from a dual pair: density 1/h_tilde on eta's atoms plus y0.

    Returns (kappa_on_eta_atoms, extra_atom).  The first element is the
    restriction of kappa to supp(eta) (not renormalized); ``extra_atom`` is
    (y0, 1 - s) when the restricted mass s falls short of 1.
    """
    lam1, lam2 = float(dual[0]), float(dual[1])
    if side == "lower":
        atoms, w, xx = -eta.atoms[::-1], eta.weights[::-1], -x
    else:
        atoms, w, xx = eta.atoms, eta.weights, x
    h = 1.0 - (atoms - xx) * lam1 - (mc.B - mc.f(atoms)) * lam2
    if np.any(h <= 0):
        raise NotConverged("dual pair is infeasible at a support point")
    kw = w / h
    s = float(kw.sum())
    if s > 1.0 + 1e-6:
        raise NotConverged(f"reconstructed mass {s} exceeds 1")
    extra = None
    if s < 1.0 - 1e-8:
        y0, _ = dual_constraint_min(mc, xx, (lam1, lam2))
        extra = (y0, 1.0 - s)
    if side == "lower":
        kw = kw[::-1]
        atoms = -atoms[::-1]
        if extra is not None:
            extra = (-extra[0], extra[1])
    restricted = DiscreteDistribution(atoms, kw, validate=False)
    return restricted, extra


def assemble_primal(restricted: DiscreteDistribution, extra) -> DiscreteDistribution:
    """Full kappa as a single measure (restricted part plus the extra atom)."""
    if extra is None:
        return DiscreteDistribution.from_pairs(restricted.atoms, restricted.weights)
    return DiscreteDistribution.from_pairs(np.append(restricted.atoms, extra[0]),
                                           np.append(restricted.weights, extra[1]))


# ---------------------------------------------------------------------------
# grid caches
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KlinfCache:
    source_id: int
    side: Optional[str]
    grid: np.ndarray
    values: np.ndarray
    slopes: np.ndarray

    @property
    def x_lo(self):
        return float(self.grid[0])

    @property
    def x_hi(self):
        return float(self.grid[-1])


def cache_build(eta: DiscreteDistribution, mc: MomentClass, x_lo: float | None = None,
                x_hi: float | None = None, n_grid: int = 101, side: str | None = None,
                grid=None) -> KlinfCache:
    """Exact solves on a grid (uniform over [x_lo, x_hi] unless ``grid`` is given)."""
    if grid is None:
        if n_grid < 2:
            raise ValueError("n_grid must be at least 2")
        grid = np.linspace(x_lo, x_hi, n_grid)
    grid = np.asarray(grid, dtype=float)
    lo_b, hi_b = -mc.finv_B, mc.finv_B
    if grid[0] <= lo_b or grid[-1] >= hi_b:
        raise InfeasibleTarget("cache interval must lie inside the feasible mean interval")
    vals = np.empty(grid.size)
    slopes = np.empty(grid.size)
    # sweep outward from the mean so each solve warm-starts from a neighbour
    m = eta.mean
    order = np.argsort(np.abs(grid - m), kind="stable")
    warm_up = warm_lo = None
    for i in order:
        x = grid[i]
        s = side if side is not None else ("upper" if x >= m else "lower")
        warm = warm_up if s == "upper" else warm_lo
        res = klinf(eta, x, mc, side=s, omega0=warm)
        vals[i] = res.value
        slopes[i] = res.slope
        if s == "upper":
            warm_up = res.omega if res.value > 0 else warm_up
        else:
            warm_lo = res.omega if res.value > 0 else warm_lo
    return KlinfCache(id(eta), side, grid, vals, slopes)


def cache_eval(cache: KlinfCache, x: float) -> tuple[float, bool]:
    """Linear interpolation; outside the grid the end value is returned with a flag."""
    g = cache.grid
    if x < g[0]:
        return float(cache.values[0]), True
    if x > g[-1]:
        return float(cache.values[-1]), True
    return float(np.interp(x, g, cache.values)), False


def cache_eval_strict(cache: KlinfCache, x: float) -> float:
    val, out = cache_eval(cache, x)
    if out:
        raise OutOfRange(f"x = {x} outside [{cache.x_lo}, {cache.x_hi}]")
    return val
