"""Max-min lower-bound allocation: t*(mu), V(mu) and the crossing points x_j.

The best arm's curve K1(x) = KL_inf(mu_1, x) is taken on the lower side
(m(kappa) <= x) and each competitor's Kj(x) on the upper side, for x between
the two means.  With I_j(y) = min_x K1(x) + y Kj(x), the solver finds y_j(c)
with I_j(y_j) = c for each competitor and then the level c* at which
S(c) = sum_j K1(x_j)/Kj(x_j) equals one.

Two evaluation modes share the same outer logic:

* exact (``n_grid=None``): every K value is a fresh dual solve, and the
  inner minimum over x is a root of K1' + y Kj' (both slopes are dual
  multipliers).
* cached (``n_grid=G``): each curve is tabulated on a common node set and
  interpolated linearly; the inner minimum of a piecewise-linear sum is
  attained at a node, so it is an exact argmin over nodes.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .distributions import DiscreteDistribution
from .errors import DegenerateGap, NoGap, NotConverged, TargetAboveRange, TooLarge
from .klinf import cache_build, klinf
from .moment_class import MomentClass

GAP_TOL = 1e-12


@dataclass
class AllocationSolution:
    t_star: np.ndarray
    V: float
    c_star: float
    x_cross: np.ndarray  # x_j(c*) for the competitors, in arm order
    y_ratios: np.ndarray  # y_j(c*) = t_j / t_best, in arm order (best arm holds 1)
    best: int = 0
    tie: bool = False
    degenerate: bool = False  # S(c_lo) >= 1: possible only when the best arm is outside L
    residual_b: float = 0.0
    spread_c: float = 0.0
    solver_seconds: float = 0.0
    trace: list = field(default_factory=list)


class ArmCurve:
    """x -> (KL_inf(eta, x), slope) on a fixed side, memoized with warm starts."""

    def __init__(self, eta: DiscreteDistribution, mc: MomentClass, side: str):
        self.eta, self.mc, self.side = eta, mc, side
        self._memo: dict[float, tuple[float, float]] = {}
        self._omega = None

    def __call__(self, x: float) -> tuple[float, float]:
        hit = self._memo.get(x)
        if hit is not None:
            return hit
        res = klinf(self.eta, x, self.mc, side=self.side, omega0=self._omega)
        if res.value > 0:
            self._omega = res.omega
        out = (res.value, res.slope)
        self._memo[x] = out
        return out

    def value(self, x):
        return self(x)[0]


class TabulatedCurve:
    """Piecewise-linear curve through tabulated KL_inf values."""

    def __init__(self, nodes: np.ndarray, values: np.ndarray):
        self.nodes = nodes
        self.values = values

    def value(self, x):
        return float(np.interp(x, self.nodes, self.values))


def best_arm(means) -> tuple[int, bool]:
    means = np.asarray(means, dtype=float)
    top = float(means.max())
    idx = int(np.argmax(means))  # lowest index among ties
    tie = int(np.sum(means >= top - GAP_TOL)) > 1
    return idx, tie


# ---------------------------------------------------------------------------
# exact inner problems
# ---------------------------------------------------------------------------


def _inner_exact(k1: ArmCurve, kj: ArmCurve, m1: float, mj: float, y: float,
                 xtol: float) -> tuple[float, float]:
    """argmin and min over [mj, m1] of K1(x) + y Kj(x)."""
    def slope(x):
        return k1(x)[1] + y * kj(x)[1]

    def total(x):
        return k1(x)[0] + y * kj(x)[0]

    if y == 0.0:
        # K1 is nonincreasing here; return the left end of its flat part
        v1 = k1(m1)[0]
        if k1(mj)[0] <= v1 + 1e-15:
            return mj, v1
        lo, hi = mj, m1
        while hi - lo > xtol:
            mid = 0.5 * (lo + hi)
            if k1(mid)[1] < -1e-13:
                lo = mid
            else:
                hi = mid
        return hi, v1
    if slope(mj) >= 0.0:
        return mj, total(mj)
    if slope(m1) <= 0.0:
        return m1, total(m1)
    x = brentq(slope, mj, m1, xtol=xtol, rtol=8.9e-16)
    return x, total(x)


def inner_min(mu1: DiscreteDistribution, muj: DiscreteDistribution, y: float,
              mc: MomentClass, tol: float = 1e-10) -> tuple[float, float]:
    """(x_j, value) minimizing KL_inf(mu1, x) + y KL_inf(muj, x) over [m(muj), m(mu1)]."""
    m1, mj = mu1.mean, muj.mean
    if m1 <= mj + GAP_TOL:
        raise DegenerateGap(f"m(mu1) = {m1} does not exceed m(muj) = {mj}")
    return _inner_exact(ArmCurve(mu1, mc, "lower"), ArmCurve(muj, mc, "upper"), m1, mj, y, tol)


class _Pair:
    """One (best arm, competitor) pair: I_j(y) and its inverse in y."""

    def __init__(self, m1, mj, inner, dj):
        self.m1, self.mj = m1, mj
        self.inner = inner  # y -> (x, I(y), K1(x), Kj(x))
        self.dj = dj

    def y_of_c(self, c, c_lo, tol):
        if c >= self.dj:
            raise TargetAboveRange(f"c = {c} is not below d_j = {self.dj}")
        y = 0.0
        x, val, a, b = self.inner(0.0)
        if c <= val + tol:
            return 0.0, x, a, b
        y_hi = math.inf
        for _ in range(400):
            # I is concave in y with I'(y) = Kj(x(y)); Newton from below stays below
            if b <= 0.0:
                step = math.inf
            else:
                step = (c - val) / b
            y_new = y + step
            if y_new >= y_hi or not math.isfinite(y_new):
                y_new = 0.5 * (y + y_hi) if math.isfinite(y_hi) else max(2.0 * y, 1.0)
            x, val, a, b = self.inner(y_new)
            if val > c:
                y_hi = y_new
            else:
                y = y_new
            if abs(val - c) <= tol:
                return y_new, x, a, b
            if math.isfinite(y_hi) and y_hi - y <= 1e-15 * max(1.0, y_hi):
                return y_new, x, a, b
        raise NotConverged(f"y(c) did not settle for c = {c}")


def _exact_pair(mu1, muj, mc, k1, xtol):
    kj = ArmCurve(muj, mc, "upper")
    m1, mj = mu1.mean, muj.mean

    def inner(y):
        x, val = _inner_exact(k1, kj, m1, mj, y, xtol)
        return x, val, k1(x)[0], kj(x)[0]

    dj = k1(mj)[0] if kj(mj)[0] <= 0.0 else math.inf
    return _Pair(m1, mj, inner, dj)


def _cached_pair(nodes, v1, vj, m1, mj):
    sel = (nodes >= mj) & (nodes <= m1)
    xs, a_all, b_all = nodes[sel], v1[sel], vj[sel]

    def inner(y):
        tot = a_all + y * b_all
        if y == 0.0:
            k = int(np.flatnonzero(tot <= tot.min() + 1e-15)[0])
        else:
            k = int(np.argmin(tot))
        return float(xs[k]), float(tot[k]), float(a_all[k]), float(b_all[k])

    dj = float(a_all[0]) if b_all[0] <= 0.0 else math.inf
    return _Pair(m1, mj, inner, dj)


def solve_y_of_c(mu1, muj, c: float, mc: MomentClass, tol: float = 1e-12) -> tuple[float, float]:
    """(y_j, x_j) with min_x K1(x) + y_j Kj(x) = c."""
    k1 = ArmCurve(mu1, mc, "lower")
    pair = _exact_pair(mu1, muj, mc, k1, 1e-12)
    y, x, _, _ = pair.y_of_c(c, k1(mu1.mean)[0], tol)
    return y, x


# ---------------------------------------------------------------------------
# outer level search
# ---------------------------------------------------------------------------


def solve_allocation(mus, mc: MomentClass, tol: float = 1e-9, n_grid: int | None = None,
                     trace: bool = False) -> AllocationSolution:
    """t*(mu) and V(mu) by the nested level search; see the module docstring."""
    t0 = time.perf_counter()
    K = len(mus)
    if K < 2:
        raise ValueError("need at least two arms")
    means = np.array([mu.mean for mu in mus])
    if np.all(np.abs(means - means[0]) <= GAP_TOL):
        raise NoGap("all arm means coincide")
    b, tie = best_arm(means)
    if tie:
        raise DegenerateGap("best arm is not unique")
    others = [j for j in range(K) if j != b]
    m1 = float(means[b])

    if n_grid is None:
        k1 = ArmCurve(mus[b], mc, "lower")
        pairs = {j: _exact_pair(mus[b], mus[j], mc, k1, 1e-13) for j in others}
        c_lo = k1(m1)[0]
    else:
        nodes = np.union1d(np.linspace(means.min(), m1, n_grid), means)
        nodes = nodes[nodes <= m1]
        v1 = cache_build(mus[b], mc, grid=nodes, side="lower").values
        pairs = {}
        for j in others:
            sub = nodes[nodes >= means[j]]
            vj = np.full(nodes.size, np.inf)
            vj[nodes >= means[j]] = cache_build(mus[j], mc, grid=sub, side="upper").values
            pairs[j] = _cached_pair(nodes, v1, vj, m1, float(means[j]))
        c_lo = float(v1[-1])

    y_tol = 1e-13
    records = []

    def S_of(c):
        s = 0.0
        ys, xs = {}, {}
        for j in others:
            y, x, a, bb = pairs[j].y_of_c(c, c_lo, y_tol)
            ys[j], xs[j] = y, x
            s += a / bb if bb > 0 else math.inf
        records.append((c, s, dict(xs)))
        return s, ys, xs

    def F(c):
        return S_of(c)[0] - 1.0

    d = min(p.dj for p in pairs.values())
    s_lo = S_of(c_lo)[0]
    degenerate = s_lo >= 1.0
    if degenerate:
        c_star = c_lo
    else:
        # S climbs to +inf as c approaches d; find a point beyond the crossing
        if math.isfinite(d):
            c_hi = None
            for k in range(1, 60):
                cand = c_lo + (d - c_lo) * (1.0 - 0.5 ** k)
                if cand >= d:
                    break
                if F(cand) > 0.0:
                    c_hi = cand
                    break
            if c_hi is None:
                raise NotConverged("S(c) never crossed one below d")
        else:
            c_hi = max(2.0 * c_lo, 1e-3)
            while F(c_hi) <= 0.0:
                c_hi *= 2.0
                if c_hi > 1e6:
                    raise NotConverged("S(c) never crossed one")
        c_star = brentq(F, c_lo, c_hi, xtol=tol * 1e-3 * max(c_hi, 1e-12), rtol=1e-15,
                        maxiter=300)
    _, ys, xs = S_of(c_star)

    y = np.ones(K)
    x_cross = np.full(K, np.nan)
    for j in others:
        y[j] = ys[j]
        x_cross[j] = xs[j]
    t = y / y.sum()
    V = c_star * t[b]

    # optimality residuals, always in exact KL_inf terms at the returned points
    if n_grid is None:
        g = []
        rb = 0.0
        for j in others:
            a = pairs[j].inner(ys[j])
            rb += a[2] / a[3] if a[3] > 0 else math.inf
            g.append(t[b] * a[2] + t[j] * a[3])
        residual_b = abs(rb - 1.0)
        spread = float(max(g) - min(g))
    else:
        residual_b, spread = float("nan"), float("nan")

    sol = AllocationSolution(t, float(V), float(c_star), x_cross, y, b, tie, degenerate,
                             residual_b, spread, time.perf_counter() - t0)
    if trace:
        sol.trace = sorted(records, key=lambda r: r[0])
    return sol


# ---------------------------------------------------------------------------
# brute force and the sample-count bound
# ---------------------------------------------------------------------------


def brute_force_allocation(mus, mc: MomentClass, grid_n: int = 200, n_x: int = 2001):
    """Exhaustive max over the simplex lattice of min_j G_j(t_1, t_j)."""
    K = len(mus)
    if K > 4 or grid_n > 200:
        raise TooLarge("brute force is limited to K <= 4 and grid_n <= 200")
    means = np.array([mu.mean for mu in mus])
    b, _ = best_arm(means)
    others = [j for j in range(K) if j != b]
    N = grid_n
    ii = np.arange(N + 1, dtype=float)
    tables = {}
    for j in others:
        xs = np.linspace(means[j], means[b], n_x)
        k1 = np.array([klinf(mus[b], x, mc, side="lower").value for x in xs])
        kj = np.array([klinf(mus[j], x, mc, side="upper").value for x in xs])
        tab = np.empty((N + 1, N + 1))
        for i in range(N + 1):
            tab[i] = np.min(i * k1[None, :] + ii[:, None] * kj[None, :], axis=1) / N
        tables[j] = tab

    best_val, best_pt = -math.inf, None
    # enumerate lattice points with the best arm's share i1 fixed
    for i1 in range(N + 1):
        rest = N - i1
        if K == 2:
            j = others[0]
            val = tables[j][i1, rest]
            if val > best_val:
                best_val, best_pt = val, {b: i1, j: rest}
            continue
        if K == 3:
            ja, jb = others
            ia = np.arange(rest + 1)
            vals = np.minimum(tables[ja][i1, ia], tables[jb][i1, rest - ia])
            k = int(np.argmax(vals))
            if vals[k] > best_val:
                best_val, best_pt = vals[k], {b: i1, ja: int(ia[k]), jb: int(rest - ia[k])}
            continue
        ja, jb, jc = others
        ia, ib = np.meshgrid(np.arange(rest + 1), np.arange(rest + 1), indexing="ij")
        ok = ia + ib <= rest
        ia, ib = ia[ok], ib[ok]
        ic = rest - ia - ib
        vals = np.minimum(np.minimum(tables[ja][i1, ia], tables[jb][i1, ib]), tables[jc][i1, ic])
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val = vals[k]
            best_pt = {b: i1, ja: int(ia[k]), jb: int(ib[k]), jc: int(ic[k])}
    t = np.array([best_pt[a] for a in range(K)], dtype=float) / N
    return t, float(best_val)


def sample_lower_bound(mus=None, mc: MomentClass | None = None, delta: float = 0.05,
                       V: float | None = None) -> float:
    """log(1/(2.4 delta)) / V(mu); pass ``V`` directly to skip the solve."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if V is None:
        V = solve_allocation(mus, mc).V
    return math.log(1.0 / (2.4 * delta)) / V
