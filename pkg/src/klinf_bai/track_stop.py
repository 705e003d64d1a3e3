"""Batched track-and-stop with a GLR stopping rule.

Each run samples m arms per batch.  Sampling starts round-robin; at each
batch boundary the GLR statistic is compared against beta(lm, delta), and if
sampling continues the lower-bound allocation is re-solved on the empirical
laws.  The next batch first pays the starvation quotas
s_a = ceil((sqrt((l+1) m) - N_a)^+) and then draws the remaining arm indices
i.i.d. from t*.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from .concentration import btilde_conservative, btilde_sum
from .distributions import ArmSpec, DiscreteDistribution, RngStream, empirical_push
from .errors import BaiError, BatchTooSmall, ConfigError, Diverged
from .lower_bound import ArmCurve, _inner_exact, best_arm, solve_allocation
from .moment_class import MomentClass

log = logging.getLogger(__name__)

DEFAULT_CAP = 10 ** 8
C_SAFETY = 1.01


@dataclass(frozen=True)
class StopConfig:
    delta: float
    alpha: Optional[float] = None  # default 2K + 2
    C: float | str = "auto"
    m: int | str = 100
    btilde: Optional[tuple] = None  # per-arm constants; None -> from arms or conservative
    max_samples: int = DEFAULT_CAP
    n_grid: int = 64  # nodes per allocation solve
    check_floor: bool = True
    keep_trace: bool = False

    def alpha_for(self, K: int) -> float:
        a = 2 * K + 2 if self.alpha is None else self.alpha
        if a < 2 * K + 2:
            raise ConfigError(f"alpha = {a} is below 2K + 2 = {2 * K + 2}")
        return float(a)


@dataclass
class RunState:
    counts: np.ndarray
    laws: list
    l: int
    m: int
    rng_alloc: RngStream
    rng_arms: list
    solver_seconds: float = 0.0
    sample_seconds: float = 0.0
    t_prev: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def means(self) -> np.ndarray:
        return np.array([law.mean for law in self.laws])


@dataclass
class RunResult:
    best_arm: int
    tau: int
    batches: int
    correct: Optional[bool]
    t_hat: np.ndarray
    solver_seconds: float
    sample_seconds: float
    budget_exceeded: bool = False
    floor_violations: int = 0
    min_floor_margin: float = math.inf
    final_Z: float = 0.0
    final_beta: float = 0.0
    trace: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# threshold
# ---------------------------------------------------------------------------


def threshold(n: int, cfg: StopConfig, K: int, C: float | None = None) -> float:
    """beta(n, delta) = log(C n^alpha / delta (log n)^K (log 1/delta)^(2K+1))."""
    if n < 2:
        raise ValueError("threshold needs n >= 2")
    C = cfg.C if C is None else C
    if isinstance(C, str):
        raise ConfigError("C must be resolved before evaluating the threshold")
    a = cfg.alpha_for(K)
    d = cfg.delta
    return (math.log(C) + a * math.log(n) - math.log(d) + K * math.log(math.log(n))
            + (2 * K + 1) * math.log(math.log(1.0 / d)))


def _series_log(logC: float, delta: float, alpha: float, K: int, m: int, sum_bt: float,
                l_explicit: int = 20000) -> float:
    """log of sum_l (4e beta(lm)^2)^K e prod e^Bt / (K^K (lm)^(alpha-2K) (log 1/delta)^(2K+1))."""
    llinv = math.log(math.log(1.0 / delta))
    const = 1.0 + sum_bt - K * math.log(K) - (2 * K + 1) * llinv

    def log_term(logn):
        beta = (logC + alpha * logn - math.log(delta) + K * np.log(logn)
                + (2 * K + 1) * llinv)
        return K * np.log(4.0 * math.e * beta * beta) + const - (alpha - 2 * K) * logn

    ls = np.arange(1, l_explicit + 1, dtype=float)
    lt = log_term(np.log(ls * m))
    head = logsumexp(lt)
    if lt[-1] - head < math.log(1e-12):
        return float(head)
    # remaining terms: integral over l in log scale, midpoint-corrected
    u0 = math.log(l_explicit + 0.5)
    scale = float(lt[-1])
    logm = math.log(m)

    def integrand(v):
        u = u0 + v
        return math.exp(float(log_term(u + logm)) - scale + u - u0)

    tail, _ = integrate.quad(integrand, 0.0, np.inf, limit=200, epsrel=1e-10)
    return float(np.logaddexp(head, scale + u0 + math.log(tail)))


@lru_cache(maxsize=256)
def _threshold_constant(delta, alpha, K, m, sum_bt):
    logC = 0.0
    for _ in range(100):
        new = _series_log(logC, delta, alpha, K, m, sum_bt)
        if abs(math.exp(new - logC) - 1.0) <= 1e-6:
            return math.exp(new) * C_SAFETY
        logC = new
    raise Diverged("threshold constant did not settle in 100 iterations")


def threshold_constant(delta: float, alpha: float, K: int, m: int, btilde) -> float:
    """Fixed point C = series(C), rounded up by 1%."""
    if alpha < 2 * K + 2:
        raise ConfigError("the series needs alpha >= 2K + 2")
    return _threshold_constant(float(delta), float(alpha), int(K), int(m),
                               float(np.sum(btilde)))


def resolve_btilde(cfg: StopConfig, arms, mc: MomentClass) -> tuple:
    if cfg.btilde is not None:
        if len(cfg.btilde) != len(arms):
            raise ConfigError("btilde needs one entry per arm")
        return tuple(float(b) for b in cfg.btilde)
    if arms is not None and all(isinstance(a, ArmSpec) for a in arms):
        return tuple(btilde_sum(a, mc) for a in arms)
    return tuple(btilde_conservative(mc) for _ in arms)


def resolve_config(cfg: StopConfig, arms, mc: MomentClass) -> StopConfig:
    """Fill C (and btilde) for a fixed integer m."""
    K = len(arms)
    bt = resolve_btilde(cfg, arms, mc)
    if isinstance(cfg.m, str):
        raise ConfigError("m='auto' is resolved by cost_model.resolve_auto_batch")
    if cfg.m < (K + 1) ** 2:
        raise BatchTooSmall(f"m = {cfg.m} is below (K+1)^2 = {(K + 1) ** 2}")
    C = cfg.C
    if C == "auto":
        C = threshold_constant(cfg.delta, cfg.alpha_for(K), K, int(cfg.m), bt)
    elif isinstance(C, str) or not C > 0:
        raise ConfigError(f"C must be 'auto' or positive, got {C!r}")
    return replace(cfg, C=float(C), btilde=bt, alpha=cfg.alpha_for(K))


# ---------------------------------------------------------------------------
# GLR statistic
# ---------------------------------------------------------------------------


def glr_from_laws(laws: Sequence[DiscreteDistribution], counts, mc: MomentClass,
                  tol: float = 1e-10) -> tuple[int, float]:
    means = np.array([law.mean for law in laws])
    j, _ = best_arm(means)
    Nj = float(counts[j])
    k1 = ArmCurve(laws[j], mc, "lower")
    Z = math.inf
    for b in range(len(laws)):
        if b == j:
            continue
        if means[b] >= means[j] - 1e-12:
            return j, 0.0
        kb = ArmCurve(laws[b], mc, "upper")
        y = float(counts[b]) / Nj
        _, val = _inner_exact(k1, kb, float(means[j]), float(means[b]), y, tol)
        Z = min(Z, Nj * val)
    return j, float(Z)


def glr_statistic(state: RunState, mc: MomentClass, tol: float = 1e-10) -> tuple[int, float]:
    return glr_from_laws(state.laws, state.counts, mc, tol)


# ---------------------------------------------------------------------------
# sampling rule
# ---------------------------------------------------------------------------


def starvation(counts, l: int, m: int) -> np.ndarray:
    target = math.sqrt((l + 1) * m)
    return np.array([max(0, math.ceil(target - c - 1e-12)) for c in counts], dtype=np.int64)


def water_fill(s, m: int) -> np.ndarray:
    """Integer split of m units minimizing max_a (s_a - shat_a) with shat <= s."""
    s = np.asarray(s, dtype=np.int64)
    shat = np.zeros_like(s)
    for _ in range(m):
        resid = s - shat
        a = int(np.argmax(resid))  # lowest index among ties
        shat[a] += 1
    return shat


def plan_batch(state: RunState, t_star, m: int, rng: RngStream | None = None) -> np.ndarray:
    K = state.counts.size
    if m < (K + 1) ** 2:
        raise BatchTooSmall(f"m = {m} is below (K+1)^2 = {(K + 1) ** 2}")
    t = np.asarray(getattr(t_star, "t_star", t_star), dtype=float)
    s = starvation(state.counts, state.l, m)
    if s.sum() > m:
        return water_fill(s, m)
    rng = state.rng_alloc if rng is None else rng
    extra = m - int(s.sum())
    draws = rng.choice(K, extra, p=t / t.sum())
    return s + np.bincount(draws, minlength=K)


def round_robin(K: int, m: int) -> np.ndarray:
    return np.array([m // K + (1 if a < m % K else 0) for a in range(K)], dtype=np.int64)


# ---------------------------------------------------------------------------
# the run loop
# ---------------------------------------------------------------------------


def _pull(state: RunState, arms, alloc) -> None:
    t0 = time.perf_counter()
    for a, k in enumerate(alloc):
        if k > 0:
            x = arms[a].sample(state.rng_arms[a], int(k))
            state.laws[a] = empirical_push(state.laws[a], x)
            state.counts[a] += k
    state.sample_seconds += time.perf_counter() - t0


def run(arms: Sequence[ArmSpec], mc: MomentClass, cfg: StopConfig, rng: RngStream,
        true_best: int | None = None) -> RunResult:
    """One run of the batched track-and-stop procedure; cfg must be resolved."""
    K = len(arms)
    if isinstance(cfg.C, str) or isinstance(cfg.m, str):
        cfg = resolve_config(cfg, arms, mc)
    m = int(cfg.m)
    if m < (K + 1) ** 2:
        raise BatchTooSmall(f"m = {m} is below (K+1)^2 = {(K + 1) ** 2}")
    if true_best is None:
        true_best = int(np.argmax([a.mean for a in arms]))
    streams = rng.spawn(K + 1)
    state = RunState(np.zeros(K, dtype=np.int64), [None] * K, 1, m, streams[K], streams[:K])
    _pull(state, arms, round_robin(K, m))

    result_trace = []
    violations = 0
    min_margin = math.inf
    budget = False
    while True:
        n = state.n
        if cfg.check_floor:
            margin = float(np.min(state.counts - (math.sqrt(n) - 1.0)))
            min_margin = min(min_margin, margin)
            if margin < 0:
                violations += 1
                log.warning("starvation floor violated at n=%d: counts=%s", n, state.counts)

        t0 = time.perf_counter()
        j_hat, Z = glr_statistic(state, mc)
        beta = threshold(n, cfg, K)
        state.solver_seconds += time.perf_counter() - t0
        if cfg.keep_trace:
            result_trace.append({"l": state.l, "n": n, "Z": Z, "beta": beta,
                                 "counts": state.counts.tolist()})
        if Z >= beta:
            break
        if n + m > cfg.max_samples:
            budget = True
            break

        t0 = time.perf_counter()
        try:
            sol = solve_allocation(state.laws, mc, n_grid=cfg.n_grid)
            t_star = sol.t_star
        except BaiError as err:
            # ties or a failed solve: reuse the last target, uniform at first
            log.info("allocation solve failed at n=%d (%s); reusing previous target", n, err)
            t_star = state.t_prev if state.t_prev is not None else np.full(K, 1.0 / K)
        state.t_prev = t_star
        state.solver_seconds += time.perf_counter() - t0

        alloc = plan_batch(state, t_star, m)
        _pull(state, arms, alloc)
        state.l += 1

    tau = state.n
    return RunResult(j_hat, tau, state.l, bool(j_hat == true_best), state.counts / tau,
                     state.solver_seconds, state.sample_seconds, budget, violations,
                     min_margin, float(Z), float(beta), result_trace)
