"""Deviation bounds for KL_inf of empirical laws, and a Monte Carlo check of them.

Two tail bounds are evaluated exactly as stated:

    P(KL_inf(kappa_n, m(kappa)) >= u) <= (n+1)^2 exp(Bt_1) exp(-n u)
    P(sum_a N_a KL_inf(mu_a(n), m(mu_a)) >= Gamma)
        <= e^(K+1) (4 n^2 Gamma^2 log(n) / K)^K exp(-Gamma) prod_a exp(Bt_a)

Bounds are returned unclamped so that their slack stays visible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import ArmSpec, DiscreteDistribution, RngStream
from .errors import GammaTooSmall
from .klinf import klinf
from .moment_class import MomentClass


@dataclass(frozen=True)
class TailBoundReport:
    n: int
    u: float
    bound: float
    empirical_freq: float
    reps: int
    seed: int | None = None


def klinf_tail_bound(n: int, u: float, btilde1: float) -> float:
    if n < 1:
        raise ValueError("n must be positive")
    return math.exp(2.0 * math.log(n + 1) + btilde1 - n * u)


def sum_tail_bound(n: int, gamma: float, K: int, btilde) -> float:
    if gamma <= K + 1:
        raise GammaTooSmall(f"Gamma = {gamma} must exceed K + 1 = {K + 1}")
    if n < 2:
        raise ValueError("n must be at least 2")
    log_b = (K + 1 + K * math.log(4.0 * n * n * gamma * gamma * math.log(n) / K)
             - gamma + float(np.sum(btilde)))
    return math.exp(log_b)


# --- constants --------------------------------------------------------------


def moment_constants(arm, mc: MomentClass) -> tuple[float, float]:
    """(c1, c2) = (E|X - m|, E|B - f(|X|)|) for an ArmSpec or a finite law."""
    m = arm.mean
    c1 = arm.expect(lambda a: np.abs(a - m))
    c2 = arm.expect(lambda a: np.abs(mc.B - mc.f(a)))
    return float(c1), float(c2)


def btilde_single(arm, mc: MomentClass) -> float:
    """Bt_1 = d1 + d2 with d1 = c1 / (2 (f^-1(B) - m)), d2 = c2 / (2 (B - f(|m|)))."""
    c1, c2 = moment_constants(arm, mc)
    m = arm.mean
    d1 = c1 / (2.0 * (mc.finv_B - m))
    d2 = c2 / (2.0 * (mc.B - mc.f_scalar(m)))
    return d1 + d2


def btilde_sum(arm, mc: MomentClass) -> float:
    """Bt_a = c1 + c2 (the normalization used by the sum-statistic bound)."""
    c1, c2 = moment_constants(arm, mc)
    return c1 + c2


def btilde_conservative(mc: MomentClass) -> float:
    """Worst case of 2 (c1 + c2) over L: E|X - m| <= 2 f^-1(B), E|B - f| <= 2B."""
    return 4.0 * (mc.finv_B + mc.B)


# --- Monte Carlo -------------------------------------------------------------


def _klinf_at_mean(law: DiscreteDistribution, m: float, mc: MomentClass) -> float:
    # deviation of the empirical mean decides which side carries the tail event
    side = "upper" if m >= law.mean else "lower"
    return klinf(law, m, mc, side=side).value


def empirical_klinf_draws(kappa: ArmSpec, mc: MomentClass, n: int, reps: int,
                          rng: RngStream) -> np.ndarray:
    """reps values of KL_inf(kappa_n, m(kappa)) over independent samples of size n."""
    m = kappa.mean
    x = kappa.sample(rng, n * reps).reshape(reps, n)
    out = np.empty(reps)
    memo: dict[bytes, float] = {}
    for r in range(reps):
        law = DiscreteDistribution.from_samples(x[r])
        key = law.atoms.tobytes() + law.counts.tobytes()
        v = memo.get(key)
        if v is None:
            v = _klinf_at_mean(law, m, mc)
            memo[key] = v
        out[r] = v
    return out


def mc_tail_estimate(kappa: ArmSpec, mc: MomentClass, n: int, u_grid, reps: int,
                     rng: RngStream, btilde1: float | None = None) -> list[TailBoundReport]:
    if btilde1 is None:
        btilde1 = btilde_single(kappa, mc)
    vals = empirical_klinf_draws(kappa, mc, n, reps, rng)
    reports = []
    for u in u_grid:
        freq = float(np.mean(vals >= u))
        reports.append(TailBoundReport(n, float(u), klinf_tail_bound(n, u, btilde1), freq,
                                       reps, rng.seed))
    return reports


def mc_sum_tail_estimate(arms, mc: MomentClass, n_per_arm: int, gamma_grid, reps: int,
                         rng: RngStream, btilde=None) -> list[TailBoundReport]:
    """Sum statistic under uniform allocation against sum_tail_bound (n = total pulls)."""
    K = len(arms)
    if btilde is None:
        btilde = [btilde_sum(a, mc) for a in arms]
    streams = rng.spawn(K)
    per_arm = [n_per_arm * empirical_klinf_draws(a, mc, n_per_arm, reps, s)
               for a, s in zip(arms, streams)]
    total = np.sum(per_arm, axis=0)
    n = n_per_arm * K
    return [TailBoundReport(n, float(g), sum_tail_bound(n, g, K, btilde),
                            float(np.mean(total >= g)), reps, rng.seed) for g in gamma_grid]
