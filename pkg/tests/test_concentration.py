import math

import numpy as np
import pytest

from klinf_bai import MomentClass, Pareto, RngStream, UniformDiscrete
from klinf_bai.concentration import (btilde_conservative, btilde_single, btilde_sum,
                                     klinf_tail_bound, mc_sum_tail_estimate, mc_tail_estimate,
                                     moment_constants, sum_tail_bound)
from klinf_bai.distributions import PARETO4_ARMS
from klinf_bai.errors import GammaTooSmall

MC = MomentClass("power", 9.0, 2.0)
U01 = UniformDiscrete((0.0, 1.0))


def test_bound_at_zero_is_vacuous():
    assert klinf_tail_bound(10, 0.0, 0.3) == pytest.approx(121 * math.exp(0.3))
    assert klinf_tail_bound(10, 0.0, 0.0) >= 1.0


def test_doubling_n():
    u, b = 0.3, 0.5
    r1 = klinf_tail_bound(20, u, b) / 21 ** 2
    r2 = klinf_tail_bound(40, u, b) / 41 ** 2
    assert r2 == pytest.approx(r1 ** 2 / math.exp(b), rel=1e-12)


def test_uniform01_constants():
    # E|X - 1/2| = 1/2, E|9 - X^2| = 8.5; d1 = 0.5 / 5, d2 = 8.5 / 17.5
    assert moment_constants(U01, MC) == pytest.approx((0.5, 8.5))
    bt = btilde_single(U01, MC)
    assert bt == pytest.approx(0.1 + 8.5 / 17.5, abs=1e-14)
    assert klinf_tail_bound(50, 0.2, bt) == pytest.approx(51 ** 2 * math.exp(bt - 10.0), rel=1e-12)
    assert btilde_sum(U01, MC) == pytest.approx(9.0)
    assert btilde_conservative(MC) == pytest.approx(48.0)


def test_sum_bound_decreasing_past_turnover():
    gam = np.linspace(60, 400, 50)
    vals = [sum_tail_bound(1000, g, 4, [1.0] * 4) for g in gam]
    assert all(np.diff(vals) < 0)
    with pytest.raises(GammaTooSmall):
        sum_tail_bound(1000, 5.0, 4, [1.0] * 4)


def test_sum_bound_k1_shape():
    # K = 1: e^2 4 n^2 G^2 log n e^-G e^B versus (n+1)^2 e^B e^-G; ratio is polynomial
    n, G = 100, 30.0
    r = sum_tail_bound(n, G, 1, [0.7]) / klinf_tail_bound(n, G / n, 0.7)
    assert r == pytest.approx(math.e ** 2 * 4 * n * n * G * G * math.log(n) / (n + 1) ** 2)


def test_sum_bound_pareto_golden():
    bt = [btilde_sum(a, MC) for a in PARETO4_ARMS]
    assert bt == pytest.approx([5.24267578125, 6.046875, 6.769097222222221, 8.15625], rel=1e-9)
    assert sum_tail_bound(1000, 30.0, 4, bt) == pytest.approx(5.0343257144139424e+39, rel=1e-9)


def test_mc_uniform01_gate():
    reps = mc_tail_estimate(U01, MC, 50, [0.05, 0.1, 0.2, 1e6], 10 ** 4, RngStream(7))
    freqs = [r.empirical_freq for r in reps]
    assert freqs[-1] == 0.0
    assert all(np.diff(freqs) <= 0)
    assert all(r.empirical_freq <= r.bound for r in reps)
    assert all(0.0 <= f <= 1.0 for f in freqs)


def test_mc_heavy_tail_gate():
    arm = Pareto(4.0, 1.0)
    reps = mc_tail_estimate(arm, MC, 30, [0.02, 0.05, 0.1], 2000, RngStream(8))
    assert all(r.empirical_freq <= r.bound for r in reps)


def test_mc_sum_gate():
    arms = [UniformDiscrete((0.0, 1.0)), UniformDiscrete((0.0, 2.0))]
    reps = mc_sum_tail_estimate(arms, MC, 20, [4.0, 6.0, 10.0], 2000, RngStream(9))
    assert all(r.empirical_freq <= r.bound for r in reps)
    assert reps[0].n == 40
