import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from klinf_bai import DiscreteDistribution, MomentClass
from klinf_bai.moment_class import (constraint_min_bracketed, dual_constraint_min,
                                    feasible_mean_interval, h_tilde, membership_margin)


@pytest.mark.parametrize("p,B,expected", [(2.0, 9.0, 3.0), (2.0, 1.0, 1.0), (4.0, 16.0, 2.0)])
def test_feasible_interval_examples(p, B, expected):
    lo, hi = feasible_mean_interval(MomentClass("power", B, p))
    assert lo == pytest.approx(-expected, abs=1e-12)
    assert hi == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("mc", [MomentClass("power", 9.0, 2.0), MomentClass("power", 5.0, 3.5),
                                MomentClass("xlogx", 4.0), MomentClass("xlogx", 0.3)])
def test_interval_endpoint_hits_B(mc):
    _, hi = feasible_mean_interval(mc)
    assert abs(mc.f_scalar(hi) - mc.B) <= 1e-12 * max(1.0, mc.B)
    assert abs(mc.f_scalar(-hi) - mc.B) <= 1e-12 * max(1.0, mc.B)


def test_rejects_bad_parameters():
    with pytest.raises(ValueError):
        MomentClass("power", 9.0, 1.0)
    with pytest.raises(ValueError):
        MomentClass("power", 0.0, 2.0)
    with pytest.raises(ValueError):
        MomentClass("cosh", 1.0)


def test_f_basics():
    mc = MomentClass("xlogx", 2.0)
    assert mc.f_scalar(0.0) == 0.0
    assert mc.f_scalar(0.7) == 0.0
    assert mc.f_scalar(-math.e) == pytest.approx(math.e)
    ys = np.linspace(0, 20, 200)
    assert np.all(np.diff(MomentClass("power", 1.0, 1.5).f(ys)) > 0)


def test_membership_margin_examples(mc9):
    assert membership_margin(DiscreteDistribution.point_mass(0.0), mc9) == 9.0
    assert membership_margin(DiscreteDistribution([-3.0, 3.0], [0.5, 0.5]), mc9) == 0.0
    assert membership_margin(DiscreteDistribution([0.0, 4.0], [0.5, 0.5]), mc9) == 1.0


def test_dual_constraint_min_examples(mc9):
    y, h = dual_constraint_min(mc9, 0.0, (0.0, 1 / 9))
    assert y == 0.0 and h == pytest.approx(0.0, abs=1e-15)
    y, h = dual_constraint_min(mc9, 0.0, (0.0, 0.0))
    assert (y, h) == (0.0, 1.0)
    y, h = dual_constraint_min(mc9, 0.0, (0.5, 0.0))
    assert y == math.inf and h == -math.inf


def test_dual_constraint_min_against_grid(mc9):
    # dense grid over y in [-100, 100] at step 1e-4
    x, dual = 1.0, (0.1, 0.05)
    ys = np.arange(-100.0, 100.0 + 5e-5, 1e-4)
    hs = h_tilde(mc9, x, dual[0], dual[1], ys)
    k = int(np.argmin(hs))
    y0, h0 = dual_constraint_min(mc9, x, dual)
    assert y0 == pytest.approx(1.0)  # lam1 / (2 lam2)
    assert abs(y0 - ys[k]) <= 1e-4
    assert h0 <= hs[k] + 1e-12 and hs[k] - h0 <= 1e-8


def test_closed_form_matches_bracketed_minimizer(mc9):
    rng = np.random.default_rng(7)
    worst_y = worst_h = 0.0
    for _ in range(1000):
        x = rng.uniform(-2.9, 2.9)
        l1 = rng.uniform(0, 1 / (3 - x))
        l2 = rng.uniform(1e-3, 1 / (9 - x * x))
        y_c, h_c = dual_constraint_min(mc9, x, (l1, l2))
        y_b, h_b = constraint_min_bracketed(mc9, x, (l1, l2))
        worst_y = max(worst_y, abs(y_c - y_b))
        worst_h = max(worst_h, abs(h_c - h_b))
    assert worst_y <= 1e-9 and worst_h <= 1e-9


@pytest.mark.parametrize("mc", [MomentClass("xlogx", 3.0), MomentClass("power", 4.0, 3.0)])
def test_other_families_match_bracketed(mc):
    rng = np.random.default_rng(3)
    for _ in range(200):
        x = rng.uniform(-0.9, 0.9) * mc.finv_B
        l1 = rng.uniform(0, 2.0)
        l2 = rng.uniform(0.05, 1.0)
        _, h_c = dual_constraint_min(mc, x, (l1, l2))
        _, h_b = constraint_min_bracketed(mc, x, (l1, l2))
        assert abs(h_c - h_b) <= 1e-8 * max(1.0, abs(h_c))


@given(x=st.floats(-2.9, 2.9), l1=st.floats(0, 5), l2=st.floats(1e-4, 5),
       ys=st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20))
def test_feasible_dual_is_nonnegative_everywhere(x, l1, l2, ys):
    mc = MomentClass("power", 9.0, 2.0)
    _, h = dual_constraint_min(mc, x, (l1, l2))
    if h >= 0:
        vals = h_tilde(mc, x, l1, l2, np.array(ys))
        assert np.all(vals >= -1e-9 * (1 + np.abs(np.array(ys)) ** 2 * l2))
