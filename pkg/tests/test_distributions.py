import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from klinf_bai import (Bernoulli, DiscreteDistribution, MomentClass, Pareto, PointMass, RngStream,
                       TruncatedNormal, UniformDiscrete, arm_from_config, empirical_push,
                       kl_discrete, membership_margin, right_dense_witness)
from klinf_bai.distributions import pareto_mad
from klinf_bai.errors import NoTailMass


def test_point_mass_samples():
    assert PointMass(2.5).sample(RngStream(1), 3).tolist() == [2.5, 2.5, 2.5]


def test_pareto_sample_mean_within_three_se():
    arm = Pareto(4.0, 1.5)
    x = arm.sample(RngStream(2024), 10 ** 6)
    se = math.sqrt(arm.raw_moment(2) - arm.mean ** 2) / 1e3
    assert arm.mean == 2.0
    assert abs(x.mean() - 2.0) <= 3 * se


def test_bernoulli_lln():
    x = Bernoulli(0.5).sample(RngStream(99), 10 ** 6)
    assert 0.498 <= x.mean() <= 0.502


def test_same_seed_same_stream():
    a = Pareto(4.0, 1.875).sample(RngStream(5), 1000)
    b = Pareto(4.0, 1.875).sample(RngStream(5), 1000)
    assert a.tobytes() == b.tobytes()
    c1, c2 = RngStream(5).spawn(2)
    assert not np.array_equal(c1.random(10), c2.random(10))


@pytest.mark.parametrize("arm", [Pareto(4.0, 1.875), Pareto(3.0, 0.5), Bernoulli(0.3, -1.0, 2.0),
                                 UniformDiscrete((0.0, 1.0, 5.0)), PointMass(-1.5),
                                 TruncatedNormal(0.5, 1.2, -1.0, 3.0)])
def test_moments_quadrature_vs_discretized(arm):
    mc = MomentClass("power", 9.0, 2.0)
    law = arm.discretize(256)
    assert law.mean == pytest.approx(arm.mean, abs=1e-10)
    assert law.expect(mc.f) == pytest.approx(arm.moment(mc), rel=1e-9, abs=1e-10)


def test_pareto_closed_forms():
    arm = Pareto(4.0, 1.875)
    mc = MomentClass("power", 9.0, 2.0)
    assert arm.moment(mc) == pytest.approx(7.03125)  # alpha beta^2 / (alpha - 2)
    assert arm.expect(lambda x: x ** 2) == pytest.approx(7.03125, rel=1e-10)
    assert arm.expect(lambda x: np.abs(x - arm.mean)) == pytest.approx(pareto_mad(4.0, 1.875),
                                                                       rel=1e-9)
    with pytest.raises(ValueError):
        Pareto(1.0, 1.0)


def test_arm_from_config():
    assert arm_from_config({"kind": "pareto", "alpha": 4.0, "beta": 1.875}) == Pareto(4.0, 1.875)
    with pytest.raises(ValueError):
        arm_from_config({"kind": "pareto", "alpha": 4.0, "gamma": 1.0})
    with pytest.raises(ValueError):
        arm_from_config({"kind": "lognormal"})


def test_empirical_push_examples():
    d = empirical_push(None, [1, 1, 3])
    assert d.atoms.tolist() == [1, 3]
    assert d.weights.tolist() == pytest.approx([2 / 3, 1 / 3])
    d = empirical_push(DiscreteDistribution([0.0], [1.0]), [2.0], prior_count=1)
    assert d.atoms.tolist() == [0, 2] and d.weights.tolist() == [0.5, 0.5]


def test_pareto_empirical_law_in_class():
    mc = MomentClass("power", 9.0, 2.0)
    arm = Pareto(4.0, 1.875)
    ok = 0
    stream = RngStream(11)
    for _ in range(20):
        law = empirical_push(None, arm.sample(stream, 10 ** 4))
        ok += membership_margin(law, mc) >= 0
    assert ok >= 18


@given(st.lists(st.lists(st.integers(-5, 5), min_size=1, max_size=8), min_size=1, max_size=5))
def test_empirical_push_is_associative(batches):
    acc = None
    for b in batches:
        acc = empirical_push(acc, np.array(b, float))
    flat = DiscreteDistribution.from_samples(np.concatenate([np.array(b, float) for b in batches]))
    assert np.array_equal(acc.atoms, flat.atoms)
    assert np.array_equal(acc.counts, flat.counts)
    n = sum(len(b) for b in batches)
    assert np.allclose(acc.weights * n, np.round(acc.weights * n), atol=1e-9)


def test_discrete_validation():
    with pytest.raises(ValueError):
        DiscreteDistribution([1.0, 0.0], [0.5, 0.5])
    with pytest.raises(ValueError):
        DiscreteDistribution([0.0, 1.0], [0.5, 0.6])
    d = DiscreteDistribution([0.0, 1.0, 3.0], [0.2, 0.3, 0.5])
    assert d.mean == pytest.approx(1.8, abs=1e-12)
    r = d.reflect()
    assert r.atoms.tolist() == [-3.0, -1.0, 0.0] and r.mean == pytest.approx(-1.8)


def test_kl_examples():
    p = DiscreteDistribution([0.0, 1.0], [0.5, 0.5])
    assert kl_discrete(p, p) == 0.0
    assert kl_discrete(DiscreteDistribution([0.0], [1.0]), p) == pytest.approx(math.log(2))
    assert kl_discrete(p, DiscreteDistribution([1.0], [1.0])) == math.inf


@st.composite
def law_pair(draw):
    support = sorted(draw(st.sets(st.integers(-6, 6), min_size=1, max_size=6)))
    wp = draw(st.lists(st.floats(0.01, 1), min_size=len(support), max_size=len(support)))
    wq = draw(st.lists(st.floats(0.01, 1), min_size=len(support), max_size=len(support)))
    p = DiscreteDistribution(np.array(support, float), np.array(wp) / sum(wp))
    q = DiscreteDistribution(np.array(support, float), np.array(wq) / sum(wq))
    return p, q


@given(law_pair())
def test_kl_nonnegative_and_zero_iff_equal(pq):
    p, q = pq
    k = kl_discrete(p, q)
    assert k >= -1e-15
    if np.allclose(p.weights, q.weights, atol=1e-12):
        assert abs(k) <= 1e-12
    else:
        assert k > 0


def test_witness_example():
    eta = DiscreteDistribution([1.0, 10.0], [0.5, 0.5])
    w = right_dense_witness(eta, math.log(2), 7.0, 5.0)
    assert w.gamma == pytest.approx(0.5) and w.beta == pytest.approx(1.5)
    assert w.kappa.mean == pytest.approx(7.75)
    assert kl_discrete(eta, w.kappa) <= math.log(2) + 1e-9
    assert w.reaches_target


def test_witness_limit_and_error():
    eta = DiscreteDistribution([1.0, 10.0], [0.5, 0.5])
    w = right_dense_witness(eta, 40.0, 100.0, 5.0)
    assert w.kappa.weights[-1] == pytest.approx(1.0, abs=1e-12)
    assert w.kl_bound <= 40.0
    assert not w.reaches_target
    with pytest.raises(NoTailMass):
        right_dense_witness(eta, 1.0, 20.0, 10.0)


def test_witness_kl_bound_random():
    rng = np.random.default_rng(8)
    for _ in range(200):
        n = int(rng.integers(2, 12))
        atoms = np.sort(rng.choice(np.arange(-20, 40), n, replace=False)).astype(float)
        eta = DiscreteDistribution(atoms, rng.dirichlet(np.ones(n)))
        a = float(rng.exponential(2.0)) + 1e-6
        y_cut = float(rng.uniform(atoms[0] - 1, atoms[-1] - 1e-6))
        w = right_dense_witness(eta, a, eta.mean + 1.0, y_cut)
        assert kl_discrete(eta, w.kappa) <= a + 1e-9
        assert w.kappa.weights.sum() == pytest.approx(1.0, abs=1e-12)
