"""Arm laws, finite-support measures and a couple of measure-level utilities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, stats

from .errors import NoTailMass

WEIGHT_TOL = 1e-12


# ---------------------------------------------------------------------------
# Finite-support measures
# ---------------------------------------------------------------------------


class DiscreteDistribution:
    """A probability measure on finitely many points.

    Atoms are kept strictly increasing.  Empirical laws also carry integer
    ``counts`` so that incremental updates stay exact.
    """

    __slots__ = ("atoms", "weights", "counts", "__dict__")

    def __init__(self, atoms, weights, counts=None, *, validate: bool = True):
        atoms = np.asarray(atoms, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if validate:
            if atoms.ndim != 1 or atoms.shape != weights.shape or atoms.size == 0:
                raise ValueError("atoms and weights must be nonempty 1-D arrays of equal length")
            if np.any(np.diff(atoms) <= 0):
                raise ValueError("atoms must be strictly increasing")
            if np.any(weights <= 0):
                raise ValueError("weights must be positive")
            if abs(weights.sum() - 1.0) > WEIGHT_TOL * max(1, atoms.size):
                raise ValueError(f"weights sum to {weights.sum()!r}, not 1")
        self.atoms = atoms
        self.weights = weights
        self.counts = None if counts is None else np.asarray(counts, dtype=np.int64)

    @classmethod
    def from_samples(cls, samples) -> "DiscreteDistribution":
        atoms, counts = np.unique(np.asarray(samples, dtype=float), return_counts=True)
        return cls(atoms, counts / counts.sum(), counts, validate=False)

    @classmethod
    def from_counts(cls, atoms, counts) -> "DiscreteDistribution":
        counts = np.asarray(counts, dtype=np.int64)
        return cls(atoms, counts / counts.sum(), counts)

    @classmethod
    def from_pairs(cls, atoms, weights) -> "DiscreteDistribution":
        """Build from unsorted atoms, merging duplicates and dropping zero weights."""
        atoms = np.asarray(atoms, dtype=float)
        weights = np.asarray(weights, dtype=float)
        keep = weights > 0
        uniq, inv = np.unique(atoms[keep], return_inverse=True)
        merged = np.bincount(inv, weights=weights[keep])
        return cls(uniq, merged / merged.sum())

    @classmethod
    def point_mass(cls, v: float) -> "DiscreteDistribution":
        return cls([float(v)], [1.0])

    @property
    def size(self) -> int:
        return self.atoms.size

    @property
    def n_samples(self) -> int | None:
        return None if self.counts is None else int(self.counts.sum())

    @cached_property
    def mean(self) -> float:
        return float(np.dot(self.weights, self.atoms))

    def expect(self, g: Callable) -> float:
        return float(np.dot(self.weights, g(self.atoms)))

    def reflect(self) -> "DiscreteDistribution":
        """Law of -X."""
        counts = None if self.counts is None else self.counts[::-1].copy()
        return DiscreteDistribution(-self.atoms[::-1], self.weights[::-1].copy(), counts,
                                    validate=False)

    def __repr__(self):
        if self.size <= 6:
            return f"DiscreteDistribution(atoms={self.atoms.tolist()}, weights={self.weights.tolist()})"
        return f"DiscreteDistribution(<{self.size} atoms>, mean={self.mean:.6g})"


def empirical_push(dist: DiscreteDistribution | None, samples,
                   prior_count: int = 0) -> DiscreteDistribution:
    """Empirical law of the samples already in ``dist`` plus ``samples``.

    ``prior_count`` is the number of observations ``dist`` represents; it is
    only consulted when ``dist`` does not carry integer counts itself.
    """
    samples = np.asarray(samples, dtype=float)
    if dist is None or prior_count == 0 and dist.counts is None:
        return DiscreteDistribution.from_samples(samples)
    if dist.counts is not None:
        old_counts = dist.counts
    else:
        old_counts = np.rint(dist.weights * prior_count).astype(np.int64)
    new_atoms, new_counts = np.unique(samples, return_counts=True)
    atoms = np.concatenate([dist.atoms, new_atoms])
    counts = np.concatenate([old_counts, new_counts])
    uniq, inv = np.unique(atoms, return_inverse=True)
    merged = np.bincount(inv, weights=counts).astype(np.int64)
    return DiscreteDistribution(uniq, merged / merged.sum(), merged, validate=False)


def kl_discrete(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    """KL(p, q) for finite-support measures; +inf when p is not dominated by q."""
    idx = np.searchsorted(q.atoms, p.atoms)
    idx_c = np.minimum(idx, q.size - 1)
    matched = q.atoms[idx_c] == p.atoms
    if not np.all(matched):
        return math.inf
    return float(np.sum(p.weights * np.log(p.weights / q.weights[idx_c])))


@dataclass
class Witness:
    kappa: DiscreteDistribution
    gamma: float
    beta: float
    kl_bound: float
    reaches_target: bool


def right_dense_witness(eta: DiscreteDistribution, a: float, b: float,
                        y_cut: float) -> Witness:
    """Tilt ``eta`` above ``y_cut`` so that KL(eta, kappa) <= a.

    Mass at or below the cut is scaled by 1 - gamma, mass above by
    beta = 1 + gamma * F(y_cut) / (1 - F(y_cut)), with gamma = 1 - exp(-a).
    ``reaches_target`` reports whether the tilted mean reaches ``b``; on a
    finite support that depends on how far the tail extends.
    """
    below = eta.atoms <= y_cut
    mass_below = float(eta.weights[below].sum())
    mass_above = 1.0 - mass_below
    if not np.any(~below) or mass_above <= 0:
        raise NoTailMass(f"no mass above y_cut={y_cut}")
    gamma = -math.expm1(-a)
    beta = 1.0 + gamma * mass_below / mass_above
    w = np.where(below, (1.0 - gamma) * eta.weights, beta * eta.weights)
    keep = w > 0
    kappa = DiscreteDistribution(eta.atoms[keep], w[keep] / w[keep].sum(), validate=False)
    kl_bound = mass_below * a  # = -F(y_cut) log(1 - gamma)
    return Witness(kappa, gamma, beta, kl_bound, kappa.mean >= b)


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------


class RngStream:
    """Counter-based (Philox) generator identified by a 64-bit seed.

    Child streams come from ``SeedSequence.spawn`` so that replications and
    per-arm streams are reproducible from the seed alone.
    """

    def __init__(self, seed: int | np.random.SeedSequence):
        if isinstance(seed, np.random.SeedSequence):
            self._ss = seed
            self.seed = int(seed.entropy) if isinstance(seed.entropy, int) else None
        else:
            self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
            self._ss = np.random.SeedSequence(self.seed)
        self.generator = np.random.Generator(np.random.Philox(self._ss))

    def spawn(self, n: int) -> list["RngStream"]:
        return [RngStream(child) for child in self._ss.spawn(n)]

    # thin pass-throughs used throughout
    def random(self, n=None):
        return self.generator.random(n)

    def choice(self, k: int, size: int, p) -> np.ndarray:
        return self.generator.choice(k, size=size, p=p)


# ---------------------------------------------------------------------------
# Arm laws
# ---------------------------------------------------------------------------


class ArmSpec:
    """A samplable law with closed-form (or quadrature) moments."""

    kind: str = ""

    def sample(self, rng: RngStream, n: int) -> np.ndarray:
        raise NotImplementedError

    @property
    def mean(self) -> float:
        raise NotImplementedError

    def expect(self, g: Callable[[np.ndarray], np.ndarray]) -> float:
        """E g(X) to about 1e-10."""
        raise NotImplementedError

    def moment(self, mc) -> float:
        """E f(|X|) for the moment class ``mc``."""
        return self.expect(mc.f)

    def discretize(self, n_nodes: int = 256) -> DiscreteDistribution:
        """A finite-support law whose expectations approximate this arm's."""
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError


def _gauss_legendre01(n: int) -> tuple[np.ndarray, np.ndarray]:
    s, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (s + 1.0), 0.5 * w


@dataclass(frozen=True)
class Pareto(ArmSpec):
    alpha: float
    beta: float
    kind: str = field(default="pareto", init=False)

    def __post_init__(self):
        if not self.alpha > 1:
            raise ValueError("Pareto needs alpha > 1 for a finite mean")
        if not self.beta > 0:
            raise ValueError("Pareto scale must be positive")

    def sample(self, rng: RngStream, n: int) -> np.ndarray:
        u = rng.random(n)
        # 1 - u is in (0, 1], which keeps the inverse CDF finite
        return self.beta * (1.0 - u) ** (-1.0 / self.alpha)

    @property
    def mean(self) -> float:
        return self.alpha * self.beta / (self.alpha - 1.0)

    def raw_moment(self, k: float) -> float:
        if k >= self.alpha:
            return math.inf
        return self.alpha * self.beta ** k / (self.alpha - k)

    def expect(self, g) -> float:
        # substitute x = beta / s: density becomes alpha s^(alpha-1) on (0, 1)
        a, b = self.alpha, self.beta
        fn = lambda s: a * s ** (a - 1.0) * float(g(np.asarray(b / s)))
        val, _ = integrate.quad(fn, 0.0, 1.0, epsabs=1e-13, epsrel=1e-12, limit=400)
        return float(val)

    def moment(self, mc) -> float:
        if mc.kind == "power":
            return self.raw_moment(mc.p)
        return self.expect(mc.f)

    def discretize(self, n_nodes: int = 256) -> DiscreteDistribution:
        s, w = _gauss_legendre01(n_nodes)
        # same substitution as expect(); Gauss-Legendre then integrates
        # polynomial moments in s exactly
        wt = self.alpha * s ** (self.alpha - 1.0) * w
        x = self.beta / s
        order = np.argsort(x)
        return DiscreteDistribution(x[order], wt[order] / wt.sum())

    def to_config(self) -> dict:
        return {"kind": "pareto", "alpha": self.alpha, "beta": self.beta}


@dataclass(frozen=True)
class Bernoulli(ArmSpec):
    q: float
    lo: float = 0.0
    hi: float = 1.0
    kind: str = field(default="bernoulli", init=False)

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise ValueError("Bernoulli q must lie in [0, 1]")
        if not self.lo < self.hi:
            raise ValueError("Bernoulli needs lo < hi")

    def sample(self, rng: RngStream, n: int) -> np.ndarray:
        return np.where(rng.random(n) < self.q, self.hi, self.lo)

    @property
    def mean(self) -> float:
        return self.lo + self.q * (self.hi - self.lo)

    def expect(self, g) -> float:
        vals = np.asarray(g(np.array([self.lo, self.hi])), dtype=float)
        return float((1 - self.q) * vals[0] + self.q * vals[1])

    def discretize(self, n_nodes: int = 0) -> DiscreteDistribution:
        return DiscreteDistribution.from_pairs([self.lo, self.hi], [1 - self.q, self.q])

    def to_config(self) -> dict:
        return {"kind": "bernoulli", "q": self.q, "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class UniformDiscrete(ArmSpec):
    atoms: tuple
    kind: str = field(default="uniform_discrete", init=False)

    def __post_init__(self):
        if len(self.atoms) == 0:
            raise ValueError("UniformDiscrete needs at least one atom")
        object.__setattr__(self, "atoms", tuple(float(a) for a in self.atoms))

    def sample(self, rng: RngStream, n: int) -> np.ndarray:
        idx = np.floor(rng.random(n) * len(self.atoms)).astype(np.int64)
        return np.asarray(self.atoms)[np.minimum(idx, len(self.atoms) - 1)]

    @property
    def mean(self) -> float:
        return float(np.mean(self.atoms))

    def expect(self, g) -> float:
        return float(np.mean(g(np.asarray(self.atoms))))

    def discretize(self, n_nodes: int = 0) -> DiscreteDistribution:
        a = np.asarray(self.atoms)
        return DiscreteDistribution.from_pairs(a, np.full(a.size, 1.0 / a.size))

    def to_config(self) -> dict:
        return {"kind": "uniform_discrete", "atoms": list(self.atoms)}


@dataclass(frozen=True)
class PointMass(ArmSpec):
    v: float
    kind: str = field(default="point_mass", init=False)

    def sample(self, rng: RngStream, n: int) -> np.ndarray:
        rng.random(n)  # keep stream consumption uniform across arm kinds
        return np.full(n, float(self.v))

    @property
    def mean(self) -> float:
        return float(self.v)

    def expect(self, g) -> float:
        return float(np.asarray(g(np.array([self.v])))[0])

    def discretize(self, n_nodes: int = 0) -> DiscreteDistribution:
        return DiscreteDistribution.point_mass(self.v)

    def to_config(self) -> dict:
        return {"kind": "point_mass", "v": self.v}


@dataclass(frozen=True)
class TruncatedNormal(ArmSpec):
    mu0: float
    sigma: float
    lo: float
    hi: float
    kind: str = field(default="truncated_normal", init=False)

    def __post_init__(self):
        if not (self.sigma > 0 and self.lo < self.hi):
            raise ValueError("TruncatedNormal needs sigma > 0 and lo < hi")

    @cached_property
    def _law(self):
        a = (self.lo - self.mu0) / self.sigma
        b = (self.hi - self.mu0) / self.sigma
        return stats.truncnorm(a, b, loc=self.mu0, scale=self.sigma)

    def sample(self, rng: RngStream, n: int) -> np.ndarray:
        return self._law.ppf(rng.random(n))

    @property
    def mean(self) -> float:
        return float(self._law.mean())

    def expect(self, g) -> float:
        pdf = self._law.pdf
        val, _ = integrate.quad(lambda t: float(g(np.asarray(t))) * pdf(t), self.lo, self.hi,
                                epsabs=1e-13, epsrel=1e-12, limit=400)
        return float(val)

    def discretize(self, n_nodes: int = 256) -> DiscreteDistribution:
        s, w = _gauss_legendre01(n_nodes)
        x = self.lo + (self.hi - self.lo) * s
        wt = w * self._law.pdf(x)
        return DiscreteDistribution(x, wt / wt.sum())

    def to_config(self) -> dict:
        return {"kind": "truncated_normal", "mu0": self.mu0, "sigma": self.sigma,
                "lo": self.lo, "hi": self.hi}


_ARM_KINDS = {
    "pareto": (Pareto, ("alpha", "beta")),
    "bernoulli": (Bernoulli, ("q", "lo", "hi")),
    "uniform_discrete": (UniformDiscrete, ("atoms",)),
    "point_mass": (PointMass, ("v",)),
    "truncated_normal": (TruncatedNormal, ("mu0", "sigma", "lo", "hi")),
}


def arm_from_config(entry: dict) -> ArmSpec:
    """Build an ArmSpec from a config table such as ``{kind="pareto", alpha=4, beta=1.5}``."""
    entry = dict(entry)
    kind = entry.pop("kind", None)
    if kind not in _ARM_KINDS:
        raise ValueError(f"unknown arm kind {kind!r}; expected one of {sorted(_ARM_KINDS)}")
    cls, allowed = _ARM_KINDS[kind]
    unknown = set(entry) - set(allowed)
    if unknown:
        raise ValueError(f"unexpected field(s) {sorted(unknown)} for arm kind {kind!r}")
    if kind == "uniform_discrete":
        entry["atoms"] = tuple(entry.get("atoms", ()))
    return cls(**entry)


def sample(arm: ArmSpec, rng: RngStream, n: int) -> np.ndarray:
    return arm.sample(rng, n)


def pareto_mad(alpha: float, beta: float) -> float:
    """E|X - m| for a Pareto(alpha, beta) law (closed form)."""
    m = alpha * beta / (alpha - 1.0)
    # 2 * int_beta^m F(x) dx with F(x) = 1 - (beta/x)^alpha
    tail = beta ** alpha * (m ** (1.0 - alpha) - beta ** (1.0 - alpha)) / (1.0 - alpha)
    return 2.0 * ((m - beta) - tail)


PARETO4_ARMS: tuple[Pareto, ...] = (
    Pareto(4.0, 1.875), Pareto(4.0, 1.5), Pareto(4.0, 1.25), Pareto(4.0, 0.75),
)

