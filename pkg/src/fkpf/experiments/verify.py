"""Empirical checks of the sampling-error moment bound and the MGF bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import truncnorm

from ..bounds import c_of_p, mgf_bound
from ..core import Sampler, TestFunction, rng_stream
from ..errors import InvalidArgumentError

VERIFY = 7  # stream tag for verification runs


@dataclass(frozen=True)
class TestDistribution:
    """A sampler together with a bounded test function whose mean is known exactly."""

    __test__ = False

    name: str
    sampler: Sampler
    h: TestFunction
    mean_h: float


def _identity() -> TestFunction:
    return TestFunction(lambda x: np.asarray(x, dtype=float), 1.0)


def uniform01() -> TestDistribution:
    return TestDistribution("uniform", lambda rng, n: rng.uniform(0.0, 1.0, n), _identity(), 0.5)


def two_point(p1: float = 0.7) -> TestDistribution:
    return TestDistribution("two-point", lambda rng, n: (rng.random(n) < p1).astype(float),
                            _identity(), p1)


def truncated_gaussian(loc: float = 0.5, scale: float = 0.2) -> TestDistribution:
    """Gaussian truncated to [0, 1]; ``h(x) = x``."""
    a, b = (0.0 - loc) / scale, (1.0 - loc) / scale
    dist = truncnorm(a, b, loc=loc, scale=scale)
    return TestDistribution("truncated-gaussian", lambda rng, n: dist.rvs(size=n, random_state=rng),
                            _identity(), float(dist.mean()))


def point_mass(x0: float = 0.3) -> TestDistribution:
    return TestDistribution("point-mass", lambda rng, n: np.full(n, x0), _identity(), x0)


def rademacher() -> TestDistribution:
    """Signs with equal probability; ``h(x) = x`` has oscillation 2."""
    return TestDistribution("rademacher", lambda rng, n: rng.choice([-1.0, 1.0], size=n),
                            TestFunction(lambda x: np.asarray(x, dtype=float), 2.0), 0.0)


def _centered_means(dist: TestDistribution, N: int, reps: int, rng: np.random.Generator,
                    block: int = 2_000_000) -> np.ndarray:
    """``reps`` draws of ``[S^N(P) - P](h)``, generated in memory-bounded blocks."""
    out = np.empty(reps)
    per = max(1, block // N)
    for start in range(0, reps, per):
        k = min(per, reps - start)
        x = np.asarray(dist.sampler(rng, k * N), dtype=float)
        out[start:start + k] = dist.h(x).reshape(k, N).mean(axis=1) - dist.mean_h
    return out


@dataclass(frozen=True)
class Lemma1Result:
    distribution: str
    N: int
    p: float
    reps: int
    empirical: float
    bound: float
    passed: bool


def verify_lemma1(dist: TestDistribution, N: int, p: float, reps: int,
                  rng: np.random.Generator) -> Lemma1Result:
    """Compare ``E|[P - S^N(P)](h)|^p)^(1/p)`` with ``c(p)^(1/p) osc(h) / sqrt(N)``.

    Passes when the empirical moment is at most ``bound * (1 + 3 / sqrt(reps))``.
    """
    if reps < 100:
        raise InvalidArgumentError("reps must be >= 100")
    if N < 1:
        raise InvalidArgumentError("N must be >= 1")
    err = _centered_means(dist, N, reps, rng)
    empirical = float(np.mean(np.abs(err) ** p) ** (1.0 / p))
    bound = c_of_p(p) ** (1.0 / p) * dist.h.osc_bound / math.sqrt(N)
    return Lemma1Result(dist.name, N, p, reps, empirical, bound,
                        empirical <= bound * (1.0 + 3.0 / math.sqrt(reps)))


@dataclass(frozen=True)
class MgfRow:
    epsilon: float
    empirical: float
    exact_bound: float
    simple_bound: float
    passed: bool


def verify_mgf(dist: TestDistribution, N: int, epsilon_grid: Sequence[float], reps: int,
               rng: np.random.Generator) -> list[MgfRow]:
    """Compare ``E exp(eps sqrt(N) |[S^N(P) - P](h)|)`` with both MGF bounds on a grid.

    ``h`` is centred by subtracting its known mean.  A row passes when the
    empirical value is at most ``exact_bound * (1 + 5 / sqrt(reps))``.
    """
    if reps < 100:
        raise InvalidArgumentError("reps must be >= 100")
    z = math.sqrt(N) * np.abs(_centered_means(dist, N, reps, rng))
    sigma = dist.h.osc_bound
    rows = []
    for eps in epsilon_grid:
        emp = float(np.mean(np.exp(eps * z)))
        exact = mgf_bound(eps, sigma, N, "exact")
        simple = mgf_bound(eps, sigma, N, "simple")
        rows.append(MgfRow(float(eps), emp, exact, simple, emp <= exact * (1.0 + 5.0 / math.sqrt(reps))))
    return rows


LEMMA1_DISTS = (uniform01, two_point, truncated_gaussian)
LEMMA1_P = (1, 2, 3, 4)
LEMMA1_N = (25, 100, 400)
MGF_GRID = tuple(round(0.1 * i, 1) for i in range(1, 21))


def lemma1_suite(seed: int = 0, reps: int = 10_000) -> list[Lemma1Result]:
    """Every (distribution, p, N) combination, each on its own random stream."""
    out = []
    for i, make in enumerate(LEMMA1_DISTS):
        dist = make()
        for j, p in enumerate(LEMMA1_P):
            for k, N in enumerate(LEMMA1_N):
                out.append(verify_lemma1(dist, N, p, reps, rng_stream(seed, VERIFY, 0, i, j, k)))
    return out


def mgf_suite(seed: int = 0, reps: int = 100_000, N: int = 50) -> dict[str, list[MgfRow]]:
    out = {}
    for i, make in enumerate((rademacher, uniform01)):
        dist = make()
        out[dist.name] = verify_mgf(dist, N, MGF_GRID, reps, rng_stream(seed, VERIFY, 1, i))
    return out
