"""Weighted empirical measures, the sampling operator and bounded test functions.

Particle states are stored as an ``(N, d)`` float array and weights as an
``(N,)`` array.  The tracking application uses ``d = 2``; the concentration
checks in :mod:`fkpf.experiments.verify` use ``d = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import DegenerateWeightsError, InvalidArgumentError, InvalidStateError

NORMALIZATION_TOL = 1e-9

Sampler = Callable[[np.random.Generator, int], np.ndarray]


class StateVec(NamedTuple):
    """Target position in the unit square."""

    x: float
    y: float


class Particle(NamedTuple):
    state: np.ndarray
    weight: float


def rng_stream(seed: int, *stream: int) -> np.random.Generator:
    """Return a generator fully determined by ``seed`` and the ``stream`` path.

    Streams with distinct paths are statistically independent, so trials and
    filters can draw concurrently without coordination.
    """
    for s in stream:
        if s < 0:
            raise InvalidArgumentError("stream ids must be non-negative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.PCG64(ss))


def _as_states(states) -> np.ndarray:
    arr = np.asarray(states, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise InvalidArgumentError(f"states must be (N, d), got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class ParticleSet:
    """Weighted empirical measure ``sum_k w_k delta_{xi_k}``.

    Instances are immutable: both arrays are flagged read-only, so a set can be
    shared between trials or threads without copying.
    """

    states: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        states = _as_states(self.states)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if states.shape[0] == 0:
            raise InvalidArgumentError("a particle set needs at least one particle")
        if weights.shape[0] != states.shape[0]:
            raise InvalidArgumentError(
                f"{states.shape[0]} states but {weights.shape[0]} weights"
            )
        if not np.all(np.isfinite(states)):
            raise InvalidArgumentError("particle states must be finite")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise InvalidArgumentError("weights must be finite and non-negative")
        states = states.copy()
        weights = weights.copy()
        states.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, states) -> "ParticleSet":
        states = _as_states(states)
        n = states.shape[0]
        return cls(states, np.full(n, 1.0 / n))

    @property
    def count(self) -> int:
        return self.states.shape[0]

    def __len__(self) -> int:
        return self.count

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def particles(self) -> list[Particle]:
        return [Particle(s, float(w)) for s, w in zip(self.states, self.weights)]

    @property
    def is_normalized(self) -> bool:
        return abs(float(self.weights.sum()) - 1.0) <= NORMALIZATION_TOL

    def mean(self) -> np.ndarray:
        """Weighted mean of the states (the posterior-mean estimate)."""
        _require_normalized(self)
        return self.weights @ self.states

    def equals(self, other: "ParticleSet") -> bool:
        """Bit-exact equality of states and weights."""
        return (
            self.states.shape == other.states.shape
            and np.array_equal(self.states, other.states)
            and np.array_equal(self.weights, other.weights)
        )


@dataclass(frozen=True)
class TestFunction:
    """A bounded test function with a known bound on its oscillation.

    ``fn`` is vectorised: it maps an ``(n, d)`` array of states to ``(n,)``.
    """

    __test__ = False  # keep pytest from collecting this class

    fn: Callable[[np.ndarray], np.ndarray]
    osc_bound: float

    def __post_init__(self):
        if not self.osc_bound > 0:
            raise InvalidArgumentError("osc_bound must be positive")

    def __call__(self, states) -> np.ndarray:
        return np.asarray(self.fn(_as_states(states)), dtype=float).reshape(-1)


def coordinate(axis: int, osc_bound: float = 1.0) -> TestFunction:
    """Projection ``h(x) = x[axis]``; on the unit square its oscillation is 1."""
    return TestFunction(lambda s: s[:, axis], osc_bound)


def point_mass(location: Sequence[float]) -> Sampler:
    loc = np.asarray(location, dtype=float)

    def draw(rng: np.random.Generator, n: int) -> np.ndarray:
        return np.broadcast_to(loc, (n, loc.size)).copy()

    return draw


def uniform_box(low: Sequence[float], high: Sequence[float]) -> Sampler:
    lo = np.asarray(low, dtype=float)
    hi = np.asarray(high, dtype=float)

    def draw(rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(lo, hi, size=(n, lo.size))

    return draw


def sample_empirical(source: Sampler, n: int, rng: np.random.Generator) -> ParticleSet:
    """Sampling operator: ``n`` i.i.d. draws from ``source``, each weighted ``1/n``."""
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    return ParticleSet.uniform(source(rng, n))


def _require_normalized(pset: ParticleSet) -> None:
    if not pset.is_normalized:
        raise InvalidStateError(
            f"particle set is not normalized (weight sum {pset.weights.sum()!r})"
        )


def apply_measure(pset: ParticleSet, h: TestFunction) -> float:
    """Integral of ``h`` against the empirical measure, ``sum_k w_k h(xi_k)``."""
    _require_normalized(pset)
    return float(pset.weights @ h(pset.states))


def normalize_weights(pset: ParticleSet) -> ParticleSet:
    total = float(pset.weights.sum())
    if not total > 0:
        raise DegenerateWeightsError("all particle weights are zero")
    return ParticleSet(pset.states, pset.weights / total)
