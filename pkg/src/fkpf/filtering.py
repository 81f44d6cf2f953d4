"""Bootstrap particle recursion: mutation, Boltzmann-Gibbs reweighting, resampling."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .core import ParticleSet, _require_normalized
from .errors import DegenerateWeightsError, InvalidArgumentError
from .models import DynamicsModel

Potential = Callable[[np.ndarray], np.ndarray]


def predict(pset: ParticleSet, model: DynamicsModel, rng: np.random.Generator) -> ParticleSet:
    """Propagate every particle through the dynamics; weights are carried over untouched."""
    _require_normalized(pset)
    return ParticleSet(model.sample(pset.states, rng), pset.weights)


def update(pset: ParticleSet, potential: Potential, log: bool = False) -> ParticleSet:
    """Reweight by ``potential`` and renormalise.

    With ``log=True`` the callable returns log-potentials; the update is then
    carried out in log space so that products of many small likelihoods do not
    underflow.
    """
    values = np.asarray(potential(pset.states), dtype=float).reshape(-1)
    if values.shape[0] != pset.count:
        raise InvalidArgumentError("potential must return one value per particle")
    with np.errstate(divide="ignore"):
        logw = np.log(pset.weights) + (values if log else np.log(values))
    top = np.max(logw)
    if not np.isfinite(top):
        raise DegenerateWeightsError("all particle weights vanished in the update")
    w = np.exp(logw - top)
    return ParticleSet(pset.states, w / w.sum())


def _clean_probs(weights: np.ndarray) -> np.ndarray:
    w = np.clip(np.asarray(weights, dtype=float), 0.0, None)
    return w / w.sum()


def residual_counts(weights: np.ndarray, n_out: int, rng: np.random.Generator) -> np.ndarray:
    """Offspring counts: ``floor(n_out * w_k)`` copies plus a multinomial draw on the residuals."""
    w = _clean_probs(weights)
    expected = n_out * w
    counts = np.floor(expected).astype(np.int64)
    remaining = n_out - int(counts.sum())
    if remaining > 0:
        resid = expected - counts
        resid = np.clip(resid, 0.0, None)
        counts += rng.multinomial(remaining, resid / resid.sum())
    return counts


def multinomial_counts(weights: np.ndarray, n_out: int, rng: np.random.Generator) -> np.ndarray:
    return rng.multinomial(n_out, _clean_probs(weights)).astype(np.int64)


def _from_counts(pset: ParticleSet, counts: np.ndarray) -> ParticleSet:
    return ParticleSet.uniform(np.repeat(pset.states, counts, axis=0))


def residual_resample(pset: ParticleSet, n_out: int, rng: np.random.Generator) -> ParticleSet:
    _require_normalized(pset)
    if n_out < 1:
        raise InvalidArgumentError("n_out must be >= 1")
    return _from_counts(pset, residual_counts(pset.weights, n_out, rng))


def multinomial_resample(pset: ParticleSet, n_out: int, rng: np.random.Generator) -> ParticleSet:
    _require_normalized(pset)
    if n_out < 1:
        raise InvalidArgumentError("n_out must be >= 1")
    return _from_counts(pset, multinomial_counts(pset.weights, n_out, rng))


def filter_step(pset: ParticleSet, dynamics: DynamicsModel, potential: Potential, N: int,
                rng: np.random.Generator, log: bool = False) -> ParticleSet:
    """One mutation-selection cycle, ending with ``N`` equally weighted particles."""
    moved = predict(pset, dynamics, rng)
    weighted = update(moved, potential, log=log)
    return residual_resample(weighted, N, rng)
