"""Non-parametric compression: subsample N -> N_b, then rebuild N particles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ParticleSet, _require_normalized
from .errors import InvalidArgumentError
from .filtering import multinomial_resample, residual_resample


@dataclass(frozen=True)
class SubsampleConfig:
    N: int
    N_b: int
    chi: int | None = None

    def __post_init__(self):
        if not 1 <= self.N_b <= self.N:
            raise InvalidArgumentError(f"need 1 <= N_b <= N, got N_b={self.N_b}, N={self.N}")
        if self.chi is not None and self.chi * self.N_b != self.N:
            raise InvalidArgumentError(f"chi={self.chi} does not satisfy N = chi * N_b")

    @property
    def replicable(self) -> bool:
        """True when N is a whole multiple of N_b, so replication rebuilds the set exactly."""
        return self.N % self.N_b == 0

    @property
    def compression_factor(self) -> float:
        return self.N / self.N_b


def subsample(pset: ParticleSet, N_b: int, rng: np.random.Generator) -> ParticleSet:
    if N_b > pset.count:
        raise InvalidArgumentError(f"N_b={N_b} exceeds set size {pset.count}")
    return residual_resample(pset, N_b, rng)


def replicate_upsample(pset: ParticleSet, chi: int) -> ParticleSet:
    """Copy each particle ``chi`` times; the empirical measure is unchanged."""
    _require_normalized(pset)
    if chi < 1:
        raise InvalidArgumentError("chi must be >= 1")
    if chi == 1:
        return pset
    return ParticleSet(np.repeat(pset.states, chi, axis=0), np.repeat(pset.weights, chi) / chi)


def resample_upsample(pset: ParticleSet, N: int, rng: np.random.Generator) -> ParticleSet:
    if N < pset.count:
        raise InvalidArgumentError(f"N={N} is smaller than the set size {pset.count}")
    return multinomial_resample(pset, N, rng)


def compress_and_rebuild(pset: ParticleSet, cfg: SubsampleConfig,
                         rng: np.random.Generator) -> tuple[ParticleSet, str]:
    """Subsample to ``cfg.N_b`` and rebuild ``cfg.N`` particles.

    Returns the rebuilt set and the reconstruction path taken: ``"replicate"``
    when N is a multiple of N_b, otherwise ``"resample"``.
    """
    small = subsample(pset, cfg.N_b, rng)
    if cfg.replicable:
        return replicate_upsample(small, cfg.N // cfg.N_b), "replicate"
    return resample_upsample(small, cfg.N, rng), "resample"
