"""Particle filtering with intermittent compression of the particle set.

Modules
-------
core        weighted particle sets, test functions, seeded random streams
models      target dynamics, binary sensors, sensor-network layouts
filtering   predict / update / resample recursion
subsample   N -> N_b -> N compression by subsampling
gml         greedy maximum-likelihood Gaussian-mixture compression
leader      leader-node hand-off with mutual-information leader choice
bounds      closed-form error bounds and constants
experiments Monte Carlo harness, empirical bound checks, CSV output
"""

from .core import ParticleSet, StateVec, TestFunction, rng_stream
from .errors import (DegenerateWeightsError, FkpfError, InvalidArgumentError, InvalidStateError,
                     OutOfHypothesisError)

__version__ = "0.1.0"

__all__ = [
    "DegenerateWeightsError", "FkpfError", "InvalidArgumentError", "InvalidStateError",
    "OutOfHypothesisError", "ParticleSet", "StateVec", "TestFunction", "rng_stream",
]
