import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fkpf.core import (ParticleSet, StateVec, TestFunction, apply_measure, coordinate, normalize_weights,
                       point_mass, rng_stream, sample_empirical, uniform_box)
from fkpf.errors import DegenerateWeightsError, InvalidArgumentError, InvalidStateError

h_x = coordinate(0)


def test_rng_stream_reproducible_and_distinct():
    a = rng_stream(7, 1, 2).random(5)
    b = rng_stream(7, 1, 2).random(5)
    c = rng_stream(7, 1, 3).random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_rng_stream_rejects_negative_ids():
    with pytest.raises(InvalidArgumentError):
        rng_stream(1, -1)


def test_sample_point_mass():
    s = sample_empirical(point_mass((0.5, 0.5)), 3, rng_stream(0))
    assert s.count == 3
    assert np.all(s.states == 0.5)
    assert np.all(s.weights == 1.0 / 3.0)


def test_sample_uniform_mean_close():
    s = sample_empirical(uniform_box((0, 0), (1, 1)), 1000, rng_stream(0))
    assert np.all(np.abs(s.mean() - 0.5) < 0.05)


def test_sample_same_seed_identical():
    src = uniform_box((0, 0), (1, 1))
    assert sample_empirical(src, 50, rng_stream(3)).equals(sample_empirical(src, 50, rng_stream(3)))


def test_sample_zero_rejected():
    with pytest.raises(InvalidArgumentError):
        sample_empirical(point_mass((0.5, 0.5)), 0, rng_stream(0))


def test_apply_measure_examples():
    one = TestFunction(lambda s: np.ones(len(s)), 1.0)
    s = ParticleSet.uniform([[0.0, 0.0], [1.0, 0.0]])
    assert apply_measure(s, one) == 1.0
    assert apply_measure(s, h_x) == 0.5
    w = ParticleSet([[0.0, 0.0], [1.0, 0.0]], [0.9, 0.1])
    assert apply_measure(w, h_x) == pytest.approx(0.1)


def test_apply_measure_requires_normalized():
    with pytest.raises(InvalidStateError):
        apply_measure(ParticleSet([[0.0, 0.0], [1.0, 0.0]], [2.0, 2.0]), h_x)


def test_normalize_examples():
    s = ParticleSet([[0.0, 0.0], [1.0, 0.0]], [2.0, 2.0])
    assert np.array_equal(normalize_weights(s).weights, [0.5, 0.5])
    s = ParticleSet([[0.0, 0.0], [1.0, 0.0]], [1.0, 0.0])
    assert np.array_equal(normalize_weights(s).weights, [1.0, 0.0])
    with pytest.raises(DegenerateWeightsError):
        normalize_weights(ParticleSet([[0.0, 0.0], [1.0, 0.0]], [0.0, 0.0]))


def test_particle_set_validation():
    with pytest.raises(InvalidArgumentError):
        ParticleSet(np.zeros((2, 2)), [1.0])
    with pytest.raises(InvalidArgumentError):
        ParticleSet(np.zeros((2, 2)), [-1.0, 2.0])
    with pytest.raises(InvalidArgumentError):
        ParticleSet([[np.nan, 0.0]], [1.0])
    with pytest.raises(InvalidArgumentError):
        ParticleSet(np.zeros((0, 2)), [])


def test_particle_set_is_immutable():
    s = ParticleSet.uniform([[0.1, 0.2]])
    with pytest.raises(ValueError):
        s.states[0, 0] = 1.0
    assert s.particles[0].weight == 1.0
    assert len(s) == 1 and s.dim == 2
    assert StateVec(0.1, 0.2).x == 0.1


def test_test_function_rejects_bad_osc():
    with pytest.raises(InvalidArgumentError):
        TestFunction(lambda s: s[:, 0], 0.0)


def test_variance_scales_as_one_over_n():
    # slope of log-variance against log-n is -1 for an i.i.d. mean
    src = uniform_box((0, 0), (1, 1))
    ns = [100, 1000, 10000]
    logv = []
    for i, n in enumerate(ns):
        rng = rng_stream(99, i)
        vals = [apply_measure(sample_empirical(src, n, rng), h_x) for _ in range(400)]
        logv.append(np.log(np.var(vals)))
    slope = np.polyfit(np.log(ns), logv, 1)[0]
    assert abs(slope + 1.0) <= 0.15


weights_st = arrays(float, st.integers(1, 30), elements=st.floats(0.0, 10.0)).filter(lambda w: w.sum() > 1e-3)


@given(weights_st, st.integers(0, 2**31))
def test_apply_measure_within_range(w, seed):
    rng = rng_stream(seed)
    states = rng.uniform(size=(w.size, 2))
    s = normalize_weights(ParticleSet(states, w))
    v = apply_measure(s, h_x)
    assert states[:, 0].min() - 1e-12 <= v <= states[:, 0].max() + 1e-12


@given(weights_st)
def test_normalize_sums_to_one_and_keeps_ratios(w):
    s = normalize_weights(ParticleSet(np.zeros((w.size, 2)), w))
    assert s.is_normalized
    assert np.allclose(s.weights * w.sum(), w)


@given(st.integers(1, 200), st.integers(0, 2**31))
def test_sample_empirical_uniform_weights(n, seed):
    s = sample_empirical(uniform_box((0, 0), (1, 1)), n, rng_stream(seed))
    assert np.all(s.weights == 1.0 / n)
    assert s.count == n
