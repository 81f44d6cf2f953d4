import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fkpf.core import ParticleSet, rng_stream
from fkpf.errors import DegenerateWeightsError, InvalidArgumentError
from fkpf.filtering import (filter_step, multinomial_counts, multinomial_resample, predict,
                            residual_counts, residual_resample, update)
from fkpf.models import BinarySensorModel, DynamicsModel, build_topology, leader_log_potential

from oracles import residual_outcome_probs

still = DynamicsModel(noise_amp=0.0)


def test_predict_on_circle_and_keeps_weights():
    s = ParticleSet(np.full((50, 2), 0.5), np.arange(1, 51) / np.arange(1, 51).sum())
    out = predict(s, still, rng_stream(0))
    assert np.allclose(np.linalg.norm(out.states - 0.5, axis=1), 0.02)
    assert np.array_equal(out.weights, s.weights)


def test_predict_forced_direction():
    out = still.sample(np.array([[0.5, 0.5]]), rng_stream(0), phi=0.0)
    assert out[0] == pytest.approx([0.52, 0.5])


def test_update_examples():
    s = ParticleSet.uniform([[0.0, 0.0], [1.0, 1.0]])
    assert np.allclose(update(s, lambda x: np.full(len(x), 3.0)).weights, [0.5, 0.5])
    a = update(s, lambda x: np.array([0.9, 0.1])).weights
    b = update(s, lambda x: np.array([0.09, 0.01])).weights
    assert np.allclose(a, [0.9, 0.1])
    assert np.allclose(a, b)


def test_update_log_space_survives_underflow():
    s = ParticleSet.uniform([[0.0, 0.0], [1.0, 1.0]])
    out = update(s, lambda x: np.array([-2000.0, -2001.0]), log=True)
    assert out.weights[0] == pytest.approx(1 / (1 + math.exp(-1)))


def test_update_degenerate():
    s = ParticleSet.uniform([[0.0, 0.0], [1.0, 1.0]])
    with pytest.raises(DegenerateWeightsError):
        update(s, lambda x: np.zeros(2))
    with pytest.raises(InvalidArgumentError):
        update(s, lambda x: np.ones(3))


@given(arrays(float, 6, elements=st.floats(0.01, 1.0)), st.floats(1e-3, 1e3))
def test_update_scale_invariant(g, c):
    s = ParticleSet.uniform(np.arange(12.0).reshape(6, 2))
    a = update(s, lambda x: g).weights
    b = update(s, lambda x: c * g).weights
    assert np.allclose(a, b, rtol=1e-12, atol=0)
    assert np.argmax(a) == np.argmax(b)


def test_residual_integer_expected_counts_exact():
    for seed in range(200):
        assert residual_counts(np.array([0.5, 0.3, 0.2]), 10, rng_stream(seed)).tolist() == [5, 3, 2]


def test_residual_single_draw_distribution():
    w = np.array([0.45, 0.35, 0.2])
    want = residual_outcome_probs(w, 10)
    n = 20_000
    rng = rng_stream(5)
    got = Counter(tuple(residual_counts(w, 10, rng).tolist()) for _ in range(n))
    assert set(got) == set(want)
    for k, p in want.items():
        assert abs(got[k] / n - p) <= 3 * math.sqrt(p * (1 - p) / n)


@pytest.mark.parametrize("counts_fn", [residual_counts, multinomial_counts])
def test_resampling_unbiased(counts_fn):
    w = np.array([0.07, 0.33, 0.015, 0.285, 0.3])
    # 3 sigma per component over 5 components: about 1.3% family-wise false-alarm rate
    n_out, reps = 13, 100_000
    rng = rng_stream(11)
    c = np.array([counts_fn(w, n_out, rng) for _ in range(reps)])
    se = c.std(axis=0, ddof=1) / math.sqrt(reps)
    assert np.all(np.abs(c.mean(axis=0) - n_out * w) <= 3 * se + 1e-12)


def test_multinomial_point_mass_and_uniform():
    s = ParticleSet([[0.1, 0.1], [0.9, 0.9], [0.5, 0.5]], [1.0, 0.0, 0.0])
    out = multinomial_resample(s, 7, rng_stream(0))
    assert np.all(out.states == [0.1, 0.1])
    assert np.all(out.weights == 1 / 7)
    u = np.full(4, 0.25)
    rng = rng_stream(1)
    c = np.array([multinomial_counts(u, 4, rng) for _ in range(20_000)])
    assert np.all(np.abs(c.mean(axis=0) - 1.0) <= 3 * c.std(axis=0) / math.sqrt(20_000))


def test_resample_rejects_bad_size():
    s = ParticleSet.uniform([[0.1, 0.1]])
    with pytest.raises(InvalidArgumentError):
        residual_resample(s, 0, rng_stream(0))
    with pytest.raises(InvalidArgumentError):
        multinomial_resample(s, 0, rng_stream(0))


@given(arrays(float, st.integers(1, 20), elements=st.floats(0.0, 1.0)).filter(lambda w: w.sum() > 1e-6),
       st.integers(1, 60), st.integers(0, 2**31))
def test_residual_deterministic_part_and_size(w, n_out, seed):
    p = w / w.sum()
    c = residual_counts(p, n_out, rng_stream(seed))
    assert c.sum() == n_out
    assert np.all(c >= np.floor(n_out * p - 1e-9))
    out = residual_resample(ParticleSet(np.zeros((w.size, 2)), p), n_out, rng_stream(seed))
    assert out.count == n_out and np.all(out.weights == 1 / n_out)


def test_filter_step_constant_potential():
    s = ParticleSet.uniform(np.full((20, 2), 0.5))
    out = filter_step(s, still, lambda x: np.ones(len(x)), 20, rng_stream(0))
    assert np.allclose(np.linalg.norm(out.states - 0.5, axis=1), 0.02)
    assert np.all(out.weights == 1 / 20)


def test_filter_step_deterministic_sensor_keeps_inside():
    topo = build_topology([[0.5, 0.5]], [[0.5, 0.5]], r_c=0.3)
    perfect = BinarySensorModel(0.1, p_d=1.0, p_f=0.0)
    log_g = leader_log_potential(0, topo, perfect, {0: 1})
    s = ParticleSet.uniform(rng_stream(3).uniform(size=(500, 2)))
    out = filter_step(s, DynamicsModel(), log_g, 200, rng_stream(4), log=True)
    assert np.all(np.linalg.norm(out.states - 0.5, axis=1) <= 0.1)


def test_filter_step_is_manual_composition():
    s = ParticleSet.uniform(rng_stream(3).uniform(size=(50, 2)))
    g = lambda x: 1.0 + x[:, 0]
    a = filter_step(s, DynamicsModel(), g, 40, rng_stream(9))
    rng = rng_stream(9)
    b = residual_resample(update(predict(s, DynamicsModel(), rng), g), 40, rng)
    assert a.equals(b)


@given(st.integers(1, 80), st.integers(0, 2**31))
def test_filter_step_output_size(N, seed):
    s = ParticleSet.uniform(rng_stream(seed).uniform(size=(30, 2)))
    out = filter_step(s, DynamicsModel(), lambda x: 0.1 + x[:, 1], N, rng_stream(seed, 1))
    assert out.count == N and np.all(out.weights == 1 / N)
