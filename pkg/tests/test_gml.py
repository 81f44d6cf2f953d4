import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fkpf.core import ParticleSet, rng_stream
from fkpf.errors import InvalidArgumentError
from fkpf.gml import (GaussianComponent, GmlConfig, MixtureModel, component_log_density_bounds,
                      gml_fit, gml_path, kl_divergence_mc, l1_distance_mc, mixture_logpdf,
                      moment_matched, sample_loglik, sample_mixture, two_component_step)

from oracles import diag_gauss_logpdf, em_diag_gmm


def two_clusters(seed, n=2000, std=0.05):
    rng = rng_stream(seed)
    c = np.array([[0.2, 0.2], [0.8, 0.8]])
    lab = rng.integers(0, 2, n)
    return c[lab] + std * rng.standard_normal((n, 2))


def test_mixture_logpdf_examples():
    single = MixtureModel([1.0], [[0.3, 0.6]], [[0.01, 0.04]])
    assert mixture_logpdf(single, [0.3, 0.6]) == pytest.approx(-math.log(2 * math.pi * 0.1 * 0.2))
    double = MixtureModel([0.5, 0.5], [[0.3, 0.6]] * 2, [[0.01, 0.04]] * 2)
    x = np.array([[0.1, 0.9], [0.35, 0.5]])
    assert np.allclose(mixture_logpdf(double, x), mixture_logpdf(single, x))
    ray = np.array([[0.3 + t, 0.6 + t] for t in np.linspace(0, 1, 20)])
    assert np.all(np.diff(single.logpdf(ray)) < 0)


def test_mixture_logpdf_matches_scalar_oracle():
    m = MixtureModel([0.2, 0.8], [[0.1, 0.2], [0.7, 0.4]], [[0.02, 0.03], [0.05, 0.01]])
    for x in ([0.0, 0.0], [0.5, 0.5], [0.7, 0.4]):
        want = math.log(sum(w * math.exp(diag_gauss_logpdf(x, mu, v))
                            for w, mu, v in zip(m.weights, m.means, m.variances)))
        assert mixture_logpdf(m, x) == pytest.approx(want, rel=1e-12)


def test_mixture_validation_and_json():
    with pytest.raises(InvalidArgumentError):
        MixtureModel([0.5, 0.4], [[0, 0], [1, 1]], [[1, 1], [1, 1]])
    with pytest.raises(InvalidArgumentError):
        MixtureModel([1.0], [[0, 0]], [[0.0, 1.0]])
    with pytest.raises(InvalidArgumentError):
        GaussianComponent([0, 0], [1.0])
    m = MixtureModel([0.25, 0.75], [[0.1, 0.2], [0.7, 0.4]], [[0.02, 0.03], [0.05, 0.01]])
    doc = m.to_dict()
    assert set(doc[0]) == {"weight", "mean", "var"}
    back = MixtureModel.from_dict(doc)
    assert np.array_equal(back.means, m.means) and np.array_equal(back.weights, m.weights)
    assert m.values_per_component * m.N_p == 10
    assert MixtureModel.from_components(m.components).N_p == 2


def test_config_validation():
    with pytest.raises(InvalidArgumentError):
        GmlConfig(N_p=0)
    with pytest.raises(InvalidArgumentError):
        GmlConfig(alpha_grid=())
    with pytest.raises(InvalidArgumentError):
        GmlConfig(alpha_grid=(0.0, 0.5))
    with pytest.raises(InvalidArgumentError):
        GmlConfig(init_strategy="random")


def test_single_component_is_moment_matched():
    x = two_clusters(0, n=500)
    m = gml_fit(x, GmlConfig(N_p=1))
    assert np.allclose(m.means[0], x.mean(axis=0))
    assert np.allclose(m.variances[0], np.clip(x.var(axis=0), 1e-4, 1.0))


def test_step_on_own_samples_gains_little():
    cur = MixtureModel([1.0], [[0.5, 0.5]], [[0.01, 0.01]])
    x = sample_mixture(cur, 3000, rng_stream(1)).states
    base = sample_loglik(cur, x)
    step = two_component_step(cur, x, GmlConfig())
    assert step.loglik >= base
    # with 3000 samples the gain from an extra component is sampling noise
    assert step.alpha == 0.0 or (step.loglik - base) / len(x) < 5e-3


def test_step_finds_tight_cluster():
    cur = MixtureModel([1.0], [[0.5, 0.5]], [[0.5, 0.5]])
    x = 0.8 + 0.02 * rng_stream(2).standard_normal((400, 2))
    step = two_component_step(cur, x, GmlConfig())
    # oracle: best single sample point as a mean with the same variance and alpha
    with np.errstate(divide="ignore"):
        log_keep = np.log1p(-step.alpha)
    ll = [np.sum(np.logaddexp(log_keep + cur.logpdf(x),
                              math.log(step.alpha) + GaussianComponent(c, step.component.var).logpdf(x)))
          for c in x]
    assert np.linalg.norm(step.component.mean - x[int(np.argmax(ll))]) < 0.05
    assert np.linalg.norm(step.component.mean - 0.8) < 0.05


def test_empty_samples_rejected():
    cur = MixtureModel([1.0], [[0.5, 0.5]], [[0.5, 0.5]])
    with pytest.raises(InvalidArgumentError):
        two_component_step(cur, np.empty((0, 2)), GmlConfig())
    with pytest.raises(InvalidArgumentError):
        gml_fit(np.array([[0.5, 0.5]]), GmlConfig())


@given(st.integers(0, 2**31), st.integers(2, 6), st.sampled_from(["k-candidate-points", "sample-moments"]),
       st.integers(0, 3))
def test_path_loglik_monotone(seed, n_p, init, backfit):
    rng = rng_stream(seed)
    k = rng.integers(1, 4)
    centers = rng.uniform(size=(k, 2))
    x = centers[rng.integers(0, k, 150)] + rng.uniform(0.01, 0.1) * rng.standard_normal((150, 2))
    path = gml_path(x, GmlConfig(N_p=n_p, init_strategy=init, backfit_steps=backfit))
    ll = [s.loglik for s in path]
    assert all(b >= a for a, b in zip(ll, ll[1:]))
    for s in path:
        assert np.all(s.model.variances >= 1e-4) and np.all(s.model.variances <= 1.0)
        assert s.model.weights.sum() == pytest.approx(1.0, abs=1e-9)


def test_weighted_fit_matches_replicated_samples():
    x = two_clusters(3, n=60)
    w = np.ones(60)
    w[:30] = 2.0
    a = gml_fit(x, GmlConfig(N_p=3), weights=w)
    b = gml_fit(np.vstack([x[:30], x[:30], x[30:]]), GmlConfig(N_p=3))
    assert sample_loglik(a, x, w) == pytest.approx(sample_loglik(b, x, w), rel=0.05)
    c = gml_fit(ParticleSet(x, w / w.sum()), GmlConfig(N_p=3))
    assert np.allclose(c.means, a.means)


def test_two_cluster_agrees_with_em_oracle():
    x = two_clusters(11)
    fit = gml_fit(x, GmlConfig(N_p=2))
    _, _, mu, _ = em_diag_gmm(x, 2, rng_stream(0), restarts=10, iters=100)
    for m in fit.means:
        assert np.min(np.linalg.norm(mu - m, axis=1)) < 0.02


def test_sample_mixture_examples():
    tight = MixtureModel([1.0], [[0.4, 0.6]], [[1e-4, 1e-4]])
    s = sample_mixture(tight, 500, rng_stream(0))
    assert np.all(np.abs(s.states - [0.4, 0.6]) <= 4 * math.sqrt(1e-4))
    only_first = MixtureModel([1.0, 0.0], [[0.0, 0.0], [5.0, 5.0]], [[1e-4] * 2] * 2)
    assert np.all(sample_mixture(only_first, 500, rng_stream(1)).states < 1.0)
    with pytest.raises(InvalidArgumentError):
        sample_mixture(tight, 0, rng_stream(0))


def test_sample_mixture_selection_frequencies():
    w = np.array([0.2, 0.5, 0.3])
    m = MixtureModel(w, [[0.0, 0.0], [10.0, 0.0], [20.0, 0.0]], [[1e-4] * 2] * 3)
    n = 30_000
    lab = np.rint(sample_mixture(m, n, rng_stream(2)).states[:, 0] / 10).astype(int)
    freq = np.bincount(lab, minlength=3) / n
    assert np.all(np.abs(freq - w) <= 3 * np.sqrt(w * (1 - w) / n))


def test_kl_examples():
    g = MixtureModel([1.0], [[0.5, 0.5]], [[0.01, 0.01]])
    sampler = lambda rng, n: sample_mixture(g, n, rng).states
    est = kl_divergence_mc(g.logpdf, sampler, g, 2000, rng_stream(0))
    assert abs(est.value) <= 3 * est.stderr + 1e-12
    shifted = MixtureModel([1.0], [[0.6, 0.5]], [[0.01, 0.01]])
    est = kl_divergence_mc(g.logpdf, sampler, shifted, 50_000, rng_stream(1))
    assert abs(est.value - 0.5) <= 3 * est.stderr
    with pytest.raises(InvalidArgumentError):
        kl_divergence_mc(g.logpdf, sampler, g, 0, rng_stream(0))


def test_pinsker_on_fit():
    f = MixtureModel([0.3, 0.7], [[0.3, 0.3], [0.7, 0.6]], [[0.01, 0.02], [0.02, 0.01]])
    sampler = lambda rng, n: sample_mixture(f, n, rng).states
    g = gml_fit(sampler(rng_stream(0), 300), GmlConfig(N_p=2))
    kl = kl_divergence_mc(f.logpdf, sampler, g, 20_000, rng_stream(1))
    l1 = l1_distance_mc(f.logpdf, sampler, g.logpdf, 20_000, rng_stream(2))
    assert l1.value <= math.sqrt(2 * max(kl.value, 0.0)) + 3 * (l1.stderr + kl.stderr)


def test_component_density_bounds():
    log_a, log_b = component_log_density_bounds(1e-4, 1.0)
    assert log_b == pytest.approx(-math.log(2 * math.pi * 1e-4))
    # brute force over means in the square, points in the square, variances on a grid
    vals = []
    for v in (1e-4, 1e-3, 0.01, 0.1, 1.0):
        for d in (0.0, 0.5, 1.0):
            vals.append(2 * (-0.5 * math.log(2 * math.pi * v) - d * d / (2 * v)))
    assert min(vals) >= log_a - 1e-9 and max(vals) <= log_b + 1e-9
