"""Greedy maximum-likelihood fitting of diagonal-Gaussian mixtures.

The fitter grows a mixture one component at a time.  Starting from a single
moment-matched Gaussian ``g_1``, step ``k`` solves the two-component problem

    max_{alpha, theta}  sum_j log((1 - alpha) g_{k-1}(x_j) + alpha phi_theta(x_j))

and sets ``g_k = (1 - alpha) g_{k-1} + alpha phi_theta``.  The inner problem is
solved by a deterministic candidate search (means on sample points, variances
from local sample moments, ``alpha`` on a grid) followed by a few EM-style
refinement iterations that are accepted only when they raise the likelihood.
Because ``alpha = 0`` is always among the evaluated options the sample
log-likelihood never decreases from one step to the next.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .core import ParticleSet
from .errors import InvalidArgumentError

LOG_2PI = math.log(2.0 * math.pi)
# relative gain below which a new component is rejected (guards against round-off)
_MIN_GAIN = 1e-10


def _logsumexp0(a: np.ndarray) -> np.ndarray:
    """Column-wise log-sum-exp of a ``(K, n)`` array."""
    top = a.max(axis=0)
    safe = np.where(np.isfinite(top), top, 0.0)
    return safe + np.log(np.exp(a - safe[None]).sum(axis=0))


def default_alpha_grid() -> tuple[float, ...]:
    return tuple(round(0.05 * i, 2) for i in range(1, 21))


@dataclass(frozen=True)
class GaussianComponent:
    mean: np.ndarray
    var: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float).reshape(-1))
        object.__setattr__(self, "var", np.asarray(self.var, dtype=float).reshape(-1))
        if self.mean.shape != self.var.shape:
            raise InvalidArgumentError("mean and var must have the same dimension")
        if np.any(self.var <= 0):
            raise InvalidArgumentError("variances must be positive")

    def logpdf(self, x) -> np.ndarray:
        return _diag_logpdf(np.atleast_2d(np.asarray(x, dtype=float)), self.mean[None], self.var[None])[0]


def _diag_logpdf(x: np.ndarray, means: np.ndarray, variances: np.ndarray) -> np.ndarray:
    """Log-density of each diagonal Gaussian at each point: shape ``(K, n)``."""
    d = x.shape[1]
    diff2 = (x[None, :, :] - means[:, None, :]) ** 2
    quad = (diff2 / variances[:, None, :]).sum(axis=2)
    logdet = np.log(variances).sum(axis=1)
    return -0.5 * (quad + logdet[:, None] + d * LOG_2PI)


@dataclass(frozen=True, eq=False)
class MixtureModel:
    """Convex combination of diagonal Gaussians."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        mu = np.atleast_2d(np.asarray(self.means, dtype=float))
        var = np.atleast_2d(np.asarray(self.variances, dtype=float))
        if w.size < 1:
            raise InvalidArgumentError("a mixture needs at least one component")
        if mu.shape != var.shape or mu.shape[0] != w.size:
            raise InvalidArgumentError("weights, means and variances disagree in shape")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise InvalidArgumentError(f"weights must be non-negative and sum to 1 (sum={w.sum()!r})")
        if np.any(var <= 0):
            raise InvalidArgumentError("variances must be positive")
        for arr in (w, mu, var):
            arr.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "variances", var)

    @classmethod
    def from_components(cls, components: Sequence[tuple[float, GaussianComponent]]) -> "MixtureModel":
        w = [c[0] for c in components]
        return cls(w, [c[1].mean for c in components], [c[1].var for c in components])

    @property
    def N_p(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def components(self) -> list[tuple[float, GaussianComponent]]:
        return [
            (float(w), GaussianComponent(m, v))
            for w, m, v in zip(self.weights, self.means, self.variances)
        ]

    @property
    def values_per_component(self) -> int:
        """Scalars needed to transmit one component: weight, mean and variances."""
        return 1 + 2 * self.dim

    def logpdf(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        comp = _diag_logpdf(x, self.means, self.variances)
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        return _logsumexp0(comp + logw[:, None])

    def mean(self) -> np.ndarray:
        return self.weights @ self.means

    def to_dict(self) -> list[dict]:
        return [
            {"weight": float(w), "mean": m.tolist(), "var": v.tolist()}
            for w, m, v in zip(self.weights, self.means, self.variances)
        ]

    @classmethod
    def from_dict(cls, doc: Sequence[dict]) -> "MixtureModel":
        return cls([c["weight"] for c in doc], [c["mean"] for c in doc], [c["var"] for c in doc])


def mixture_logpdf(model: MixtureModel, x) -> float | np.ndarray:
    """Mixture log-density; a scalar for a single point, an array for ``(n, d)`` input."""
    arr = np.asarray(x, dtype=float)
    out = model.logpdf(arr)
    return float(out[0]) if arr.ndim == 1 else out


@dataclass(frozen=True)
class GmlConfig:
    """Settings for :func:`gml_fit`.

    ``init_strategy`` picks how candidate components for each greedy step are
    seeded: ``"k-candidate-points"`` searches over up to ``max_candidates``
    sample points at several local-variance scales, ``"sample-moments"`` uses a
    single candidate matched to the moments of the poorly explained samples.
    ``backfit_steps`` EM sweeps over the whole mixture follow each greedy step;
    set it to 0 for the plain greedy recursion.
    """

    N_p: int = 8
    alpha_grid: tuple[float, ...] = field(default_factory=default_alpha_grid)
    init_strategy: str = "k-candidate-points"
    local_steps: int = 5
    var_floor: float = 1e-4
    var_ceiling: float = 1.0
    max_candidates: int = 16
    variance_scales: tuple[float, ...] = (0.5, 2.0)
    backfit_steps: int = 5

    def __post_init__(self):
        if self.N_p < 1:
            raise InvalidArgumentError("N_p must be >= 1")
        if not self.alpha_grid or any(not 0 < a <= 1 for a in self.alpha_grid):
            raise InvalidArgumentError("alpha_grid values must lie in (0, 1]")
        if self.init_strategy not in ("k-candidate-points", "sample-moments"):
            raise InvalidArgumentError(f"unknown init_strategy {self.init_strategy!r}")
        if not 0 < self.var_floor < self.var_ceiling:
            raise InvalidArgumentError("need 0 < var_floor < var_ceiling")
        if self.local_steps < 0 or self.backfit_steps < 0:
            raise InvalidArgumentError("iteration counts must be non-negative")


class StepResult(NamedTuple):
    component: GaussianComponent
    alpha: float
    loglik: float


class GmlStage(NamedTuple):
    model: MixtureModel
    loglik: float


def _prepare(samples, weights) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(samples, ParticleSet):
        if weights is None:
            weights = samples.weights
        samples = samples.states
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    if x.shape[0] == 0 or x.size == 0:
        raise InvalidArgumentError("samples must be non-empty")
    n = x.shape[0]
    if weights is None:
        v = np.ones(n)
    else:
        v = np.asarray(weights, dtype=float).reshape(-1)
        if v.size != n or np.any(v < 0) or not v.sum() > 0:
            raise InvalidArgumentError("invalid sample weights")
        v = v * (n / v.sum())
    return x, v


def _clamp(var, cfg: GmlConfig) -> np.ndarray:
    return np.clip(var, cfg.var_floor, cfg.var_ceiling)


def sample_loglik(model: MixtureModel, samples, weights=None) -> float:
    """``sum_j log g(x_j)``, with optional per-sample weights rescaled to sum to n."""
    x, v = _prepare(samples, weights)
    return float(v @ model.logpdf(x))


def moment_matched(samples, config: GmlConfig, weights=None) -> MixtureModel:
    x, v = _prepare(samples, weights)
    p = v / v.sum()
    mu = p @ x
    var = _clamp(p @ (x - mu) ** 2, config)
    return MixtureModel([1.0], [mu], [var])


def _two_mix_loglik(log_g: np.ndarray, log_phi: np.ndarray, alphas: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Weighted log-likelihood of ``(1-a) g + a phi`` for every alpha and candidate.

    ``log_phi`` is ``(C, n)``; the result is ``(A, C)``.
    """
    top = np.maximum(log_g[None, :], log_phi)  # (C, n)
    g = np.exp(log_g[None, :] - top)
    phi = np.exp(log_phi - top)
    a = alphas[:, None, None]
    with np.errstate(divide="ignore"):
        inner = np.log((1.0 - a) * g[None] + a * phi[None])
    return (inner + top[None]) @ v


def _candidates(x: np.ndarray, v: np.ndarray, log_g: np.ndarray, k: int, cfg: GmlConfig):
    n, d = x.shape
    p = v / v.sum()
    if cfg.init_strategy == "sample-moments":
        # emphasise samples the current mixture explains poorly
        r = p * np.exp(-(log_g - log_g.max()))
        r = r / r.sum()
        mu = r @ x
        var = _clamp(r @ (x - mu) ** 2, cfg)
        return mu[None], var[None]

    m = min(cfg.max_candidates, n)
    n_low = m // 2
    order = np.argsort(log_g, kind="stable")
    idx = list(order[:n_low])
    for i in np.linspace(0, n - 1, m - n_low).astype(int):
        if i not in idx:
            idx.append(int(i))
    centers = np.vstack([x[idx], (p @ x)[None]])
    # local moments from the nearest neighbours of each centre
    n_nb = int(min(n, max(2 * d + 2, n // max(2, k))))
    d2 = ((centers[:, None, :] - x[None, :, :]) ** 2).sum(axis=2)
    nb = np.argpartition(d2, n_nb - 1, axis=1)[:, :n_nb] if n_nb < n else np.tile(np.arange(n), (len(centers), 1))
    local = ((x[nb] - centers[:, None, :]) ** 2).mean(axis=1)
    scales = (1.0,) + tuple(s for s in cfg.variance_scales if s != 1.0)
    means = np.concatenate([centers] * len(scales))
    variances = np.concatenate([_clamp(local * s, cfg) for s in scales])
    return means, variances


def two_component_step(current: MixtureModel, samples, config: GmlConfig, weights=None,
                       k: int | None = None) -> StepResult:
    """Best new component and mixing weight to add to ``current``.

    The returned log-likelihood is never below that of ``alpha = 0`` (keeping
    ``current`` unchanged).
    """
    x, v = _prepare(samples, weights)
    k = current.N_p + 1 if k is None else k
    log_g = current.logpdf(x)
    baseline = float(v @ log_g)

    means, variances = _candidates(x, v, log_g, k, config)
    alphas = sorted(set(config.alpha_grid) | {2.0 / (k + 1)})
    alphas = np.array([a for a in alphas if 0 < a <= 1])
    log_phi = _diag_logpdf(x, means, variances)
    table = _two_mix_loglik(log_g, log_phi, alphas, v)
    ai, ci = np.unravel_index(int(np.argmax(table)), table.shape)
    best_ll = float(table[ai, ci])
    mu, var, alpha = means[ci], variances[ci], float(alphas[ai])
    if not best_ll > baseline + _MIN_GAIN * max(1.0, abs(baseline)):
        return StepResult(GaussianComponent(mu, var), 0.0, baseline)

    vsum = v.sum()
    for _ in range(config.local_steps):
        lp = _diag_logpdf(x, mu[None], var[None])[0]
        with np.errstate(divide="ignore"):
            num = np.log(alpha) + lp
            den = np.logaddexp(np.log1p(-alpha) + log_g, num)
        resp = np.exp(num - den) * v
        mass = resp.sum()
        if not mass > 0:
            break
        new_alpha = min(mass / vsum, 1.0)
        new_mu = resp @ x / mass
        new_var = _clamp(resp @ (x - new_mu) ** 2 / mass, config)
        ll = float(_two_mix_loglik(log_g, _diag_logpdf(x, new_mu[None], new_var[None]),
                                   np.array([new_alpha]), v)[0, 0])
        if not ll > best_ll + _MIN_GAIN * max(1.0, abs(best_ll)):
            break
        mu, var, alpha, best_ll = new_mu, new_var, new_alpha, ll
    return StepResult(GaussianComponent(mu, var), alpha, best_ll)


def _backfit(model: MixtureModel, x: np.ndarray, v: np.ndarray, cfg: GmlConfig,
             loglik: float) -> tuple[MixtureModel, float]:
    """EM sweeps over every component; a sweep is kept only if it raises the likelihood."""
    w, mu, var = model.weights, model.means, model.variances
    vsum = v.sum()
    for _ in range(cfg.backfit_steps):
        with np.errstate(divide="ignore"):
            joint = _diag_logpdf(x, mu, var) + np.log(w)[:, None]
        resp = np.exp(joint - _logsumexp0(joint)[None]) * v[None]
        mass = resp.sum(axis=1)
        live = mass > 1e-12
        new_w = mass / vsum
        new_mu = mu.copy()
        new_var = var.copy()
        new_mu[live] = (resp[live] @ x) / mass[live, None]
        for i in np.flatnonzero(live):
            new_var[i] = _clamp(resp[i] @ (x - new_mu[i]) ** 2 / mass[i], cfg)
        new_w = new_w / new_w.sum()
        candidate = MixtureModel(new_w, new_mu, new_var)
        ll = float(v @ candidate.logpdf(x))
        if not ll > loglik + _MIN_GAIN * max(1.0, abs(loglik)):
            break
        model, loglik = candidate, ll
        w, mu, var = model.weights, model.means, model.variances
    return model, loglik


def gml_path(samples, config: GmlConfig, weights=None) -> list[GmlStage]:
    """Every intermediate mixture ``g_1, ..., g_{N_p}`` with its sample log-likelihood."""
    x, v = _prepare(samples, weights)
    if x.shape[0] < 2:
        raise InvalidArgumentError("need at least two samples")
    model = moment_matched(x, config, v)
    loglik = float(v @ model.logpdf(x))
    stages = [GmlStage(model, loglik)]
    for k in range(2, config.N_p + 1):
        step = two_component_step(model, x, config, v, k=k)
        a = step.alpha
        model = MixtureModel(
            np.append(model.weights * (1.0 - a), a),
            np.vstack([model.means, step.component.mean]),
            np.vstack([model.variances, step.component.var]),
        )
        loglik = float(v @ model.logpdf(x))
        if config.backfit_steps:
            model, loglik = _backfit(model, x, v, config, loglik)
        stages.append(GmlStage(model, loglik))
    return stages


def gml_fit(samples, config: GmlConfig, weights=None) -> MixtureModel:
    return gml_path(samples, config, weights)[-1].model


def sample_mixture(model: MixtureModel, n: int, rng: np.random.Generator) -> ParticleSet:
    """``n`` i.i.d. draws: a component by weight, then independent Gaussian coordinates."""
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    comp = rng.choice(model.N_p, size=n, p=model.weights / model.weights.sum())
    z = rng.standard_normal((n, model.dim))
    return ParticleSet.uniform(model.means[comp] + z * np.sqrt(model.variances[comp]))


def component_log_density_bounds(var_floor: float, var_ceiling: float, extent: float = 1.0,
                                 dim: int = 2) -> tuple[float, float]:
    """Log of the inf and sup of a clamped diagonal Gaussian over a cube of side ``extent``.

    Means are assumed inside the cube, so per-axis offsets are at most ``extent``.
    """
    log_b = -0.5 * dim * (LOG_2PI + math.log(var_floor))

    def axis_log_min(vv: float) -> float:
        return -0.5 * (LOG_2PI + math.log(vv)) - extent**2 / (2.0 * vv)

    # per-axis density at the far corner is unimodal in the variance: check the ends
    log_a = dim * min(axis_log_min(var_floor), axis_log_min(var_ceiling))
    return log_a, log_b


class KLEstimate(NamedTuple):
    value: float
    stderr: float


def kl_divergence_mc(f_logpdf: Callable[[np.ndarray], np.ndarray],
                     f_sampler: Callable[[np.random.Generator, int], np.ndarray],
                     g: MixtureModel, n: int, rng: np.random.Generator) -> KLEstimate:
    """Monte Carlo estimate of ``D(f || g)`` from ``n`` draws of ``f``."""
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    x = np.atleast_2d(f_sampler(rng, n))
    diff = np.asarray(f_logpdf(x), dtype=float) - g.logpdf(x)
    se = float(diff.std(ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
    return KLEstimate(float(diff.mean()), se)


def l1_distance_mc(f_logpdf, f_sampler, g_logpdf, n: int, rng: np.random.Generator) -> KLEstimate:
    """Monte Carlo estimate of ``int |f - g|`` as ``E_f |1 - g/f|``."""
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    x = np.atleast_2d(f_sampler(rng, n))
    vals = np.abs(1.0 - np.exp(np.asarray(g_logpdf(x)) - np.asarray(f_logpdf(x))))
    se = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
    return KLEstimate(float(vals.mean()), se)
