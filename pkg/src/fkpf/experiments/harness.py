"""Monte Carlo tracking trials: world simulation, leader-node filters, aggregate metrics.

Random streams
--------------
Everything is derived from ``config.seed`` through :func:`fkpf.core.rng_stream`:

* ``(NETWORK,)`` places the sensors once per seed;
* ``(trial, WORLD)`` draws the true trajectory, every satellite's bits and the
  hand-off coins, so all filters on a trial see the same world;
* ``(trial, FILTER, N, t)`` and ``(trial, HANDOFF, N, t)`` drive a filter with
  ``N`` particles.  Filters with the same particle count share these streams
  (common random numbers), which is what makes a candidate and its
  uncompressed baseline identical until their first compression.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..core import ParticleSet, StateVec, rng_stream
from ..errors import DegenerateWeightsError, InvalidArgumentError, InvalidStateError
from ..filtering import predict, residual_resample, update
from ..leader import HandoffPolicy, HandoffRecord, all_mi_scores, empirical_q, handoff_step
from ..models import (BinarySensorModel, DynamicsModel, NetworkTopology, generate_network,
                      log_potential_fn)
from ..subsample import SubsampleConfig
from .config import ExperimentConfig, compression_factor

log = logging.getLogger(__name__)

NETWORK, WORLD, FILTER, HANDOFF = 0, 1, 2, 3

# config fields that do not influence the world or the network
_FILTER_FIELDS = ("N", "N_b", "N_p", "mode", "trials", "reference_N", "workers", "gml_backfit_steps")


@dataclass(frozen=True)
class World:
    truth: np.ndarray  # (T+1, 2)
    bits: np.ndarray  # (T+1, K_s); row 0 is unused
    coins: np.ndarray  # (T+1,); entry 0 is unused


@dataclass(frozen=True)
class Setup:
    config: ExperimentConfig
    topology: NetworkTopology
    sensor: BinarySensorModel
    dynamics: DynamicsModel

    @classmethod
    def from_config(cls, config: ExperimentConfig) -> "Setup":
        topology = generate_network(config.K_l, config.K_s, rng_stream(config.seed, NETWORK))
        return cls(config, topology, BinarySensorModel(config.r_d, config.p_d, config.p_f),
                   DynamicsModel(config.r0, config.noise_amp))


def make_world(setup: Setup, trial: int) -> World:
    cfg = setup.config
    rng = rng_stream(cfg.seed, trial, WORLD)
    truth = np.empty((cfg.T + 1, 2))
    truth[0] = rng.uniform(0.25, 0.75, size=2)
    bits = np.zeros((cfg.T + 1, cfg.K_s), dtype=np.int8)
    coins = np.full(cfg.T + 1, np.nan)
    pos = setup.topology.satellite_positions
    for t in range(1, cfg.T + 1):
        truth[t] = setup.dynamics.sample(truth[t - 1:t], rng)[0]
        p1 = setup.sensor.detect_prob(pos, truth[t])[0]
        bits[t] = rng.random(cfg.K_s) < p1
        coins[t] = rng.random()
    return World(truth, bits, coins)


@dataclass(frozen=True)
class FilterSpec:
    """One filter variant: particle count, hand-off mode and compression size."""

    N: int
    mode: str  # fixed-leader | subsample | parametric | none | centralized
    N_b: int | None = None
    N_p: int | None = None

    @classmethod
    def candidate(cls, cfg: ExperimentConfig) -> "FilterSpec":
        if cfg.mode == "subsample":
            return cls(cfg.N, "subsample", N_b=cfg.N_b)
        if cfg.mode == "parametric":
            return cls(cfg.N, "parametric", N_p=cfg.N_p)
        return cls(cfg.N, cfg.mode)

    @classmethod
    def baseline(cls, cfg: ExperimentConfig) -> "FilterSpec":
        return cls(cfg.N, "subsample", N_b=cfg.N)

    @classmethod
    def reference(cls, cfg: ExperimentConfig) -> "FilterSpec":
        return cls(cfg.reference_N, "subsample", N_b=cfg.reference_N)


@dataclass
class FilterRun:
    estimates: np.ndarray  # (T+1, 2) posterior means
    leaders: np.ndarray  # (T+1,) leader used for the update at t (t=0: initial leader)
    records: list[HandoffRecord]
    degenerate: bool = False


def _policy(spec: FilterSpec, cfg: ExperimentConfig) -> HandoffPolicy | None:
    if spec.mode == "subsample":
        return HandoffPolicy(cfg.lambda_, "subsample", subsample_cfg=SubsampleConfig(spec.N, spec.N_b))
    if spec.mode == "parametric":
        return HandoffPolicy(cfg.lambda_, "parametric", gml_cfg=replace(cfg.gml_config(), N_p=spec.N_p))
    return None


def run_filter(setup: Setup, world: World, spec: FilterSpec, trial: int) -> FilterRun:
    """Run one leader-node filter over a simulated world."""
    cfg, topo = setup.config, setup.topology
    T = world.truth.shape[0] - 1
    rng0 = rng_stream(cfg.seed, trial, FILTER, spec.N, 0)
    pset = ParticleSet.uniform(rng0.uniform(0.0, 1.0, size=(spec.N, 2)))
    scores = all_mi_scores(topo, setup.sensor, pset)
    leader = min(scores, key=lambda c: (-scores[c], c))
    policy = _policy(spec, cfg)

    estimates = np.empty((T + 1, 2))
    estimates[0] = pset.mean()
    leaders = np.empty(T + 1, dtype=np.int64)
    leaders[0] = leader
    records: list[HandoffRecord] = []
    all_pos = topo.satellite_positions
    for t in range(1, T + 1):
        rng = rng_stream(cfg.seed, trial, FILTER, spec.N, t)
        leaders[t] = leader
        if spec.mode == "centralized":
            log_g = log_potential_fn(all_pos, world.bits[t], setup.sensor)
        else:
            sats = list(topo.assignment[leader])
            log_g = log_potential_fn(all_pos[sats], world.bits[t, sats], setup.sensor)
        try:
            pset = residual_resample(update(predict(pset, setup.dynamics, rng), log_g, log=True),
                                     spec.N, rng)
        except DegenerateWeightsError:
            log.warning("trial %d: degenerate weights at t=%d (%s)", trial, t, spec)
            return FilterRun(estimates, leaders, records, degenerate=True)
        if policy is None:
            rec = HandoffRecord(t, 0, 0, leader, leader, 0)
        else:
            hrng = rng_stream(cfg.seed, trial, HANDOFF, spec.N, t)
            leader, pset, rec = handoff_step(leader, pset, policy, topo, setup.sensor, hrng, t=t,
                                             dynamics=setup.dynamics, coin=float(world.coins[t]))
            if spec.mode == "subsample" and spec.N_b == spec.N:
                # an uncompressed hand-off moves the full set; nothing is approximated
                rec = HandoffRecord(t, rec.checked, 0, rec.from_leader, rec.to_leader, 0)
        records.append(rec)
        estimates[t] = pset.mean()
    return FilterRun(estimates, leaders, records)


class RunCache:
    """Memoises filter runs per (world settings, filter spec, trial).

    With ``directory`` set, estimates are also stored as ``.npz`` files so the
    expensive reference filter survives across processes and sessions.
    """

    def __init__(self, directory=None):
        self._mem: dict[tuple, FilterRun] = {}
        self.directory = Path(directory) if directory is not None else None
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def world_key(cfg: ExperimentConfig) -> str:
        d = cfg.to_dict()
        for k in _FILTER_FIELDS:
            d.pop(k, None)
        return json.dumps(d, sort_keys=True)

    def _file(self, key: tuple) -> Path:
        digest = hashlib.sha256(repr(key).encode()).hexdigest()[:24]
        return self.directory / f"run_{digest}.npz"

    def get(self, setup: Setup, world: World, spec: FilterSpec, trial: int) -> FilterRun:
        key = (self.world_key(setup.config), spec, trial)
        hit = self._mem.get(key)
        if hit is not None:
            return hit
        # records are only persisted in memory; reference and baseline runs do not need them on disk
        if self.directory is not None and spec.mode == "subsample" and spec.N_b == spec.N:
            path = self._file(key)
            if path.exists():
                with np.load(path) as z:
                    run = FilterRun(z["estimates"], z["leaders"], [], bool(z["degenerate"]))
                self._mem[key] = run
                return run
            run = run_filter(setup, world, spec, trial)
            np.savez(path, estimates=run.estimates, leaders=run.leaders, degenerate=run.degenerate)
        else:
            run = run_filter(setup, world, spec, trial)
        self._mem[key] = run
        return run


@dataclass
class TrialResult:
    true_states: list[StateVec]
    estimates: list[StateVec]
    reference_estimates: list[StateVec]
    handoffs: list[HandoffRecord]
    baseline_estimates: list[StateVec] | None = None
    degenerate: bool = False

    def __post_init__(self):
        n = len(self.true_states)
        if len(self.estimates) != n or len(self.reference_estimates) != n:
            raise InvalidStateError("trace lengths disagree")

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (np.asarray(self.true_states), np.asarray(self.estimates),
                np.asarray(self.reference_estimates))


def _states(a: np.ndarray) -> list[StateVec]:
    return [StateVec(float(x), float(y)) for x, y in a]


def run_trial(config: ExperimentConfig, trial: int, cache: RunCache | None = None,
              setup: Setup | None = None, with_baseline: bool = False) -> TrialResult:
    """Simulate one world and run the candidate and reference filters on it."""
    if trial < 0:
        raise InvalidArgumentError("trial index must be non-negative")
    setup = setup or Setup.from_config(config)
    cache = cache or RunCache()
    world = make_world(setup, trial)
    cand = cache.get(setup, world, FilterSpec.candidate(config), trial)
    ref = cache.get(setup, world, FilterSpec.reference(config), trial)
    base = cache.get(setup, world, FilterSpec.baseline(config), trial) if with_baseline else None
    degenerate = cand.degenerate or ref.degenerate or (base is not None and base.degenerate)
    return TrialResult(
        _states(world.truth), _states(cand.estimates), _states(ref.estimates), list(cand.records),
        _states(base.estimates) if base is not None else None, degenerate,
    )


def time_averaged_rmsae(estimates: np.ndarray, reference: np.ndarray) -> float:
    """Per-trial RMSAE over t = 1..T."""
    d2 = ((np.asarray(estimates)[1:] - np.asarray(reference)[1:]) ** 2).sum(axis=1)
    return float(math.sqrt(d2.mean()))


def _ratio(num: float, den: float) -> float:
    # a baseline identical to the reference has zero error; so does any candidate equal to it
    if den == 0.0:
        return 1.0 if num == 0.0 else math.inf
    return num / den


def box_stats(values) -> dict[str, float]:
    """Quartiles and Tukey whiskers (most extreme data within 1.5 IQR of the box)."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        return {k: math.nan for k in ("q25", "q50", "q75", "whisker_lo", "whisker_hi", "min", "max")}
    q25, q50, q75 = np.percentile(v, [25, 50, 75])
    iqr = q75 - q25
    lo = v[v >= q25 - 1.5 * iqr].min()
    hi = v[v <= q75 + 1.5 * iqr].max()
    return {"q25": float(q25), "q50": float(q50), "q75": float(q75), "whisker_lo": float(lo),
            "whisker_hi": float(hi), "min": float(v[0]), "max": float(v[-1])}


@dataclass
class AggregateMetrics:
    mode: str
    config: ExperimentConfig
    trial_ids: np.ndarray
    rmse: np.ndarray  # (T+1,)
    rmsae: np.ndarray  # (T+1,)
    deterioration_ratio: np.ndarray  # (trials,)
    quantiles: dict[str, float]
    empirical_q: float
    compression_factor: float
    sq_error: np.ndarray  # (trials, T+1) squared tracking error
    sq_approx: np.ndarray  # (trials, T+1) squared deviation from the reference
    handoffs: list[tuple[int, HandoffRecord]] = field(default_factory=list)
    n_degenerate: int = 0

    def final_quarter_rmse(self) -> float:
        T = self.rmse.size - 1
        start = T - T // 4 + 1
        return float(np.sqrt(self.sq_error[:, start:].mean()))


def _trial_arrays(config: ExperimentConfig, trial: int, cache: RunCache, setup: Setup):
    world = make_world(setup, trial)
    cand = cache.get(setup, world, FilterSpec.candidate(config), trial)
    ref = cache.get(setup, world, FilterSpec.reference(config), trial)
    base = cache.get(setup, world, FilterSpec.baseline(config), trial)
    degenerate = cand.degenerate or ref.degenerate or base.degenerate
    return world.truth, cand.estimates, ref.estimates, base.estimates, cand.records, degenerate


def _worker(args):
    config, trials = args
    setup = Setup.from_config(config)
    cache = RunCache()
    return [_trial_arrays(config, t, cache, setup) for t in trials]


def run_monte_carlo(config: ExperimentConfig, cache: RunCache | None = None,
                    setup: Setup | None = None) -> AggregateMetrics:
    """Run ``config.trials`` trials and reduce them in trial order.

    With ``config.workers > 1`` trials are split into contiguous blocks across
    processes; each trial's streams depend only on its index, so the result is
    the same for any worker count.
    """
    trials = list(range(config.trials))
    if config.workers > 1:
        blocks = [b.tolist() for b in np.array_split(trials, config.workers) if b.size]
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            rows = [r for block in pool.map(_worker, [(config, b) for b in blocks]) for r in block]
    else:
        setup = setup or Setup.from_config(config)
        cache = cache or RunCache()
        rows = [_trial_arrays(config, t, cache, setup) for t in trials]

    keep = [i for i, r in enumerate(rows) if not r[5]]
    n_bad = len(rows) - len(keep)
    if n_bad:
        log.warning("%d of %d trials excluded for degenerate weights", n_bad, len(rows))
    if not keep:
        raise DegenerateWeightsError("every trial degenerated")
    truth = np.stack([rows[i][0] for i in keep])
    est = np.stack([rows[i][1] for i in keep])
    ref = np.stack([rows[i][2] for i in keep])
    base = np.stack([rows[i][3] for i in keep])
    sq_err = ((est - truth) ** 2).sum(axis=2)
    sq_app = ((est - ref) ** 2).sum(axis=2)
    ratios = np.array([
        _ratio(time_averaged_rmsae(est[k], ref[k]), time_averaged_rmsae(base[k], ref[k]))
        for k in range(len(keep))
    ])
    handoffs = [(trials[i], r) for i in keep for r in rows[i][4]]
    records = [r for _, r in handoffs]
    q_hat = empirical_q(records) if records else 0.0
    try:
        cf = compression_factor(config)
    except InvalidArgumentError:
        cf = math.nan
    return AggregateMetrics(
        mode=config.mode, config=config, trial_ids=np.array([trials[i] for i in keep]),
        rmse=np.sqrt(sq_err.mean(axis=0)), rmsae=np.sqrt(sq_app.mean(axis=0)),
        deterioration_ratio=ratios, quantiles=box_stats(ratios), empirical_q=q_hat,
        compression_factor=cf, sq_error=sq_err, sq_approx=sq_app, handoffs=handoffs,
        n_degenerate=n_bad,
    )
