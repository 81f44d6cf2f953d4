"""Leader-node hand-off: mutual-information leader choice gated by a biased coin."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import ParticleSet, _require_normalized
from .errors import InvalidArgumentError
from .filtering import predict
from .gml import GmlConfig, gml_fit, sample_mixture
from .models import BinarySensorModel, DynamicsModel, NetworkTopology
from .subsample import SubsampleConfig, compress_and_rebuild

MODES = ("subsample", "parametric", "none")
EXACT_MI_MAX_SENSORS = 10


@dataclass(frozen=True)
class HandoffPolicy:
    """How often to consider a hand-off and how to compress the posterior when it happens.

    ``lambda_`` is the probability of running the leader check at a step.
    ``exact_mi`` switches scoring from the per-sensor sum to exact joint mutual
    information (only for leaders with at most 10 satellites).
    ``candidate_radius`` restricts the candidate leaders to those within that
    distance of the current one; ``None`` means every leader is a candidate.
    """

    lambda_: float = 0.2
    mode: str = "subsample"
    subsample_cfg: SubsampleConfig | None = None
    gml_cfg: GmlConfig | None = None
    exact_mi: bool = False
    candidate_radius: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.lambda_ <= 1.0:
            raise InvalidArgumentError("lambda must lie in [0, 1]")
        if self.mode not in MODES:
            raise InvalidArgumentError(f"unknown hand-off mode {self.mode!r}")
        if self.mode == "subsample" and self.subsample_cfg is None:
            raise InvalidArgumentError("subsample mode needs subsample_cfg")
        if self.mode == "parametric" and self.gml_cfg is None:
            raise InvalidArgumentError("parametric mode needs gml_cfg")

    def values_transmitted(self) -> int:
        if self.mode == "subsample":
            return self.subsample_cfg.N_b
        if self.mode == "parametric":
            return 5 * self.gml_cfg.N_p
        return 0


@dataclass(frozen=True)
class HandoffRecord:
    t: int
    checked: int
    delta: int
    from_leader: int
    to_leader: int
    values_transmitted: int
    path: str = ""  # "replicate", "resample", "parametric" or "" when delta = 0

    CSV_COLUMNS = ("t", "checked", "delta", "from", "to", "values_transmitted")

    def row(self) -> tuple:
        return (self.t, self.checked, self.delta, self.from_leader, self.to_leader,
                self.values_transmitted)


def binary_entropy(p) -> np.ndarray:
    """Entropy in bits of a Bernoulli(p) variable; 0 at p in {0, 1}."""
    p = np.asarray(p, dtype=float)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(np.where(p > 0, p * np.log2(p), 0.0) + np.where(q > 0, q * np.log2(q), 0.0))
    return h


def sensor_mutual_information(sensor_pos: np.ndarray, model: BinarySensorModel,
                              pset: ParticleSet) -> np.ndarray:
    """Exact MI (bits) between the state and each single sensor's bit; shape ``(S,)``."""
    _require_normalized(pset)
    sensor_pos = np.asarray(sensor_pos, dtype=float).reshape(-1, 2)
    if sensor_pos.shape[0] == 0:
        return np.zeros(0)
    pi = model.detect_prob(sensor_pos, pset.states)  # (n, S)
    w = pset.weights
    mi = binary_entropy(w @ pi) - w @ binary_entropy(pi)
    return np.maximum(mi, 0.0)


def joint_mutual_information(sensor_pos: np.ndarray, model: BinarySensorModel,
                             pset: ParticleSet) -> float:
    """Exact MI between the state and the joint bit vector of a sensor group.

    Enumerates all ``2^S`` outcomes, so it is limited to ``S <= 10``.  Sensors
    are conditionally independent given the state, hence
    ``H(Y | X = x) = sum_j H_b(pi_j(x))``.
    """
    _require_normalized(pset)
    sensor_pos = np.asarray(sensor_pos, dtype=float).reshape(-1, 2)
    S = sensor_pos.shape[0]
    if S == 0:
        return 0.0
    if S > EXACT_MI_MAX_SENSORS:
        raise InvalidArgumentError(f"exact MI limited to {EXACT_MI_MAX_SENSORS} sensors, got {S}")
    pi = model.detect_prob(sensor_pos, pset.states)
    w = pset.weights
    outcomes = np.array(list(itertools.product((0, 1), repeat=S)), dtype=bool)  # (2^S, S)
    # P(y | x_k) for every outcome and particle
    lik = np.prod(np.where(outcomes[:, None, :], pi[None], 1.0 - pi[None]), axis=2)
    p_y = lik @ w
    with np.errstate(divide="ignore", invalid="ignore"):
        h_y = -np.sum(np.where(p_y > 0, p_y * np.log2(p_y), 0.0))
    h_y_given_x = w @ binary_entropy(pi).sum(axis=1)
    return float(max(h_y - h_y_given_x, 0.0))


def mi_score(leader: int, topology: NetworkTopology, sensor_model: BinarySensorModel,
             pset: ParticleSet, exact: bool = False) -> float:
    """Information the leader's satellites would carry about the state.

    By default the sum of per-satellite mutual informations; with ``exact=True``
    the joint mutual information of the satellite group.
    """
    sats = list(topology.assignment[leader])
    pos = topology.satellite_positions[sats] if sats else np.empty((0, 2))
    if exact:
        return joint_mutual_information(pos, sensor_model, pset)
    return float(sensor_mutual_information(pos, sensor_model, pset).sum())


def all_mi_scores(topology: NetworkTopology, sensor_model: BinarySensorModel, pset: ParticleSet,
                  candidates: Iterable[int] | None = None, exact: bool = False) -> dict[int, float]:
    """Scores for many leaders, sharing one per-satellite MI evaluation."""
    candidates = list(range(topology.K_l)) if candidates is None else list(candidates)
    if exact:
        return {c: mi_score(c, topology, sensor_model, pset, exact=True) for c in candidates}
    per_sat = sensor_mutual_information(topology.satellite_positions, sensor_model, pset)
    return {c: float(per_sat[list(topology.assignment[c])].sum()) for c in candidates}


def select_leader(candidates: Sequence[int], topology: NetworkTopology,
                  sensor_model: BinarySensorModel, pset: ParticleSet, exact: bool = False) -> int:
    """Highest-scoring candidate; ties go to the lowest id."""
    if not candidates:
        raise InvalidArgumentError("need at least one candidate leader")
    scores = all_mi_scores(topology, sensor_model, pset, candidates, exact=exact)
    best = max(scores.values())
    return min(c for c, s in scores.items() if s == best)


def candidate_leaders(current: int, topology: NetworkTopology, radius: float | None) -> list[int]:
    if radius is None:
        return list(range(topology.K_l))
    d = np.linalg.norm(topology.leader_positions - topology.leader_positions[current], axis=1)
    return [int(i) for i in np.flatnonzero(d <= radius)]


def handoff_step(current_leader: int, pset: ParticleSet, policy: HandoffPolicy,
                 topology: NetworkTopology, sensor_model: BinarySensorModel,
                 rng: np.random.Generator, t: int = 0, dynamics: DynamicsModel | None = None,
                 coin: float | None = None) -> tuple[int, ParticleSet, HandoffRecord]:
    """Possibly move the filter to a new leader, compressing the posterior on the way.

    A check happens when the coin (a uniform draw, taken from ``rng`` unless
    supplied) falls below ``policy.lambda_``.  Leaders are scored against the
    one-step-predicted cloud when ``dynamics`` is given, else against ``pset``.
    The set is compressed and rebuilt only if the winner differs from the
    current leader; otherwise it is returned untouched.
    """
    idle = HandoffRecord(t, 0, 0, current_leader, current_leader, 0)
    if policy.mode == "none":
        return current_leader, pset, idle
    u = rng.random() if coin is None else coin
    if not u < policy.lambda_:
        return current_leader, pset, idle

    scored = predict(pset, dynamics, rng) if dynamics is not None else pset
    candidates = candidate_leaders(current_leader, topology, policy.candidate_radius)
    winner = select_leader(candidates, topology, sensor_model, scored, exact=policy.exact_mi)
    if winner == current_leader:
        return current_leader, pset, HandoffRecord(t, 1, 0, current_leader, current_leader, 0)

    if policy.mode == "subsample":
        cfg = policy.subsample_cfg
        if cfg.N != pset.count:
            cfg = SubsampleConfig(pset.count, cfg.N_b)
        new_set, path = compress_and_rebuild(pset, cfg, rng)
        sent = cfg.N_b
    else:
        mixture = gml_fit(pset, policy.gml_cfg)
        new_set = sample_mixture(mixture, pset.count, rng)
        path = "parametric"
        sent = mixture.values_per_component * mixture.N_p
    return winner, new_set, HandoffRecord(t, 1, 1, current_leader, winner, sent, path)


def empirical_q(records: Sequence[HandoffRecord]) -> float:
    """Fraction of steps at which a compression hand-off took place."""
    if not records:
        raise InvalidArgumentError("need at least one record")
    return float(np.mean([r.delta for r in records]))
