"""Target dynamics, binary proximity sensors and random sensor-network layouts."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .core import StateVec
from .errors import InvalidArgumentError

TOPOLOGY_FORMAT_VERSION = 1


@dataclass(frozen=True)
class DynamicsModel:
    """Fixed-length random-direction step plus a small uniform jitter.

    ``X_t = X_{t-1} + r0 (cos phi, sin phi) + u`` with ``phi ~ U[-pi, pi]`` and
    each component of ``u`` drawn from ``noise_amp * U[-1, 1]``.
    """

    r0: float = 0.02
    noise_amp: float = 0.005
    boundary: str = "reflect"

    def __post_init__(self):
        if not self.r0 > 0:
            raise InvalidArgumentError("r0 must be positive")
        if self.noise_amp < 0:
            raise InvalidArgumentError("noise_amp must be non-negative")
        if self.boundary not in ("reflect", "none"):
            raise InvalidArgumentError(f"unknown boundary policy {self.boundary!r}")

    def sample(self, states: np.ndarray, rng: np.random.Generator, phi=None) -> np.ndarray:
        """Propagate an ``(n, 2)`` array of states one step."""
        states = np.asarray(states, dtype=float)
        n = states.shape[0]
        if phi is None:
            phi = rng.uniform(-np.pi, np.pi, size=n)
        else:
            phi = np.broadcast_to(np.asarray(phi, dtype=float), (n,))
        step = self.r0 * np.column_stack((np.cos(phi), np.sin(phi)))
        out = states + step
        if self.noise_amp > 0:
            out = out + self.noise_amp * rng.uniform(-1.0, 1.0, size=(n, 2))
        if self.boundary == "reflect":
            out = reflect_unit(out)
        return out


def reflect_unit(x: np.ndarray) -> np.ndarray:
    """Specular reflection into [0, 1], valid for any overshoot."""
    y = np.mod(x, 2.0)
    return np.where(y > 1.0, 2.0 - y, y)


def propagate(state, model: DynamicsModel, rng: np.random.Generator, phi: float | None = None) -> StateVec:
    out = model.sample(np.asarray(state, dtype=float).reshape(1, 2), rng, phi=phi)[0]
    return StateVec(float(out[0]), float(out[1]))


@dataclass(frozen=True)
class BinarySensorModel:
    r_d: float
    p_d: float = 0.9
    p_f: float = 0.05

    def __post_init__(self):
        if not self.r_d > 0:
            raise InvalidArgumentError("r_d must be positive")
        # p_f = 0 and p_d = 1 are accepted for deterministic-sensor checks
        if not 0.0 <= self.p_f < self.p_d <= 1.0:
            raise InvalidArgumentError("need 0 <= p_f < p_d <= 1")

    def detect_prob(self, sensor_pos: np.ndarray, states: np.ndarray) -> np.ndarray:
        """P(Y=1 | x) for every (state, sensor) pair; shape ``(n, S)``."""
        inside = in_range(sensor_pos, states, self.r_d)
        return np.where(inside, self.p_d, self.p_f)


def in_range(sensor_pos: np.ndarray, states: np.ndarray, radius: float) -> np.ndarray:
    sensor_pos = np.asarray(sensor_pos, dtype=float).reshape(-1, 2)
    states = np.asarray(states, dtype=float).reshape(-1, 2)
    d2 = (
        (states[:, None, 0] - sensor_pos[None, :, 0]) ** 2
        + (states[:, None, 1] - sensor_pos[None, :, 1]) ** 2
    )
    return d2 <= radius * radius


@dataclass(frozen=True)
class SensorNode:
    id: int
    position: StateVec
    kind: str  # "leader" | "satellite"


@dataclass(frozen=True, eq=False)
class NetworkTopology:
    """Leader and satellite positions plus the satellite-to-leader assignment.

    Leader and satellite ids are separate index spaces: ``0..K_l-1`` and
    ``0..K_s-1`` respectively.  A satellite may serve several leaders.
    """

    leader_positions: np.ndarray
    satellite_positions: np.ndarray
    r_c: float
    assignment: Mapping[int, tuple[int, ...]]
    metadata: dict = field(default_factory=dict)

    @property
    def K_l(self) -> int:
        return self.leader_positions.shape[0]

    @property
    def K_s(self) -> int:
        return self.satellite_positions.shape[0]

    @property
    def leaders(self) -> list[SensorNode]:
        return [
            SensorNode(i, StateVec(*map(float, p)), "leader")
            for i, p in enumerate(self.leader_positions)
        ]

    @property
    def satellites(self) -> list[SensorNode]:
        return [
            SensorNode(j, StateVec(*map(float, p)), "satellite")
            for j, p in enumerate(self.satellite_positions)
        ]

    def satellite(self, j: int) -> SensorNode:
        return SensorNode(j, StateVec(*map(float, self.satellite_positions[j])), "satellite")

    def to_dict(self) -> dict:
        return {
            "version": TOPOLOGY_FORMAT_VERSION,
            "r_c": self.r_c,
            "leaders": self.leader_positions.tolist(),
            "satellites": self.satellite_positions.tolist(),
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "NetworkTopology":
        version = doc.get("version")
        if version != TOPOLOGY_FORMAT_VERSION:
            raise InvalidArgumentError(f"unsupported topology version {version!r}")
        leaders = np.asarray(doc["leaders"], dtype=float).reshape(-1, 2)
        sats = np.asarray(doc["satellites"], dtype=float).reshape(-1, 2)
        return build_topology(leaders, sats, float(doc["r_c"]), doc.get("metadata", {}))

    @classmethod
    def from_json(cls, text: str) -> "NetworkTopology":
        return cls.from_dict(json.loads(text))


def connectivity_radius(K_s: int) -> float:
    return math.sqrt(2.0 * math.log(K_s) / K_s)


def build_topology(leader_positions, satellite_positions, r_c: float, metadata=None) -> NetworkTopology:
    leaders = np.asarray(leader_positions, dtype=float).reshape(-1, 2)
    sats = np.asarray(satellite_positions, dtype=float).reshape(-1, 2)
    within = in_range(leaders, sats, r_c)  # (K_s, K_l)
    assignment = {
        i: tuple(int(j) for j in np.flatnonzero(within[:, i])) for i in range(leaders.shape[0])
    }
    leaders.setflags(write=False)
    sats.setflags(write=False)
    return NetworkTopology(leaders, sats, float(r_c), assignment, dict(metadata or {}))


def generate_network(K_l: int, K_s: int, rng: np.random.Generator, r_c: float | None = None) -> NetworkTopology:
    """Place leaders and satellites uniformly on the unit square."""
    if K_l < 1 or K_s < 1:
        raise InvalidArgumentError("K_l and K_s must be >= 1")
    leaders = rng.uniform(0.0, 1.0, size=(K_l, 2))
    sats = rng.uniform(0.0, 1.0, size=(K_s, 2))
    metadata = {}
    if r_c is None:
        r_c = connectivity_radius(K_s)
        if r_c == 0.0:
            metadata["warning"] = "K_s = 1 gives r_c = 0; leaders only reach co-located satellites"
    return build_topology(leaders, sats, r_c, metadata)


def likelihood(sensor: SensorNode, model: BinarySensorModel, y: int, state) -> float:
    if sensor.kind != "satellite":
        raise InvalidArgumentError("only satellites take measurements")
    p1 = float(model.detect_prob(np.asarray(sensor.position), np.asarray(state))[0, 0])
    return p1 if y else 1.0 - p1


def log_potential_fn(sensor_pos: np.ndarray, bits: np.ndarray, model: BinarySensorModel):
    """Vectorised log-likelihood of a bit vector, as a function of states.

    Summing logs avoids underflow when many sensors report at once (the
    centralized filter uses all ``K_s`` satellites).
    """
    sensor_pos = np.asarray(sensor_pos, dtype=float).reshape(-1, 2)
    bits = np.asarray(bits).astype(bool).reshape(-1)
    with np.errstate(divide="ignore"):
        log_in = np.where(bits, np.log(model.p_d), np.log1p(-model.p_d))
        log_out = np.where(bits, np.log(model.p_f), np.log1p(-model.p_f))

    def log_g(states: np.ndarray) -> np.ndarray:
        if sensor_pos.shape[0] == 0:
            return np.zeros(np.asarray(states).shape[0])
        inside = in_range(sensor_pos, states, model.r_d)
        return np.where(inside, log_in, log_out).sum(axis=1)

    return log_g


def _observed_bits(leader: int, topology: NetworkTopology, observations: Mapping[int, int]) -> tuple:
    sats = topology.assignment[leader]
    missing = [j for j in sats if j not in observations]
    if missing:
        raise InvalidArgumentError(f"observations missing satellites {missing}")
    extra = set(observations) - set(sats)
    if extra:
        raise InvalidArgumentError(f"observations for unassigned satellites {sorted(extra)}")
    return sats, np.array([observations[j] for j in sats], dtype=np.int8)


def joint_potential(leader: int, topology: NetworkTopology, model: BinarySensorModel,
                    observations: Mapping[int, int], state) -> float:
    """Product of the per-satellite likelihoods for one leader's observations."""
    sats, bits = _observed_bits(leader, topology, observations)
    log_g = log_potential_fn(topology.satellite_positions[list(sats)], bits, model)
    return float(np.exp(log_g(np.asarray(state, dtype=float).reshape(1, 2))[0]))


def leader_log_potential(leader: int, topology: NetworkTopology, model: BinarySensorModel,
                         observations: Mapping[int, int]):
    sats, bits = _observed_bits(leader, topology, observations)
    return log_potential_fn(topology.satellite_positions[list(sats)], bits, model)


def simulate_all_observations(topology: NetworkTopology, model: BinarySensorModel,
                              true_state, rng: np.random.Generator) -> np.ndarray:
    """One Bernoulli bit for every satellite in the network."""
    p1 = model.detect_prob(topology.satellite_positions, np.asarray(true_state, dtype=float))[0]
    return (rng.random(topology.K_s) < p1).astype(np.int8)


def simulate_observations(leader: int, topology: NetworkTopology, model: BinarySensorModel,
                          true_state, rng: np.random.Generator) -> dict[int, int]:
    if leader not in topology.assignment:
        raise InvalidArgumentError(f"unknown leader {leader}")
    sats = topology.assignment[leader]
    pos = topology.satellite_positions[list(sats)] if sats else np.empty((0, 2))
    p1 = model.detect_prob(pos, np.asarray(true_state, dtype=float))[0] if sats else np.empty(0)
    draws = rng.random(len(sats)) < p1
    return {j: int(b) for j, b in zip(sats, draws)}
