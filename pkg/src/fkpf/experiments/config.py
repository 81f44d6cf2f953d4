"""Experiment configuration with a JSON form that mirrors the field names."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from ..errors import InvalidArgumentError
from ..gml import GmlConfig
from ..models import connectivity_radius

MODES = ("fixed-leader", "subsample", "parametric", "none", "centralized")


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings for a Monte Carlo tracking experiment.

    ``r_d`` defaults to the connectivity radius of the satellite layout.
    ``N_b`` defaults to ``N`` (no compression) and ``N_p`` to 24.  The JSON key
    for ``lambda_`` is ``"lambda"``.
    """

    N: int = 300
    N_b: int | None = None
    N_p: int = 24
    lambda_: float = 0.2
    K_l: int = 20
    K_s: int = 200
    r0: float = 0.02
    noise_amp: float = 0.005
    p_d: float = 0.9
    p_f: float = 0.05
    r_d: float | None = None
    T: int = 100
    trials: int = 200
    mode: str = "subsample"
    reference_N: int = 3000
    seed: int = 0
    workers: int = 1
    gml_backfit_steps: int = 5

    def __post_init__(self):
        if self.N_b is None:
            object.__setattr__(self, "N_b", self.N)
        if self.r_d is None:
            object.__setattr__(self, "r_d", connectivity_radius(self.K_s))
        for name in ("N", "N_b", "N_p", "K_l", "K_s", "T", "trials", "reference_N", "workers"):
            if getattr(self, name) < 1:
                raise InvalidArgumentError(f"{name} must be >= 1")
        if self.N_b > self.N:
            raise InvalidArgumentError("N_b must not exceed N")
        if not 0.0 <= self.lambda_ <= 1.0:
            raise InvalidArgumentError("lambda must lie in [0, 1]")
        if self.mode not in MODES:
            raise InvalidArgumentError(f"unknown mode {self.mode!r}")
        if self.seed < 0:
            raise InvalidArgumentError("seed must be non-negative")

    def gml_config(self) -> GmlConfig:
        return GmlConfig(N_p=self.N_p, backfit_steps=self.gml_backfit_steps)

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lambda_")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        if "lambda" in doc:
            doc["lambda_"] = doc.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise InvalidArgumentError(f"unknown config keys {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def compression_factor(config: ExperimentConfig) -> float:
    """Particle count divided by the number of scalars sent at a hand-off (2-D states)."""
    if config.mode == "subsample":
        return config.N / config.N_b
    if config.mode == "parametric":
        return 2.0 * config.N / (5.0 * config.N_p)
    raise InvalidArgumentError(f"mode {config.mode!r} does not compress")
