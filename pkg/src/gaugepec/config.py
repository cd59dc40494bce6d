"""Run configuration: a flat, versioned JSON document."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

SCHEMA_VERSION = 1
KNOWN_TASKS = ("learn", "mitigate", "gauge-opt", "report")
ANSATZE = ("pair-z", "ghz", "ring-2local")
TOPOLOGIES = ("pair", "line", "ring")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    n: int
    topology: str
    ansatz: str
    truth: dict = field(default_factory=dict)
    depths: tuple[int, ...] = ()
    target_depths: tuple[int, ...] = ()
    sizes: tuple[int, ...] = ()          # GHZ sweep sizes
    shots: int = 10000
    twirls: int = 10
    seed: int = 0
    exact: bool = True
    tasks: tuple[str, ...] = ("learn", "mitigate", "report")
    plots: bool = False
    name: str = "run"

    def __post_init__(self):
        if self.ansatz not in ANSATZE:
            raise ConfigError(f"unknown ansatz {self.ansatz!r}")
        if self.topology not in TOPOLOGIES:
            raise ConfigError(f"unknown topology {self.topology!r}")
        expected_topology = {"pair-z": "pair", "ghz": "line", "ring-2local": "ring"}
        if self.topology != expected_topology[self.ansatz]:
            raise ConfigError(
                f"ansatz {self.ansatz} runs on topology "
                f"{expected_topology[self.ansatz]}, not {self.topology}"
            )
        if self.ansatz == "pair-z" and self.n != 2:
            raise ConfigError("pair-z requires n = 2")
        if self.ansatz == "ring-2local" and self.n % 4:
            raise ConfigError("ring size must be a multiple of four")
        for t in self.tasks:
            if t not in KNOWN_TASKS:
                raise ConfigError(f"unknown task {t!r}")
        if "gauge-opt" in self.tasks and self.ansatz != "ring-2local":
            raise ConfigError("gauge-opt needs the quasi-local ring ansatz")
        if self.shots < 1 or self.twirls < 1:
            raise ConfigError("shots and twirls must be positive")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        schema = doc.pop("schema", None)
        if schema != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema {schema!r}")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("depths", "target_depths", "sizes", "tasks"):
            if key in doc:
                doc[key] = tuple(doc[key])
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "name": self.name,
            "n": self.n,
            "topology": self.topology,
            "ansatz": self.ansatz,
            "truth": self.truth,
            "depths": list(self.depths),
            "target_depths": list(self.target_depths),
            "sizes": list(self.sizes),
            "shots": self.shots,
            "twirls": self.twirls,
            "seed": self.seed,
            "exact": self.exact,
            "tasks": list(self.tasks),
            "plots": self.plots,
        }
