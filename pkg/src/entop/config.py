"""Experiment configuration and run artifacts for the CLI.

Configurations are flat JSON documents ``{"schema": 1, "command": ...,
"params": {...}}``. Validation is strict: unknown parameter keys are
rejected so a typo cannot silently fall back to a default. Artifacts
record what a command produced (config snapshot, input hash, output
files, timings) so a run can be audited and replayed.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field

from .errors import ConfigError

__all__ = ["ExperimentConfig", "RunArtifact", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1

# command -> (required keys, {optional key: default})
_PARAM_TABLE = {
    "sweep": (
        {"epsilons"},
        {
            "data": None,
            "system": None,
            "n": 1000,
            "k": 10,
            "variant": "stationary",
            "cost": None,
            "periods": None,
            "seed": 0,
            "tol": None,
            "max_iter": None,
        },
    ),
    "embed": (
        {"epsilon"},
        {
            "data": None,
            "system": None,
            "n": 1000,
            "k": 10,
            "indices": [2],
            "variant": "stationary",
            "cost": None,
            "periods": None,
            "seed": 0,
            "tol": None,
            "max_iter": None,
        },
    ),
    "extend": (
        {"spectrum", "data", "new_points"},
        {
            "indices": [2],
            "k": None,
            "cost": "sqeuclidean",
            "periods": None,
            "seed": 0,
            "tol": None,
            "max_iter": None,
        },
    ),
    "converge": (
        {"epsilons", "ns"},
        {
            "sigma": 0.05,
            "shifts": [0.0, 0.3],
            "weights": None,
            "dims": None,
            "dims_n": 800,
            "n_seeds": 20,
            "n_mc": 20000,
            "seed": 0,
            "resolution": 512,
            "bias_rows": True,
        },
    ),
    "compare-ulam": (
        set(),
        {
            "d": 2,
            "sigma": 0.05,
            "tau": 0.2,
            "n": 500,
            "epsilons": None,
            "k": 10,
            "seed": 0,
            "ring_seed": 0,
        },
    ),
    "counterexample": (
        set(),
        {
            "ns": [50, 100, 200, 400, 800, 1600],
            "epsilon": 0.1,
            "n_mc": 20000,
            "seed": 0,
            "double": True,
        },
    ),
    "synth": (
        {"system", "n"},
        {
            "d": None,
            "sigma": None,
            "shifts": None,
            "weights": None,
            "tau": 0.2,
            "seed": 0,
            "ring_seed": 0,
            "out": "data.csv",
        },
    ),
}

_SYSTEM_KEYS = {"kind", "d", "sigma", "shifts", "weights", "tau", "ring_seed"}


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated command configuration."""

    command: str
    params: dict = field(default_factory=dict)
    schema: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.schema != SCHEMA_VERSION:
            raise ConfigError(f"unsupported config schema {self.schema!r}")
        if self.command not in _PARAM_TABLE:
            raise ConfigError(
                f"unknown command {self.command!r}; expected one of {sorted(_PARAM_TABLE)}"
            )
        required, optional = _PARAM_TABLE[self.command]
        unknown = set(self.params) - required - set(optional)
        if unknown:
            raise ConfigError(
                f"unknown parameter(s) for {self.command}: {sorted(unknown)}"
            )
        missing = required - set(self.params)
        if missing:
            raise ConfigError(
                f"missing required parameter(s) for {self.command}: {sorted(missing)}"
            )
        system = self.params.get("system")
        if isinstance(system, dict):
            bad = set(system) - _SYSTEM_KEYS
            if bad:
                raise ConfigError(f"unknown system key(s): {sorted(bad)}")

    def get(self, key: str):
        """Parameter value with the command's default applied."""
        required, optional = _PARAM_TABLE[self.command]
        if key in self.params:
            return self.params[key]
        if key in optional:
            return optional[key]
        raise KeyError(f"{key!r} is not a parameter of {self.command}")

    @classmethod
    def from_mapping(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config document must be a JSON object")
        extra = set(doc) - {"schema", "command", "params"}
        if extra:
            raise ConfigError(f"unknown top-level config key(s): {sorted(extra)}")
        if "command" not in doc:
            raise ConfigError("config needs a 'command' field")
        params = doc.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError("'params' must be an object")
        return cls(
            command=doc["command"],
            params=dict(params),
            schema=doc.get("schema", SCHEMA_VERSION),
        )

    @classmethod
    def from_json(cls, text_or_path) -> "ExperimentConfig":
        text = str(text_or_path)
        if not text.lstrip().startswith("{"):
            try:
                with open(text) as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read config file: {exc}") from None
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_mapping(doc)

    def to_mapping(self) -> dict:
        return {"schema": self.schema, "command": self.command, "params": dict(self.params)}

    def to_json(self) -> str:
        return json.dumps(self.to_mapping(), indent=2, sort_keys=True)


@dataclass
class RunArtifact:
    """Record of one command run."""

    command: str
    config: dict
    input_sha256: str = None
    outputs: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    created: str = field(default_factory=lambda: time.strftime("%Y-%m-%dT%H:%M:%S"))
    schema: int = SCHEMA_VERSION

    def to_mapping(self) -> dict:
        return {
            "schema": self.schema,
            "command": self.command,
            "config": self.config,
            "input_sha256": self.input_sha256,
            "outputs": dict(self.outputs),
            "timings": dict(self.timings),
            "summary": dict(self.summary),
            "created": self.created,
        }

    def write(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_mapping(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def sha256_bytes(*chunks: bytes) -> str:
    h = hashlib.sha256()
    for c in chunks:
        h.update(c)
    return h.hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()
