"""JSON run configuration.

A run file has up to four sections, all optional::

    {
      "physics":    {"mass": 1, "moment": 1, "gradient": 5, "offset": 0,
                     "interaction_time": 1, "halfwidth": 1, "hbar": 1},
      "integrator": {"t_end": 5, "n_steps": 500, "commitment_window": 0.2,
                     "commitment_margin": 2},
      "session":    {"n_rounds": 10000, "test_fraction": 0.5,
                     "kappa_magnitude": 100, "seed": 0},
      "adversary":  {"model": "hidden-variable"}
    }

Unknown sections or keys are rejected by name, and every bound is checked
before anything is simulated.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .adversary import ADVERSARY_MODELS
from .dynamics import IntegratorConfig, PhysicalParams
from .errors import ConfigError
from .protocol import SessionConfig

SESSION_KEYS = ("n_rounds", "test_fraction", "kappa_magnitude", "seed", "flip_kappa", "max_retries")
ADVERSARY_KEYS = ("model", "knows_hidden", "eve_integrates")
_BOOL_KEYS = {"flip_kappa", "knows_hidden", "eve_integrates"}
_INT_KEYS = {"n_steps", "n_rounds", "seed", "max_retries"}


@dataclass(frozen=True)
class AdversaryConfig:
    model: str = "none"
    knows_hidden: bool = True
    eve_integrates: bool = False

    def __post_init__(self):
        if self.model not in ADVERSARY_MODELS:
            raise ConfigError(f"adversary.model must be one of {', '.join(ADVERSARY_MODELS)}; got {self.model!r}")


@dataclass(frozen=True)
class RunConfig:
    session: SessionConfig = field(default_factory=SessionConfig)
    adversary: AdversaryConfig = field(default_factory=AdversaryConfig)

    @property
    def physics(self) -> PhysicalParams:
        return self.session.physics

    @property
    def integrator(self) -> IntegratorConfig:
        return self.session.integrator

    def with_seed(self, seed: int) -> "RunConfig":
        return dataclasses.replace(self, session=dataclasses.replace(self.session, seed=seed))


def _check_section(name, section, allowed):
    if not isinstance(section, dict):
        raise ConfigError(f"section {name!r} must be a JSON object")
    for key, value in section.items():
        if key not in allowed:
            raise ConfigError(f"unknown key {name}.{key}; allowed: {', '.join(allowed)}")
        if key in _BOOL_KEYS:
            if not isinstance(value, bool):
                raise ConfigError(f"{name}.{key} must be true or false")
        elif key == "model":
            if not isinstance(value, str):
                raise ConfigError(f"{name}.{key} must be a string")
        elif key in _INT_KEYS:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{name}.{key} must be an integer, got {value!r}")
        elif isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name}.{key} must be a number, got {value!r}")
    return {k: (float(v) if k not in _INT_KEYS | _BOOL_KEYS and k != "model" else v) for k, v in section.items()}


def parse_config(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    sections = {"physics", "integrator", "session", "adversary"}
    for key in doc:
        if key not in sections:
            raise ConfigError(f"unknown section {key!r}; allowed: {', '.join(sorted(sections))}")
    physics = PhysicalParams(**_check_section("physics", doc.get("physics", {}),
                                              [f.name for f in dataclasses.fields(PhysicalParams)]))
    integrator = IntegratorConfig(**_check_section("integrator", doc.get("integrator", {}),
                                                   [f.name for f in dataclasses.fields(IntegratorConfig)]))
    session = SessionConfig(physics=physics, integrator=integrator,
                            **_check_section("session", doc.get("session", {}), SESSION_KEYS))
    adversary = AdversaryConfig(**_check_section("adversary", doc.get("adversary", {}), ADVERSARY_KEYS))
    return RunConfig(session, adversary)


def load_config(path: str | Path | None) -> RunConfig:
    """Read and validate a run file; ``None`` gives the defaults.

    Malformed JSON raises :class:`ConfigError`; a missing or unreadable file
    raises ``OSError``.
    """
    if path is None:
        return RunConfig()
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(doc)


def config_to_dict(cfg: RunConfig) -> dict:
    s = dataclasses.asdict(cfg.session)
    return {
        "physics": s.pop("physics"),
        "integrator": s.pop("integrator"),
        "session": s,
        "adversary": dataclasses.asdict(cfg.adversary),
    }
