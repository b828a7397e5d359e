"""Declarative experiment configuration.

Configs are plain text: `key: value` lines with indentation for nesting.
Values parse as int, float, bool, or string; lists are comma-separated in
brackets. Canned reproduction configs live in the package assets so each
reported number maps to an exact setting.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import Any

VALID_WRAPPERS = ("none", "rae", "rac")
VALID_ESTIMATOR_MODES = ("online", "offline")
VALID_ENVS = ("cartpole", "cartpole_plus", "turf", "cliff")
VALID_AGENTS = ("ppo", "random")


def _parse_scalar(text: str) -> Any:
    text = text.strip()
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        return [_parse_scalar(v) for v in inner.split(",")] if inner else []
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def parse_config_text(text: str) -> dict:
    """Parse the indented key/value format into nested dicts."""
    root: dict = {}
    stack: list[tuple[int, dict]] = [(-1, root)]
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].rstrip()
        if not stripped.strip():
            continue
        indent = len(stripped) - len(stripped.lstrip())
        if ":" not in stripped:
            raise ValueError(f"line {lineno}: expected 'key: value'")
        key, _, value = stripped.lstrip().partition(":")
        key = key.strip()
        while stack and indent <= stack[-1][0]:
            stack.pop()
        container = stack[-1][1]
        if value.strip() == "":
            child: dict = {}
            container[key] = child
            stack.append((indent, child))
        else:
            container[key] = _parse_scalar(value)
    return root


def dump_config(data: dict, indent: int = 0) -> str:
    lines = []
    for key, value in data.items():
        pad = " " * indent
        if isinstance(value, dict):
            lines.append(f"{pad}{key}:")
            lines.append(dump_config(value, indent + 2))
        elif isinstance(value, list):
            lines.append(f"{pad}{key}: [{', '.join(str(v) for v in value)}]")
        else:
            lines.append(f"{pad}{key}: {value}")
    return "\n".join(lines)


@dataclass
class ExperimentConfig:
    """Everything a run needs: environment, agent, wrapper, budgets, seeds."""

    name: str
    env: str
    agent: str = "ppo"
    wrapper: str = "none"            # none | rae | rac
    estimator_mode: str = "online"   # online | offline
    seeds: list[int] = field(default_factory=lambda: [0])
    step_budget: int = 100_000
    out_dir: str = "runs"

    # environment parameters
    env_params: dict = field(default_factory=dict)

    # wrapper thresholds
    beta: float = 0.7
    penalty_weight: float = 1.0
    penalty_warmup_steps: int = 0

    # precedence / reversibility training
    window: int = 200
    batch_size: int = 128
    estimator_lr: float = 0.01
    estimator_weight_decay: float = 0.0
    psi_update_every: int = 500      # online cadence: one step per this many env steps
    offline_trajectories: int = 0
    offline_psi_steps: int = 0
    offline_phi_steps: int = 0
    buffer_capacity: int = 1_000_000
    include_final_obs: bool = False

    # agent hyperparameters
    gamma: float = 0.99
    lr: float = 0.01
    entropy_coef: float = 0.05
    value_coef: float = 0.5
    clip_epsilon: float = 0.2
    rollout_steps: int = 2048
    epochs: int = 10
    hidden: int = 64

    # evaluation
    eval_episodes: int = 0
    stop_on_solve: bool = False
    solve_window: int = 100
    solve_threshold: float = 0.0
    solve_requires_zero_events: bool = False

    def validate(self) -> None:
        if self.env not in VALID_ENVS:
            raise ValueError(f"unknown environment {self.env!r}")
        if self.agent not in VALID_AGENTS:
            raise ValueError(f"unknown agent {self.agent!r}")
        if self.wrapper not in VALID_WRAPPERS:
            raise ValueError(f"unknown wrapper {self.wrapper!r}")
        if self.estimator_mode not in VALID_ESTIMATOR_MODES:
            raise ValueError(f"unknown estimator mode {self.estimator_mode!r}")
        if self.step_budget <= 0:
            raise ValueError("step budget must be positive")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.wrapper == "rac" and self.estimator_mode == "offline":
            if self.offline_trajectories <= 0:
                raise ValueError("offline mode needs offline_trajectories > 0")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        kwargs = {}
        for key, value in data.items():
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[key] = value
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(parse_config_text(text))

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        with open(path) as f:
            return cls.from_text(f.read())

    def to_dict(self) -> dict:
        out = {}
        for name in self.__dataclass_fields__:
            out[name] = getattr(self, name)
        return out

    def resolved_text(self) -> str:
        return dump_config(self.to_dict()) + "\n"


def load_asset_config(name: str) -> ExperimentConfig:
    text = resources.files("revrl").joinpath(f"assets/configs/{name}.cfg").read_text()
    return ExperimentConfig.from_text(text)
