"""Experiment configuration: defaults, ``key = value`` files and overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..agents import AgentConfig

EXPERIMENTS = ("maze-q", "maze-plan", "cartpole", "predprey", "verify")
AGENTS = ("baseline", "eea")


class ConfigError(ValueError):
    pass


# Agent hyperparameters per (experiment, agent). Maze values follow the
# textbook settings; cartpole and predator-prey use the best rows of the
# published sweeps, with network widths, replay ratio and target settings
# fixed by pilot runs on a single CPU.
AGENT_DEFAULTS = {
    ("maze-q", "baseline"): dict(learning_rate=0.1, discount=0.95, epsilon=0.1),
    ("maze-q", "eea"): dict(learning_rate=0.1, discount=0.95, epsilon=0.1),
    ("maze-plan", "baseline"): dict(learning_rate=0.1, discount=0.95, epsilon=0.1),
    ("maze-plan", "eea"): dict(learning_rate=0.1, discount=0.95, epsilon=0.1),
    ("cartpole", "baseline"): dict(
        learning_rate=3e-3, discount=0.8, epsilon=0.05, activation="tanh", lr_decay_episode=15,
        hidden=(128, 128), target_sync=20, updates_per_step=4, batch_size=32, train_start=32,
    ),
    ("cartpole", "eea"): dict(
        learning_rate=3e-3, discount=0.8, epsilon=0.05, activation="tanh", lr_decay_episode=10,
        hidden=(128, 128), target_sync=20, updates_per_step=4, batch_size=32, train_start=32,
    ),
    ("predprey", "baseline"): dict(
        learning_rate=1e-3, discount=0.99, epsilon=0.05, activation="relu",
        hidden=(256,), target_sync=100, updates_per_step=4, batch_size=32, train_start=32,
    ),
    ("predprey", "eea"): dict(
        learning_rate=1e-2, discount=0.8, epsilon=0.05, activation="relu",
        hidden=(256,), target_sync=100, updates_per_step=4, batch_size=32, train_start=32,
    ),
}

DEFAULT_EPISODES = {"maze-q": 200, "maze-plan": 250, "cartpole": 30, "predprey": 100}
DEFAULT_HYP_ACTION = {"maze-q": 2, "maze-plan": 2, "cartpole": 0, "predprey": 4}

AGENT_KEYS = tuple(f.name for f in dataclasses.fields(AgentConfig))


@dataclass
class ExperimentConfig:
    experiment: str
    agent: str = "eea"
    seeds: int = 1
    # episodes per seed; for maze-plan the number of checkpoints
    episodes: Optional[int] = None
    hyp_action: Optional[int] = None
    master_seed: int = 0
    workers: int = 1
    out: Optional[str] = None
    timing: bool = False
    # maze-plan: backups between greedy-policy checkpoints
    checkpoint_every: int = 20
    # cartpole: random-policy episodes used to fit the linear models
    model_episodes: int = 3
    model_epochs: int = 10_000
    model_lr: float = 1e-2
    # predprey: random steps used to pretrain the shared models
    pretrain_steps: int = 10_000
    pretrain_epochs: int = 30
    pretrain_lr: float = 1e-3
    pretrain_hidden: tuple = (512, 512)
    models_dir: Optional[str] = None
    allow_self_predecessor: bool = False
    # AgentConfig overrides; unset keys take AGENT_DEFAULTS
    agent_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if self.agent not in AGENTS:
            raise ConfigError(f"unknown agent {self.agent!r}; choose from {AGENTS}")
        if self.seeds < 1:
            raise ConfigError("seeds must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        unknown = set(self.agent_overrides) - set(AGENT_KEYS)
        if unknown:
            raise ConfigError(f"unknown agent settings {sorted(unknown)}")
        if self.episodes is None and self.experiment in DEFAULT_EPISODES:
            self.episodes = DEFAULT_EPISODES[self.experiment]
        if self.hyp_action is None and self.experiment in DEFAULT_HYP_ACTION:
            self.hyp_action = DEFAULT_HYP_ACTION[self.experiment]
        if self.episodes is not None and self.episodes < 1:
            raise ConfigError("episodes must be at least 1")
        if self.experiment == "cartpole" and self.agent == "eea" and self.model_episodes >= self.episodes:
            raise ConfigError("cartpole needs more episodes than model-collection episodes")
        self.agent_config()

    def agent_config(self) -> AgentConfig:
        params = dict(AGENT_DEFAULTS.get((self.experiment, self.agent), {}))
        params.update(self.agent_overrides)
        try:
            return AgentConfig(**params)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def default_out(self) -> Path:
        return Path("results") / f"{self.experiment}-{self.agent}.csv"

    def effective(self) -> dict:
        """Flat view of every setting, agent hyperparameters included."""
        d = {k: v for k, v in dataclasses.asdict(self).items() if k != "agent_overrides"}
        d.update({f"agent.{k}": v for k, v in dataclasses.asdict(self.agent_config()).items()})
        return d

    def dumps(self) -> str:
        lines = []
        for k, v in self.effective().items():
            if isinstance(v, (list, tuple)):
                v = ",".join(str(x) for x in v)
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"


def _coerce(key: str, raw: str):
    raw = raw.strip()
    if raw.lower() in ("none", ""):
        return None
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    if key in ("hidden", "pretrain_hidden"):
        return tuple(int(x) for x in raw.split(","))
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    return raw


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` comments; dashes and underscores interchangeable.

    Agent hyperparameters may be written bare (``learning_rate``) or prefixed
    (``agent.learning_rate``).
    """
    top = {f.name for f in dataclasses.fields(ExperimentConfig)} - {"agent_overrides"}
    out: dict = {}
    overrides: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key.startswith("agent."):
            key = key[len("agent."):]
            overrides[key] = _coerce(key, value)
        elif key in top:
            out[key] = _coerce(key, value)
        elif key in AGENT_KEYS:
            overrides[key] = _coerce(key, value)
        else:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
    if overrides:
        out["agent_overrides"] = overrides
    return out


def load_config_file(path) -> dict:
    try:
        return parse_config_text(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def build_config(file_values: Optional[dict] = None, **overrides) -> ExperimentConfig:
    """File values first, then non-None overrides; agent settings merge key by key."""
    values = dict(file_values or {})
    agent_over = dict(values.pop("agent_overrides", {}))
    agent_over.update(overrides.pop("agent_overrides", None) or {})
    for k, v in overrides.items():
        if v is not None:
            values[k] = v
    if "experiment" not in values:
        raise ConfigError("no experiment given")
    try:
        return ExperimentConfig(agent_overrides=agent_over, **values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
