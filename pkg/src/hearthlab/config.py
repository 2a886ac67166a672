"""Run configuration: defaults < config file < HEARTHLAB_* environment < command-line flags."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .rl import PPOConfig, RewardParams, TrainConfig
from .transfer import TransferConfig

ENV_PREFIX = "HEARTHLAB_"


@dataclass(frozen=True)
class RunConfig:
    episodes: int = 512
    max_steps: int = 64
    c: float = 200.0
    seed: int = 0
    seeds: int = 3
    feature_dim: int = 512
    hidden: int = 128
    embed_dim: int = 256
    gamma: float = 0.99
    lam: float = 0.95
    clip: float = 0.2
    epochs: int = 4
    minibatch: int = 64
    lr: float = 3e-4
    max_grad_norm: float = 0.5
    vf_coef: float = 0.5
    ent_coef: float = 0.01
    n_steps: int = 512
    checkpoints: tuple = (80, 160)
    offset: float = 64.0
    aggregate: str = "median"
    out: str = "runs"
    jobs: int = 0
    embedding_provider: str = "hashed"
    keep_primitive_head: bool = False
    mask_invalid: bool = False

    def __post_init__(self):
        positive = ("episodes", "max_steps", "c", "seeds", "feature_dim", "hidden", "embed_dim",
                    "epochs", "minibatch", "lr", "n_steps")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if not self.checkpoints or min(self.checkpoints) <= 0:
            raise ValueError("checkpoints must be positive")

    @property
    def workers(self) -> int:
        return self.jobs if self.jobs > 0 else (os.cpu_count() or 1)

    def train_config(self) -> TrainConfig:
        ppo = PPOConfig(self.gamma, self.lam, self.clip, self.epochs, self.minibatch, self.lr,
                        self.max_grad_norm, self.vf_coef, self.ent_coef, self.n_steps)
        return TrainConfig(self.episodes, self.feature_dim, self.hidden,
                           RewardParams(self.c, -1.0, self.max_steps), ppo, self.mask_invalid)

    def transfer_config(self) -> TransferConfig:
        return TransferConfig(tuple(self.checkpoints), self.seeds, self.offset, self.seed,
                              self.keep_primitive_head, self.aggregate)

    def to_json(self) -> str:
        d = asdict(self)
        d["checkpoints"] = list(self.checkpoints)
        return json.dumps(d, indent=2, sort_keys=True) + "\n"


_DEFAULTS = RunConfig()


def _coerce(name: str, raw):
    kind = type(getattr(_DEFAULTS, name))
    if name == "checkpoints":
        if isinstance(raw, str):
            raw = [x for x in raw.split(",") if x.strip()]
        return tuple(int(x) for x in raw)
    if kind is bool:
        if isinstance(raw, str):
            return raw.strip().lower() in ("1", "true", "yes", "on")
        return bool(raw)
    return kind(raw)


def load(config_file=None, overrides: dict | None = None, environ=None) -> RunConfig:
    """Merge the configuration layers; ``overrides`` holds flags given on the command line."""
    environ = os.environ if environ is None else environ
    names = {f.name for f in fields(RunConfig)}
    values = {}
    if config_file:
        doc = json.loads(Path(config_file).read_text(encoding="utf-8"))
        unknown = set(doc) - names
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        values.update({k: _coerce(k, v) for k, v in doc.items()})
    for name in names:
        raw = environ.get(ENV_PREFIX + name.upper())
        if raw is not None:
            values[name] = _coerce(name, raw)
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = _coerce(k, v)
    return replace(RunConfig(), **values) if values else RunConfig()
