"""Run configuration: flat ``key = value`` files plus command-line overrides.

Keys follow the usual experiment parameter names (``env_name``, ``dim``,
``nagents``, ``vision``, ``max_steps``, ``comm_range``, ``model``, ``rni``,
``seed``, ``num_epochs``, ``greedy_a2c_eval``, ``imitation``, ...). ``rni`` is
0 for no augmentation, 1 for unique IDs and a ratio in (0, 1) for noise.
Environment reward constants go under ``env.<name>``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from ..envs import CONFIG_FIELDS, ENVS, EnvConfig, EnvError, default_config
from ..gdn import PRESETS, AugmentationConfig, GdnError
from ..learn import TRAIN_FIELDS, TrainConfig

MODELS = tuple(PRESETS) + ("random",)
VALUE_BASED = ("dgn-style",)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    env: EnvConfig
    model: str = "commnet"
    augmentation: AugmentationConfig = AugmentationConfig()
    seed: int = 1
    num_epochs: int = 10
    eval_episodes: int = 100
    eval_mode: str = "stochastic"  # stochastic | greedy
    comm_passes: int = 4
    hid_size: int = 128
    recurrent: bool = False
    imitation: bool = False
    checkpoint: bool = True
    stop_metric: str = ""  # optional early stop once the eval mean reaches stop_value
    stop_value: float = 0.0
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {', '.join(MODELS)}")
        if self.eval_mode not in ("stochastic", "greedy"):
            raise ConfigError(f"unknown eval_mode {self.eval_mode!r}")
        if self.num_epochs < 0 or self.eval_episodes < 1 or self.comm_passes < 1 or self.hid_size < 1:
            raise ConfigError("num_epochs >= 0, eval_episodes >= 1, comm_passes >= 1, hid_size >= 1")
        if self.imitation and self.env.env_name != "box_pushing":
            raise ConfigError("imitation needs the box pushing expert")
        if self.augmentation.mode == "unique-id" and self.augmentation.max_agents < self.env.nagents:
            raise ConfigError("max_agents must cover every agent")

    @property
    def value_based(self) -> bool:
        return self.model in VALUE_BASED

    @property
    def label(self) -> str:
        return f"{self.env.env_name}-{self.env.difficulty}_{self.model}_{self.augmentation.label}_seed{self.seed}"

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["augmentation"] = self.augmentation.label
        return d


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value
    return out


def parse_overrides(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


def _coerce(value, like):
    if isinstance(like, bool):
        return _bool(value)
    try:
        if isinstance(like, int):
            f = float(value)
            if f != int(f):
                raise ValueError
            return int(f)
        if isinstance(like, float):
            return float(value)
    except ValueError:
        raise ConfigError(f"cannot read {value!r} as {type(like).__name__}") from None
    return str(value)


_RUN_KEYS = {
    "model": "commnet", "seed": 1, "num_epochs": 10, "eval_episodes": 100, "comm_passes": 4,
    "hid_size": 128, "recurrent": False, "imitation": False, "checkpoint": True,
    "stop_metric": "", "stop_value": 0.0,
}
_ALIASES = {"num_evals": "eval_episodes", "rnn": "recurrent", "add_rate_max": "add_rate"}
_IGNORED = {"add_rate_min", "curr_start", "curr_end", "vocab_type", "nenemies", "moving_prey", "no_stay",
            "nprocesses", "env_graph", "num_imitation_experiences", "num_normal_experiences",
            "normalize_rewards", "entr"}


def build_run_config(values: dict) -> RunConfig:
    """Validate a flat mapping of strings into a ``RunConfig``."""
    values = {_ALIASES.get(k, k): v for k, v in values.items()}
    if "env_name" not in values:
        raise ConfigError("env_name is required")
    env_name = values["env_name"]
    if env_name not in ENVS:
        raise ConfigError(f"unknown env_name {env_name!r}")
    difficulty = values.get("difficulty", "easy")
    try:
        base = default_config(env_name, difficulty)
    except EnvError as e:
        raise ConfigError(str(e)) from None
    env_kw, options, run_kw, train_kw = {}, {}, {}, {}
    rni, greedy = 0.0, False
    for key, value in values.items():
        if key in ("env_name", "difficulty") or key in _IGNORED:
            if key == "entr":
                train_kw["entropy_coeff"] = _coerce(value, 0.0)
            elif key == "num_imitation_experiences":
                train_kw["num_expert"] = _coerce(value, 0)
            elif key == "num_normal_experiences":
                train_kw["num_normal"] = _coerce(value, 0)
            elif key == "normalize_rewards" and _bool(value):
                raise ConfigError("reward normalisation is not supported")
            continue
        if key.startswith("env."):
            options[key[4:]] = _coerce(value, 0.0)
        elif key in CONFIG_FIELDS and key != "options":
            env_kw[key] = _coerce(value, getattr(base, key))
        elif key in _RUN_KEYS:
            run_kw[key] = _coerce(value, _RUN_KEYS[key])
        elif key == "rni":
            rni = _coerce(value, 0.0)
        elif key == "greedy_a2c_eval":
            greedy = _bool(value)
        elif key == "eval_mode":
            greedy = str(value) == "greedy"
            if value not in ("greedy", "stochastic"):
                raise ConfigError(f"unknown eval_mode {value!r}")
        elif key == "hid":
            run_kw["hid_size"] = _coerce(value, 0)
        elif key in TRAIN_FIELDS:
            train_kw[key] = _coerce(value, getattr(TrainConfig(), key))
        else:
            raise ConfigError(f"unknown config key {key!r}")
    try:
        env = dataclasses.replace(base, options=options, **env_kw)
        if rni == 0:
            aug = AugmentationConfig("none", max_agents=env.nagents)
        elif rni == 1:
            aug = AugmentationConfig("unique-id", max_agents=env.nagents)
        else:
            aug = AugmentationConfig("rni", rni_ratio=rni, max_agents=env.nagents)
        train = TrainConfig(**train_kw)
        return RunConfig(env=env, augmentation=aug, eval_mode="greedy" if greedy else "stochastic",
                         train=train, **run_kw)
    except (EnvError, GdnError, ValueError, TypeError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e)) from None


def load_run_config(path, overrides=None) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    values = parse_config_text(text)
    values.update(parse_overrides(overrides))
    return build_run_config(values)
