"""Multi-agent grid environments with environment-masked communication."""

from __future__ import annotations

import numpy as np

from .base import (
    CONFIG_FIELDS,
    MAX,
    MIN,
    EnvConfig,
    EnvError,
    MultiAgentEnv,
    StepResult,
    episode_metrics,
    pairwise_mean,
    range_mask,
)
from .boxes import BoxPushing, boxpushing_expert
from .drones import DroneScatter
from .predator import PredatorPrey
from .traffic import TrafficJunction

ENVS = {
    "traffic_junction": TrafficJunction,
    "predator_prey": PredatorPrey,
    "drone_scatter": DroneScatter,
    "box_pushing": BoxPushing,
}

_DEFAULTS = {
    ("traffic_junction", "easy"): dict(dim=6, nagents=5, vision=1, max_steps=20, comm_range=3, add_rate=0.3),
    ("traffic_junction", "medium"): dict(dim=14, nagents=10, vision=1, max_steps=40, comm_range=3, add_rate=0.3),
    ("predator_prey", "easy"): dict(dim=10, nagents=5, vision=1, max_steps=40, comm_range=5, mode="cooperative"),
    ("drone_scatter", "easy"): dict(dim=20, nagents=4, vision=1, max_steps=20, comm_range=10,
                                    find_range=3.0, min_target_distance=3),
    ("box_pushing", "easy"): dict(dim=12, nagents=10, vision=1, max_steps=20, comm_range=1),
}


def default_config(env_name: str, difficulty: str = "easy", **overrides) -> EnvConfig:
    key = (env_name, difficulty)
    if key not in _DEFAULTS:
        raise EnvError(f"no defaults for {env_name!r} at difficulty {difficulty!r}")
    kw = dict(_DEFAULTS[key], env_name=env_name, difficulty=difficulty)
    kw.update(overrides)
    return EnvConfig(**kw)


def make_env(cfg: EnvConfig) -> MultiAgentEnv:
    try:
        cls = ENVS[cfg.env_name]
    except KeyError:
        raise EnvError(f"unknown environment {cfg.env_name!r}") from None
    return cls(cfg)


def reset(cfg: EnvConfig, rng: np.random.Generator):
    """Build an environment and start an episode. The env object is the episode state."""
    env = make_env(cfg)
    return env, env.reset(rng)


def step(env: MultiAgentEnv, actions) -> StepResult:
    return env.step(actions)


def comm_graph(env: MultiAgentEnv) -> np.ndarray:
    return env.comm_graph()


def metric_polarity(env_name: str) -> dict:
    return dict(ENVS[env_name].metrics)


__all__ = [
    "CONFIG_FIELDS", "ENVS", "MAX", "MIN", "BoxPushing", "DroneScatter", "EnvConfig", "EnvError",
    "MultiAgentEnv", "PredatorPrey", "StepResult", "TrafficJunction", "boxpushing_expert",
    "comm_graph", "default_config", "episode_metrics", "make_env", "metric_polarity",
    "pairwise_mean", "range_mask", "reset", "step",
]
