"""Shared environment types: configs, step results, metric polarity, range masks."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np

MAX = "max"
MIN = "min"

# (dr, dc) for N, E, S, W
MOVES = np.array([[-1, 0], [0, 1], [1, 0], [0, -1]], dtype=np.int64)


class EnvError(ValueError):
    pass


@dataclass(frozen=True)
class EnvConfig:
    env_name: str
    dim: int
    nagents: int
    vision: int = 1
    max_steps: int = 20
    comm_range: int = 3
    add_rate: float = 0.3
    difficulty: str = "easy"
    find_range: float = 3.0
    min_target_distance: int = 3
    mode: str = "cooperative"
    distance_metric: str = "euclidean"
    pairwise_mode: str = "final"  # final | mean
    options: dict = field(default_factory=dict)  # reward constants and other env-specific knobs

    def __post_init__(self):
        if self.dim <= 0 or self.nagents < 1 or self.max_steps < 1 or self.vision < 0:
            raise EnvError(f"invalid environment config: {self}")
        if self.comm_range < 0:
            raise EnvError("comm_range must be non-negative")
        if self.distance_metric not in ("euclidean", "manhattan"):
            raise EnvError(f"unknown distance metric {self.distance_metric!r}")
        if self.pairwise_mode not in ("final", "mean"):
            raise EnvError(f"unknown pairwise mode {self.pairwise_mode!r}")

    def opt(self, key, default):
        return type(default)(self.options.get(key, default))

    def with_updates(self, **kw) -> "EnvConfig":
        return replace(self, **kw)


CONFIG_FIELDS = tuple(f.name for f in fields(EnvConfig))


@dataclass
class StepResult:
    observations: np.ndarray  # (n, obs_dim)
    rewards: np.ndarray  # (n,)
    done: bool
    comm_mask: np.ndarray  # (n, n) bool, [i, j] means i may send to j
    info: dict
    active: np.ndarray  # (n,) bool, agents that act this step
    agent_done: np.ndarray  # (n,) bool, an agent's life ended on this step


def range_mask(pos: np.ndarray, comm_range: float, active=None) -> np.ndarray:
    """Chebyshev-range communication mask without self-loops."""
    pos = np.asarray(pos)
    d = np.abs(pos[:, None, :] - pos[None, :, :]).max(axis=-1)
    mask = d <= comm_range
    if active is not None:
        act = np.asarray(active, dtype=bool)
        mask &= act[:, None] & act[None, :]
    np.fill_diagonal(mask, False)
    return mask


def pairwise_mean(pos: np.ndarray, metric: str = "euclidean") -> float:
    pos = np.asarray(pos, dtype=np.float64)
    n = len(pos)
    if n < 2:
        return 0.0
    diff = pos[:, None, :] - pos[None, :, :]
    d = np.sqrt((diff**2).sum(-1)) if metric == "euclidean" else np.abs(diff).sum(-1)
    iu = np.triu_indices(n, 1)
    return float(d[iu].mean())


class MultiAgentEnv:
    """Base class. Subclasses set ``name``, ``metrics``, ``num_actions``, ``obs_dim``."""

    name = ""
    metrics: dict = {}
    num_actions = 0

    def __init__(self, cfg: EnvConfig):
        self.cfg = cfg
        self.n = cfg.nagents
        self.t = 0
        self.rng = None
        self.finished = True  # until reset()

    @property
    def obs_dim(self) -> int:
        raise NotImplementedError

    def reset(self, rng: np.random.Generator) -> StepResult:
        raise NotImplementedError

    def step(self, actions) -> StepResult:
        raise NotImplementedError

    def comm_graph(self) -> np.ndarray:
        raise NotImplementedError

    def _check_actions(self, actions) -> np.ndarray:
        a = np.asarray(actions)
        if a.shape != (self.n,):
            raise EnvError(f"expected {self.n} actions, got shape {a.shape}")
        if not np.issubdtype(a.dtype, np.integer):
            if not np.all(a == np.round(a)):
                raise EnvError("actions must be integers")
            a = a.astype(np.int64)
        if np.any(a < 0) or np.any(a >= self.num_actions):
            raise EnvError(f"illegal action id in {a.tolist()} (valid 0..{self.num_actions - 1})")
        if self.finished:
            raise EnvError("episode finished or not started; call reset()")
        return a

    def episode_info(self) -> dict:
        """Metric values for the episode so far (without reward totals)."""
        raise NotImplementedError


def episode_metrics(trace, metrics: dict | None = None) -> dict:
    """Metric record from a list of ``StepResult`` (reset result first or not).

    ``reward`` is the episode sum over agents and steps; ``reward_per_agent``
    divides it by the agent count.
    """
    if not trace:
        raise EnvError("empty trace")
    total = float(sum(float(np.sum(s.rewards)) for s in trace))
    n = len(trace[-1].rewards)
    out = {"reward": total, "reward_per_agent": total / max(n, 1)}
    for k, v in trace[-1].info.items():
        if (metrics is None or k in metrics) and np.isscalar(v):
            out[k] = float(v)
    return out
