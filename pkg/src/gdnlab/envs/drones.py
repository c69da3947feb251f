"""Drone scatter: identical drones start stacked and must split up to find a target.

Drones see only the fence bits of their 3x3 patch and their own last action,
so every drone starts with the same observation. The target counts as found
once any drone comes within ``find_range`` (Euclidean) of it. The episode always
runs for ``max_steps``.
"""

from __future__ import annotations

import itertools

import numpy as np

from .base import MAX, MIN, MOVES, EnvConfig, MultiAgentEnv, StepResult, pairwise_mean, range_mask


class DroneScatter(MultiAgentEnv):
    name = "drone_scatter"
    metrics = {
        "steps_taken": MIN, "pairwise_distance": MAX, "success": MAX,
        "reward": MAX, "reward_per_agent": MAX,
    }
    num_actions = 4

    def __init__(self, cfg: EnvConfig):
        super().__init__(cfg)
        self.spread_scale = cfg.opt("spread_scale", 0.1)
        self.find_reward = cfg.opt("find_reward", 100.0)
        self.spawn_jitter = cfg.opt("spawn_jitter", 2)
        self.spawn_radius = cfg.opt("spawn_radius", 1)  # spawn area = square around the spawn cell
        d = cfg.dim
        self._cells = np.array(list(itertools.product(range(d), range(d))))

    @property
    def obs_dim(self) -> int:
        return 9 + 4

    def reset(self, rng):
        self.rng = rng
        self.t = 0
        self.finished = False
        d, j = self.cfg.dim, self.spawn_jitter
        spawn = np.array([d // 2, d // 2]) + (rng.integers(-j, j + 1, size=2) if j else 0)
        self.spawn = np.clip(spawn, 0, d - 1)
        self.pos = np.tile(self.spawn, (self.n, 1))
        gap = np.abs(self._cells - self.spawn).max(axis=1)
        options = self._cells[gap >= self.cfg.min_target_distance + self.spawn_radius]
        self.target = options[int(rng.integers(len(options)))]
        self.last_act = np.full(self.n, -1)
        self.found_at = None
        self.pair_series = [self._pairwise()]
        return self._result(np.zeros(self.n))

    def _pairwise(self) -> float:
        return pairwise_mean(self.pos, self.cfg.distance_metric)

    def step(self, actions):
        a = self._check_actions(actions)
        self.pos = np.clip(self.pos + MOVES[a], 0, self.cfg.dim - 1)
        self.last_act = a.copy()
        self.t += 1
        pos = self.pos.astype(np.float64)
        dist = np.sqrt(((pos[:, None] - pos[None]) ** 2).sum(-1))
        rewards = self.spread_scale * dist.sum(axis=1) / max(self.n - 1, 1)
        near = np.sqrt(((pos - self.target) ** 2).sum(-1)) <= self.cfg.find_range
        if self.found_at is None and near.any():
            self.found_at = self.t
            rewards = rewards + self.find_reward
        self.pair_series.append(self._pairwise())
        self.finished = self.t >= self.cfg.max_steps
        return self._result(rewards)

    def comm_graph(self) -> np.ndarray:
        return range_mask(self.pos, self.cfg.comm_range)

    def observations(self) -> np.ndarray:
        d = self.cfg.dim
        obs = np.zeros((self.n, self.obs_dim))
        offs = np.array([(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1)])
        for i, p in enumerate(self.pos):
            cells = p + offs
            obs[i, :9] = np.any((cells < 0) | (cells >= d), axis=1)
            if self.last_act[i] >= 0:
                obs[i, 9 + self.last_act[i]] = 1.0
        return obs

    def episode_info(self) -> dict:
        series = self.pair_series
        pd = series[-1] if self.cfg.pairwise_mode == "final" else float(np.mean(series[1:] or series))
        return {
            "steps_taken": float(self.found_at if self.found_at is not None else self.cfg.max_steps),
            "pairwise_distance": pd,
            "success": float(self.found_at is not None),
            "pairwise_series": list(series),
        }

    def _result(self, rewards):
        n = self.n
        return StepResult(
            self.observations(), rewards, self.finished, self.comm_graph(), self.episode_info(),
            np.ones(n, dtype=bool), np.zeros(n, dtype=bool),
        )
