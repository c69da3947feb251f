"""Predator-prey: predators with local vision search for one stationary prey.

Actions are N, E, S, W and stay. A predator that reaches the prey stays on it.
The episode ends early once every predator is on the prey.
"""

from __future__ import annotations

import numpy as np

from .base import MAX, MIN, MOVES, EnvConfig, MultiAgentEnv, StepResult, range_mask

STAY = 4


class PredatorPrey(MultiAgentEnv):
    name = "predator_prey"
    metrics = {"success": MAX, "steps_taken": MIN, "reward": MAX, "reward_per_agent": MAX}
    num_actions = 5

    def __init__(self, cfg: EnvConfig):
        super().__init__(cfg)
        self.step_penalty = cfg.opt("step_penalty", -0.05)
        self.prey_reward = cfg.opt("prey_reward", 0.25)

    @property
    def obs_dim(self) -> int:
        side = 2 * self.cfg.vision + 1
        return 2 + 3 * side * side

    def reset(self, rng):
        self.rng = rng
        self.t = 0
        self.finished = False
        d = self.cfg.dim
        self.pos = rng.integers(0, d, size=(self.n, 2))
        self.prey = rng.integers(0, d, size=2)
        self.steps_taken = None
        self._check_caught()
        return self._result(np.zeros(self.n))

    def _on_prey(self) -> np.ndarray:
        return np.all(self.pos == self.prey, axis=1)

    def _check_caught(self):
        if self.steps_taken is None and self._on_prey().all():
            self.steps_taken = self.t

    def step(self, actions):
        a = self._check_actions(actions)
        frozen = self._on_prey()
        for i in range(self.n):
            if frozen[i] or a[i] == STAY:
                continue
            self.pos[i] = np.clip(self.pos[i] + MOVES[a[i]], 0, self.cfg.dim - 1)
        on = self._on_prey()
        rewards = np.full(self.n, self.step_penalty) + on * self.prey_reward * on.sum()
        self.t += 1
        self._check_caught()
        self.finished = self.t >= self.cfg.max_steps or bool(on.all())
        return self._result(rewards)

    def comm_graph(self) -> np.ndarray:
        return range_mask(self.pos, self.cfg.comm_range)

    def observations(self) -> np.ndarray:
        v, d = self.cfg.vision, self.cfg.dim
        side = 2 * v + 1
        pad = d + 2 * v
        wall = np.ones((pad, pad))
        wall[v: v + d, v: v + d] = 0
        prey = np.zeros((pad, pad))
        prey[self.prey[0] + v, self.prey[1] + v] = 1
        pred = np.zeros((pad, pad))
        np.add.at(pred, (self.pos[:, 0] + v, self.pos[:, 1] + v), 1)
        obs = np.zeros((self.n, self.obs_dim))
        obs[:, :2] = self.pos / max(d - 1, 1)
        for i, (r, c) in enumerate(self.pos):
            others = pred[r: r + side, c: c + side].copy()
            others[v, v] -= 1
            obs[i, 2:] = np.concatenate([
                wall[r: r + side, c: c + side].ravel(),
                prey[r: r + side, c: c + side].ravel(),
                (others > 0).ravel(),
            ])
        return obs

    def episode_info(self) -> dict:
        caught = self.steps_taken is not None
        return {
            "success": float(caught),
            "steps_taken": float(self.steps_taken if caught else self.cfg.max_steps),
            "on_prey": float(self._on_prey().sum()),
        }

    def _result(self, rewards):
        n = self.n
        return StepResult(
            self.observations(), rewards, self.finished, self.comm_graph(), self.episode_info(),
            np.ones(n, dtype=bool), np.zeros(n, dtype=bool),
        )
