"""Traffic junction: cars on crossing roads choose gas or brake each step.

Easy has two one-way roads (west to east, north to south). Medium has two
two-way roads with right-hand lanes, four entry points and three routes per
entry (straight, right, left). Agent slots are reused. A car that leaves the
grid frees its slot, and a new car may take that slot later.
"""

from __future__ import annotations

import numpy as np

from .base import MAX, MIN, EnvConfig, EnvError, MultiAgentEnv, StepResult, range_mask

GAS, BRAKE = 0, 1


def _lanes(dim: int, difficulty: str) -> dict:
    mid = dim // 2
    rows, cols = np.arange(dim), np.arange(dim)
    if difficulty == "easy":
        return {
            "E": [(mid, c) for c in cols],
            "S": [(r, mid) for r in rows],
        }
    if difficulty == "medium":
        return {
            "E": [(mid, c) for c in cols],
            "W": [(mid - 1, c) for c in cols[::-1]],
            "S": [(r, mid - 1) for r in rows],
            "N": [(r, mid) for r in rows[::-1]],
        }
    raise EnvError(f"unsupported traffic junction difficulty {difficulty!r}")


# exits for each entry lane: straight, right turn, left turn
_TURNS = {"E": ("E", "S", "N"), "W": ("W", "N", "S"), "S": ("S", "W", "E"), "N": ("N", "E", "W")}


def build_routes(dim: int, difficulty: str) -> list:
    """List of ``(entry, cells)``; every route starts at its lane's edge cell."""
    lanes = _lanes(dim, difficulty)
    routes = []
    for entry, cells in lanes.items():
        exits = _TURNS[entry] if difficulty == "medium" else (entry,)
        for ex in exits:
            if ex == entry:
                path = list(cells)
            else:
                other = lanes[ex]
                cross = next(c for c in cells if c in other)
                path = cells[: cells.index(cross) + 1] + other[other.index(cross) + 1:]
            routes.append((entry, [tuple(map(int, c)) for c in path]))
    return routes


class TrafficJunction(MultiAgentEnv):
    name = "traffic_junction"
    metrics = {
        "success": MAX, "collisions": MIN, "cars_exited": MAX, "reward": MAX, "reward_per_agent": MAX,
    }
    num_actions = 2

    def __init__(self, cfg: EnvConfig):
        super().__init__(cfg)
        self.routes = build_routes(cfg.dim, cfg.difficulty)
        self.entries = sorted({e for e, _ in self.routes})
        self.collision_penalty = cfg.opt("collision_penalty", -10.0)
        self.linger = cfg.opt("linger_penalty", -0.01)

    @property
    def obs_dim(self) -> int:
        v = 2 * self.cfg.vision + 1
        return 2 + len(self.routes) + self.cfg.dim**2 + v * v

    def reset(self, rng):
        self.rng = rng
        self.t = 0
        self.finished = False
        n = self.n
        self.active = np.zeros(n, dtype=bool)
        self.route = np.zeros(n, dtype=np.int64)
        self.idx = np.zeros(n, dtype=np.int64)
        self.age = np.zeros(n, dtype=np.int64)
        self.last_act = np.zeros(n, dtype=np.int64)
        self.collisions = 0
        self.exited = 0
        self._spawn()
        return self._result(np.zeros(n), np.zeros(n, dtype=bool))

    def positions(self) -> np.ndarray:
        pos = np.full((self.n, 2), -1, dtype=np.int64)
        for i in np.flatnonzero(self.active):
            pos[i] = self.routes[self.route[i]][1][self.idx[i]]
        return pos

    def _spawn(self):
        # no free-cell check: a car waiting on its entry cell can be hit by the next arrival
        for entry in self.entries:
            if self.rng.random() >= self.cfg.add_rate:
                continue
            free = np.flatnonzero(~self.active)
            if free.size == 0:
                continue
            options = [k for k, (e, _) in enumerate(self.routes) if e == entry]
            i = int(free[0])
            self.active[i] = True
            self.route[i] = options[int(self.rng.integers(len(options)))]
            self.idx[i] = 0
            self.age[i] = 0
            self.last_act[i] = 0

    def step(self, actions):
        a = self._check_actions(actions)
        n = self.n
        rewards = np.zeros(n)
        agent_done = np.zeros(n, dtype=bool)
        moving = self.active & (a == GAS)
        self.last_act = np.where(self.active, a, 0)
        for i in np.flatnonzero(moving):
            self.idx[i] += 1
            if self.idx[i] >= len(self.routes[self.route[i]][1]):
                self.active[i] = False
                agent_done[i] = True
                self.exited += 1
        self.age[self.active | agent_done] += 1
        rewards[self.active | agent_done] += self.linger * self.age[self.active | agent_done]
        pos = self.positions()
        cells = {}
        for i in np.flatnonzero(self.active):
            cells.setdefault(tuple(pos[i]), []).append(i)
        for members in cells.values():
            if len(members) > 1:
                self.collisions += 1
                rewards[members] += self.collision_penalty
        self.t += 1
        done = self.t >= self.cfg.max_steps
        self.finished = done
        # slots freed this step are refilled for the next decision
        if not done:
            self._spawn()
        return self._result(rewards, agent_done)

    def comm_graph(self) -> np.ndarray:
        return range_mask(self.positions(), self.cfg.comm_range, self.active)

    def observations(self) -> np.ndarray:
        cfg = self.cfg
        v = cfg.vision
        side = 2 * v + 1
        nr = len(self.routes)
        obs = np.zeros((self.n, self.obs_dim))
        pos = self.positions()
        grid = np.zeros((cfg.dim + 2 * v, cfg.dim + 2 * v))
        for i in np.flatnonzero(self.active):
            grid[pos[i][0] + v, pos[i][1] + v] += 1
        for i in np.flatnonzero(self.active):
            r, c = pos[i]
            view = grid[r: r + side, c: c + side].copy()
            view[v, v] -= 1  # exclude the car itself
            obs[i, 0] = 1.0
            obs[i, 1] = self.last_act[i]
            obs[i, 2 + self.route[i]] = 1.0
            obs[i, 2 + nr + r * cfg.dim + c] = 1.0
            obs[i, 2 + nr + cfg.dim**2:] = (view > 0).ravel()
        return obs

    def episode_info(self) -> dict:
        return {
            "success": float(self.collisions == 0),
            "collisions": float(self.collisions),
            "cars_exited": float(self.exited),
        }

    def _result(self, rewards, agent_done):
        return StepResult(
            self.observations(), rewards, self.finished, self.comm_graph(),
            self.episode_info(), self.active.copy(), agent_done,
        )
