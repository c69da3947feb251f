"""Box pushing: attached robots must push boxes out of the central area.

The grid has a clearing area made of its outer ``margin`` cells. An episode
spawns either one large 2x2 box ringed by 8 robots or two small 1x1 boxes, each
with 4 robots on its side cells. The remaining robots roam free. Under 8-cell
adjacency the attached robots form an 8-cycle or two 4-cycles. Attached robots
see nothing, so the two layouts look alike to 1-WL message passing.

Actions: 0 stay, 1-4 move N/E/S/W, 5-8 power-move N/E/S/W. A small box moves
when all 4 of its robots move the same way. A large box moves only when all 8
of its robots power-move the same way.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import MAX, MOVES, EnvConfig, EnvError, MultiAgentEnv, StepResult

STAY = 0
DIR_ORDER = (0, 1, 2, 3)  # N > E > S > W on ties


def move_action(direction: int, power: bool) -> int:
    return 1 + direction + (4 if power else 0)


@dataclass
class Box:
    top: int
    left: int
    size: int  # 1 small, 2 large
    robots: list  # agent ids
    offsets: np.ndarray  # robot cell offsets from (top, left)

    @property
    def large(self) -> bool:
        return self.size == 2

    def cells(self, top=None, left=None) -> list:
        t = self.top if top is None else top
        l = self.left if left is None else left
        return [(t + r, l + c) for r in range(self.size) for c in range(self.size)]


def _ring(size: int) -> np.ndarray:
    """Robot offsets on the side cells of a ``size`` x ``size`` box, in ring order."""
    if size == 1:
        return np.array([(-1, 0), (0, 1), (1, 0), (0, -1)])
    return np.array([(-1, 0), (-1, 1), (0, 2), (1, 2), (2, 1), (2, 0), (1, -1), (0, -1)])


class BoxPushing(MultiAgentEnv):
    name = "box_pushing"
    metrics = {"ratio_cleared": MAX, "success": MAX, "reward": MAX, "reward_per_agent": MAX}
    num_actions = 9

    def __init__(self, cfg: EnvConfig):
        super().__init__(cfg)
        if cfg.difficulty != "easy":
            raise EnvError("only the easy box pushing variant (robots spawn attached) is supported")
        self.margin = cfg.opt("margin", 3)
        if cfg.nagents < 8 or cfg.dim < 2 * self.margin + 2:
            raise EnvError("box pushing needs at least 8 robots and room for a central area")
        self.move_reward = cfg.opt("move_reward", 10.0)
        self.clear_reward = cfg.opt("clear_reward", 100.0)
        self.exert_penalty = cfg.opt("exert_penalty", -1.0)
        self.large_prob = cfg.opt("large_prob", 0.5)

    @property
    def obs_dim(self) -> int:
        side = 2 * self.cfg.vision + 1
        return 1 + 2 * side * side

    # -- geometry -------------------------------------------------------------------

    def in_clearing(self, r, c) -> bool:
        d, m = self.cfg.dim, self.margin
        return r < m or c < m or r >= d - m or c >= d - m

    def moves_to_clear(self, box: Box, top=None, left=None) -> np.ndarray:
        """Moves needed per direction (N, E, S, W) until every box cell is in the clearing area."""
        d, m = self.cfg.dim, self.margin
        t = box.top if top is None else top
        l = box.left if left is None else left
        b, r = t + box.size - 1, l + box.size - 1
        return np.array([max(b - (m - 1), 0), max((d - m) - l, 0), max((d - m) - t, 0), max(r - (m - 1), 0)])

    def is_cleared(self, box: Box) -> bool:
        return all(self.in_clearing(r, c) for r, c in box.cells())

    def _box_cells(self, skip=None) -> set:
        out = set()
        for k, b in enumerate(self.boxes):
            if k != skip:
                out.update(b.cells())
        return out

    def _can_shift(self, k: int, direction: int) -> bool:
        box = self.boxes[k]
        dr, dc = MOVES[direction]
        t, l = box.top + dr, box.left + dc
        d = self.cfg.dim
        if t < 0 or l < 0 or t + box.size > d or l + box.size > d:
            return False
        robots = box.offsets + (t, l)
        if np.any(robots < 0) or np.any(robots >= d):
            return False
        return not (set(box.cells(t, l)) & self._box_cells(skip=k))

    # -- episode ---------------------------------------------------------------------

    def reset(self, rng):
        self.rng = rng
        self.t = 0
        self.finished = False
        d, m = self.cfg.dim, self.margin
        large = rng.random() < self.large_prob
        ids = rng.permutation(self.n)  # agent ids carry no layout information
        self.boxes = []
        if large:
            top, left = rng.integers(m, d - m - 1, size=2)
            self.boxes.append(Box(int(top), int(left), 2, list(ids[:8]), _ring(2)))
        else:
            while True:
                cand = rng.integers(m, d - m, size=(2, 2))
                r0 = _ring(1) + cand[0]
                r1 = _ring(1) + cand[1]
                gap = np.abs(r0[:, None, :] - r1[None, :, :]).max(-1)
                if gap.min() >= 2:
                    break
            self.boxes.append(Box(int(cand[0, 0]), int(cand[0, 1]), 1, list(ids[:4]), _ring(1)))
            self.boxes.append(Box(int(cand[1, 0]), int(cand[1, 1]), 1, list(ids[4:8]), _ring(1)))
        self.spawned = len(self.boxes)
        self.large_spawn = bool(large)
        self.cleared = 0
        self.attached = np.zeros(self.n, dtype=bool)
        self.pos = np.zeros((self.n, 2), dtype=np.int64)
        for box in self.boxes:
            self.attached[box.robots] = True
            self.pos[box.robots] = box.offsets + (box.top, box.left)
        taken = {tuple(p) for p in self.pos[self.attached]}
        blocked = self._box_cells()
        for i in np.flatnonzero(~self.attached):
            while True:
                p = rng.integers(0, d, size=2)
                att = self.pos[self.attached]
                if tuple(p) in taken or tuple(p) in blocked:
                    continue
                if np.abs(att - p).max(axis=1).min() >= 2:
                    break
            self.pos[i] = p
            taken.add(tuple(p))
        return self._result(np.zeros(self.n))

    def step(self, actions):
        a = self._check_actions(actions)
        n = self.n
        rewards = np.zeros(n)
        keep = []
        for k, box in enumerate(self.boxes):
            acts = a[box.robots]
            want = None
            if np.all(acts == acts[0]) and acts[0] != STAY:
                direction, power = (acts[0] - 1) % 4, acts[0] >= 5
                if power == box.large:
                    want = direction
            moved = want is not None and self._can_shift(k, want)
            if moved:
                before = self.moves_to_clear(box).min()
                box.top += int(MOVES[want][0])
                box.left += int(MOVES[want][1])
                self.pos[box.robots] = box.offsets + (box.top, box.left)
                if self.moves_to_clear(box).min() < before:
                    rewards[box.robots] += self.move_reward
            else:
                exerting = [i for i, x in zip(box.robots, acts) if x != STAY]
                rewards[exerting] += self.exert_penalty
            if moved and self.is_cleared(box):
                rewards[box.robots] += self.clear_reward
                self.attached[box.robots] = False
                self.cleared += 1
            else:
                keep.append(box)
        self.boxes = keep
        blocked = self._box_cells()
        d = self.cfg.dim
        for i in np.flatnonzero(~self.attached):
            if a[i] == STAY:
                continue
            nxt = np.clip(self.pos[i] + MOVES[(a[i] - 1) % 4], 0, d - 1)
            if tuple(nxt) not in blocked:
                self.pos[i] = nxt
        self.t += 1
        self.finished = self.t >= self.cfg.max_steps or not self.boxes
        return self._result(rewards)

    def comm_graph(self) -> np.ndarray:
        """Free robots form a clique; attached robots talk to 8-adjacent robots only."""
        near = np.abs(self.pos[:, None, :] - self.pos[None, :, :]).max(-1) <= 1
        free = ~self.attached
        att = self.attached[:, None] | self.attached[None, :]
        mask = (free[:, None] & free[None, :]) | (att & near)
        np.fill_diagonal(mask, False)
        return mask

    def observations(self) -> np.ndarray:
        v, d = self.cfg.vision, self.cfg.dim
        side = 2 * v + 1
        pad = d + 2 * v
        boxes = np.zeros((pad, pad))
        for r, c in self._box_cells():
            boxes[r + v, c + v] = 1
        robots = np.zeros((pad, pad))
        np.add.at(robots, (self.pos[:, 0] + v, self.pos[:, 1] + v), 1)
        obs = np.zeros((self.n, self.obs_dim))
        for i, (r, c) in enumerate(self.pos):
            if self.attached[i]:
                obs[i, 0] = 1.0
                continue
            others = robots[r: r + side, c: c + side].copy()
            others[v, v] -= 1
            obs[i, 1:] = np.concatenate([boxes[r: r + side, c: c + side].ravel(), (others > 0).ravel()])
        return obs

    def episode_info(self) -> dict:
        return {
            "ratio_cleared": self.cleared / self.spawned,
            "success": float(self.cleared == self.spawned),
            "large_box": float(self.large_spawn),
        }

    def _result(self, rewards):
        n = self.n
        return StepResult(
            self.observations(), rewards, self.finished, self.comm_graph(), self.episode_info(),
            np.ones(n, dtype=bool), np.zeros(n, dtype=bool),
        )


def boxpushing_expert(env: BoxPushing) -> np.ndarray:
    """Scripted actions: every robot on a box pushes toward its nearest clearing edge.

    Ties go N > E > S > W. Directions blocked by another box are skipped. Large
    boxes are power-moved. Free robots stay.
    """
    actions = np.full(env.n, STAY, dtype=np.int64)
    for k, box in enumerate(env.boxes):
        if env.is_cleared(box):
            continue
        need = env.moves_to_clear(box)
        ranked = sorted(DIR_ORDER, key=lambda dct: (need[dct], dct))
        open_dirs = [dct for dct in ranked if env._can_shift(k, dct)]
        if not open_dirs:
            continue
        actions[box.robots] = move_action(open_dirs[0], box.large)
    return actions
