"""Value-based training: experiences, replay buffer, epsilon schedule and TD updates."""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor
from ..gdn import GdnModel, forward, forward_tensors
from .params import ParamStore, TrainConfig


@dataclass(frozen=True)
class Experience:
    obs: np.ndarray  # (n, d)
    actions: np.ndarray  # (n,)
    next_obs: np.ndarray  # (n, d)
    rewards: np.ndarray  # (n,)
    comm: np.ndarray  # (n, n) sender mask
    next_comm: np.ndarray
    done: bool = False
    expert: bool = False

    def __post_init__(self):
        n = len(self.actions)
        if not (len(self.obs) == len(self.next_obs) == len(self.rewards) == n):
            raise ValueError("experience fields disagree on the agent count")
        if self.comm.shape != (n, n) or self.next_comm.shape != (n, n):
            raise ValueError("communication masks must be (n, n)")


class ReplayBuffer:
    """Ring buffer; the oldest entries are evicted first."""

    def __init__(self, capacity: int = 40000):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items = [None] * capacity
        self._next = 0
        self._size = 0

    def __len__(self):
        return self._size

    def add(self, exp: Experience):
        self._items[self._next] = exp
        self._next = (self._next + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def items(self) -> list:
        """Contents from oldest to newest."""
        if self._size < self.capacity:
            return self._items[: self._size]
        return self._items[self._next:] + self._items[: self._next]

    def sample(self, k: int, rng: np.random.Generator) -> list:
        if k > self._size:
            raise ValueError(f"cannot sample {k} from {self._size} experiences")
        idx = rng.choice(self._size, size=k, replace=False)
        return [self._items[i] for i in idx]

    def count(self, expert: bool) -> int:
        return sum(1 for e in self.items() if e.expert == expert)


def epsilon(episode: int, cfg: TrainConfig) -> float:
    if episode < 0:
        raise ValueError("episode must be non-negative")
    return max(cfg.epsilon_min, cfg.epsilon_start - episode * cfg.epsilon_step)


def td_targets(rewards, next_q_max, dones, gamma: float) -> np.ndarray:
    """``y = r + gamma * max_a' Q'(o', a')``, with the bootstrap dropped at episode end."""
    rewards = np.asarray(rewards, dtype=np.float64)
    notdone = 1.0 - np.asarray(dones, dtype=np.float64)
    while notdone.ndim < rewards.ndim:
        notdone = notdone[..., None]
    return rewards + gamma * np.asarray(next_q_max) * notdone


def target_network(model: GdnModel) -> GdnModel:
    return copy.deepcopy(model)


def sync_target(model: GdnModel, target: GdnModel) -> None:
    """Hard copy of every parameter into the target network."""
    src = model.parameters()
    for k, v in target.parameters().items():
        v[...] = src[k]


def stack_batch(batch: list) -> dict:
    return {
        "obs": np.stack([e.obs for e in batch]),
        "actions": np.stack([e.actions for e in batch]).astype(np.int64),
        "next_obs": np.stack([e.next_obs for e in batch]),
        "rewards": np.stack([e.rewards for e in batch]),
        "comm": np.stack([e.comm for e in batch]),
        "next_comm": np.stack([e.next_comm for e in batch]),
        "done": np.array([e.done for e in batch]),
    }


def q_regression_step(model: GdnModel, arrays: dict, targets, optimizer, cfg: TrainConfig, store=None) -> float:
    """One gradient step of mean squared error between chosen Q-values and ``targets``."""
    store = store or optimizer.store
    store.zero_grad()
    leaves = store.leaves()
    inbox = np.swapaxes(arrays["comm"], -1, -2)
    q = forward_tensors(model, inbox, arrays["obs"], params=leaves).outputs
    onehot = np.eye(q.shape[-1])[arrays["actions"]]
    chosen = (q * onehot).sum(axis=-1)
    err = chosen - Tensor(targets)
    loss = (err * err).mean()
    store.backward(loss)
    store.clip_grad(cfg.grad_clip)
    optimizer.step()
    return float(loss.data)


def dqn_update(model: GdnModel, buffer: ReplayBuffer, target: GdnModel, cfg: TrainConfig, optimizer,
               rng: np.random.Generator, store: ParamStore | None = None):
    """``train_steps`` TD steps on fresh minibatches. Returns mean loss, or ``None``
    when the buffer holds fewer than ``dgn_batch_size`` experiences."""
    if len(buffer) < cfg.dgn_batch_size:
        return None
    losses = []
    for _ in range(cfg.train_steps):
        arrays = stack_batch(buffer.sample(cfg.dgn_batch_size, rng))
        q_next, _ = forward(target, arrays["next_comm"], arrays["next_obs"])
        y = td_targets(arrays["rewards"], q_next.max(axis=-1), arrays["done"], cfg.gamma)
        losses.append(q_regression_step(model, arrays, y, optimizer, cfg, store))
    return float(np.mean(losses))
