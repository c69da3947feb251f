"""Batched episode collection over parallel environment copies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..envs import MultiAgentEnv, episode_metrics, make_env
from ..gdn import GdnModel, evaluate, initial_hidden


@dataclass
class EpisodeBatch:
    """Time-major padded episodes. ``mask`` marks agent-steps that count."""

    obs: np.ndarray  # (T, B, n, d), augmented
    inbox: np.ndarray  # (T, B, n, n)
    actions: np.ndarray  # (T, B, n)
    rewards: np.ndarray  # (T, B, n)
    active: np.ndarray  # (T, B, n)
    agent_done: np.ndarray  # (T, B, n)
    valid: np.ndarray  # (T, B)
    metrics: list

    @property
    def mask(self) -> np.ndarray:
        return self.active & self.valid[..., None]

    @property
    def num_steps(self) -> int:
        return int(self.valid.sum())

    @property
    def num_episodes(self) -> int:
        return self.valid.shape[1]


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def sample_categorical(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One draw per row; ``probs`` is ``(..., k)``."""
    flat = probs.reshape(-1, probs.shape[-1])
    cdf = np.cumsum(flat, axis=1)
    u = rng.random(flat.shape[0])[:, None] * cdf[:, -1:]
    idx = (u >= cdf).sum(axis=1)
    return np.minimum(idx, flat.shape[1] - 1).reshape(probs.shape[:-1])


def select_actions(outputs, mode, rng, epsilon=0.0, num_actions=None):
    """Turn per-agent outputs into actions for ``stochastic``, ``greedy``, ``epsilon`` or ``random``."""
    if mode == "random":
        return rng.integers(0, num_actions, size=outputs)
    if mode == "stochastic":
        return sample_categorical(softmax(outputs), rng)
    greedy = np.argmax(outputs, axis=-1)
    if mode == "greedy":
        return greedy
    if mode == "epsilon":
        explore = rng.random(greedy.shape) < epsilon
        return np.where(explore, rng.integers(0, outputs.shape[-1], size=greedy.shape), greedy)
    raise ValueError(f"unknown action mode {mode!r}")


def collect(model: GdnModel | None, env: MultiAgentEnv, episodes: int, rng: np.random.Generator,
            augmenter=None, mode="stochastic", epsilon=0.0) -> EpisodeBatch:
    """Run ``episodes`` episodes side by side and record them.

    ``model`` may be ``None`` with ``mode='random'``.
    """
    envs = [make_env(env.cfg) for _ in range(episodes)]
    results = [e.reset(rng) for e in envs]
    traces = [[r] for r in results]
    n = env.n
    hidden = initial_hidden(model, n, episodes) if model is not None else None
    if augmenter is not None:
        augmenter.reset()
    alive = np.ones(episodes, dtype=bool)
    rec = {k: [] for k in ("obs", "inbox", "actions", "rewards", "active", "agent_done", "valid")}
    while alive.any():
        raw = np.stack([r.observations for r in results])
        obs = augmenter(raw) if augmenter is not None else raw
        inbox = np.swapaxes(np.stack([r.comm_mask for r in results]), -1, -2)
        active = np.stack([r.active for r in results])
        if mode == "random":
            actions = select_actions((episodes, n), "random", rng, num_actions=env.num_actions)
        else:
            out, _, hidden = evaluate(model, np.swapaxes(inbox, -1, -2), obs, hidden)
            actions = select_actions(out, mode, rng, epsilon)
        rewards = np.zeros((episodes, n))
        done = np.zeros((episodes, n), dtype=bool)
        for b in np.flatnonzero(alive):
            r = envs[b].step(actions[b])
            results[b] = r
            traces[b].append(r)
            rewards[b], done[b] = r.rewards, r.agent_done
        for k, v in (("obs", obs), ("inbox", inbox), ("actions", actions), ("rewards", rewards),
                     ("active", active), ("agent_done", done), ("valid", alive.copy())):
            rec[k].append(v)
        if hidden is not None:
            hidden = hidden * (~done)[..., None]
        alive = np.array([not r.done for r in results])
    metrics = [episode_metrics(tr, env.metrics) for tr in traces]
    arrays = {k: np.stack(v) for k, v in rec.items()}
    arrays["rewards"] = arrays["rewards"] * arrays["valid"][..., None]
    arrays["active"] = arrays["active"] & arrays["valid"][..., None]
    return EpisodeBatch(metrics=metrics, **arrays)


def collect_steps(model, env, steps, rng, augmenter=None, mode="stochastic") -> list:
    """Collect batches of parallel episodes until at least ``steps`` env steps are recorded."""
    per = max(1, -(-steps // env.cfg.max_steps))
    batches, total = [], 0
    while total < steps:
        b = collect(model, env, per, rng, augmenter, mode)
        batches.append(b)
        total += b.num_steps
    return batches
