"""Advantage actor-critic update over padded episode batches."""

from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, concat
from ..gdn import GdnModel, forward_tensors
from .params import ParamStore, TrainConfig
from .rollout import EpisodeBatch


def discounted_returns(rewards, gamma: float, cut=None) -> np.ndarray:
    """Reward-to-go along axis 0. ``cut[t]`` stops the sum after step ``t``."""
    r = np.asarray(rewards, dtype=np.float64)
    out = np.zeros_like(r)
    running = np.zeros(r.shape[1:])
    for t in range(r.shape[0] - 1, -1, -1):
        if cut is not None:
            running = running * (1.0 - np.asarray(cut[t], dtype=np.float64))
        running = r[t] + gamma * running
        out[t] = running
    return out


def batch_returns(batch: EpisodeBatch, gamma: float) -> np.ndarray:
    return discounted_returns(batch.rewards, gamma, cut=batch.agent_done)


def _outputs(model: GdnModel, batch: EpisodeBatch, leaves):
    t, b, n, _ = batch.obs.shape
    if model.recurrent is None:
        flat = forward_tensors(model, batch.inbox.reshape(t * b, n, n), batch.obs.reshape(t * b, n, -1), params=leaves)
        return flat.outputs.reshape(t, b, n, -1), flat.values.reshape(t, b, n)
    h = Tensor(np.zeros((b, n, model.hidden_dim)))
    outs, vals = [], []
    for k in range(t):
        res = forward_tensors(model, batch.inbox[k], batch.obs[k], h, params=leaves)
        outs.append(res.outputs.reshape(1, b, n, -1))
        vals.append(res.values.reshape(1, b, n))
        h = res.hidden * (~batch.agent_done[k])[..., None].astype(np.float64)
    return concat(outs, axis=0), concat(vals, axis=0)


def a2c_loss(model: GdnModel, batch: EpisodeBatch, cfg: TrainConfig, leaves):
    """Loss tensor and statistics. Advantages are constants for the policy term."""
    if batch.num_steps == 0 or not batch.mask.any():
        raise ValueError("empty episode batch")
    if model.value_head is None:
        raise ValueError("actor-critic training needs a value head")
    logits, values = _outputs(model, batch, leaves)
    returns = batch_returns(batch, cfg.gamma)
    w = batch.mask.astype(np.float64)
    logp = logits.log_softmax(axis=-1)
    onehot = np.eye(logits.shape[-1])[batch.actions]
    chosen = (logp * onehot).sum(axis=-1)
    adv = (returns - values.data) * w
    policy = -(chosen * adv).sum()
    err = (Tensor(returns) - values) * w
    value = (err * err).sum()
    loss = policy + cfg.value_coeff * value
    entropy = None
    if cfg.entropy_coeff:
        ent = -((logp.exp() * logp).sum(axis=-1) * w).sum()
        loss = loss - cfg.entropy_coeff * ent
        entropy = float(ent.data)
    loss = loss * (1.0 / batch.num_steps)
    stats = {
        "loss": float(loss.data),
        "policy_loss": float(policy.data) / batch.num_steps,
        "value_loss": float(value.data) / batch.num_steps,
        "num_steps": batch.num_steps,
    }
    if entropy is not None:
        stats["entropy"] = entropy / batch.num_steps
    return loss, stats


def a2c_update(model: GdnModel, batch: EpisodeBatch, cfg: TrainConfig, optimizer, store: ParamStore | None = None) -> dict:
    """One gradient step on the actor-critic loss of ``batch``."""
    store = store or optimizer.store
    store.zero_grad()
    leaves = store.leaves()
    loss, stats = a2c_loss(model, batch, cfg, leaves)
    store.backward(loss)
    stats["grad_norm"] = store.clip_grad(cfg.grad_clip)
    optimizer.step()
    return stats
