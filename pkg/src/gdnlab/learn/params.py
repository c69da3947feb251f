"""Parameter store, gradient plumbing, optimisers and training constants."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from ..autodiff import AutodiffError, Tensor
from ..gdn import GdnModel


@dataclass(frozen=True)
class TrainConfig:
    lrate: float = 0.001
    gamma: float = 1.0
    value_coeff: float = 0.01
    entropy_coeff: float = 0.0
    batch_size: int = 500
    epoch_size: int = 10
    dgn_batch_size: int = 128
    update_interval: int = 5
    train_steps: int = 5
    epsilon_start: float = 1.0
    epsilon_min: float = 0.1
    epsilon_step: float = 2e-5
    buffer_capacity: int = 40000
    grad_clip: float = 5.0
    optimizer: str = "rmsprop"  # sgd | rmsprop | adam
    num_normal: int = 500
    num_expert: int = 100

    def __post_init__(self):
        positive = ("lrate", "batch_size", "epoch_size", "dgn_batch_size", "update_interval",
                    "train_steps", "buffer_capacity")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.epsilon_min > self.epsilon_start:
            raise ValueError("epsilon_min must not exceed epsilon_start")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


TRAIN_FIELDS = tuple(f.name for f in fields(TrainConfig))


class ParamStore:
    """Named views of a model's parameter arrays with matching gradient buffers."""

    def __init__(self, model: GdnModel):
        self.model = model
        self.params = model.parameters()
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}
        self._leaves = {}

    def __len__(self):
        return len(self.params)

    def leaves(self) -> dict:
        """Fresh leaf tensors sharing memory with the parameters."""
        self._leaves = {k: Tensor(v, requires_grad=True, name=k) for k, v in self.params.items()}
        return self._leaves

    def zero_grad(self):
        for g in self.grads.values():
            g.fill(0.0)

    def backward(self, loss: Tensor) -> dict:
        if not self._leaves:
            raise AutodiffError("no recorded forward pass; call leaves() before the forward")
        if loss.data.size != 1:
            raise AutodiffError("loss must be a scalar")
        if not np.isfinite(loss.data).all():
            raise AutodiffError("loss is not finite")
        loss.backward()
        for k, leaf in self._leaves.items():
            if leaf.grad is not None:
                self.grads[k] += leaf.grad
        self._leaves = {}
        return self.grads

    def grad_norm(self) -> float:
        return float(np.sqrt(sum(float((g * g).sum()) for g in self.grads.values())))

    def clip_grad(self, max_norm: float) -> float:
        norm = self.grad_norm()
        if max_norm and norm > max_norm:
            scale = max_norm / (norm + 1e-12)
            for g in self.grads.values():
                g *= scale
        return norm

    def snapshot(self) -> dict:
        return {k: v.copy() for k, v in self.params.items()}

    def load(self, values: dict):
        for k, v in values.items():
            self.params[k][...] = v


def backward(store: ParamStore, loss: Tensor) -> dict:
    """Accumulate exact gradients of ``loss`` into ``store.grads``."""
    return store.backward(loss)


class SGD:
    def __init__(self, store: ParamStore, lr: float):
        self.store, self.lr = store, lr

    def step(self):
        for k, p in self.store.params.items():
            p -= self.lr * self.store.grads[k]


class RMSprop:
    def __init__(self, store: ParamStore, lr: float, alpha=0.97, eps=1e-6):
        self.store, self.lr, self.alpha, self.eps = store, lr, alpha, eps
        self.sq = {k: np.zeros_like(v) for k, v in store.params.items()}

    def step(self):
        for k, p in self.store.params.items():
            g = self.store.grads[k]
            s = self.sq[k]
            s *= self.alpha
            s += (1 - self.alpha) * g * g
            p -= self.lr * g / (np.sqrt(s) + self.eps)


class Adam:
    def __init__(self, store: ParamStore, lr: float, betas=(0.9, 0.999), eps=1e-8):
        self.store, self.lr, self.betas, self.eps = store, lr, betas, eps
        self.m = {k: np.zeros_like(v) for k, v in store.params.items()}
        self.v = {k: np.zeros_like(v) for k, v in store.params.items()}
        self.t = 0

    def step(self):
        self.t += 1
        b1, b2 = self.betas
        for k, p in self.store.params.items():
            g = self.store.grads[k]
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            mhat = self.m[k] / (1 - b1**self.t)
            vhat = self.v[k] / (1 - b2**self.t)
            p -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


OPTIMIZERS = {"sgd": SGD, "rmsprop": RMSprop, "adam": Adam}


def make_optimizer(store: ParamStore, cfg: TrainConfig):
    return OPTIMIZERS[cfg.optimizer](store, cfg.lrate)
