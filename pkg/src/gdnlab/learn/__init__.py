"""Training: parameter store and optimisers, A2C, DQN, replay and imitation."""

from .a2c import a2c_loss, a2c_update, batch_returns, discounted_returns
from .dqn import (
    Experience,
    ReplayBuffer,
    dqn_update,
    epsilon,
    q_regression_step,
    stack_batch,
    sync_target,
    target_network,
    td_targets,
)
from .imitation import Interleaver, imitation_interleave
from .params import OPTIMIZERS, TRAIN_FIELDS, ParamStore, TrainConfig, backward, make_optimizer
from .rollout import EpisodeBatch, collect, collect_steps, sample_categorical, select_actions, softmax

__all__ = [
    "EpisodeBatch", "Experience", "Interleaver", "OPTIMIZERS", "ParamStore", "ReplayBuffer",
    "TRAIN_FIELDS", "TrainConfig", "a2c_loss", "a2c_update", "backward", "batch_returns", "collect",
    "collect_steps", "discounted_returns", "dqn_update", "epsilon", "imitation_interleave",
    "make_optimizer", "q_regression_step", "sample_categorical", "select_actions", "softmax",
    "stack_batch", "sync_target", "target_network", "td_targets",
]
