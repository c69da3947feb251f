"""Train/evaluate loop, best-during-training and seed aggregation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import learn
from ..envs import ENVS, MAX, MIN, boxpushing_expert, make_env
from ..gdn import Augmenter, augmented_dim, build_model, save_model
from ..learn.dqn import Experience
from .config import RunConfig


@dataclass(frozen=True)
class MetricRecord:
    epoch: int
    metric: str
    value: float


@dataclass(frozen=True)
class AggregateRow:
    env: str
    model: str
    augmentation: str
    metric: str
    mean: float
    ci: float | None
    seeds: tuple  # per-seed best values


def _streams(seed: int):
    init, train, evals = np.random.SeedSequence(seed).spawn(3)
    return np.random.default_rng(init), np.random.default_rng(train), np.random.default_rng(evals)


def evaluate_policy(model, env, episodes, rng, augmenter=None, mode="stochastic") -> dict:
    batch = learn.collect(model, env, episodes, rng, augmenter, mode)
    keys = batch.metrics[0].keys()
    return {k: float(np.mean([m[k] for m in batch.metrics])) for k in keys}


def _expert_batch(env, steps, rng, augmenter):
    """Scripted-expert episodes recorded like agent episodes."""
    out, total = [], 0
    while total < steps:
        e = make_env(env.cfg)
        res = e.reset(rng)
        recs = []
        if augmenter is not None:
            augmenter.reset()
        while not res.done:
            obs = res.observations if augmenter is None else augmenter(res.observations)
            act = boxpushing_expert(e)
            nxt = e.step(act)
            recs.append((obs, np.swapaxes(res.comm_mask, 0, 1), act, nxt.rewards, res.active, nxt.agent_done))
            res = nxt
        total += len(recs)
        out.append(recs)
    return out


def _as_batch(episodes) -> learn.EpisodeBatch:
    t = max(len(ep) for ep in episodes)
    b = len(episodes)
    first = episodes[0][0]
    n, d = first[0].shape
    arr = {
        "obs": np.zeros((t, b, n, d)), "inbox": np.zeros((t, b, n, n), dtype=bool),
        "actions": np.zeros((t, b, n), dtype=np.int64), "rewards": np.zeros((t, b, n)),
        "active": np.zeros((t, b, n), dtype=bool), "agent_done": np.zeros((t, b, n), dtype=bool),
        "valid": np.zeros((t, b), dtype=bool),
    }
    for j, ep in enumerate(episodes):
        for k, (o, ib, a, r, act, done) in enumerate(ep):
            arr["obs"][k, j], arr["inbox"][k, j], arr["actions"][k, j] = o, ib, a
            arr["rewards"][k, j], arr["active"][k, j], arr["agent_done"][k, j] = r, act, done
            arr["valid"][k, j] = True
    return learn.EpisodeBatch(metrics=[], **arr)


class Trainer:
    """Owns the model, optimiser and (for value-based models) the replay state."""

    def __init__(self, cfg: RunConfig, env, model, rng, augmenter):
        self.cfg, self.env, self.model, self.rng, self.aug = cfg, env, model, rng, augmenter
        self.tc = cfg.train
        self.store = learn.ParamStore(model)
        self.optim = learn.make_optimizer(self.store, self.tc)
        self.episodes = 0
        if cfg.value_based:
            self.buffer = learn.ReplayBuffer(self.tc.buffer_capacity)
            self.mix = learn.Interleaver(self.buffer, self.tc.num_normal, self.tc.num_expert, cfg.imitation)
            self.target = learn.target_network(model)
        self.agent_steps = 0

    def epoch(self) -> dict:
        return self._dqn_epoch() if self.cfg.value_based else self._a2c_epoch()

    def _a2c_epoch(self) -> dict:
        stats = []
        for _ in range(self.tc.epoch_size):
            for batch in learn.collect_steps(self.model, self.env, self.tc.batch_size, self.rng, self.aug):
                stats.append(learn.a2c_update(self.model, batch, self.tc, self.optim, self.store))
                self.episodes += batch.num_episodes
                self.agent_steps += batch.num_steps
            if self.cfg.imitation:
                owed = self.tc.num_expert * self.tc.batch_size // self.tc.num_normal
                ex = _as_batch(_expert_batch(self.env, owed, self.rng, self.aug))
                stats.append(learn.a2c_update(self.model, ex, self.tc, self.optim, self.store))
        return {k: float(np.mean([s[k] for s in stats])) for k in ("loss", "policy_loss", "value_loss")}

    def _episode(self, expert=False):
        env = make_env(self.env.cfg)
        res = env.reset(self.rng)
        if self.aug is not None:
            self.aug.reset()
        eps = learn.epsilon(self.episodes, self.tc)
        obs = self.aug(res.observations) if self.aug is not None else res.observations
        while not res.done:
            if expert:
                act = boxpushing_expert(env)
            else:
                q, _ = _forward1(self.model, res.comm_mask, obs)
                act = learn.select_actions(q, "epsilon", self.rng, eps)
            nxt = env.step(act)
            nobs = self.aug(nxt.observations) if self.aug is not None else nxt.observations
            exp = Experience(obs, act, nobs, nxt.rewards, res.comm_mask, nxt.comm_mask, nxt.done)
            if expert:
                if not self.mix.wants_expert:
                    break
                self.mix.add_expert(exp)
            else:
                self.mix.add_agent(exp)
                self.agent_steps += 1
            res, obs = nxt, nobs

    def _dqn_epoch(self) -> dict:
        losses = []
        goal = self.agent_steps + self.tc.epoch_size * self.tc.batch_size
        while self.agent_steps < goal:
            self._episode()
            while self.mix.wants_expert:
                self._episode(expert=True)
            self.episodes += 1
            loss = learn.dqn_update(self.model, self.buffer, self.target, self.tc, self.optim, self.rng, self.store)
            if loss is not None:
                losses.append(loss)
            if self.episodes % self.tc.update_interval == 0:
                learn.sync_target(self.model, self.target)
        return {
            "loss": float(np.mean(losses)) if losses else float("nan"),
            "epsilon": learn.epsilon(self.episodes, self.tc),
            "buffer": float(len(self.buffer)),
        }


def _forward1(model, comm, obs):
    from ..gdn import forward

    return forward(model, comm, obs)


def build_for(cfg: RunConfig, rng):
    env = make_env(cfg.env)
    if cfg.model == "random":
        return env, None
    d = augmented_dim(env.obs_dim, cfg.augmentation)
    model = build_model(cfg.model, d, env.num_actions, rng, hidden=cfg.hid_size, passes=cfg.comm_passes,
                        recurrent=cfg.recurrent)
    return env, model


def run_experiment(cfg: RunConfig, out_dir=None, log=None) -> list:
    """Evaluate the initial model (epoch 0), then train and evaluate each epoch.

    With ``out_dir`` the records go to ``<label>.jsonl`` and checkpoints to
    ``<label>.ckpt.npz``.
    """
    init_rng, train_rng, eval_rng = _streams(cfg.seed)
    env, model = build_for(cfg, init_rng)
    aug = Augmenter(cfg.augmentation, train_rng) if cfg.augmentation.mode != "none" else None
    eval_aug = Augmenter(cfg.augmentation, eval_rng) if aug is not None else None
    mode = "random" if model is None else ("greedy" if cfg.eval_mode == "greedy" else "stochastic")
    trainer = Trainer(cfg, env, model, train_rng, aug) if model is not None else None
    records = []
    fh = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        fh = open(out / f"{cfg.label}.jsonl", "w", encoding="utf-8")
        header = {"type": "header", "env": f"{cfg.env.env_name}-{cfg.env.difficulty}", "model": cfg.model,
                  "augmentation": cfg.augmentation.label, "seed": cfg.seed,
                  "metrics": ENVS[cfg.env.env_name].metrics, "config": cfg.to_dict()}
        fh.write(json.dumps(header, default=str) + "\n")
    try:
        for epoch in range(cfg.num_epochs + 1):
            train_stats = trainer.epoch() if (epoch > 0 and trainer is not None) else {}
            scores = evaluate_policy(model, env, cfg.eval_episodes, eval_rng, eval_aug, mode)
            new = [MetricRecord(epoch, k, v) for k, v in sorted(scores.items())]
            records.extend(new)
            if fh is not None:
                if train_stats:
                    fh.write(json.dumps({"type": "train", "epoch": epoch, **train_stats}) + "\n")
                for r in new:
                    fh.write(json.dumps({"type": "metric", "epoch": r.epoch, "metric": r.metric, "value": r.value}) + "\n")
                fh.flush()
                if model is not None and cfg.checkpoint:
                    save_model(model, Path(out_dir) / f"{cfg.label}.ckpt.npz")
            if log is not None:
                log(epoch, scores, train_stats)
            if cfg.stop_metric and _reached(scores.get(cfg.stop_metric), cfg):
                break
    finally:
        if fh is not None:
            fh.close()
    return records


def _reached(value, cfg: RunConfig) -> bool:
    if value is None:
        return False
    pol = ENVS[cfg.env.env_name].metrics.get(cfg.stop_metric, MAX)
    return value >= cfg.stop_value if pol == MAX else value <= cfg.stop_value


def best_during_training(records, polarity: dict) -> dict:
    """Best value per metric: max or min according to ``polarity``."""
    series = {}
    for r in records:
        series.setdefault(r.metric, []).append(r.value)
    if not series:
        raise ValueError("no metric records")
    best = {}
    for metric, values in series.items():
        pol = polarity.get(metric, MAX)
        if pol not in (MAX, MIN):
            raise ValueError(f"unknown polarity {pol!r} for {metric}")
        best[metric] = max(values) if pol == MAX else min(values)
    return best


def aggregate(values) -> tuple:
    """``(mean, half_width)`` with half-width 1.96 x SEM. The CI is ``None`` below 2 seeds."""
    v = np.asarray(list(values), dtype=np.float64)
    if v.size == 0:
        raise ValueError("nothing to aggregate")
    mean = float(v.mean())
    if v.size < 2:
        return mean, None
    return mean, float(1.96 * v.std(ddof=1) / math.sqrt(v.size))


def read_run(path) -> tuple:
    header, records = None, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            if rec.get("type") == "header":
                header = rec
            elif rec.get("type") == "metric":
                records.append(MetricRecord(rec["epoch"], rec["metric"], rec["value"]))
    if header is None:
        raise ValueError(f"{path} has no header record")
    return header, records


def aggregate_dir(run_dir) -> list:
    groups = {}
    for path in sorted(Path(run_dir).glob("*.jsonl")):
        header, records = read_run(path)
        key = (header["env"], header["model"], header["augmentation"])
        best = best_during_training(records, header["metrics"])
        groups.setdefault(key, []).append((header["seed"], best))
    rows = []
    for (env, model, aug), runs in sorted(groups.items()):
        runs.sort(key=lambda x: x[0])
        for metric in sorted(runs[0][1]):
            vals = tuple(b[metric] for _, b in runs)
            mean, ci = aggregate(vals)
            rows.append(AggregateRow(env, model, aug, metric, mean, ci, vals))
    return rows


CSV_COLUMNS = ("env", "model", "augmentation", "metric", "mean", "ci", "seeds")


def write_report(rows, path) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([r.env, r.model, r.augmentation, r.metric, f"{r.mean:.6g}",
                        "" if r.ci is None else f"{r.ci:.6g}", len(r.seeds)])
