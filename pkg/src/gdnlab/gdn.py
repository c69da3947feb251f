"""Graph decision networks: message passing over the agent graph plus a shared head.

Observations are node attributes and the communication mask gives the edges.
Each layer mixes a node's own value with an aggregate of its in-neighbours.
One actor head, with a single parameter set, then maps every final node value
to action logits or Q-values. Arrays are batched as ``(B, n, d)``. Unbatched
``(n, d)`` inputs are accepted by the public entry points.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Tensor, concat, no_grad
from .graph import AttributedGraph, NodePermutation, permute

LAYER_KINDS = ("mean-agg", "sum-agg", "attention", "gated-mean")
ACTIVATIONS = ("tanh", "identity")
PRESETS = {
    "commnet": dict(kind="mean-agg"),
    "ic3net": dict(kind="gated-mean"),
    "tarmac": dict(kind="attention"),
    "t-ic3net": dict(kind="attention", gated=True),
    "dgn-style": dict(kind="attention", heads=4),
}
KEY_DIM = 16
VALUE_DIM = 32
CHECKPOINT_VERSION = 1


class GdnError(ValueError):
    pass


@dataclass
class LayerSpec:
    kind: str
    in_dim: int
    out_dim: int
    update_params: dict
    agg_params: dict = field(default_factory=dict)
    readout_params: dict = field(default_factory=dict)
    heads: int = 1
    gated: bool = False  # sender gate on attention values
    activation: str = "tanh"

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise GdnError(f"unknown layer kind {self.kind!r}")
        if self.activation not in ACTIVATIONS:
            raise GdnError(f"unknown activation {self.activation!r}")
        if self.heads < 1:
            raise GdnError("attention needs at least one head")
        self._check()

    def _check(self):
        def need(group, name, shape):
            arr = group.get(name)
            if arr is None or tuple(arr.shape) != shape:
                got = None if arr is None else tuple(arr.shape)
                raise GdnError(f"{self.kind} parameter {name}: expected {shape}, got {got}")

        i, o = self.in_dim, self.out_dim
        agg_in = self.heads * self.agg_params["Wv0"].shape[1] if self.kind == "attention" else i
        need(self.update_params, "W_self", (i, o))
        need(self.update_params, "W_agg", (agg_in, o))
        need(self.update_params, "b", (o,))
        if self.kind == "gated-mean" or self.gated:
            need(self.agg_params, "w_gate", (i, 1))
            need(self.agg_params, "b_gate", (1,))
        if self.kind == "attention":
            dk = self.agg_params["Wq0"].shape[1]
            for h in range(self.heads):
                need(self.agg_params, f"Wq{h}", (i, dk))
                need(self.agg_params, f"Wk{h}", (i, dk))
        if self.readout_params:
            need(self.readout_params, "W_read", (i, o))

    def named_parameters(self):
        for group, d in (("update", self.update_params), ("agg", self.agg_params), ("read", self.readout_params)):
            for k in sorted(d):
                yield f"{group}.{k}", d[k]


@dataclass
class GdnModel:
    layers: list
    actor_head: dict  # W (hid, actions), b (actions,)
    value_head: dict | None = None  # W (hid, 1), b (1,)
    recurrent: dict | None = None  # gated recurrent cell parameters
    hidden_dim: int | None = None
    style: str = "custom"

    def __post_init__(self):
        if not self.layers:
            raise GdnError("a model needs at least one message-passing layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise GdnError(f"layer dims do not chain: {a.out_dim} -> {b.in_dim}")
        if self.actor_head["W"].shape[0] != self.layers[-1].out_dim:
            raise GdnError("actor head input does not match the last layer")
        if self.recurrent is not None:
            if self.hidden_dim != self.layers[0].in_dim or self.hidden_dim != self.layers[-1].out_dim:
                raise GdnError("recurrent models need hidden_dim in and out of the layer stack")

    @property
    def obs_dim(self) -> int:
        if self.recurrent is not None:
            return self.recurrent["Wz"].shape[0]
        return self.layers[0].in_dim

    @property
    def num_outputs(self) -> int:
        return self.actor_head["W"].shape[1]

    def named_parameters(self):
        if self.recurrent is not None:
            for k in sorted(self.recurrent):
                yield f"rnn.{k}", self.recurrent[k]
        for m, layer in enumerate(self.layers):
            for k, v in layer.named_parameters():
                yield f"layers.{m}.{k}", v
        for k in sorted(self.actor_head):
            yield f"actor.{k}", self.actor_head[k]
        if self.value_head is not None:
            for k in sorted(self.value_head):
                yield f"value.{k}", self.value_head[k]

    def parameters(self) -> dict:
        return dict(self.named_parameters())

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters().values())

    def config(self) -> dict:
        return {
            "style": self.style,
            "hidden_dim": self.hidden_dim,
            "recurrent": self.recurrent is not None,
            "value_head": self.value_head is not None,
            "layers": [
                dict(kind=l.kind, in_dim=l.in_dim, out_dim=l.out_dim, heads=l.heads,
                     gated=l.gated, activation=l.activation, readout=bool(l.readout_params))
                for l in self.layers
            ],
        }


def _uniform(rng, fan_in, shape):
    bound = 1.0 / math.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


def make_layer(kind, in_dim, out_dim, rng, *, heads=1, gated=False, readout=False,
               activation="tanh", key_dim=KEY_DIM, value_dim=VALUE_DIM) -> LayerSpec:
    agg = {}
    agg_in = in_dim
    if kind == "attention":
        for h in range(heads):
            agg[f"Wq{h}"] = _uniform(rng, in_dim, (in_dim, key_dim))
            agg[f"Wk{h}"] = _uniform(rng, in_dim, (in_dim, key_dim))
            agg[f"Wv{h}"] = _uniform(rng, in_dim, (in_dim, value_dim))
        agg_in = heads * value_dim
    if kind == "gated-mean" or gated:
        agg["w_gate"] = _uniform(rng, in_dim, (in_dim, 1))
        agg["b_gate"] = _uniform(rng, in_dim, (1,))
    upd = {
        "W_self": _uniform(rng, in_dim, (in_dim, out_dim)),
        "W_agg": _uniform(rng, agg_in, (agg_in, out_dim)),
        "b": _uniform(rng, in_dim, (out_dim,)),
    }
    read = {"W_read": _uniform(rng, in_dim, (in_dim, out_dim))} if readout else {}
    return LayerSpec(kind, in_dim, out_dim, upd, agg, read, heads=heads, gated=gated, activation=activation)


def make_gru(in_dim, hid, rng) -> dict:
    p = {}
    for gate in "zrh":
        p[f"W{gate}"] = _uniform(rng, hid, (in_dim, hid))
        p[f"U{gate}"] = _uniform(rng, hid, (hid, hid))
        p[f"b{gate}"] = _uniform(rng, hid, (hid,))
    return p


def build_model(style, obs_dim, num_actions, rng, *, hidden=128, passes=4, heads=None,
                recurrent=False, value_head=None, readout=False, activation="tanh") -> GdnModel:
    """Build a preset (``commnet``, ``ic3net``, ``tarmac``, ``t-ic3net``, ``dgn-style``)
    or a single layer kind from ``LAYER_KINDS``."""
    if style in PRESETS:
        opts = dict(PRESETS[style])
    elif style in LAYER_KINDS:
        opts = dict(kind=style)
    else:
        raise GdnError(f"unknown model style {style!r}")
    if heads is not None:
        opts["heads"] = heads
    kind = opts.pop("kind")
    if value_head is None:
        value_head = style != "dgn-style"
    rnn = make_gru(obs_dim, hidden, rng) if recurrent else None
    layers = []
    d = hidden if recurrent else obs_dim
    for _ in range(passes):
        layers.append(make_layer(kind, d, hidden, rng, readout=readout, activation=activation, **opts))
        d = hidden
    actor = {"W": _uniform(rng, hidden, (hidden, num_actions)), "b": _uniform(rng, hidden, (num_actions,))}
    vh = {"W": _uniform(rng, hidden, (hidden, 1)), "b": _uniform(rng, hidden, (1,))} if value_head else None
    return GdnModel(layers, actor, vh, rnn, hidden if recurrent else None, style)


# -- augmentation -----------------------------------------------------------------


@dataclass(frozen=True)
class AugmentationConfig:
    mode: str = "none"  # none | unique-id | rni
    rni_ratio: float = 0.25
    max_agents: int = 0
    persistent: bool = False  # keep one RNI draw for a whole episode

    def __post_init__(self):
        if self.mode not in ("none", "unique-id", "rni"):
            raise GdnError(f"unknown augmentation mode {self.mode!r}")
        if self.mode == "rni" and not 0.0 < self.rni_ratio < 1.0:
            raise GdnError("rni_ratio must lie strictly between 0 and 1")

    @property
    def label(self) -> str:
        if self.mode == "rni":
            return f"rni{self.rni_ratio:g}"
        return self.mode


def rni_width(d: int, ratio: float) -> int:
    """Noise entries to append so that noise is ``ratio`` of the augmented vector."""
    return max(1, int(math.floor(d * ratio / (1.0 - ratio) + 0.5)))


def augmented_dim(d: int, cfg: AugmentationConfig) -> int:
    if cfg.mode == "unique-id":
        return d + cfg.max_agents
    if cfg.mode == "rni":
        return d + rni_width(d, cfg.rni_ratio)
    return d


def augment(obs, cfg: AugmentationConfig, rng: np.random.Generator, noise=None) -> np.ndarray:
    """Append unique IDs or fresh uniform noise to each agent's observation.

    ``obs`` is ``(n, d)`` or ``(B, n, d)``. ``noise`` overrides the RNI draw.
    """
    obs = np.asarray(obs, dtype=np.float64)
    n, d = obs.shape[-2], obs.shape[-1]
    if cfg.mode == "none":
        return obs.copy()
    if cfg.mode == "unique-id":
        if n > cfg.max_agents:
            raise GdnError(f"{n} agents exceed max_agents={cfg.max_agents}")
        ids = np.zeros(obs.shape[:-1] + (cfg.max_agents,))
        ids[..., np.arange(n), np.arange(n)] = 1.0
        return np.concatenate([obs, ids], axis=-1)
    if cfg.max_agents and n > cfg.max_agents:
        raise GdnError(f"{n} agents exceed max_agents={cfg.max_agents}")
    k = rni_width(d, cfg.rni_ratio)
    if noise is None:
        noise = rng.uniform(-1.0, 1.0, size=obs.shape[:-1] + (k,))
    return np.concatenate([obs, noise], axis=-1)


class Augmenter:
    """Stateful wrapper that owns the noise stream and the per-episode draw."""

    def __init__(self, cfg: AugmentationConfig, rng: np.random.Generator):
        self.cfg, self.rng = cfg, rng
        self._noise = None

    def reset(self):
        self._noise = None

    def __call__(self, obs):
        obs = np.asarray(obs, dtype=np.float64)
        if self.cfg.mode != "rni" or not self.cfg.persistent:
            return augment(obs, self.cfg, self.rng)
        if self._noise is None or self._noise.shape[:-1] != obs.shape[:-1]:
            k = rni_width(obs.shape[-1], self.cfg.rni_ratio)
            self._noise = self.rng.uniform(-1.0, 1.0, size=obs.shape[:-1] + (k,))
        return augment(obs, self.cfg, self.rng, noise=self._noise)


# -- forward pass -------------------------------------------------------------------


def inbox_of(comm) -> np.ndarray:
    """Aggregation mask ``(…, n, n)``; entry ``[i, j]`` is true when ``j`` feeds ``i``.

    ``comm`` is a graph or a sender mask with ``comm[i, j]`` meaning ``i`` sends to ``j``.
    """
    if isinstance(comm, AttributedGraph):
        return comm.inbox()
    mask = np.asarray(comm, dtype=bool)
    return np.swapaxes(mask, -1, -2)


def _act(x: Tensor, name: str) -> Tensor:
    return x.tanh() if name == "tanh" else x


def _layer(layer: LayerSpec, v: Tensor, inbox: np.ndarray, P, prefix: str) -> Tensor:
    p = lambda g, k: P(f"{prefix}.{g}.{k}")  # noqa: E731
    deg = inbox.sum(axis=-1, keepdims=True)
    if layer.kind == "attention":
        gate = None
        if layer.gated:
            gate = (v @ p("agg", "w_gate") + p("agg", "b_gate")).sigmoid()
        parts = []
        for h in range(layer.heads):
            q = v @ p("agg", f"Wq{h}")
            k = v @ p("agg", f"Wk{h}")
            val = v @ p("agg", f"Wv{h}")
            if gate is not None:
                val = val * gate
            scores = (q @ k.mT) * (1.0 / math.sqrt(q.shape[-1]))
            parts.append(scores.masked_softmax(inbox) @ val)
        agg = parts[0] if len(parts) == 1 else concat(parts, axis=-1)
    else:
        msg = v
        if layer.kind == "gated-mean":
            msg = v * (v @ p("agg", "w_gate") + p("agg", "b_gate")).sigmoid()
        weights = inbox.astype(np.float64)
        if layer.kind != "sum-agg":
            weights = weights / np.maximum(deg, 1)
        agg = Tensor(weights) @ msg
    pre = v @ p("update", "W_self") + agg @ p("update", "W_agg") + p("update", "b")
    if layer.readout_params:
        pre = pre + v.mean(axis=-2, keepdims=True) @ p("read", "W_read")
    return _act(pre, layer.activation)


def _gru(x: Tensor, h: Tensor, P) -> Tensor:
    g = lambda k: P(f"rnn.{k}")  # noqa: E731
    z = (x @ g("Wz") + h @ g("Uz") + g("bz")).sigmoid()
    r = (x @ g("Wr") + h @ g("Ur") + g("br")).sigmoid()
    cand = (x @ g("Wh") + (r * h) @ g("Uh") + g("bh")).tanh()
    return (1.0 - z) * cand + z * h


@dataclass
class ForwardResult:
    outputs: Tensor  # (B, n, num_outputs)
    values: Tensor | None  # (B, n, 1)
    hidden: Tensor | None  # (B, n, hidden_dim)
    node_values: Tensor


def forward_tensors(model: GdnModel, inbox, obs, hidden=None, params=None) -> ForwardResult:
    """Recorded forward pass. ``params`` maps names to leaf tensors for training."""
    arrays = model.parameters()
    params = params or {}

    def P(name):
        t = params.get(name)
        return t if t is not None else Tensor(arrays[name])

    x = obs if isinstance(obs, Tensor) else Tensor(obs)
    inbox = np.asarray(inbox, dtype=bool)
    if x.ndim != 3 or inbox.ndim != 3:
        raise GdnError("forward_tensors expects batched (B, n, d) observations and (B, n, n) masks")
    b, n, d = x.shape
    if inbox.shape[-2:] != (n, n):
        raise GdnError(f"communication mask {inbox.shape} does not match {n} agents")
    if d != model.obs_dim:
        raise GdnError(f"observation dim {d} does not match model input {model.obs_dim}")
    new_hidden = None
    if model.recurrent is not None:
        h = hidden if isinstance(hidden, Tensor) else Tensor(
            np.zeros((b, n, model.hidden_dim)) if hidden is None else hidden
        )
        if h.shape != (b, n, model.hidden_dim):
            raise GdnError(f"hidden state shape {h.shape} does not match the model")
        x = _gru(x, h, P)
    for m, layer in enumerate(model.layers):
        x = _layer(layer, x, inbox, P, f"layers.{m}")
    if model.recurrent is not None:
        new_hidden = x
    out = x @ P("actor.W") + P("actor.b")
    val = x @ P("value.W") + P("value.b") if model.value_head is not None else None
    return ForwardResult(out, val, new_hidden, x)


def _batched(comm, obs, hidden):
    obs = np.asarray(obs, dtype=np.float64)
    inbox = inbox_of(comm)
    single = obs.ndim == 2
    if single:
        obs = obs[None]
        hidden = None if hidden is None else np.asarray(hidden)[None]
    if inbox.ndim == 2:
        inbox = np.broadcast_to(inbox, (obs.shape[0],) + inbox.shape)
    return single, inbox, obs, hidden


def forward(model: GdnModel, comm, obs, hidden=None):
    """Evaluate without recording. Returns ``(outputs, new_hidden)`` as arrays."""
    single, inbox, obs, hidden = _batched(comm, obs, hidden)
    with no_grad():
        res = forward_tensors(model, inbox, obs, hidden)
    out = res.outputs.data
    hid = None if res.hidden is None else res.hidden.data
    if single:
        out = out[0]
        hid = None if hid is None else hid[0]
    return out, hid


def evaluate(model: GdnModel, comm, obs, hidden=None):
    """Like ``forward`` but also returns the value head output (or ``None``)."""
    single, inbox, obs, hidden = _batched(comm, obs, hidden)
    with no_grad():
        res = forward_tensors(model, inbox, obs, hidden)
    pick = (lambda a: a[0]) if single else (lambda a: a)
    vals = None if res.values is None else pick(res.values.data[..., 0])
    hid = None if res.hidden is None else pick(res.hidden.data)
    return pick(res.outputs.data), vals, hid


def initial_hidden(model: GdnModel, n: int, batch: int | None = None):
    if model.recurrent is None:
        return None
    shape = (n, model.hidden_dim) if batch is None else (batch, n, model.hidden_dim)
    return np.zeros(shape)


def equivariance_check(model: GdnModel, comm: AttributedGraph, obs, sigma: NodePermutation, hidden=None) -> float:
    """Max deviation between ``f(σ∘inputs)`` and ``σ∘f(inputs)``."""
    obs = np.asarray(obs, dtype=np.float64)
    p = sigma.perm
    out, hid = forward(model, comm, obs, hidden)
    obs_p = np.empty_like(obs)
    obs_p[p] = obs
    hid_p = None
    if hidden is not None:
        hid_p = np.empty_like(hidden)
        hid_p[p] = hidden
    out_p, _ = forward(model, permute(comm, sigma), obs_p, hid_p)
    moved = np.empty_like(out)
    moved[p] = out
    return float(np.max(np.abs(out_p - moved))) if out.size else 0.0


# -- checkpoints --------------------------------------------------------------------


def save_model(model: GdnModel, path) -> None:
    meta = dict(version=CHECKPOINT_VERSION, config=model.config())
    arrays = {name: np.asarray(a) for name, a in model.named_parameters()}
    arrays["__meta__"] = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    with open(Path(path), "wb") as fh:
        np.savez(fh, **arrays)


def load_model(path) -> GdnModel:
    with np.load(Path(path)) as data:
        meta = json.loads(bytes(data["__meta__"]).decode("utf-8"))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise GdnError(f"unsupported checkpoint version {meta.get('version')}")
        arrays = {k: data[k].copy() for k in data.files if k != "__meta__"}
    cfg = meta["config"]

    def group(prefix):
        return {k[len(prefix):]: v for k, v in arrays.items() if k.startswith(prefix)}

    layers = []
    for m, lc in enumerate(cfg["layers"]):
        pre = f"layers.{m}."
        layers.append(LayerSpec(
            lc["kind"], lc["in_dim"], lc["out_dim"],
            group(pre + "update."), group(pre + "agg."), group(pre + "read."),
            heads=lc["heads"], gated=lc["gated"], activation=lc["activation"],
        ))
    return GdnModel(
        layers,
        group("actor."),
        group("value.") if cfg["value_head"] else None,
        group("rnn.") if cfg["recurrent"] else None,
        cfg["hidden_dim"],
        cfg["style"],
    )
