"""Symmetry breaking by claim rounds: give each orbit a prescribed multiset of labels.

Every node carries a tuple ``(n_i, r_i, c_i, t_i)``: a tie-break value, its
orbit id, a counter and the label it ends up with. Each round the node with the
largest tie-break value claims entry ``c_i`` of its orbit's target sequence and
drops its tie-break value to zero. The other members of its orbit bump their
counters. After ``n`` rounds every node holds exactly one label, so each orbit
receives its target multiset exactly.

Tie-break values are uniform noise (RNI mode) or ``2**i`` (unique-ID mode, so
the highest index claims first).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import AttributedGraph
from .orbits import OrbitPartition, orbit_partition


class ConstructionError(ValueError):
    pass


@dataclass(frozen=True)
class OrbitTargets:
    """Target label sequences, one per orbit in partition order.

    Each sequence is ``(|orbit|,)`` for scalar labels or ``(|orbit|, k)`` for vectors.
    """

    sequences: tuple

    @classmethod
    def from_lists(cls, seqs) -> "OrbitTargets":
        return cls(tuple(np.asarray(s, dtype=np.float64) for s in seqs))

    @property
    def label_shape(self) -> tuple:
        return self.sequences[0].shape[1:] if self.sequences else ()

    def validate(self, part: OrbitPartition) -> None:
        if len(self.sequences) != len(part.orbits):
            raise ConstructionError(f"{len(self.sequences)} target sequences for {len(part.orbits)} orbits")
        shapes = {s.shape[1:] for s in self.sequences}
        if len(shapes) > 1:
            raise ConstructionError("target labels must all have the same shape")
        for k, (seq, orbit) in enumerate(zip(self.sequences, part.orbits)):
            if len(seq) != len(orbit):
                raise ConstructionError(f"orbit {k} has {len(orbit)} nodes but {len(seq)} targets")
            if not np.all(np.isfinite(seq)):
                raise ConstructionError(f"orbit {k} has non-finite targets")


@dataclass(frozen=True)
class ConstructionTrace:
    labels: np.ndarray  # (n,) or (n, k)
    claim_order: tuple  # node claiming in each round
    ledger: np.ndarray  # final (n_i, r_i, c_i) per node; t_i is ``labels``


def run_claims(part: OrbitPartition, targets: OrbitTargets, tiebreak) -> ConstructionTrace:
    """Run the ``n`` claim rounds with explicit tie-break values."""
    targets.validate(part)
    n = part.orbit_of.size
    tb = np.asarray(tiebreak, dtype=np.float64).copy()
    if tb.shape != (n,):
        raise ConstructionError(f"need {n} tie-break values, got shape {tb.shape}")
    if n and (np.any(tb <= 0) or np.unique(tb).size != n):
        raise ConstructionError("tie-break values must be positive and distinct")
    orbit = part.orbit_of
    counter = np.zeros(n, dtype=np.int64)
    labels = np.zeros((n,) + targets.label_shape)
    written = np.zeros(n, dtype=bool)
    order = []
    for _ in range(n):
        i = int(np.argmax(tb))  # the global readout
        r = orbit[i]
        labels[i] = targets.sequences[r][counter[i]]
        written[i] = True
        tb[i] = 0.0
        same = orbit == r
        same[i] = False
        counter[same] += 1
        counter[i] += 1
        order.append(i)
    assert written.all()
    ledger = np.stack([tb, orbit.astype(np.float64), counter.astype(np.float64)], axis=1) if n else np.zeros((0, 3))
    return ConstructionTrace(labels, tuple(order), ledger)


def _partition(g, part):
    return part if part is not None else orbit_partition(g)


def rni_tiebreak(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draws on (0, 1), redrawn on the probability-zero tie or zero."""
    while True:
        x = rng.random(n)
        if np.all(x > 0) and np.unique(x).size == n:
            return x


def uid_tiebreak(n: int) -> np.ndarray:
    return np.exp2(np.arange(n, dtype=np.float64))


def assign_labels_rni(g: AttributedGraph, targets: OrbitTargets, rng: np.random.Generator,
                      *, noise=None, partition=None, trace=False):
    part = _partition(g, partition)
    tb = rni_tiebreak(g.n, rng) if noise is None else noise
    res = run_claims(part, targets, tb)
    return res if trace else res.labels


def assign_labels_uid(g: AttributedGraph, targets: OrbitTargets, *, partition=None, trace=False):
    part = _partition(g, partition)
    res = run_claims(part, targets, uid_tiebreak(g.n))
    return res if trace else res.labels


def labels_by_orbit(labels, part: OrbitPartition) -> list:
    labels = np.asarray(labels)
    return [labels[sorted(orbit)] for orbit in part.orbits]


def random_targets(part: OrbitPartition, rng: np.random.Generator, dim: int | None = None,
                   low=-1.0, high=1.0) -> OrbitTargets:
    shape = () if dim is None else (dim,)
    return OrbitTargets(tuple(rng.uniform(low, high, size=(len(o),) + shape) for o in part.orbits))


def multiset_eps_equal(a, b, eps: float) -> bool:
    """True when some bijection matches ``a`` to ``b`` with every gap at most ``eps``.

    For scalars, matching in sorted order is optimal.
    """
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if a.size != b.size:
        return False
    return bool(np.all(np.abs(a - b) <= eps))


def read_targets(path) -> OrbitTargets:
    """One line per orbit (orbits ordered by smallest member), whitespace-separated reals."""
    seqs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                seqs.append([float(x) for x in line.split()])
    return OrbitTargets.from_lists(seqs)
