"""Hybrid imitation: mix scripted-expert experiences into the replay stream."""

from __future__ import annotations

from typing import Iterable, Iterator

from .dqn import Experience, ReplayBuffer


class Interleaver:
    """Counts agent experiences and owes ``num_expert`` expert ones after every ``num_normal``."""

    def __init__(self, buffer: ReplayBuffer, num_normal=500, num_expert=100, enabled=True):
        if num_normal <= 0 or num_expert < 0:
            raise ValueError("invalid interleaving counts")
        self.buffer = buffer
        self.num_normal, self.num_expert = num_normal, num_expert
        self.enabled = enabled
        self.since = 0  # agent experiences since the last expert block
        self.owed = 0  # expert experiences still due
        self.agent_total = 0
        self.expert_total = 0

    @property
    def wants_expert(self) -> bool:
        return self.enabled and self.owed > 0

    def add_agent(self, exp: Experience):
        self.buffer.add(exp)
        self.agent_total += 1
        if not self.enabled:
            return
        self.since += 1
        if self.since == self.num_normal:
            self.since = 0
            self.owed += self.num_expert

    def add_expert(self, exp: Experience):
        if not self.wants_expert:
            raise RuntimeError("no expert experiences are due")
        self.buffer.add(Experience(**{**exp.__dict__, "expert": True}))
        self.owed -= 1
        self.expert_total += 1


def imitation_interleave(buffer: ReplayBuffer, expert_stream: Iterable[Experience],
                         normal_stream: Iterable[Experience], *, num_normal=500, num_expert=100,
                         enabled=True) -> ReplayBuffer:
    """Fill ``buffer`` from ``normal_stream``; after every ``num_normal`` agent
    experiences, the next ``num_expert`` insertions come from ``expert_stream``."""
    mix = Interleaver(buffer, num_normal, num_expert, enabled)
    experts: Iterator[Experience] = iter(expert_stream)
    for exp in normal_stream:
        mix.add_agent(exp)
        while mix.wants_expert:
            nxt = next(experts, None)
            if nxt is None:
                return buffer
            mix.add_expert(nxt)
    return buffer
