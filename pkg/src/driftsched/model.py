"""Slotted-time system model: users, two-state channels, deadline queues, actions.

Everything here is a pure function or an immutable value type.  The slot
ordering used throughout the package is:

    observe channels -> scheduler decides -> serve -> expire/drop ->
    decrement ttls -> append arrivals -> update scheduler state and metrics

so a packet arriving in slot t is first servable in slot t+1 and an unserved
head packet with ttl 1 drops at the end of its slot.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

import numpy as np


class UserRole(Enum):
    DEADLINE = "deadline"
    THROUGHPUT = "throughput"


class Channel(Enum):
    BAD = 0
    GOOD = 1


@dataclass(frozen=True)
class PowerLevels:
    """Discrete transmit powers: a Good-state channel needs p_low, a Bad one p_high."""

    p_low: float
    p_high: float

    def __post_init__(self) -> None:
        if not 0 < self.p_low < self.p_high:
            raise ValueError(
                f"power levels must satisfy 0 < p_low < p_high, got "
                f"p_low={self.p_low}, p_high={self.p_high}"
            )

    def required(self, channel: Channel) -> float:
        """The unique positive power that succeeds under `channel`."""
        return self.p_low if channel is Channel.GOOD else self.p_high


@dataclass(frozen=True)
class UserSpec:
    """Static per-user parameters.

    `arrival_prob` and `deadline_m` are meaningful only for deadline users,
    `delta` only for throughput users; construction enforces that split.
    `gamma` is the average-power cap and `good_prob` the per-slot probability
    of a Good channel state.
    """

    id: int
    role: UserRole
    gamma: float
    good_prob: float
    arrival_prob: float | None = None
    deadline_m: int | None = None
    delta: float | None = None

    def __post_init__(self) -> None:
        if self.id < 1:
            raise ValueError(f"user id must be >= 1, got {self.id}")
        if self.gamma < 0:
            raise ValueError(f"user {self.id}: gamma must be >= 0, got {self.gamma}")
        if not 0.0 <= self.good_prob <= 1.0:
            raise ValueError(
                f"user {self.id}: good_prob must be in [0, 1], got {self.good_prob}"
            )
        if self.role is UserRole.DEADLINE:
            if self.arrival_prob is None or self.deadline_m is None:
                raise ValueError(
                    f"user {self.id}: deadline users need arrival_prob and deadline_m"
                )
            if self.delta is not None:
                raise ValueError(
                    f"user {self.id}: delta is only valid for throughput users"
                )
            if not 0.0 <= self.arrival_prob <= 1.0:
                raise ValueError(
                    f"user {self.id}: arrival_prob must be in [0, 1], "
                    f"got {self.arrival_prob}"
                )
            if self.deadline_m < 1:
                raise ValueError(
                    f"user {self.id}: deadline_m must be >= 1, got {self.deadline_m}"
                )
            if self.deadline_m == 1:
                warnings.warn(
                    f"user {self.id}: deadline_m=1 leaves a single servable slot; "
                    "any packet not served immediately is dropped",
                    stacklevel=2,
                )
        else:
            if self.delta is None:
                raise ValueError(f"user {self.id}: throughput users need delta")
            if self.arrival_prob is not None or self.deadline_m is not None:
                raise ValueError(
                    f"user {self.id}: arrival_prob/deadline_m are only valid for "
                    "deadline users"
                )
            if not 0.0 <= self.delta <= 1.0:
                raise ValueError(
                    f"user {self.id}: delta must be in [0, 1], got {self.delta}"
                )

    @classmethod
    def deadline(
        cls, id: int, *, arrival_prob: float, deadline_m: int, gamma: float,
        good_prob: float,
    ) -> "UserSpec":
        return cls(
            id=id, role=UserRole.DEADLINE, gamma=gamma, good_prob=good_prob,
            arrival_prob=arrival_prob, deadline_m=deadline_m,
        )

    @classmethod
    def throughput(
        cls, id: int, *, delta: float, gamma: float, good_prob: float
    ) -> "UserSpec":
        return cls(
            id=id, role=UserRole.THROUGHPUT, gamma=gamma, good_prob=good_prob,
            delta=delta,
        )

    @property
    def is_deadline(self) -> bool:
        return self.role is UserRole.DEADLINE

    @property
    def is_throughput(self) -> bool:
        return self.role is UserRole.THROUGHPUT


@dataclass(frozen=True)
class Packet:
    """A queued packet; ttl counts the remaining servable slots (head's ttl = d_r)."""

    ttl: int

    def __post_init__(self) -> None:
        if self.ttl < 1:
            raise ValueError(f"packet ttl must be >= 1, got {self.ttl}")


@dataclass(frozen=True)
class DeadlineQueue:
    """FIFO of packets owned by one deadline user.

    With at most one arrival per slot and a common per-queue deadline, ttls
    are strictly increasing from head to tail; that makes "at most one drop
    per slot" a structural fact.
    """

    owner: int
    packets: tuple[Packet, ...] = ()

    def __post_init__(self) -> None:
        ttls = [p.ttl for p in self.packets]
        if any(b <= a for a, b in zip(ttls, ttls[1:])):
            raise ValueError(
                f"queue {self.owner}: ttls must strictly increase head to tail, "
                f"got {ttls}"
            )

    @classmethod
    def from_ttls(cls, owner: int, ttls: Sequence[int]) -> "DeadlineQueue":
        return cls(owner, tuple(Packet(t) for t in ttls))

    def __len__(self) -> int:
        return len(self.packets)

    @property
    def head_ttl(self) -> int | None:
        return self.packets[0].ttl if self.packets else None


@dataclass(frozen=True)
class Action:
    """The slot decision: idle, or serve one user at the channel-required power."""

    user: int | None = None
    power: float = 0.0

    @classmethod
    def idle(cls) -> "Action":
        return cls()

    @classmethod
    def serve(cls, user: int, power: float) -> "Action":
        if power <= 0:
            raise ValueError(f"serve power must be positive, got {power}")
        return cls(user=user, power=power)

    @property
    def is_idle(self) -> bool:
        return self.user is None


IDLE = Action.idle()


def sample_channels(
    specs: Sequence[UserSpec], rng: np.random.Generator
) -> tuple[Channel, ...]:
    """Draw one slot's channel states; user i is Good with probability good_prob_i.

    `rng` should be the seeded stream reserved for channels.
    """
    draws = rng.random(len(specs))
    return tuple(
        Channel.GOOD if draws[i] < s.good_prob else Channel.BAD
        for i, s in enumerate(specs)
    )


def sample_arrivals(
    specs: Sequence[UserSpec], rng: np.random.Generator
) -> dict[int, bool]:
    """Draw one slot's Bernoulli arrivals for the deadline users.

    Throughput users are saturated and get no arrivals.  `rng` should be the
    seeded stream reserved for arrivals, distinct from the channel stream.
    """
    deadline = [s for s in specs if s.is_deadline]
    draws = rng.random(len(deadline))
    return {s.id: bool(draws[k] < s.arrival_prob) for k, s in enumerate(deadline)}


def sample_channel_paths(
    specs: Sequence[UserSpec], horizon: int, rng: np.random.Generator
) -> np.ndarray:
    """Pre-sample a (horizon, N) boolean matrix, True = Good.

    Row t equals the t-th call of sample_channels on the same stream, so the
    slot loop and per-slot callers see identical draws.
    """
    probs = np.array([s.good_prob for s in specs])
    return rng.random((horizon, len(specs))) < probs


def sample_arrival_paths(
    specs: Sequence[UserSpec], horizon: int, rng: np.random.Generator
) -> np.ndarray:
    """Pre-sample a (horizon, R) boolean arrival matrix, deadline users in id order."""
    deadline = [s for s in specs if s.is_deadline]
    probs = np.array([s.arrival_prob for s in deadline])
    return rng.random((horizon, len(deadline))) < probs


def feasible_powers(
    channels: Sequence[Channel], levels: PowerLevels
) -> tuple[frozenset[float], ...]:
    """Per-user selectable power set: {0, p_high} under Bad, {0, p_low} under Good."""
    return tuple(frozenset((0.0, levels.required(ch))) for ch in channels)


def candidate_actions(
    channels: Sequence[Channel],
    levels: PowerLevels,
    queues: Mapping[int, DeadlineQueue],
) -> list[Action]:
    """The slot's action menu: [Serve(1), ..., Serve(N), Idle] in id order.

    Serving a deadline user with an empty queue is excluded: it pays power
    for no packet and is weakly dominated by Idle.
    """
    actions: list[Action] = []
    for idx, ch in enumerate(channels):
        uid = idx + 1
        q = queues.get(uid)
        if q is not None and len(q) == 0:
            continue
        actions.append(Action.serve(uid, levels.required(ch)))
    actions.append(IDLE)
    return actions


def advance_queue(
    queue: DeadlineQueue, served: bool, arrival: bool, m: int
) -> tuple[DeadlineQueue, int]:
    """Slot-boundary queue transition; returns (new queue, drop indicator).

    Order: (a) remove the head if served; (b) drop the head if it sits at
    ttl 1 unserved (only the original head can, by the strict-ttl ordering);
    (c) decrement remaining ttls; (d) append the arrival with ttl = m.
    Serving an empty queue is a contract violation.
    """
    packets = queue.packets
    if served:
        if not packets:
            raise ValueError(f"queue {queue.owner}: cannot serve an empty queue")
        packets = packets[1:]
    drop = 0
    if packets and packets[0].ttl == 1:
        # unreachable when served: the post-service head has ttl >= 2
        drop = 1
        packets = packets[1:]
    packets = tuple(Packet(p.ttl - 1) for p in packets)
    if arrival:
        packets = packets + (Packet(m),)
    new_queue = DeadlineQueue(queue.owner, packets)
    expected = max(len(queue) - int(served), 0) + int(arrival) - drop
    if len(new_queue) != expected:
        raise RuntimeError(
            f"queue {queue.owner}: conservation violated "
            f"({len(queue)} -> {len(new_queue)}, served={served}, "
            f"arrival={arrival}, drop={drop})"
        )
    return new_queue, drop
