"""Schedulers: drift-plus-penalty control (DPC) and the largest-debt-first baseline.

DPC keeps one virtual power queue X_i per user and one virtual throughput
queue Z_u per throughput user; each slot it picks the candidate action
minimizing

    sum_i X_i (p_i - gamma_i) + sum_u Z_u (delta_u - mu_u) + V sum_r f_r

where f_r is the urgency cost of user r's head packet.  The constant
-sum_i X_i gamma_i term does not affect the argmin but is kept so logged
objective values match the definition literally.

`_serve_objective` is the single arithmetic kernel behind every objective
evaluation in the package (public API and engine hot loop alike), so the
per-slot optimality audit compares bitwise-identical floats.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .model import (
    IDLE,
    Action,
    Channel,
    DeadlineQueue,
    PowerLevels,
    UserSpec,
    candidate_actions,
)


@dataclass(frozen=True)
class DpcState:
    """Virtual queues and penalty weight: X per user, Z per throughput user."""

    X: tuple[float, ...]
    Z: dict[int, float]
    V: float

    def __post_init__(self) -> None:
        if self.V <= 0:
            raise ValueError(f"V must be positive, got {self.V}")
        if any(x < 0 for x in self.X):
            raise ValueError(f"X entries must be nonnegative, got {self.X}")
        if any(z < 0 for z in self.Z.values()):
            raise ValueError(f"Z entries must be nonnegative, got {self.Z}")

    @classmethod
    def zeros(cls, specs: Sequence[UserSpec], v: float) -> "DpcState":
        return cls(
            X=(0.0,) * len(specs),
            Z={s.id: 0.0 for s in specs if s.is_throughput},
            V=v,
        )


@dataclass(frozen=True)
class LdfState:
    """Per-user throughput debts y and targets q (delta_u, or lambda_r for deadlines)."""

    y: tuple[float, ...]
    q: tuple[float, ...]
    t: int = 0

    @classmethod
    def initial(cls, specs: Sequence[UserSpec]) -> "LdfState":
        q = tuple(
            s.delta if s.is_throughput else s.arrival_prob  # type: ignore[misc]
            for s in specs
        )
        return cls(y=(0.0,) * len(specs), q=q, t=0)


def urgency_cost(head_ttl: int | None, m: int, served: bool) -> float:
    """Per-slot cost in [0, 1]: 0 when served or empty, 1 exactly on a drop.

    Grows linearly as the head packet nears expiry: (m - (head_ttl - 1)) / m.
    """
    if m < 1:
        raise ValueError(f"deadline m must be >= 1, got {m}")
    if served or head_ttl is None:
        return 0.0
    if not 1 <= head_ttl <= m:
        raise ValueError(f"head_ttl must be in [1, {m}], got {head_ttl}")
    return (m - (head_ttl - 1)) / m


def _serve_objective(
    j: int,
    p_j: float,
    x: Sequence[float],
    gammas: Sequence[float],
    thr_idx: Sequence[int],
    z: Sequence[float],
    deltas: Sequence[float],
    dl_idx: Sequence[int],
    urgencies: Sequence[float],
    v: float,
) -> float:
    """Objective of serving user index j (j = -1 for idle) at power p_j.

    All sequences are indexed 0-based in user-id order; `urgencies[r]` must be
    the unserved urgency of deadline user r (0.0 when its queue is empty).
    This is the canonical accumulation order for the whole package.
    """
    s = 0.0
    for i in range(len(x)):
        s += x[i] * ((p_j if i == j else 0.0) - gammas[i])
    for u in thr_idx:
        s += z[u] * (deltas[u] - (1.0 if u == j else 0.0))
    fs = 0.0
    for r in dl_idx:
        if r != j:
            fs += urgencies[r]
    return s + v * fs


def _kernel_inputs(
    state: DpcState,
    queues: Mapping[int, DeadlineQueue],
    specs: Sequence[UserSpec],
) -> tuple[list[float], list[int], list[float], list[float], list[int], list[float]]:
    """Unpack rich state into the flat per-index arrays the kernel consumes."""
    gammas = [s.gamma for s in specs]
    thr_idx = [i for i, s in enumerate(specs) if s.is_throughput]
    z = [state.Z.get(s.id, 0.0) for s in specs]
    deltas = [s.delta if s.is_throughput else 0.0 for s in specs]
    dl_idx = [i for i, s in enumerate(specs) if s.is_deadline]
    urgencies = [0.0] * len(specs)
    for i in dl_idx:
        spec = specs[i]
        queue = queues[spec.id]
        urgencies[i] = urgency_cost(queue.head_ttl, spec.deadline_m, served=False)
    return gammas, thr_idx, z, deltas, dl_idx, urgencies


def dpc_objective(
    action: Action,
    state: DpcState,
    queues: Mapping[int, DeadlineQueue],
    channels: Sequence[Channel],
    specs: Sequence[UserSpec],
    levels: PowerLevels,
) -> float:
    """Evaluate the per-slot objective for one candidate action.

    Raises ValueError for malformed actions: unknown user, power inconsistent
    with the user's channel state, or serving an empty deadline queue.
    """
    j = -1
    p_j = 0.0
    if not action.is_idle:
        if not 1 <= action.user <= len(specs):
            raise ValueError(f"action serves unknown user {action.user}")
        j = action.user - 1
        required = levels.required(channels[j])
        if action.power != required:
            raise ValueError(
                f"user {action.user}: power {action.power} inconsistent with "
                f"{channels[j].name} channel (requires {required})"
            )
        p_j = action.power
        spec = specs[j]
        if spec.is_deadline and len(queues[spec.id]) == 0:
            raise ValueError(f"user {action.user}: cannot serve an empty queue")
    gammas, thr_idx, z, deltas, dl_idx, urgencies = _kernel_inputs(
        state, queues, specs
    )
    return _serve_objective(
        j, p_j, state.X, gammas, thr_idx, z, deltas, dl_idx, urgencies, state.V
    )


def dpc_decide(
    state: DpcState,
    queues: Mapping[int, DeadlineQueue],
    channels: Sequence[Channel],
    specs: Sequence[UserSpec],
    levels: PowerLevels,
) -> Action:
    """Pick the first candidate attaining the minimum objective.

    The update is strict (`obj < best`), so ties resolve to the earliest
    candidate in [Serve(1), ..., Serve(N), Idle] order.
    """
    best: Action | None = None
    best_obj = float("inf")
    for action in candidate_actions(channels, levels, queues):
        obj = dpc_objective(action, state, queues, channels, specs, levels)
        if obj < best_obj:
            best = action
            best_obj = obj
    assert best is not None  # Idle is always a candidate
    return best


def dpc_update(
    state: DpcState, action: Action, specs: Sequence[UserSpec]
) -> DpcState:
    """Advance the virtual queues after executing `action`.

    X_i <- max(X_i - gamma_i, 0) + p_i and, for throughput users,
    Z_u <- max(Z_u - mu_u, 0) + delta_u.
    """
    new_x = tuple(
        max(state.X[i] - s.gamma, 0.0)
        + (action.power if action.user == s.id else 0.0)
        for i, s in enumerate(specs)
    )
    new_z = {
        s.id: max(state.Z[s.id] - (1.0 if action.user == s.id else 0.0), 0.0)
        + s.delta
        for s in specs
        if s.is_throughput
    }
    return DpcState(X=new_x, Z=new_z, V=state.V)


def ldf_decide(
    state: LdfState,
    queues: Mapping[int, DeadlineQueue],
    channels: Sequence[Channel],
    specs: Sequence[UserSpec],
    levels: PowerLevels,
) -> Action:
    """Serve the eligible user with the largest positive debt, else idle.

    Throughput users are always eligible; deadline users only with a non-empty
    queue.  Ties go to the lowest id.  Power budgets are ignored by design.
    """
    best_idx = -1
    best_y = 0.0
    for i, spec in enumerate(specs):
        if spec.is_deadline and len(queues[spec.id]) == 0:
            continue
        if state.y[i] > 0.0 and (best_idx == -1 or state.y[i] > best_y):
            best_idx = i
            best_y = state.y[i]
    if best_idx == -1:
        return IDLE
    return Action.serve(best_idx + 1, levels.required(channels[best_idx]))


def ldf_update(state: LdfState, served: Sequence[int]) -> LdfState:
    """Accumulate one slot of debt: y_i += q_i - mu_i, with mu from `served`."""
    new_y = tuple(
        state.y[i] + (state.q[i] - served[i]) for i in range(len(state.y))
    )
    return LdfState(y=new_y, q=state.q, t=state.t + 1)
