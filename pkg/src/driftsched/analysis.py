"""Theory-facing diagnostics: drift bound constant, Lyapunov values, a
clairvoyant offline oracle for tiny instances, and run audits.

The oracle enumerates feasible action sequences against a realized sample
path and therefore lower-bounds the realized cost of any causal policy on
that path (subject to the same finite-horizon constraint analogues).  It is
built entirely on the pure contract functions in `model`/`schedulers`, so it
is an independent route from the optimized engine loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .engine import (
    ARRIVAL_STREAM,
    CHANNEL_STREAM,
    ExperimentConfig,
    RunResult,
    _initial_queues,
    run,
    stream,
)
from .model import (
    IDLE,
    Action,
    Channel,
    DeadlineQueue,
    advance_queue,
    candidate_actions,
    sample_arrival_paths,
    sample_channel_paths,
)
from .schedulers import DpcState, dpc_objective, dpc_update, urgency_cost

ORACLE_MAX_HORIZON = 14
ORACLE_MAX_USERS = 3
# guards binary representation of decimal budgets (e.g. 0.7 * 10 = 6.999...)
FEASIBILITY_EPS = 1e-9


def bound_constant(
    n_users: int, n_deadline: int, p_high: float, *, inclusive: bool = True
) -> float:
    """Closed-form finite constant bounding the quadratic drift terms.

    `inclusive=True` counts each user set as cardinality + 1 (the primary
    reading); `inclusive=False` gives the alternative plain-cardinality
    reading, reported alongside for comparison.
    """
    if n_users < 0 or n_deadline < 0 or n_deadline > n_users:
        raise ValueError("need 0 <= n_deadline <= n_users")
    k_n = n_users + 1 if inclusive else n_users
    k_r = n_deadline + 1 if inclusive else n_deadline
    return 0.5 * k_n * p_high * p_high + 0.5 * k_r + 0.5 * k_r


def bound_B(config: ExperimentConfig, *, inclusive: bool = True) -> float:
    """`bound_constant` for a config; independent of scheduler and seed."""
    return bound_constant(
        config.n_users,
        len(config.deadline_specs),
        config.levels.p_high,
        inclusive=inclusive,
    )


def lyapunov_value(state: DpcState) -> float:
    """Quadratic Lyapunov value: half the sum of squared virtual queues."""
    total = 0.0
    for x in state.X:
        total += 0.5 * x * x
    for z in state.Z.values():
        total += 0.5 * z * z
    return total


@dataclass(frozen=True)
class SamplePath:
    """A realized randomness trace: channels per (slot, user), arrivals per
    (slot, deadline user in id order)."""

    channels: tuple[tuple[Channel, ...], ...]
    arrivals: tuple[tuple[int, ...], ...]

    @property
    def horizon(self) -> int:
        return len(self.channels)

    @classmethod
    def for_config(cls, config: ExperimentConfig, replication: int = 0) -> "SamplePath":
        """The exact path the engine would see for this config/replication."""
        good = sample_channel_paths(
            config.specs,
            config.horizon,
            stream(config.seed, replication, CHANNEL_STREAM),
        )
        arr = sample_arrival_paths(
            config.specs,
            config.horizon,
            stream(config.seed, replication, ARRIVAL_STREAM),
        )
        channels = tuple(
            tuple(Channel.GOOD if g else Channel.BAD for g in row) for row in good
        )
        arrivals = tuple(tuple(int(a) for a in row) for row in arr)
        return cls(channels=channels, arrivals=arrivals)


@dataclass(frozen=True)
class ScheduleEvaluation:
    cost: float
    power_spent: tuple[float, ...]
    services: tuple[int, ...]
    drops: tuple[int, ...]


@dataclass(frozen=True)
class OracleResult:
    feasible: bool
    cost: float | None
    schedule: tuple[Action, ...] | None
    nodes: int


def _slot_transition(
    queues: tuple[DeadlineQueue, ...],
    action: Action,
    arrivals_row: Sequence[int],
    deadline_specs: Sequence,
) -> tuple[tuple[DeadlineQueue, ...], float, int]:
    """Advance all deadline queues one slot; returns (queues', slot f-sum, drops)."""
    slot_f = 0.0
    drops = 0
    new_queues = []
    for k, spec in enumerate(deadline_specs):
        served = action.user == spec.id
        q = queues[k]
        slot_f += urgency_cost(q.head_ttl, spec.deadline_m, served)
        nq, drop = advance_queue(q, served, bool(arrivals_row[k]), spec.deadline_m)
        new_queues.append(nq)
        drops += drop
    return tuple(new_queues), slot_f, drops


def budget_limits(config: ExperimentConfig, horizon: int) -> tuple[tuple[float, ...], dict[int, int]]:
    """Finite-horizon constraint analogues: per-user power budgets and
    per-throughput-user service quotas."""
    budgets = tuple(s.gamma * horizon for s in config.specs)
    needs = {
        s.id: math.floor(s.delta * horizon + FEASIBILITY_EPS)
        for s in config.throughput_specs
    }
    return budgets, needs


def _oracle_initial_queues(
    config: ExperimentConfig, initial_queues
) -> tuple[DeadlineQueue, ...]:
    queue_map = _initial_queues(config, initial_queues)
    return tuple(queue_map[s.id] for s in config.deadline_specs)


def evaluate_schedule(
    schedule: Sequence[Action],
    path: SamplePath,
    config: ExperimentConfig,
    *,
    initial_queues=None,
) -> ScheduleEvaluation:
    """Replay a schedule over a path with the model dynamics.

    Cost is accumulated slot-by-slot (the canonical order every oracle
    comparison uses).  Malformed actions raise.
    """
    if len(schedule) != path.horizon:
        raise ValueError("schedule length must match path horizon")
    deadline_specs = config.deadline_specs
    n = config.n_users
    queues = _oracle_initial_queues(config, initial_queues)
    power_spent = [0.0] * n
    services = [0] * n
    drops_total = 0
    cost = 0.0
    for t, action in enumerate(schedule):
        if not action.is_idle:
            idx = action.user - 1
            required = config.levels.required(path.channels[t][idx])
            if action.power != required:
                raise ValueError(
                    f"slot {t}: power {action.power} inconsistent with channel"
                )
            power_spent[idx] += action.power
            services[idx] += 1
        queues, slot_f, drops = _slot_transition(
            queues, action, path.arrivals[t], deadline_specs
        )
        cost += slot_f
        drops_total += drops
    return ScheduleEvaluation(
        cost=cost,
        power_spent=tuple(power_spent),
        services=tuple(services),
        drops=(drops_total,),
    )


def schedule_is_feasible(
    evaluation: ScheduleEvaluation, config: ExperimentConfig, horizon: int
) -> bool:
    """Shared feasibility test for oracle results and causal-policy traces."""
    budgets, needs = budget_limits(config, horizon)
    for i in range(config.n_users):
        if evaluation.power_spent[i] > budgets[i] + FEASIBILITY_EPS:
            return False
    for s in config.throughput_specs:
        if evaluation.services[s.id - 1] < needs[s.id]:
            return False
    return True


def offline_oracle(
    path: SamplePath,
    config: ExperimentConfig,
    *,
    initial_queues=None,
    prune: bool = True,
) -> OracleResult:
    """Exact minimum realized f-cost over all feasible action sequences.

    `prune=True` adds branch-and-bound cuts (partial-cost bound, power-budget
    and throughput-deficit propagation); `prune=False` is the plain
    exhaustive search.  Both explore candidates in the same order and accept
    strictly-better solutions only, so they return identical results.
    """
    horizon = path.horizon
    if horizon > ORACLE_MAX_HORIZON or config.n_users > ORACLE_MAX_USERS:
        raise ValueError(
            f"oracle limited to T <= {ORACLE_MAX_HORIZON}, N <= {ORACLE_MAX_USERS}"
        )
    deadline_specs = config.deadline_specs
    budgets, needs = budget_limits(config, horizon)
    need_list = [(s.id - 1, needs[s.id]) for s in config.throughput_specs]
    levels = config.levels
    dl_ids = [s.id for s in deadline_specs]

    best_cost = float("inf")
    best_schedule: tuple[Action, ...] | None = None
    nodes = 0

    def dfs(
        t: int,
        queues: tuple[DeadlineQueue, ...],
        cost: float,
        power_spent: list[float],
        services: list[int],
        prefix: list[Action],
    ) -> None:
        nonlocal best_cost, best_schedule, nodes
        nodes += 1
        if prune:
            if cost >= best_cost:
                return
            remaining = horizon - t
            deficit = 0
            for idx, need in need_list:
                if services[idx] < need:
                    deficit += need - services[idx]
            if deficit > remaining:
                return
        if t == horizon:
            feasible = True
            for i in range(config.n_users):
                if power_spent[i] > budgets[i] + FEASIBILITY_EPS:
                    feasible = False
                    break
            if feasible:
                for idx, need in need_list:
                    if services[idx] < need:
                        feasible = False
                        break
            if feasible and cost < best_cost:
                best_cost = cost
                best_schedule = tuple(prefix)
            return
        queue_map = dict(zip(dl_ids, queues))
        for action in candidate_actions(path.channels[t], levels, queue_map):
            if not action.is_idle:
                idx = action.user - 1
                if prune and power_spent[idx] + action.power > budgets[idx] + FEASIBILITY_EPS:
                    continue
                power_spent[idx] += action.power
                services[idx] += 1
            new_queues, slot_f, _ = _slot_transition(
                queues, action, path.arrivals[t], deadline_specs
            )
            prefix.append(action)
            dfs(t + 1, new_queues, cost + slot_f, power_spent, services, prefix)
            prefix.pop()
            if not action.is_idle:
                idx = action.user - 1
                power_spent[idx] -= action.power
                services[idx] -= 1

    initial = _oracle_initial_queues(config, initial_queues)
    dfs(0, initial, 0.0, [0.0] * config.n_users, [0] * config.n_users, [])
    if best_schedule is None:
        return OracleResult(feasible=False, cost=None, schedule=None, nodes=nodes)
    return OracleResult(
        feasible=True, cost=best_cost, schedule=best_schedule, nodes=nodes
    )


@dataclass(frozen=True)
class BoundReport:
    """Drift-penalty diagnostics for one DPC run.

    `bound_check` (realized fbar <= offline fbar + B/V) is diagnostic only:
    the offline value lower-bounds the unobservable optimum, so the check is
    sufficient-but-not-necessary for the theory bound.  It is None when no
    oracle value is available (production horizons).
    """

    b: float
    b_alt: float
    v: float
    fbar: float
    fbar_offline: float | None
    gap_bound: float
    queue_avg: float
    queue_avg_q1: float | None
    queue_avg_q2: float | None
    stability_ratio: float | None
    stability_ok: bool | None
    bound_check: bool | None


def bound_report(
    result: RunResult,
    config: ExperimentConfig,
    oracle: OracleResult | None = None,
) -> BoundReport:
    """Assemble the diagnostic report from a completed DPC run."""
    if result.scheduler != "dpc" or config.v is None:
        raise ValueError("bound reports are defined for dpc runs")
    b = bound_B(config)
    b_alt = bound_B(config, inclusive=False)
    gap = b / config.v
    fbar_offline = None
    if oracle is not None and oracle.feasible:
        fbar_offline = oracle.cost / result.horizon
    bound_check = None
    if fbar_offline is not None:
        bound_check = result.fbar_total <= fbar_offline + gap
    q1 = result.queue_sum_mean_q1
    q2 = result.queue_sum_mean_q2
    if q1 is None or q2 is None:
        ratio = None
        stable = None
    elif q1 > 0.0:
        ratio = q2 / q1
        stable = ratio <= 1.1
    else:
        ratio = 1.0 if q2 == 0.0 else float("inf")
        stable = q2 == 0.0
    return BoundReport(
        b=b,
        b_alt=b_alt,
        v=config.v,
        fbar=result.fbar_total,
        fbar_offline=fbar_offline,
        gap_bound=gap,
        queue_avg=result.queue_sum_mean,
        queue_avg_q1=q1,
        queue_avg_q2=q2,
        stability_ratio=ratio,
        stability_ok=stable,
        bound_check=bound_check,
    )


@dataclass(frozen=True)
class RunAudit:
    """Outcome of the slot-wise optimality and dynamics audit."""

    slots: int
    optimal_slots: int
    decision_mismatches: int
    max_excess: float
    metrics_match: bool

    @property
    def ok(self) -> bool:
        return (
            self.optimal_slots == self.slots
            and self.decision_mismatches == 0
            and self.metrics_match
        )


def audit_dpc_run(config: ExperimentConfig, replication: int = 0) -> RunAudit:
    """Re-verify a full engine run against the contract functions.

    Replays the identical sample path, independently enumerating candidates
    and evaluating the objective for each at every slot: the engine-chosen
    action must attain the minimum exactly, and the replayed dynamics must
    reproduce the engine's final metrics bit-for-bit.
    """
    if config.scheduler != "dpc":
        raise ValueError("audit targets dpc runs")
    result = run(config, replication, record_actions=True, collect_series=False)
    path = SamplePath.for_config(config, replication)
    specs = config.specs
    levels = config.levels
    deadline_specs = config.deadline_specs
    dl_ids = [s.id for s in deadline_specs]

    queues = {s.id: DeadlineQueue(s.id) for s in deadline_specs}
    state = DpcState.zeros(specs, config.v)
    c_drop = [0] * config.n_users
    c_urg = [0.0] * config.n_users
    c_energy = [0.0] * config.n_users
    c_serve = [0] * config.n_users

    optimal = 0
    mismatches = 0
    max_excess = 0.0
    for t in range(config.horizon):
        channels = path.channels[t]
        j, p = result.actions[t]
        chosen = IDLE if j < 0 else Action.serve(j + 1, p)
        candidates = candidate_actions(channels, levels, queues)
        objs = [
            dpc_objective(a, state, queues, channels, specs, levels)
            for a in candidates
        ]
        if chosen not in candidates:
            mismatches += 1
        else:
            chosen_obj = objs[candidates.index(chosen)]
            excess = max((chosen_obj - o for o in objs), default=0.0)
            if excess <= 0.0:
                optimal += 1
            else:
                max_excess = max(max_excess, excess)
            # the engine must agree with first-strict-minimum selection
            best = candidates[0]
            best_obj = objs[0]
            for a, o in zip(candidates[1:], objs[1:]):
                if o < best_obj:
                    best, best_obj = a, o
            if best != chosen:
                mismatches += 1
        for k, spec in enumerate(deadline_specs):
            served = chosen.user == spec.id
            i = spec.id - 1
            c_urg[i] += urgency_cost(queues[spec.id].head_ttl, spec.deadline_m, served)
            queues[spec.id], drop = advance_queue(
                queues[spec.id], served, bool(path.arrivals[t][k]), spec.deadline_m
            )
            c_drop[i] += drop
        if not chosen.is_idle:
            c_energy[chosen.user - 1] += chosen.power
            c_serve[chosen.user - 1] += 1
        state = dpc_update(state, chosen, specs)

    horizon = config.horizon
    metrics_match = (
        tuple(d / horizon for d in c_drop) == result.dbar
        and tuple(u / horizon for u in c_urg) == result.fbar
        and tuple(e / horizon for e in c_energy) == result.pbar
        and tuple(s / horizon for s in c_serve) == result.mubar
    )
    return RunAudit(
        slots=horizon,
        optimal_slots=optimal,
        decision_mismatches=mismatches,
        max_excess=max_excess,
        metrics_match=metrics_match,
    )


def dpc_schedule_from_result(result: RunResult) -> tuple[Action, ...]:
    """Convert recorded engine actions into Action objects for replay."""
    if result.actions is None:
        raise ValueError("run was not recorded with record_actions=True")
    return tuple(
        IDLE if j < 0 else Action.serve(j + 1, p) for j, p in result.actions
    )
