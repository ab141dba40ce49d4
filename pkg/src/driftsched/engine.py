"""Slot-loop simulation engine: configs, metrics, deterministic runs.

Randomness is pre-sampled per run from two named streams (channels,
arrivals) derived from (seed, replication, stream tag) via numpy's
SeedSequence/PCG64, which is seedable and platform-stable.  Changing the
scheduler never perturbs the sample path, so DPC and LDF comparisons use
common random numbers.

`Simulation.step` is the readable reference path built purely on the
contract functions in `model`/`schedulers`; `run` is the optimized loop the
experiments use.  Both call the same objective kernel and are pinned
together by equivalence tests.
"""

from __future__ import annotations

from collections import deque
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .model import (
    Action,
    Channel,
    DeadlineQueue,
    PowerLevels,
    UserSpec,
    advance_queue,
    sample_arrival_paths,
    sample_channel_paths,
)
from .schedulers import (
    DpcState,
    LdfState,
    _serve_objective,
    dpc_decide,
    dpc_update,
    ldf_decide,
    ldf_update,
    urgency_cost,
)

CHANNEL_STREAM = 0
ARRIVAL_STREAM = 1

SCHEDULER_DPC = "dpc"
SCHEDULER_LDF = "ldf"


def stream(seed: int, replication: int, tag: int) -> np.random.Generator:
    """A named RNG stream; distinct (seed, replication, tag) are independent."""
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence((seed, replication, tag)))
    )


@dataclass(frozen=True)
class ExperimentConfig:
    """One simulated scenario; `replications` re-runs it on independent streams."""

    specs: tuple[UserSpec, ...]
    levels: PowerLevels
    scheduler: str
    horizon: int
    seed: int
    v: float | None = None
    trace_every: int = 100
    replications: int = 1
    label: str = ""

    def validate(self) -> None:
        if not self.specs:
            raise ValueError("config needs at least one user")
        ids = [s.id for s in self.specs]
        if ids != list(range(1, len(ids) + 1)):
            raise ValueError(f"user ids must be exactly 1..N in order, got {ids}")
        if self.scheduler not in (SCHEDULER_DPC, SCHEDULER_LDF):
            raise ValueError(f"unknown scheduler {self.scheduler!r}")
        if self.scheduler == SCHEDULER_DPC:
            if self.v is None or self.v <= 0:
                raise ValueError(f"dpc requires v > 0, got {self.v}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.trace_every < 1:
            raise ValueError(f"trace_every must be >= 1, got {self.trace_every}")
        if self.replications < 1:
            raise ValueError(
                f"replications must be >= 1, got {self.replications}"
            )
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned int, got {self.seed}")
        for s in self.specs:
            if s.gamma > self.levels.p_high:
                raise ValueError(
                    f"user {s.id}: gamma {s.gamma} exceeds p_high "
                    f"{self.levels.p_high}"
                )

    @property
    def n_users(self) -> int:
        return len(self.specs)

    @property
    def deadline_specs(self) -> tuple[UserSpec, ...]:
        return tuple(s for s in self.specs if s.is_deadline)

    @property
    def throughput_specs(self) -> tuple[UserSpec, ...]:
        return tuple(s for s in self.specs if s.is_throughput)


@dataclass
class MetricsAccumulator:
    """Running per-user sums; averages are cumulative / slots-elapsed."""

    user_ids: tuple[int, ...]
    drops: list[int] = field(default_factory=list)
    energy: list[float] = field(default_factory=list)
    services: list[int] = field(default_factory=list)
    urgency: list[float] = field(default_factory=list)
    arrivals: list[int] = field(default_factory=list)
    t: int = 0

    def __post_init__(self) -> None:
        n = len(self.user_ids)
        zeros = {"drops": 0, "energy": 0.0, "services": 0, "urgency": 0.0, "arrivals": 0}
        for name, zero in zeros.items():
            if not getattr(self, name):
                setattr(self, name, [zero] * n)
            elif len(getattr(self, name)) != n:
                raise ValueError(f"{name} must have one entry per user")

    def update(
        self,
        served_idx: int,
        power: float,
        drops: Sequence[int],
        f: Sequence[float],
        arrivals: Sequence[int],
    ) -> None:
        if served_idx >= 0:
            self.energy[served_idx] += power
            self.services[served_idx] += 1
        for i in range(len(self.user_ids)):
            self.drops[i] += drops[i]
            self.urgency[i] += f[i]
            self.arrivals[i] += arrivals[i]
        self.t += 1

    def averages(self) -> dict[str, tuple[float, ...]]:
        t = max(self.t, 1)
        return {
            "dbar": tuple(d / t for d in self.drops),
            "pbar": tuple(e / t for e in self.energy),
            "mubar": tuple(s / t for s in self.services),
            "fbar": tuple(u / t for u in self.urgency),
        }


@dataclass(frozen=True)
class SlotRecord:
    """One slot's decision-time state and outcomes (step-path output)."""

    t: int
    action: Action
    channels: tuple[Channel, ...]
    drops: tuple[int, ...]
    power: tuple[float, ...]
    served: tuple[int, ...]
    f: tuple[float, ...]
    x: tuple[float, ...] | None
    z_or_y: tuple[float | None, ...]
    q_len: tuple[int | None, ...]
    head_ttl: tuple[int | None, ...]


@dataclass
class SeriesBlock:
    """Convergence series sampled every `trace_every` slots.

    Each row i describes the system after t[i] slots: running averages over
    those slots plus the state carried into the next slot.
    """

    t: list[int] = field(default_factory=list)
    dbar: list[tuple[float, ...]] = field(default_factory=list)
    pbar: list[tuple[float, ...]] = field(default_factory=list)
    mubar: list[tuple[float, ...]] = field(default_factory=list)
    fbar: list[tuple[float, ...]] = field(default_factory=list)
    x: list[tuple[float | None, ...]] = field(default_factory=list)
    z_or_y: list[tuple[float | None, ...]] = field(default_factory=list)
    q_len: list[tuple[int | None, ...]] = field(default_factory=list)
    head_ttl: list[tuple[int | None, ...]] = field(default_factory=list)


@dataclass
class RunResult:
    """Final running averages and series for one replication; picklable."""

    label: str
    scheduler: str
    v: float | None
    horizon: int
    seed: int
    replication: int
    user_ids: tuple[int, ...]
    roles: tuple[str, ...]
    dbar: tuple[float, ...]
    pbar: tuple[float, ...]
    mubar: tuple[float, ...]
    fbar: tuple[float, ...]
    arrivals: tuple[int, ...]
    services: tuple[int, ...]
    drops: tuple[int, ...]
    energy: tuple[float, ...]
    fbar_total: float
    thr_total: float
    queue_sum_mean: float | None
    queue_sum_mean_q1: float | None
    queue_sum_mean_q2: float | None
    series: SeriesBlock | None
    actions: list[tuple[int, float]] | None


def _initial_queues(
    config: ExperimentConfig,
    initial_queues: Mapping[int, DeadlineQueue] | None,
) -> dict[int, DeadlineQueue]:
    queues = {s.id: DeadlineQueue(s.id) for s in config.deadline_specs}
    if initial_queues:
        for uid, q in initial_queues.items():
            if uid not in queues:
                raise ValueError(f"user {uid} is not a deadline user")
            m = next(s.deadline_m for s in config.specs if s.id == uid)
            if any(p.ttl > m for p in q.packets):
                raise ValueError(f"user {uid}: initial ttls exceed deadline {m}")
            queues[uid] = DeadlineQueue(uid, q.packets)
    return queues


class Simulation:
    """Slot-by-slot reference simulation driven by the contract functions.

    Use this for inspection, small experiments, and audits; `run` is the
    fast path for full horizons.
    """

    def __init__(
        self,
        config: ExperimentConfig,
        replication: int = 0,
        initial_queues: Mapping[int, DeadlineQueue] | None = None,
    ) -> None:
        config.validate()
        self.config = config
        self.replication = replication
        self.t = 0
        self._good = sample_channel_paths(
            config.specs, config.horizon, stream(config.seed, replication, CHANNEL_STREAM)
        )
        self._arrivals = sample_arrival_paths(
            config.specs, config.horizon, stream(config.seed, replication, ARRIVAL_STREAM)
        )
        self.queues = _initial_queues(config, initial_queues)
        self.dpc_state: DpcState | None = None
        self.ldf_state: LdfState | None = None
        if config.scheduler == SCHEDULER_DPC:
            self.dpc_state = DpcState.zeros(config.specs, config.v)
        else:
            self.ldf_state = LdfState.initial(config.specs)
        self.metrics = MetricsAccumulator(tuple(s.id for s in config.specs))
        self._dl_ids = [s.id for s in config.deadline_specs]

    def channels_at(self, t: int) -> tuple[Channel, ...]:
        row = self._good[t]
        return tuple(Channel.GOOD if g else Channel.BAD for g in row)

    def arrivals_at(self, t: int) -> dict[int, bool]:
        row = self._arrivals[t]
        return {uid: bool(row[k]) for k, uid in enumerate(self._dl_ids)}

    def step(self) -> SlotRecord:
        """Execute one slot in the fixed ordering and return its record."""
        config = self.config
        specs = config.specs
        t = self.t
        if t >= config.horizon:
            raise RuntimeError("simulation horizon exhausted")
        channels = self.channels_at(t)
        arrivals = self.arrivals_at(t)

        if self.dpc_state is not None:
            state_x: tuple[float, ...] | None = self.dpc_state.X
            z_or_y = tuple(
                self.dpc_state.Z.get(s.id) if s.is_throughput else None
                for s in specs
            )
            action = dpc_decide(self.dpc_state, self.queues, channels, specs, config.levels)
        else:
            state_x = None
            z_or_y = tuple(self.ldf_state.y)
            action = ldf_decide(self.ldf_state, self.queues, channels, specs, config.levels)

        q_len = tuple(
            len(self.queues[s.id]) if s.is_deadline else None for s in specs
        )
        head_ttl = tuple(
            self.queues[s.id].head_ttl if s.is_deadline else None for s in specs
        )

        drops = [0] * len(specs)
        arr_vec = [0] * len(specs)
        f = [0.0] * len(specs)
        for i, s in enumerate(specs):
            if not s.is_deadline:
                continue
            served = action.user == s.id
            f[i] = urgency_cost(self.queues[s.id].head_ttl, s.deadline_m, served)
            new_queue, drop = advance_queue(
                self.queues[s.id], served, arrivals[s.id], s.deadline_m
            )
            self.queues[s.id] = new_queue
            drops[i] = drop
            arr_vec[i] = int(arrivals[s.id])

        served_idx = -1 if action.is_idle else action.user - 1
        power = tuple(
            action.power if i == served_idx else 0.0 for i in range(len(specs))
        )
        served_vec = tuple(1 if i == served_idx else 0 for i in range(len(specs)))
        self.metrics.update(served_idx, action.power, drops, f, arr_vec)

        if self.dpc_state is not None:
            self.dpc_state = dpc_update(self.dpc_state, action, specs)
        else:
            self.ldf_state = ldf_update(self.ldf_state, served_vec)
        self.t += 1
        return SlotRecord(
            t=t,
            action=action,
            channels=channels,
            drops=tuple(drops),
            power=power,
            served=served_vec,
            f=tuple(f),
            x=state_x,
            z_or_y=z_or_y,
            q_len=q_len,
            head_ttl=head_ttl,
        )

    def run_all(self) -> list[SlotRecord]:
        return [self.step() for _ in range(self.config.horizon - self.t)]


def run(
    config: ExperimentConfig,
    replication: int = 0,
    *,
    record_actions: bool = False,
    collect_series: bool = True,
) -> RunResult:
    """Simulate one replication to the horizon; deterministic for fixed seed.

    The loop is an optimized transcription of `Simulation.step`: decisions go
    through the same objective kernel, and the queue-conservation and
    packet-accounting identities are asserted every slot.
    """
    config.validate()
    specs = config.specs
    n = len(specs)
    horizon = config.horizon
    levels = config.levels
    p_low = levels.p_low
    p_high = levels.p_high
    is_dpc = config.scheduler == SCHEDULER_DPC
    v = config.v if is_dpc else 0.0

    good_rows = sample_channel_paths(
        specs, horizon, stream(config.seed, replication, CHANNEL_STREAM)
    ).tolist()
    arr_rows = sample_arrival_paths(
        specs, horizon, stream(config.seed, replication, ARRIVAL_STREAM)
    ).tolist()

    gammas = [s.gamma for s in specs]
    deltas = [s.delta if s.is_throughput else 0.0 for s in specs]
    thr_idx = [i for i, s in enumerate(specs) if s.is_throughput]
    dl_idx = [i for i, s in enumerate(specs) if s.is_deadline]
    n_dl = len(dl_idx)
    m_list = [specs[i].deadline_m for i in dl_idx]
    # urgency lookup per deadline user: urg_tables[k][ttl], shared formula
    urg_tables = [
        [0.0] + [urgency_cost(ttl, m, False) for ttl in range(1, m + 1)]
        for m in m_list
    ]
    # queues hold absolute expiry slots (last servable slot); ttl = e - t + 1
    dl_queues = [deque() for _ in range(n_dl)]
    queue_by_idx: list = [None] * n
    for k, i in enumerate(dl_idx):
        queue_by_idx[i] = dl_queues[k]

    x = [0.0] * n
    z = [0.0] * n
    if not is_dpc:
        ldf = LdfState.initial(specs)
        y = list(ldf.y)
        q_targets = list(ldf.q)

    c_drop = [0] * n
    c_energy = [0.0] * n
    c_serve = [0] * n
    c_urg = [0.0] * n
    c_arr = [0] * n
    urg = [0.0] * n

    qsum_total = 0.0
    qsum_q1 = 0.0
    qsum_q2 = 0.0
    q1_lo, q1_hi = horizon // 4, horizon // 2
    q2_lo = horizon // 2

    trace_every = config.trace_every
    series = SeriesBlock() if collect_series else None
    actions: list[tuple[int, float]] | None = [] if record_actions else None

    kernel = _serve_objective
    for t in range(horizon):
        good = good_rows[t]
        arr = arr_rows[t]
        for k in range(n_dl):
            r = dl_idx[k]
            dq = dl_queues[k]
            urg[r] = urg_tables[k][dq[0] - t + 1] if dq else 0.0

        if is_dpc:
            # decision-time queue backlog sum (X(t), Z(t) convention)
            qs = 0.0
            for i in range(n):
                qs += x[i]
            for u in thr_idx:
                qs += z[u]
            qsum_total += qs
            if q1_lo <= t < q1_hi:
                qsum_q1 += qs
            elif t >= q2_lo:
                qsum_q2 += qs
            best_j = -1
            best_p = 0.0
            best_obj = float("inf")
            for j in range(n):
                dqj = queue_by_idx[j]
                if dqj is not None and not dqj:
                    continue
                p_j = p_low if good[j] else p_high
                obj = kernel(j, p_j, x, gammas, thr_idx, z, deltas, dl_idx, urg, v)
                if obj < best_obj:
                    best_obj = obj
                    best_j = j
                    best_p = p_j
            obj = kernel(-1, 0.0, x, gammas, thr_idx, z, deltas, dl_idx, urg, v)
            if obj < best_obj:
                best_j = -1
                best_p = 0.0
        else:
            best_j = -1
            best_y = 0.0
            for i in range(n):
                dqi = queue_by_idx[i]
                if dqi is not None and not dqi:
                    continue
                yi = y[i]
                if yi > 0.0 and (best_j == -1 or yi > best_y):
                    best_j = i
                    best_y = yi
            best_p = 0.0 if best_j == -1 else (p_low if good[best_j] else p_high)

        if best_j >= 0:
            c_energy[best_j] += best_p
            c_serve[best_j] += 1

        for k in range(n_dl):
            r = dl_idx[k]
            dq = dl_queues[k]
            old_len = len(dq)
            srv = 1 if r == best_j else 0
            if srv:
                dq.popleft()
            drop = 0
            if dq and dq[0] == t:
                dq.popleft()
                drop = 1
            a = 1 if arr[k] else 0
            if a:
                dq.append(t + m_list[k])
            if len(dq) != max(old_len - srv, 0) + a - drop:
                raise RuntimeError(f"user {r + 1}: queue conservation violated at t={t}")
            c_drop[r] += drop
            c_arr[r] += a
            if srv == 0:
                c_urg[r] += urg[r]
            if c_arr[r] != c_serve[r] + c_drop[r] + len(dq):
                raise RuntimeError(f"user {r + 1}: packet accounting violated at t={t}")

        if is_dpc:
            for i in range(n):
                x[i] = max(x[i] - gammas[i], 0.0) + (best_p if i == best_j else 0.0)
            for u in thr_idx:
                z[u] = max(z[u] - (1.0 if u == best_j else 0.0), 0.0) + deltas[u]
        else:
            for i in range(n):
                y[i] = y[i] + (q_targets[i] - (1 if i == best_j else 0))

        if actions is not None:
            actions.append((best_j, best_p))

        if series is not None and (t + 1) % trace_every == 0:
            slots = t + 1
            series.t.append(slots)
            series.dbar.append(tuple(c / slots for c in c_drop))
            series.pbar.append(tuple(c / slots for c in c_energy))
            series.mubar.append(tuple(c / slots for c in c_serve))
            series.fbar.append(tuple(c / slots for c in c_urg))
            if is_dpc:
                series.x.append(tuple(x))
                series.z_or_y.append(
                    tuple(z[i] if specs[i].is_throughput else None for i in range(n))
                )
            else:
                series.x.append((None,) * n)
                series.z_or_y.append(tuple(y))
            q_len_row: list[int | None] = [None] * n
            ttl_row: list[int | None] = [None] * n
            for k in range(n_dl):
                r = dl_idx[k]
                dq = dl_queues[k]
                q_len_row[r] = len(dq)
                ttl_row[r] = (dq[0] - t) if dq else None
            series.q_len.append(tuple(q_len_row))
            series.head_ttl.append(tuple(ttl_row))

    dbar = tuple(c / horizon for c in c_drop)
    pbar = tuple(c / horizon for c in c_energy)
    mubar = tuple(c / horizon for c in c_serve)
    fbar = tuple(c / horizon for c in c_urg)
    for i in range(n):
        if not 0.0 <= mubar[i] <= 1.0 or not 0.0 <= pbar[i] <= p_high:
            raise RuntimeError(f"user {i + 1}: averages out of range")
    fbar_total = 0.0
    for r in dl_idx:
        fbar_total += fbar[r]
    thr_total = 0.0
    for u in thr_idx:
        thr_total += mubar[u]

    if is_dpc:
        n_q1 = max(q1_hi - q1_lo, 0)
        n_q2 = horizon - q2_lo
        queue_sum_mean = qsum_total / horizon
        queue_sum_mean_q1 = qsum_q1 / n_q1 if n_q1 else None
        queue_sum_mean_q2 = qsum_q2 / n_q2 if n_q2 else None
    else:
        queue_sum_mean = queue_sum_mean_q1 = queue_sum_mean_q2 = None

    return RunResult(
        label=config.label,
        scheduler=config.scheduler,
        v=config.v,
        horizon=horizon,
        seed=config.seed,
        replication=replication,
        user_ids=tuple(s.id for s in specs),
        roles=tuple(s.role.value for s in specs),
        dbar=dbar,
        pbar=pbar,
        mubar=mubar,
        fbar=fbar,
        arrivals=tuple(c_arr),
        services=tuple(c_serve),
        drops=tuple(c_drop),
        energy=tuple(c_energy),
        fbar_total=fbar_total,
        thr_total=thr_total,
        queue_sum_mean=queue_sum_mean,
        queue_sum_mean_q1=queue_sum_mean_q1,
        queue_sum_mean_q2=queue_sum_mean_q2,
        series=series,
        actions=actions,
    )


def _run_task(args: tuple) -> RunResult:
    config, replication, record_actions, collect_series = args
    return run(
        config,
        replication,
        record_actions=record_actions,
        collect_series=collect_series,
    )


def run_experiment(
    config: ExperimentConfig,
    *,
    workers: int | None = None,
    executor: Executor | None = None,
    record_actions: bool = False,
    collect_series: bool = True,
) -> list[RunResult]:
    """Run every replication of `config`, optionally on a process pool.

    Results come back ordered by replication index regardless of completion
    order, so downstream output is deterministic.
    """
    config.validate()
    reps = range(config.replications)
    tasks = [(config, r, record_actions, collect_series) for r in reps]
    if executor is not None:
        return list(executor.map(_run_task, tasks))
    if workers is None:
        import os

        workers = min(os.cpu_count() or 1, config.replications)
    if workers <= 1 or config.replications == 1:
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_task, tasks))


def with_updates(config: ExperimentConfig, **changes) -> ExperimentConfig:
    """Functional update helper for frozen configs (validated)."""
    updated = replace(config, **changes)
    updated.validate()
    return updated


@dataclass
class SeriesMean:
    """Replication-averaged running-average series (per sample point, per user)."""

    t: list[int]
    dbar: list[list[float]]
    pbar: list[list[float]]
    mubar: list[list[float]]
    fbar: list[list[float]]


@dataclass
class ExperimentRun:
    """A config with all its replication results merged.

    Only replication 0 keeps its full series (traces stay small); the
    replication-averaged series is accumulated separately.
    """

    config: ExperimentConfig
    results: list[RunResult]
    series_mean: SeriesMean | None


def collect_experiment(
    config: ExperimentConfig,
    *,
    workers: int | None = None,
    executor: Executor | None = None,
    record_actions: bool = False,
) -> ExperimentRun:
    """Run all replications and merge them for reporting."""
    results = run_experiment(
        config,
        workers=workers,
        executor=executor,
        record_actions=record_actions,
        collect_series=True,
    )
    mean: SeriesMean | None = None
    n = config.n_users
    reps = len(results)
    for result in results:
        series = result.series
        if series is None:
            continue
        if mean is None:
            mean = SeriesMean(
                t=list(series.t),
                dbar=[[0.0] * n for _ in series.t],
                pbar=[[0.0] * n for _ in series.t],
                mubar=[[0.0] * n for _ in series.t],
                fbar=[[0.0] * n for _ in series.t],
            )
        for name in ("dbar", "pbar", "mubar", "fbar"):
            acc = getattr(mean, name)
            rows = getattr(series, name)
            for p in range(len(rows)):
                row = rows[p]
                acc_row = acc[p]
                for i in range(n):
                    acc_row[i] += row[i]
        if result.replication != 0:
            result.series = None  # keep memory bounded across large sweeps
    if mean is not None:
        for name in ("dbar", "pbar", "mubar", "fbar"):
            for row in getattr(mean, name):
                for i in range(n):
                    row[i] /= reps
    return ExperimentRun(config=config, results=results, series_mean=mean)
