"""driftsched: slotted-time wireless scheduling under average-power budgets.

Library + CLI for simulating a mix of deadline-constrained and
minimum-throughput users on two-state fading channels, scheduled either by
drift-plus-penalty control (DPC) over virtual constraint queues or by the
largest-debt-first (LDF) baseline, with deterministic seeded experiments,
small-instance oracle verification, and report/figure emission.
"""

from .analysis import (
    BoundReport,
    OracleResult,
    RunAudit,
    SamplePath,
    audit_dpc_run,
    bound_B,
    bound_constant,
    bound_report,
    evaluate_schedule,
    lyapunov_value,
    offline_oracle,
    schedule_is_feasible,
)
from .engine import (
    ExperimentConfig,
    MetricsAccumulator,
    RunResult,
    Simulation,
    SlotRecord,
    run,
    run_experiment,
)
from .model import (
    IDLE,
    Action,
    Channel,
    DeadlineQueue,
    Packet,
    PowerLevels,
    UserRole,
    UserSpec,
    advance_queue,
    candidate_actions,
    feasible_powers,
    sample_arrivals,
    sample_channels,
)
from .schedulers import (
    DpcState,
    LdfState,
    dpc_decide,
    dpc_objective,
    dpc_update,
    ldf_decide,
    ldf_update,
    urgency_cost,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "BoundReport",
    "Channel",
    "DeadlineQueue",
    "DpcState",
    "ExperimentConfig",
    "IDLE",
    "LdfState",
    "MetricsAccumulator",
    "OracleResult",
    "Packet",
    "PowerLevels",
    "RunAudit",
    "RunResult",
    "SamplePath",
    "Simulation",
    "SlotRecord",
    "UserRole",
    "UserSpec",
    "advance_queue",
    "audit_dpc_run",
    "bound_B",
    "bound_constant",
    "bound_report",
    "candidate_actions",
    "dpc_decide",
    "dpc_objective",
    "dpc_update",
    "evaluate_schedule",
    "feasible_powers",
    "ldf_decide",
    "ldf_update",
    "lyapunov_value",
    "offline_oracle",
    "run",
    "run_experiment",
    "sample_arrivals",
    "sample_channels",
    "schedule_is_feasible",
    "urgency_cost",
]
