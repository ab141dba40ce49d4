"""Bundled experiment presets.

Each preset expands deterministically into one or more ExperimentConfig
values; the exact parameters are pinned here and in README.  All presets
share one base seed so schedulers are compared on common random numbers.

Note: the per-user throughput target 0.1 used by fig3/fig4/fig5 is a
documented default of this package (it keeps total demand at or below 0.95
with six throughput users), not a value fixed by the scenario family.
"""

from __future__ import annotations

from .engine import ExperimentConfig
from .model import PowerLevels, UserSpec

DEFAULT_SEED = 1000003
DEFAULT_HORIZON = 100_000
DEFAULT_REPLICATIONS = 20
DEFAULT_TRACE_EVERY = 100
DEFAULT_V = 100.0
V_SWEEP = (10.0, 100.0, 1000.0)
MULTIUSER_DELTA = 0.1

PRESET_NAMES = (
    "fig2-tradeoff",
    "fig3-droprate",
    "fig4-throughput",
    "fig5-convergence",
)


def _fmt(x: float) -> str:
    return f"{x:g}"


def tradeoff_pair_specs() -> tuple[UserSpec, UserSpec]:
    """Two users: a deadline user with a tight power cap and one throughput user."""
    return (
        UserSpec.deadline(1, arrival_prob=0.5, deadline_m=10, gamma=0.7, good_prob=0.4),
        UserSpec.throughput(2, delta=0.4, gamma=0.65, good_prob=0.4),
    )


def multiuser_specs(k: int, m: int, delta: float = MULTIUSER_DELTA) -> tuple[UserSpec, ...]:
    """One deadline user plus k identical throughput users on a good channel,
    with power caps loose enough never to bind."""
    users = [
        UserSpec.deadline(1, arrival_prob=0.35, deadline_m=m, gamma=2.0, good_prob=0.9)
    ]
    users += [
        UserSpec.throughput(1 + j, delta=delta, gamma=2.0, good_prob=0.9)
        for j in range(1, k + 1)
    ]
    return tuple(users)


def expand_preset(
    name: str,
    *,
    v: float | None = None,
    slots: int | None = None,
    seed: int | None = None,
    replications: int | None = None,
    trace_every: int | None = None,
) -> list[ExperimentConfig]:
    """Expand a preset name into its config list, with optional overrides.

    `v` restricts fig2's sweep to a single value and replaces the default V
    of the other presets' DPC configs.
    """
    if name not in PRESET_NAMES:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    horizon = slots if slots is not None else DEFAULT_HORIZON
    base_seed = seed if seed is not None else DEFAULT_SEED
    reps = replications if replications is not None else DEFAULT_REPLICATIONS
    stride = trace_every if trace_every is not None else DEFAULT_TRACE_EVERY
    levels = PowerLevels(1.0, 2.0)
    configs: list[ExperimentConfig] = []

    if name == "fig2-tradeoff":
        sweep = (v,) if v is not None else V_SWEEP
        for value in sweep:
            configs.append(
                ExperimentConfig(
                    specs=tradeoff_pair_specs(),
                    levels=levels,
                    scheduler="dpc",
                    horizon=horizon,
                    seed=base_seed,
                    v=value,
                    trace_every=stride,
                    replications=reps,
                    label=f"{name}-v{_fmt(value)}",
                )
            )
    elif name in ("fig3-droprate", "fig4-throughput"):
        v_value = v if v is not None else DEFAULT_V
        for m in (10, 30):
            for k in range(1, 7):
                for sched in ("dpc", "ldf"):
                    configs.append(
                        ExperimentConfig(
                            specs=multiuser_specs(k, m),
                            levels=levels,
                            scheduler=sched,
                            horizon=horizon,
                            seed=base_seed,
                            v=v_value if sched == "dpc" else None,
                            trace_every=stride,
                            replications=reps,
                            label=f"{name}-m{m}-k{k}-{sched}",
                        )
                    )
    elif name == "fig5-convergence":
        v_value = v if v is not None else DEFAULT_V
        for sched in ("dpc", "ldf"):
            configs.append(
                ExperimentConfig(
                    specs=multiuser_specs(6, 100),
                    levels=levels,
                    scheduler=sched,
                    horizon=horizon,
                    seed=base_seed,
                    v=v_value if sched == "dpc" else None,
                    trace_every=stride,
                    replications=reps,
                    label=f"{name}-{sched}",
                )
            )
    for config in configs:
        config.validate()
    return configs
