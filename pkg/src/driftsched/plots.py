"""Figure rendering for the report path.

Renders PNGs from the same aggregated series the plotdata files carry, into
<out>/figures/.  Uses the Agg backend so it works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .engine import ExperimentRun
from .output import _first_throughput_index, _mean, _parse_mk

_RC = {
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.fontsize": 8,
    "lines.linewidth": 1.3,
}


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    return path


def _fig2(runs: list[ExperimentRun], fig_dir: Path) -> list[Path]:
    runs = sorted(runs, key=lambda e: e.config.v)
    fig, axes = plt.subplots(3, 1, figsize=(6.0, 9.0))
    for exp in runs:
        mean = exp.series_mean
        label = f"V={exp.config.v:g}"
        axes[0].plot(mean.t, [row[1] for row in mean.mubar], label=label)
        axes[1].plot(mean.t, [row[0] for row in mean.pbar], label=label)
    delta = runs[0].config.specs[1].delta
    gamma1 = runs[0].config.specs[0].gamma
    axes[0].axhline(delta, color="k", ls="--", lw=0.8)
    axes[0].set_ylabel("running throughput, user 2")
    axes[1].axhline(gamma1, color="k", ls="--", lw=0.8)
    axes[1].set_ylabel("running avg power, user 1")
    for ax in axes[:2]:
        ax.set_xlabel("slot")
        ax.legend()
    vs = [exp.config.v for exp in runs]
    drops = [_mean(r.dbar[0] for r in exp.results) for exp in runs]
    powers = [_mean(r.pbar[0] for r in exp.results) for exp in runs]
    ax = axes[2]
    ax.plot(vs, drops, "o-", label="drop rate, user 1")
    ax.set_xscale("log")
    ax.set_xlabel("V")
    ax.set_ylabel("drop rate, user 1")
    twin = ax.twinx()
    twin.plot(vs, powers, "s--", color="tab:red", label="avg power, user 1")
    twin.set_ylabel("avg power, user 1")
    twin.grid(False)
    ax.legend(loc="upper center")
    twin.legend(loc="center right")
    fig.suptitle("Power/drop tradeoff vs penalty weight V")
    return [_save(fig, fig_dir / "fig2_tradeoff.png")]


def _fig34(runs: list[ExperimentRun], fig_dir: Path, preset: str) -> list[Path]:
    droprate = preset == "fig3-droprate"
    ms = sorted({_parse_mk(e.config.label)[0] for e in runs})
    fig, axes = plt.subplots(1, len(ms), figsize=(5.5 * len(ms), 4.0), squeeze=False)
    for col, m in enumerate(ms):
        ax = axes[0][col]
        for sched, style in (("dpc", "o-"), ("ldf", "s--")):
            points = []
            for exp in runs:
                em, ek = _parse_mk(exp.config.label)
                if em != m or exp.config.scheduler != sched:
                    continue
                value = (
                    _mean(r.dbar[0] for r in exp.results)
                    if droprate
                    else _mean(r.thr_total for r in exp.results)
                )
                points.append((ek, value))
            points.sort()
            ax.plot([p[0] for p in points], [p[1] for p in points], style,
                    label=sched.upper())
        ax.set_xlabel("throughput users")
        ax.set_ylabel("drop rate, user 1" if droprate else "total throughput")
        ax.set_title(f"deadline m={m}")
        ax.legend()
    fig.suptitle(
        "Drop rate vs number of users" if droprate else "Throughput vs number of users"
    )
    name = "fig3_droprate.png" if droprate else "fig4_throughput.png"
    return [_save(fig, fig_dir / name)]


def _fig5(runs: list[ExperimentRun], fig_dir: Path) -> list[Path]:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for exp in sorted(runs, key=lambda e: e.config.scheduler):
        u2 = _first_throughput_index(exp)
        mean = exp.series_mean
        ax.plot(mean.t, [row[u2] for row in mean.mubar],
                label=exp.config.scheduler.upper())
    delta = next(s.delta for s in runs[0].config.specs if s.is_throughput)
    ax.axhline(delta, color="k", ls="--", lw=0.8)
    ax.set_xlabel("slot")
    ax.set_ylabel("running throughput, user 2")
    ax.set_title("Throughput convergence")
    ax.legend()
    return [_save(fig, fig_dir / "fig5_convergence.png")]


def _generic(runs: list[ExperimentRun], fig_dir: Path) -> list[Path]:
    paths = []
    for exp in runs:
        mean = exp.series_mean
        if mean is None:
            continue
        fig, axes = plt.subplots(1, 3, figsize=(13.0, 3.6))
        for i, spec in enumerate(exp.config.specs):
            uid = f"user {spec.id}"
            if spec.is_deadline:
                axes[0].plot(mean.t, [row[i] for row in mean.dbar], label=uid)
            axes[1].plot(mean.t, [row[i] for row in mean.pbar], label=uid)
            axes[2].plot(mean.t, [row[i] for row in mean.mubar], label=uid)
        axes[0].set_ylabel("running drop rate")
        axes[1].set_ylabel("running avg power")
        axes[2].set_ylabel("running throughput")
        for ax in axes:
            ax.set_xlabel("slot")
            ax.legend()
        fig.suptitle(exp.config.label)
        paths.append(_save(fig, fig_dir / f"convergence-{exp.config.label}.png"))
    return paths


def render_figures(
    runs: list[ExperimentRun], out_dir: str | Path, preset: str | None
) -> list[Path]:
    """Render the preset's figures (or generic convergence panels) to files."""
    fig_dir = Path(out_dir) / "figures"
    with matplotlib.rc_context(_RC):
        if preset == "fig2-tradeoff":
            return _fig2(runs, fig_dir)
        if preset in ("fig3-droprate", "fig4-throughput"):
            return _fig34(runs, fig_dir, preset)
        if preset == "fig5-convergence":
            return _fig5(runs, fig_dir)
        return _generic(runs, fig_dir)
