"""Report emission: final metrics, traces, plot-ready series, config echo.

File layout under the output directory (CSV shown; --format json mirrors the
same rows as JSON documents):

    final.csv          one row per (config, replication); identity columns,
                       aggregate metrics, per-user metric blocks, then the
                       bound-report fields (blank for LDF rows)
    trace.csv          replication-0 convergence trace, one row per
                       (sample slot, user)
    plotdata_*.csv     series matching the preset's figure axes
    config_echo.json   every run's config with defaults filled in
    figures/*.png      rendered alongside the delimited output unless
                       plotting is disabled

Column sets and their order are fixed; identity columns precede the metric
columns documented below.  All numbers are written with shortest-roundtrip
repr, so identical configs and seeds yield byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Iterable

from .analysis import bound_report
from .engine import ExperimentRun, RunResult

TRACE_COLUMNS = (
    "config",
    "replication",
    "t",
    "user",
    "q_len",
    "head_ttl",
    "x",
    "z_or_y",
    "dbar",
    "pbar",
    "mubar",
    "fbar",
)

_BOUND_FIELDS = (
    "bound_b",
    "bound_b_alt",
    "gap_bound",
    "queue_avg",
    "queue_avg_q1",
    "queue_avg_q2",
    "stability_ratio",
    "stability_ok",
    "fbar_offline",
    "bound_check",
)


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _write_csv(path: Path, columns: Iterable[str], rows: Iterable[dict]) -> None:
    columns = list(columns)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c)) for c in columns])


def _write_json(path: Path, payload: Any) -> None:
    with path.open("w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=False)
        fh.write("\n")


def final_columns(runs: list[ExperimentRun]) -> list[str]:
    n_max = max((r.config.n_users for r in runs), default=0)
    columns = [
        "config",
        "scheduler",
        "v",
        "horizon",
        "seed",
        "replication",
        "dbar_total",
        "fbar_total",
        "thr_total",
    ]
    for i in range(1, n_max + 1):
        columns += [f"u{i}_dbar", f"u{i}_pbar", f"u{i}_mubar", f"u{i}_fbar"]
    columns += list(_BOUND_FIELDS)
    return columns


def final_rows(runs: list[ExperimentRun]) -> list[dict]:
    rows = []
    for exp in runs:
        for result in exp.results:
            row: dict[str, Any] = {
                "config": exp.config.label,
                "scheduler": result.scheduler,
                "v": result.v,
                "horizon": result.horizon,
                "seed": result.seed,
                "replication": result.replication,
                "dbar_total": sum(result.dbar),
                "fbar_total": result.fbar_total,
                "thr_total": result.thr_total,
            }
            for i, uid in enumerate(result.user_ids):
                row[f"u{uid}_dbar"] = result.dbar[i]
                row[f"u{uid}_pbar"] = result.pbar[i]
                row[f"u{uid}_mubar"] = result.mubar[i]
                row[f"u{uid}_fbar"] = result.fbar[i]
            if result.scheduler == "dpc":
                report = bound_report(result, exp.config)
                row.update(
                    {
                        "bound_b": report.b,
                        "bound_b_alt": report.b_alt,
                        "gap_bound": report.gap_bound,
                        "queue_avg": report.queue_avg,
                        "queue_avg_q1": report.queue_avg_q1,
                        "queue_avg_q2": report.queue_avg_q2,
                        "stability_ratio": report.stability_ratio,
                        "stability_ok": report.stability_ok,
                        "fbar_offline": report.fbar_offline,
                        "bound_check": report.bound_check,
                    }
                )
            rows.append(row)
    return rows


def trace_rows(runs: list[ExperimentRun]) -> list[dict]:
    rows = []
    for exp in runs:
        rep0: RunResult | None = next(
            (r for r in exp.results if r.replication == 0), None
        )
        if rep0 is None or rep0.series is None:
            continue
        series = rep0.series
        for p, t in enumerate(series.t):
            for i, uid in enumerate(rep0.user_ids):
                rows.append(
                    {
                        "config": exp.config.label,
                        "replication": 0,
                        "t": t,
                        "user": uid,
                        "q_len": series.q_len[p][i],
                        "head_ttl": series.head_ttl[p][i],
                        "x": series.x[p][i],
                        "z_or_y": series.z_or_y[p][i],
                        "dbar": series.dbar[p][i],
                        "pbar": series.pbar[p][i],
                        "mubar": series.mubar[p][i],
                        "fbar": series.fbar[p][i],
                    }
                )
    return rows


def _mean(values: Iterable[float]) -> float:
    values = list(values)
    return sum(values) / len(values)


def _first_throughput_index(exp: ExperimentRun) -> int:
    for i, spec in enumerate(exp.config.specs):
        if spec.is_throughput:
            return i
    raise ValueError(f"config {exp.config.label} has no throughput user")


def _parse_mk(label: str) -> tuple[int, int]:
    m = k = -1
    for part in label.split("-"):
        if part.startswith("m") and part[1:].isdigit():
            m = int(part[1:])
        elif part.startswith("k") and part[1:].isdigit():
            k = int(part[1:])
    return m, k


def plotdata_tables(
    runs: list[ExperimentRun], preset: str | None
) -> dict[str, tuple[list[str], list[dict]]]:
    """Plot-ready tables keyed by file stem; schemas depend on the preset."""
    tables: dict[str, tuple[list[str], list[dict]]] = {}
    if preset == "fig2-tradeoff":
        tradeoff = []
        convergence = []
        for exp in sorted(runs, key=lambda e: e.config.v):
            v = exp.config.v
            tradeoff.append(
                {
                    "v": v,
                    "dbar_user1_mean": _mean(r.dbar[0] for r in exp.results),
                    "pbar_user1_mean": _mean(r.pbar[0] for r in exp.results),
                }
            )
            mean = exp.series_mean
            for p, t in enumerate(mean.t):
                convergence.append(
                    {
                        "v": v,
                        "t": t,
                        "mubar_user2_mean": mean.mubar[p][1],
                        "pbar_user1_mean": mean.pbar[p][0],
                    }
                )
        tables["plotdata_fig2_tradeoff"] = (
            ["v", "dbar_user1_mean", "pbar_user1_mean"],
            tradeoff,
        )
        tables["plotdata_fig2_convergence"] = (
            ["v", "t", "mubar_user2_mean", "pbar_user1_mean"],
            convergence,
        )
    elif preset in ("fig3-droprate", "fig4-throughput"):
        rows = []
        for exp in runs:
            m, k = _parse_mk(exp.config.label)
            row = {"m": m, "k": k, "scheduler": exp.config.scheduler}
            if preset == "fig3-droprate":
                row["dbar_user1_mean"] = _mean(r.dbar[0] for r in exp.results)
            else:
                row["thr_total_mean"] = _mean(r.thr_total for r in exp.results)
            rows.append(row)
        rows.sort(key=lambda r: (r["m"], r["k"], r["scheduler"]))
        metric = "dbar_user1_mean" if preset == "fig3-droprate" else "thr_total_mean"
        tables[f"plotdata_{preset.replace('-', '_')}"] = (
            ["m", "k", "scheduler", metric],
            rows,
        )
    elif preset == "fig5-convergence":
        rows = []
        for exp in sorted(runs, key=lambda e: e.config.scheduler):
            u2 = _first_throughput_index(exp)
            mean = exp.series_mean
            for p, t in enumerate(mean.t):
                rows.append(
                    {
                        "scheduler": exp.config.scheduler,
                        "t": t,
                        "mubar_user2_mean": mean.mubar[p][u2],
                    }
                )
        tables["plotdata_fig5_convergence"] = (
            ["scheduler", "t", "mubar_user2_mean"],
            rows,
        )
    else:
        rows = []
        for exp in runs:
            mean = exp.series_mean
            if mean is None:
                continue
            for p, t in enumerate(mean.t):
                for i, uid in enumerate(exp.config.specs):
                    rows.append(
                        {
                            "config": exp.config.label,
                            "t": t,
                            "user": uid.id,
                            "dbar_mean": mean.dbar[p][i],
                            "pbar_mean": mean.pbar[p][i],
                            "mubar_mean": mean.mubar[p][i],
                            "fbar_mean": mean.fbar[p][i],
                        }
                    )
        tables["plotdata_convergence"] = (
            ["config", "t", "user", "dbar_mean", "pbar_mean", "mubar_mean", "fbar_mean"],
            rows,
        )
    return tables


def emit(
    runs: list[ExperimentRun],
    out_dir: str | Path,
    *,
    fmt: str = "csv",
    preset: str | None = None,
    plot: bool = True,
) -> list[Path]:
    """Write all report files; returns the paths written."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}; expected csv or json")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    from .configio import config_to_dict

    echo_path = out / "config_echo.json"
    _write_json(echo_path, [config_to_dict(r.config) for r in runs])
    written.append(echo_path)

    columns = final_columns(runs)
    f_rows = final_rows(runs)
    t_rows = trace_rows(runs)
    tables = plotdata_tables(runs, preset)

    if fmt == "csv":
        final_path = out / "final.csv"
        _write_csv(final_path, columns, f_rows)
        written.append(final_path)
        trace_path = out / "trace.csv"
        _write_csv(trace_path, TRACE_COLUMNS, t_rows)
        written.append(trace_path)
        for stem, (cols, rows) in tables.items():
            path = out / f"{stem}.csv"
            _write_csv(path, cols, rows)
            written.append(path)
    else:
        final_path = out / "final.json"
        _write_json(final_path, {"columns": columns, "rows": f_rows})
        written.append(final_path)
        trace_path = out / "trace.json"
        _write_json(trace_path, {"columns": list(TRACE_COLUMNS), "rows": t_rows})
        written.append(trace_path)
        for stem, (cols, rows) in tables.items():
            path = out / f"{stem}.json"
            _write_json(path, {"columns": cols, "rows": rows})
            written.append(path)

    if plot:
        from . import plots

        written.extend(plots.render_figures(runs, out, preset))
    return written
