"""Run summaries, control-vs-baseline comparison and plot-ready tables.

Output files are plain CSV/JSON so any external plotting tool can render
them; this package never draws figures itself.  All writers format floats
with ``repr`` so identical runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, replace
from typing import Iterable, Sequence

from .coordinator import CommandRecord
from .engine import RunResult, ScenarioTrace, run
from .optimizer import BUDGET_TOL
from .scenario import Scenario

PLOT_KINDS = (
    "total_emissions_vs_time",
    "in_fence_before_after",
    "per_vehicle_assignment_snapshot",
    "fleet_size_sweep",
)


@dataclass(frozen=True)
class RunSummary:
    """Headline statistics of a run (optionally paired with its baseline).

    Rates are means/maxes of the in-fence emission rate over rows with an
    active fence; dwell fractions are the share of recorded rows each
    vehicle spent in polluting mode.
    """

    budget: float
    control_mean_in_fence: float
    control_max_in_fence: float
    within_budget_fraction: float
    polluting_dwell: dict[str, float]
    baseline_mean_in_fence: float | None = None
    baseline_max_in_fence: float | None = None


@dataclass(frozen=True)
class CompareResult:
    baseline: RunResult
    control: RunResult
    summary: RunSummary


def _fence_rows(trace: ScenarioTrace):
    return [row for row in trace.rows if row.fences]


def _mean_max_in_fence(trace: ScenarioTrace) -> tuple[float, float]:
    rows = _fence_rows(trace)
    if not rows:
        return 0.0, 0.0
    rates = [row.in_fence_rate for row in rows]
    return sum(rates) / len(rates), max(rates)


def _dwell_fractions(trace: ScenarioTrace) -> dict[str, float]:
    seen: dict[str, int] = {}
    polluting: dict[str, int] = {}
    for row in trace.rows:
        for entry in row.vehicles:
            seen[entry.vehicle_id] = seen.get(entry.vehicle_id, 0) + 1
            if entry.mode == "polluting":
                polluting[entry.vehicle_id] = polluting.get(entry.vehicle_id, 0) + 1
    return {vid: polluting.get(vid, 0) / count for vid, count in sorted(seen.items())}


def summarize(control: RunResult, baseline: RunResult | None = None) -> RunSummary:
    rows = control.trace.rows
    budget = sum(row.budget for row in rows) / len(rows) if rows else 0.0
    mean_rate, max_rate = _mean_max_in_fence(control.trace)
    fence_rows = _fence_rows(control.trace)
    if fence_rows:
        within = sum(1 for r in fence_rows if r.in_fence_rate <= r.budget + BUDGET_TOL)
        within_fraction = within / len(fence_rows)
    else:
        within_fraction = 1.0
    base_mean = base_max = None
    if baseline is not None:
        base_mean, base_max = _mean_max_in_fence(baseline.trace)
    return RunSummary(
        budget=budget,
        control_mean_in_fence=mean_rate,
        control_max_in_fence=max_rate,
        within_budget_fraction=within_fraction,
        polluting_dwell=_dwell_fractions(control.trace),
        baseline_mean_in_fence=base_mean,
        baseline_max_in_fence=base_max,
    )


def run_compare(scenario: Scenario, seed: int) -> CompareResult:
    """Run the scenario twice with the same seed: control off, then on.

    The two runs share spawn draws (separate purpose-keyed streams) and the
    baseline consumes no coin tosses, so the traces differ only through the
    control actions and are directly comparable row by row.
    """
    baseline = run(replace(scenario, control_enabled=False), seed)
    control = run(replace(scenario, control_enabled=True), seed)
    return CompareResult(baseline=baseline, control=control, summary=summarize(control, baseline))


# -- plot-ready tables ---------------------------------------------------------


@dataclass(frozen=True)
class PlotTable:
    kind: str
    header: tuple[str, ...]
    rows: tuple[tuple, ...]


def emit_plot_data(
    kind: str,
    trace: ScenarioTrace | None = None,
    baseline: ScenarioTrace | None = None,
    commands: Sequence[CommandRecord] = (),
    at_time: float | None = None,
) -> PlotTable:
    """Columnar data for one figure kind; see PLOT_KINDS for the options."""
    if kind == "total_emissions_vs_time":
        if trace is None or not trace.rows:
            raise ValueError("total_emissions_vs_time needs a non-empty trace")
        rows = tuple((r.sim_time, r.total_rate, r.n_vehicles) for r in trace.rows)
        return PlotTable(kind, ("sim_time", "total_rate", "n_vehicles"), rows)
    if kind == "in_fence_before_after":
        if trace is None or baseline is None or not trace.rows:
            raise ValueError("in_fence_before_after needs a control and a baseline trace")
        if len(trace.rows) != len(baseline.rows):
            raise ValueError("traces have different lengths")
        rows = tuple(
            (c.sim_time, b.in_fence_rate, c.in_fence_rate, c.budget)
            for b, c in zip(baseline.rows, trace.rows)
        )
        return PlotTable(kind, ("sim_time", "before_rate", "after_rate", "budget"), rows)
    if kind == "per_vehicle_assignment_snapshot":
        decided = [r for r in commands if r.assignment is not None]
        if not decided:
            raise ValueError("no assignment rows in the command log")
        if at_time is None:
            at_time = decided[-1].sim_time
        snapshot = [r for r in decided if r.sim_time == at_time]
        if not snapshot:
            raise ValueError(f"no assignment rows at sim_time={at_time}")
        rows = tuple(
            (r.vehicle_id, r.density, r.emission_rate, r.assignment, r.commanded_mode)
            for r in sorted(snapshot, key=lambda r: r.vehicle_id)
        )
        return PlotTable(
            kind,
            ("vehicle_id", "density", "emission_rate", "assignment", "commanded_mode"),
            rows,
        )
    if kind == "fleet_size_sweep":
        decided = [r for r in commands if r.assignment is not None]
        if not decided:
            raise ValueError("no assignment rows in the command log")
        by_tick: dict[tuple[float, str], list[CommandRecord]] = {}
        for record in decided:
            by_tick.setdefault((record.sim_time, record.fence_id), []).append(record)
        by_size: dict[int, list[tuple[float, float]]] = {}
        for records in by_tick.values():
            total_x = sum(r.assignment for r in records)
            expected = sum(r.assignment * r.emission_rate for r in records)
            by_size.setdefault(len(records), []).append((total_x, expected))
        rows = tuple(
            (
                size,
                len(samples),
                sum(s[0] for s in samples) / len(samples),
                sum(s[1] for s in samples) / len(samples),
            )
            for size, samples in sorted(by_size.items())
        )
        return PlotTable(
            kind, ("n_members", "ticks", "mean_total_assignment", "mean_expected_rate"), rows
        )
    raise ValueError(f"unknown plot kind {kind!r}; expected one of {PLOT_KINDS}")


# -- file writers ---------------------------------------------------------------


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_table_csv(table: PlotTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(table.header)
        for row in table.rows:
            writer.writerow([_cell(v) for v in row])


TRACE_HEADER = (
    "sim_time",
    "budget",
    "in_fence_rate",
    "total_rate",
    "n_vehicles",
    "fences",
    "vehicles",
)


def _encode_fences(row) -> str:
    parts = []
    for f in row.fences:
        members = "+".join(f.member_ids)
        parts.append(
            f"{f.fence_id}~{f.center[0]!r}~{f.center[1]!r}~{f.radius!r}"
            f"~{f.created_at!r}~{f.last_detection_at!r}~{members}"
        )
    return "|".join(parts)


def _encode_vehicles(row) -> str:
    return "|".join(
        f"{v.vehicle_id}~{v.euro_class}~{v.edge_id}~{v.edge_offset!r}~{v.speed!r}~{v.mode}"
        for v in row.vehicles
    )


def write_trace_csv(trace: ScenarioTrace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(TRACE_HEADER)
        for row in trace.rows:
            writer.writerow(
                [
                    _cell(row.sim_time),
                    _cell(row.budget),
                    _cell(row.in_fence_rate),
                    _cell(row.total_rate),
                    row.n_vehicles,
                    _encode_fences(row),
                    _encode_vehicles(row),
                ]
            )


COMMANDS_HEADER = (
    "sim_time",
    "fence_id",
    "vehicle_id",
    "density",
    "emission_rate",
    "assignment",
    "draw",
    "commanded_mode",
    "effective_time",
)


def write_commands_csv(commands: Iterable[CommandRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(COMMANDS_HEADER)
        for record in commands:
            writer.writerow(
                [
                    _cell(record.sim_time),
                    record.fence_id,
                    record.vehicle_id,
                    _cell(record.density),
                    _cell(record.emission_rate),
                    _cell(record.assignment),
                    _cell(record.draw),
                    record.commanded_mode,
                    _cell(record.effective_time),
                ]
            )


def write_summary_json(summary: RunSummary, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(asdict(summary), handle, indent=2, sort_keys=True)
        handle.write("\n")
