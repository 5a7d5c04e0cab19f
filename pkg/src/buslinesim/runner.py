"""Monte-Carlo replication harness.

Runs N seeded replications of a service day, audits each trace, computes
per-run KPI series and pools them.  Replication k draws every sample from
substreams of (master seed, k), so results are reproducible and
independent of execution order; aggregation always happens in replication
order, which keeps pooled floating-point sums byte-stable.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from . import __version__
from .demand import ScenarioConfig, apply_scenario, generate_passengers
from .distributions import EmpiricalModel
from .engine import audit_trace, run_replication
from .kpi import (
    PER_STOP,
    PER_TRIP,
    KpiSeries,
    aggregate_runs,
    compute_stop_series,
    compute_trip_series,
    series_bundle_to_dict,
    trace_observations,
    waiting_series,
)
from .network import DIRECTIONS


@dataclass
class SimulationResult:
    runs: int
    master_seed: int
    #: {axis: {direction: {indicator: aggregated KpiSeries}}}
    kpi: dict[str, dict[str, dict[str, KpiSeries]]]
    audit_violations: list[str]
    stranded_total: int
    overrun_trips_total: int
    boardings_total: int
    alightings_total: int

    def series(self, axis: str, direction: str, indicator: str) -> KpiSeries:
        return self.kpi[axis][direction][indicator]

    def to_summary_dict(self) -> dict:
        return {
            "tool": "buslinesim",
            "version": __version__,
            "runs": self.runs,
            "master_seed": self.master_seed,
            "kpi": series_bundle_to_dict(self.kpi),
            "audit": {
                "violations": len(self.audit_violations),
                "violation_messages": self.audit_violations[:50],
                "stranded_total": self.stranded_total,
                "overrun_trips_total": self.overrun_trips_total,
                "boardings_total": self.boardings_total,
                "alightings_total": self.alightings_total,
            },
        }


def _run_one(args) -> tuple[list[KpiSeries], list[str], int, int, int, int]:
    models, rates, od, master_seed, replication = args
    plans = generate_passengers(rates, od, models.network, master_seed, replication)
    trace = run_replication(models, plans, master_seed, replication)
    problems = audit_trace(trace)
    observations = trace_observations(trace)
    series: list[KpiSeries] = []
    for direction in DIRECTIONS:
        series.extend(compute_stop_series(observations, direction).values())
        series.extend(compute_trip_series(observations, direction).values())
    for direction, ws in waiting_series(trace).items():
        series.append(ws)
    return (
        series,
        problems,
        len(trace.stranded_ids),
        trace.overrun_trips,
        trace.total_boardings,
        trace.total_alightings,
    )


def simulate_runs(
    models: EmpiricalModel,
    scenario: ScenarioConfig,
    runs: int,
    master_seed: int,
    jobs: int = 1,
) -> SimulationResult:
    """Run the scenario for `runs` replications and pool the KPIs."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    od, rates = apply_scenario(models.od, models.rates, scenario)
    tasks = [(models, rates, od, master_seed, rep) for rep in range(runs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, tasks, chunksize=max(1, runs // (jobs * 4))))
    else:
        results = [_run_one(task) for task in tasks]

    by_key: dict[tuple[str, str, str], list[KpiSeries]] = {}
    violations: list[str] = []
    stranded = overruns = boardings = alightings = 0
    for rep, (series_list, problems, n_stranded, n_overruns, n_board, n_alight) in enumerate(results):
        violations.extend(f"rep {rep}: {p}" for p in problems)
        stranded += n_stranded
        overruns += n_overruns
        boardings += n_board
        alightings += n_alight
        for series in series_list:
            by_key.setdefault((series.axis, series.direction, series.indicator), []).append(series)

    kpi: dict[str, dict[str, dict[str, KpiSeries]]] = {PER_STOP: {}, PER_TRIP: {}}
    for (axis, direction, indicator), runs_series in sorted(by_key.items()):
        kpi.setdefault(axis, {}).setdefault(direction, {})[indicator] = aggregate_runs(runs_series)
    return SimulationResult(
        runs=runs,
        master_seed=master_seed,
        kpi=kpi,
        audit_violations=violations,
        stranded_total=stranded,
        overrun_trips_total=overruns,
        boardings_total=boardings,
        alightings_total=alightings,
    )
