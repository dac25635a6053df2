"""Experiment execution: single runs, sweep grids, and the results CSV.

Cell order (protocol, axis value, seed) is fixed, so re-running a sweep with
the same scenario and seeds reproduces the output file byte for byte.
"""

import dataclasses
from pathlib import Path

from . import __version__
from .metrics import MetricsLedger, overhead_per_request, pdr, throughput
from .scenario import Scenario
from .sim import Simulation

CSV_COLUMNS = ("scenario", "preset", "protocol", "seed", "node_count", "speed",
               "bw_demand", "pdr", "throughput_bps", "overhead_per_req",
               "overhead_incl_hello", "drops_policy", "drops_unreachable")


@dataclasses.dataclass
class CellResult:
    protocol: str
    axis_value: float | int | None
    seed: int
    ledger: MetricsLedger
    scenario: Scenario


def apply_axis(scenario: Scenario, axis: str | None, value) -> Scenario:
    if axis is None:
        return scenario
    if axis == "speed":
        return dataclasses.replace(scenario, speed_range=[float(value), float(value)])
    if axis == "bandwidth":
        return dataclasses.replace(scenario, demand_kbps=float(value))
    if axis == "node_count":
        return dataclasses.replace(scenario, node_count=int(value))
    raise ValueError(f"unknown sweep axis {axis!r}")


def run_scenario(scenario: Scenario, seed: int,
                 protocol: str | None = None) -> MetricsLedger:
    sim = Simulation(scenario, seed, protocol)
    return sim.run()


def _row(cell: CellResult, include_hello: bool) -> dict:
    led = cell.ledger
    sc = cell.scenario
    return {
        "scenario": sc.hash(),
        "preset": sc.name,
        "protocol": cell.protocol,
        "seed": cell.seed,
        "node_count": sc.node_count,
        "speed": f"{sc.speed_range[1]:g}",
        "bw_demand": f"{sc.demand_kbps:g}",
        "pdr": f"{pdr(led):.6f}",
        "throughput_bps": f"{throughput(led):.3f}",
        "overhead_per_req": f"{overhead_per_request(led, include_hello):.6f}",
        "overhead_incl_hello": f"{overhead_per_request(led, True):.6f}",
        "drops_policy": led.drops_by_reason.get("policy", 0),
        "drops_unreachable": led.drops_by_reason.get("unreachable", 0),
    }


def iter_cells(scenario: Scenario):
    """(protocol, series value or None, axis value or None, seed) in
    canonical order."""
    sweep = scenario.sweep
    if sweep is None:
        for seed in scenario.seeds:
            yield scenario.protocol, None, None, seed
        return
    protocols = sweep.protocols or [scenario.protocol]
    series = sweep.series_values if sweep.series_axis is not None else [None]
    for protocol in protocols:
        for series_value in series:
            for value in sweep.values:
                for seed in sweep.seeds:
                    yield protocol, series_value, value, seed


def run_sweep(scenario: Scenario, out_path: str | Path,
              include_hello: bool = False,
              protocol_filter: str | None = None,
              seed_filter: int | None = None):
    """Run every sweep cell and write one CSV. Returns (rows, failures)."""
    scenario.validate()
    sweep = scenario.sweep
    axis = sweep.axis if sweep is not None else None
    series_axis = sweep.series_axis if sweep is not None else None
    rows: list[dict] = []
    failures: list[tuple] = []
    for protocol, series_value, value, seed in iter_cells(scenario):
        if protocol_filter is not None and protocol != protocol_filter:
            continue
        if seed_filter is not None and seed != seed_filter:
            continue
        cell_scenario = apply_axis(scenario, axis, value)
        cell_scenario = apply_axis(cell_scenario, series_axis, series_value)
        try:
            ledger = run_scenario(cell_scenario, seed, protocol)
            rows.append(_row(CellResult(protocol, value, seed, ledger,
                                        cell_scenario), include_hello))
        except Exception as exc:  # cell isolation: report, keep sweeping
            failures.append((protocol, value, seed, repr(exc)))
    write_csv(rows, out_path)
    return rows, failures


def write_csv(rows: list[dict], out_path: str | Path) -> None:
    lines = [f"# manetsim-version={__version__}", ",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(str(row[c]) for c in CSV_COLUMNS))
    Path(out_path).write_text("\n".join(lines) + "\n")
