"""Evaluation metrics: placement success, resource wastage, deadline satisfaction, hops.

Resource accounting uses the unit basis (1 core, 1 GB, 1 TB): the units of
an entity are the maximum of its three normalized components, with every
service counting one core-equivalent on the CPU axis.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .model import Application, Device, PlacementPlan, Topology
from .simulator import RequestOutcome, SATISFIED


class ZeroServicesError(ValueError):
    """No services were requested, so a success ratio is undefined."""


def service_units(mem_demand: float, storage_demand: float) -> float:
    """Units consumed by a placed service: max(1 core-equivalent, GB, TB)."""
    return max(1.0, mem_demand, storage_demand)


def device_units(device: Device) -> float:
    """Units offered by a device: max(cores, GB, TB)."""
    return max(float(device.cores), device.mem, device.storage)


def placement_success_rate(plans: Iterable[PlacementPlan]) -> float:
    """Placed services over requested services, across all plans."""
    placed = 0
    total = 0
    for plan in plans:
        total += len(plan.assignment)
        placed += sum(1 for d in plan.assignment.values() if d is not None)
    if total == 0:
        raise ZeroServicesError("no services requested")
    return placed / total


def resource_wastage(
    placements: Iterable[tuple[Application, PlacementPlan]],
    devices: Iterable[Device],
) -> float:
    """1 - consumed units / offered units; all devices count in the denominator."""
    consumed = 0.0
    for app, plan in placements:
        for sid, device_id in plan.assignment.items():
            if device_id is None:
                continue
            s = app.service(sid)
            consumed += service_units(s.mem_demand, s.storage_demand)
    offered = sum(device_units(d) for d in devices)
    if offered <= 0:
        raise ValueError("infrastructure offers no resource units")
    return 1.0 - consumed / offered


def deadline_satisfaction(outcomes: Sequence[RequestOutcome]) -> float:
    """Satisfied requests over all requests; 0.0 when nothing was requested."""
    if not outcomes:
        return 0.0
    return sum(1 for o in outcomes if o.status == SATISFIED) / len(outcomes)


def cumulative_series(
    outcomes: Sequence[RequestOutcome],
) -> list[tuple[float, int, int, float]]:
    """Rows (time_s, requests, satisfied, cumulative_ratio), one per event time."""
    rows: list[tuple[float, int, int, float]] = []
    requests = 0
    satisfied = 0
    for i, outcome in enumerate(outcomes):
        requests += 1
        if outcome.status == SATISFIED:
            satisfied += 1
        last_of_tick = i + 1 == len(outcomes) or outcomes[i + 1].time_s != outcome.time_s
        if last_of_tick:
            rows.append((outcome.time_s, requests, satisfied, satisfied / requests))
    return rows


def hop_histogram(
    placements: Iterable[tuple[Application, PlacementPlan]],
    topology: Topology,
    gateways: Mapping[int, int],
) -> dict[int | str, int]:
    """Histogram of gateway-to-host hop counts over placed services.

    ``gateways`` maps user id to gateway device. Unreachable hosts land in
    the dedicated "unreachable" bucket.
    """
    histogram: dict[int | str, int] = {}
    for app, plan in placements:
        gateway = gateways[app.user]
        for device_id in plan.assignment.values():
            if device_id is None:
                continue
            hops = topology.hop_count(gateway, device_id)
            key: int | str = "unreachable" if hops is None else hops
            histogram[key] = histogram.get(key, 0) + 1
    return histogram


REPORT_COLUMNS = (
    "run",
    "scenario",
    "strategy",
    "placement_success_rate",
    "resource_wastage",
    "deadline_satisfaction",
    "hop_mean",
    "hop_max",
    "unreachable_services",
)


def emit_report(
    rows: Sequence[Mapping[str, object]],
    out_dir: Path,
    formats: Sequence[str] = ("csv", "json"),
) -> list[Path]:
    """Write the cross-run comparison table; returns the created paths.

    The CSV column order is fixed (REPORT_COLUMNS) and the JSON document is
    key-sorted, so reruns produce identical bytes.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        if "csv" in formats:
            path = out_dir / "comparison.csv"
            with path.open("w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(REPORT_COLUMNS)
                for row in rows:
                    writer.writerow([_cell(row.get(col)) for col in REPORT_COLUMNS])
            written.append(path)
        if "json" in formats:
            path = out_dir / "report.json"
            payload = {"schema_version": 1, "runs": [dict(sorted(r.items())) for r in rows]}
            path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
            written.append(path)
    except OSError as exc:
        raise OSError(f"failed writing report under {out_dir}: {exc}") from exc
    return written


def _cell(value: object) -> object:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def hop_summary(histogram: Mapping[int | str, int]) -> tuple[float | None, int | None, int]:
    """(mean, max, unreachable count) of a hop histogram."""
    unreachable = int(histogram.get("unreachable", 0))
    numeric = {int(k): v for k, v in histogram.items() if k != "unreachable"}
    total = sum(numeric.values())
    if total == 0:
        return None, None, unreachable
    mean = sum(k * v for k, v in numeric.items()) / total
    return mean, max(numeric), unreachable
