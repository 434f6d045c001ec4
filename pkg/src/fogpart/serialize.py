"""Versioned JSON/CSV file formats for scenario bundles, partitions, and plans.

All JSON documents carry a ``schema_version`` field, are key-sorted, and
end with a newline, so identical inputs serialize to identical bytes.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .model import Application, Device, Message, NetworkLink, PlacementPlan, Service, User
from .multilayer import Layer
from .partitioner import (
    CompressedGraph,
    CompressedNode,
    FeaturePartitionSet,
    FeatureTriplet,
    PartitionSet,
)
from .scenario import AppRequest, Scenario, ScenarioConfig

SCHEMA_VERSION = 1

INVALID_MARK = "invalid"


def dump_json(path: Path, payload: Mapping[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def load_json(path: Path) -> dict[str, Any]:
    return json.loads(Path(path).read_text())


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path


# -- scenario bundles --------------------------------------------------------


def config_to_dict(cfg: ScenarioConfig) -> dict[str, Any]:
    return {
        "device_count": cfg.device_count,
        "gateway_count": cfg.gateway_count,
        "ba_attachment": cfg.ba_attachment,
        "cores_range": list(cfg.cores_range),
        "cpu_speed_range": list(cfg.cpu_speed_range),
        "mem_range": list(cfg.mem_range),
        "storage_range": list(cfg.storage_range),
        "service_count_range": list(cfg.service_count_range),
        "deadline_range_ms": list(cfg.deadline_range_ms),
        "service_mem_range": list(cfg.service_mem_range),
        "service_storage_range": list(cfg.service_storage_range),
        "message_size_range_kb": list(cfg.message_size_range_kb),
        "workload_range": list(cfg.workload_range),
        "latency_ms": cfg.latency_ms,
        "bandwidth_bytes_per_ms": cfg.bandwidth_bytes_per_ms,
        "request_period_s": cfg.request_period_s,
        "horizon_s": cfg.horizon_s,
        "cloud_factor": cfg.cloud_factor,
        "app_count": cfg.app_count,
        "user_count": cfg.user_count,
        "deadline_mode": cfg.deadline_mode,
        "scale": cfg.scale,
        "seed": cfg.seed,
    }


def config_from_dict(data: Mapping[str, Any]) -> ScenarioConfig:
    kwargs = dict(data)
    for name in (
        "cores_range",
        "cpu_speed_range",
        "mem_range",
        "storage_range",
        "service_count_range",
        "deadline_range_ms",
        "service_mem_range",
        "service_storage_range",
        "message_size_range_kb",
        "workload_range",
    ):
        if name in kwargs:
            kwargs[name] = tuple(kwargs[name])
    return ScenarioConfig(**kwargs)


def _app_to_dict(app: Application) -> dict[str, Any]:
    return {
        "id": app.id,
        "deadline_ms": app.deadline,
        "user": app.user,
        "services": [
            {
                "id": s.id,
                "workload_mi": s.workload,
                "mem_gb": s.mem_demand,
                "storage_tb": s.storage_demand,
            }
            for s in app.services
        ],
        "messages": [
            {"source": m.source, "destination": m.destination, "size_bytes": m.size}
            for m in app.messages
        ],
    }


def _app_from_dict(data: Mapping[str, Any]) -> Application:
    return Application(
        id=data["id"],
        services=[
            Service(s["id"], s["workload_mi"], s["mem_gb"], s["storage_tb"])
            for s in data["services"]
        ],
        messages=[
            Message(m["source"], m["destination"], m["size_bytes"]) for m in data["messages"]
        ],
        deadline=data["deadline_ms"],
        user=data.get("user"),
    )


def scenario_to_dict(scenario: Scenario) -> dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "config": config_to_dict(scenario.config),
        "devices": [
            {
                "id": d.id,
                "cores": d.cores,
                "cpu_speed_mi_s": d.cpu_speed,
                "mem_gb": d.mem,
                "storage_tb": d.storage,
            }
            for d in scenario.devices
        ],
        "links": [
            {"a": l.a, "b": l.b, "bandwidth_bytes_ms": l.bandwidth, "latency_ms": l.latency}
            for l in scenario.links
        ],
        "gateways": list(scenario.gateways),
        "cloud_id": scenario.cloud_id,
        "apps": [_app_to_dict(a) for a in scenario.apps],
        "users": [{"id": u.id, "gateway": u.gateway} for u in scenario.users],
        "requests": [
            {"request_id": r.request_id, "user_id": r.user_id, "app_id": r.app_id}
            for r in scenario.requests
        ],
        "schedule": [[t, rid] for t, rid in scenario.schedule],
    }


def scenario_from_dict(data: Mapping[str, Any]) -> Scenario:
    _check_version(data, "scenario")
    return Scenario(
        config=config_from_dict(data["config"]),
        devices=[
            Device(d["id"], d["cores"], d["cpu_speed_mi_s"], d["mem_gb"], d["storage_tb"])
            for d in data["devices"]
        ],
        links=[
            NetworkLink(l["a"], l["b"], l["bandwidth_bytes_ms"], l["latency_ms"])
            for l in data["links"]
        ],
        gateways=tuple(data["gateways"]),
        cloud_id=data["cloud_id"],
        apps=[_app_from_dict(a) for a in data["apps"]],
        users=[User(u["id"], u["gateway"]) for u in data["users"]],
        requests=[
            AppRequest(r["request_id"], r["user_id"], r["app_id"]) for r in data["requests"]
        ],
        schedule=[(row[0], row[1]) for row in data["schedule"]],
    )


# -- partition results -------------------------------------------------------


def _node_key(node: CompressedNode) -> str:
    layer, pid = node
    return f"{Layer(layer).name}:{pid}"


def _node_from_key(key: str) -> CompressedNode:
    layer_name, pid = key.split(":")
    return (Layer[layer_name], int(pid))


def _partition_set_to_dict(ps: PartitionSet) -> dict[str, Any]:
    return {
        "layer": ps.layer.name,
        "modularity": ps.modularity,
        "partitions": {str(pid): sorted(devs) for pid, devs in ps.partitions.items()},
    }


def _partition_set_from_dict(data: Mapping[str, Any]) -> PartitionSet:
    partitions = {int(pid): frozenset(devs) for pid, devs in data["partitions"].items()}
    assignment = {dev: pid for pid, devs in partitions.items() for dev in devs}
    return PartitionSet(
        layer=Layer[data["layer"]],
        assignment=assignment,
        partitions=partitions,
        modularity=data["modularity"],
    )


def partitions_to_dict(
    fps: FeaturePartitionSet,
    network: PartitionSet,
    layer_sets: Mapping[Layer, PartitionSet],
    compressed: CompressedGraph,
) -> dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "replica_coupling": "feature-partition",
        "network": _partition_set_to_dict(network),
        "resource_layers": {
            layer.name: _partition_set_to_dict(ps) for layer, ps in layer_sets.items()
        },
        "compressed": {
            "nodes": [_node_key(n) for n in compressed.nodes],
            "edges": [[_node_key(a), _node_key(b)] for a, b in compressed.edges],
            "members": {_node_key(n): sorted(devs) for n, devs in compressed.members.items()},
            "features": {
                _node_key(n): [f.avg_cpu, f.avg_mem, f.avg_storage]
                for n, f in compressed.features.items()
            },
        },
        "feature_partitions": {
            "modularity": fps.modularity,
            "members": {
                str(fp): sorted(_node_key(n) for n in nodes)
                for fp, nodes in fps.feature_partitions.items()
            },
            "device_index": {
                str(fp): sorted(devs) for fp, devs in fps.device_index.items()
            },
        },
    }


def partitions_from_dict(
    data: Mapping[str, Any],
) -> tuple[FeaturePartitionSet, PartitionSet, dict[Layer, PartitionSet], CompressedGraph]:
    _check_version(data, "partitions")
    network = _partition_set_from_dict(data["network"])
    layer_sets = {
        Layer[name]: _partition_set_from_dict(ps)
        for name, ps in data["resource_layers"].items()
    }
    comp = data["compressed"]
    compressed = CompressedGraph(
        nodes=tuple(_node_from_key(k) for k in comp["nodes"]),
        edges=tuple((_node_from_key(a), _node_from_key(b)) for a, b in comp["edges"]),
        members={_node_from_key(k): frozenset(v) for k, v in comp["members"].items()},
        features={
            _node_from_key(k): FeatureTriplet(*vals) for k, vals in comp["features"].items()
        },
    )
    fp_data = data["feature_partitions"]
    fps = FeaturePartitionSet(
        feature_partitions={
            int(fp): frozenset(_node_from_key(k) for k in nodes)
            for fp, nodes in fp_data["members"].items()
        },
        device_index={int(fp): frozenset(devs) for fp, devs in fp_data["device_index"].items()},
        modularity=fp_data["modularity"],
    )
    return fps, network, layer_sets, compressed


# -- placement plans ---------------------------------------------------------


def plans_to_dict(
    plans: Mapping[int, PlacementPlan],
    strategy: str,
    alpha: float,
    beta: float,
) -> dict[str, Any]:
    serialized = {}
    for request_id, plan in plans.items():
        serialized[str(request_id)] = {
            "assignment": {
                str(sid): (INVALID_MARK if dev is None else dev)
                for sid, dev in plan.assignment.items()
            },
            "per_service_rt_ms": {str(s): rt for s, rt in plan.per_service_rt.items()},
            "app_rt_ms": plan.app_rt,
        }
    return {
        "schema_version": SCHEMA_VERSION,
        "strategy": strategy,
        "alpha": alpha,
        "beta": beta,
        "plans": serialized,
    }


def plans_from_dict(data: Mapping[str, Any]) -> tuple[dict[int, PlacementPlan], str]:
    _check_version(data, "plans")
    plans: dict[int, PlacementPlan] = {}
    for request_id, body in data["plans"].items():
        assignment = {
            int(sid): (None if dev == INVALID_MARK else int(dev))
            for sid, dev in body["assignment"].items()
        }
        plans[int(request_id)] = PlacementPlan(
            assignment=assignment,
            per_service_rt={int(s): rt for s, rt in body["per_service_rt_ms"].items()},
            app_rt=body["app_rt_ms"],
        )
    return plans, data["strategy"]


def _check_version(data: Mapping[str, Any], kind: str) -> None:
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"{kind} document has schema_version {version!r}, expected {SCHEMA_VERSION}")
