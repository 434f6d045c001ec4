"""Deterministic synthesis of fog infrastructures, applications, and users.

Everything is a pure function of (config, seed): the topology is a
Barabási–Albert graph whose lowest-betweenness nodes act as gateways, a
high-capacity cloud node hangs off the most central device, applications
are growing-network DAGs, and each user periodically re-requests one
randomly chosen application.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import networkx as nx

from .model import Application, Device, Message, NetworkLink, Service, Topology, USER, User


class ConfigError(ValueError):
    """Invalid scenario configuration."""


#: Table of evaluation scales: (app templates, users, deadline mode).
PRESETS: dict[str, tuple[int, int, bool]] = {
    "SMALL": (10, 29, False),
    "MEDIUM": (20, 65, False),
    "LARGE": (30, 98, False),
    "D-SMALL": (10, 29, True),
    "D-MEDIUM": (20, 65, True),
    "D-LARGE": (30, 98, True),
}


@dataclass(frozen=True)
class ScenarioConfig:
    """Knobs for scenario synthesis; defaults mirror the evaluation setup."""

    device_count: int = 100
    gateway_count: int = 25
    ba_attachment: int = 2
    cores_range: tuple[int, int] = (10, 25)
    cpu_speed_range: tuple[float, float] = (20.0, 60.0)     # MI/s
    mem_range: tuple[float, float] = (10.0, 25.0)           # GB
    storage_range: tuple[float, float] = (10.0, 25.0)       # TB
    service_count_range: tuple[int, int] = (2, 10)
    deadline_range_ms: tuple[float, float] = (300.0, 50000.0)
    service_mem_range: tuple[float, float] = (1.0, 6.0)     # GB
    service_storage_range: tuple[float, float] = (1.0, 6.0)  # TB
    message_size_range_kb: tuple[float, float] = (1500.0, 4500.0)
    workload_range: tuple[float, float] = (20.0, 60.0)      # MI
    latency_ms: float = 5.0
    bandwidth_bytes_per_ms: float = 75000.0
    request_period_s: float = 1.557
    horizon_s: float = 2000.0
    cloud_factor: float = 10.0
    app_count: int = 10
    user_count: int = 29
    deadline_mode: bool = False
    scale: str | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.gateway_count >= self.device_count:
            raise ConfigError("gateway_count must be smaller than device_count")
        if self.device_count <= self.ba_attachment:
            raise ConfigError("device_count must exceed ba_attachment")
        if self.ba_attachment < 1:
            raise ConfigError("ba_attachment must be at least 1")
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
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ConfigError(f"{name}: min must not exceed max")
        if self.latency_ms < 0 or self.bandwidth_bytes_per_ms <= 0:
            raise ConfigError("network parameters out of range")
        if self.request_period_s <= 0 or self.horizon_s < 0:
            raise ConfigError("request period must be positive and horizon non-negative")
        if self.app_count < 1 or self.user_count < 1:
            raise ConfigError("app_count and user_count must be positive")

    def with_scale(self, scale: str) -> "ScenarioConfig":
        if scale not in PRESETS:
            raise ConfigError(f"unknown scale {scale!r}; expected one of {sorted(PRESETS)}")
        apps, users, deadline_mode = PRESETS[scale]
        return replace(
            self, scale=scale, app_count=apps, user_count=users, deadline_mode=deadline_mode
        )


@dataclass(frozen=True)
class AppRequest:
    """One user's choice of application template."""

    request_id: int
    user_id: int
    app_id: int


@dataclass
class Scenario:
    """A fully materialized, replayable evaluation scenario."""

    config: ScenarioConfig
    devices: list[Device]
    links: list[NetworkLink]
    gateways: tuple[int, ...]
    cloud_id: int
    apps: list[Application]
    users: list[User]
    requests: list[AppRequest]
    schedule: list[tuple[float, int]] = field(default_factory=list)

    def topology(self) -> Topology:
        """A topology over pristine copies of the scenario devices."""
        return Topology((d.fresh_copy() for d in self.devices), self.links)

    def users_by_id(self) -> dict[int, User]:
        return {u.id: u for u in self.users}

    def app_by_id(self) -> dict[int, Application]:
        return {a.id: a for a in self.apps}

    def instances(self) -> list[Application]:
        """Per-request application instances (instance id = request id)."""
        templates = self.app_by_id()
        out = []
        for req in self.requests:
            tpl = templates[req.app_id]
            out.append(
                Application(
                    id=req.request_id,
                    services=tpl.services,
                    messages=tpl.messages,
                    deadline=tpl.deadline,
                    user=req.user_id,
                )
            )
        return out


def _rng(seed: int, stream: str) -> random.Random:
    # string seeding hashes via SHA-512, stable across interpreter runs
    return random.Random(f"{seed}:{stream}")


def generate_topology(
    cfg: ScenarioConfig,
) -> tuple[list[Device], list[NetworkLink], tuple[int, ...], int]:
    """Preferential-attachment fog network with gateways and one cloud node.

    Betweenness centrality is computed exactly; the ``gateway_count``
    lowest-centrality devices become gateways (ties by id) and the cloud
    device attaches at the single most central node with capacities at the
    top of every range times ``cloud_factor``.
    """
    graph = nx.barabasi_albert_graph(
        cfg.device_count, cfg.ba_attachment, seed=_rng(cfg.seed, "topology")
    )
    centrality = nx.betweenness_centrality(graph)
    by_centrality = sorted(graph.nodes, key=lambda n: (centrality[n], n))
    gateways = tuple(sorted(by_centrality[: cfg.gateway_count]))
    hub = min(graph.nodes, key=lambda n: (-centrality[n], n))

    rng = _rng(cfg.seed, "resources")
    devices = []
    for node in sorted(graph.nodes):
        devices.append(
            Device(
                id=node,
                cores=rng.randint(*cfg.cores_range),
                cpu_speed=rng.uniform(*cfg.cpu_speed_range),
                mem=rng.uniform(*cfg.mem_range),
                storage=rng.uniform(*cfg.storage_range),
            )
        )
    cloud_id = cfg.device_count
    devices.append(
        Device(
            id=cloud_id,
            cores=int(cfg.cores_range[1] * cfg.cloud_factor),
            cpu_speed=cfg.cpu_speed_range[1] * cfg.cloud_factor,
            mem=cfg.mem_range[1] * cfg.cloud_factor,
            storage=cfg.storage_range[1] * cfg.cloud_factor,
        )
    )

    links = [
        NetworkLink(a, b, cfg.bandwidth_bytes_per_ms, cfg.latency_ms)
        for a, b in sorted(tuple(sorted(e)) for e in graph.edges)
    ]
    links.append(NetworkLink(hub, cloud_id, cfg.bandwidth_bytes_per_ms, cfg.latency_ms))
    return devices, links, gateways, cloud_id


def generate_applications(
    cfg: ScenarioConfig, count: int, rng: random.Random | None = None
) -> list[Application]:
    """Application templates: growing-network DAGs with sampled demands.

    Each new service attaches by one directed message edge from an earlier
    service, so every service is reachable from the entry service (id 0),
    which receives the single initial request message.
    """
    if count < 1:
        raise ConfigError("application count must be positive")
    rng = rng if rng is not None else _rng(cfg.seed, "apps")
    size_lo, size_hi = cfg.message_size_range_kb
    apps = []
    for app_id in range(count):
        n_services = rng.randint(*cfg.service_count_range)
        services = [
            Service(
                id=sid,
                workload=rng.uniform(*cfg.workload_range),
                mem_demand=rng.uniform(*cfg.service_mem_range),
                storage_demand=rng.uniform(*cfg.service_storage_range),
            )
            for sid in range(n_services)
        ]
        messages = [
            Message(source=USER, destination=0, size=rng.uniform(size_lo, size_hi) * 1000.0)
        ]
        if n_services > 1:
            tree = nx.gn_graph(n_services, seed=rng)
            # gn edges run new -> old; reverse them so requests flow outward
            for new, old in sorted(tree.edges):
                messages.append(
                    Message(
                        source=old,
                        destination=new,
                        size=rng.uniform(size_lo, size_hi) * 1000.0,
                    )
                )
        apps.append(
            Application(
                id=app_id,
                services=services,
                messages=messages,
                deadline=rng.uniform(*cfg.deadline_range_ms),
            )
        )
    return apps


def generate_users(
    cfg: ScenarioConfig,
    gateways: Sequence[int],
    app_count: int | None = None,
    rng: random.Random | None = None,
) -> tuple[list[User], list[AppRequest], list[tuple[float, int]]]:
    """Users pinned to random gateways, each requesting one random application.

    In deadline mode every request repeats with the configured period until
    the horizon; otherwise each request fires once at t=0.
    """
    if not gateways:
        raise ConfigError("cannot attach users without gateways")
    rng = rng if rng is not None else _rng(cfg.seed, "users")
    app_count = app_count if app_count is not None else cfg.app_count
    ordered_gateways = sorted(gateways)
    users = []
    requests = []
    for uid in range(cfg.user_count):
        users.append(User(id=uid, gateway=rng.choice(ordered_gateways)))
        requests.append(AppRequest(request_id=uid, user_id=uid, app_id=rng.randrange(app_count)))

    schedule: list[tuple[float, int]] = []
    if cfg.deadline_mode:
        ticks = int(math.floor(cfg.horizon_s / cfg.request_period_s))
        for k in range(1, ticks + 1):
            t = k * cfg.request_period_s
            for req in requests:
                schedule.append((t, req.request_id))
    else:
        for req in requests:
            schedule.append((0.0, req.request_id))
    return users, requests, schedule


def generate_scenario(cfg: ScenarioConfig) -> Scenario:
    """Full scenario bundle from one config and seed."""
    devices, links, gateways, cloud_id = generate_topology(cfg)
    apps = generate_applications(cfg, cfg.app_count)
    users, requests, schedule = generate_users(cfg, gateways)
    return Scenario(
        config=cfg,
        devices=devices,
        links=links,
        gateways=gateways,
        cloud_id=cloud_id,
        apps=apps,
        users=users,
        requests=requests,
        schedule=schedule,
    )
