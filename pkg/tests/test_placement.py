"""Fitness, feature-partition selection, service placement, and baselines."""

from __future__ import annotations

import math
import random

import pytest

from fogpart.model import (
    Application,
    Device,
    Message,
    NetworkLink,
    Service,
    Topology,
    USER,
    User,
    placement_valid,
)
from fogpart.multilayer import Layer
from fogpart.partitioner import (
    CompressedGraph,
    FeaturePartitionSet,
    FeatureTriplet,
    PartitionSet,
)
from fogpart.placement import (
    CommitRecord,
    FitnessConfig,
    OverCommitError,
    PlacementContext,
    baseline_connectivity_greedy,
    baseline_first_fit,
    commit_placement,
    demand_similarity,
    fitness,
    place_service,
    rollback_placement,
    run_placement,
    select_feature_partitions,
    sort_applications,
)

RANGES = {"cpu": (20.0, 60.0), "mem": (1.0, 25.0), "storage": (1.0, 25.0)}


class TestDemandSimilarity:
    def test_identical_triplets_score_one(self):
        f = FeatureTriplet(30.0, 5.0, 5.0)
        s = Service(0, 30.0, 5.0, 5.0)
        assert demand_similarity(f, s, RANGES) == pytest.approx(1.0)

    def test_opposite_extremes_score_zero(self):
        f = FeatureTriplet(20.0, 1.0, 1.0)
        s = Service(0, 60.0, 25.0, 25.0)
        assert demand_similarity(f, s, RANGES) == pytest.approx(0.0, abs=1e-12)

    def test_one_dimension_spread(self):
        f = FeatureTriplet(20.0, 5.0, 5.0)
        s = Service(0, 60.0, 5.0, 5.0)
        assert demand_similarity(f, s, RANGES) == pytest.approx(1.0 - 1.0 / math.sqrt(3.0))

    def test_degenerate_dimension_skipped(self):
        ranges = {"cpu": (30.0, 30.0), "mem": (1.0, 25.0), "storage": (1.0, 25.0)}
        f = FeatureTriplet(30.0, 5.0, 5.0)
        s = Service(0, 55.0, 5.0, 5.0)
        assert demand_similarity(f, s, ranges) == pytest.approx(1.0)


def line_context(core_counts=(10, 10, 10, 10), alpha=0.5, beta=0.5):
    """Chain 0-1-2-3 with gateway 0; partitions {0,1} and {2,3} in every layer."""
    devices = {
        i: Device(i, core_counts[i], 20.0 + 10.0 * i, 100.0, 100.0) for i in range(4)
    }
    links = [NetworkLink(i, i + 1, 75000.0, 5.0) for i in range(3)]
    topology = Topology(devices.values(), links)
    network = PartitionSet(
        Layer.NETWORK,
        {0: 0, 1: 0, 2: 1, 3: 1},
        {0: frozenset({0, 1}), 1: frozenset({2, 3})},
        0.0,
    )
    members = {
        (Layer.CPU, 0): frozenset({0, 1}),
        (Layer.CPU, 1): frozenset({2, 3}),
        (Layer.MEM, 0): frozenset({0, 1}),
        (Layer.MEM, 1): frozenset({2, 3}),
    }
    features = {
        node: FeatureTriplet(
            sum(devices[d].cpu_speed for d in devs) / len(devs),
            sum(devices[d].mem for d in devs) / len(devs),
            sum(devices[d].storage for d in devs) / len(devs),
        )
        for node, devs in members.items()
    }
    compressed = CompressedGraph(
        nodes=tuple(sorted(members)),
        edges=(
            ((Layer.CPU, 0), (Layer.MEM, 0)),
            ((Layer.CPU, 1), (Layer.MEM, 1)),
        ),
        members=members,
        features=features,
    )
    fps = FeaturePartitionSet(
        feature_partitions={
            0: frozenset({(Layer.CPU, 0), (Layer.MEM, 0)}),
            1: frozenset({(Layer.CPU, 1), (Layer.MEM, 1)}),
        },
        device_index={0: frozenset({0, 1}), 1: frozenset({2, 3})},
        modularity=0.0,
    )
    users = {0: User(0, gateway=0)}
    config = FitnessConfig(alpha=alpha, beta=beta, normalization_ranges=RANGES)
    return PlacementContext(devices, topology, fps, compressed, network, users, config)


def app_of(services, deadline=50000.0, size=1_500_000.0, app_id=0):
    messages = [Message(USER, services[0].id, size)]
    for a, b in zip(services, services[1:]):
        messages.append(Message(a.id, b.id, size))
    return Application(app_id, services, messages, deadline, user=0)


class TestFitness:
    def test_perfect_similarity_and_colocation(self):
        ctx = line_context()
        # service demand equal to FP0's feature; the gateway itself hosts it
        feature = ctx.compressed.features[(Layer.CPU, 0)]
        s = Service(0, feature.avg_cpu, feature.avg_mem, feature.avg_storage)
        ranges = {
            "cpu": (feature.avg_cpu, 60.0),
            "mem": (feature.avg_mem, 200.0),
            "storage": (feature.avg_storage, 200.0),
        }
        cfg = FitnessConfig(0.5, 0.5, ranges)
        ctx.config = cfg
        value = fitness(0, s, ctx.users[0], cfg, ctx, message_size=1.0)
        assert value == pytest.approx(1.0)

    def test_twenty_five_ms_proximity_term(self):
        ctx = line_context()
        feature = ctx.compressed.features[(Layer.CPU, 1)]
        s = Service(0, feature.avg_cpu, feature.avg_mem, feature.avg_storage)
        ranges = {
            "cpu": (20.0, max(60.0, feature.avg_cpu)),
            "mem": (1.0, 200.0),
            "storage": (1.0, 200.0),
        }
        cfg = FitnessConfig(0.5, 0.5, ranges)
        ctx.config = cfg
        # nearest FP1 device is two hops away; use a size that makes T = 25 ms per hop
        value = fitness(1, s, ctx.users[0], cfg, ctx, message_size=1_500_000.0)
        assert value == pytest.approx(0.5 + 0.5 / 51.0)

    def test_one_hop_proximity_value(self):
        # perfect similarity with the nearest partition device one hop away:
        # 0.5 * 1 + 0.5 / (1 + 25 ms) = 0.5 + 0.5/26
        ctx = line_context()
        feature = ctx.compressed.features[(Layer.CPU, 0)]
        s = Service(0, feature.avg_cpu, feature.avg_mem, feature.avg_storage)
        ctx.fps = FeaturePartitionSet(
            feature_partitions=ctx.fps.feature_partitions,
            device_index={0: frozenset({1}), 1: frozenset({2, 3})},
            modularity=0.0,
        )
        cfg = FitnessConfig(0.5, 0.5, {"cpu": (20.0, 60.0), "mem": (1.0, 200.0), "storage": (1.0, 200.0)})
        ctx.config = cfg
        value = fitness(0, s, ctx.users[0], cfg, ctx, message_size=1_500_000.0)
        assert value == pytest.approx(0.5 + 0.5 / 26.0)

    def test_alpha_only_reduces_to_similarity(self):
        ctx = line_context()
        cfg = FitnessConfig(1.0, 0.0, RANGES)
        ctx.config = cfg
        s = Service(0, 25.0, 5.0, 5.0)
        sims = [
            demand_similarity(ctx.compressed.features[node], s, RANGES)
            for node in ctx.fps.feature_partitions[0]
        ]
        assert fitness(0, s, ctx.users[0], cfg, ctx, 1.0) == pytest.approx(max(sims))

    def test_unreachable_partition_flagged(self):
        ctx = line_context()
        for did in (2, 3):
            ctx.devices[did].alive = False
        value = fitness(1, Service(0, 25.0, 5.0, 5.0), ctx.users[0], ctx.config, ctx, 1.0)
        assert 1 in ctx.unreachable_fps
        assert value <= ctx.config.alpha


class TestSortApplications:
    def test_deadline_then_id(self):
        apps = [
            app_of([Service(0, 1, 1, 1)], deadline=500.0, app_id=1),
            app_of([Service(0, 1, 1, 1)], deadline=300.0, app_id=2),
            app_of([Service(0, 1, 1, 1)], deadline=300.0, app_id=3),
        ]
        assert [a.id for a in sort_applications(apps)] == [2, 3, 1]

    def test_single_app(self):
        apps = [app_of([Service(0, 1, 1, 1)], app_id=9)]
        assert [a.id for a in sort_applications(apps)] == [9]

    def test_sorted_input_unchanged(self):
        apps = [
            app_of([Service(0, 1, 1, 1)], deadline=100.0 + i, app_id=i) for i in range(4)
        ]
        assert [a.id for a in sort_applications(apps)] == [0, 1, 2, 3]


class TestCommitRollback:
    def test_commit_then_rollback_is_exact(self):
        d = Device(0, 10, 20.0, 10.0, 10.0)
        s = Service(0, 20.0, 3.3, 2.7)
        before = (d.residual_cores, d.residual_mem, d.residual_storage)
        record = commit_placement(d, s)
        rollback_placement(d, record)
        assert (d.residual_cores, d.residual_mem, d.residual_storage) == before

    def test_two_commits_accumulate(self):
        d = Device(0, 10, 20.0, 10.0, 10.0)
        s = Service(0, 20.0, 1.0, 1.0)
        commit_placement(d, s)
        commit_placement(d, s)
        assert d.residual_mem == 8.0
        assert d.residual_cores == 8

    def test_dead_device_over_commit(self):
        d = Device(0, 10, 20.0, 10.0, 10.0)
        d.alive = False
        with pytest.raises(OverCommitError):
            commit_placement(d, Service(0, 1.0, 1.0, 1.0))

    def test_exhausted_memory_over_commit(self):
        d = Device(0, 10, 20.0, 10.0, 10.0)
        with pytest.raises(OverCommitError):
            commit_placement(d, Service(0, 1.0, 11.0, 1.0))


class TestPlaceService:
    def test_first_service_defines_anchor(self):
        ctx = line_context()
        app = app_of([Service(0, 20.0, 1.0, 1.0)])
        plan = select_feature_partitions(app, ctx)
        host = plan.assignment[0]
        assert host == 0  # the gateway is nearest and feasible
        assert ctx.network_partition_of(host) == 0

    def test_foreign_partition_skipped_even_if_feasible(self):
        ctx = line_context()
        s = Service(0, 20.0, 1.0, 1.0)
        rank = [1, 0]  # FP1 (devices 2,3) ranked first on purpose
        d_matrix = {1: [2, 3], 0: [0, 1]}
        chosen = place_service(ctx, rank, d_matrix, s, 50000.0, anchor=0)
        assert chosen in (0, 1)

    def test_anchor_exhaustion_yields_invalid(self):
        ctx = line_context(core_counts=(1, 1, 10, 10))
        s = Service(0, 20.0, 1.0, 1.0)
        ctx.devices[0].residual_cores = 0
        ctx.devices[1].residual_cores = 0
        rank = [0, 1]
        d_matrix = {0: [0, 1], 1: [2, 3]}
        assert place_service(ctx, rank, d_matrix, s, 50000.0, anchor=0) is None


class TestSelectFeaturePartitions:
    def test_ample_capacity_keeps_app_near_gateway(self):
        ctx = line_context()
        app = app_of([Service(i, 20.0, 1.0, 1.0) for i in range(3)])
        plan = select_feature_partitions(app, ctx)
        assert plan.fully_placed
        partitions = {ctx.network_partition_of(d) for d in plan.assignment.values()}
        assert partitions == {0}
        assert plan.app_rt is not None

    def test_oversized_service_invalid(self):
        ctx = line_context()
        app = app_of(
            [Service(0, 20.0, 1.0, 1.0), Service(1, 20.0, 1000.0, 1.0)]
        )
        plan = select_feature_partitions(app, ctx)
        assert plan.assignment[0] is not None
        assert plan.assignment[1] is None
        assert plan.app_rt is None

    def test_core_exhaustion_spills_within_partition(self):
        ctx = line_context(core_counts=(1, 10, 10, 10))
        app = app_of([Service(0, 20.0, 1.0, 1.0), Service(1, 20.0, 1.0, 1.0)])
        plan = select_feature_partitions(app, ctx)
        assert plan.assignment[0] == 0
        assert plan.assignment[1] == 1  # same network partition, different device
        assert ctx.network_partition_of(plan.assignment[1]) == 0

    def test_rank_is_permutation_of_all_fps(self):
        ctx = line_context()
        s = Service(0, 25.0, 5.0, 5.0)
        rank = ctx.rank_feature_partitions(s, ctx.users[0], 1.0)
        assert sorted(rank) == [0, 1]


def toy_scenario_inputs():
    """Four devices, one user at gateway 0, two small apps."""
    devices = [Device(i, 3, 20.0 + 10 * i, 6.0, 6.0) for i in range(4)]
    links = [NetworkLink(i, i + 1, 75000.0, 5.0) for i in range(3)]
    users = {0: User(0, gateway=0), 1: User(1, gateway=0)}
    apps = [
        app_of([Service(0, 20.0, 2.0, 2.0), Service(1, 20.0, 2.0, 2.0)], app_id=0),
        app_of([Service(0, 20.0, 2.0, 2.0)], app_id=1),
    ]
    apps[1].user = 1
    return devices, links, users, apps


class TestBaselines:
    def test_first_fit_stacks_until_cores_run_out(self):
        devices = {0: Device(0, 2, 20.0, 100.0, 100.0), 1: Device(1, 10, 20.0, 100.0, 100.0)}
        app = app_of([Service(i, 20.0, 1.0, 1.0) for i in range(3)])
        plan = baseline_first_fit(app, devices)
        assert [plan.assignment[i] for i in range(3)] == [0, 0, 1]

    def test_first_fit_infeasible_service_invalid(self):
        devices = {0: Device(0, 2, 20.0, 5.0, 5.0)}
        app = app_of([Service(0, 20.0, 50.0, 1.0)])
        plan = baseline_first_fit(app, devices)
        assert plan.assignment[0] is None

    def test_connectivity_greedy_stays_in_one_partition(self):
        devices = {i: Device(i, 10, 20.0, 100.0, 100.0) for i in range(4)}
        network = PartitionSet(
            Layer.NETWORK,
            {0: 0, 1: 0, 2: 1, 3: 1},
            {0: frozenset({0, 1}), 1: frozenset({2, 3})},
            0.0,
        )
        app = app_of([Service(i, 20.0, 1.0, 1.0) for i in range(4)])
        plan = baseline_connectivity_greedy(app, network, devices)
        partitions = {network.assignment[d] for d in plan.assignment.values()}
        assert len(partitions) == 1

    def test_multilayer_at_least_as_good_as_first_fit_on_fixture(self):
        devices, links, users, apps = toy_scenario_inputs()
        network = PartitionSet(
            Layer.NETWORK,
            {0: 0, 1: 0, 2: 1, 3: 1},
            {0: frozenset({0, 1}), 1: frozenset({2, 3})},
            0.0,
        )
        ctx = line_context()
        run_ml = run_placement(
            apps,
            devices,
            links,
            users,
            "multilayer",
            feature_partitions=ctx.fps,
            compressed=ctx.compressed,
            network=network,
        )
        run_ff = run_placement(apps, devices, links, users, "first_fit")
        placed_ml = sum(len(p.placed_services()) for p in run_ml.plans.values())
        placed_ff = sum(len(p.placed_services()) for p in run_ff.plans.values())
        assert placed_ml >= placed_ff


class TestRunPlacementInvariants:
    def run_multilayer(self, seed=0):
        rng = random.Random(seed)
        devices = [
            Device(i, rng.randint(2, 4), rng.uniform(20, 60), rng.uniform(5, 10), rng.uniform(5, 10))
            for i in range(8)
        ]
        links = [NetworkLink(rng.randrange(i), i, 75000.0, 5.0) for i in range(1, 8)]
        users = {u: User(u, gateway=rng.randrange(8)) for u in range(4)}
        apps = []
        for a in range(6):
            services = [
                Service(i, rng.uniform(20, 60), rng.uniform(1, 4), rng.uniform(1, 4))
                for i in range(rng.randint(1, 4))
            ]
            app = app_of(services, deadline=rng.uniform(300, 50000), app_id=a)
            app.user = rng.randrange(4)
            apps.append(app)
        from fogpart.multilayer import build_multilayer
        from fogpart.partitioner import multilayer_resource_partition

        graph = build_multilayer([d.fresh_copy() for d in devices], links)
        fps, network, _, cg = multilayer_resource_partition(graph)
        run = run_placement(
            apps, devices, links, users, "multilayer",
            feature_partitions=fps, compressed=cg, network=network,
        )
        return run, network, devices

    def test_audit_replays_placement_valid(self):
        run, _, _ = self.run_multilayer()
        for record in run.audit:
            snapshot = Device(
                record.device_id,
                cores=max(record.pre_cores, 1),
                cpu_speed=run.devices[record.device_id].cpu_speed,
                mem=run.devices[record.device_id].mem,
                storage=run.devices[record.device_id].storage,
                residual_cores=record.pre_cores,
                residual_mem=record.pre_mem,
                residual_storage=record.pre_storage,
            )
            assert placement_valid(record.service, snapshot, record.deadline_ms)

    def test_residuals_non_negative_and_conserved(self):
        run, _, originals = self.run_multilayer()
        committed: dict[int, list] = {}
        for record in run.audit:
            committed.setdefault(record.device_id, []).append(record.service)
        for d in originals:
            dev = run.devices[d.id]
            assert dev.residual_cores >= 0
            assert dev.residual_mem >= -1e-12
            assert dev.residual_storage >= -1e-12
            services = committed.get(d.id, [])
            assert dev.residual_cores == d.cores - len(services)
            assert dev.residual_mem == pytest.approx(
                d.mem - sum(s.mem_demand for s in services)
            )

    def test_app_confined_to_one_network_partition(self):
        run, network, _ = self.run_multilayer()
        for plan in run.plans.values():
            partitions = {
                network.assignment[d] for d in plan.assignment.values() if d is not None
            }
            assert len(partitions) <= 1

    def test_deterministic(self):
        a, _, _ = self.run_multilayer(seed=5)
        b, _, _ = self.run_multilayer(seed=5)
        assert {k: p.assignment for k, p in a.plans.items()} == {
            k: p.assignment for k, p in b.plans.items()
        }
