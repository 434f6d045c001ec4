"""Modularity maximization over fog layers: Louvain, compression, feature clusters.

The quality score Q of a partition compares intra-partition edge weight to
its expectation under a strength-preserving null model. All sums here are
over ordered node pairs, so each undirected edge is counted twice and the
normalizer is 2W (W = total undirected edge weight). Aggregated super-nodes
carry their internal ordered-pair mass as a self-loop so that the score of
a partition is identical before and after aggregation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Hashable, Iterable, Mapping, Sequence

from .model import Device
from .multilayer import Layer, LayerView, MultilayerGraph, RESOURCE_LAYERS, layer_view

#: Minimum improvement treated as a strictly positive modularity gain.
GAIN_EPS = 1e-12


class EmptyPartitionError(ValueError):
    pass


@dataclass(frozen=True)
class PartitionSet:
    """Disjoint device clusters of one layer, with the partition's modularity."""

    layer: Layer
    assignment: Mapping[int, int]
    partitions: Mapping[int, frozenset[int]]
    modularity: float

    def partition_of(self, device_id: int) -> int:
        return self.assignment[device_id]


@dataclass(frozen=True)
class FeatureTriplet:
    """Per-partition averages of CPU speed (MI/s), memory (GB), storage (TB)."""

    avg_cpu: float
    avg_mem: float
    avg_storage: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.avg_cpu, self.avg_mem, self.avg_storage)

    def distance(self, other: "FeatureTriplet") -> float:
        return math.dist(self.as_tuple(), other.as_tuple())


#: A compressed-graph node: (resource layer, partition id within that layer).
CompressedNode = tuple[Layer, int]


@dataclass(frozen=True)
class CompressedGraph:
    """Resource-layer partitions as nodes, linked when they share a device."""

    nodes: tuple[CompressedNode, ...]
    edges: tuple[tuple[CompressedNode, CompressedNode], ...]
    members: Mapping[CompressedNode, frozenset[int]]
    features: Mapping[CompressedNode, FeatureTriplet]


@dataclass(frozen=True)
class FeaturePartitionSet:
    """Disjoint clusters of layer partitions with similar average resources."""

    feature_partitions: Mapping[int, frozenset[CompressedNode]]
    device_index: Mapping[int, frozenset[int]]
    modularity: float

    def ids(self) -> tuple[int, ...]:
        return tuple(sorted(self.feature_partitions))


# ---------------------------------------------------------------------------
# Louvain core on contiguous integer nodes.
#
# adj[i] maps neighbor -> weight (symmetric, no self entries); loops[i] is
# the node's ordered-pair internal mass (zero on raw graphs, 2x the merged
# undirected intra weight after aggregation).
# ---------------------------------------------------------------------------


def _strengths(adj: Sequence[Mapping[int, float]], loops: Sequence[float]) -> list[float]:
    return [sum(adj[i].values()) + loops[i] for i in range(len(adj))]


def _modularity_raw(
    adj: Sequence[Mapping[int, float]],
    loops: Sequence[float],
    comm: Sequence[int],
) -> float:
    strength = _strengths(adj, loops)
    two_w = sum(strength)
    if two_w <= 0.0:
        return 0.0
    sig_in: dict[int, float] = {}
    sig_tot: dict[int, float] = {}
    for i, c in enumerate(comm):
        sig_tot[c] = sig_tot.get(c, 0.0) + strength[i]
        sig_in[c] = sig_in.get(c, 0.0) + loops[i]
    for i in range(len(adj)):
        ci = comm[i]
        for j, w in adj[i].items():
            if comm[j] == ci:
                sig_in[ci] += w
    return sum(sig_in[c] - sig_tot[c] ** 2 / two_w for c in sig_tot) / two_w


def _move_gain(k_in: float, node_strength: float, comm_strength: float, w: float) -> float:
    """Modularity delta of pulling an isolated node into a community.

    ``k_in`` is the node's undirected weight into the community,
    ``comm_strength`` the community's total strength without the node,
    ``w`` the undirected total weight of the graph.
    """
    return k_in / w - comm_strength * node_strength / (2.0 * w * w)


def _phase1(
    adj: Sequence[Mapping[int, float]],
    loops: Sequence[float],
) -> tuple[list[int], bool]:
    """Sequential local moves from singletons; returns (community labels, moved?).

    Nodes are swept in ascending index order until a full sweep makes no
    move. A node changes community only for a strictly positive gain over
    staying put; ties keep the current community.
    """
    n = len(adj)
    strength = _strengths(adj, loops)
    comm = list(range(n))
    two_w = sum(strength)
    if two_w <= 0.0:
        return comm, False
    w = two_w / 2.0
    comm_strength = list(strength)
    improved = False
    moved = True
    while moved:
        moved = False
        for i in range(n):
            ci = comm[i]
            comm_strength[ci] -= strength[i]
            links: dict[int, float] = {}
            for j, wij in adj[i].items():
                cj = comm[j]
                links[cj] = links.get(cj, 0.0) + wij
            best_c = ci
            best_gain = _move_gain(links.get(ci, 0.0), strength[i], comm_strength[ci], w)
            for c in sorted(links):
                if c == ci:
                    continue
                gain = _move_gain(links[c], strength[i], comm_strength[c], w)
                if gain > best_gain + GAIN_EPS:
                    best_c, best_gain = c, gain
            comm[i] = best_c
            comm_strength[best_c] += strength[i]
            if best_c != ci:
                moved = True
                improved = True
    return comm, improved


def _aggregate(
    adj: Sequence[Mapping[int, float]],
    loops: Sequence[float],
    comm: Sequence[int],
) -> tuple[list[dict[int, float]], list[float], dict[int, int]]:
    """Collapse communities into super-nodes, preserving ordered-pair mass."""
    labels = sorted(set(comm))
    remap = {lab: idx for idx, lab in enumerate(labels)}
    k = len(labels)
    new_adj: list[dict[int, float]] = [dict() for _ in range(k)]
    new_loops = [0.0] * k
    for i in range(len(adj)):
        ci = remap[comm[i]]
        new_loops[ci] += loops[i]
        for j, wij in adj[i].items():
            cj = remap[comm[j]]
            if ci == cj:
                # ordered pair (i, j); the mirrored (j, i) pair adds the rest
                new_loops[ci] += wij
            else:
                new_adj[ci][cj] = new_adj[ci].get(cj, 0.0) + wij
    return new_adj, new_loops, remap


def _louvain(
    node_ids: Sequence[Hashable],
    adjacency: Mapping[Hashable, Mapping[Hashable, float]],
) -> tuple[list[frozenset[Hashable]], float]:
    """Two-phase Louvain; returns the best partition seen and its modularity.

    Each iterative step runs the local-move phase and then aggregates the
    communities into a new network; the loop stops at the first step that
    fails to improve modularity.
    """
    ordered = sorted(node_ids)
    index = {nid: k for k, nid in enumerate(ordered)}
    adj: list[dict[int, float]] = [
        {index[j]: w for j, w in sorted(adjacency.get(nid, {}).items(), key=lambda kv: index[kv[0]])}
        for nid in ordered
    ]
    loops = [0.0] * len(ordered)
    groups: list[frozenset[Hashable]] = [frozenset([nid]) for nid in ordered]

    best_parts = list(groups)
    best_q = _modularity_raw(adj, loops, list(range(len(adj))))
    while True:
        comm, moved = _phase1(adj, loops)
        if not moved:
            break
        q = _modularity_raw(adj, loops, comm)
        adj, loops, remap = _aggregate(adj, loops, comm)
        merged: list[set[Hashable]] = [set() for _ in range(len(remap))]
        for i, c in enumerate(comm):
            merged[remap[c]].update(groups[i])
        groups = [frozenset(g) for g in merged]
        if q > best_q + GAIN_EPS:
            best_parts = list(groups)
            best_q = q
        else:
            break
    return best_parts, best_q


def _label_partitions(parts: Iterable[frozenset]) -> list[frozenset]:
    """Deterministic partition ids: ascending by smallest member."""
    return sorted(parts, key=lambda p: min(p))


# ---------------------------------------------------------------------------
# Public operations.
# ---------------------------------------------------------------------------


def modularity(view: LayerView, assignment: Mapping[int, int]) -> float:
    """Single-layer modularity of a device-to-partition assignment.

    An edgeless view scores 0 by convention. The all-in-one partition scores
    exactly 0 on any view; values always lie in [-1, 1].
    """
    missing = [n for n in view.nodes if n not in assignment]
    if missing:
        raise ValueError(f"assignment misses nodes {missing[:5]}")
    ordered = sorted(view.nodes)
    index = {nid: k for k, nid in enumerate(ordered)}
    adj = [{index[j]: w for j, w in view.adjacency[nid].items()} for nid in ordered]
    loops = [0.0] * len(ordered)
    comm = [assignment[nid] for nid in ordered]
    return _modularity_raw(adj, loops, comm)


def louvain_partition(view: LayerView, seed: int = 0) -> PartitionSet:
    """Two-phase Louvain partitioning of one layer.

    The sweep order is fixed (ascending device id), which makes the result
    deterministic; ``seed`` is kept for interface stability and does not
    currently alter the search.
    """
    del seed
    if not view.nodes:
        raise ValueError("cannot partition an empty layer view")
    parts, q = _louvain(view.nodes, view.adjacency)
    partitions: dict[int, frozenset[int]] = {}
    assignment: dict[int, int] = {}
    for pid, members in enumerate(_label_partitions(parts)):
        partitions[pid] = members
        for dev in members:
            assignment[dev] = pid
    return PartitionSet(view.layer, assignment, partitions, q)


def partition_feature(devices: Iterable[Device]) -> FeatureTriplet:
    """Componentwise arithmetic mean of the member devices' resource triplets."""
    devs = list(devices)
    if not devs:
        raise EmptyPartitionError("cannot compute the feature of an empty partition")
    n = len(devs)
    return FeatureTriplet(
        avg_cpu=sum(d.cpu_speed for d in devs) / n,
        avg_mem=sum(d.mem for d in devs) / n,
        avg_storage=sum(d.storage for d in devs) / n,
    )


def compress_graph(
    partition_sets: Sequence[PartitionSet],
    devices: Mapping[int, Device] | Sequence[Device],
) -> CompressedGraph:
    """Merge resource-layer partitions into nodes linked by shared devices.

    Because inter-layer edges connect replicas of the same device, two
    partitions from different layers are adjacent iff they share at least
    one device. Nodes from the same layer are never adjacent and there are
    no self-edges.
    """
    if not partition_sets:
        raise ValueError("need at least one partition set to compress")
    by_id: Mapping[int, Device]
    if isinstance(devices, Mapping):
        by_id = devices
    else:
        by_id = {d.id: d for d in devices}

    nodes: list[CompressedNode] = []
    members: dict[CompressedNode, frozenset[int]] = {}
    for ps in partition_sets:
        for pid, devs in sorted(ps.partitions.items()):
            node = (ps.layer, pid)
            nodes.append(node)
            members[node] = devs

    edges: set[tuple[CompressedNode, CompressedNode]] = set()
    for ps_a, ps_b in combinations(partition_sets, 2):
        for dev in ps_a.assignment:
            if dev not in ps_b.assignment:
                continue
            node_a = (ps_a.layer, ps_a.assignment[dev])
            node_b = (ps_b.layer, ps_b.assignment[dev])
            edges.add((node_a, node_b) if node_a < node_b else (node_b, node_a))

    features = {node: partition_feature(by_id[d] for d in devs) for node, devs in members.items()}
    return CompressedGraph(
        nodes=tuple(sorted(nodes)),
        edges=tuple(sorted(edges)),
        members=members,
        features=features,
    )


def feature_partition(
    cg: CompressedGraph,
    seed: int = 0,
    unit_weights: bool = False,
) -> FeaturePartitionSet:
    """Louvain over the compressed graph, weighted by feature similarity.

    Edge weights default to 1 / (1 + euclidean feature distance) so that
    clusters group layer partitions with similar average resources; unit
    weights are available for sensitivity checks.
    """
    del seed
    if not cg.nodes:
        raise ValueError("cannot feature-partition an empty compressed graph")
    adjacency: dict[CompressedNode, dict[CompressedNode, float]] = {n: {} for n in cg.nodes}
    for a, b in cg.edges:
        w = 1.0 if unit_weights else 1.0 / (1.0 + cg.features[a].distance(cg.features[b]))
        adjacency[a][b] = w
        adjacency[b][a] = w
    parts, q = _louvain(cg.nodes, adjacency)
    feature_partitions: dict[int, frozenset[CompressedNode]] = {}
    device_index: dict[int, frozenset[int]] = {}
    for fp_id, nodes in enumerate(_label_partitions(parts)):
        feature_partitions[fp_id] = nodes
        devs: set[int] = set()
        for node in nodes:
            devs.update(cg.members[node])
        device_index[fp_id] = frozenset(devs)
    return FeaturePartitionSet(feature_partitions, device_index, q)


def multilayer_modularity(
    graph: MultilayerGraph,
    assignments: Mapping[Layer, Mapping[int, int]],
    replica_groups: Mapping[tuple[Layer, int], Hashable] | None = None,
) -> float:
    """Full multilayer modularity: per-layer terms plus inter-layer coupling.

    The intra term of each layer is normalized by that layer's own ordered
    weight; the whole sum is normalized by the ordered weight across all
    layers. A device's replicas in two layers count as co-partitioned iff
    ``replica_groups`` maps their (layer, partition) pairs to equal keys;
    with the default None, replicas never couple, so a graph whose edges
    live in a single layer reduces exactly to the single-layer score.
    """
    views = {layer: layer_view(graph, layer) for layer in graph.layers}
    layer_two_w = {layer: 2.0 * views[layer].total_weight() for layer in graph.layers}
    two_w = sum(layer_two_w.values())
    if two_w <= 0.0:
        return 0.0

    total = 0.0
    for layer in graph.layers:
        if layer_two_w[layer] <= 0.0:
            continue
        view = views[layer]
        assignment = assignments[layer]
        strength = {i: sum(view.adjacency[i].values()) for i in view.nodes}
        sig_in: dict[int, float] = {}
        sig_tot: dict[int, float] = {}
        for i in view.nodes:
            c = assignment[i]
            sig_tot[c] = sig_tot.get(c, 0.0) + strength[i]
            sig_in[c] = sig_in.get(c, 0.0)
        for i in view.nodes:
            ci = assignment[i]
            for j, w in view.adjacency[i].items():
                if assignment[j] == ci:
                    sig_in[ci] += w
        total += sum(sig_in[c] - sig_tot[c] ** 2 / layer_two_w[layer] for c in sig_tot)

    if replica_groups is not None:
        for dev, la, lb in graph.inter_edges:
            ga = replica_groups.get((la, assignments[la][dev]))
            gb = replica_groups.get((lb, assignments[lb][dev]))
            if ga is not None and ga == gb:
                # one inter-layer edge per unordered pair; both ordered
                # directions contribute
                total += 2.0
    return total / two_w


def multilayer_resource_partition(
    graph: MultilayerGraph,
    seed: int = 0,
    unit_weights: bool = False,
) -> tuple[FeaturePartitionSet, PartitionSet, dict[Layer, PartitionSet], CompressedGraph]:
    """End-to-end partitioning pipeline.

    Partitions all four layers independently, compresses the resource
    layers, computes per-partition feature triplets, and clusters the
    compressed graph. Returns (feature partitions, network partitions,
    per-resource-layer partitions, compressed graph); the trailing two are
    exposed for reporting and diagnostics.
    """
    network = louvain_partition(layer_view(graph, Layer.NETWORK), seed)
    layer_sets: dict[Layer, PartitionSet] = {}
    for layer in RESOURCE_LAYERS:
        layer_sets[layer] = louvain_partition(layer_view(graph, layer), seed)
    cg = compress_graph(
        [layer_sets[layer] for layer in RESOURCE_LAYERS],
        {d.id: d for d in graph.devices},
    )
    fps = feature_partition(cg, seed, unit_weights=unit_weights)
    return fps, network, layer_sets, cg
