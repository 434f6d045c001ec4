"""Multilayer resource-aware partitioning and service placement for fog infrastructures."""

from .model import (
    Application,
    Device,
    Message,
    NetworkLink,
    PlacementPlan,
    Service,
    Topology,
    USER,
    User,
    deadline_satisfied,
    execution_time,
    placement_valid,
    response_times,
    transmission_time,
)
from .multilayer import Layer, LayerView, MultilayerGraph, build_multilayer, layer_view, similarity_weight
from .partitioner import (
    CompressedGraph,
    FeaturePartitionSet,
    FeatureTriplet,
    PartitionSet,
    compress_graph,
    feature_partition,
    louvain_partition,
    modularity,
    multilayer_modularity,
    multilayer_resource_partition,
    partition_feature,
)
from .placement import (
    FitnessConfig,
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
from .scenario import (
    AppRequest,
    Scenario,
    ScenarioConfig,
    generate_applications,
    generate_scenario,
    generate_topology,
    generate_users,
)

__version__ = "0.1.0"
