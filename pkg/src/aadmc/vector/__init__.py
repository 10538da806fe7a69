from .graph import (
    VGraph, VNode, VState, Counters, GraphContractError, ReverseResult,
    vforward_sweep, vreverse_sweep, vreverse_with_mean, vgradient, output_values,
)
from .schedule import LayerSchedule, layer_schedule, vreverse_layered, tree_sum, aggregation_layers
from .groups import GroupSpec, group_sensitivity_variance

__all__ = [
    "VGraph", "VNode", "VState", "Counters", "GraphContractError", "ReverseResult",
    "vforward_sweep", "vreverse_sweep", "vreverse_with_mean", "vgradient", "output_values",
    "LayerSchedule", "layer_schedule", "vreverse_layered", "tree_sum", "aggregation_layers",
    "GroupSpec", "group_sensitivity_variance",
]
