"""
Mapping of linear systems onto resistive-network solver circuits
"""
from app.mapping.network import (
    Design,
    Element,
    ElementKind,
    Network,
    MappingError,
    ConductanceRangeError,
)
from app.mapping.preliminary import conductances_from_A, map_preliminary
from app.mapping.proposed import (
    TransformedSystem,
    CrosspointLayout,
    build_D,
    transform,
    check_stability,
    map_proposed,
    max_mapped_conductance,
    auto_alpha,
)
from app.mapping.components import ComponentCount, count_components, dense_counts, column_sum_strategies

__all__ = [
    "Design",
    "Element",
    "ElementKind",
    "Network",
    "MappingError",
    "ConductanceRangeError",
    "conductances_from_A",
    "map_preliminary",
    "TransformedSystem",
    "CrosspointLayout",
    "build_D",
    "transform",
    "check_stability",
    "map_proposed",
    "max_mapped_conductance",
    "auto_alpha",
    "ComponentCount",
    "count_components",
    "dense_counts",
    "column_sum_strategies",
]
