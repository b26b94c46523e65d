"""
Linear systems: representation, classification and random generation
"""
from app.linsys.system import (
    LinearSystem,
    LinearSystemError,
    ClassificationError,
    SystemClass,
    validate,
    classify,
    normalize_unsymmetric,
    supply_conductances,
    passivity_margins,
    worst_asymmetry,
)
from app.linsys.generator import GeneratorSpec, GenerationError, generate_random, generate_sdd
from app.linsys.reference import demo_system, three_node_system, graph_laplacian_system

__all__ = [
    "LinearSystem",
    "LinearSystemError",
    "ClassificationError",
    "SystemClass",
    "validate",
    "classify",
    "normalize_unsymmetric",
    "supply_conductances",
    "passivity_margins",
    "worst_asymmetry",
    "GeneratorSpec",
    "GenerationError",
    "generate_random",
    "generate_sdd",
    "demo_system",
    "three_node_system",
    "graph_laplacian_system",
]
