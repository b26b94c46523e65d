"""
DC and transient simulation of mapped networks
"""
from app.simulate.circuit import (
    ActiveCircuit,
    Fidelity,
    FidelityKind,
    SimulationError,
    SingularNetworkError,
    ConvergenceError,
    parse_fidelity,
)
from app.simulate.dc import DCState, dc_operating_point, dc_state
from app.simulate.settling import settling_time, band_tolerance
from app.simulate.transient import SimConfig, SimMode, SimResult, INTEGRATORS, transient

__all__ = [
    "ActiveCircuit",
    "Fidelity",
    "FidelityKind",
    "SimulationError",
    "SingularNetworkError",
    "ConvergenceError",
    "parse_fidelity",
    "DCState",
    "dc_operating_point",
    "dc_state",
    "settling_time",
    "band_tolerance",
    "SimConfig",
    "SimMode",
    "SimResult",
    "INTEGRATORS",
    "transient",
]
