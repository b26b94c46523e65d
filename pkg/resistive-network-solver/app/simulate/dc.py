"""
DC operating point of a mapped network
"""
from dataclasses import dataclass
from typing import Optional
import logging

import numpy as np

from app.mapping.network import Network
from app.simulate.circuit import (
    ActiveCircuit,
    ConvergenceError,
    Fidelity,
    SimulationError,
    SingularNetworkError,
)

logger = logging.getLogger(__name__)

MAX_NEWTON_ITERATIONS = 200


@dataclass(frozen=True, eq=False)
class DCState:
    x: np.ndarray
    amp_outputs: np.ndarray
    saturated: bool = False
    iterations: int = 0


def _ideal_solution(net: Network) -> np.ndarray:
    floating = net.floating_nodes()
    if floating:
        raise SingularNetworkError(f"nodal matrix is singular: floating nodes {floating}")
    G = net.nodal_matrix(include_supplies=True)
    try:
        if np.linalg.cond(G) > 1e14:
            raise np.linalg.LinAlgError("ill-conditioned")
        return np.linalg.solve(G, net.supply_currents())
    except np.linalg.LinAlgError as e:
        raise SingularNetworkError(f"nodal matrix is singular: {e}")


def _amp_steady_state(circuit: ActiveCircuit, tol: float = 1e-12) -> DCState:
    """
    Solve y = clip(A0 (C y + d + vos), rails) by piecewise-linear Newton,
    starting from the unclipped linear solution.
    """
    A0, rails = circuit.gains, circuit.rails
    forcing = circuit.d + circuit.offsets
    # rows scaled by 1/A0 keep the large open-loop gain out of the pivots
    y = np.linalg.solve(np.diag(1.0 / A0) - circuit.C, forcing)

    for iteration in range(MAX_NEWTON_ITERATIONS):
        target = A0 * (circuit.C @ y + forcing)
        clipped = np.clip(target, -rails, rails)
        residual = y - clipped
        scale = max(1.0, float(np.abs(y).max()))
        # measured at the amp inputs; output residuals carry A0 times the float noise
        if np.abs(residual / A0).max() <= tol * scale:
            saturated = bool(np.any(np.abs(y) >= rails * (1 - 1e-9)))
            return DCState(circuit.node_voltages(y), y, saturated, iteration)

        free = np.abs(target) < rails
        # free rows: (1/A0) y - C y = forcing; clipped rows: y = +-rails
        J = np.eye(len(y))
        rhs = clipped.copy()
        J[free] = np.diag(1.0 / A0)[free] - circuit.C[free]
        rhs[free] = forcing[free]
        try:
            y_new = np.linalg.solve(J, rhs)
        except np.linalg.LinAlgError:
            break
        step = y_new - y
        # damp large moves so saturation sets do not oscillate
        limit = 2.0 * float(rails.max())
        size = float(np.abs(step).max())
        y = y + step * (min(1.0, limit / size) if size > 0 else 1.0)

    residual = float(np.abs((y - np.clip(A0 * (circuit.C @ y + forcing), -rails, rails)) / A0).max())
    raise ConvergenceError(f"steady state did not converge, input residual {residual:.3g} V")


def dc_state(net: Network, fidelity: Optional[Fidelity] = None, circuit: Optional[ActiveCircuit] = None) -> DCState:
    """Operating point with the amp outputs that produce it"""
    fidelity = fidelity or Fidelity.ideal()
    if not fidelity.is_dynamic or not net.negative_elements:
        return DCState(_ideal_solution(net), np.zeros(0))

    circuit = circuit or ActiveCircuit(net, fidelity)
    try:
        state = _amp_steady_state(circuit)
    except np.linalg.LinAlgError as e:
        raise ConvergenceError(f"amp steady state is singular: {e}")
    if state.saturated:
        logger.warning(f"{net.label or 'network'}: operating point has amps at the rails")
    return state


def dc_operating_point(net: Network, fidelity: Optional[Fidelity] = None) -> np.ndarray:
    """
    Node voltages (V) at all unknown nodes.

    Ideal fidelity solves the nodal stamps directly. Dynamic fidelity includes
    the offset and finite gain of every amp in the element circuits.
    """
    if net.unknowns == 0:
        raise SimulationError("network has no unknown nodes")
    return dc_state(net, fidelity).x
