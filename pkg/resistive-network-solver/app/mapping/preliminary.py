"""
Preliminary n-node design: one circuit node per unknown
"""
from typing import Dict, Optional, Tuple
import logging

import numpy as np

from app.config import get_settings
from app.linsys.system import LinearSystem, supply_conductances
from app.mapping.network import (
    Design,
    Element,
    ElementKind,
    MappingError,
    Network,
    check_device_range,
    floating_warning,
    with_diagnostics,
    zero_tolerance,
)

logger = logging.getLogger(__name__)


def conductances_from_A(A: np.ndarray) -> Tuple[Dict[Tuple[int, int], float], Dict[int, float]]:
    """
    Branch conductances of the network whose nodal matrix is A.

    Returns:
        (off-diagonal k_ij keyed by 1-based (i, j) with i < j,
         ground ties k_0i keyed by 1-based i); signs preserved, zeros omitted
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    tol = zero_tolerance(A)

    offdiag = {}
    rows, cols = np.nonzero(np.triu(A, 1))
    for i, j in zip(rows, cols):
        offdiag[(int(i) + 1, int(j) + 1)] = float(-A[i, j])

    ground = {}
    colsum = A.sum(axis=0)
    for i in range(n):
        if abs(colsum[i]) > tol:
            ground[i + 1] = float(colsum[i])
    return offdiag, ground


def _branch(i: int, j: int, k: float, role: str) -> Element:
    if k > 0:
        kind = ElementKind.GROUND_TIE if j == 0 else ElementKind.POSITIVE_RESISTOR
        return Element(kind, i, j, k, role=role)
    return Element(ElementKind.NEGATIVE_RESISTANCE, i, j, -k, role=role)


def map_preliminary(
    sys: LinearSystem,
    alpha: float = 1.0,
    supply_voltage: Optional[float] = None,
    g_min: Optional[float] = None,
    g_max: Optional[float] = None,
) -> Network:
    """
    Compile (A - Ks) x = b - Ks x onto n nodes.

    Supply branches k_si = |b_i| / x_s tie node i to the rail of sign(b_i);
    the remaining conductances come from the column-sum rule on (A - Ks).
    """
    settings = get_settings()
    supply_voltage = settings.supply_voltage if supply_voltage is None else supply_voltage
    if alpha <= 0:
        raise MappingError(f"alpha must be positive, got {alpha}")

    scaled = sys.scaled(alpha) if alpha != 1.0 else sys
    ks = supply_conductances(scaled.b, supply_voltage)
    offdiag, ground = conductances_from_A(scaled.A - np.diag(ks))

    elements = []
    for (i, j), k in sorted(offdiag.items()):
        elements.append(_branch(i, j, k, "offdiag"))
    for i, k in sorted(ground.items()):
        elements.append(_branch(i, 0, k, "ground"))
    for i in range(sys.n):
        if ks[i] > 0:
            polarity = 1 if scaled.b[i] > 0 else -1
            elements.append(Element(ElementKind.SUPPLY_BRANCH, i + 1, 0, float(ks[i]), polarity, "supply"))

    diagnostics = check_device_range(elements, g_min, g_max)

    net = Network(
        node_count=sys.n + 1,
        elements=tuple(elements),
        design=Design.PRELIMINARY,
        alpha=alpha,
        supply_pos=supply_voltage,
        supply_neg=-supply_voltage,
        label=sys.label,
        diagnostics=tuple(diagnostics),
    )
    net = with_diagnostics(net, floating_warning(net))

    logger.info(
        f"mapped {sys.label or 'system'} (n={sys.n}) onto preliminary design: "
        f"{len(net.elements)} elements, {len(net.negative_elements)} negative"
    )
    return net
