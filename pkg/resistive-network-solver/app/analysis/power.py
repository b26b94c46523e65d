"""
Power model of compiled networks: analytic totals from the transformed
system and element-wise sums from simulated operating points
"""
from dataclasses import dataclass, asdict
from typing import Dict, Any, Optional
import logging

import numpy as np

from app.config import get_settings
from app.devices import ideal_stage_outputs
from app.mapping.components import ComponentCount, count_components
from app.mapping.network import ElementKind, Network, zero_tolerance
from app.mapping.proposed import TransformedSystem

logger = logging.getLogger(__name__)

ASSUMPTION_NOTE = "amp and switch quiescent draws are configured assumptions, not measured values"


@dataclass(frozen=True)
class PowerReport:
    """All terms in uW"""
    p_resistive_positive: float
    p_neg_correction: float
    p_gain_resistors: float
    p_amp: float
    p_sw: float
    p_supply_rhs: float
    note: str = ASSUMPTION_NOTE

    @property
    def p_total(self) -> float:
        return (
            self.p_resistive_positive + self.p_neg_correction + self.p_gain_resistors
            + self.p_amp + self.p_sw + self.p_supply_rhs
        )

    @property
    def p_signal(self) -> float:
        """Voltage-dependent part of the total"""
        return self.p_total - self.p_amp - self.p_sw

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["p_total"] = self.p_total
        data["p_signal"] = self.p_signal
        return data


def _quiescent(amp_quiescent: Optional[float], sw_quiescent: Optional[float]):
    settings = get_settings()
    return (
        settings.amp_quiescent_uw if amp_quiescent is None else amp_quiescent,
        settings.switch_quiescent_uw if sw_quiescent is None else sw_quiescent,
    )


def power_analytic(
    ts: TransformedSystem,
    x: np.ndarray,
    k_R: Optional[float] = None,
    amp_quiescent: Optional[float] = None,
    sw_quiescent: Optional[float] = None,
    counts: Optional[ComponentCount] = None,
) -> PowerReport:
    """
    Closed-form power of the proposed network at solution x.

    The resistive term is [x; -x]^T M [x; -x] with M the block matrix; it
    already contains -k*dv^2 for every negative element, so the correction
    adds 3*k*dv^2 to reach the 2*k*dv^2 dissipated in the two k resistors.
    For the couplings (dv = 2x) that is 6 x^T (K_B + |K_B|) x.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (ts.n,):
        raise ValueError(f"x has shape {x.shape}, expected ({ts.n},)")
    k_R = get_settings().gain_resistor_us if k_R is None else k_R
    amp_q, sw_q = _quiescent(amp_quiescent, sw_quiescent)

    v = np.concatenate([x, -x])
    p_resistive = float(v @ ts.block_matrix() @ v)
    # off-diagonals of K_B are never positive, so only negative couplings contribute
    p_neg = float(6.0 * x @ (ts.K_B + np.abs(ts.K_B)) @ x)

    # active elements and their voltage across
    # same cut-off the mapper uses to drop zero conductances
    tol = zero_tolerance(ts.block_matrix())
    deltas = [2.0 * x[i] for i in np.nonzero(ts.couplings() < -tol)[0]]
    ties = ts.ground_ties()
    for m in np.nonzero(ties < -tol)[0]:
        p_neg += 3.0 * abs(ties[m]) * v[m] ** 2
        deltas.append(v[m])
    p_gain = 4.0 * k_R * float(np.sum(np.square(deltas))) if deltas else 0.0

    if counts is None:
        active = 4 * len(deltas)
        switches = 3 * ts.n
    else:
        active = counts.active_opamps
        switches = counts.analog_switches

    return PowerReport(
        p_resistive_positive=p_resistive,
        p_neg_correction=p_neg,
        p_gain_resistors=p_gain,
        p_amp=amp_q * active,
        p_sw=sw_q * switches,
        p_supply_rhs=float(2.0 * x @ ts.K_s @ x),
    )


def power_measured(
    net: Network,
    x_nodes: np.ndarray,
    amp_outputs: Optional[np.ndarray] = None,
    k_R: Optional[float] = None,
    amp_quiescent: Optional[float] = None,
    sw_quiescent: Optional[float] = None,
    counts: Optional[ComponentCount] = None,
) -> PowerReport:
    """
    Element-by-element power at simulated node voltages and amp outputs.

    amp_outputs holds four values per negative element, in element order; when
    absent the ideal stage outputs are used.
    """
    x_nodes = np.asarray(x_nodes, dtype=float)
    if x_nodes.shape != (net.unknowns,):
        raise ValueError(f"x_nodes has shape {x_nodes.shape}, expected ({net.unknowns},)")
    k_R = get_settings().gain_resistor_us if k_R is None else k_R
    amp_q, sw_q = _quiescent(amp_quiescent, sw_quiescent)
    counts = counts or count_components(net)

    def volt(node: int) -> float:
        return float(x_nodes[node - 1]) if node else 0.0

    p_resistive = p_neg = p_gain = p_supply = 0.0
    e = 0
    for el in net.elements:
        if el.kind == ElementKind.SUPPLY_BRANCH:
            p_supply += el.conductance * volt(el.i) ** 2
            continue
        x_i, x_j = volt(el.i), volt(el.j)
        p_resistive += el.signed_conductance * (x_i - x_j) ** 2
        if el.kind != ElementKind.NEGATIVE_RESISTANCE:
            continue
        if amp_outputs is not None and len(amp_outputs):
            b_i, b_j, g_i, g_j = amp_outputs[4 * e:4 * e + 4]
        else:
            g_i, g_j = ideal_stage_outputs(x_i, x_j)
            b_i, b_j = x_i, x_j
        e += 1
        p_k = el.conductance * ((g_i - x_i) ** 2 + (g_j - x_j) ** 2)
        p_neg += p_k + el.conductance * (x_i - x_j) ** 2
        p_gain += 0.5 * k_R * ((g_i - b_j) ** 2 + (g_j - b_i) ** 2)

    return PowerReport(
        p_resistive_positive=p_resistive,
        p_neg_correction=p_neg,
        p_gain_resistors=p_gain,
        p_amp=amp_q * counts.active_opamps,
        p_sw=sw_q * counts.analog_switches,
        p_supply_rhs=p_supply,
    )


def power_from_result(net: Network, result, **kwargs) -> PowerReport:
    """Measured power at the last transient sample, or at the operating point"""
    if len(result.times):
        x_nodes = result.node_trajectories[-1]
        outputs = result.amp_trajectories[-1] if result.amp_trajectories.shape[1] else None
    else:
        x_nodes, outputs = result.x_dc, result.amp_dc
    return power_measured(net, x_nodes, outputs, **kwargs)
