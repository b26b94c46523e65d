"""
Hardware component counts for compiled networks
"""
from dataclasses import dataclass, asdict
from typing import Dict, Any, List
import math

from app.config import COMPONENT_TABLE, ELEMENT_CIRCUIT
from app.mapping.network import Design, ElementKind, Network


@dataclass(frozen=True)
class ComponentCount:
    """Provisioned hardware plus the active parts the mapped values engage"""
    design: str
    n: int
    variable_resistors: int
    fixed_resistors: int
    analog_switches: int
    opamps: int
    negative_elements: int
    active_opamps: int

    @property
    def dynamic_states(self) -> int:
        return self.active_opamps

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["dynamic_states"] = self.dynamic_states
        return data


def dense_counts(design: str, n: int) -> Dict[str, int]:
    """Closed-form dense worst-case counts"""
    formulas = COMPONENT_TABLE[Design(design).value]
    return {name: int(f(n)) for name, f in formulas.items()}


def _preliminary(net: Network) -> Dict[str, int]:
    # every off-diagonal and ground position is a switchable element circuit
    circuits = sum(1 for el in net.elements if el.kind != ElementKind.SUPPLY_BRANCH)
    supplies = len(net.of_kind(ElementKind.SUPPLY_BRANCH))
    return {
        "variable_resistors": ELEMENT_CIRCUIT["variable_resistors"] * circuits + supplies,
        "fixed_resistors": ELEMENT_CIRCUIT["fixed_resistors"] * circuits,
        "analog_switches": ELEMENT_CIRCUIT["analog_switches"] * circuits + supplies,
        "opamps": ELEMENT_CIRCUIT["opamps"] * circuits,
    }


def _proposed(net: Network) -> Dict[str, int]:
    n = net.unknowns // 2
    between = sum(
        1 for el in net.elements
        if el.kind != ElementKind.SUPPLY_BRANCH and el.j != 0 and el.role != "coupling"
    )
    grounds = sum(1 for el in net.elements if el.role == "ground")
    # each matrix entry provisions both placements (same half and cross half), two resistors each
    pairs = between // 2
    coupling_slots = n
    # ground ties come in mirrored pairs at m and n+m with equal column sums; one tunable resistor per pair
    return {
        "variable_resistors": 4 * pairs + ELEMENT_CIRCUIT["variable_resistors"] * coupling_slots + math.ceil(grounds / 2),
        "fixed_resistors": ELEMENT_CIRCUIT["fixed_resistors"] * coupling_slots,
        "analog_switches": ELEMENT_CIRCUIT["analog_switches"] * coupling_slots,
        "opamps": ELEMENT_CIRCUIT["opamps"] * coupling_slots,
    }


def count_components(net: Network) -> ComponentCount:
    if net.design == Design.PRELIMINARY:
        counts = _preliminary(net)
        n = net.unknowns
    else:
        counts = _proposed(net)
        n = net.unknowns // 2
    negatives = len(net.negative_elements)
    return ComponentCount(
        design=net.design.value,
        n=n,
        negative_elements=negatives,
        active_opamps=ELEMENT_CIRCUIT["opamps"] * negatives,
        **counts,
    )


def column_sum_strategies(net: Network) -> List[Dict[str, Any]]:
    """
    How many conductances each ground tie aggregates, with the three ways of
    producing the sum: at assembly time, as parallel resistors, or by a
    multiply against a ones vector on the array.
    """
    degree = {node: 0 for node in range(1, net.node_count)}
    for el in net.elements:
        if el.kind == ElementKind.SUPPLY_BRANCH or el.j == 0:
            continue
        degree[el.i] += 1
        degree[el.j] += 1

    report = []
    for el in net.elements:
        if el.j != 0 or el.kind == ElementKind.SUPPLY_BRANCH:
            continue
        terms = degree[el.i] + 1
        report.append({
            "node": el.i,
            "conductance_uS": el.signed_conductance,
            "terms": terms,
            "assembly_additions": terms - 1,
            "parallel_resistors": terms,
            "mvm_ones_vector": True,
        })
    return report
