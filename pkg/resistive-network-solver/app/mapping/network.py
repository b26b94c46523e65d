"""
Circuit network graph: elements, nodal stamps and sanity checks
"""
from dataclasses import dataclass, field, replace
from typing import Dict, Any, Optional, List, Tuple
import enum
import logging

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from app.config import get_settings

logger = logging.getLogger(__name__)


class MappingError(Exception):
    """Exception for systems that cannot be compiled into a network"""
    pass


class ConductanceRangeError(MappingError):
    """Exception for conductances beyond the realizable device range"""
    pass


class ElementKind(str, enum.Enum):
    POSITIVE_RESISTOR = "PositiveResistor"
    NEGATIVE_RESISTANCE = "NegativeResistance"
    SUPPLY_BRANCH = "SupplyBranch"
    GROUND_TIE = "GroundTie"


class Design(str, enum.Enum):
    PRELIMINARY = "preliminary"
    PROPOSED = "proposed"


@dataclass(frozen=True)
class Element:
    """
    One two-terminal element. Conductance is stored positive; kind carries the sign.

    Supply branches run from node i to the rail selected by polarity; j is 0.
    """
    kind: ElementKind
    i: int
    j: int
    conductance: float
    polarity: int = 0
    role: str = ""

    @property
    def signed_conductance(self) -> float:
        return -self.conductance if self.kind == ElementKind.NEGATIVE_RESISTANCE else self.conductance

    def to_dict(self) -> Dict[str, Any]:
        data = {"kind": self.kind.value, "i": self.i, "j": self.j, "conductance": self.conductance}
        if self.kind == ElementKind.SUPPLY_BRANCH:
            data["polarity"] = "+" if self.polarity > 0 else "-"
        if self.role:
            data["role"] = self.role
        return data


def stamp(M: np.ndarray, i: int, j: int, g: float) -> None:
    """Add conductance g between 1-based nodes i and j (0 = ground/source)"""
    if i:
        M[i - 1, i - 1] += g
    if j:
        M[j - 1, j - 1] += g
    if i and j:
        M[i - 1, j - 1] -= g
        M[j - 1, i - 1] -= g


@dataclass(frozen=True, eq=False)
class Network:
    """Compiled circuit. node_count includes ground (node 0)."""
    node_count: int
    elements: Tuple[Element, ...]
    design: Design
    alpha: float = 1.0
    supply_pos: float = 4.0
    supply_neg: float = -4.0
    label: str = ""
    diagnostics: Tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        object.__setattr__(self, "diagnostics", tuple(self.diagnostics))
        for idx, el in enumerate(self.elements):
            if not (0 <= el.i < self.node_count and 0 <= el.j < self.node_count):
                raise MappingError(f"element {idx} references node outside 0..{self.node_count - 1}")
            if not el.conductance > 0:
                raise MappingError(f"element {idx} ({el.kind.value}) has non-positive conductance {el.conductance}")
            if el.kind == ElementKind.SUPPLY_BRANCH and el.polarity not in (-1, 1):
                raise MappingError(f"supply branch {idx} needs polarity +1 or -1")

    @property
    def unknowns(self) -> int:
        return self.node_count - 1

    def of_kind(self, kind: ElementKind) -> List[Element]:
        return [el for el in self.elements if el.kind == kind]

    @property
    def negative_elements(self) -> List[Element]:
        return self.of_kind(ElementKind.NEGATIVE_RESISTANCE)

    @property
    def is_passive(self) -> bool:
        return not self.negative_elements

    def supply_level(self, el: Element) -> float:
        return self.supply_pos if el.polarity > 0 else self.supply_neg

    def nodal_matrix(self, include_supplies: bool = False) -> np.ndarray:
        """Ideal nodal conductance matrix; negative resistances stamp -k"""
        N = self.unknowns
        M = np.zeros((N, N))
        for el in self.elements:
            if el.kind == ElementKind.SUPPLY_BRANCH:
                if include_supplies:
                    stamp(M, el.i, 0, el.conductance)
                continue
            stamp(M, el.i, el.j, el.signed_conductance)
        return M

    def supply_currents(self, on: bool = True) -> np.ndarray:
        """Norton currents of the supply branches (uA) with the supplies stepped on"""
        s = np.zeros(self.unknowns)
        if not on:
            return s
        for el in self.of_kind(ElementKind.SUPPLY_BRANCH):
            s[el.i - 1] += el.conductance * self.supply_level(el)
        return s

    def solution(self, voltages: np.ndarray, readout: Optional[str] = None) -> np.ndarray:
        """
        Read x off the unknown node voltages.

        The proposed design holds x and -x, so the differential readout
        (v_i - v_{n+i}) / 2 drops any common-mode shift of the pair.
        """
        v = np.asarray(voltages, dtype=float)
        if self.design != Design.PROPOSED:
            return v[:self.unknowns].copy()
        readout = get_settings().readout if readout is None else readout
        n = self.unknowns // 2
        if readout == "node":
            return v[:n].copy()
        if readout == "differential":
            return 0.5 * (v[:n] - v[n:2 * n])
        raise MappingError(f"unknown readout '{readout}' (known: differential, node)")

    def max_conductance(self, include_supplies: bool = False) -> float:
        values = [
            el.conductance for el in self.elements
            if include_supplies or el.kind != ElementKind.SUPPLY_BRANCH
        ]
        return max(values) if values else 0.0

    def floating_nodes(self) -> List[int]:
        """Nodes with no conductive path to ground or a supply rail"""
        N = self.node_count
        rows, cols = [], []
        for el in self.elements:
            rows.append(el.i)
            cols.append(el.j)
        if not rows:
            return list(range(1, N))
        graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(N, N))
        _, labels = connected_components(graph, directed=False)
        return [node for node in range(1, N) if labels[node] != labels[0]]

    def summary(self) -> Dict[str, Any]:
        counts = {kind.value: len(self.of_kind(kind)) for kind in ElementKind}
        return {
            "label": self.label,
            "design": self.design.value,
            "unknown_nodes": self.unknowns,
            "alpha": self.alpha,
            "elements": counts,
            "max_conductance_uS": self.max_conductance(),
            "passive": self.is_passive,
        }

    def to_dict(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "design": self.design.value,
            "node_count": self.node_count,
            "alpha": self.alpha,
            "supplies": {"positive": self.supply_pos, "negative": self.supply_neg},
            "elements": [el.to_dict() for el in self.elements],
            "diagnostics": list(self.diagnostics),
        }


def check_device_range(
    elements: List[Element],
    g_min: Optional[float] = None,
    g_max: Optional[float] = None,
) -> List[str]:
    """
    Compare element conductances with the device range.

    Raises ConductanceRangeError for anything above g_max; returns warnings for
    values below g_min, which stay in the network.
    """
    settings = get_settings()
    g_min = settings.g_min_us if g_min is None else g_min
    g_max = settings.g_max_us if g_max is None else g_max

    too_large = [
        f"{el.kind.value}({el.i},{el.j})={el.conductance:.6g} uS"
        for el in elements if el.conductance > g_max
    ]
    if too_large:
        raise ConductanceRangeError(
            f"conductance above device range {g_max:g} uS: " + ", ".join(too_large[:20])
        )

    warnings = []
    for el in elements:
        if el.conductance < g_min:
            warnings.append(
                f"{el.kind.value}({el.i},{el.j}) conductance {el.conductance:.3g} uS below device range {g_min:g} uS"
            )
    if warnings:
        logger.warning(f"{len(warnings)} element(s) below the device range")
    return warnings


def floating_warning(net: Network) -> Optional[str]:
    floating = net.floating_nodes()
    if not floating:
        return None
    message = f"floating subnetwork, nodes {floating}"
    logger.warning(message)
    return message


def with_diagnostics(net: Network, *messages: str) -> Network:
    return replace(net, diagnostics=net.diagnostics + tuple(m for m in messages if m))


def zero_tolerance(values: np.ndarray) -> float:
    """Entries at or below this size are treated as exact zeros"""
    scale = float(np.abs(values).max()) if np.size(values) else 0.0
    return 1e-12 * (scale or 1.0)
