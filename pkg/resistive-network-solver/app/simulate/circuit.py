"""
Circuit assembly for simulation.

Node voltages are algebraic: with the amp outputs y held, the nodes solve
G x = s + B y. Every dynamic amp contributes one state whose differential
input is linear in y once the nodes are eliminated:

    v+ - v- = C y + d * on + v_offset
"""
from dataclasses import dataclass
from typing import Dict, Any, Optional, List, Tuple
import enum
import logging

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from app.config import get_settings
from app.devices import (
    AMP_ROLES,
    DeviceModelError,
    NegResRealization,
    OpAmpModel,
    get_device_library,
    offset_factors,
)
from app.mapping.network import ElementKind, Network, stamp

logger = logging.getLogger(__name__)


class SimulationError(Exception):
    """Exception for invalid simulation setups and integrator failures"""
    pass


class SingularNetworkError(SimulationError):
    """Exception for networks whose nodal matrix cannot be solved"""
    pass


class ConvergenceError(SimulationError):
    """Exception for steady-state iterations that do not converge"""
    pass


class FidelityKind(str, enum.Enum):
    IDEAL = "ideal"
    DYNAMIC = "dynamic"


@dataclass(frozen=True)
class Fidelity:
    kind: FidelityKind = FidelityKind.IDEAL
    model: Optional[OpAmpModel] = None
    buffer: Optional[OpAmpModel] = None

    def __post_init__(self):
        if self.kind == FidelityKind.DYNAMIC and self.model is None:
            raise SimulationError("dynamic fidelity needs an opamp model")

    @classmethod
    def ideal(cls) -> "Fidelity":
        return cls()

    @classmethod
    def dynamic(cls, model: OpAmpModel, buffer: Optional[OpAmpModel] = None) -> "Fidelity":
        return cls(FidelityKind.DYNAMIC, model, buffer)

    @property
    def is_dynamic(self) -> bool:
        return self.kind == FidelityKind.DYNAMIC

    @property
    def label(self) -> str:
        if not self.is_dynamic:
            return "ideal"
        return f"dynamic({self.model.name})"

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"kind": self.kind.value}
        if self.model is not None:
            data["model"] = self.model.to_dict()
        if self.buffer is not None:
            data["buffer"] = self.buffer.to_dict()
        return data


def parse_fidelity(text: str, model: Optional[str] = None) -> Fidelity:
    """
    Parse 'ideal', 'dynamic', 'dynamic:<model>' or a bare model name.
    """
    text = (text or "ideal").strip()
    if text.lower() == "ideal":
        return Fidelity.ideal()
    library = get_device_library()
    if text.lower().startswith("dynamic"):
        _, _, name = text.partition(":")
        name = name or model or get_settings().default_opamp
    else:
        name = text
    try:
        return Fidelity.dynamic(library.get(name))
    except DeviceModelError as e:
        raise SimulationError(str(e))


class ActiveCircuit:
    """
    Nodal system of a network with every negative resistance realized by its
    four-amp element circuit. With ideal fidelity there are no amps and the
    negative resistances stamp -k directly.
    """

    def __init__(self, net: Network, fidelity: Fidelity, k_R: Optional[float] = None):
        self.net = net
        self.fidelity = fidelity
        self.k_R = get_settings().gain_resistor_us if k_R is None else k_R
        N = net.unknowns

        negatives = [
            (idx, el) for idx, el in enumerate(net.elements)
            if el.kind == ElementKind.NEGATIVE_RESISTANCE
        ] if fidelity.is_dynamic else []
        self.element_index: Tuple[int, ...] = tuple(idx for idx, _ in negatives)
        self.realizations: Tuple[NegResRealization, ...] = tuple(
            NegResRealization(el.conductance, fidelity.model, fidelity.buffer, self.k_R)
            for _, el in negatives
        )
        M = 4 * len(negatives)

        G = np.zeros((N, N))
        for el in net.elements:
            if el.kind == ElementKind.SUPPLY_BRANCH:
                stamp(G, el.i, 0, el.conductance)
            elif el.kind == ElementKind.NEGATIVE_RESISTANCE and fidelity.is_dynamic:
                continue
            else:
                stamp(G, el.i, el.j, el.signed_conductance)

        B = np.zeros((N, M))
        Sx = np.zeros((M, N))
        Sy = np.zeros((M, M))
        for e, ((_, el), real) in enumerate(zip(negatives, self.realizations)):
            base = 4 * e
            nodes = (el.i, el.j)
            node_coef = real.node_coefficients()
            Sy[base:base + 4, base:base + 4] = real.output_coefficients()
            for side, node in enumerate(nodes):
                if not node:
                    continue
                Sx[base:base + 4, node - 1] += node_coef[:, side]
                # gain stage drives k from its output into its node
                G[node - 1, node - 1] += el.conductance
                B[node - 1, base + 2 + side] = el.conductance

        self.G = G
        self.B = B
        self.Sx = Sx
        self.Sy = Sy
        self.s = net.supply_currents(on=True)

        models = [m for real in self.realizations for m in real.models]
        self.gains = np.array([m.dc_gain for m in models])
        self.offsets = np.array([m.v_offset for m in models]) * offset_factors(len(models))
        self.taus = np.array([m.tau for m in models])
        self.slews = np.array([m.slew for m in models])
        self.rails = np.array([m.rails for m in models])

        floating = net.floating_nodes()
        if floating:
            raise SingularNetworkError(f"nodal matrix is singular: floating nodes {floating}")
        if N and np.linalg.cond(G) > 1e14:
            raise SingularNetworkError(f"nodal matrix is singular (condition {np.linalg.cond(G):.3g})")
        self._lu = lu_factor(G) if N else None

        if M:
            self.RB = lu_solve(self._lu, B)
            self.Rs = lu_solve(self._lu, self.s)
            self.C = Sx @ self.RB + Sy
            self.d = Sx @ self.Rs
        else:
            self.RB = np.zeros((N, 0))
            self.Rs = lu_solve(self._lu, self.s) if N else np.zeros(0)
            self.C = np.zeros((0, 0))
            self.d = np.zeros(0)
        logger.debug(f"Assembled circuit: {N} nodes, {M} amps ({fidelity.label})")

    @property
    def n_amps(self) -> int:
        return len(self.gains)

    def node_voltages(self, y: np.ndarray, on: float = 1.0) -> np.ndarray:
        return on * self.Rs + self.RB @ y

    def jacobian(self) -> np.ndarray:
        """d(dy/dt)/dy of the unlimited amp dynamics"""
        return (self.gains[:, None] * self.C - np.eye(self.n_amps)) / self.taus[:, None]

    def rhs(self, y: np.ndarray, on: float) -> np.ndarray:
        target = self.gains * (self.C @ y + self.d * on + self.offsets)
        return (target - y) / self.taus

    def amp_labels(self) -> List[str]:
        labels = []
        for idx in self.element_index:
            el = self.net.elements[idx]
            labels.extend(f"e{idx}_{role}({el.i},{el.j})" for role in AMP_ROLES)
        return labels
