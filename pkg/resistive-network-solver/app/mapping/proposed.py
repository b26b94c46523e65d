"""
Proposed 2n-node design: the [x; -x] transformation and its network
"""
from dataclasses import dataclass, field
from typing import Dict, Any, Optional, List, Tuple
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

ANCHORED = "anchored"
SCALED_IDENTITY = "scaled_identity"


def _diag_vector(M: np.ndarray) -> np.ndarray:
    return np.diag(M).astype(float) if np.ndim(M) == 2 else np.asarray(M, dtype=float)


@dataclass(frozen=True, eq=False)
class TransformedSystem:
    """Blocks of the 2n system [[K_A, K_B], [K_B, K_A]] [x; -x] = [b; -b] - Ks terms"""
    K_A: np.ndarray
    K_B: np.ndarray
    K_s: np.ndarray
    D: np.ndarray
    anchor: Optional[int] = None
    notes: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def n(self) -> int:
        return self.K_A.shape[0]

    def block_matrix(self) -> np.ndarray:
        return np.block([[self.K_A, self.K_B], [self.K_B, self.K_A]])

    def loaded_matrix(self) -> np.ndarray:
        """Block matrix with the supply branches stamped on both halves"""
        return self.block_matrix() + np.kron(np.eye(2), self.K_s)

    def couplings(self) -> np.ndarray:
        """Signed conductance between node i and node n+i"""
        return -np.diag(self.K_B)

    def ground_ties(self) -> np.ndarray:
        """Column sums of the block matrix: conductance from each node to ground"""
        return self.block_matrix().sum(axis=0)


def build_D(
    A: np.ndarray,
    Ks: np.ndarray,
    policy: str = ANCHORED,
    beta: Optional[float] = None,
    anchor: int = 0,
) -> np.ndarray:
    """
    Diagonal D of the transformation.

    anchored: D_ii = 0.5 Ks_ii + 0.5 sum_j |A_ji|, with the anchor column taking
    the full Ks entry so that only the anchor node pair is tied to ground.
    scaled_identity: D = beta * max column abs sum * I, beta >= 0.5.
    """
    A = np.asarray(A, dtype=float)
    ks = _diag_vector(Ks)
    colabs = np.abs(A).sum(axis=0)

    if policy == ANCHORED:
        d = 0.5 * ks + 0.5 * colabs
        d[anchor] = ks[anchor] + 0.5 * colabs[anchor]
    elif policy == SCALED_IDENTITY:
        if beta is None:
            raise MappingError("scaled_identity policy needs beta")
        if beta < 0.5:
            raise MappingError(
                f"beta={beta} < 0.5 cannot satisfy the stability condition 2D > |A| + Ks"
            )
        d = np.full(A.shape[0], beta * colabs.max())
    else:
        raise MappingError(f"unknown D policy '{policy}'")
    return np.diag(d)


def transform(sys: LinearSystem, Ks: np.ndarray, D: np.ndarray) -> TransformedSystem:
    """K_A = D + 0.5(A - |A|) - Ks; K_B = D - 0.5(A + |A|)"""
    A = sys.A
    Ks = np.diag(_diag_vector(Ks))
    D = np.diag(_diag_vector(D))
    if Ks.shape != A.shape or D.shape != A.shape:
        raise MappingError(f"Ks {Ks.shape} and D {D.shape} must match A {A.shape}")
    absA = np.abs(A)
    K_A = D + 0.5 * (A - absA) - Ks
    K_B = D - 0.5 * (A + absA)
    return TransformedSystem(K_A, K_B, Ks, D)


def _is_pd(M: np.ndarray, tol: float) -> Tuple[bool, float]:
    try:
        eig = np.linalg.eigvalsh(M)
    except np.linalg.LinAlgError as e:
        raise MappingError(f"eigensolver failed during stability check: {e}")
    scale = float(np.abs(eig).max()) or 1.0
    return bool(eig[0] > tol * scale), float(eig[0])


def check_stability(ts: TransformedSystem, tol: Optional[float] = None) -> Dict[str, Any]:
    """
    The block system is stable when both K_A - K_B and K_A + K_B are positive definite.

    Returns:
        dict with pd_original, pd_sum, stable and the smallest eigenvalue of each block
    """
    tol = get_settings().pd_tol if tol is None else tol
    pd_original, min_original = _is_pd(ts.K_A - ts.K_B, tol)
    pd_sum, min_sum = _is_pd(ts.K_A + ts.K_B, tol)
    return {
        "pd_original": pd_original,
        "pd_sum": pd_sum,
        "stable": pd_original and pd_sum,
        "min_eig_original": min_original,
        "min_eig_sum": min_sum,
    }


def choose_anchor(b: np.ndarray, anchor_policy: str) -> int:
    if anchor_policy == "first":
        return 0
    if anchor_policy == "largest_b":
        return int(np.argmax(np.abs(b)))
    raise MappingError(f"unknown anchor policy '{anchor_policy}'")


def _transformed(
    sys: LinearSystem,
    ks: np.ndarray,
    policy: str,
    beta: Optional[float],
    anchor: int,
    clamp_anchor: bool,
) -> TransformedSystem:
    A = sys.A
    D = build_D(A, ks, policy, beta, anchor)
    notes = []
    if policy == ANCHORED:
        r = anchor
        colabs = np.abs(A[:, r]).sum()
        slack = A[r, r] - ks[r] - (colabs - abs(A[r, r]))
        coupling = 0.5 * (A[r, r] + abs(A[r, r])) - D[r, r]
        if clamp_anchor and coupling < 0 and slack > 0:
            # anchor column is dominant: lower D so its coupling stays passive
            D = D.copy()
            D[r, r] = A[r, r]
            notes.append(f"anchor column {r + 1} clamped: ground ties carry slack {slack:.6g} uS")
        if ks[r] == 0:
            notes.append(f"anchor column {r + 1} has no supply branch; K_A + K_B is singular")
    ts = transform(sys, ks, D)
    return TransformedSystem(ts.K_A, ts.K_B, ts.K_s, ts.D, anchor if policy == ANCHORED else None, tuple(notes))


def _elements(ts: TransformedSystem, b: np.ndarray) -> Tuple[List[Element], List[str]]:
    n = ts.n
    M = ts.block_matrix()
    tol = zero_tolerance(M)
    elements = []
    notes = []

    # between-node conductances are the negated off-diagonals of the block matrix
    rows, cols = np.nonzero(np.triu(M, 1))
    for p, q in zip(rows, cols):
        g = -float(M[p, q])
        is_coupling = q == p + n
        role = "coupling" if is_coupling else "offdiag"
        if abs(g) <= tol:
            if is_coupling:
                notes.append(f"coupling {p + 1}-{q + 1} is zero and omitted")
            continue
        kind = ElementKind.POSITIVE_RESISTOR if g > 0 else ElementKind.NEGATIVE_RESISTANCE
        elements.append(Element(kind, int(p) + 1, int(q) + 1, abs(g), role=role))

    for m, g in enumerate(ts.ground_ties()):
        if abs(g) <= tol:
            continue
        kind = ElementKind.GROUND_TIE if g > 0 else ElementKind.NEGATIVE_RESISTANCE
        elements.append(Element(kind, m + 1, 0, abs(float(g)), role="ground"))

    ks = np.diag(ts.K_s)
    for i in range(n):
        if ks[i] > 0:
            polarity = 1 if b[i] > 0 else -1
            elements.append(Element(ElementKind.SUPPLY_BRANCH, i + 1, 0, float(ks[i]), polarity, "supply"))
            elements.append(Element(ElementKind.SUPPLY_BRANCH, n + i + 1, 0, float(ks[i]), -polarity, "mirror-supply"))
    return elements, notes


@dataclass(frozen=True, eq=False)
class CrosspointLayout:
    """
    Conductance grid of the proposed network.

    Rows are the 2n x nodes plus the ground row; columns are the 2n x nodes plus
    the x_s+ and x_s- supply columns. Node-pair couplings stay outside the grid.
    """
    grid: np.ndarray
    row_labels: Tuple[str, ...]
    col_labels: Tuple[str, ...]
    external_elements: Tuple[Element, ...]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rows": list(self.row_labels),
            "columns": list(self.col_labels),
            "grid": self.grid.tolist(),
            "external": [el.to_dict() for el in self.external_elements],
        }


def build_crosspoint(net: Network) -> CrosspointLayout:
    N = net.unknowns
    grid = np.zeros((N + 1, N + 2))
    external = []
    for el in net.elements:
        if el.kind == ElementKind.SUPPLY_BRANCH:
            col = N if el.polarity > 0 else N + 1
            grid[el.i - 1, col] += el.conductance
        elif el.j == 0:
            grid[N, el.i - 1] += el.signed_conductance
        elif el.role == "coupling":
            external.append(el)
        else:
            half = 0.5 * el.signed_conductance
            grid[el.i - 1, el.j - 1] += half
            grid[el.j - 1, el.i - 1] += half

    nodes = tuple(f"x{m}" for m in range(1, N + 1))
    return CrosspointLayout(
        grid=grid,
        row_labels=nodes + ("gnd",),
        col_labels=nodes + ("xs+", "xs-"),
        external_elements=tuple(external),
    )


def _proposed_network(
    sys: LinearSystem,
    alpha: float,
    policy: str,
    beta: Optional[float],
    supply_voltage: float,
    anchor_policy: str,
    clamp_anchor: bool,
) -> Tuple[Network, TransformedSystem, List[str]]:
    scaled = sys.scaled(alpha) if alpha != 1.0 else sys
    ks = supply_conductances(scaled.b, supply_voltage)
    anchor = choose_anchor(scaled.b, anchor_policy)
    ts = _transformed(scaled, ks, policy, beta, anchor, clamp_anchor)
    elements, notes = _elements(ts, scaled.b)
    net = Network(
        node_count=2 * sys.n + 1,
        elements=tuple(elements),
        design=Design.PROPOSED,
        alpha=alpha,
        supply_pos=supply_voltage,
        supply_neg=-supply_voltage,
        label=sys.label,
    )
    return net, ts, list(ts.notes) + notes


def max_mapped_conductance(
    sys: LinearSystem,
    policy: str = ANCHORED,
    beta: Optional[float] = None,
) -> float:
    """Largest non-supply conductance of the proposed network at alpha = 1"""
    settings = get_settings()
    net, _, _ = _proposed_network(
        sys, 1.0, policy, beta, settings.supply_voltage, settings.anchor_policy, settings.clamp_anchor
    )
    return net.max_conductance()


def auto_alpha(sys: LinearSystem, target: Optional[float] = None, policy: str = ANCHORED, beta: Optional[float] = None) -> float:
    """Scale factor that brings the largest mapped conductance to the target"""
    target = get_settings().target_max_conductance_us if target is None else target
    peak = max_mapped_conductance(sys, policy, beta)
    return target / peak if peak > 0 else 1.0


def map_proposed(
    sys: LinearSystem,
    alpha: Optional[float] = None,
    policy: str = ANCHORED,
    beta: Optional[float] = None,
    supply_voltage: Optional[float] = None,
    anchor_policy: Optional[str] = None,
    clamp_anchor: Optional[bool] = None,
    g_min: Optional[float] = None,
    g_max: Optional[float] = None,
) -> Tuple[Network, TransformedSystem, CrosspointLayout]:
    """
    Compile a system onto the 2n-node network.

    Args:
        sys: the system to map
        alpha: conductance scale; None picks the value that puts the largest
            conductance at settings.target_max_conductance_us
        policy: D matrix policy, "anchored" or "scaled_identity"
        beta: scale for the scaled_identity policy

    Returns:
        (network, transformed system of the scaled system, cross-point layout)
    """
    settings = get_settings()
    supply_voltage = settings.supply_voltage if supply_voltage is None else supply_voltage
    anchor_policy = settings.anchor_policy if anchor_policy is None else anchor_policy
    clamp_anchor = settings.clamp_anchor if clamp_anchor is None else clamp_anchor

    if alpha is None:
        alpha = auto_alpha(sys, policy=policy, beta=beta)
    if alpha <= 0:
        raise MappingError(f"alpha must be positive, got {alpha}")

    net, ts, notes = _proposed_network(sys, alpha, policy, beta, supply_voltage, anchor_policy, clamp_anchor)
    notes += check_device_range(list(net.elements), g_min, g_max)

    stability = check_stability(ts)
    if not stability["stable"]:
        message = (
            f"unstable transformed system: pd_original={stability['pd_original']}, "
            f"pd_sum={stability['pd_sum']}"
        )
        logger.warning(f"{sys.label or 'system'}: {message}")
        notes.append(message)

    net = with_diagnostics(net, *notes, floating_warning(net))
    logger.info(
        f"mapped {sys.label or 'system'} (n={sys.n}) onto proposed design at alpha={alpha:.4g}: "
        f"{len(net.elements)} elements, {len(net.negative_elements)} negative"
    )
    return net, ts, build_crosspoint(net)
