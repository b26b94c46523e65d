"""
Linear system representation, validation and classification
"""
from dataclasses import dataclass, field
from typing import Dict, Any, Optional, List, Tuple
import enum
import logging

import numpy as np
from scipy import sparse

from app.config import get_settings

logger = logging.getLogger(__name__)


class LinearSystemError(Exception):
    """Exception for malformed linear systems"""
    pass


class ClassificationError(Exception):
    """Exception raised when a system cannot be classified"""
    pass


class SystemClass(str, enum.Enum):
    UNSYMMETRIC = "Unsymmetric"
    SYMMETRIC_NON_PD = "SymmetricNonPD"
    SPD_NOT_DD = "SPD_NotDiagonallyDominant"
    SDD = "SPD_DiagonallyDominant"


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """
    A x = b with A in microsiemens and b in microamperes.

    A may be given dense or as a scipy sparse matrix; it is stored dense.
    """
    A: np.ndarray
    b: np.ndarray
    label: str = ""
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        A = self.A.toarray() if sparse.issparse(self.A) else np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise LinearSystemError(f"A must be square, got shape {A.shape}")
        if A.shape[0] < 1:
            raise LinearSystemError("system needs at least one unknown")
        if b.shape[0] != A.shape[0]:
            raise LinearSystemError(f"b has length {b.shape[0]}, expected {A.shape[0]}")
        A = A.copy()
        b = b.copy()
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def scaled(self, alpha: float) -> "LinearSystem":
        """Same solution, matrix and RHS multiplied by alpha"""
        meta = dict(self.metadata)
        meta["alpha"] = alpha * meta.get("alpha", 1.0)
        return LinearSystem(alpha * self.A, alpha * self.b, self.label, meta)

    def negated(self) -> "LinearSystem":
        return LinearSystem(-self.A, -self.b, f"{self.label}-negated" if self.label else "negated", dict(self.metadata))

    def solve_dense(self) -> np.ndarray:
        """Direct dense solve, used as a reference oracle"""
        return np.linalg.solve(self.A, self.b)


def supply_conductances(b: np.ndarray, supply_voltage: Optional[float] = None) -> np.ndarray:
    """k_si = |b_i| / x_s; zero where b_i is zero"""
    if supply_voltage is None:
        supply_voltage = get_settings().supply_voltage
    return np.abs(np.asarray(b, dtype=float)) / supply_voltage


def validate(sys: LinearSystem) -> List[str]:
    """
    Check the LinearSystem invariants.

    Returns:
        List of violation messages; empty when the system is valid
    """
    violations = []
    A, b = sys.A, sys.b

    bad = np.argwhere(~np.isfinite(A))
    for i, j in bad[:10]:
        violations.append(f"non-finite A at ({i},{j})")
    for i in np.flatnonzero(~np.isfinite(b))[:10]:
        violations.append(f"non-finite b at ({i})")
    if violations:
        return violations

    asym = np.abs(A - A.T)
    if asym.max() > 0:
        upper = np.triu(asym, 1)
        for i, j in np.argwhere(upper > 0)[:10]:
            violations.append(f"asymmetry at ({i},{j}): {float(A[i, j])!r} vs {float(A[j, i])!r}")
    return violations


def worst_asymmetry(A: np.ndarray) -> Tuple[int, int, float]:
    """Index pair and size of the largest |A_ij - A_ji|"""
    asym = np.abs(A - A.T)
    i, j = np.unravel_index(int(np.argmax(asym)), asym.shape)
    return int(min(i, j)), int(max(i, j)), float(asym[i, j])


def passivity_margins(sys: LinearSystem, Ks: np.ndarray) -> np.ndarray:
    """Per-column A_ii - Ks_ii - sum_{j != i} |A_ji|; negative means active elements"""
    A = sys.A
    ks = np.diag(Ks) if np.ndim(Ks) == 2 else np.asarray(Ks, dtype=float)
    off = np.abs(A).sum(axis=0) - np.abs(np.diag(A))
    return np.diag(A) - ks - off


def classify(sys: LinearSystem, Ks: Optional[np.ndarray] = None, tol: Optional[float] = None) -> SystemClass:
    """
    Place a system in one of the four solvability domains.

    Args:
        sys: the system
        Ks: supply conductances (diagonal matrix or vector); derived from b when omitted
        tol: relative tolerance, defaults to settings.pd_tol

    Returns:
        SystemClass
    """
    settings = get_settings()
    tol = settings.pd_tol if tol is None else tol
    if Ks is None:
        Ks = supply_conductances(sys.b)
    ks = np.diag(Ks) if np.ndim(Ks) == 2 else np.asarray(Ks, dtype=float)

    A = sys.A
    scale = float(np.abs(A).max()) or 1.0
    if np.abs(A - A.T).max() > settings.symmetry_tol * scale:
        return SystemClass.UNSYMMETRIC

    M = A - np.diag(ks)
    try:
        eig = np.linalg.eigvalsh(M)
    except np.linalg.LinAlgError as e:
        raise ClassificationError(f"eigensolver did not converge for {sys.label or 'system'}: {e}")

    eig_scale = float(np.abs(eig).max()) or 1.0
    if eig[0] <= tol * eig_scale:
        logger.debug(f"{sys.label or 'system'}: smallest eigenvalue of (A - Ks) is {eig[0]:.4g}")
        return SystemClass.SYMMETRIC_NON_PD

    margins = passivity_margins(sys, ks)
    if np.all(margins >= -tol * scale):
        return SystemClass.SDD
    return SystemClass.SPD_NOT_DD


def normalize_unsymmetric(A: np.ndarray, b: np.ndarray, tol: Optional[float] = None) -> LinearSystem:
    """
    Normal equations A^T A x = A^T b.

    The result is symmetric positive semidefinite; metadata["singular"] is set
    when A^T A is singular within tol.
    """
    tol = get_settings().pd_tol if tol is None else tol
    A = np.asarray(A.toarray() if sparse.issparse(A) else A, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise LinearSystemError(f"A must be square, got shape {A.shape}")
    if b.shape[0] != A.shape[0]:
        raise LinearSystemError(f"dimension mismatch: A is {A.shape}, b has {b.shape[0]}")

    N = A.T @ A
    N = 0.5 * (N + N.T)
    rhs = A.T @ b

    eig = np.linalg.eigvalsh(N)
    top = float(np.abs(eig).max()) or 1.0
    singular = bool(eig[0] <= tol * top)
    if singular:
        logger.warning(f"normal matrix is singular (smallest eigenvalue {eig[0]:.3g})")
    return LinearSystem(N, rhs, "normalized", {"singular": singular, "normalized": True})
