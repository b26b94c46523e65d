"""
Random SPD test systems with a controlled spectrum
"""
from dataclasses import dataclass
from typing import Optional, Tuple
import logging

import numpy as np

from app.config import get_settings, STUDY_DEFAULTS
from app.linsys.system import LinearSystem, SystemClass, classify

logger = logging.getLogger(__name__)


class GenerationError(Exception):
    """Exception for unsatisfiable generator requests"""
    pass


@dataclass(frozen=True)
class GeneratorSpec:
    """Parameters of one random system draw"""
    n: int
    density: float = 1.0
    eig_min: float = STUDY_DEFAULTS["eig_min"]
    eig_max: float = STUDY_DEFAULTS["eig_max"]
    value_range: Tuple[float, float] = STUDY_DEFAULTS["value_range"]
    seed: int = 0
    max_conductance_band: Optional[Tuple[float, float]] = None
    require_non_sdd: bool = False
    budget: Optional[int] = None

    def __post_init__(self):
        if self.n < 1:
            raise GenerationError(f"n must be positive, got {self.n}")
        if not 0 < self.density <= 1:
            raise GenerationError(f"density must lie in (0, 1], got {self.density}")
        if not 0 < self.eig_min <= self.eig_max:
            raise GenerationError(f"need 0 < eig_min <= eig_max, got [{self.eig_min}, {self.eig_max}]")
        lo, hi = self.value_range
        if lo > hi:
            raise GenerationError(f"empty value range {self.value_range}")
        if self.max_conductance_band is not None:
            center, tol = self.max_conductance_band
            if center <= 0 or tol < 0:
                raise GenerationError(f"invalid conductance band {self.max_conductance_band}")


def random_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix via sign-corrected QR"""
    G = rng.standard_normal((n, n))
    Q, R = np.linalg.qr(G)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def _spectrum(spec: GeneratorSpec, rng: np.random.Generator) -> np.ndarray:
    lam = rng.uniform(spec.eig_min, spec.eig_max, spec.n)
    if spec.n >= 2:
        # both ends of the band are always present
        lam[0], lam[1] = spec.eig_min, spec.eig_max
        rng.shuffle(lam)
    return lam


def _reproject(A: np.ndarray, eig_min: float, eig_max: float) -> np.ndarray:
    """Pull the spectrum of a masked matrix back inside [eig_min, eig_max]"""
    eig = np.linalg.eigvalsh(A)
    width = eig[-1] - eig[0]
    band = eig_max - eig_min
    n = A.shape[0]
    if width > band:
        s = band / width
        return s * A + (eig_min - s * eig[0]) * np.eye(n)
    if eig[0] < eig_min:
        return A + (eig_min - eig[0]) * np.eye(n)
    if eig[-1] > eig_max:
        return A - (eig[-1] - eig_max) * np.eye(n)
    return A


def _draw(spec: GeneratorSpec, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    n = spec.n
    lam = _spectrum(spec, rng)
    Q = random_orthogonal(n, rng)
    A = (Q * lam) @ Q.T
    A = 0.5 * (A + A.T)

    if spec.density < 1 and n > 1:
        keep = np.triu(rng.random((n, n)) < spec.density, 1)
        keep = keep | keep.T | np.eye(n, dtype=bool)
        A = _reproject(np.where(keep, A, 0.0), spec.eig_min, spec.eig_max)
        A = 0.5 * (A + A.T)

    lo, hi = spec.value_range
    x_true = rng.uniform(lo, hi, n)
    return A, x_true


def _in_band(sys: LinearSystem, band: Tuple[float, float]) -> bool:
    from app.mapping.proposed import max_mapped_conductance

    center, tol = band
    return abs(max_mapped_conductance(sys) - center) <= tol * center


def generate_random(spec: GeneratorSpec, label: Optional[str] = None) -> Tuple[LinearSystem, np.ndarray]:
    """
    Draw a random SPD system and its true solution.

    Args:
        spec: generator parameters
        label: system label, defaults to a name built from n and seed

    Returns:
        (system, x_true) with b = A x_true
    """
    rng = np.random.default_rng(spec.seed)
    budget = spec.budget or get_settings().rejection_budget
    constrained = spec.max_conductance_band is not None or spec.require_non_sdd
    label = label or f"rand-n{spec.n}-s{spec.seed}"

    for attempt in range(1, budget + 1):
        A, x_true = _draw(spec, rng)
        sys = LinearSystem(A, A @ x_true, label, {"seed": spec.seed, "attempts": attempt, "density": spec.density})
        if not constrained:
            return sys, x_true
        if spec.require_non_sdd and classify(sys) != SystemClass.SPD_NOT_DD:
            continue
        if spec.max_conductance_band is not None and not _in_band(sys, spec.max_conductance_band):
            continue
        logger.debug(f"{label}: accepted after {attempt} attempts")
        return sys, x_true

    raise GenerationError(
        f"band unsatisfiable: no system with n={spec.n} met the constraints "
        f"within the budget of {budget} attempts"
    )


def generate_sdd(n: int, seed: int = 0, density: float = 0.5, weight_range: Tuple[float, float] = (1.0, 100.0)) -> Tuple[LinearSystem, np.ndarray]:
    """
    Random weighted-graph system that stays diagonally dominant after the
    supply conductances are subtracted, so it maps onto resistors only.
    """
    from app.linsys.reference import graph_laplacian_system

    if n < 1:
        raise GenerationError(f"n must be positive, got {n}")
    rng = np.random.default_rng(seed)
    lo, hi = weight_range
    W = np.triu(rng.uniform(lo, hi, (n, n)) * (rng.random((n, n)) < density), 1)
    W = W + W.T
    degree = W.sum(axis=0)
    # |b_i| <= (d_i + 2 deg_i) / 2 for |x| <= 0.5, so d_i >= 0.3 deg_i covers |b_i| / 4
    diagonal = rng.uniform(0.5, 1.5, n) * degree + rng.uniform(lo, hi, n)
    vlo, vhi = STUDY_DEFAULTS["value_range"]
    x_true = rng.uniform(vlo, vhi, n)
    sys = graph_laplacian_system(W, diagonal, x_true, f"sdd-n{n}-s{seed}")
    return sys, x_true
