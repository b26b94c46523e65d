"""
Hand-built reference systems
"""
from typing import Dict, Optional, Tuple

import numpy as np

from app.linsys.system import LinearSystem

DEMO_SOLUTION = np.array([0.32, 0.21, 0.29, 0.37, -0.18])

# positive diagonal plus a rank-one term: SPD, far from diagonally dominant
_DEMO_DIAGONAL = np.array([40.0, 50.0, 45.0, 60.0, 55.0])
_DEMO_RANK_ONE = np.array([10.0, 8.0, -9.0, 7.0, 6.0])


def demo_matrix() -> np.ndarray:
    return np.diag(_DEMO_DIAGONAL) + np.outer(_DEMO_RANK_ONE, _DEMO_RANK_ONE)


def demo_system() -> Tuple[LinearSystem, np.ndarray]:
    """Five-unknown SPD system with a mixed-sign solution"""
    A = demo_matrix()
    return LinearSystem(A, A @ DEMO_SOLUTION, "demo5"), DEMO_SOLUTION.copy()


def three_node_conductances() -> Dict[Tuple[int, int], float]:
    """Branch conductances of the three-node example network (0 is ground)"""
    return {(0, 1): 1.0, (1, 2): 2.0, (1, 3): 3.0, (2, 3): 4.0, (0, 3): 5.0}


def matrix_from_conductances(branches: Dict[Tuple[int, int], float], n: int) -> np.ndarray:
    """Nodal conductance matrix of a passive network"""
    A = np.zeros((n, n))
    for (i, j), k in branches.items():
        for node in (i, j):
            if node:
                A[node - 1, node - 1] += k
        if i and j:
            A[i - 1, j - 1] -= k
            A[j - 1, i - 1] -= k
    return A


def three_node_system(x: Optional[np.ndarray] = None) -> LinearSystem:
    A = matrix_from_conductances(three_node_conductances(), 3)
    x = np.array([0.1, 0.2, 0.3]) if x is None else np.asarray(x, dtype=float)
    return LinearSystem(A, A @ x, "three-node")


def graph_laplacian_system(weights: np.ndarray, diagonal: np.ndarray, x: np.ndarray, label: str = "graph") -> LinearSystem:
    """
    A = L + diag(d) for a positively weighted graph.

    Such systems are diagonally dominant, so they map onto resistors only
    when the diagonal covers the supply conductances.
    """
    W = np.asarray(weights, dtype=float)
    W = 0.5 * (W + W.T)
    np.fill_diagonal(W, 0.0)
    if (W < 0).any():
        raise ValueError("graph weights must be non-negative")
    L = np.diag(W.sum(axis=0)) - W
    A = L + np.diag(np.asarray(diagonal, dtype=float))
    return LinearSystem(A, A @ np.asarray(x, dtype=float), label)
