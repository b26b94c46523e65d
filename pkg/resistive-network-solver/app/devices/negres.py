"""
Opamp realization of a negative conductance between two nodes.

Two non-inverting gain-of-2 stages drive x_i' = 2x_i - x_j and x_j' = 2x_j - x_i
through conductances k into the nodes; two buffers feed the stage references so
no current is drawn from the nodes by the gain resistors.
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from app.devices.opamp import DeviceModelError, OpAmpModel

AMP_ROLES = ("buffer_i", "buffer_j", "gain_i", "gain_j")


def ideal_stage_outputs(x_i: float, x_j: float) -> Tuple[float, float]:
    return 2.0 * x_i - x_j, 2.0 * x_j - x_i


def element_currents(k: float, x_i: float, x_j: float) -> Tuple[float, float]:
    """Currents (uA) delivered into nodes i and j by an ideal element of magnitude k (uS)"""
    if k <= 0:
        raise DeviceModelError(f"element conductance must be positive, got {k}")
    return k * (x_i - x_j), k * (x_j - x_i)


# differential input of each amp, per role, as coefficients of (x_i, x_j)
_SX = np.array([
    [1.0, 0.0],
    [0.0, 1.0],
    [1.0, 0.0],
    [0.0, 1.0],
])

# and of the four amp outputs; equal gain resistors put v- midway between
# the stage output and the opposite buffer
_SY = np.array([
    [-1.0, 0.0, 0.0, 0.0],
    [0.0, -1.0, 0.0, 0.0],
    [0.0, -0.5, -0.5, 0.0],
    [-0.5, 0.0, 0.0, -0.5],
])


@dataclass(frozen=True)
class NegResRealization:
    k: float
    amp: OpAmpModel
    buffer: Optional[OpAmpModel] = None
    k_R: float = 100.0

    def __post_init__(self):
        if self.k <= 0:
            raise DeviceModelError(f"element conductance must be positive, got {self.k}")
        if self.k_R <= 0:
            raise DeviceModelError(f"gain resistor conductance must be positive, got {self.k_R}")

    @property
    def models(self) -> Tuple[OpAmpModel, ...]:
        buffer = self.buffer or self.amp
        return buffer, buffer, self.amp, self.amp

    @staticmethod
    def node_coefficients() -> np.ndarray:
        return _SX

    @staticmethod
    def output_coefficients() -> np.ndarray:
        return _SY

    def offsets(self) -> np.ndarray:
        return np.array([m.v_offset for m in self.models])

    def gains(self) -> np.ndarray:
        return np.array([m.dc_gain for m in self.models])

    def static_outputs(self, x_i: float, x_j: float) -> np.ndarray:
        """Steady amp outputs with the node voltages held fixed (finite gain and offset)"""
        G = self.gains()
        x = np.array([x_i, x_j])
        lhs = np.eye(4) - G[:, None] * _SY
        return np.linalg.solve(lhs, G * (_SX @ x + self.offsets()))

    def static_currents(self, x_i: float, x_j: float) -> Tuple[float, float]:
        y = self.static_outputs(x_i, x_j)
        return self.k * (y[2] - x_i), self.k * (y[3] - x_j)

    def dissipation(self, x_i: float, x_j: float, outputs: np.ndarray) -> Tuple[float, float]:
        """
        Power (uW) in the two k resistors and in the four gain resistors.
        """
        b_i, b_j, g_i, g_j = outputs
        p_k = self.k * ((g_i - x_i) ** 2 + (g_j - x_j) ** 2)
        p_gain = 0.5 * self.k_R * ((g_i - b_j) ** 2 + (g_j - b_i) ** 2)
        return float(p_k), float(p_gain)
