"""
Settling time: the instant after which every node stays inside the band
around the operating point
"""
from typing import Optional

import numpy as np


def band_tolerance(x_dc: np.ndarray, band: float, floor: float) -> np.ndarray:
    return np.maximum(band * np.abs(x_dc), floor)


def settling_time(
    times: np.ndarray,
    values: np.ndarray,
    x_dc: np.ndarray,
    band: float = 0.01,
    floor: float = 1e-3,
    step_time: float = 0.0,
) -> Optional[float]:
    """
    Smallest sampled t >= step_time such that all later samples of all nodes
    lie within max(band*|x_dc|, floor) of x_dc. None if the final sample is
    still out of band.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    window = times >= step_time
    if not window.any():
        return None
    t = times[window]
    tol = band_tolerance(np.asarray(x_dc, dtype=float), band, floor)
    # NaN counts as outside
    outside = ~np.all(np.abs(values[window] - x_dc) <= tol, axis=1)
    if outside[-1]:
        return None
    if not outside.any():
        return float(t[0])
    last = int(np.nonzero(outside)[0][-1])
    return float(t[last + 1])
