"""
Accuracy metrics and sweep statistics
"""
from typing import Dict, Any, Iterable, Optional
import math

import numpy as np
import pandas as pd

from app.config import get_settings


def error_metrics(x_dc: np.ndarray, x_true: np.ndarray, floor: Optional[float] = None) -> Dict[str, float]:
    """
    Per-node relative error against the reference solution, with the
    denominator floored at error_floor volts.
    """
    x_dc = np.asarray(x_dc, dtype=float)
    x_true = np.asarray(x_true, dtype=float)
    if x_dc.shape != x_true.shape:
        raise ValueError(f"length mismatch: {x_dc.shape} vs {x_true.shape}")
    floor = get_settings().error_floor if floor is None else floor
    if x_true.size == 0:
        return {"max_rel_error": 0.0, "rms_error": 0.0}
    rel = np.abs(x_dc - x_true) / np.maximum(np.abs(x_true), floor)
    return {
        "max_rel_error": float(rel.max()),
        "rms_error": float(np.sqrt(np.mean(rel ** 2))),
    }


def nearest_rank(values: Iterable[Optional[float]], percentile: float) -> Optional[float]:
    """Nearest-rank percentile; None and NaN are dropped"""
    data = sorted(
        float(v) for v in values
        if v is not None and not (isinstance(v, float) and math.isnan(v))
    )
    if not data:
        return None
    if not 0 < percentile <= 100:
        raise ValueError(f"percentile must be in (0, 100], got {percentile}")
    rank = max(1, math.ceil(percentile / 100.0 * len(data)))
    return data[rank - 1]


def slope_permutation_test(
    df: pd.DataFrame,
    x: str = "n",
    y: str = "settle_time",
    permutations: int = 999,
    seed: int = 0,
) -> Dict[str, Any]:
    """
    Regression slope of y on x against a shuffled control.

    p_value is the share of shuffled slopes at least as steep as the observed
    one; p > 0.05 means the trend is indistinguishable from no trend.
    """
    data = df[[x, y]].dropna()
    if len(data) < 3 or data[x].nunique() < 2:
        return {"slope": None, "p_value": None, "rows": int(len(data))}
    xs = data[x].to_numpy(dtype=float)
    ys = data[y].to_numpy(dtype=float)
    slope = float(np.polyfit(xs, ys, 1)[0])

    rng = np.random.default_rng(seed)
    steeper = 0
    for _ in range(permutations):
        shuffled = float(np.polyfit(xs, rng.permutation(ys), 1)[0])
        if abs(shuffled) >= abs(slope):
            steeper += 1
    return {
        "slope": slope,
        "p_value": (steeper + 1) / (permutations + 1),
        "rows": int(len(data)),
    }
