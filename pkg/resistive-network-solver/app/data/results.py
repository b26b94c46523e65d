"""
Result files: networks, reports and trajectories
"""
from typing import Any, Dict
import json
import logging
import os

import numpy as np

from app.mapping.network import Network
from app.simulate.transient import SimResult

logger = logging.getLogger(__name__)


def _default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if hasattr(value, "to_dict"):
        return value.to_dict()
    return str(value)


def to_json(data: Any) -> str:
    return json.dumps(data, indent=2, default=_default)


def write_json(data: Any, path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(to_json(data))
    logger.info(f"Wrote {path}")


def network_document(net: Network, transformed=None, layout=None) -> Dict[str, Any]:
    """Network with, for the proposed design, its K_A/K_B blocks and cross-point layout"""
    doc = net.to_dict()
    doc["summary"] = net.summary()
    if transformed is not None:
        doc["transformed"] = {
            "K_A": transformed.K_A.tolist(),
            "K_B": transformed.K_B.tolist(),
            "K_s": np.diag(transformed.K_s).tolist(),
            "D": transformed.D.tolist(),
            "anchor": transformed.anchor,
            "notes": list(transformed.notes),
        }
    if layout is not None:
        doc["layout"] = layout.to_dict()
    return doc


def result_document(result: SimResult, include_trajectories: bool = False) -> Dict[str, Any]:
    doc = result.to_dict(include_trajectories=include_trajectories)
    doc["step_time"] = result.step_time
    doc["amp_labels"] = list(result.amp_labels)
    if result.amp_dc is not None:
        doc["amp_dc"] = result.amp_dc.tolist()
    return doc


def write_trajectories(result: SimResult, path: str) -> None:
    """Time, node voltages and amp outputs as CSV"""
    if not len(result.times):
        logger.warning(f"No trajectories to write to {path} (dc mode)")
    result.trajectories.to_csv(path, index=False, float_format="%.10g")
    logger.info(f"Wrote {path}")

