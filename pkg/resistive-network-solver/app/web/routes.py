"""
JSON API routes
"""
from fastapi import APIRouter, HTTPException
from pydantic import BaseModel, Field
from typing import Any, Dict, Optional
import json

from app.analysis.engine import STATUS_ERROR, SolveEngine, qualified_error
from app.data.results import network_document, to_json
from app.data.systems import SystemDocument, parse_document
from app.devices import get_device_library
from app.linsys.system import LinearSystem
from app.mapping.components import dense_counts
from app.mapping.network import Design
from app.mapping.proposed import ANCHORED, SCALED_IDENTITY
from app.simulate.circuit import parse_fidelity
from app.simulate.transient import SimConfig, SimMode

router = APIRouter(prefix="/api")


class MapRequest(BaseModel):
    system: SystemDocument
    design: Design = Design.PROPOSED
    alpha: Optional[float] = Field(default=None, gt=0)
    policy: str = Field(default=ANCHORED, pattern=f"^({ANCHORED}|{SCALED_IDENTITY})$")
    beta: Optional[float] = Field(default=None, ge=0.5)


class SolveRequest(MapRequest):
    fidelity: str = "ideal"
    model: Optional[str] = None
    mode: SimMode = SimMode.TRANSIENT
    t_end: Optional[float] = Field(default=None, gt=0)
    samples: Optional[int] = Field(default=None, ge=1, le=100000)


def _plain(data: Any) -> Any:
    """numpy scalars and arrays to plain JSON types"""
    return json.loads(to_json(data))


def _system(request: MapRequest) -> LinearSystem:
    if request.beta is not None and request.policy != SCALED_IDENTITY:
        raise HTTPException(status_code=400, detail="cli: beta is only valid with policy scaled_identity")
    try:
        return parse_document(request.system.model_dump(), "request")
    except Exception as e:
        raise HTTPException(status_code=400, detail=qualified_error(e))


@router.post("/map")
async def api_map(request: MapRequest):
    """Compile a system; returns the network, its summary and, for the proposed design, the layout"""
    system = _system(request)
    try:
        mapped = SolveEngine().map_system(system, request.design.value, request.alpha, request.policy, request.beta)
    except Exception as e:
        raise HTTPException(status_code=400, detail=qualified_error(e))
    return _plain(network_document(mapped["network"], mapped["transformed"], mapped["layout"]))


@router.post("/solve")
async def api_solve(request: SolveRequest):
    """Map, simulate and report"""
    system = _system(request)
    try:
        fidelity = parse_fidelity(request.fidelity, request.model)
    except Exception as e:
        raise HTTPException(status_code=400, detail=qualified_error(e))

    report = SolveEngine().solve_system(
        system,
        design=request.design.value,
        fidelity=fidelity,
        alpha=request.alpha,
        policy=request.policy,
        beta=request.beta,
        x_true=system.metadata.get("x_true"),
        mode=request.mode,
        sim=SimConfig(t_end=request.t_end, samples=request.samples),
    )
    if report["status"] == STATUS_ERROR:
        raise HTTPException(status_code=400, detail=report["error"])
    return _plain(report)


@router.get("/opamps")
async def api_opamps() -> Dict[str, Any]:
    """Opamp model library"""
    return get_device_library().to_dict()


@router.get("/components/{design}/{n}")
async def api_components(design: Design, n: int):
    """Dense worst-case component counts"""
    if n < 1:
        raise HTTPException(status_code=400, detail="n must be positive")
    return {"design": design.value, "n": n, **dense_counts(design.value, n)}
