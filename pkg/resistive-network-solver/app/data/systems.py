"""
Linear system files: JSON documents and Matrix Market
"""
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union
import json
import logging
import os

import numpy as np
from pydantic import BaseModel, Field, ValidationError, field_validator
from scipy.io import mmread
from scipy.sparse import coo_matrix, issparse

from app.linsys.system import LinearSystem, LinearSystemError, worst_asymmetry

logger = logging.getLogger(__name__)

FORMAT_TAG = "resmap-system"
Number = Union[str, float, int]

_CONDUCTANCE_UNITS = {"uS", "µS", "microsiemens"}
_CURRENT_UNITS = {"uA", "µA", "microamperes"}


class SystemParseError(Exception):
    """Exception for malformed or invalid system files"""
    pass


def _number(value: Number) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ValueError(f"not a number: {value!r}")


def encode_number(value: float) -> str:
    """17 significant digits: enough to round-trip any double"""
    return format(float(value), ".17g")


class Units(BaseModel):
    A: str = "uS"
    b: str = "uA"

    @field_validator("A")
    @classmethod
    def conductance_unit(cls, v: str) -> str:
        if v not in _CONDUCTANCE_UNITS:
            raise ValueError(f"A must be in uS, got '{v}'")
        return v

    @field_validator("b")
    @classmethod
    def current_unit(cls, v: str) -> str:
        if v not in _CURRENT_UNITS:
            raise ValueError(f"b must be in uA, got '{v}'")
        return v


class DenseMatrix(BaseModel):
    kind: Literal["dense"]
    rows: List[List[Number]]


class CooMatrix(BaseModel):
    """Duplicate (i, j) entries are summed"""
    kind: Literal["coo"]
    entries: List[Tuple[int, int, Number]]
    index_base: Literal[0, 1] = 0
    symmetric: bool = Field(default=False, description="Entries give one triangle; mirror them")


class SystemDocument(BaseModel):
    format: Literal["resmap-system"] = FORMAT_TAG
    version: int = 1
    label: str = ""
    n: int
    units: Units = Field(default_factory=Units)
    A: Annotated[Union[DenseMatrix, CooMatrix], Field(discriminator="kind")]
    b: List[Number]
    x_true: Optional[List[Number]] = None
    metadata: Dict[str, Any] = Field(default_factory=dict)


def _dense(matrix: DenseMatrix, n: int) -> np.ndarray:
    if len(matrix.rows) != n:
        raise SystemParseError(f"A has {len(matrix.rows)} rows, expected {n}")
    A = np.zeros((n, n))
    for i, row in enumerate(matrix.rows):
        if len(row) != n:
            raise SystemParseError(f"A row {i} has {len(row)} entries, expected {n}")
        A[i] = [_number(v) for v in row]
    return A


def _coo(matrix: CooMatrix, n: int) -> np.ndarray:
    rows, cols, vals = [], [], []
    for k, (i, j, v) in enumerate(matrix.entries):
        i, j = i - matrix.index_base, j - matrix.index_base
        if not (0 <= i < n and 0 <= j < n):
            raise SystemParseError(f"A entry {k} index ({i},{j}) outside {n}x{n}")
        rows.append(i)
        cols.append(j)
        vals.append(_number(v))
        if matrix.symmetric and i != j:
            rows.append(j)
            cols.append(i)
            vals.append(_number(v))
    # coo_matrix sums duplicates on conversion
    return coo_matrix((vals, (rows, cols)), shape=(n, n)).toarray()


def _check_symmetric(A: np.ndarray, where: str) -> None:
    i, j, size = worst_asymmetry(A)
    if size > 0:
        raise SystemParseError(
            f"{where}: A is not symmetric; worst entry ({i},{j}): {float(A[i, j])!r} vs {float(A[j, i])!r} (difference {size:.3g})"
        )


def _build(A: np.ndarray, b: np.ndarray, label: str, metadata: Dict[str, Any], where: str) -> LinearSystem:
    _check_symmetric(A, where)
    try:
        return LinearSystem(A, b, label, metadata)
    except LinearSystemError as e:
        raise SystemParseError(f"{where}: {e}")


def _validation_message(e: ValidationError) -> str:
    first = e.errors()[0]
    location = ".".join(str(part) for part in first["loc"]) or "document"
    return f"at {location}: {first['msg']}"


def parse_document(data: Dict[str, Any], where: str = "<document>") -> LinearSystem:
    try:
        doc = SystemDocument.model_validate(data)
    except ValidationError as e:
        raise SystemParseError(f"{where}: {_validation_message(e)}")
    try:
        A = _dense(doc.A, doc.n) if isinstance(doc.A, DenseMatrix) else _coo(doc.A, doc.n)
        b = np.array([_number(v) for v in doc.b])
        metadata = dict(doc.metadata)
        if doc.x_true is not None:
            metadata["x_true"] = [_number(v) for v in doc.x_true]
    except ValueError as e:
        raise SystemParseError(f"{where}: {e}")
    except SystemParseError as e:
        raise SystemParseError(f"{where}: {e}")
    if len(b) != doc.n:
        raise SystemParseError(f"{where}: b has {len(b)} entries, expected {doc.n}")
    return _build(A, b, doc.label, metadata, where)


def _read_rhs(path: str) -> np.ndarray:
    if path.endswith(".mtx"):
        data = mmread(path)
        data = data.toarray() if issparse(data) else np.asarray(data)
        return np.asarray(data, dtype=float).ravel()
    return np.loadtxt(path, dtype=float, ndmin=1)


def parse_matrix_market(path: str, rhs_path: Optional[str] = None) -> LinearSystem:
    """
    Matrix Market matrix; symmetric storage is expanded by the reader.

    The right-hand side comes from rhs_path, or from a sibling file named
    <stem>_b.mtx; without either, b = A @ ones.
    """
    try:
        data = mmread(path)
    except Exception as e:
        raise SystemParseError(f"{path}: {e}")
    A = data.toarray() if issparse(data) else np.asarray(data)
    A = np.asarray(A, dtype=float)

    metadata: Dict[str, Any] = {"source": os.path.basename(path)}
    sibling = os.path.splitext(path)[0] + "_b.mtx"
    rhs_path = rhs_path or (sibling if os.path.exists(sibling) else None)
    if rhs_path:
        try:
            b = _read_rhs(rhs_path)
        except Exception as e:
            raise SystemParseError(f"{rhs_path}: {e}")
    else:
        b = A @ np.ones(A.shape[0])
        metadata["rhs"] = "A @ ones"
        metadata["x_true"] = [1.0] * A.shape[0]
        logger.info(f"{path}: no right-hand side given, using b = A @ ones")
    label = os.path.splitext(os.path.basename(path))[0]
    return _build(A, b, label, metadata, path)


def parse_system(path: str, rhs_path: Optional[str] = None) -> LinearSystem:
    """
    Read a system from a JSON document or a Matrix Market file.

    Raises:
        SystemParseError with the file position or field location of the problem
    """
    if not os.path.exists(path):
        raise SystemParseError(f"{path}: file not found")
    if path.endswith((".mtx", ".mm")):
        return parse_matrix_market(path, rhs_path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise SystemParseError(f"{path}:{e.lineno}:{e.colno}: {e.msg}")
    if not isinstance(data, dict):
        raise SystemParseError(f"{path}:1:1: expected a JSON object")
    return parse_document(data, path)


def serialize_system(
    sys: LinearSystem,
    x_true: Optional[np.ndarray] = None,
    sparse: bool = False,
) -> Dict[str, Any]:
    """JSON document for a system; numbers as 17-digit decimal strings"""
    A = sys.A
    if sparse:
        rows, cols = np.nonzero(A)
        matrix: Dict[str, Any] = {
            "kind": "coo",
            "entries": [[int(i), int(j), encode_number(A[i, j])] for i, j in zip(rows, cols)],
            "index_base": 0,
        }
    else:
        matrix = {"kind": "dense", "rows": [[encode_number(v) for v in row] for row in A]}
    metadata = {k: v for k, v in sys.metadata.items() if k != "x_true"}
    doc: Dict[str, Any] = {
        "format": FORMAT_TAG,
        "version": 1,
        "label": sys.label,
        "n": sys.n,
        "units": {"A": "uS", "b": "uA"},
        "A": matrix,
        "b": [encode_number(v) for v in sys.b],
        "metadata": json.loads(json.dumps(metadata, default=str)),
    }
    if x_true is None and "x_true" in sys.metadata:
        x_true = sys.metadata["x_true"]
    if x_true is not None:
        doc["x_true"] = [encode_number(v) for v in x_true]
    return doc


def write_system(sys: LinearSystem, path: str, x_true: Optional[np.ndarray] = None, sparse: bool = False) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(serialize_system(sys, x_true, sparse), f, indent=2)
