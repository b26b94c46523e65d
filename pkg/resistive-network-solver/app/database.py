"""
Study persistence: models and connection management
"""
from sqlalchemy import create_engine, Column, Integer, String, Float, DateTime, Boolean, Text, ForeignKey, Enum as SQLEnum
from sqlalchemy.engine import Engine
from sqlalchemy.orm import declarative_base, sessionmaker, relationship, Session
from datetime import datetime
from typing import Any, Dict, Generator, Iterable, Optional
import enum
import json
import logging
import math
import os

from app.config import get_settings

logger = logging.getLogger(__name__)

# Base class for models
Base = declarative_base()


class RunStatus(str, enum.Enum):
    SETTLED = "settled"
    UNSETTLED = "unsettled"
    SATURATED = "saturated"
    CENSORED = "censored"
    FAILED = "failed"


class StudyRecord(Base):
    """One executed parameter study"""
    __tablename__ = "studies"

    id = Column(Integer, primary_key=True, index=True)
    kind = Column(String(32), index=True, nullable=False)
    label = Column(String(128), nullable=True)
    spec_json = Column(Text, nullable=False)
    summary_json = Column(Text, nullable=True)
    row_count = Column(Integer, default=0)
    created_at = Column(DateTime, default=datetime.utcnow)
    updated_at = Column(DateTime, default=datetime.utcnow, onupdate=datetime.utcnow)

    rows = relationship("StudyRow", back_populates="study", cascade="all, delete-orphan")

    def __repr__(self):
        return f"<StudyRecord {self.kind} {self.label or self.id}: {self.row_count} rows>"


class StudyRow(Base):
    """One simulated system inside a study"""
    __tablename__ = "study_rows"

    id = Column(Integer, primary_key=True, index=True)
    study_id = Column(Integer, ForeignKey("studies.id"), index=True, nullable=False)
    param = Column(String(32), nullable=False)
    value = Column(String(64), nullable=False)
    seed = Column(Integer, nullable=False)
    n = Column(Integer, nullable=False)
    design = Column(String(16), nullable=False)
    model = Column(String(32), nullable=True)
    alpha = Column(Float, nullable=True)
    settle_time = Column(Float, nullable=True)  # seconds after the supply step
    max_error = Column(Float, nullable=True)
    max_conductance = Column(Float, nullable=True)
    p_total = Column(Float, nullable=True)
    saturated = Column(Boolean, default=False)
    status = Column(SQLEnum(RunStatus), default=RunStatus.SETTLED)
    error = Column(Text, nullable=True)

    study = relationship("StudyRecord", back_populates="rows")

    def __repr__(self):
        return f"<StudyRow {self.param}={self.value} seed={self.seed}: {self.status}>"


_engines: Dict[str, Engine] = {}


def get_engine(url: Optional[str] = None) -> Engine:
    """Get or create the engine for a database URL"""
    url = url or get_settings().database_url
    if url not in _engines:
        if url.startswith("sqlite:///./"):
            # Ensure data directory exists
            os.makedirs(os.path.dirname(url[len("sqlite:///"):]) or ".", exist_ok=True)
        _engines[url] = create_engine(
            url,
            connect_args={"check_same_thread": False} if "sqlite" in url else {}
        )
    return _engines[url]


def init_db(engine: Optional[Engine] = None) -> None:
    """Initialize database tables"""
    Base.metadata.create_all(bind=engine or get_engine())


def get_db(engine: Optional[Engine] = None) -> Generator[Session, None, None]:
    """Get database session"""
    SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine or get_engine())
    db = SessionLocal()
    try:
        yield db
    finally:
        db.close()


def _clean(value: Any) -> Any:
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def row_status(row: Dict[str, Any]) -> RunStatus:
    if row.get("error"):
        return RunStatus.FAILED
    if row.get("censored"):
        return RunStatus.CENSORED
    if row.get("saturated"):
        return RunStatus.SATURATED
    if _clean(row.get("settle_time")) is None:
        return RunStatus.UNSETTLED
    return RunStatus.SETTLED


def record_study(
    db: Session,
    spec: Dict[str, Any],
    rows: Iterable[Dict[str, Any]],
    summary: Optional[Dict[str, Any]] = None,
) -> StudyRecord:
    """Store a study with its rows; returns the committed record"""
    rows = list(rows)
    record = StudyRecord(
        kind=str(spec.get("kind")),
        label=spec.get("label") or None,
        spec_json=json.dumps(spec, default=str),
        summary_json=json.dumps(summary, default=str) if summary is not None else None,
        row_count=len(rows),
    )
    for row in rows:
        record.rows.append(StudyRow(
            param=str(row.get("param")),
            value=str(row.get("value")),
            seed=int(row.get("seed", 0)),
            n=int(row.get("n", 0)),
            design=str(row.get("design", "")),
            model=row.get("model"),
            alpha=_clean(row.get("alpha")),
            settle_time=_clean(row.get("settle_time")),
            max_error=_clean(row.get("max_error")),
            max_conductance=_clean(row.get("max_conductance")),
            p_total=_clean(row.get("p_total")),
            saturated=bool(row.get("saturated", False)),
            status=row_status(row),
            error=row.get("error") or None,
        ))
    db.add(record)
    db.commit()
    logger.info(f"Recorded study {record.kind} with {len(rows)} rows (id={record.id})")
    return record
