import math

import pytest

from app.database import RunStatus, StudyRecord, StudyRow, get_db, get_engine, init_db, record_study, row_status


@pytest.fixture
def db(tmp_path):
    engine = get_engine(f"sqlite:///{tmp_path}/studies.db")
    init_db(engine)
    session = next(get_db(engine))
    yield session
    session.close()


def _row(**changes):
    row = {
        "param": "alpha_factor", "value": 1.0, "seed": 0, "n": 5, "design": "proposed",
        "model": "AD712", "alpha": 2.5, "settle_time": 1e-5, "max_error": 0.002,
        "max_conductance": 500.0, "p_total": 12.0, "saturated": False, "censored": False,
        "error": None,
    }
    row.update(changes)
    return row


def test_row_status():
    assert row_status(_row()) == RunStatus.SETTLED
    assert row_status(_row(settle_time=math.nan)) == RunStatus.UNSETTLED
    assert row_status(_row(settle_time=None, saturated=True)) == RunStatus.SATURATED
    assert row_status(_row(censored=True, saturated=True)) == RunStatus.CENSORED
    assert row_status(_row(error="SimulationError: boom", censored=True)) == RunStatus.FAILED


def test_record_study(db):
    rows = [
        _row(seed=0),
        _row(seed=1, settle_time=math.nan),
        _row(seed=2, settle_time=None, saturated=True),
        _row(seed=3, censored=True),
        _row(seed=4, error="SimulationError: boom", max_error=math.nan),
    ]
    record = record_study(db, {"kind": "AlphaSweep", "n": 5}, rows, {"runs": 5})
    assert record.id is not None
    assert record.row_count == 5

    stored = db.query(StudyRecord).filter(StudyRecord.id == record.id).one()
    assert stored.kind == "AlphaSweep"
    assert stored.label is None

    by_seed = {row.seed: row for row in db.query(StudyRow).filter(StudyRow.study_id == record.id)}
    assert [by_seed[s].status for s in range(5)] == [
        RunStatus.SETTLED,
        RunStatus.UNSETTLED,
        RunStatus.SATURATED,
        RunStatus.CENSORED,
        RunStatus.FAILED,
    ]
    assert by_seed[1].settle_time is None
    assert by_seed[4].max_error is None
    assert by_seed[0].value == "1.0"
    assert by_seed[4].error == "SimulationError: boom"
