from app.analysis import acceptance
from app.analysis.acceptance import (
    QUICK,
    check_design_speedup,
    check_dynamic_demo,
    check_opamp_tradeoff,
    check_spectrum_identity,
    run_acceptance_suite,
)
from app.config import Settings, use_settings
from app.mapping import proposed
from app.mapping.proposed import TransformedSystem


def test_quick_suite_passes():
    report = run_acceptance_suite(quick=True, seed=0)
    failed = [c for c in report["checks"] if not c["passed"]]
    assert failed == []
    assert report["passed"] is True
    assert [c["name"] for c in report["checks"]] == [name for name, _ in acceptance.CHECKS]


def test_sign_flip_in_transform_is_caught(monkeypatch):
    original = proposed.transform

    def flipped(sys, Ks, D):
        ts = original(sys, Ks, D)
        return TransformedSystem(ts.K_A, -ts.K_B, ts.K_s, ts.D)

    monkeypatch.setattr(proposed, "transform", flipped)
    passed, detail = check_spectrum_identity(QUICK, 0)
    assert not passed


def test_raising_check_counts_as_failure(monkeypatch):
    def broken(plan, seed):
        raise RuntimeError("boom")

    monkeypatch.setattr(acceptance, "CHECKS", [("broken", broken)])
    report = run_acceptance_suite(quick=True)
    assert report["passed"] is False
    assert report["checks"][0]["detail"] == "RuntimeError: boom"


def test_dynamic_demo_check():
    passed, detail = check_dynamic_demo(QUICK, 0)
    assert passed, detail
    for name in ("LTC2050", "AD712", "LTC6268"):
        assert name in detail

    use_settings(Settings(default_opamp="LTC6268", readout="node", offset_mode="matched"))
    passed, detail = check_dynamic_demo(QUICK, 0)
    assert not passed
    assert detail.startswith("LTC6268 error above 0.01")


def test_study_checks_skip_in_quick_mode():
    assert check_opamp_tradeoff(QUICK, 0) == (True, "skipped in quick mode")
    assert check_design_speedup(QUICK, 0) == (True, "skipped in quick mode")
