import math

import numpy as np
import pandas as pd
import pytest

from app.analysis import (
    SolveEngine,
    error_metrics,
    nearest_rank,
    power_analytic,
    power_measured,
    qualified_error,
    slope_permutation_test,
)
from app.analysis.engine import STATUS_CONVERGED, STATUS_ERROR, STATUS_UNSTABLE
from app.data.systems import SystemParseError
from app.analysis.power import power_from_result
from app.devices import get_device_library
from app.linsys import GeneratorSpec, LinearSystem, generate_random
from app.mapping import count_components, map_proposed
from app.simulate import Fidelity, SimConfig, SimMode, dc_operating_point, transient


def test_error_metrics():
    metrics = error_metrics(np.array([1.01, 0.0]), np.array([1.0, 0.0]))
    assert metrics["max_rel_error"] == pytest.approx(0.01)
    assert metrics["rms_error"] == pytest.approx(math.sqrt(0.01 ** 2 / 2))


def test_error_metrics_floor():
    metrics = error_metrics(np.array([1e-4]), np.array([0.0]))
    assert metrics["max_rel_error"] == pytest.approx(0.1)
    assert error_metrics(np.array([1e-4]), np.array([0.0]), floor=1e-2)["max_rel_error"] == pytest.approx(0.01)
    with pytest.raises(ValueError):
        error_metrics(np.zeros(2), np.zeros(3))


def test_nearest_rank():
    assert nearest_rank([5, 1, 4, 2, 3], 50) == 3
    assert nearest_rank([5, 1, 4, 2, 3], 90) == 5
    assert nearest_rank([1.0, None, float("nan"), 2.0], 100) == 2.0
    assert nearest_rank([], 50) is None
    with pytest.raises(ValueError):
        nearest_rank([1.0], 0)


def test_slope_permutation_test():
    rng = np.random.default_rng(0)
    n = np.repeat([10, 20, 40], 10)
    df = pd.DataFrame({"n": n, "settle_time": 2.0 * n + rng.normal(0, 1.0, n.size)})
    result = slope_permutation_test(df)
    assert result["slope"] == pytest.approx(2.0, abs=0.1)
    assert result["p_value"] < 0.05
    assert result["rows"] == 30

    short = slope_permutation_test(pd.DataFrame({"n": [1, 2], "settle_time": [1.0, None]}))
    assert short["slope"] is None


def test_power_analytic_matches_measured(demo):
    sys, x = demo
    net, ts, _ = map_proposed(sys)
    nodes = dc_operating_point(net)
    counts = count_components(net)

    analytic = power_analytic(ts, x, counts=counts)
    measured = power_measured(net, nodes, counts=counts)
    assert analytic.p_total == pytest.approx(measured.p_total, rel=1e-9)
    assert analytic.p_neg_correction == pytest.approx(measured.p_neg_correction, rel=1e-9)
    assert analytic.p_gain_resistors == pytest.approx(measured.p_gain_resistors, rel=1e-9)
    assert analytic.p_supply_rhs == pytest.approx(2.0 * x @ ts.K_s @ x)
    assert analytic.p_neg_correction > 0


@pytest.mark.parametrize("mode", [SimMode.DC, pytest.param(SimMode.TRANSIENT, marks=pytest.mark.slow)])
def test_power_analytic_matches_simulated_dissipation(mode):
    fidelity = Fidelity.dynamic(get_device_library().get("AD712"))
    for seed in range(20):
        sys, _ = generate_random(GeneratorSpec(n=5, seed=seed))
        net, ts, _ = map_proposed(sys)
        result = transient(net, SimConfig(mode=mode, fidelity=fidelity))
        assert not result.saturated, seed
        counts = count_components(net)
        analytic = power_analytic(ts, result.x, counts=counts)
        measured = power_from_result(net, result, counts=counts)
        assert analytic.p_total == pytest.approx(measured.p_total, rel=0.05), seed


def test_power_passive_network(two_by_two):
    net, ts, _ = map_proposed(two_by_two, alpha=1.0)
    x = np.array([0.125, 0.1875])
    report = power_analytic(ts, x)
    assert report.p_neg_correction == 0.0
    assert report.p_gain_resistors == 0.0
    assert report.p_amp == 0.0

    data = report.to_dict()
    assert data["p_total"] == pytest.approx(report.p_total)
    assert data["p_signal"] == pytest.approx(report.p_total - report.p_sw)
    assert "assumption" in data["note"]

    with pytest.raises(ValueError):
        power_analytic(ts, np.zeros(3))
    with pytest.raises(ValueError):
        power_measured(net, np.zeros(2))


def test_engine_passive_system(sdd):
    sys, x = sdd
    report = SolveEngine().solve_system(sys, x_true=x)
    assert report["status"] == STATUS_CONVERGED
    assert report["settle"] == "immediate (passive)"
    assert report["passive"] is True
    assert report["classification"] == "SPD_DiagonallyDominant"
    assert report["max_error_vs_truth"] < 1e-9
    assert report["components"]["active_opamps"] == 0


def test_engine_active_system(demo):
    sys, x = demo
    engine = SolveEngine()
    report = engine.solve_system(sys, x_true=x)
    assert report["status"] == STATUS_CONVERGED
    assert report["stability"]["stable"]
    np.testing.assert_allclose(report["x"], x, rtol=1e-9)
    assert report["settle"].endswith("after the supply step")
    assert set(engine.last_run) == {"network", "transformed", "layout", "result", "config"}

    preliminary = engine.solve_system(sys, design="preliminary", x_true=x)
    assert preliminary["status"] == STATUS_CONVERGED
    assert preliminary["stability"] is None
    assert engine.last_run["transformed"] is None


def test_engine_unstable_system(demo):
    sys, _ = demo
    report = SolveEngine().solve_system(sys.negated())
    assert report["status"] == STATUS_UNSTABLE
    assert report["settle"] == "not settled"
    assert report["classification"] == "SymmetricNonPD"


def test_engine_dc_mode(demo):
    sys, x = demo
    report = SolveEngine().solve_system(sys, x_true=x, mode=SimMode.DC)
    assert report["status"] == STATUS_CONVERGED
    assert report["settle"] == "not simulated (dc mode)"


def test_engine_dynamic_dc_converges(demo):
    sys, x = demo
    for name in ("LTC2050", "AD712", "LTC6268"):
        fidelity = Fidelity.dynamic(get_device_library().get(name))
        report = SolveEngine().solve_system(sys, fidelity=fidelity, x_true=x, mode=SimMode.DC)
        assert report["status"] == STATUS_CONVERGED, name
        assert not any("operating point" in d for d in report["diagnostics"])
    assert report["fidelity"] == "dynamic(LTC6268)"


def test_engine_errors_are_qualified(demo):
    asymmetric = LinearSystem(np.array([[2.0, 1.0], [0.5, 2.0]]), [1.0, 1.0], "asym")
    report = SolveEngine().solve_system(asymmetric)
    assert report["status"] == STATUS_ERROR
    assert report["error"].startswith("linsys: asymmetry at (0,1)")

    engine = SolveEngine()
    report = engine.solve_system(demo[0], alpha=-1.0)
    assert report["status"] == STATUS_ERROR
    assert report["error"] == "mapping: alpha must be positive, got -1.0"
    assert engine.last_run is None


def test_qualified_error_names():
    assert qualified_error(SystemParseError("bad file")) == "io: bad file"
    assert qualified_error(ValueError("x")) == "ValueError: x"
