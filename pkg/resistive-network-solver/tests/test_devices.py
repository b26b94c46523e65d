import json
import math

import numpy as np
import pytest

from app.config import Settings, use_settings
from app.devices import (
    AmpState,
    DeviceLibrary,
    DeviceModelError,
    NegResRealization,
    OpAmpModel,
    dynamic_amp_step,
    get_device_library,
    ideal_model,
    limit_output,
    offset_factors,
    reset_device_library,
)
from app.devices.negres import element_currents, ideal_stage_outputs


def test_tau_from_gain_bandwidth():
    model = get_device_library().get("AD712")
    assert model.tau == pytest.approx(1e6 / (2 * math.pi * 4e6))


def test_model_validation():
    with pytest.raises(DeviceModelError):
        OpAmpModel("bad", v_offset=0.0, gbw=0.0, slew=1e6)
    with pytest.raises(DeviceModelError):
        OpAmpModel("bad", v_offset=0.0, gbw=1e6, slew=1e6, dc_gain=10.0)


def test_amp_step_single_pole():
    model = OpAmpModel("t", v_offset=0.0, gbw=1e6, slew=1e9, rails=5.0, dc_gain=1e4)
    state, v_out, saturated = dynamic_amp_step(AmpState(), 1e-4, 0.0, model.tau, model)
    assert v_out == pytest.approx(0.5)
    assert state.output == v_out
    assert not saturated


def test_amp_step_slew_and_rails():
    model = get_device_library().get("AD712")
    state, v_out, saturated = dynamic_amp_step(AmpState(), 1.0, 0.0, 1e-8, model)
    assert v_out == pytest.approx(20e6 * 1e-8)
    assert not saturated

    for _ in range(100):
        state, v_out, saturated = dynamic_amp_step(state, 1.0, 0.0, 1e-7, model)
    assert v_out == model.rails
    assert saturated


def test_unity_buffer_rise_time():
    model = OpAmpModel("t", v_offset=0.0, gbw=4e6, slew=20e6)
    dt = 1.0 / (1000 * model.gbw)
    state, step = AmpState(), 1e-3
    outputs = []
    for _ in range(10000):
        state, v_out, _ = dynamic_amp_step(state, step, state.output, dt, model)
        outputs.append(v_out)
    outputs = np.array(outputs)
    t10 = (np.argmax(outputs >= 0.1 * step) + 1) * dt
    t90 = (np.argmax(outputs >= 0.9 * step) + 1) * dt
    assert t90 - t10 == pytest.approx(0.35 / model.gbw, rel=0.05)


def test_amp_step_rejects_bad_dt():
    with pytest.raises(DeviceModelError):
        dynamic_amp_step(AmpState(), 0.0, 0.0, 0.0, ideal_model())


def test_limit_output():
    assert limit_output(0.0, 10.0, 1e-6, 1e6, 5.0) == pytest.approx(1.0)
    assert limit_output(4.5, 10.0, 1e-6, 1e9, 5.0) == 5.0
    np.testing.assert_allclose(limit_output(np.zeros(2), np.array([-3.0, 0.2]), 1.0, 1.0, 5.0), [-1.0, 0.2])


def test_library_lookup():
    library = DeviceLibrary()
    assert library.names() == ["AD712", "LTC2050", "LTC6268"]
    assert library.get("ltc2050").v_offset == 3e-6
    assert library.get("Ideal").name == "ideal"
    with pytest.raises(DeviceModelError, match="unknown opamp model"):
        library.get("LM741")


def test_library_load_json(tmp_path):
    path = tmp_path / "amps.json"
    path.write_text(json.dumps({"OPA1": {"v_offset": 5e-5, "gbw": 8e6, "slew": 1e7}}))
    library = DeviceLibrary(rails=12.0)
    assert library.load_json(str(path)) == ["OPA1"]
    assert library.get("opa1").rails == 12.0

    path.write_text(json.dumps({"OPA2": {"gbw": 8e6}}))
    with pytest.raises(DeviceModelError, match="missing"):
        library.load_json(str(path))
    with pytest.raises(DeviceModelError):
        library.load_json(str(tmp_path / "missing.json"))


def test_shared_library_follows_settings(tmp_path):
    path = tmp_path / "amps.json"
    path.write_text(json.dumps({"OPA1": {"v_offset": 5e-5, "gbw": 8e6, "slew": 1e7}}))
    use_settings(Settings(rails=12.0, opamp_library=str(path)))
    reset_device_library()
    library = get_device_library()
    assert library.get("AD712").rails == 12.0
    assert "OPA1" in library.names()
    assert get_device_library() is library


def test_ideal_stage_outputs():
    assert ideal_stage_outputs(0.3, 0.1) == pytest.approx((0.5, -0.1))
    assert element_currents(10.0, 0.3, 0.1) == pytest.approx((2.0, -2.0))
    with pytest.raises(DeviceModelError):
        element_currents(0.0, 0.3, 0.1)


def test_realization_matches_ideal_element():
    real = NegResRealization(k=10.0, amp=ideal_model())
    outputs = real.static_outputs(0.3, 0.1)
    np.testing.assert_allclose(outputs, [0.3, 0.1, 0.5, -0.1], atol=1e-9)
    i_i, i_j = real.static_currents(0.3, 0.1)
    assert i_i == pytest.approx(2.0, rel=1e-6)
    assert i_j == pytest.approx(-2.0, rel=1e-6)


def test_realization_offset_shifts_current():
    model = get_device_library().get("AD712")
    real = NegResRealization(k=10.0, amp=model)
    i_i, _ = real.static_currents(0.3, 0.1)
    assert i_i != pytest.approx(2.0, rel=1e-6)
    assert i_i == pytest.approx(2.0, abs=0.1)


def test_dissipation():
    real = NegResRealization(k=10.0, amp=ideal_model(), k_R=100.0)
    p_k, p_gain = real.dissipation(0.3, 0.1, np.array([0.3, 0.1, 0.5, -0.1]))
    assert p_k == pytest.approx(0.8)
    assert p_gain == pytest.approx(16.0)


def test_realization_validation():
    with pytest.raises(DeviceModelError):
        NegResRealization(k=0.0, amp=ideal_model())
    with pytest.raises(DeviceModelError):
        NegResRealization(k=1.0, amp=ideal_model(), k_R=0.0)


def test_offset_factors():
    np.testing.assert_array_equal(offset_factors(4, "matched"), np.ones(4))

    spread = offset_factors(500, "spread", seed=3)
    assert np.abs(spread).max() <= 1.0
    assert abs(spread.mean()) < 0.05
    assert 0.25 < spread.std() < 0.4
    np.testing.assert_array_equal(spread, offset_factors(500, "spread", seed=3))
    assert not np.array_equal(spread, offset_factors(500, "spread", seed=4))

    with pytest.raises(DeviceModelError, match="offset mode"):
        offset_factors(4, "worst")


def test_offset_factors_follow_settings():
    use_settings(Settings(offset_mode="matched"))
    np.testing.assert_array_equal(offset_factors(3), np.ones(3))
