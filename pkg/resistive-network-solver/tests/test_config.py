import json

from app.config import COMPONENT_TABLE, OPAMP_SPECS, Settings, get_settings, load_settings, use_settings


def test_defaults():
    settings = Settings()
    assert settings.supply_voltage == 4.0
    assert settings.g_min_us == 0.01
    assert settings.g_max_us == 10000.0
    assert settings.error_floor == 1e-3
    assert settings.integrator == "backward_euler"


def test_env_prefix(monkeypatch):
    monkeypatch.setenv("RESMAP_SUPPLY_VOLTAGE", "3.0")
    assert Settings().supply_voltage == 3.0


def test_precedence_flags_env_file(tmp_path, monkeypatch):
    path = tmp_path / "resmap.json"
    path.write_text(json.dumps({"supply_voltage": 2.5, "rails": 6.0}))

    settings = load_settings(str(path))
    assert settings.supply_voltage == 2.5
    assert settings.rails == 6.0

    monkeypatch.setenv("RESMAP_RAILS", "7.0")
    assert load_settings(str(path)).rails == 7.0
    assert load_settings(str(path), rails=8.0, integrator=None).rails == 8.0


def test_use_settings_overrides_cache():
    use_settings(Settings(rails=9.0))
    assert get_settings().rails == 9.0
    use_settings(None)
    assert get_settings().rails == 5.0


def test_constant_tables():
    assert set(OPAMP_SPECS) == {"AD712", "LTC2050", "LTC6268"}
    assert COMPONENT_TABLE["proposed"]["variable_resistors"](3) == 19
    assert COMPONENT_TABLE["preliminary"]["analog_switches"](3) == 21
