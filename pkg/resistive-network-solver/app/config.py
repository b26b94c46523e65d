"""
Configuration management for the Resistive Network Solver
"""
from pydantic_settings import BaseSettings, SettingsConfigDict, JsonConfigSettingsSource
from pydantic import Field
from typing import Optional, Any
from functools import lru_cache


class Settings(BaseSettings):
    """Application settings loaded from flags, environment, .env and config file"""

    model_config = SettingsConfigDict(
        env_prefix="RESMAP_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        json_file="resmap.json",
        extra="ignore",
    )

    # Supplies and device range
    supply_voltage: float = Field(default=4.0, description="Magnitude of the x_s+/x_s- step supplies (V)")
    g_min_us: float = Field(default=0.01, description="Smallest realizable conductance (uS)")
    g_max_us: float = Field(default=10000.0, description="Largest realizable conductance (uS)")

    # Mapping
    target_max_conductance_us: float = Field(default=500.0, description="Auto alpha targets this max conductance")
    anchor_policy: str = Field(default="first", description="Grounded column of the D matrix: first | largest_b")
    clamp_anchor: bool = Field(default=True, description="Keep SDD anchor column passive")

    # Amplifiers
    default_opamp: str = Field(default="AD712")
    opamp_library: Optional[str] = Field(default=None, description="JSON table of extra opamp models")
    rails: float = Field(default=5.0, description="Opamp output saturation (+/- V)")
    dc_gain: float = Field(default=1e6)
    gain_resistor_us: float = Field(default=100.0, description="Gain resistor conductance, 10 kOhm")
    offset_mode: str = Field(default="spread", description="Per-amp input offsets: spread | matched")
    offset_seed: int = Field(default=0, description="Seed of the spread offset draw")
    readout: str = Field(default="differential", description="Proposed design readout: differential | node")

    # Simulation
    step_time: float = Field(default=1e-6, description="Supply step instant (s)")
    t_end_preliminary: float = Field(default=1e-2)
    t_end_proposed: float = Field(default=1e-3)
    samples_per_run: int = Field(default=2000)
    integrator: str = Field(default="backward_euler", description="backward_euler | radau | bdf")
    rtol: float = Field(default=1e-4)
    atol: float = Field(default=1e-6)
    convergence_band: float = Field(default=0.01)
    convergence_floor: float = Field(default=1e-3, description="Absolute settle floor (V)")
    error_floor: float = Field(default=1e-3, description="Denominator floor for relative errors (V)")

    # Numerics
    pd_tol: float = Field(default=1e-9, description="Relative eigenvalue tolerance for definiteness")
    symmetry_tol: float = Field(default=0.0, description="Relative asymmetry tolerance")
    rejection_budget: int = Field(default=10000)

    # Studies
    run_timeout: float = Field(default=30.0, description="Per-run wall clock limit (s)")
    workers: int = Field(default=0, description="Sweep worker processes, 0 = logical cores")
    amp_quiescent_uw: float = Field(default=15000.0, description="Assumed quiescent draw per opamp (uW)")
    switch_quiescent_uw: float = Field(default=1.0, description="Assumed quiescent draw per switch (uW)")

    # Persistence and logging
    database_url: str = Field(default="sqlite:///./data/studies.db")
    persist_studies: bool = Field(default=False)
    log_level: str = Field(default="INFO")

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls,
        init_settings,
        env_settings,
        dotenv_settings,
        file_secret_settings,
    ):
        return (
            init_settings,
            env_settings,
            dotenv_settings,
            JsonConfigSettingsSource(settings_cls),
            file_secret_settings,
        )


_active: Optional[Settings] = None


@lru_cache()
def _cached_settings() -> Settings:
    return Settings()


def get_settings() -> Settings:
    """Get the active settings: those installed by use_settings, else the cached defaults"""
    return _active if _active is not None else _cached_settings()


def use_settings(settings: Optional[Settings]) -> None:
    """Install settings for the whole process; None restores env/file defaults"""
    global _active
    _active = settings
    _cached_settings.cache_clear()


def load_settings(config_file: Optional[str] = None, **overrides: Any) -> Settings:
    """
    Build settings with explicit overrides on top of env and an optional config file.

    Overrides with value None are ignored so unset CLI flags fall through.
    """
    values = {k: v for k, v in overrides.items() if v is not None}
    if config_file is None:
        return Settings(**values)

    class FileSettings(Settings):
        model_config = SettingsConfigDict(json_file=config_file)

    return FileSettings(**values)


# Built-in opamp specifications (offset V, gain-bandwidth Hz, slew V/s)
OPAMP_SPECS = {
    "AD712": {
        "description": "General purpose JFET, balanced speed and accuracy",
        "v_offset": 1e-3,
        "gbw": 4e6,
        "slew": 20e6,
    },
    "LTC2050": {
        "description": "Zero-drift, precise and slow",
        "v_offset": 3e-6,
        "gbw": 3e6,
        "slew": 2e6,
    },
    "LTC6268": {
        "description": "High speed, larger offset",
        "v_offset": 2.5e-3,
        "gbw": 500e6,
        "slew": 400e6,
    },
}

# Dense worst-case component counts per design
COMPONENT_TABLE = {
    "preliminary": {
        "variable_resistors": lambda n: n * n + 2 * n,
        "fixed_resistors": lambda n: 2 * (n * n + n),
        "analog_switches": lambda n: (3 * n * n + 5 * n) // 2,
        "opamps": lambda n: 2 * (n * n + n),
    },
    "proposed": {
        "variable_resistors": lambda n: 2 * n * n + 1,
        "fixed_resistors": lambda n: 4 * n,
        "analog_switches": lambda n: 3 * n,
        "opamps": lambda n: 4 * n,
    },
}

# Parts inside one negative-resistance element circuit
ELEMENT_CIRCUIT = {
    "variable_resistors": 2,
    "fixed_resistors": 4,
    "analog_switches": 3,
    "opamps": 4,
}

# Study defaults
STUDY_DEFAULTS = {
    "eig_min": 10.0,
    "eig_max": 1000.0,
    "value_range": (-0.5, 0.5),
    "betas": [0.6, 1.0, 2.0, 4.0],
    "alphas": [0.1, 1.0, 10.0],
    "models": ["LTC2050", "AD712", "LTC6268"],
    "sizes": [20, 50, 100],
    "band_centers": [200.0, 400.0, 800.0],
    "band_tolerance": 0.1,
    "complexity_conductance": 800.0,
    "designs": ["preliminary", "proposed"],
    "replications": 10,
    # reference model accuracy and design speedup targets
    "accuracy_target": 0.01,
    "speedup_target": 10.0,
    "settle_ratio_band": (0.5, 2.0),
}
