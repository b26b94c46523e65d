"""
Behavioral opamp macromodels: offset, single dominant pole, slew limit, rails
"""
from dataclasses import dataclass, asdict
from typing import Dict, Any, Optional, List, Tuple, Union
import json
import logging
import math

import numpy as np

from app.config import get_settings, OPAMP_SPECS

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


class DeviceModelError(Exception):
    """Exception for invalid or unknown device models"""
    pass


@dataclass(frozen=True)
class OpAmpModel:
    name: str
    v_offset: float
    gbw: float
    slew: float
    rails: float = 5.0
    dc_gain: float = 1e6

    def __post_init__(self):
        if not self.gbw > 0:
            raise DeviceModelError(f"{self.name}: gbw must be positive, got {self.gbw}")
        if not self.slew > 0:
            raise DeviceModelError(f"{self.name}: slew must be positive, got {self.slew}")
        if not self.rails > 0:
            raise DeviceModelError(f"{self.name}: rails must be positive, got {self.rails}")
        if not self.dc_gain >= 1e4:
            raise DeviceModelError(f"{self.name}: dc_gain must be at least 1e4, got {self.dc_gain}")

    @property
    def tau(self) -> float:
        """Open-loop dominant pole time constant (s)"""
        return self.dc_gain / (2.0 * math.pi * self.gbw)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def ideal_model(rails: float = 1e3) -> OpAmpModel:
    """Near-ideal amplifier: no offset, very high gain and bandwidth"""
    return OpAmpModel("ideal", v_offset=0.0, gbw=1e15, slew=1e18, rails=rails, dc_gain=1e12)


OFFSET_MODES = ("spread", "matched")


def offset_factors(count: int, mode: Optional[str] = None, seed: Optional[int] = None) -> np.ndarray:
    """
    Per-amp multipliers on the model's datasheet offset.

    ``matched`` puts every amp at +v_offset. ``spread`` draws each amp from a
    normal with sigma v_offset/3, clipped to the datasheet bound, so parts of
    one model differ the way a bag of real parts does.
    """
    settings = get_settings()
    mode = settings.offset_mode if mode is None else mode
    seed = settings.offset_seed if seed is None else seed
    if mode == "matched":
        return np.ones(count)
    if mode == "spread":
        rng = np.random.default_rng(seed)
        return np.clip(rng.normal(0.0, 1.0 / 3.0, count), -1.0, 1.0)
    raise DeviceModelError(f"unknown offset mode '{mode}' (known: {', '.join(OFFSET_MODES)})")


@dataclass(frozen=True)
class AmpState:
    output: float = 0.0


def limit_output(previous: ArrayLike, proposed: ArrayLike, dt: float, slew: ArrayLike, rails: ArrayLike) -> ArrayLike:
    """Apply the slew-rate limit over dt, then clip to the rails"""
    step = np.clip(np.subtract(proposed, previous), -np.multiply(slew, dt), np.multiply(slew, dt))
    return np.clip(np.add(previous, step), -np.asarray(rails), np.asarray(rails))


def dynamic_amp_step(
    state: AmpState,
    v_plus: float,
    v_minus: float,
    dt: float,
    model: OpAmpModel,
) -> Tuple[AmpState, float, bool]:
    """
    Advance one amplifier by dt with a backward-Euler single-pole update.

    Returns:
        (new state, output voltage, saturated flag)
    """
    if dt <= 0:
        raise DeviceModelError(f"dt must be positive, got {dt}")
    target = model.dc_gain * (v_plus + model.v_offset - v_minus)
    r = dt / model.tau
    unlimited = (state.output + r * target) / (1.0 + r)
    v_out = float(limit_output(state.output, unlimited, dt, model.slew, model.rails))
    saturated = abs(v_out) >= model.rails
    return AmpState(v_out), v_out, saturated


class DeviceLibrary:
    """Named opamp models: the built-in table plus any JSON additions"""

    def __init__(self, rails: Optional[float] = None, dc_gain: Optional[float] = None):
        settings = get_settings()
        self.rails = settings.rails if rails is None else rails
        self.dc_gain = settings.dc_gain if dc_gain is None else dc_gain
        self.models: Dict[str, OpAmpModel] = {}
        for name, spec in OPAMP_SPECS.items():
            self.models[name] = OpAmpModel(
                name=name,
                v_offset=spec["v_offset"],
                gbw=spec["gbw"],
                slew=spec["slew"],
                rails=self.rails,
                dc_gain=self.dc_gain,
            )

    def names(self) -> List[str]:
        return sorted(self.models)

    def get(self, name: str) -> OpAmpModel:
        if name.lower() == "ideal":
            return ideal_model()
        for key, model in self.models.items():
            if key.lower() == name.lower():
                return model
        raise DeviceModelError(f"unknown opamp model '{name}' (known: {', '.join(self.names())})")

    def add(self, model: OpAmpModel) -> None:
        self.models[model.name] = model

    def load_json(self, path: str) -> List[str]:
        """
        Load models from a JSON table keyed by name.

        Each entry needs v_offset, gbw and slew; rails and dc_gain default to
        the library values.
        """
        try:
            with open(path, "r", encoding="utf-8") as f:
                table = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise DeviceModelError(f"cannot read opamp table {path}: {e}")

        loaded = []
        for name, spec in table.items():
            try:
                model = OpAmpModel(
                    name=name,
                    v_offset=float(spec["v_offset"]),
                    gbw=float(spec["gbw"]),
                    slew=float(spec["slew"]),
                    rails=float(spec.get("rails", self.rails)),
                    dc_gain=float(spec.get("dc_gain", self.dc_gain)),
                )
            except KeyError as e:
                raise DeviceModelError(f"{path}: model '{name}' is missing {e}")
            self.add(model)
            loaded.append(name)
        logger.info(f"Loaded {len(loaded)} opamp model(s) from {path}")
        return loaded

    def to_dict(self) -> Dict[str, Any]:
        return {name: self.models[name].to_dict() for name in self.names()}


_library: Optional[DeviceLibrary] = None


def get_device_library() -> DeviceLibrary:
    """Get or create the shared device library"""
    global _library
    if _library is None:
        _library = DeviceLibrary()
        extra = get_settings().opamp_library
        if extra:
            _library.load_json(extra)
    return _library


def reset_device_library() -> None:
    """Drop the shared library so the next get picks up changed settings"""
    global _library
    _library = None
