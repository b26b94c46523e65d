"""
Active device models
"""
from app.devices.opamp import (
    OpAmpModel,
    AmpState,
    DeviceModelError,
    DeviceLibrary,
    dynamic_amp_step,
    limit_output,
    ideal_model,
    offset_factors,
    OFFSET_MODES,
    get_device_library,
    reset_device_library,
)
from app.devices.negres import (
    AMP_ROLES,
    NegResRealization,
    ideal_stage_outputs,
    element_currents,
)

__all__ = [
    "OpAmpModel",
    "AmpState",
    "DeviceModelError",
    "DeviceLibrary",
    "dynamic_amp_step",
    "limit_output",
    "ideal_model",
    "offset_factors",
    "OFFSET_MODES",
    "get_device_library",
    "reset_device_library",
    "AMP_ROLES",
    "NegResRealization",
    "ideal_stage_outputs",
    "element_currents",
]
