"""
System, result and netlist files
"""
from app.data.systems import (
    SystemDocument,
    SystemParseError,
    parse_system,
    parse_document,
    parse_matrix_market,
    serialize_system,
    write_system,
)
from app.data.results import (
    network_document,
    result_document,
    to_json,
    write_json,
    write_trajectories,
)
from app.data.netlist import (
    NetlistError,
    export_netlist,
    parse_resistor_cards,
    resistor_elements,
)

__all__ = [
    "SystemDocument",
    "SystemParseError",
    "parse_system",
    "parse_document",
    "parse_matrix_market",
    "serialize_system",
    "write_system",
    "network_document",
    "result_document",
    "to_json",
    "write_json",
    "write_trajectories",
    "NetlistError",
    "export_netlist",
    "parse_resistor_cards",
    "resistor_elements",
]
