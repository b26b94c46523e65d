"""
SPICE netlist export of a compiled network.

Resistor cards carry ohms (1e6 / g for g in uS). Supply rails are PULSE voltage
sources stepping at step_time. Negative resistances are VCCS cards with ideal
fidelity and the four-amp element circuit with dynamic fidelity; the opamp
subcircuit is linear, so slew and rail limits are not part of the netlist.
"""
from typing import List, Optional, Tuple
import logging
import re

from app.config import get_settings
from app.mapping.network import Element, ElementKind, Network
from app.simulate.circuit import Fidelity
from app.simulate.transient import SimConfig, SimMode

logger = logging.getLogger(__name__)

RAIL_NODES = {1: "xsp", -1: "xsn"}
_CARD = re.compile(r"^(R\d+)\s+(\S+)\s+(\S+)\s+(\S+)\s*$", re.IGNORECASE)


class NetlistError(Exception):
    """Exception for networks or cards that cannot be expressed as a netlist"""
    pass


def _num(value: float) -> str:
    return format(float(value), ".17g")


def _ohms(conductance_us: float) -> str:
    return _num(1e6 / conductance_us)


def _opamp_subckt(name: str, v_offset: float, dc_gain: float, tau: float) -> List[str]:
    # single pole: gm = A0 into 1 ohm || tau farad, buffered by a unity VCVS
    return [
        f".subckt OPAMP_{name} inp inn out",
        f"VOS inx inp DC {_num(v_offset)}",
        f"GP 0 p1 inx inn {_num(dc_gain)}",
        "RP p1 0 1",
        f"CP p1 0 {_num(tau)}",
        "EO out 0 p1 0 1",
        ".ends",
    ]


def _negres_cards(idx: int, el: Element, amp: str, buffer: str, k_R: float) -> List[str]:
    i, j = str(el.i), str(el.j)
    bi, bj, gi, gj, mi, mj = (f"n{idx}_{suffix}" for suffix in ("bi", "bj", "gi", "gj", "mi", "mj"))
    r_gain = _ohms(k_R)
    r_k = _ohms(el.conductance)
    return [
        f"* negative resistance {idx}: -{_num(el.conductance)} uS between {i} and {j}",
        f"X{idx}BI {i} {bi} {bi} OPAMP_{buffer}",
        f"X{idx}BJ {j} {bj} {bj} OPAMP_{buffer}",
        f"X{idx}GI {i} {mi} {gi} OPAMP_{amp}",
        f"X{idx}GJ {j} {mj} {gj} OPAMP_{amp}",
        f"RF{idx}I {gi} {mi} {r_gain}",
        f"RG{idx}I {mi} {bj} {r_gain}",
        f"RF{idx}J {gj} {mj} {r_gain}",
        f"RG{idx}J {mj} {bi} {r_gain}",
        f"RK{idx}I {gi} {i} {r_k}",
        f"RK{idx}J {gj} {j} {r_k}",
    ]


def export_netlist(net: Network, fidelity: Optional[Fidelity] = None, cfg: Optional[SimConfig] = None) -> str:
    """
    Deterministic netlist text: cards follow the network's element order.

    Raises:
        NetlistError for element kinds without a card
    """
    fidelity = fidelity or Fidelity.ideal()
    cfg = (cfg or SimConfig()).resolve(net.design.value)
    k_R = get_settings().gain_resistor_us

    polarities = sorted({el.polarity for el in net.of_kind(ElementKind.SUPPLY_BRANCH)}, reverse=True)
    lines = [
        f"* resmap netlist: {net.label or 'network'} ({net.design.value}, {fidelity.label})",
        f"* nodes 1..{net.unknowns} are unknowns, 0 is ground; conductances in uS, values in ohms",
    ]

    models = []
    if fidelity.is_dynamic and net.negative_elements:
        amp = fidelity.model
        buffer = fidelity.buffer or amp
        for model in {m.name: m for m in (buffer, amp)}.values():
            models.append(model.name)
            lines.extend(_opamp_subckt(model.name, model.v_offset, model.dc_gain, model.tau))

    rise = min(1e-9, cfg.dt_max)
    for polarity in polarities:
        level = net.supply_pos if polarity > 0 else net.supply_neg
        node = RAIL_NODES[polarity]
        lines.append(
            f"V{node.upper()} {node} 0 PULSE(0 {_num(level)} {_num(cfg.step_time)} {_num(rise)} {_num(rise)} "
            f"{_num(10 * cfg.t_end)} {_num(20 * cfg.t_end)})"
        )

    for idx, el in enumerate(net.elements):
        if el.kind == ElementKind.SUPPLY_BRANCH:
            lines.append(f"R{idx} {el.i} {RAIL_NODES[el.polarity]} {_ohms(el.conductance)}")
        elif el.kind in (ElementKind.POSITIVE_RESISTOR, ElementKind.GROUND_TIE):
            lines.append(f"R{idx} {el.i} {el.j} {_ohms(el.conductance)}")
        elif el.kind == ElementKind.NEGATIVE_RESISTANCE:
            if fidelity.is_dynamic:
                buffer = (fidelity.buffer or fidelity.model).name
                lines.extend(_negres_cards(idx, el, fidelity.model.name, buffer, k_R))
            else:
                # current from i to j of -k * (V(i) - V(j))
                lines.append(f"G{idx} {el.i} {el.j} {el.i} {el.j} {_num(-el.conductance * 1e-6)}")
        else:
            raise NetlistError(f"element {idx}: no netlist card for kind {el.kind}")

    if SimMode(cfg.mode) == SimMode.DC:
        lines.append(".op")
    else:
        lines.append(f".tran {_num(cfg.dt_max)} {_num(cfg.t_end)}")
    lines.append(".end")
    logger.debug(f"netlist for {net.label or 'network'}: {len(lines)} lines, models {models}")
    return "\n".join(lines) + "\n"


def parse_resistor_cards(text: str) -> List[Element]:
    """
    Network resistors (R<index> cards) back as elements, in card order.

    Element-circuit resistors (RF, RG, RK) are skipped.
    """
    rails = {name: polarity for polarity, name in RAIL_NODES.items()}
    elements: List[Element] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(("*", ".")):
            continue
        match = _CARD.match(line)
        if not match:
            continue
        _, a, b, value = match.groups()
        try:
            g = 1e6 / float(value)
        except (ValueError, ZeroDivisionError):
            raise NetlistError(f"line {lineno}: bad resistance '{value}'")
        try:
            if b in rails:
                elements.append(Element(ElementKind.SUPPLY_BRANCH, int(a), 0, g, polarity=rails[b]))
            elif b == "0":
                elements.append(Element(ElementKind.GROUND_TIE, int(a), 0, g))
            else:
                elements.append(Element(ElementKind.POSITIVE_RESISTOR, int(a), int(b), g))
        except ValueError:
            raise NetlistError(f"line {lineno}: unexpected node names '{a}' '{b}'")
    return elements


def resistor_elements(net: Network) -> List[Tuple[ElementKind, int, int, float]]:
    """The network's resistor set in the shape parse_resistor_cards returns"""
    kinds = (ElementKind.SUPPLY_BRANCH, ElementKind.GROUND_TIE, ElementKind.POSITIVE_RESISTOR)
    return [(el.kind, el.i, el.j, el.conductance) for el in net.elements if el.kind in kinds]
