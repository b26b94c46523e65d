import json

import numpy as np
import pandas as pd
import pytest
from scipy.io import mmread

from app.data import (
    NetlistError,
    SystemParseError,
    export_netlist,
    network_document,
    parse_document,
    parse_resistor_cards,
    parse_system,
    resistor_elements,
    result_document,
    serialize_system,
    to_json,
    write_json,
    write_trajectories,
)
from app.devices import get_device_library
from app.linsys import LinearSystem
from app.mapping import Design, Element, ElementKind, Network, map_preliminary, map_proposed
from app.simulate import Fidelity, SimConfig, SimMode, transient

MM_MATRIX = """%%MatrixMarket matrix coordinate real symmetric
3 3 5
1 1 4.0
2 1 -1.0
2 2 4.0
3 2 -1.0
3 3 4.0
"""

MM_RHS = """%%MatrixMarket matrix array real general
3 1
1.0
2.0
3.0
"""


def _document(**changes):
    doc = {
        "format": "resmap-system",
        "version": 1,
        "label": "doc",
        "n": 2,
        "A": {"kind": "dense", "rows": [["5", "2"], ["2", "4"]]},
        "b": [1, 1],
    }
    doc.update(changes)
    return doc


def test_json_round_trip_is_bit_exact(tmp_path, system_file):
    A = np.array([[0.1 + 0.2, 1.0 / 3.0], [1.0 / 3.0, np.pi]])
    sys = LinearSystem(A, [1e-17, 2.0 / 7.0], "awkward")
    x = np.array([0.125, -1.0 / 9.0])
    loaded = parse_system(system_file(sys, x_true=x))
    assert np.array_equal(loaded.A, sys.A)
    assert np.array_equal(loaded.b, sys.b)
    assert loaded.metadata["x_true"] == list(x)
    assert loaded.label == "awkward"

    sparse = parse_document(serialize_system(sys, sparse=True))
    assert np.array_equal(sparse.A, sys.A)


def test_coo_duplicates_summed():
    doc = _document(A={"kind": "coo", "entries": [[0, 0, "1.5"], [0, 0, "2.5"], [0, 1, 1], [1, 0, 1], [1, 1, 3]]})
    sys = parse_document(doc)
    assert sys.A[0, 0] == 4.0


def test_coo_symmetric_one_based():
    doc = _document(A={"kind": "coo", "entries": [[1, 1, 5], [2, 1, 2], [2, 2, 4]], "index_base": 1, "symmetric": True})
    np.testing.assert_array_equal(parse_document(doc).A, [[5, 2], [2, 4]])


def test_coo_index_out_of_range():
    doc = _document(A={"kind": "coo", "entries": [[0, 2, 1.0]]})
    with pytest.raises(SystemParseError, match="outside 2x2"):
        parse_document(doc)


def test_document_validation_errors():
    with pytest.raises(SystemParseError, match="A is not symmetric; worst entry \\(0,1\\)"):
        parse_document(_document(A={"kind": "dense", "rows": [[5, 2], [1, 4]]}))
    with pytest.raises(SystemParseError, match="units.A"):
        parse_document(_document(units={"A": "S", "b": "uA"}))
    with pytest.raises(SystemParseError, match="rows, expected 3"):
        parse_document(_document(n=3))
    with pytest.raises(SystemParseError, match="b has 3 entries"):
        parse_document(_document(b=[1, 2, 3]))
    with pytest.raises(SystemParseError):
        parse_document(_document(A={"kind": "csr", "rows": []}))
    with pytest.raises(SystemParseError, match="not a number"):
        parse_document(_document(b=["one", 1]))


def test_malformed_json_reports_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{")
    with pytest.raises(SystemParseError, match=":1:2:"):
        parse_system(str(path))


def test_missing_file(tmp_path):
    with pytest.raises(SystemParseError, match="file not found"):
        parse_system(str(tmp_path / "nope.json"))


def test_matrix_market_default_rhs(tmp_path):
    path = tmp_path / "lap.mtx"
    path.write_text(MM_MATRIX)
    sys = parse_system(str(path))
    np.testing.assert_array_equal(sys.A, mmread(str(path)).toarray())
    assert sys.A[0, 1] == sys.A[1, 0] == -1.0
    np.testing.assert_array_equal(sys.b, [3.0, 2.0, 3.0])
    assert sys.metadata["x_true"] == [1.0, 1.0, 1.0]
    assert sys.label == "lap"


def test_matrix_market_sibling_rhs(tmp_path):
    path = tmp_path / "lap.mtx"
    path.write_text(MM_MATRIX)
    (tmp_path / "lap_b.mtx").write_text(MM_RHS)
    sys = parse_system(str(path))
    np.testing.assert_array_equal(sys.b, [1.0, 2.0, 3.0])
    assert "x_true" not in sys.metadata


def _one_by_one():
    return map_preliminary(LinearSystem(np.array([[2.0]]), [4.0], "one"))


def test_one_node_netlist():
    text = export_netlist(_one_by_one())
    lines = text.splitlines()
    resistors = [line for line in lines if line.startswith("R")]
    assert resistors == ["R0 1 0 1000000", "R1 1 xsp 1000000"]
    assert sum(1 for line in lines if line.startswith("V")) == 1
    assert lines[-2].startswith(".tran")
    assert lines[-1] == ".end"
    assert text == export_netlist(_one_by_one())


def test_netlist_dc_mode():
    text = export_netlist(_one_by_one(), cfg=SimConfig(mode=SimMode.DC))
    assert ".op" in text.splitlines()


def test_resistor_cards_round_trip(demo, two_by_two):
    for net in (map_proposed(two_by_two, alpha=1.0)[0], map_proposed(demo[0])[0], map_preliminary(demo[0])):
        parsed = parse_resistor_cards(export_netlist(net))
        expected = resistor_elements(net)
        assert len(parsed) == len(expected)
        for el, (kind, i, j, g) in zip(parsed, expected):
            assert (el.kind, el.i, el.j) == (kind, i, j)
            assert el.conductance == pytest.approx(g, rel=1e-12)


def test_ideal_negative_resistances_become_vccs(demo):
    net, _, _ = map_proposed(demo[0])
    text = export_netlist(net)
    vccs = [line for line in text.splitlines() if line.startswith("G")]
    assert len(vccs) == len(net.negative_elements)
    assert ".subckt" not in text


def _card_nodes(text):
    nodes = set()
    in_subckt = False
    for line in text.splitlines():
        if line.startswith(".subckt"):
            in_subckt = True
        elif line.startswith(".ends"):
            in_subckt = False
        elif in_subckt or not line or line[0] in "*.":
            continue
        else:
            tokens = line.split()
            width = {"X": 3, "R": 2, "V": 2, "G": 4}[line[0]]
            nodes.update(tokens[1:1 + width])
    return nodes


def test_dynamic_netlist_nodes(demo):
    net, _, _ = map_proposed(demo[0])
    fidelity = Fidelity.dynamic(get_device_library().get("AD712"))
    text = export_netlist(net, fidelity)
    assert ".subckt OPAMP_AD712 inp inn out" in text
    negatives = len(net.negative_elements)
    assert sum(1 for line in text.splitlines() if line.startswith("X")) == 4 * negatives

    rails = {"xsp", "xsn"}
    expected = 1 + net.unknowns + len(rails) + 6 * negatives
    assert len(_card_nodes(text)) == expected


def test_netlist_rejects_unknown_kind():
    net = Network(2, (Element("Inductor", 1, 0, 1.0),), Design.PRELIMINARY)
    with pytest.raises(NetlistError):
        export_netlist(net)


def test_network_and_result_documents(tmp_path, two_by_two):
    net, ts, layout = map_proposed(two_by_two, alpha=1.0)
    doc = network_document(net, ts, layout)
    assert doc["transformed"]["K_s"] == [0.25, 0.25]
    assert doc["layout"]["rows"][-1] == "gnd"

    path = tmp_path / "out" / "network.json"
    write_json(doc, str(path))
    assert json.loads(path.read_text())["design"] == "proposed"

    result = transient(net, SimConfig(t_end=1e-5, samples=10))
    report = result_document(result, include_trajectories=True)
    assert json.loads(to_json(report))["trajectories"]["x1"][-1] == pytest.approx(0.125)

    csv = tmp_path / "traj.csv"
    write_trajectories(result, str(csv))
    frame = pd.read_csv(csv)
    assert list(frame.columns) == ["time", "x1", "x2", "x3", "x4"]


def test_to_json_handles_numpy():
    assert json.loads(to_json({"a": np.float64(1.5), "b": np.arange(2), "c": np.bool_(True)})) == {
        "a": 1.5, "b": [0, 1], "c": True,
    }
