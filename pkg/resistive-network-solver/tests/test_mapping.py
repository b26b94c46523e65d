import numpy as np
import pytest

from app.linsys import GeneratorSpec, LinearSystem, generate_random, supply_conductances, three_node_system
from app.mapping import (
    ConductanceRangeError,
    Design,
    Element,
    ElementKind,
    MappingError,
    Network,
    auto_alpha,
    build_D,
    check_stability,
    column_sum_strategies,
    conductances_from_A,
    count_components,
    map_preliminary,
    map_proposed,
    max_mapped_conductance,
    dense_counts,
    transform,
)
from app.mapping.proposed import SCALED_IDENTITY


def _ideal_solution(net):
    return np.linalg.solve(net.nodal_matrix(include_supplies=True), net.supply_currents())


def test_conductances_from_three_node_matrix():
    offdiag, ground = conductances_from_A(three_node_system().A)
    assert offdiag == {(1, 2): 2.0, (1, 3): 3.0, (2, 3): 4.0}
    assert ground == {1: 1.0, 3: 5.0}


def test_preliminary_signs_and_solution(demo):
    sys, x = demo
    net = map_preliminary(sys)
    assert net.design == Design.PRELIMINARY
    assert net.node_count == sys.n + 1
    assert not net.is_passive
    np.testing.assert_allclose(_ideal_solution(net), x, rtol=1e-10)

    ks = supply_conductances(sys.b)
    np.testing.assert_allclose(net.nodal_matrix(), sys.A - np.diag(ks), atol=1e-12)
    for el in net.of_kind(ElementKind.SUPPLY_BRANCH):
        assert el.polarity == (1 if sys.b[el.i - 1] > 0 else -1)


def test_preliminary_rejects_bad_alpha(demo):
    with pytest.raises(MappingError):
        map_preliminary(demo[0], alpha=0.0)


def test_two_by_two_worked_example(two_by_two):
    net, ts, layout = map_proposed(two_by_two, alpha=1.0)
    np.testing.assert_allclose(ts.couplings(), [1.25, 0.875])
    np.testing.assert_allclose(ts.K_A, np.diag([3.5, 2.875]))
    np.testing.assert_allclose(ts.K_B, [[-1.25, -2.0], [-2.0, -0.875]])

    between = [(el.i, el.j, el.conductance) for el in net.elements if el.j != 0]
    assert between == [(1, 3, 1.25), (1, 4, 2.0), (2, 3, 2.0), (2, 4, 0.875)]
    ties = [(el.i, el.conductance) for el in net.of_kind(ElementKind.GROUND_TIE)]
    assert ties == [(1, 0.25), (3, 0.25)]
    supplies = [(el.i, el.polarity) for el in net.of_kind(ElementKind.SUPPLY_BRANCH)]
    assert supplies == [(1, 1), (3, -1), (2, 1), (4, -1)]

    assert net.is_passive
    np.testing.assert_allclose(_ideal_solution(net), [0.125, 0.1875, -0.125, -0.1875], rtol=1e-12)
    assert [el.role for el in layout.external_elements] == ["coupling", "coupling"]


def test_block_identities(demo):
    sys, _ = demo
    ks = supply_conductances(sys.b)
    ts = transform(sys, ks, build_D(sys.A, ks))
    np.testing.assert_allclose(ts.K_A - ts.K_B, sys.A - np.diag(ks), rtol=0, atol=1e-12)

    eig_block = np.sort(np.linalg.eigvalsh(ts.block_matrix()))
    eig_parts = np.sort(np.concatenate([
        np.linalg.eigvalsh(ts.K_A - ts.K_B),
        np.linalg.eigvalsh(ts.K_A + ts.K_B),
    ]))
    np.testing.assert_allclose(eig_block, eig_parts, atol=1e-9 * np.abs(eig_block).max())


def test_proposed_round_trip_random():
    for seed in range(3):
        sys, x = generate_random(GeneratorSpec(n=12, seed=seed))
        net, ts, _ = map_proposed(sys, g_max=np.inf)
        np.testing.assert_allclose(net.nodal_matrix(), ts.block_matrix(), atol=1e-9 * np.abs(ts.block_matrix()).max())
        nodes = _ideal_solution(net)
        np.testing.assert_allclose(nodes[:sys.n], x, atol=1e-9)
        np.testing.assert_allclose(nodes[sys.n:], -x, atol=1e-9)

        loaded = ts.loaded_matrix()
        np.testing.assert_allclose(net.nodal_matrix(include_supplies=True), loaded, atol=1e-9 * np.abs(loaded).max())


def test_stability_check(demo):
    sys, _ = demo
    net, ts, _ = map_proposed(sys)
    report = check_stability(ts)
    assert report["stable"] and report["pd_original"] and report["pd_sum"]

    net, ts, _ = map_proposed(sys.negated())
    report = check_stability(ts)
    assert not report["pd_original"]
    assert not report["stable"]
    assert any("unstable transformed system" in d for d in net.diagnostics)


def test_auto_alpha_hits_target(demo):
    sys, _ = demo
    alpha = auto_alpha(sys)
    net, _, _ = map_proposed(sys)
    assert net.alpha == pytest.approx(alpha)
    assert net.max_conductance() == pytest.approx(500.0)
    assert max_mapped_conductance(sys) * alpha == pytest.approx(500.0)


def test_alpha_invariance_of_solution(demo):
    sys, x = demo
    for alpha in (0.1, 1.0, 10.0):
        net, _, _ = map_proposed(sys, alpha=alpha)
        np.testing.assert_allclose(_ideal_solution(net)[:sys.n], x, rtol=1e-9)


def test_scaled_identity_policy(demo):
    sys, x = demo
    net, ts, _ = map_proposed(sys, policy=SCALED_IDENTITY, beta=1.0)
    d = np.diag(ts.D)
    assert np.allclose(d, d[0])
    assert check_stability(ts)["stable"]
    assert ts.anchor is None
    np.testing.assert_allclose(_ideal_solution(net)[:sys.n], x, rtol=1e-9)

    with pytest.raises(MappingError):
        map_proposed(sys, policy=SCALED_IDENTITY, beta=0.4)
    with pytest.raises(MappingError):
        map_proposed(sys, policy=SCALED_IDENTITY)


def test_sdd_maps_passive_with_anchor_clamp(sdd):
    sys, _ = sdd
    net, ts, _ = map_proposed(sys)
    assert net.is_passive
    assert (ts.couplings() >= 0).all()
    assert net.floating_nodes() == []

    preliminary = map_preliminary(sys)
    assert preliminary.is_passive


def test_device_range(demo):
    sys, _ = demo
    with pytest.raises(ConductanceRangeError, match="above device range"):
        map_proposed(sys, alpha=1e3)

    net, _, _ = map_proposed(sys, alpha=1.0, g_min=50.0)
    assert any("below device range" in d for d in net.diagnostics)


def test_floating_node_warning():
    A = np.array([[2.0, 0.0], [0.0, 2.0]])
    net = map_preliminary(LinearSystem(A, [4.0, 0.0]))
    # node 2 has a ground tie but no supply; still connected
    assert net.floating_nodes() == []

    floating = Network(3, (Element(ElementKind.GROUND_TIE, 1, 0, 1.0),), Design.PRELIMINARY)
    assert floating.floating_nodes() == [2]


def test_network_rejects_bad_elements():
    with pytest.raises(MappingError):
        Network(2, (Element(ElementKind.POSITIVE_RESISTOR, 1, 2, 1.0),), Design.PRELIMINARY)
    with pytest.raises(MappingError):
        Network(2, (Element(ElementKind.POSITIVE_RESISTOR, 1, 0, -1.0),), Design.PRELIMINARY)
    with pytest.raises(MappingError):
        Network(2, (Element(ElementKind.SUPPLY_BRANCH, 1, 0, 1.0),), Design.PRELIMINARY)


@pytest.mark.parametrize("n", [1, 3, 5, 10])
def test_dense_component_counts_match_closed_form(n):
    sys, _ = generate_random(GeneratorSpec(n=n, seed=n))
    networks = {"preliminary": map_preliminary(sys, g_max=np.inf), "proposed": map_proposed(sys, g_max=np.inf)[0]}
    for design, net in networks.items():
        counts = count_components(net).to_dict()
        expected = dense_counts(design, n)
        for key, value in expected.items():
            assert counts[key] == value, (design, n, key)


def test_dense_count_values():
    assert dense_counts("preliminary", 3) == {
        "variable_resistors": 15, "fixed_resistors": 24, "analog_switches": 21, "opamps": 24,
    }
    assert dense_counts("proposed", 3) == {
        "variable_resistors": 19, "fixed_resistors": 12, "analog_switches": 9, "opamps": 12,
    }


def test_active_counts(demo, two_by_two):
    net, _, _ = map_proposed(demo[0])
    counts = count_components(net)
    assert counts.negative_elements == len(net.negative_elements)
    assert counts.active_opamps == 4 * counts.negative_elements
    assert counts.dynamic_states == counts.active_opamps

    passive, _, _ = map_proposed(two_by_two, alpha=1.0)
    assert count_components(passive).active_opamps == 0


def test_column_sum_strategies(two_by_two):
    net, _, _ = map_proposed(two_by_two, alpha=1.0)
    report = column_sum_strategies(net)
    assert [r["node"] for r in report] == [1, 3]
    assert report[0]["terms"] == 3
    assert report[0]["assembly_additions"] == 2


def test_summary_and_dict(two_by_two):
    net, _, layout = map_proposed(two_by_two, alpha=1.0)
    summary = net.summary()
    assert summary["design"] == "proposed"
    assert summary["unknown_nodes"] == 4
    assert summary["elements"]["SupplyBranch"] == 4
    data = net.to_dict()
    assert data["elements"][-1]["polarity"] == "-"
    grid = layout.to_dict()
    assert grid["columns"][-2:] == ["xs+", "xs-"]
    assert grid["rows"][-1] == "gnd"


def test_build_D_examples():
    A = np.array([[5.0, 2.0], [2.0, 4.0]])
    np.testing.assert_allclose(np.diag(build_D(A, np.zeros(2))), [3.5, 3.0])
    np.testing.assert_allclose(np.diag(build_D(A, np.zeros(2), SCALED_IDENTITY, beta=0.5)), [3.5, 3.5])
    with pytest.raises(MappingError, match="0.5"):
        build_D(A, np.zeros(2), SCALED_IDENTITY, beta=0.25)
