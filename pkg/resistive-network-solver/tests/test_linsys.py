import numpy as np
import pytest
from scipy import sparse

from app.linsys import (
    GenerationError,
    GeneratorSpec,
    LinearSystem,
    LinearSystemError,
    SystemClass,
    classify,
    generate_random,
    generate_sdd,
    normalize_unsymmetric,
    passivity_margins,
    supply_conductances,
    three_node_system,
    validate,
    worst_asymmetry,
)
from app.linsys.reference import DEMO_SOLUTION


def test_system_shape_checks():
    with pytest.raises(LinearSystemError):
        LinearSystem(np.ones((2, 3)), np.ones(2))
    with pytest.raises(LinearSystemError):
        LinearSystem(np.eye(3), np.ones(2))


def test_system_accepts_sparse_and_is_read_only():
    sys = LinearSystem(sparse.eye(3, format="csr") * 2.0, [1, 2, 3])
    assert sys.n == 3
    assert sys.A[1, 1] == 2.0
    with pytest.raises(ValueError):
        sys.A[0, 0] = 5.0


def test_scaling_keeps_solution(demo):
    sys, x = demo
    np.testing.assert_allclose(sys.scaled(7.5).solve_dense(), x, rtol=1e-12)
    assert sys.scaled(2.0).scaled(3.0).metadata["alpha"] == 6.0


def test_three_node_matrix():
    sys = three_node_system()
    np.testing.assert_array_equal(sys.A, [[6, -2, -3], [-2, 6, -4], [-3, -4, 12]])
    np.testing.assert_allclose(sys.solve_dense(), [0.1, 0.2, 0.3])


def test_supply_conductances():
    np.testing.assert_allclose(supply_conductances(np.array([4.0, -2.0, 0.0]), 4.0), [1.0, 0.5, 0.0])


def test_validate_reports_asymmetry_and_non_finite():
    A = np.array([[2.0, 1.0], [1.5, 3.0]])
    assert validate(LinearSystem(A, [1, 1])) == ["asymmetry at (0,1): 1.0 vs 1.5"]
    assert worst_asymmetry(A) == (0, 1, 0.5)

    bad = np.array([[np.nan, 0.0], [0.0, 1.0]])
    assert validate(LinearSystem(bad, [1, 1]))[0] == "non-finite A at (0,0)"
    assert validate(three_node_system()) == []


def test_classify_domains(demo, sdd):
    sys, _ = demo
    assert classify(sys) == SystemClass.SPD_NOT_DD
    assert classify(sys.negated()) == SystemClass.SYMMETRIC_NON_PD
    assert classify(sdd[0]) == SystemClass.SDD
    assert classify(LinearSystem(np.array([[2.0, 1.0], [0.0, 2.0]]), [1, 1])) == SystemClass.UNSYMMETRIC


def test_passivity_margins_sign(sdd, demo):
    sys, _ = sdd
    assert (passivity_margins(sys, supply_conductances(sys.b)) >= 0).all()
    sys, _ = demo
    assert (passivity_margins(sys, supply_conductances(sys.b)) < 0).any()


def test_normalize_unsymmetric():
    A = np.array([[2.0, 1.0], [0.0, 3.0]])
    x = np.array([0.2, -0.1])
    sys = normalize_unsymmetric(A, A @ x)
    np.testing.assert_allclose(sys.A, sys.A.T)
    np.testing.assert_allclose(sys.solve_dense(), x, rtol=1e-12)
    assert sys.metadata["singular"] is False

    singular = normalize_unsymmetric(np.array([[1.0, 1.0], [1.0, 1.0]]), np.array([1.0, 1.0]))
    assert singular.metadata["singular"] is True


def test_generate_random_spectrum_and_reproducibility():
    spec = GeneratorSpec(n=8, seed=3)
    sys, x = generate_random(spec)
    eig = np.linalg.eigvalsh(sys.A)
    assert eig[0] == pytest.approx(10.0)
    assert eig[-1] == pytest.approx(1000.0)
    assert sys.label == "rand-n8-s3"
    np.testing.assert_allclose(sys.b, sys.A @ x)
    np.testing.assert_array_equal(generate_random(spec)[0].A, sys.A)
    assert ((x >= -0.5) & (x <= 0.5)).all()


def test_generate_random_sparse_stays_in_band():
    sys, _ = generate_random(GeneratorSpec(n=10, density=0.3, seed=5))
    eig = np.linalg.eigvalsh(sys.A)
    assert eig[0] >= 10.0 - 1e-9
    assert eig[-1] <= 1000.0 + 1e-9


def test_generate_random_non_sdd():
    sys, _ = generate_random(GeneratorSpec(n=5, seed=1, require_non_sdd=True))
    assert classify(sys) == SystemClass.SPD_NOT_DD


def test_unsatisfiable_band():
    spec = GeneratorSpec(n=4, seed=0, max_conductance_band=(1e9, 1e-12), budget=5)
    with pytest.raises(GenerationError, match="band unsatisfiable"):
        generate_random(spec)


def test_generator_spec_validation():
    with pytest.raises(GenerationError):
        GeneratorSpec(n=0)
    with pytest.raises(GenerationError):
        GeneratorSpec(n=3, density=0.0)
    with pytest.raises(GenerationError):
        GeneratorSpec(n=3, eig_min=5.0, eig_max=1.0)


def test_generate_sdd_is_diagonally_dominant():
    for seed in range(5):
        sys, x = generate_sdd(7, seed=seed)
        assert classify(sys) == SystemClass.SDD
        np.testing.assert_allclose(sys.solve_dense(), x, rtol=1e-9)


def test_demo_solution(demo):
    sys, x = demo
    np.testing.assert_allclose(sys.solve_dense(), DEMO_SOLUTION, rtol=1e-12)
    assert sys.label == "demo5"
