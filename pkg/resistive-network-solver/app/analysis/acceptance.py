"""
Built-in acceptance suite run by `verify`.

The quick suite uses fewer and smaller instances and skips the dynamic
instability run and the small studies; the full suite uses the counts below.
"""
from typing import Dict, Any, Callable, List, Tuple
import logging
import time

import numpy as np

from app.analysis.metrics import error_metrics
from app.config import get_settings, STUDY_DEFAULTS
from app.devices import get_device_library
from app.linsys.generator import GeneratorSpec, generate_random, generate_sdd
from app.linsys.reference import DEMO_SOLUTION, demo_system
from app.linsys.system import supply_conductances
from app.mapping import proposed
from app.mapping.components import count_components, dense_counts
from app.mapping.preliminary import map_preliminary
from app.simulate.circuit import Fidelity
from app.simulate.dc import dc_operating_point, dc_state
from app.simulate.transient import SimConfig, transient

logger = logging.getLogger(__name__)

FULL = {
    "spectrum_instances": 50,
    "spectrum_max_n": 50,
    "round_trip_sizes": (5, 20, 100),
    "round_trip_instances": 100,
    "sdd_instances": 200,
    "dense_count_sizes": (1, 5, 10, 100),
    "alpha_instances": 10,
    "dynamic_demo": True,
    "studies": True,
    "study_replications": 6,
}

QUICK = {
    "spectrum_instances": 10,
    "spectrum_max_n": 12,
    "round_trip_sizes": (5, 20),
    "round_trip_instances": 10,
    "sdd_instances": 20,
    "dense_count_sizes": (1, 5, 10),
    "alpha_instances": 3,
    "dynamic_demo": False,
    "studies": False,
    "study_replications": 0,
}


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(float(np.abs(b).max()), 1e-300)
    return float(np.abs(a - b).max() / scale)


def check_spectrum_identity(plan: Dict[str, Any], seed: int) -> Tuple[bool, str]:
    """eig(block) = eig(K_A + K_B) U eig(K_A - K_B), and K_A - K_B has the spectrum of A - Ks"""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(plan["spectrum_instances"]):
        n = int(rng.integers(1, plan["spectrum_max_n"] + 1))
        sys, _ = generate_random(GeneratorSpec(n=n, seed=seed + k))
        ks = supply_conductances(sys.b)
        ts = proposed.transform(sys, ks, proposed.build_D(sys.A, ks))
        block = np.linalg.eigvalsh(ts.block_matrix())
        union = np.sort(np.concatenate([
            np.linalg.eigvalsh(ts.K_A + ts.K_B),
            np.linalg.eigvalsh(ts.K_A - ts.K_B),
        ]))
        original = np.linalg.eigvalsh(sys.A - np.diag(ks))
        worst = max(worst, _rel(block, union), _rel(np.linalg.eigvalsh(ts.K_A - ts.K_B), original))
    return worst <= 1e-8, f"worst relative eigenvalue mismatch {worst:.3g}"


def check_round_trip(plan: Dict[str, Any], seed: int) -> Tuple[bool, str]:
    """Ideal DC of the proposed network reproduces the dense solution, with -x on the mirror nodes"""
    sizes = plan["round_trip_sizes"]
    worst = 0.0
    for k in range(plan["round_trip_instances"]):
        n = sizes[k % len(sizes)]
        sys, _ = generate_random(GeneratorSpec(n=n, seed=seed + k))
        net, ts, _ = proposed.map_proposed(sys, g_max=np.inf)
        x_ref = sys.solve_dense()
        nodes = dc_operating_point(net)
        worst = max(worst, _rel(nodes[:n], x_ref), _rel(-nodes[n:], x_ref))
        if not np.allclose(net.nodal_matrix(), ts.block_matrix(), rtol=1e-12, atol=1e-9):
            return False, f"nodal stamps differ from the block matrix for n={n}"
    return worst <= 1e-6, f"worst relative error {worst:.3g}"


def check_dense_counts(plan: Dict[str, Any], seed: int) -> Tuple[bool, str]:
    """Structural counts on dense inputs equal the closed-form worst case"""
    mismatches = []
    for n in plan["dense_count_sizes"]:
        sys, _ = generate_random(GeneratorSpec(n=n, seed=seed + n))
        nets = {
            "preliminary": map_preliminary(sys, g_max=np.inf),
            "proposed": proposed.map_proposed(sys, g_max=np.inf)[0],
        }
        for design, net in nets.items():
            counts = count_components(net).to_dict()
            for name, expected in dense_counts(design, n).items():
                if counts[name] != expected:
                    mismatches.append(f"{design} n={n} {name}: {counts[name]} != {expected}")
    return not mismatches, "; ".join(mismatches[:5]) or "all counts match"


def check_alpha_invariance(plan: Dict[str, Any], seed: int) -> Tuple[bool, str]:
    worst = 0.0
    for k in range(plan["alpha_instances"]):
        sys, _ = generate_random(GeneratorSpec(n=5, seed=seed + k))
        solutions = []
        for alpha in (0.1, 1.0, 10.0):
            net, _, _ = proposed.map_proposed(sys, alpha=alpha, g_min=0.0, g_max=np.inf)
            solutions.append(dc_operating_point(net)[:sys.n])
        worst = max(worst, _rel(solutions[0], solutions[1]), _rel(solutions[2], solutions[1]))
    return worst <= 1e-9, f"worst relative change across alpha {worst:.3g}"


def check_sdd_passivity(plan: Dict[str, Any], seed: int) -> Tuple[bool, str]:
    """Diagonally dominant inputs compile to resistors only and settle at the first post-step sample"""
    failures = []
    cfg = SimConfig(t_end=1e-5, samples=20)
    for k in range(plan["sdd_instances"]):
        n = 1 + k % 12
        sys, _ = generate_sdd(n, seed=seed + k)
        for net in (map_preliminary(sys, g_max=np.inf), proposed.map_proposed(sys, g_max=np.inf)[0]):
            counts = count_components(net)
            if counts.active_opamps or counts.dynamic_states:
                failures.append(f"{sys.label} {net.design.value}: {counts.negative_elements} negative elements")
                continue
            result = transient(net, cfg)
            first = int(np.searchsorted(result.times, result.step_time))
            if result.settle_time != result.step_time or _rel(result.node_trajectories[first], result.x_dc) > 1e-9:
                failures.append(f"{sys.label} {net.design.value}: not settled at the first post-step sample")
    return not failures, "; ".join(failures[:5]) or f"{plan['sdd_instances']} instances passive"


def check_demo(plan: Dict[str, Any], seed: int) -> Tuple[bool, str]:
    sys, x = demo_system()
    net, _, _ = proposed.map_proposed(sys)
    error = _rel(net.solution(dc_operating_point(net)), DEMO_SOLUTION)
    if error > 1e-4:
        return False, f"demo solution off by {error:.3g}"
    detail = f"demo error {error:.3g}"
    if plan["dynamic_demo"]:
        negated, _, _ = proposed.map_proposed(sys.negated())
        model = get_device_library().get(get_settings().default_opamp)
        result = transient(negated, SimConfig(fidelity=Fidelity.dynamic(model)))
        if not result.saturated:
            return False, detail + "; negated demo did not saturate"
        detail += "; negated demo saturates"
    return True, detail


def check_dynamic_demo(plan: Dict[str, Any], seed: int) -> Tuple[bool, str]:
    """Every built-in model reaches an unsaturated operating point; errors follow the offsets"""
    sys, _ = demo_system()
    net, _, _ = proposed.map_proposed(sys)
    library = get_device_library()
    errors = {}
    for name in STUDY_DEFAULTS["models"]:
        state = dc_state(net, Fidelity.dynamic(library.get(name)))
        if state.saturated:
            return False, f"{name}: demo operating point saturates"
        errors[name] = error_metrics(net.solution(state.x), DEMO_SOLUTION)["max_rel_error"]

    detail = ", ".join(f"{name} {error:.3g}" for name, error in errors.items())
    reference = get_settings().default_opamp
    if reference in errors and errors[reference] > STUDY_DEFAULTS["accuracy_target"]:
        return False, f"{reference} error above {STUDY_DEFAULTS['accuracy_target']:g}: {detail}"
    by_offset = sorted(errors, key=lambda name: library.get(name).v_offset)
    ordered = all(errors[a] < errors[b] for a, b in zip(by_offset, by_offset[1:]))
    if not ordered:
        return False, f"errors not ordered by offset: {detail}"
    return True, detail


def check_opamp_tradeoff(plan: Dict[str, Any], seed: int) -> Tuple[bool, str]:
    """Precise parts settle slowest; fast parts are least accurate"""
    if not plan["studies"]:
        return True, "skipped in quick mode"
    from app.analysis.studies import StudyKind, StudySpec, run_study

    result = run_study(StudySpec(StudyKind.OPAMP_COMPARE, n=5, replications=plan["study_replications"], base_seed=seed), record=False)
    checks = result.checks
    detail = f"error order {checks['error_order']}, settle order {checks['settle_order']}"
    passed = (
        checks["error_order"] == ["LTC2050", "AD712", "LTC6268"]
        and checks["settle_order"] == ["LTC6268", "AD712", "LTC2050"]
        and checks.get("accuracy_target_met", False)
    )
    return passed, detail


def check_design_speedup(plan: Dict[str, Any], seed: int) -> Tuple[bool, str]:
    """The proposed design settles faster than the preliminary one"""
    if not plan["studies"]:
        return True, "skipped in quick mode"
    from app.analysis.studies import StudyKind, StudySpec, run_study

    result = run_study(StudySpec(StudyKind.DESIGN_COMPARE, n=5, replications=plan["study_replications"], base_seed=seed), record=False)
    speedup = result.checks.get("speedup_median")
    if speedup is None:
        return False, "no settled runs to compare"
    target = STUDY_DEFAULTS["speedup_target"]
    detail = f"median speedup {speedup:.3g} (hardware target {target:g} not expected from single-pole models)"
    return bool(result.checks["proposed_faster"]), detail


CHECKS: List[Tuple[str, Callable[[Dict[str, Any], int], Tuple[bool, str]]]] = [
    ("spectrum_identity", check_spectrum_identity),
    ("round_trip", check_round_trip),
    ("dense_counts", check_dense_counts),
    ("alpha_invariance", check_alpha_invariance),
    ("sdd_passivity", check_sdd_passivity),
    ("demo_system", check_demo),
    ("dynamic_demo_converges", check_dynamic_demo),
    ("opamp_tradeoff", check_opamp_tradeoff),
    ("design_speedup", check_design_speedup),
]


def run_acceptance_suite(quick: bool = False, seed: int = 0) -> Dict[str, Any]:
    """
    Run every check; a check that raises counts as failed.

    Returns:
        {"passed": bool, "quick": bool, "seed": int, "checks": [...], "elapsed_s": float}
    """
    plan = QUICK if quick else FULL
    started = time.monotonic()
    results = []
    for name, check in CHECKS:
        t0 = time.monotonic()
        try:
            passed, detail = check(plan, seed)
        except Exception as e:
            logger.error(f"check {name} raised: {e}")
            passed, detail = False, f"{type(e).__name__}: {e}"
        results.append({
            "name": name,
            "passed": bool(passed),
            "detail": detail,
            "elapsed_s": round(time.monotonic() - t0, 3),
        })
        logger.info(f"{name}: {'PASS' if passed else 'FAIL'} ({detail})")
    return {
        "passed": all(r["passed"] for r in results),
        "quick": quick,
        "seed": seed,
        "checks": results,
        "elapsed_s": round(time.monotonic() - started, 3),
    }
