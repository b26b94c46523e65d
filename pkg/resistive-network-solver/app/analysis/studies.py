"""
Parameter studies: generate systems, map, simulate and aggregate.

Every (value, seed) cell is an independent job. Jobs run in a process pool and
the rows are folded into a pandas frame by the caller.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Dict, Any, Optional, List, Tuple
import enum
import json
import logging
import os

import numpy as np
import pandas as pd

from app.analysis.metrics import error_metrics, nearest_rank, slope_permutation_test
from app.analysis.power import power_analytic, power_from_result
from app.config import get_settings, STUDY_DEFAULTS
from app.devices import get_device_library
from app.linsys.generator import GeneratorSpec, generate_random
from app.mapping.components import count_components
from app.mapping.network import Design
from app.mapping.preliminary import map_preliminary
from app.mapping.proposed import ANCHORED, SCALED_IDENTITY, auto_alpha, map_proposed
from app.simulate.circuit import Fidelity
from app.simulate.transient import SimConfig, transient

logger = logging.getLogger(__name__)

SCHEMA = (
    "study,param,value,seed,n,design,model,alpha,settle_time,max_error,"
    "max_conductance,p_total,saturated,censored,error"
)
SCHEMA_NOTE = "settle_time in seconds after the supply step; max_error relative; conductance uS; power uW"


class StudyError(Exception):
    """Exception for invalid study specifications"""
    pass


class StudyKind(str, enum.Enum):
    BETA_SWEEP = "BetaSweep"
    ALPHA_SWEEP = "AlphaSweep"
    OPAMP_COMPARE = "OpAmpCompare"
    COMPLEXITY_VS_N = "ComplexityVsN"
    CONDUCTANCE_BAND = "ConductanceBand"
    DESIGN_COMPARE = "DesignCompare"


# swept parameter and its default values per study kind
SWEEPS = {
    StudyKind.BETA_SWEEP: ("beta", STUDY_DEFAULTS["betas"]),
    StudyKind.ALPHA_SWEEP: ("alpha_factor", STUDY_DEFAULTS["alphas"]),
    StudyKind.OPAMP_COMPARE: ("model", STUDY_DEFAULTS["models"]),
    StudyKind.COMPLEXITY_VS_N: ("n", STUDY_DEFAULTS["sizes"]),
    StudyKind.CONDUCTANCE_BAND: ("max_conductance", STUDY_DEFAULTS["band_centers"]),
    StudyKind.DESIGN_COMPARE: ("design", STUDY_DEFAULTS["designs"]),
}


@dataclass(frozen=True)
class StudySpec:
    """
    One study. Each seed draws one system and every swept value is applied
    to it, so cells are matched across values.
    """
    kind: StudyKind
    values: Tuple[Any, ...] = ()
    n: int = 5
    replications: int = STUDY_DEFAULTS["replications"]
    seeds: Tuple[int, ...] = ()
    base_seed: int = 0
    design: str = Design.PROPOSED.value
    model: Optional[str] = None
    density: float = 1.0
    eig_min: float = STUDY_DEFAULTS["eig_min"]
    eig_max: float = STUDY_DEFAULTS["eig_max"]
    require_non_sdd: bool = True
    band_center: float = STUDY_DEFAULTS["complexity_conductance"]
    band_tolerance: float = STUDY_DEFAULTS["band_tolerance"]
    t_end: Optional[float] = None
    samples: Optional[int] = None
    integrator: Optional[str] = None
    timeout: Optional[float] = None
    label: str = ""
    output_csv: Optional[str] = None
    output_json: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", StudyKind(self.kind))
        values = tuple(self.values) or tuple(SWEEPS[self.kind][1])
        object.__setattr__(self, "values", values)
        seeds = tuple(self.seeds) or tuple(range(self.base_seed, self.base_seed + self.replications))
        object.__setattr__(self, "seeds", seeds)
        if not values:
            raise StudyError("study needs at least one swept value")
        if len(set(seeds)) != len(seeds):
            raise StudyError(f"seeds must be distinct per replication, got {list(seeds)}")
        if self.n < 1:
            raise StudyError(f"n must be positive, got {self.n}")
        if self.kind == StudyKind.BETA_SWEEP and min(float(v) for v in values) < 0.5:
            raise StudyError("beta values below 0.5 violate the stability condition")

    @property
    def param(self) -> str:
        return SWEEPS[self.kind][0]

    def jobs(self) -> List[Dict[str, Any]]:
        base = asdict(self)
        base["kind"] = self.kind.value
        return [dict(base, value=value, seed=seed) for seed in self.seeds for value in self.values]

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["kind"] = self.kind.value
        data["values"] = list(self.values)
        data["seeds"] = list(self.seeds)
        return data


@dataclass
class StudyResult:
    spec: StudySpec
    rows: pd.DataFrame
    summary: pd.DataFrame
    checks: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        summary = self.summary.replace({np.nan: None}).to_dict(orient="records")
        return {
            "spec": self.spec.to_dict(),
            "rows": int(len(self.rows)),
            "failures": int(self.rows["error"].notna().sum()) if len(self.rows) else 0,
            "summary": summary,
            "checks": self.checks,
            "note": SCHEMA_NOTE,
        }


def _job_setup(job: Dict[str, Any]) -> Tuple[int, str, str, Dict[str, Any]]:
    """System size, design, model and mapping keywords for one job"""
    kind = StudyKind(job["kind"])
    value = job["value"]
    n = int(value) if kind == StudyKind.COMPLEXITY_VS_N else job["n"]
    design = str(value) if kind == StudyKind.DESIGN_COMPARE else job["design"]
    model = str(value) if kind == StudyKind.OPAMP_COMPARE else (job["model"] or get_settings().default_opamp)
    mapping: Dict[str, Any] = {}
    if kind == StudyKind.BETA_SWEEP:
        mapping = {"policy": SCALED_IDENTITY, "beta": float(value)}
    return n, design, model, mapping


def _run_job(job: Dict[str, Any]) -> Dict[str, Any]:
    """Simulate one (value, seed) cell; failures become row errors"""
    kind = StudyKind(job["kind"])
    row: Dict[str, Any] = {
        "study": kind.value,
        "param": SWEEPS[kind][0],
        "value": job["value"],
        "seed": job["seed"],
        "n": job["n"],
        "design": job["design"],
        "model": None,
        "alpha": None,
        "settle_time": None,
        "max_error": None,
        "max_conductance": None,
        "p_total": None,
        "saturated": False,
        "censored": False,
        "error": None,
    }
    try:
        n, design, model_name, mapping = _job_setup(job)
        row.update(n=n, design=design, model=model_name)
        sys, x_true = generate_random(GeneratorSpec(
            n=n,
            density=job["density"],
            eig_min=job["eig_min"],
            eig_max=job["eig_max"],
            seed=job["seed"],
            require_non_sdd=job["require_non_sdd"] and n > 1,
        ))

        policy = mapping.get("policy", ANCHORED)
        beta = mapping.get("beta")
        if kind in (StudyKind.COMPLEXITY_VS_N, StudyKind.CONDUCTANCE_BAND):
            center = float(job["value"]) if kind == StudyKind.CONDUCTANCE_BAND else job["band_center"]
            alpha = auto_alpha(sys, target=center, policy=policy, beta=beta)
        elif kind == StudyKind.ALPHA_SWEEP:
            alpha = float(job["value"]) * auto_alpha(sys, policy=policy, beta=beta)
        else:
            alpha = auto_alpha(sys, policy=policy, beta=beta)

        ts = None
        if design == Design.PRELIMINARY.value:
            net = map_preliminary(sys, alpha=alpha)
        else:
            net, ts, _ = map_proposed(sys, alpha=alpha, policy=policy, beta=beta)
        row.update(alpha=alpha, max_conductance=net.max_conductance())

        cfg = SimConfig(
            fidelity=Fidelity.dynamic(get_device_library().get(model_name)),
            t_end=job["t_end"],
            samples=job["samples"],
            integrator=job["integrator"],
            timeout=job["timeout"],
        )
        result = transient(net, cfg)
        row.update(
            settle_time=result.convergence_time,
            max_error=error_metrics(result.x, x_true)["max_rel_error"],
            saturated=result.saturated,
            censored=result.censored,
        )
        counts = count_components(net)
        if ts is not None and result.stable:
            row["p_total"] = power_analytic(ts, result.x, counts=counts).p_total
        else:
            row["p_total"] = power_from_result(net, result, counts=counts).p_total
    except Exception as e:
        logger.warning(f"{kind.value} value={job['value']} seed={job['seed']} failed: {e}")
        row["error"] = f"{type(e).__name__}: {e}"
    return row


def _workers(workers: Optional[int]) -> int:
    workers = get_settings().workers if workers is None else workers
    return workers if workers and workers > 0 else (os.cpu_count() or 1)


def execute_jobs(jobs: List[Dict[str, Any]], workers: Optional[int] = None) -> List[Dict[str, Any]]:
    """Run jobs in a process pool (or inline with one worker); rows keep job order"""
    workers = min(_workers(workers), max(1, len(jobs)))
    if workers == 1:
        return [_run_job(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_job, jobs))


def summarize(rows: pd.DataFrame) -> pd.DataFrame:
    """Per-value medians and 90th percentiles (nearest rank)"""
    records = []
    for value, group in rows.groupby("value", sort=False):
        ok = group[group["error"].isna()]
        settle = ok["settle_time"].dropna()
        records.append({
            "value": value,
            "runs": int(len(group)),
            "failures": int(group["error"].notna().sum()),
            "censored": int(ok["censored"].sum()),
            "saturated": int(ok["saturated"].sum()),
            "settled": int(len(settle)),
            "settle_median": nearest_rank(settle, 50),
            "settle_p90": nearest_rank(settle, 90),
            "settle_mean": float(settle.mean()) if len(settle) else None,
            "error_median": nearest_rank(ok["max_error"], 50),
            "error_p90": nearest_rank(ok["max_error"], 90),
            "max_conductance_median": nearest_rank(ok["max_conductance"], 50),
            "p_total_median": nearest_rank(ok["p_total"], 50),
        })
    return pd.DataFrame.from_records(records)


def _ordering(summary: pd.DataFrame, column: str) -> List[Any]:
    ranked = summary.dropna(subset=[column]).sort_values(column)
    return list(ranked["value"])


def _non_decreasing(summary: pd.DataFrame, column: str, rtol: float = 1e-6) -> Optional[bool]:
    """Medians ordered by the swept value never drop by more than rtol"""
    series = summary.dropna(subset=[column]).sort_values("value", key=lambda v: v.astype(float))[column]
    if len(series) < 2:
        return None
    values = series.to_numpy(dtype=float)
    return bool(np.all(values[1:] >= values[:-1] * (1 - rtol)))


def study_checks(spec: StudySpec, rows: pd.DataFrame, summary: pd.DataFrame) -> Dict[str, Any]:
    """Trend statistics reported alongside the summary"""
    checks: Dict[str, Any] = {}
    if summary.empty:
        return checks
    checks["error_order"] = _ordering(summary, "error_median")
    checks["settle_order"] = _ordering(summary, "settle_median")

    if spec.kind in (StudyKind.BETA_SWEEP, StudyKind.ALPHA_SWEEP):
        checks["error_non_decreasing"] = _non_decreasing(summary, "error_median")
        checks["settle_non_decreasing"] = _non_decreasing(summary, "settle_median")
    if spec.kind == StudyKind.OPAMP_COMPARE:
        medians = summary.set_index("value")["error_median"]
        reference = get_settings().default_opamp
        if reference in medians.index and pd.notna(medians.loc[reference]):
            checks["reference_error_median"] = float(medians.loc[reference])
            checks["accuracy_target_met"] = bool(medians.loc[reference] <= STUDY_DEFAULTS["accuracy_target"])
    if spec.kind == StudyKind.COMPLEXITY_VS_N:
        means = summary.set_index("value")["settle_mean"].dropna()
        if len(means) >= 2 and means.loc[min(means.index)] > 0:
            ratio = float(means.loc[max(means.index)] / means.loc[min(means.index)])
            low, high = STUDY_DEFAULTS["settle_ratio_band"]
            checks["settle_ratio_largest_smallest"] = ratio
            checks["settle_ratio_in_band"] = bool(low <= ratio <= high)
        ok = rows[rows["error"].isna()]
        spread = (ok["max_conductance"] - spec.band_center).abs() <= spec.band_tolerance * spec.band_center
        checks["band_held"] = bool(spread.all())
        checks["slope_test"] = slope_permutation_test(ok, x="n", y="settle_time", seed=spec.base_seed)
    if spec.kind == StudyKind.DESIGN_COMPARE:
        by_design = summary.set_index("value")["settle_median"]
        prelim = by_design.get(Design.PRELIMINARY.value)
        proposed = by_design.get(Design.PROPOSED.value)
        if prelim is not None and proposed:
            speedup = float(prelim / proposed)
            checks["speedup_median"] = speedup
            checks["proposed_faster"] = speedup > 1.0
            # single-pole macromodels reach only part of the hardware speedup
            checks["speedup_target_met"] = speedup >= STUDY_DEFAULTS["speedup_target"]
    return checks


def write_dataset(result: StudyResult, csv_path: Optional[str] = None, json_path: Optional[str] = None) -> None:
    """CSV rows with a schema header, plus the summary JSON"""
    csv_path = csv_path or result.spec.output_csv
    json_path = json_path or result.spec.output_json
    if csv_path:
        with open(csv_path, "w", encoding="utf-8", newline="") as f:
            f.write(f"# schema: {SCHEMA}\n# units: {SCHEMA_NOTE}\n")
            result.rows.to_csv(f, index=False)
        logger.info(f"Wrote {len(result.rows)} rows to {csv_path}")
    if json_path:
        with open(json_path, "w", encoding="utf-8") as f:
            json.dump(result.to_dict(), f, indent=2, default=str)
        logger.info(f"Wrote study summary to {json_path}")


def run_study(spec: StudySpec, workers: Optional[int] = None, record: Optional[bool] = None) -> StudyResult:
    """
    Run every cell of the study. Individual failures are recorded per row and
    never abort the sweep.
    """
    jobs = spec.jobs()
    logger.info(f"Running {spec.kind.value} study: {len(spec.values)} values x {len(spec.seeds)} seeds")
    raw = execute_jobs(jobs, workers)
    rows = pd.DataFrame.from_records(raw, columns=SCHEMA.split(","))
    for column in ("settle_time", "max_error", "max_conductance", "p_total", "alpha"):
        rows[column] = pd.to_numeric(rows[column], errors="coerce")
    summary = summarize(rows)
    result = StudyResult(spec, rows, summary, study_checks(spec, rows, summary))

    failures = int(rows["error"].notna().sum())
    if failures:
        logger.warning(f"{spec.kind.value}: {failures} of {len(rows)} runs failed")
    write_dataset(result)

    record = get_settings().persist_studies if record is None else record
    if record:
        from app.database import get_db, init_db, record_study

        init_db()
        db = next(get_db())
        try:
            record_study(db, spec.to_dict(), raw, result.to_dict())
        finally:
            db.close()
    return result
