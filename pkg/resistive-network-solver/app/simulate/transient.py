"""
Transient simulation of mapped networks.

Resistive stamps are algebraic; every dynamic amp adds one single-pole state.
The default integrator is backward Euler with step-doubling error control on
power-of-two fractions of dt_max. Radau and BDF from scipy are available as
cross-checks.
"""
from dataclasses import dataclass, field, replace
from typing import Dict, Any, Optional, List, Tuple
import enum
import logging
import time

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp
from scipy.linalg import lu_factor, lu_solve

from app.config import get_settings
from app.devices import limit_output
from app.mapping.network import Design, Network
from app.simulate.circuit import (
    ActiveCircuit,
    ConvergenceError,
    Fidelity,
    SimulationError,
)
from app.simulate.dc import DCState, dc_state
from app.simulate.settling import settling_time

logger = logging.getLogger(__name__)

INTEGRATORS = ("backward_euler", "radau", "bdf")

# first step after t=0 and after the supply step is dt_max / 2**RESET_LEVEL
RESET_LEVEL = 6
MAX_LEVEL = 48
RAIL_MARGIN = 1e-9


class SimMode(str, enum.Enum):
    DC = "dc"
    TRANSIENT = "transient"


@dataclass(frozen=True)
class SimConfig:
    """Unset fields are filled from settings by resolve()"""
    mode: SimMode = SimMode.TRANSIENT
    t_end: Optional[float] = None
    dt_max: Optional[float] = None
    step_time: Optional[float] = None
    fidelity: Fidelity = field(default_factory=Fidelity)
    convergence_band: Optional[float] = None
    convergence_floor: Optional[float] = None
    integrator: Optional[str] = None
    samples: Optional[int] = None
    rtol: Optional[float] = None
    atol: Optional[float] = None
    timeout: Optional[float] = None
    dt_min: float = 1e-18

    def resolve(self, design: Optional[str] = None) -> "SimConfig":
        settings = get_settings()
        design = Design(design) if design else Design.PROPOSED
        t_end = self.t_end
        if t_end is None:
            t_end = settings.t_end_preliminary if design == Design.PRELIMINARY else settings.t_end_proposed
        samples = self.samples or settings.samples_per_run
        resolved = replace(
            self,
            mode=SimMode(self.mode),
            t_end=t_end,
            samples=samples,
            dt_max=self.dt_max if self.dt_max is not None else t_end / samples,
            step_time=settings.step_time if self.step_time is None else self.step_time,
            convergence_band=self.convergence_band if self.convergence_band is not None else settings.convergence_band,
            convergence_floor=self.convergence_floor if self.convergence_floor is not None else settings.convergence_floor,
            integrator=(self.integrator or settings.integrator).lower(),
            rtol=self.rtol if self.rtol is not None else settings.rtol,
            atol=self.atol if self.atol is not None else settings.atol,
            timeout=self.timeout if self.timeout is not None else settings.run_timeout,
        )
        resolved.validate()
        return resolved

    def validate(self) -> None:
        if not self.t_end or self.t_end <= 0:
            raise SimulationError(f"t_end must be positive, got {self.t_end}")
        if not (0 < self.dt_max <= self.t_end):
            raise SimulationError(f"dt_max must satisfy 0 < dt_max <= t_end, got {self.dt_max}")
        if not self.convergence_band > 0:
            raise SimulationError(f"convergence_band must be positive, got {self.convergence_band}")
        if not (0 <= self.step_time < self.t_end):
            raise SimulationError(f"step_time must lie in [0, t_end), got {self.step_time}")
        if self.integrator not in INTEGRATORS:
            raise SimulationError(f"unknown integrator '{self.integrator}' (known: {', '.join(INTEGRATORS)})")
        if self.samples < 1:
            raise SimulationError(f"samples must be at least 1, got {self.samples}")

    def sample_times(self) -> np.ndarray:
        grid = np.linspace(0.0, self.t_end, self.samples + 1)
        return np.unique(np.append(grid, self.step_time))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mode": SimMode(self.mode).value,
            "t_end": self.t_end,
            "dt_max": self.dt_max,
            "step_time": self.step_time,
            "fidelity": self.fidelity.label,
            "convergence_band": self.convergence_band,
            "convergence_floor": self.convergence_floor,
            "integrator": self.integrator,
            "samples": self.samples,
        }


@dataclass(frozen=True, eq=False)
class SimResult:
    x_dc: np.ndarray
    times: np.ndarray
    node_trajectories: np.ndarray
    amp_trajectories: np.ndarray
    settle_time: Optional[float]
    saturated: bool
    stable: bool
    step_time: float = 0.0
    censored: bool = False
    max_error_vs_truth: Optional[float] = None
    amp_dc: Optional[np.ndarray] = None
    amp_labels: Tuple[str, ...] = ()
    diagnostics: Tuple[str, ...] = ()
    stats: Dict[str, Any] = field(default_factory=dict)
    x: Optional[np.ndarray] = None

    @property
    def convergence_time(self) -> Optional[float]:
        """Settle time measured from the supply step"""
        if self.settle_time is None:
            return None
        return self.settle_time - self.step_time

    @property
    def trajectories(self) -> pd.DataFrame:
        columns = {"time": self.times}
        for node in range(self.node_trajectories.shape[1]):
            columns[f"x{node + 1}"] = self.node_trajectories[:, node]
        for idx, label in enumerate(self.amp_labels):
            columns[label] = self.amp_trajectories[:, idx]
        return pd.DataFrame(columns)

    def to_dict(self, include_trajectories: bool = False) -> Dict[str, Any]:
        data = {
            "x": None if self.x is None else self.x.tolist(),
            "x_dc": self.x_dc.tolist(),
            "settle_time": self.settle_time,
            "convergence_time": self.convergence_time,
            "saturated": self.saturated,
            "stable": self.stable,
            "censored": self.censored,
            "max_error_vs_truth": self.max_error_vs_truth,
            "diagnostics": list(self.diagnostics),
            "stats": dict(self.stats),
        }
        if include_trajectories:
            data["trajectories"] = self.trajectories.to_dict(orient="list")
        return data


class _StepSolver:
    """Backward-Euler amp update with LU factors cached per step size"""

    def __init__(self, circuit: ActiveCircuit):
        self.circuit = circuit
        self._factors: Dict[float, Any] = {}

    def _factor(self, h: float):
        lu = self._factors.get(h)
        if lu is None:
            c = self.circuit
            r = h / c.taus
            matrix = np.diag(1.0 + r) - (r * c.gains)[:, None] * c.C
            lu = lu_factor(matrix)
            if len(self._factors) > 128:
                self._factors.clear()
            self._factors[h] = lu
        return lu

    def step(self, y: np.ndarray, h: float, on: float) -> np.ndarray:
        c = self.circuit
        r = h / c.taus
        rhs = y + r * c.gains * (c.d * on + c.offsets)
        proposed = lu_solve(self._factor(h), rhs)
        return limit_output(y, proposed, h, c.slews, c.rails)


def _at_rails(y: np.ndarray, rails: np.ndarray) -> bool:
    return bool(np.any(np.abs(y) >= rails * (1 - RAIL_MARGIN)))


def _integrate_backward_euler(
    circuit: ActiveCircuit,
    cfg: SimConfig,
    times: np.ndarray,
    deadline: Optional[float],
) -> Tuple[np.ndarray, bool, bool, Dict[str, Any]]:
    M = circuit.n_amps
    S = len(times)
    Y = np.full((S, M), np.nan)
    Y[0] = 0.0
    solver = _StepSolver(circuit)
    eps = 1e-12 * cfg.t_end

    t, y = 0.0, np.zeros(M)
    level = RESET_LEVEL
    k = 1
    accepted = rejected = 0
    rail_run = 0
    saturated = censored = False

    while k < S:
        if deadline is not None and time.monotonic() > deadline:
            censored = True
            logger.warning(f"transient censored at t={t:.6g} s after {accepted} steps (timeout)")
            break
        boundary = cfg.step_time if t < cfg.step_time else cfg.t_end
        h = min(cfg.dt_max / 2 ** level, boundary - t)
        on = 1.0 if t >= cfg.step_time else 0.0

        full = solver.step(y, h, on)
        half = solver.step(solver.step(y, h / 2, on), h / 2, on)
        scale = cfg.atol + cfg.rtol * np.maximum(np.abs(half), np.abs(y))
        err = float(np.max(np.abs(half - full) / scale)) if M else 0.0

        if err > 1.0:
            rejected += 1
            level += 1
            if level > MAX_LEVEL or cfg.dt_max / 2 ** level < cfg.dt_min:
                raise SimulationError(f"integrator step size fell below {cfg.dt_min:g} s at t={t:.9g} s")
            continue

        t_new = boundary if boundary - t - h <= eps else t + h
        while k < S and times[k] <= t_new + eps:
            frac = (times[k] - t) / (t_new - t)
            Y[k] = y + frac * (half - y)
            k += 1

        if t >= cfg.step_time:
            rail_run = rail_run + 1 if _at_rails(half, circuit.rails) else 0
            if rail_run >= 2:
                saturated = True

        crossed_step = t < cfg.step_time <= t_new
        t, y = t_new, half
        accepted += 1
        if crossed_step:
            level = RESET_LEVEL
        elif err < 0.25 and level > 0:
            level -= 1

        if t >= cfg.t_end - eps and k < S:
            Y[k:] = y
            k = S

    stats = {"accepted_steps": accepted, "rejected_steps": rejected, "factorizations": len(solver._factors)}
    logger.debug(f"backward Euler: {accepted} accepted, {rejected} rejected steps")
    return Y[:k], saturated, censored, stats


class _RunTimeout(Exception):
    pass


def _integrate_ivp(
    circuit: ActiveCircuit,
    cfg: SimConfig,
    times: np.ndarray,
    deadline: Optional[float],
) -> Tuple[np.ndarray, bool, bool, Dict[str, Any]]:
    method = "Radau" if cfg.integrator == "radau" else "BDF"
    slews, rails = circuit.slews, circuit.rails
    jac = circuit.jacobian()
    Y = np.full((len(times), circuit.n_amps), np.nan)
    y0 = np.zeros(circuit.n_amps)
    evaluations = 0
    censored = False

    def make_rhs(on: float):
        def rhs(t, y):
            nonlocal evaluations
            evaluations += 1
            if deadline is not None and evaluations % 256 == 0 and time.monotonic() > deadline:
                raise _RunTimeout()
            dy = np.clip(circuit.rhs(y, on), -slews, slews)
            pinned = ((y >= rails) & (dy > 0)) | ((y <= -rails) & (dy < 0))
            return np.where(pinned, 0.0, dy)
        return rhs

    segments = [(0.0, cfg.step_time, 0.0), (cfg.step_time, cfg.t_end, 1.0)]
    filled = 0
    for start, stop, on in segments:
        if stop <= start:
            continue
        mask = (times >= start) & (times <= stop)
        try:
            sol = solve_ivp(
                make_rhs(on), (start, stop), y0, method=method, t_eval=times[mask],
                jac=jac, rtol=cfg.rtol, atol=cfg.atol, max_step=cfg.dt_max,
            )
        except _RunTimeout:
            censored = True
            logger.warning(f"{method} run censored in segment starting at t={start:.6g} s (timeout)")
            break
        if not sol.success:
            raise SimulationError(f"{method} failed at t={sol.t[-1] if sol.t.size else start:.9g} s: {sol.message}")
        Y[mask] = np.clip(sol.y.T, -rails, rails)
        y0 = Y[mask][-1]
        filled = int(np.nonzero(mask)[0][-1]) + 1

    saturated = False
    run = 0
    for idx in np.nonzero(times[:filled] >= cfg.step_time)[0]:
        run = run + 1 if _at_rails(Y[idx], rails) else 0
        if run >= 2:
            saturated = True
            break
    return Y[:filled], saturated, censored, {"rhs_evaluations": evaluations}


def _ideal_stable(circuit: ActiveCircuit) -> bool:
    """An ideal network with negative stamps is stable iff its loaded nodal matrix is PD"""
    if circuit.net.is_passive or circuit.fidelity.is_dynamic:
        return True
    G = circuit.G
    return bool(np.linalg.eigvalsh(0.5 * (G + G.T))[0] > 0)


def _truth_error(x: np.ndarray, x_true: Optional[np.ndarray]) -> Optional[float]:
    if x_true is None:
        return None
    from app.analysis.metrics import error_metrics

    x_true = np.asarray(x_true, dtype=float)
    return error_metrics(x, x_true)["max_rel_error"]


def transient(net: Network, cfg: Optional[SimConfig] = None, x_true: Optional[np.ndarray] = None) -> SimResult:
    """
    Simulate the network from an all-zero state with the supplies stepping on
    at step_time. In DC mode only the operating point is computed.
    """
    cfg = (cfg or SimConfig()).resolve(net.design)
    circuit = ActiveCircuit(net, cfg.fidelity)
    diagnostics: List[str] = []

    dc: Optional[DCState] = None
    try:
        dc = dc_state(net, cfg.fidelity, circuit)
    except ConvergenceError as e:
        diagnostics.append(f"operating point: {e}")

    ideal_stable = _ideal_stable(circuit)
    if not ideal_stable:
        diagnostics.append("unstable: loaded nodal matrix is not positive definite")

    if SimMode(cfg.mode) == SimMode.DC:
        if dc is None:
            raise ConvergenceError(diagnostics[0])
        stable = ideal_stable and not dc.saturated
        if dc.saturated:
            diagnostics.append("saturation detected at the operating point")
        x = net.solution(dc.x)
        return SimResult(
            x_dc=dc.x,
            times=np.zeros(0),
            node_trajectories=np.zeros((0, net.unknowns)),
            amp_trajectories=np.zeros((0, circuit.n_amps)),
            settle_time=None,
            saturated=dc.saturated,
            stable=stable,
            step_time=cfg.step_time,
            max_error_vs_truth=_truth_error(x, x_true),
            amp_dc=dc.amp_outputs,
            amp_labels=tuple(circuit.amp_labels()),
            diagnostics=tuple(diagnostics),
            x=x,
        )

    times = cfg.sample_times()
    deadline = time.monotonic() + cfg.timeout if cfg.timeout else None
    if circuit.n_amps == 0:
        Y = np.zeros((len(times), 0))
        saturated = censored = False
        stats: Dict[str, Any] = {"accepted_steps": 0}
    elif cfg.integrator == "backward_euler":
        Y, saturated, censored, stats = _integrate_backward_euler(circuit, cfg, times, deadline)
    else:
        Y, saturated, censored, stats = _integrate_ivp(circuit, cfg, times, deadline)

    times = times[:len(Y)]
    on = (times >= cfg.step_time).astype(float)
    X = on[:, None] * circuit.Rs[None, :] + Y @ circuit.RB.T

    x_dc = dc.x if dc is not None else (X[-1] if len(X) else np.zeros(net.unknowns))
    settle = None
    if not censored and ideal_stable and dc is not None:
        settle = settling_time(times, X, x_dc, cfg.convergence_band, cfg.convergence_floor, cfg.step_time)
    if saturated:
        diagnostics.append("saturation detected")
        settle = None
    if censored:
        diagnostics.append(f"censored: run exceeded {cfg.timeout:g} s wall clock")
    elif settle is None and not saturated:
        diagnostics.append("did not settle within t_end")

    stable = ideal_stable and not saturated and settle is not None
    stats["samples"] = int(len(times))
    x = net.solution(x_dc)
    logger.info(
        f"{net.label or 'network'} transient ({cfg.fidelity.label}, {cfg.integrator}): "
        f"settle={settle}, saturated={saturated}, censored={censored}"
    )
    return SimResult(
        x_dc=x_dc,
        times=times,
        node_trajectories=X,
        amp_trajectories=Y,
        settle_time=settle,
        saturated=saturated,
        stable=stable,
        step_time=cfg.step_time,
        censored=censored,
        max_error_vs_truth=_truth_error(x, x_true),
        amp_dc=dc.amp_outputs if dc is not None else None,
        amp_labels=tuple(circuit.amp_labels()),
        diagnostics=tuple(diagnostics),
        stats=stats,
        x=x,
    )
