"""
Solve engine: map a system, simulate the network and assemble the report
"""
from dataclasses import replace
from typing import Dict, Any, Optional
import logging

import numpy as np

from app.analysis.metrics import error_metrics
from app.analysis.power import power_analytic, power_from_result
from app.config import get_settings, Settings
from app.linsys.system import LinearSystem, classify, passivity_margins, supply_conductances, validate
from app.mapping.components import count_components
from app.mapping.network import Design, Network
from app.mapping.preliminary import map_preliminary
from app.mapping.proposed import ANCHORED, check_stability, map_proposed
from app.simulate.circuit import Fidelity
from app.simulate.transient import SimConfig, SimMode, SimResult, transient

logger = logging.getLogger(__name__)

STATUS_CONVERGED = "converged"
STATUS_UNSTABLE = "unstable"
STATUS_ERROR = "error"

# package name to the name used in messages
MODULE_NAMES = {"data": "io"}


def qualified_error(e: Exception) -> str:
    """'<module>: message' using the top-level package the exception came from"""
    parts = type(e).__module__.split(".")
    module = parts[1] if len(parts) > 1 and parts[0] == "app" else type(e).__name__
    module = MODULE_NAMES.get(module, module)
    return f"{module}: {e}"


class SolveEngine:
    """
    Compile and simulate linear systems
    """

    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or get_settings()
        # mapping and simulation result of the latest successful solve
        self.last_run: Optional[Dict[str, Any]] = None

    def map_system(
        self,
        sys: LinearSystem,
        design: str = Design.PROPOSED.value,
        alpha: Optional[float] = None,
        policy: str = ANCHORED,
        beta: Optional[float] = None,
    ) -> Dict[str, Any]:
        """
        Map only; returns the network and, for the proposed design, the
        transformed system and cross-point layout.
        """
        if Design(design) == Design.PRELIMINARY:
            net = map_preliminary(sys, alpha=1.0 if alpha is None else alpha)
            return {"network": net, "transformed": None, "layout": None}
        net, ts, layout = map_proposed(sys, alpha=alpha, policy=policy, beta=beta)
        return {"network": net, "transformed": ts, "layout": layout}

    def solve_system(
        self,
        sys: LinearSystem,
        design: str = Design.PROPOSED.value,
        fidelity: Optional[Fidelity] = None,
        alpha: Optional[float] = None,
        policy: str = ANCHORED,
        beta: Optional[float] = None,
        x_true: Optional[np.ndarray] = None,
        mode: SimMode = SimMode.TRANSIENT,
        sim: Optional[SimConfig] = None,
    ) -> Dict[str, Any]:
        """
        Perform the full pipeline on one system

        Args:
            sys: the system to solve
            design: "preliminary" or "proposed"
            fidelity: ideal or dynamic device models
            x_true: reference solution for the error metric

        Returns:
            Report dict; on failure it carries status "error" and a
            module-qualified message instead of results
        """
        fidelity = fidelity or Fidelity.ideal()
        self.last_run = None
        try:
            problems = validate(sys)
            if problems:
                return self._error_report(sys, design, f"linsys: {problems[0]}")

            mapped = self.map_system(sys, design, alpha, policy, beta)
            net: Network = mapped["network"]
            ts = mapped["transformed"]

            cfg = replace(sim or SimConfig(), fidelity=fidelity, mode=mode)
            result = transient(net, cfg, x_true=x_true)
            self.last_run = dict(mapped, result=result, config=cfg)

            return self._build_report(sys, net, ts, fidelity, result, x_true)

        except Exception as e:
            logger.error(f"Error solving {sys.label or 'system'}: {e}")
            return self._error_report(sys, design, qualified_error(e))

    def _error_report(self, sys: LinearSystem, design: str, message: str) -> Dict[str, Any]:
        return {
            "label": sys.label,
            "design": design,
            "status": STATUS_ERROR,
            "error": message,
        }

    def _build_report(
        self,
        sys: LinearSystem,
        net: Network,
        ts,
        fidelity: Fidelity,
        result: SimResult,
        x_true: Optional[np.ndarray],
    ) -> Dict[str, Any]:
        n = sys.n
        x = result.x
        counts = count_components(net)

        stability = check_stability(ts) if ts is not None else None
        stable = result.stable
        status = STATUS_CONVERGED if stable else STATUS_UNSTABLE

        if not len(result.times):
            settle_label = "not simulated (dc mode)"
        elif result.saturated:
            settle_label = "saturation detected"
        elif net.is_passive and result.settle_time is not None:
            settle_label = "immediate (passive)"
        elif result.convergence_time is not None:
            settle_label = f"{result.convergence_time * 1e6:.3f} us after the supply step"
        else:
            settle_label = "not settled"

        if ts is not None and stable:
            power = power_analytic(ts, x, counts=counts).to_dict()
        else:
            power = power_from_result(net, result, counts=counts).to_dict()

        ks = supply_conductances(sys.b)
        report = {
            "label": sys.label,
            "n": n,
            "design": net.design.value,
            "fidelity": fidelity.label,
            "status": status,
            "classification": self._classify(sys, ks),
            "alpha": net.alpha,
            "x": x.tolist(),
            "settle_time": result.settle_time,
            "convergence_time": result.convergence_time,
            "settle": settle_label,
            "saturated": result.saturated,
            "censored": result.censored,
            "stable": stable,
            "stability": stability,
            "passive": net.is_passive,
            "passivity_margins": passivity_margins(sys, ks).tolist(),
            "network": net.summary(),
            "components": counts.to_dict(),
            "power": power,
            "diagnostics": list(net.diagnostics) + list(result.diagnostics),
        }
        if x_true is not None:
            report["errors"] = error_metrics(x, np.asarray(x_true, dtype=float))
            report["max_error_vs_truth"] = report["errors"]["max_rel_error"]
        logger.info(f"{sys.label or 'system'}: {status}, settle {settle_label}")
        return report

    @staticmethod
    def _classify(sys: LinearSystem, ks: np.ndarray) -> Optional[str]:
        try:
            return classify(sys, ks).value
        except Exception as e:
            logger.warning(f"Could not classify {sys.label or 'system'}: {e}")
            return None
