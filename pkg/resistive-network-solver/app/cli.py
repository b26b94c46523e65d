"""
Command-line entry point: map, solve, sweep, export, verify and count.

Exit codes:
    0  success (solve: stable run without saturation; verify: every check passed)
    1  errors, reported as '<module>: message'; failed verify checks
    2  solve only: instability or amp saturation detected
"""
from typing import Any, Dict, List, Optional
import argparse
import json
import logging
import sys

import pandas as pd

from app.analysis.acceptance import QUICK, run_acceptance_suite
from app.analysis.engine import STATUS_ERROR, SolveEngine, qualified_error
from app.analysis.studies import SWEEPS, StudyKind, StudySpec, run_study
from app.config import STUDY_DEFAULTS, load_settings, use_settings
from app.data.netlist import export_netlist
from app.data.results import network_document, to_json, write_json, write_trajectories
from app.data.systems import parse_system
from app.devices import reset_device_library
from app.mapping.components import column_sum_strategies, count_components, dense_counts
from app.mapping.network import Design
from app.mapping.proposed import ANCHORED, SCALED_IDENTITY
from app.simulate.circuit import parse_fidelity
from app.simulate.transient import INTEGRATORS, SimConfig, SimMode

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNSTABLE = 2


class CommandError(Exception):
    """Exception for inconsistent command-line flags"""
    pass


class _Parser(argparse.ArgumentParser):
    """Usage errors exit 1; exit code 2 is reserved for instability"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: cli: {message}\n")


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file (below env vars, above defaults)")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")


def _mapping_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("input", help="System file: JSON document or Matrix Market (.mtx)")
    parser.add_argument("--rhs", help="Right-hand side file for Matrix Market input")
    parser.add_argument("--design", choices=[d.value for d in Design], default=Design.PROPOSED.value)
    parser.add_argument("--alpha", type=float, help="Conductance scale (default: automatic for proposed, 1 for preliminary)")
    parser.add_argument("--policy", choices=[ANCHORED, SCALED_IDENTITY], default=ANCHORED, help="D matrix policy")
    parser.add_argument("--beta", type=float, help="D = beta * (max column abs sum of A) * I; only with --policy scaled_identity")


def _simulation_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--fidelity", default="ideal", help="ideal | dynamic | dynamic:<model>")
    parser.add_argument("--model", help="Opamp model for dynamic fidelity")
    parser.add_argument("--mode", choices=[m.value for m in SimMode], default=SimMode.TRANSIENT.value)
    parser.add_argument("--integrator", choices=INTEGRATORS)
    parser.add_argument("--t-end", type=float, help="Simulated time (s)")
    parser.add_argument("--samples", type=int, help="Output samples per run")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="resmap",
        description="Compile SPD systems Ax=b into resistive solver networks and simulate them",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("map", help="Compile a system and print the network")
    _common(p)
    _mapping_flags(p)
    p.add_argument("--out", help="Write the network JSON here")
    p.add_argument("--emit", choices=["json", "csv"], default="json", help="stdout format")

    p = sub.add_parser("solve", help="Map, simulate and report (exit 2 on instability)")
    _common(p)
    _mapping_flags(p)
    _simulation_flags(p)
    p.add_argument("--report", help="Write the JSON report here")
    p.add_argument("--trajectories", help="Write trajectories CSV here")
    p.add_argument("--netlist", help="Also export the netlist here")
    p.add_argument("--emit", choices=["json", "text"], default="text", help="stdout format")

    p = sub.add_parser("sweep", help="Run a parameter study")
    _common(p)
    p.add_argument("kind", choices=[k.value for k in StudyKind])
    p.add_argument("--values", nargs="+", help="Swept values (default per study kind)")
    p.add_argument("--n", type=int, default=5, help="System size (ignored by ComplexityVsN)")
    p.add_argument("--replications", type=int, default=STUDY_DEFAULTS["replications"])
    p.add_argument("--seed", type=int, default=0, help="First replication seed")
    p.add_argument("--design", choices=[d.value for d in Design], default=Design.PROPOSED.value)
    p.add_argument("--model", help="Opamp model")
    p.add_argument("--band-center", type=float, help="Max-conductance target for ComplexityVsN (uS)")
    p.add_argument("--integrator", choices=INTEGRATORS)
    p.add_argument("--t-end", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--timeout", type=float, help="Per-run wall clock limit (s)")
    p.add_argument("--workers", type=int, help="Worker processes (default: logical cores)")
    p.add_argument("--csv", help="Rows CSV path")
    p.add_argument("--json", help="Summary JSON path")
    p.add_argument("--record", action="store_true", help="Persist rows to the study database")
    p.add_argument("--emit", choices=["json", "csv"], default="csv", help="stdout format of the summary")

    p = sub.add_parser("export", help="Write a SPICE netlist")
    _common(p)
    _mapping_flags(p)
    _simulation_flags(p)
    p.add_argument("--netlist", help="Output path (default: stdout)")

    p = sub.add_parser("verify", help="Run the built-in acceptance suite")
    _common(p)
    p.add_argument("--quick", action="store_true", help=f"Smaller suite: {json.dumps(QUICK)}")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", help="Also write the summary here")

    p = sub.add_parser("count", help="Component counts")
    _common(p)
    p.add_argument("n", type=int, nargs="?", help="Dense worst case for this size")
    p.add_argument("--design", choices=[d.value for d in Design], help="Only this design")
    p.add_argument("--input", help="Count a mapped system instead of the dense worst case")
    p.add_argument("--strategies", action="store_true", help="With --input: column-sum mitigation report")
    p.add_argument("--emit", choices=["json", "csv"], default="csv")
    return parser


def configure(args: argparse.Namespace) -> None:
    """Install settings (flags > env > .env > config file > defaults) and logging"""
    settings = load_settings(
        getattr(args, "config", None),
        integrator=getattr(args, "integrator", None),
        workers=getattr(args, "workers", None),
    )
    use_settings(settings)
    reset_device_library()
    level = logging.DEBUG if getattr(args, "verbose", False) else getattr(logging, settings.log_level.upper(), logging.INFO)
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        force=True,
    )


def _check_flags(args: argparse.Namespace) -> None:
    if getattr(args, "beta", None) is not None and args.policy != SCALED_IDENTITY:
        raise CommandError("--beta is only valid with --policy scaled_identity")
    if getattr(args, "design", None) == Design.PRELIMINARY.value and getattr(args, "policy", ANCHORED) != ANCHORED:
        raise CommandError("--policy applies to the proposed design only")


def _sim_config(args: argparse.Namespace) -> SimConfig:
    return SimConfig(
        mode=SimMode(args.mode),
        t_end=args.t_end,
        samples=args.samples,
        integrator=args.integrator,
    )


def _print(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def cmd_map(args: argparse.Namespace) -> int:
    system = parse_system(args.input, args.rhs)
    mapped = SolveEngine().map_system(system, args.design, args.alpha, args.policy, args.beta)
    doc = network_document(mapped["network"], mapped["transformed"], mapped["layout"])
    if args.out:
        write_json(doc, args.out)
    if args.emit == "csv":
        _print(pd.DataFrame([el.to_dict() for el in mapped["network"].elements]).to_csv(index=False))
    else:
        _print(to_json(doc))
    return EXIT_OK


def _format_report(report: Dict[str, Any]) -> str:
    lines = [
        f"system:      {report['label'] or '-'} (n={report['n']}, {report['classification']})",
        f"design:      {report['design']} alpha={report['alpha']:.6g}, fidelity {report['fidelity']}",
        "x (V):       " + " ".join(f"{v:.6g}" for v in report["x"]),
        f"settle:      {report['settle']}",
    ]
    if "max_error_vs_truth" in report:
        lines.append(f"max error:   {report['max_error_vs_truth']:.3e} (relative)")
    power = report["power"]
    lines.append(f"power (uW):  total {power['p_total']:.6g}, signal {power['p_signal']:.6g}")
    flags = [
        "stable" if report["stable"] else "UNSTABLE",
        "passive" if report["passive"] else "active",
    ]
    if report["saturated"]:
        flags.append("SATURATED")
    if report["censored"]:
        flags.append("censored")
    lines.append("flags:       " + ", ".join(flags))
    for message in report["diagnostics"]:
        lines.append(f"note:        {message}")
    return "\n".join(lines)


def cmd_solve(args: argparse.Namespace) -> int:
    system = parse_system(args.input, args.rhs)
    fidelity = parse_fidelity(args.fidelity, args.model)
    x_true = system.metadata.get("x_true")
    engine = SolveEngine()
    report = engine.solve_system(
        system,
        design=args.design,
        fidelity=fidelity,
        alpha=args.alpha,
        policy=args.policy,
        beta=args.beta,
        x_true=x_true,
        mode=SimMode(args.mode),
        sim=_sim_config(args),
    )
    if report["status"] == STATUS_ERROR:
        sys.stderr.write(f"error: {report['error']}\n")
        return EXIT_ERROR

    if args.report:
        write_json(report, args.report)
    run = engine.last_run
    if args.trajectories:
        write_trajectories(run["result"], args.trajectories)
    if args.netlist:
        with open(args.netlist, "w", encoding="utf-8") as f:
            f.write(export_netlist(run["network"], fidelity, run["config"]))

    _print(to_json(report) if args.emit == "json" else _format_report(report))
    if not report["stable"] or report["saturated"]:
        return EXIT_UNSTABLE
    return EXIT_OK


def _coerce_values(kind: StudyKind, values: Optional[List[str]]) -> tuple:
    if not values:
        return ()
    param = SWEEPS[kind][0]
    if param in ("model", "design"):
        return tuple(values)
    if param == "n":
        return tuple(int(v) for v in values)
    return tuple(float(v) for v in values)


def cmd_sweep(args: argparse.Namespace) -> int:
    kind = StudyKind(args.kind)
    spec_args: Dict[str, Any] = dict(
        kind=kind,
        values=_coerce_values(kind, args.values),
        n=args.n,
        replications=args.replications,
        base_seed=args.seed,
        design=args.design,
        model=args.model,
        t_end=args.t_end,
        samples=args.samples,
        integrator=args.integrator,
        timeout=args.timeout,
        output_csv=args.csv,
        output_json=args.json,
    )
    if args.band_center is not None:
        spec_args["band_center"] = args.band_center
    result = run_study(StudySpec(**spec_args), workers=args.workers, record=args.record or None)
    if args.emit == "json":
        _print(to_json(result.to_dict()))
    else:
        _print(result.summary.to_csv(index=False))
    return EXIT_OK


def cmd_export(args: argparse.Namespace) -> int:
    system = parse_system(args.input, args.rhs)
    fidelity = parse_fidelity(args.fidelity, args.model)
    mapped = SolveEngine().map_system(system, args.design, args.alpha, args.policy, args.beta)
    text = export_netlist(mapped["network"], fidelity, _sim_config(args))
    if args.netlist:
        with open(args.netlist, "w", encoding="utf-8") as f:
            f.write(text)
        logger.info(f"Wrote {args.netlist}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    summary = run_acceptance_suite(quick=args.quick, seed=args.seed)
    if args.json:
        write_json(summary, args.json)
    _print(to_json(summary))
    return EXIT_OK if summary["passed"] else EXIT_ERROR


def cmd_count(args: argparse.Namespace) -> int:
    designs = [args.design] if args.design else [d.value for d in Design]
    if args.input:
        system = parse_system(args.input)
        records, strategies = [], []
        for design in designs:
            net = SolveEngine().map_system(system, design)["network"]
            records.append(count_components(net).to_dict())
            if args.strategies:
                strategies.extend(dict(design=design, **row) for row in column_sum_strategies(net))
    elif args.n is not None:
        records = [dict(design=design, n=args.n, **dense_counts(design, args.n)) for design in designs]
        strategies = []
    else:
        raise CommandError("count needs either n or --input")
    if args.emit == "json":
        _print(to_json({"counts": records, "column_sums": strategies} if strategies else records))
    else:
        _print(pd.DataFrame(records).to_csv(index=False))
        if strategies:
            _print(pd.DataFrame(strategies).to_csv(index=False))
    return EXIT_OK


COMMANDS = {
    "map": cmd_map,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "export": cmd_export,
    "verify": cmd_verify,
    "count": cmd_count,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        configure(args)
        _check_flags(args)
        return COMMANDS[args.command](args)
    except CommandError as e:
        sys.stderr.write(f"error: cli: {e}\n")
        return EXIT_ERROR
    except Exception as e:
        logger.debug("command failed", exc_info=True)
        sys.stderr.write(f"error: {qualified_error(e)}\n")
        return EXIT_ERROR
    finally:
        use_settings(None)
        reset_device_library()


if __name__ == "__main__":
    sys.exit(main())
