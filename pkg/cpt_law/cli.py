#!/usr/bin/env python3
import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

from .config import DEFAULT_CPT_STEPS, DEFAULT_GRID_POINTS, DEFAULT_LAMBDA, DEFAULT_PEAK_LR, DEFAULT_TURNING_CANDIDATES, log_level
from .errors import NumericalError


EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

logger = logging.getLogger(__name__)


@dataclass
class CommandOutcome:
    exit_code: int
    report_paths: List[str] = field(default_factory=list)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(f"{self.prog}: error: {message}")


def _area_point(text: str) -> Dict[str, float]:
    """'s1pt=0.008,s2pt=0,s1cpt=0.002,s2cpt=0' -> {'s1_pt': 0.008, ...}"""
    names = {"s1pt": "s1_pt", "s2pt": "s2_pt", "s1cpt": "s1_cpt", "s2cpt": "s2_cpt"}
    out: Dict[str, float] = {}
    for part in text.split(","):
        if not part.strip():
            continue
        key, sep, value = part.partition("=")
        key = key.strip().lower().replace("_", "")
        if not sep or key not in names:
            raise argparse.ArgumentTypeError(f"expected s1pt=..,s2pt=..,s1cpt=..,s2cpt=.., got {part!r}")
        try:
            out[names[key]] = float(value)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"not a number: {value!r}") from exc
    for required in ("s1_pt", "s2_pt"):
        if required not in out:
            raise argparse.ArgumentTypeError(f"missing {required.replace('_', '')}")
    return out


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="cpt-law",
        description="Fit, predict and optimise continual pre-training loss curves from learning-rate schedules.",
        add_help=True,
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="More logging (-v info, -vv debug)")
    sub = parser.add_subparsers(dest="command", metavar="<command>")
    sub.required = True

    p = sub.add_parser("areas", help="Forward / annealing area trace of a schedule")
    p.add_argument("--schedule", required=True, help="Schedule JSON")
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA, help=f"Momentum decay (default: {DEFAULT_LAMBDA})")
    p.add_argument("--out", default="trace.csv", help="CSV output path (default: trace.csv)")
    p.add_argument("--epsilon", type=float, default=0.0, help="LR-weight exponent for S2 (default: 0)")
    p.add_argument("--reset-momentum", action="store_true", help="Restart momentum at the PT/CPT boundary")
    p.add_argument("--plot", help="Optional SVG chart path")

    p = sub.add_parser("fit", help="Fit law parameters to loss logs")
    p.add_argument("--manifest", required=True, help="Run manifest JSON")
    p.add_argument("--config", help="FitConfig JSON")
    p.add_argument("--out", default="fit_result.json", help="Report path (default: fit_result.json)")
    p.add_argument("--seed", type=int, help="Override the config seed")
    p.add_argument("--domain", choices=["pt", "cpt"], help="Override the config domain")

    p = sub.add_parser("predict", help="Predicted loss curve for a schedule")
    p.add_argument("--params", required=True, help="LawParams JSON or fit report")
    p.add_argument("--schedule", required=True, help="Schedule JSON")
    p.add_argument("--out", default="curve.csv", help="CSV output path (default: curve.csv)")
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    p.add_argument("--r-cpt", type=float, default=1.0, help="CPT-data fraction (default: 1)")
    p.add_argument("--N", type=float, default=1.0, help="Non-embedding parameter count (default: 1)")
    p.add_argument("--domain", choices=["pt", "cpt"], default="pt")
    p.add_argument("--include-pt", action="store_true", help="Also predict PT steps")
    p.add_argument("--plot", help="Optional SVG chart path")

    p = sub.add_parser("simulate", help="Synthetic loss logs from a known law")
    p.add_argument("--spec", required=True, help="SynthSpec JSON")
    p.add_argument("--out", default="dataset", help="Output directory (default: dataset)")
    p.add_argument("--seed", type=int, help="Override the spec seed")

    p = sub.add_parser("optimize", help="Optimal CPT knob for balance weights")
    p.add_argument("--knob", required=True, choices=["loss_potential", "peak_lr", "replay_ratio", "cpt_steps"])
    p.add_argument("--lambda1", required=True, type=float, help="Weight of the D_pt loss change")
    p.add_argument("--params-pt", required=True, help="D_pt LawParams JSON or fit report")
    p.add_argument("--params-cpt", required=True, help="D_cpt LawParams JSON or fit report")
    p.add_argument("--out", default="optimum.json", help="Report path (default: optimum.json)")
    p.add_argument("--curve-out", help="(knob, objective) CSV path")
    p.add_argument("--template", help="ScheduleTemplate JSON")
    p.add_argument("--scratch", action="store_true", help="Model trained from scratch on the mixture")
    p.add_argument("--lo", type=float, help="Lower end of the knob range")
    p.add_argument("--hi", type=float, help="Upper end of the knob range")
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    p.add_argument("--grid-points", type=int, default=DEFAULT_GRID_POINTS)
    p.add_argument("--plot", help="Optional SVG chart path")

    p = sub.add_parser("ood", help="Fit D_ood as a combination of D_pt and D_cpt curves")
    p.add_argument("--log", required=True, help="Loss-log CSV")
    p.add_argument("--pt-col", default="loss_pt")
    p.add_argument("--cpt-col", default="loss_cpt")
    p.add_argument("--ood-col", default="loss_ood")
    p.add_argument("--mode", choices=["ols", "nonnegative", "sum_to_one"], default="ols")
    p.add_argument("--out", default="ood_coeffs.json")

    p = sub.add_parser("eval", help="Evaluate the law at given areas")
    p.add_argument("--params", required=True)
    p.add_argument("--at", required=True, type=_area_point, help="s1pt=..,s2pt=..,s1cpt=..,s2cpt=..")
    p.add_argument("--r-cpt", type=float, default=1.0)
    p.add_argument("--N", type=float, default=1.0)
    p.add_argument("--domain", choices=["pt", "cpt"], default="pt")

    p = sub.add_parser("turning", help="CPT steps needed for D_pt loss to return to its starting value")
    p.add_argument("--params-pt", required=True)
    p.add_argument("--params-cpt", help="With --lambda1: turning length of the composite loss")
    p.add_argument("--lambda1", type=float)
    p.add_argument("--template", help="ScheduleTemplate JSON")
    p.add_argument("--lo", type=int, default=1)
    p.add_argument("--cap", type=int, default=DEFAULT_CPT_STEPS)
    p.add_argument("--candidates", type=int, default=DEFAULT_TURNING_CANDIDATES)
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    p.add_argument("--out", help="Optional JSON report")

    p = sub.add_parser("critical", help="Whether any CPT length can bring D_pt loss below the checkpoint")
    p.add_argument("--params-pt", required=True)
    p.add_argument("--s1-pt", required=True, type=float)
    p.add_argument("--s2-pt", required=True, type=float)
    p.add_argument("--cap", type=int, default=DEFAULT_CPT_STEPS)
    p.add_argument("--peak-lr", type=float, default=DEFAULT_PEAK_LR)
    p.add_argument("--r-cpt", type=float, default=1.0)
    p.add_argument("--N", type=float, default=1.0)
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    p.add_argument("--out", help="Optional JSON report")
    return parser


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_areas(args: argparse.Namespace) -> List[str]:
    from cpt_app.schemas import AreasInput
    from cpt_app.tools.areas_tool import areas_tool

    out = areas_tool(
        AreasInput(
            schedule_path=args.schedule,
            lam=args.lam,
            out=args.out,
            lr_weight_epsilon=args.epsilon,
            reset_momentum_at_boundary=args.reset_momentum,
            plot=args.plot,
        )
    )
    print(f"Steps:    {out.steps} (boundary {out.boundary})")
    print(f"S1:       {out.s1_final:.10g} (PT {out.s1_pt:.10g})")
    print(f"S2:       {out.s2_final:.10g} (PT {out.s2_pt:.10g})")
    print(f"Wrote area trace to: {out.csv_path}")
    return [out.csv_path] + ([out.plot_path] if out.plot_path else [])


def _cmd_fit(args: argparse.Namespace) -> List[str]:
    from cpt_app.schemas import FitInput
    from cpt_app.tools.fit_tool import fit_tool

    out = fit_tool(
        FitInput(manifest_path=args.manifest, config_path=args.config, out=args.out, seed=args.seed, domain=args.domain)
    )
    print(f"Objective (Huber, log loss): {out.objective:.6g}")
    for domain, r2 in out.r_squared.items():
        print(f"  {domain}: R^2 = {r2:.6f}, Huber = {out.huber_per_domain.get(domain, float('nan')):.6g}")
    print(f"Best start: #{out.start_index} (converged: {out.converged})")
    if out.fitted_s1_pt is not None:
        print(f"Fitted S1_pt: {out.fitted_s1_pt:.6g}")
    print(f"Wrote fit report to: {out.report_path}")
    return [out.report_path]


def _cmd_predict(args: argparse.Namespace) -> List[str]:
    from cpt_app.schemas import PredictInput
    from cpt_app.tools.predict_tool import predict_tool

    out = predict_tool(
        PredictInput(
            params_path=args.params,
            schedule_path=args.schedule,
            out=args.out,
            lam=args.lam,
            r_cpt=args.r_cpt,
            N=args.N,
            domain=args.domain,
            include_pt=args.include_pt,
            plot=args.plot,
        )
    )
    print(f"Predicted {out.n_steps} steps, final loss {out.final_loss:.6g}")
    print(f"Wrote curve to: {out.csv_path}")
    return [out.csv_path] + ([out.plot_path] if out.plot_path else [])


def _cmd_simulate(args: argparse.Namespace) -> List[str]:
    from cpt_app.schemas import SimulateInput
    from cpt_app.tools.simulate_tool import simulate_tool

    out = simulate_tool(SimulateInput(spec_path=args.spec, out_dir=args.out, seed=args.seed))
    print(f"Generated {out.n_runs} runs")
    print(f"Wrote manifest to: {out.manifest_path}")
    return out.paths


def _cmd_optimize(args: argparse.Namespace) -> List[str]:
    from cpt_app.schemas import OptimizeInput
    from cpt_app.tools.optimize_tool import optimize_tool

    out = optimize_tool(
        OptimizeInput(
            knob=args.knob,
            lambda1=args.lambda1,
            params_pt_path=args.params_pt,
            params_cpt_path=args.params_cpt,
            out=args.out,
            curve_out=args.curve_out,
            template_path=args.template,
            scratch=args.scratch,
            lo=args.lo,
            hi=args.hi,
            lam=args.lam,
            grid_points=args.grid_points,
            plot=args.plot,
        )
    )
    print(f"Optimal {args.knob}: {out.knob_value:.6g}")
    print(f"  objective {out.objective:.6g} (dL_pt {out.delta_pt:+.6g}, dL_cpt {out.delta_cpt:+.6g})")
    print(f"Wrote report to: {out.report_path}")
    return [out.report_path, out.curve_path] + ([out.plot_path] if out.plot_path else [])


def _cmd_ood(args: argparse.Namespace) -> List[str]:
    from cpt_app.schemas import OodInput
    from cpt_app.tools.ood_tool import ood_tool

    out = ood_tool(
        OodInput(
            log_path=args.log, pt_col=args.pt_col, cpt_col=args.cpt_col, ood_col=args.ood_col, mode=args.mode, out=args.out
        )
    )
    print(f"D_ood = {out.lambda1p:.6g} * D_pt + {out.lambda2p:.6g} * D_cpt (rmse {out.residual_rmse:.3g})")
    print(f"Wrote coefficients to: {out.report_path}")
    return [out.report_path]


def _cmd_eval(args: argparse.Namespace) -> List[str]:
    from cpt_app.schemas import EvalInput
    from cpt_app.tools.eval_tool import eval_tool

    out = eval_tool(EvalInput(params_path=args.params, r_cpt=args.r_cpt, N=args.N, domain=args.domain, **args.at))
    print(json.dumps(out.breakdown, indent=2))
    for problem in out.violations:
        print(f"Warning: {problem}", file=sys.stderr)
    return []


def _cmd_turning(args: argparse.Namespace) -> List[str]:
    from cpt_app.schemas import TurningInput
    from cpt_app.tools.turning_tool import turning_tool

    out = turning_tool(
        TurningInput(
            params_pt_path=args.params_pt,
            params_cpt_path=args.params_cpt,
            lambda1=args.lambda1,
            template_path=args.template,
            lo=args.lo,
            cap=args.cap,
            candidates=args.candidates,
            lam=args.lam,
            out=args.out,
        )
    )
    if out.reachable:
        print(f"Turning length: {out.steps} steps")
    else:
        print(f"Turning length: unreachable within {out.cap} steps")
    return [out.report_path] if out.report_path else []


def _cmd_critical(args: argparse.Namespace) -> List[str]:
    from cpt_app.schemas import CriticalInput
    from cpt_app.tools.critical_tool import critical_tool

    out = critical_tool(
        CriticalInput(
            params_pt_path=args.params_pt,
            s1_pt=args.s1_pt,
            s2_pt=args.s2_pt,
            cap=args.cap,
            peak_lr=args.peak_lr,
            r_cpt=args.r_cpt,
            N=args.N,
            lam=args.lam,
            out=args.out,
        )
    )
    verdict = "reachable" if out.reachable else "not reachable"
    print(f"Starting D_pt loss: {out.start_loss:.6g}")
    print(f"Lowest final D_pt loss: {out.infimum_loss:.6g} at {out.argmin_steps} CPT steps ({verdict})")
    return [out.report_path] if out.report_path else []


_COMMANDS: Dict[str, Callable[[argparse.Namespace], List[str]]] = {
    "areas": _cmd_areas,
    "fit": _cmd_fit,
    "predict": _cmd_predict,
    "simulate": _cmd_simulate,
    "optimize": _cmd_optimize,
    "ood": _cmd_ood,
    "eval": _cmd_eval,
    "turning": _cmd_turning,
    "critical": _cmd_critical,
}


def _configure_logging(verbose: int) -> None:
    level = log_level()
    if verbose == 1:
        level = logging.INFO
    elif verbose >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def run(argv: Optional[Sequence[str]] = None) -> CommandOutcome:
    parser = _build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return CommandOutcome(EXIT_USAGE)
    except SystemExit as exc:  # --help
        return CommandOutcome(int(exc.code or 0))

    _configure_logging(args.verbose)
    try:
        paths = _COMMANDS[args.command](args)
    except (NumericalError, ArithmeticError) as exc:
        print(f"Error: numerical failure: {exc}", file=sys.stderr)
        return CommandOutcome(EXIT_NUMERICAL)
    except (ValueError, OSError) as exc:
        # DataError, pydantic ValidationError and JSONDecodeError are all ValueErrors.
        print(f"Error: {exc}", file=sys.stderr)
        return CommandOutcome(EXIT_DATA)
    return CommandOutcome(EXIT_OK, [p for p in paths if p])


def main(argv: Optional[Sequence[str]] = None) -> int:
    return run(argv).exit_code


if __name__ == "__main__":
    sys.exit(main())
