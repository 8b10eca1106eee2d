#!/usr/bin/env python3
"""Command-line front end for the peaks solver."""

import sys
import logging
import argparse
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

from .errors import EnvelopeClassError, ParameterError, PeaksError
from .core.gallery import (
    ArtifactChoice,
    ExampleParams,
    canonical_artifacts,
    closed_forms,
    reproduce_tables,
    worked_example_system,
)
from .core.klgen import klgen_from_pair, pair_from_klgen, verify_klgen_bound
from .core.lyapunov import (
    ImmediateOptimum,
    hahn_majorant_pair,
    operator_ratio,
    pair_from_lyapunov,
    verify_certificate,
    verify_opt_lyapunov,
    yoshizawa_construct,
)
from .core.pairs import UsefulPair, beta_interval, solve_stop, verify_pair
from .core.problem_file import ProblemFile
from .core.settings import SolverSettings
from .core.systems import DynamicalSystem, PeaksSolution, nu_oracle, solve_peaks
from .utils.expr import constant
from .utils.file_utils import FileUtils
from .utils.report import Report

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

logger = logging.getLogger(__name__)

ROUTES = ("auto", "pair", "klgen", "lyapunov", "classical")
CONVERSIONS = ("pair-to-klgen", "klgen-to-pair", "pair-to-lyapunov", "lyapunov-to-pair")


def setup_logging(verbose: bool = False, quiet: bool = False) -> None:
    """Configure the root logger once; later calls only change the level."""
    logging.basicConfig(level=logging.INFO, format=LOG_FORMAT)
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.getLogger().setLevel(level)


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per pipeline."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--input', type=Path, help="problem file (JSON)")
    common.add_argument('--grid', type=int, help="grid points per static problem")
    common.add_argument('--refine', type=int, help="local refinement rounds")
    common.add_argument('--horizon', type=int, help="verification horizon")
    common.add_argument('--tolerance', type=float, help="domination tolerance")
    common.add_argument('--format', choices=("text", "csv"), default="text")
    common.add_argument('--save', type=Path, help="also write the report as JSON")
    noise = common.add_mutually_exclusive_group()
    noise.add_argument('--verbose', '-v', action='store_true')
    noise.add_argument('--quiet', '-q', action='store_true')

    parser = argparse.ArgumentParser(prog="peaks", description="Peaks computation solver")
    commands = parser.add_subparsers(dest='command', required=True)

    solve = commands.add_parser('solve', parents=[common], help="solve the peaks problem of a file")
    solve.add_argument('--route', choices=ROUTES, default="auto", help="certificate used to stop")

    verify = commands.add_parser('verify', parents=[common], help="check a certificate")
    verify.add_argument('kind', choices=("pair", "klgen", "lyapunov"))

    convert = commands.add_parser('convert', parents=[common], help="turn one certificate into another")
    convert.add_argument('mapping', choices=CONVERSIONS)

    tables = commands.add_parser('tables', parents=[common], help="reproduce a published table")
    tables.add_argument('which', type=int, choices=(1, 2, 3))
    tables.add_argument('--numeric', action='store_true', help="table 1 from static solves")

    example = commands.add_parser('example', parents=[common], help="solve the worked example")
    example.add_argument('--p', required=True)
    example.add_argument('--mu', required=True)
    example.add_argument('--pair', choices=("pairA", "pairB", "h_zeta"), default="pairB")
    example.add_argument('--zeta', help="h_zeta margin (default: half the admissible range)")
    return parser


def _settings(args: argparse.Namespace, problem: Optional[ProblemFile] = None) -> SolverSettings:
    settings = SolverSettings.load()
    if problem is not None:
        settings = problem.settings(settings)
    return settings.with_overrides(grid=args.grid, refine_rounds=args.refine,
                                   horizon=args.horizon, tolerance=args.tolerance)


def _problem(args: argparse.Namespace) -> ProblemFile:
    if args.input is None:
        raise ParameterError(f"'{args.command}' needs --input <problem file>")
    return ProblemFile.load(args.input)


def _bounded(system: DynamicalSystem, settings: SolverSettings) -> DynamicalSystem:
    """The system with the configured divergence threshold."""
    return replace(system, divergence_threshold=settings.divergence_threshold)


def _require(value, what: str):
    if value is None:
        raise ParameterError(f"The problem file does not provide {what}")
    return value


def _add_pair(report: Report, pair: UsefulPair) -> None:
    report.add("h", pair.h.label)
    report.add("beta", pair.beta)
    report.add("h(0)", pair.h.h0)
    report.add("verified_horizon", pair.verified_horizon)
    report.add("useful", pair.useful)
    report.attach("beta", pair.beta)


def _solution_report(title: str, system: DynamicalSystem, solution: PeaksSolution) -> Report:
    report = Report(title)
    report.add("system", system.label)
    _add_pair(report, solution.pair_used)
    report.add("K_bound", solution.K_bound)
    report.add("static_problems", solution.static_solves)
    report.add("formula_evaluations", solution.formula_evaluations)
    report.add_nu("nu_opt", solution.nu_opt)
    report.add("k_opt", solution.k_opt)
    report.add("k_greatest", solution.k_greatest)
    report.add("x_opt", solution.x_opt)
    report.attach("x_opt", solution.x_opt)
    suspect = [r.k for r in solution.static_results if r.suspect]
    if suspect:
        report.add("suspect_static_problems", suspect)
    return report


def _stop_report(report: Report, pair: UsefulPair, settings: SolverSettings) -> None:
    result = solve_stop(pair.sequence, pair, settings.tolerance, settings.argmax_tolerance,
                        settings.max_stop_horizon)
    report.add("K_bound", result.K)
    report.add_nu("nu_opt", result.max_value)
    report.add("argmax", result.argmax)


def _route_pair(problem: ProblemFile, route: str, system: DynamicalSystem,
                settings: SolverSettings) -> Tuple[object, DynamicalSystem]:
    """The pair selected by the route, or an immediate optimum."""
    if route == "auto":
        route = next((r for r, present in (("pair", problem.pair), ("klgen", problem.klgen),
                                           ("lyapunov", problem.lyapunov)) if present), "pair")
    if route == "pair":
        spec = _require(problem.pair, "pair")
        return UsefulPair(spec.h, spec.beta), system

    seq = nu_oracle(system, settings.grid, settings.refine_rounds, settings)
    if route == "klgen":
        spec = _require(problem.klgen, "klgen")
        bound = spec.bound
        m = spec.m if spec.m is not None else bound.gamma.infimum(bound.theta_sup, settings.klgen_t_max)
        return pair_from_klgen(bound, seq, m, settings.horizon, settings.klgen_t_max), system

    spec = _require(problem.lyapunov, "lyapunov")
    if route == "classical":
        if spec.alpha1 is None:
            raise ParameterError("The classical route needs 'alpha1' in the lyapunov section")
        shifted = system.shifted()
        pair = hahn_majorant_pair(shifted, spec.V, spec.alpha1, spec.psi, settings.samples,
                                  settings=settings)
        return pair, shifted

    cand = verify_opt_lyapunov(spec.V, system, _require(spec.lambda_, "lambda"), settings.samples)
    cert = _require(spec.certificate, "certificate")
    return pair_from_lyapunov(cand, cert, seq, settings.horizon), system


def cmd_solve(args: argparse.Namespace) -> Tuple[Report, int]:
    problem = _problem(args)
    settings = _settings(args, problem)
    pair, system = _route_pair(problem, args.route, _bounded(problem.system, settings), settings)
    if isinstance(pair, ImmediateOptimum):
        report = Report(f"Peaks solution: {system.label}")
        report.add("K_bound", pair.K_s)
        report.add_nu("nu_opt", pair.nu_opt)
        report.add("k_opt", 0)
        return report, 0
    solution = solve_peaks(system, pair, settings.grid, settings.refine_rounds, settings,
                           seq=pair.sequence)
    return _solution_report(f"Peaks solution: {system.label}", system, solution), 0


def cmd_verify(args: argparse.Namespace) -> Tuple[Report, int]:
    problem = _problem(args)
    settings = _settings(args, problem)
    system = _bounded(problem.system, settings)
    report = Report(f"Verification of {args.kind}: {system.label}")

    if args.kind == "pair":
        spec = _require(problem.pair, "pair")
        seq = nu_oracle(system, settings.grid, settings.refine_rounds, settings)
        pair = verify_pair(seq, spec.h, spec.beta, settings.horizon, settings.tolerance)
        _add_pair(report, pair)
        report.add("useful_witness", pair.useful_witness)
        report.add("max_at_start", pair.max_at_start)
        try:
            lower, closed = beta_interval(seq, spec.h, settings.horizon)
            report.add("beta_interval", f"[{lower:.6g}, 1)" if closed else "(0, 1)")
            report.attach("beta_inf", lower)
        except EnvelopeClassError as e:
            report.add("beta_interval", f"none ({e})")
        return report, 0 if pair.useful else 1

    if args.kind == "klgen":
        spec = _require(problem.klgen, "klgen")
        result = verify_klgen_bound(spec.bound, system, settings.horizon, settings.samples,
                                    t_max=settings.klgen_t_max)
        report.add("gamma", spec.bound.gamma.label)
        report.add("theta_sup", spec.bound.theta_sup)
        report.add("passed", result.passed)
        report.add("worst_margin", result.worst_margin)
        report.add("useful", result.useful)
        if result.witness is not None:
            report.add("witness", result.witness)
        return report, 0 if result.passed else 1

    spec = _require(problem.lyapunov, "lyapunov")
    cand = verify_opt_lyapunov(spec.V, system, _require(spec.lambda_, "lambda"), settings.samples,
                               tolerance=settings.tolerance, fixed_point_delta=settings.fixed_point_delta)
    ratio = operator_ratio(spec.V, system, 1, settings.samples)
    report.add("V", spec.V.label)
    report.add("lambda", cand.lambda_)
    report.add("V_sup", cand.V_sup)
    report.add("ratio", cand.ratio)
    report.add("in_class_N", ratio.in_class_N)
    status = 0
    if spec.certificate is not None:
        cert = verify_certificate(spec.certificate, spec.V, system, settings.horizon, settings.samples)
        report.add("certificate", spec.certificate.label)
        report.add("certificate_passed", cert.passed)
        report.add("certificate_worst_margin", cert.worst_margin)
        status = 0 if cert.passed else 1
    return report, status


def cmd_convert(args: argparse.Namespace) -> Tuple[Report, int]:
    problem = _problem(args)
    settings = _settings(args, problem)
    system = _bounded(problem.system, settings)
    report = Report(f"Conversion {args.mapping}: {system.label}")
    seq = nu_oracle(system, settings.grid, settings.refine_rounds, settings)

    if args.mapping in ("pair-to-klgen", "pair-to-lyapunov"):
        spec = _require(problem.pair, "pair")
        pair = verify_pair(seq, spec.h, spec.beta, settings.horizon, settings.tolerance)
        if args.mapping == "pair-to-klgen":
            bound = klgen_from_pair(pair, system, settings.horizon, settings.samples, settings)
            check = verify_klgen_bound(bound, system, settings.horizon, settings.samples,
                                       t_max=settings.klgen_t_max)
            report.add("gamma", bound.gamma.label)
            report.add("theta_sup", bound.theta_sup)
            report.attach("theta_sup", bound.theta_sup)
            report.add("useful", bound.useful_flag)
            report.add("passed", check.passed)
            return report, 0 if check.passed else 1

        built = yoshizawa_construct(pair, system, settings.yoshizawa_k_max, settings.samples)
        cert = verify_certificate(built.h_hat, built.V, system, settings.horizon, settings.samples)
        ratio = operator_ratio(built.V, system, 1, settings.samples)
        report.add("V", built.V.label)
        report.add("V_sup", built.V_sup)
        report.add("truncated", built.truncated)
        report.add("ratio", ratio.ratio)
        report.add("certificate_passed", cert.passed)
        return report, 0 if cert.passed else 1

    if args.mapping == "klgen-to-pair":
        spec = _require(problem.klgen, "klgen")
        bound = spec.bound
        m = spec.m if spec.m is not None else bound.gamma.infimum(bound.theta_sup, settings.klgen_t_max)
        pair = pair_from_klgen(bound, seq, m, settings.horizon, settings.klgen_t_max)
    else:
        spec = _require(problem.lyapunov, "lyapunov")
        cand = verify_opt_lyapunov(spec.V, system, _require(spec.lambda_, "lambda"), settings.samples)
        converted = pair_from_lyapunov(cand, _require(spec.certificate, "certificate"), seq, settings.horizon)
        if isinstance(converted, ImmediateOptimum):
            report.add("K_bound", converted.K_s)
            report.add_nu("nu_opt", converted.nu_opt)
            return report, 0
        pair = converted

    _add_pair(report, pair)
    if not pair.useful:
        return report, 1
    _stop_report(report, pair, settings)
    return report, 0


def cmd_tables(args: argparse.Namespace) -> Tuple[str, int]:
    table = reproduce_tables(args.which, args.numeric, _settings(args))
    text = table.render_csv() if args.format == "csv" else table.render_text()
    return text, table.exit_status


def cmd_example(args: argparse.Namespace) -> Tuple[Report, int]:
    params = ExampleParams(constant(args.p), constant(args.mu))
    settings = _settings(args)
    system = _bounded(worked_example_system(params), settings)
    forms = closed_forms(params)
    choice = ArtifactChoice(args.pair)
    zeta = None
    if choice is ArtifactChoice.H_ZETA:
        zeta = constant(args.zeta) if args.zeta is not None else forms.zeta(2.0)
    pair = canonical_artifacts(params, choice, zeta)
    solution = solve_peaks(system, pair, settings.grid, settings.refine_rounds, settings)
    report = _solution_report(f"Worked example {params.label} with {choice.value}", system, solution)
    report.add("n_lower", forms.n_lower)
    report.add("n_upper", forms.n_upper)
    report.add("n_0", forms.n_zero_last)
    return report, 0


COMMANDS: Dict[str, Callable[[argparse.Namespace], Tuple[object, int]]] = {
    'solve': cmd_solve,
    'verify': cmd_verify,
    'convert': cmd_convert,
    'tables': cmd_tables,
    'example': cmd_example,
}


def run_command(argv: List[str]) -> int:
    """Run one command; the report goes to stdout and the exit status is returned."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    setup_logging(args.verbose, args.quiet)

    try:
        output, status = COMMANDS[args.command](args)
    except PeaksError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code

    if isinstance(output, Report):
        sys.stdout.write(output.render(args.format))
        if args.save is not None and not FileUtils.save_json(args.save, output.to_dict(), backup=False):
            logger.warning(f"Could not save the report to {args.save}")
    else:
        sys.stdout.write(str(output))
    return status


def main():
    """Main entry point."""
    return run_command(sys.argv[1:])


if __name__ == '__main__':
    sys.exit(main())
