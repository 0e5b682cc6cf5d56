import logging
from core.configuration import config, PROJECT_NAME, VERSION
logging.basicConfig(level=config.VERBOSITY)

import argparse
import sys
from os import path
from typing import Callable, Dict, List, Optional

from core.boundary import boundary_report, mean_exit_time
from core.chain import irreducibility_report, symmetrizing_basis
from core.exception import DiffusionException, EmptyCone, SpecFileException
from core.form import DiffusionSpec, FormFunction, Variant, energy, is_regular_subspace, membership
from core.montecarlo import SimConfig, estimate_exit_time, estimate_hitting, estimate_survival, simulate_paths
from core.named import NAMED_EXAMPLES, build_named_example, named_function
from core.reporting import (
    EXIT_TIME_COLUMNS,
    HITTING_COLUMNS,
    PATH_COLUMNS,
    SURVIVAL_COLUMNS,
    format_report,
    format_table,
    report_to_json,
    rows_to_csv,
    save_xlsx,
)
from core.specfile import dump_spec, load_chain, load_form_function, load_spec, to_canonical_json
from core.state import RunState, SimulationStatisticsState
from core.utilities import TimedContext, encode_real
from core.verdict import Verdict

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_EXPECTATION_FAILED = 1
EXIT_INPUT_ERROR = 2


##
# Inputs
##
def resolve_spec(argument: str) -> DiffusionSpec:
    """
    A spec file path, or the name of a built-in example when no such file exists.
    """
    if path.isfile(argument):
        return load_spec(argument)
    if argument in NAMED_EXAMPLES:
        return build_named_example(argument)
    raise SpecFileException("", f"'{argument}' is neither a spec file nor a named example")


def resolve_function(argument: str, spec: DiffusionSpec, scale_argument: Optional[str]) -> FormFunction:
    """
    A form function file, or a named function (scale, component:<i>, constant:<v>) over the scale of
    `scale_argument` (defaults to the spec's own scale).
    """
    scale = resolve_spec(scale_argument).s if scale_argument else spec.s
    if path.isfile(argument):
        return load_form_function(argument, scale)
    return named_function(scale, argument)


def simulation_config(args: argparse.Namespace) -> SimConfig:
    overrides = {
        name: getattr(args, name)
        for name in ("step_h", "max_steps", "workers")
        if getattr(args, name) is not None
    }
    return SimConfig(seed=args.seed, **overrides)


##
# Commands
# Each command fills the run state and returns the yes/no verdict --expect compares against (None if none).
##
def command_classify(args: argparse.Namespace, state: RunState) -> Optional[bool]:
    spec = resolve_spec(args.spec)
    state.specs["spec"] = spec
    state.report = boundary_report(spec, args.tol)
    return state.report["conservative"] == "yes"


def command_energy(args: argparse.Namespace, state: RunState) -> Optional[bool]:
    spec = resolve_spec(args.spec)
    u = resolve_function(args.u, spec, args.function_scale)
    v = resolve_function(args.v, spec, args.function_scale) if args.v else u
    value = energy(spec, u, v, args.tol)
    state.report = {"name": spec.name, "energy": encode_real(value.value), "error": encode_real(value.error)}
    return None


def _verdict_report(verdict: Verdict, **extra) -> dict:
    return {**extra, **verdict.dump()}


def command_membership(args: argparse.Namespace, state: RunState) -> Optional[bool]:
    spec = resolve_spec(args.spec)
    u = resolve_function(args.function, spec, args.function_scale)
    variant = Variant.ZERO_BOUNDARY if args.zero_boundary else Variant.FULL
    verdict = membership(spec, u, variant, args.tol)
    state.report = _verdict_report(verdict, name=spec.name, variant=variant.value)
    return verdict.is_yes


def command_subspace(args: argparse.Namespace, state: RunState) -> Optional[bool]:
    sub = resolve_spec(args.sub)
    sup = resolve_spec(args.sup)
    verdict = is_regular_subspace(sub, sup)
    state.report = _verdict_report(verdict, sub=sub.name, sup=sup.name)
    return verdict.is_yes


def command_simulate(args: argparse.Namespace, state: RunState) -> Optional[bool]:
    spec = resolve_spec(args.spec)
    results = simulate_paths(spec, args.x0, args.a, args.b, args.n, simulation_config(args))

    state.statistics = SimulationStatisticsState()
    state.statistics.record_all(results)
    state.columns = PATH_COLUMNS
    state.rows = [
        {
            "spec_id": spec.name,
            "path": index,
            "terminal": result.terminal.value,
            "lifetime": result.lifetime,
            "steps": result.steps,
        }
        for index, result in enumerate(results)
    ]
    return None


def command_hitting(args: argparse.Namespace, state: RunState) -> Optional[bool]:
    spec = resolve_spec(args.spec)
    cfg = simulation_config(args)
    window = (args.a, args.x, args.b)
    if any(value is None for value in window) and any(value is not None for value in window):
        raise SpecFileException("", "--a, --x and --b must be given together")
    triples = [window] if args.a is not None else []
    triples.extend(tuple(triple) for triple in args.triple or [])
    if not triples:
        raise SpecFileException("", "hitting needs --a/--x/--b or at least one --triple")

    estimates = []
    for a, x, b in triples:
        estimate = estimate_hitting(spec, a, x, b, args.n, cfg)
        if estimate.flagged:
            log.warning(f"({a}, {x}, {b}): {estimate.censored_fraction:.2%} of the paths were censored")
        estimates.append(estimate)

    state.columns = HITTING_COLUMNS
    state.rows = [estimate.as_row() for estimate in estimates]
    return all(estimate.passed for estimate in estimates)


def command_exit_time(args: argparse.Namespace, state: RunState) -> Optional[bool]:
    spec = resolve_spec(args.spec)
    estimate = estimate_exit_time(spec, args.a, args.x, args.b, args.n, simulation_config(args))
    row = estimate.as_row()
    row["formula_mean"] = mean_exit_time(spec, args.a, args.x, args.b, args.tol).value

    state.columns = EXIT_TIME_COLUMNS
    state.rows = [row]
    return None


def command_survival(args: argparse.Namespace, state: RunState) -> Optional[bool]:
    spec = resolve_spec(args.spec)
    estimate = estimate_survival(spec, args.x, args.horizon, args.n, simulation_config(args))
    state.columns = SURVIVAL_COLUMNS
    state.rows = [estimate.as_row()]
    return None


def command_chain_check(args: argparse.Namespace, state: RunState) -> Optional[bool]:
    chain = load_chain(args.chain)
    report = irreducibility_report(chain, args.alpha)
    try:
        cone = symmetrizing_basis(chain).dump()
    except EmptyCone:
        cone = {"dimension": 0, "basis": []}

    state.report = {"n": chain.n, "resolvent": report.dump(), "symmetrizing_cone": cone}
    return report.consistent


def command_example(args: argparse.Namespace, state: RunState) -> Optional[bool]:
    spec = build_named_example(args.name, signed=args.signed)
    document = to_canonical_json(dump_spec(spec))
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as output_file:
            output_file.write(document)
        log.info(f"Wrote {spec.name} to \"{args.output}\"")
    else:
        sys.stdout.write(document)
    return None


COMMANDS: Dict[str, Callable[[argparse.Namespace, RunState], Optional[bool]]] = {
    "classify": command_classify,
    "energy": command_energy,
    "membership": command_membership,
    "subspace": command_subspace,
    "simulate": command_simulate,
    "hitting": command_hitting,
    "exit-time": command_exit_time,
    "survival": command_survival,
    "chain-check": command_chain_check,
    "example": command_example,
}


##
# Argument parsing
##
def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--pretty", action="store_true", help="Aligned table instead of JSON/CSV.")
    parser.add_argument("--expect", choices=["yes", "no"], help="Exit with 1 when the verdict differs.")
    parser.add_argument("--tol", type=float, default=None, help="Absolute tolerance (default from config).")


def _add_simulation(parser: argparse.ArgumentParser):
    parser.add_argument("--n", type=int, required=True, help="Number of paths.")
    parser.add_argument("--seed", type=int, required=True, help="Random seed (required for reproducibility).")
    parser.add_argument("--step-h", dest="step_h", type=float, default=None, help="Natural-scale step.")
    parser.add_argument("--max-steps", dest="max_steps", type=int, default=None, help="Censoring step count.")
    parser.add_argument("--workers", type=int, default=None, help="Worker processes.")
    parser.add_argument("--xlsx", action="store_true", help="Also save the rows into a spreadsheet.")


def _add_window(parser: argparse.ArgumentParser, start_name: str = "--x", required: bool = True):
    parser.add_argument("--a", type=float, required=required, help="Left end of the window.")
    parser.add_argument(start_name, type=float, required=required, help="Starting point.")
    parser.add_argument("--b", type=float, required=required, help="Right end of the window.")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diffusions",
        description="One-dimensional diffusions given by scale, speed and killing measures.",
    )
    parser.add_argument("--version", action="version", version=f"{PROJECT_NAME} {VERSION}")
    commands = parser.add_subparsers(dest="command", required=True)

    classify = commands.add_parser("classify", help="Boundary classes, dissipativity, recurrence, conservativeness.")
    classify.add_argument("spec", help="Spec file or example name.")
    _add_common(classify)

    energy_parser = commands.add_parser("energy", help="The form E(u, v).")
    energy_parser.add_argument("spec")
    energy_parser.add_argument("--u", required=True, help="Function file or scale | component:<i> | constant:<v>.")
    energy_parser.add_argument("--v", default=None, help="Second function (defaults to u).")
    energy_parser.add_argument("--function-scale", dest="function_scale", default=None,
                               help="Spec whose scale the named functions refer to.")
    _add_common(energy_parser)

    membership_parser = commands.add_parser("membership", help="Is u in the form domain?")
    membership_parser.add_argument("spec")
    membership_parser.add_argument("--function", required=True)
    membership_parser.add_argument("--function-scale", dest="function_scale", default=None)
    membership_parser.add_argument("--zero-boundary", dest="zero_boundary", action="store_true",
                                   help="Require u = 0 at regular boundaries.")
    _add_common(membership_parser)

    subspace = commands.add_parser("subspace", help="Is --sub a regular subspace of --sup?")
    subspace.add_argument("--sub", required=True)
    subspace.add_argument("--sup", required=True)
    _add_common(subspace)

    simulate = commands.add_parser("simulate", help="Simulate paths, one CSV row per path.")
    simulate.add_argument("spec")
    _add_window(simulate, "--x0")
    _add_simulation(simulate)
    _add_common(simulate)

    hitting = commands.add_parser("hitting", help="Estimate P(exit on the right) against the scale formula.")
    hitting.add_argument("spec")
    _add_window(hitting, required=False)
    hitting.add_argument("--triple", nargs=3, type=float, action="append", metavar=("A", "X", "B"),
                         help="Additional (a, x, b) window, repeatable.")
    _add_simulation(hitting)
    _add_common(hitting)

    exit_time = commands.add_parser("exit-time", help="Estimate the mean exit time against the Green kernel.")
    exit_time.add_argument("spec")
    _add_window(exit_time)
    _add_simulation(exit_time)
    _add_common(exit_time)

    survival = commands.add_parser("survival", help="Fraction of paths alive at a horizon.")
    survival.add_argument("spec")
    survival.add_argument("--x", type=float, required=True)
    survival.add_argument("--horizon", type=float, required=True)
    _add_simulation(survival)
    _add_common(survival)

    chain_check = commands.add_parser("chain-check", help="Irreducibility, resolvent pattern and symmetrizing cone.")
    chain_check.add_argument("chain", help="Chain file ({rates, killing} or {spec, grid}).")
    chain_check.add_argument("--alpha", type=float, default=None)
    _add_common(chain_check)

    example = commands.add_parser("example", help="Write a named example spec file.")
    example.add_argument("name", choices=sorted(NAMED_EXAMPLES))
    example.add_argument("--signed", action="store_true", help="Whole-line variant of rational_windows.")
    example.add_argument("--output", default=None, help="Output path (defaults to stdout).")

    return parser


##
# Output
##
def write_output(args: argparse.Namespace, state: RunState):
    pretty = getattr(args, "pretty", False)
    if state.report is not None:
        sys.stdout.write(format_report(state.report) if pretty else report_to_json(state.report))
    if state.rows:
        sys.stdout.write(format_table(state.rows, state.columns) if pretty else rows_to_csv(state.rows, state.columns))
        if getattr(args, "xlsx", False):
            save_xlsx(state.rows, state.columns)


def print_end_stats(state: RunState):
    """
    Log the terminal counters of simulated paths.
    """
    stats = state.statistics
    if stats is None or stats.paths == 0:
        return

    def share(count: int) -> str:
        return f"{count} ({round(count / stats.paths * 100, 1)}%)"

    log.info(f"Path statistics:\n"
             f"  Exited left: {share(stats.hit_left)}\n"
             f"  Exited right: {share(stats.hit_right)}\n"
             f"  Killed: {share(stats.killed)}\n"
             f"  Censored: {share(stats.censored)}\n"
             f"  Mean steps per path: {round(stats.total_steps / stats.paths, 1)}")


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main entry point for this script.

    Steps:
        1) Parses the command line
        2) Loads the spec files (or builds the named examples) and runs the command
        3) Writes the JSON report or CSV rows (aligned tables with --pretty)
        4) Compares the verdict with --expect

    Returns:
        0 on success, 1 when the verdict differs from --expect, 2 on input errors.
    """
    args = build_parser().parse_args(argv)
    state = RunState(args.command)

    try:
        with TimedContext(f"Command {args.command} took {{time}}s", callback=log.info):
            verdict = COMMANDS[args.command](args, state)
    except DiffusionException as e:
        log.error(f"{args.command}: {e}")
        return EXIT_INPUT_ERROR

    write_output(args, state)
    print_end_stats(state)

    expect = getattr(args, "expect", None)
    if expect is not None and verdict is not None and verdict != (expect == "yes"):
        log.warning(f"Verdict differs from the expected '{expect}'")
        state.exit_code = EXIT_EXPECTATION_FAILED
    return state.exit_code


if __name__ == '__main__':
    sys.exit(main())
