# Standard library imports
import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

# Third-party imports
import numpy as np

# Add the project root directory to the Python path
project_root = Path(__file__).parent
sys.path.append(str(project_root))

# Local imports
from src.settings import settings
from src.look_and_feel import error, info, set_enabled
from src.linalg import CMatrix, PreconditionError, SingularMatrixError, SVDConvergenceError, operator_norm
from src.mfunc import DifferentiationError, ExpFamily, Pencil, Resolvent, SpectrumProximityError
from src.region import Rectangle, Region
from src.scenario import Scenario, ScenarioError, parse_scenario
from src.report import CERTIFIED, INCONCLUSIVE, REFUTED, VerificationReport
from src.principles import (EmptyDomainError, NotAMaximumError, check_frobenius_principle, check_max_direction,
                            check_max_norm_principle, check_mean_value_identity, check_min_direction,
                            check_min_principle, constancy_report, factorize_at_max, iterated_factorization,
                            locate_extremum, refinement_report, scan_field)
from src.spectral import (cauchy_exp_reconstruction, exp_halfplane_example, laplace_identity_check,
                          pseudospectra_field, resolvent_derivative_identity, resolvent_extrema_check)
from src.output_utils import (RunManifest, dumps_json, explore_frame, field_frame, pseudospectra_frame,
                              scenario_hash, write_frame, write_json)

EXIT_OK = 0
EXIT_REFUTED = 1
EXIT_SCENARIO = 2
EXIT_IO = 3
EXIT_INCONCLUSIVE = 4
EXIT_NOT_APPLICABLE = 5

VERDICT_EXIT = {CERTIFIED: EXIT_OK, REFUTED: EXIT_REFUTED, INCONCLUSIVE: EXIT_INCONCLUSIVE}


class CheckNotApplicableError(ValueError):
    pass


# Argument helpers

def parse_point(text: str) -> complex:
    """'re,im' or a Python-style complex literal where i may stand for j."""
    try:
        if ',' in text:
            re_part, im_part = text.split(',')
            return complex(float(re_part), float(im_part))
        return complex(text.strip().replace('i', 'j'))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}")


def parse_vector(text: str, n: int) -> np.ndarray:
    """'e2' for a standard basis vector, or comma-separated complex entries."""
    text = text.strip()
    if text.startswith('e') and text[1:].isdigit():
        j = int(text[1:])
        if not 1 <= j <= n:
            raise CheckNotApplicableError(f"basis vector {text} does not exist in dimension {n}")
        return np.eye(n, dtype=complex)[:, j - 1]
    try:
        entries = [complex(part.strip().replace('i', 'j')) for part in text.split(',')]
    except ValueError:
        raise CheckNotApplicableError(f"--x expects e<j> or comma-separated complex entries, got {text!r}")
    if len(entries) != n:
        raise CheckNotApplicableError(f"vector has {len(entries)} entries, dimension is {n}")
    return np.array(entries, dtype=complex)


def parse_k(text: str, n: int) -> List[int]:
    if text == 'all':
        return list(range(1, n + 1))
    try:
        k = int(text)
    except ValueError:
        raise CheckNotApplicableError(f"--k expects an index or 'all', got {text!r}")
    if not 1 <= k <= n:
        raise CheckNotApplicableError(f"--k {k} outside 1..{n}")
    return [k]


def _region(scenario: Scenario) -> Region:
    if scenario.region is None:
        raise CheckNotApplicableError("this command needs a region line in the scenario")
    return scenario.region


def _matrix(scenario: Scenario, args: argparse.Namespace) -> CMatrix:
    if args.matrix:
        if args.matrix not in scenario.bindings:
            raise CheckNotApplicableError(f"matrix '{args.matrix}' is not defined in the scenario")
        return scenario.bindings[args.matrix]
    if isinstance(scenario.function, (Pencil, Resolvent, ExpFamily)):
        return scenario.function.A
    raise CheckNotApplicableError("this check needs a matrix scenario (pencil, resolvent or expz) or --matrix")


def _center(region: Region) -> complex:
    if isinstance(region, Rectangle):
        return complex((region.re_min + region.re_max) / 2.0, (region.im_min + region.im_max) / 2.0)
    return complex(region.center)


def _z0(scenario: Scenario, args: argparse.Namespace) -> complex:
    return args.z0 if args.z0 is not None else _center(_region(scenario))


# Checks

def _verify_mean_value(scenario, args):
    F = scenario.function
    z0 = args.z0 if args.z0 is not None else (_center(scenario.region) if scenario.region else 0j)
    r = args.r
    if r is None:
        reach = min(1.0, F.domain_distance(z0))
        if scenario.region is not None:
            reach = min(reach, scenario.region.distance_to_boundary(z0))
        r = 0.5 * reach
    x = parse_vector(args.x, F.n) if args.x else np.eye(F.n, dtype=complex)[:, 0]
    return check_mean_value_identity(F, z0, r, x, K=args.K, N=args.N)


def _verify_max_direction(scenario, args):
    x = parse_vector(args.x, scenario.function.n) if args.x else None
    return check_max_direction(scenario.function, _region(scenario), _z0(scenario, args), Kd=args.K, x=x,
                               samples=args.samples, seed=args.seed)


def _verify_min_direction(scenario, args):
    return check_min_direction(scenario.function, _region(scenario), _z0(scenario, args), Kd=args.K,
                               samples=args.samples, seed=args.seed)


def _verify_factorize(scenario, args):
    z0 = _z0(scenario, args)
    try:
        fac = factorize_at_max(scenario.function, _region(scenario), z0, tau=args.tau,
                               samples=args.samples, seed=args.seed)
    except NotAMaximumError as e:
        return VerificationReport("factorize", INCONCLUSIVE, witnesses={"larger_point": e.point, "larger_value": e.value},
                                  parameters={"z0": z0}, notes=[str(e)])
    return fac.report()


def _verify_iterate(scenario, args):
    return iterated_factorization(scenario.function, _region(scenario), tau=args.tau).report()


def _verify_refinement(scenario, args):
    m = None if args.k == 'all' else parse_k(args.k, scenario.function.n)[0]
    return refinement_report(scenario.function, _region(scenario), m)


def _verify_resolvent_derivative(scenario, args):
    A = _matrix(scenario, args)
    z = args.z if args.z is not None else complex(operator_norm(A) + 1.0)
    return resolvent_derivative_identity(A, z, h=args.h)


def _verify_laplace(scenario, args):
    A = _matrix(scenario, args)
    z = args.z if args.z is not None else complex(operator_norm(A) + 1.0)
    return laplace_identity_check(A, z, eps=args.eps, nodes=args.N)


def _verify_cauchy(scenario, args):
    A = _matrix(scenario, args)
    return cauchy_exp_reconstruction(A, args.t, r=args.r, N=args.N)


CHECKS: Dict[str, Callable[[Scenario, argparse.Namespace], VerificationReport]] = {
    "mean-value": _verify_mean_value,
    "max-direction": _verify_max_direction,
    "min-direction": _verify_min_direction,
    "factorize": _verify_factorize,
    "iterate": _verify_iterate,
    "constancy": lambda s, a: constancy_report(s.function, _region(s)),
    "refinement": _verify_refinement,
    "frobenius": lambda s, a: check_frobenius_principle(s.function, _region(s)),
    "max-norm": lambda s, a: check_max_norm_principle(s.function, _region(s)),
    "min-principle": lambda s, a: check_min_principle(s.function, _region(s)),
    "resolvent": lambda s, a: resolvent_extrema_check(_matrix(s, a), _region(s)),
    "resolvent-derivative": _verify_resolvent_derivative,
    "laplace": _verify_laplace,
    "cauchy": _verify_cauchy,
    "exp-example": lambda s, a: exp_halfplane_example(_region(s)),
}


# Commands

def cmd_scan(scenario: Scenario, args: argparse.Namespace, manifest: RunManifest) -> int:
    field = scan_field(scenario.function, _region(scenario))
    for note in field.notes:
        logging.info(info(note))
    df = field_frame(field, parse_k(args.k, field.n))
    if args.out:
        write_frame(df, args.out)
    else:
        sys.stdout.write(df.to_csv(index=False, na_rep='', lineterminator='\n'))
    return EXIT_OK


def cmd_explore(scenario: Scenario, args: argparse.Namespace, manifest: RunManifest) -> int:
    field = scan_field(scenario.function, _region(scenario))
    df = explore_frame(field)
    if args.out:
        write_frame(df, args.out)
    else:
        sys.stdout.write(df.to_csv(index=False, na_rep='', lineterminator='\n'))
    return EXIT_OK


def cmd_pseudospectra(scenario: Scenario, args: argparse.Namespace, manifest: RunManifest) -> int:
    if not isinstance(scenario.function, (Pencil, Resolvent)) and not args.matrix:
        raise CheckNotApplicableError("pseudospectra needs a pencil or resolvent scenario, or --matrix")
    pseudo = pseudospectra_field(_matrix(scenario, args), _region(scenario))
    df = pseudospectra_frame(pseudo)
    if args.out:
        write_frame(df, args.out)
    else:
        sys.stdout.write(df.to_csv(index=False, na_rep='', lineterminator='\n'))
    return EXIT_OK


def cmd_extrema(scenario: Scenario, args: argparse.Namespace, manifest: RunManifest) -> int:
    field = scan_field(scenario.function, _region(scenario))
    reports = []
    for k in parse_k(args.k, field.n):
        for kind in ("max", "min"):
            reports.append(locate_extremum(field, k, kind).to_dict())
    text = dumps_json(reports)
    if args.out:
        write_json(reports, args.out)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(scenario: Scenario, args: argparse.Namespace, manifest: RunManifest) -> int:
    check = CHECKS[args.check]
    try:
        report = check(scenario, args)
    except (PreconditionError, DifferentiationError, SpectrumProximityError, NotAMaximumError) as e:
        raise CheckNotApplicableError(str(e)) from e
    report.log_summary()
    manifest.add_report(report)
    if args.out:
        write_json(report.to_dict(), args.out)
    sys.stdout.write(dumps_json(report.to_dict()))
    return VERDICT_EXIT[report.verdict]


COMMANDS = {
    "scan": cmd_scan,
    "extrema": cmd_extrema,
    "verify": cmd_verify,
    "explore": cmd_explore,
    "pseudospectra": cmd_pseudospectra,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("scenario", help="scenario file")
    common.add_argument("--k", default="all", help="singular value index or 'all'")
    common.add_argument("--z0", type=parse_point, help="base point as re,im")
    common.add_argument("--z", type=parse_point, help="evaluation point for spectral checks")
    common.add_argument("--r", type=float, help="circle radius")
    common.add_argument("--K", type=int, help="number of Taylor terms or derivative orders")
    common.add_argument("--N", type=int, help="quadrature nodes")
    common.add_argument("--tau", type=float, help="singular value tie tolerance")
    common.add_argument("--samples", type=int, help="random sample points")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--x", help="vector: e<j> or comma-separated entries")
    common.add_argument("--t", type=float, default=1.0, help="time for the exponential reconstruction")
    common.add_argument("--h", type=float, help="finite difference step")
    common.add_argument("--eps", type=float, help="Laplace tail tolerance")
    common.add_argument("--matrix", help="name of a bound matrix to use for spectral checks")
    common.add_argument("--out", help="output file (written atomically)")
    common.add_argument("--manifest", help="write a run manifest to this path")
    common.add_argument("--threads", type=int, help="scan threads (overrides SVFIELD_THREADS)")
    common.add_argument("--config", help="JSON settings file")
    common.add_argument("--progress", action="store_true", help="show a progress bar on stderr")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true")
    verbosity.add_argument("--quiet", action="store_true")

    parser = argparse.ArgumentParser(
        prog="svfield",
        description="Singular-value fields of matrix-valued analytic functions and checks of their extremal principles")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("scan", parents=[common], help="CSV of the singular-value field")
    sub.add_parser("extrema", parents=[common], help="JSON list of refined maxima and minima")
    verify = sub.add_parser("verify", parents=[common], help="run one check and print its JSON report")
    verify.add_argument("--check", required=True, choices=sorted(CHECKS))
    sub.add_parser("explore", parents=[common], help="CSV of the raw field with derived quantities")
    sub.add_parser("pseudospectra", parents=[common], help="CSV of s_n(A - zI) and the resolvent norm")
    return parser


def configure_logging(args: argparse.Namespace):
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format='%(asctime)s - %(levelname)s - %(message)s',
                        stream=sys.stderr, force=True)
    set_enabled(sys.stderr.isatty())


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args)

    try:
        if args.config:
            settings.load_settings(args.config)
        if args.threads:
            settings.threads = args.threads
        if args.progress:
            settings.show_progress = True
        with open(args.scenario, 'r', encoding='utf-8') as f:
            text = f.read()
    except OSError as e:
        logging.error(error(f"Cannot read input: {e}"))
        return EXIT_IO

    seed = settings.seed if args.seed is None else args.seed
    flags = {key: value for key, value in vars(args).items()
             if key not in ("command", "scenario", "manifest", "verbose", "quiet", "progress")}
    manifest = RunManifest(scenario_hash(text), args.command, flags, seed)

    try:
        scenario = parse_scenario(text)
        status = COMMANDS[args.command](scenario, args, manifest)
        if args.manifest:
            manifest.write(args.manifest)
        return status
    except ScenarioError as e:
        logging.error(error(f"{args.scenario}: {e}"))
        return EXIT_SCENARIO
    except OSError as e:
        logging.error(error(f"I/O error: {e}"))
        return EXIT_IO
    except (CheckNotApplicableError, PreconditionError, EmptyDomainError) as e:
        logging.error(error(f"Not applicable: {e}"))
        return EXIT_NOT_APPLICABLE
    except (SingularMatrixError, SVDConvergenceError) as e:
        logging.error(error(f"Numerical failure: {e}"))
        return EXIT_NOT_APPLICABLE


if __name__ == "__main__":
    sys.exit(main())
