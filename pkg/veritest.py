"""
Veritest Mechanism Toolkit
Command-line entry point
"""
import argparse
import logging
import sys
from pathlib import Path

import numpy as np

import config
from authentication import is_most_discerning_alpha, nested_range_holds
from discernment import check_discerning, most_discerning_tests, relation_table
from documents import (json_text, load_document, mechanism_csv, read_mechanism_csv,
                       read_summary, table_csv, write_text)
from errors import DocumentError, VeritestError
from figure_tables import FigureTables
from ic_harness import (canonicalize, check_auction_ic, check_ic, check_interim_ic,
                        check_schedule, random_profile)
from mechanisms import AUCTION, PRICING, SALE, solve_auction, solve_nonlinear_pricing, solve_single_good

logger = logging.getLogger(__name__)


# ── Commands ──────────────────────────────────────────────────────────────────
# Each run_* returns (record or text, exit code) so the web API can reuse them.

def run_check_discernment(doc, theta=None, tau=None, psi=None, threads=1):
    env = doc.finite_environment()
    query = doc.query()
    theta, tau, psi = theta or query[0], tau or query[1], psi or query[2]
    given = [x is not None for x in (theta, tau, psi)]
    if all(given):
        witness = check_discerning(env, theta, tau, psi)
        return witness.to_record(), config.EXIT_OK if witness.holds else config.EXIT_FAILED
    if any(given):
        raise ValueError("give all of --type, --tau and --psi, or none of them")
    record = {
        "relations": relation_table(env, threads),
        "most_discerning": {t: list(most_discerning_tests(env, t, threads)) for t in env.types},
    }
    return record, config.EXIT_OK


def run_validate_alpha(doc):
    alpha = doc.finite_alpha()
    validation = is_most_discerning_alpha(alpha)
    record = validation.to_record()
    record["minimal_types"] = list(alpha.minimal_types())
    if alpha.is_zero_one:
        record["nested_range"] = nested_range_holds(alpha)
    return record, config.EXIT_OK if validation.holds else config.EXIT_FAILED


def run_virtual_value(doc, lambdas=None, grid_n=None, threads=1):
    dist = doc.distribution()
    lambdas = lambdas if lambdas is not None else doc.lambdas()
    grid_n = grid_n or doc.grid_n(config.VIRTUAL_VALUE_GRID_N)
    table = FigureTables(grid_n, threads).create_virtual_value_table(lambdas, dist)
    return table_csv(table), config.EXIT_OK


def run_solve(doc, kind, grid_n=None, tol=config.IC_TOL, threads=1):
    """Solve a document; returns (summary, csv text, exit code)."""
    grid_n = grid_n or doc.grid_n()
    if kind == AUCTION:
        agents = doc.agents()
        dists = [dist for dist, _ in agents]
        alphas = [alpha for _, alpha in agents]
        kernels = [doc.kernel(alpha) for alpha in alphas]
        solution = solve_auction(dists, kernels, grid_n, alphas, threads)
        report = check_auction_ic(solution)
    elif kind in (PRICING, SALE):
        dist = doc.distribution()
        alpha = doc.continuous_alpha(dist)
        kernel = doc.kernel(alpha)
        if kind == PRICING:
            solution = solve_nonlinear_pricing(dist, kernel, doc.cost(), grid_n, alpha, threads)
        else:
            solution = solve_single_good(dist, kernel, grid_n, alpha, threads)
        report = check_ic(solution, alpha)
    else:
        raise ValueError(f"unknown mechanism kind {kind!r}")
    summary = solution.to_summary()
    summary["ic"] = report.to_record()
    summary["document"] = doc.source
    code = config.EXIT_OK if report.passes(tol) else config.EXIT_FAILED
    return summary, mechanism_csv(solution), code


def run_verify(doc, mechanism_path, tol=config.IC_TOL):
    table = read_mechanism_csv(mechanism_path)
    if table.is_auction:
        agents = doc.agents()
        schedules = table.agents()
        if len(schedules) != len(agents):
            raise DocumentError(f"mechanism has {len(schedules)} agents, document {len(agents)}")
        report = check_interim_ic([s[0] for s in schedules], [s[1] for s in schedules],
                                  [s[2] for s in schedules], [alpha for _, alpha in agents])
    else:
        dist = doc.distribution()
        grid, q, t = table.schedule()
        report = check_schedule(grid, q, t, doc.continuous_alpha(dist))
    record = report.to_record()
    record["passes"] = report.passes(tol)
    summary = Path(mechanism_path).with_suffix(".json")
    if summary.exists():
        record.update(_reproduction(summary, report))
    return record, config.EXIT_OK if report.passes(tol) else config.EXIT_FAILED


def _reproduction(summary, report):
    """Compare the stored max_ic_violation with the re-checked one."""
    try:
        stored = read_summary(summary)
    except DocumentError as e:
        logger.warning("unreadable summary %s: %s", summary, e)
        return {"reproduced": None, "summary_error": str(e)}
    ic = stored.get("ic")
    expected = ic.get("max_ic_violation") if isinstance(ic, dict) else None
    if isinstance(expected, bool) or not isinstance(expected, (int, float)):
        return {"reproduced": None, "summary_error": f"{summary}: no stored max_ic_violation"}
    return {"stored_max_ic_violation": expected,
            "reproduced": expected == report.max_ic_violation}


def run_canonicalize(doc=None, seed=None):
    if doc is not None:
        profile = doc.profile()
    else:
        profile = random_profile(np.random.default_rng(seed))
    canonical, report = canonicalize(profile)
    record = {"profile": canonical.to_record(), "report": report.to_record()}
    return record, config.EXIT_OK if report.scf_preserved else config.EXIT_FAILED


def run_figure(name, lambdas=None, grid_n=None, threads=1):
    options = {}
    if name == "virtual-value" and lambdas is not None:
        options["lambdas"] = lambdas
    if name == "authentication-rate" and lambdas:
        options["lam"] = lambdas[0]
    return table_csv(FigureTables(grid_n, threads).create(name, **options)), config.EXIT_OK


# ── Argument parsing ──────────────────────────────────────────────────────────

def _lambda_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--grid", type=int, default=None, help="type grid size")
    common.add_argument("--tol", type=float, default=config.IC_TOL, help="IC tolerance")
    common.add_argument("--seed", type=int, default=None, help="random seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads")
    common.add_argument("--output", default=None, help="output file (or prefix for solve)")

    parser = argparse.ArgumentParser(prog="veritest", description=config.APP_NAME)
    parser.add_argument("--version", action="version", version=f"%(prog)s {config.VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-discernment", parents=[common], help="compare tests for a type")
    p.add_argument("document")
    p.add_argument("--type", dest="theta")
    p.add_argument("--tau")
    p.add_argument("--psi")

    p = sub.add_parser("virtual-value", parents=[common], help="virtual values as CSV")
    p.add_argument("document")
    p.add_argument("--lambdas", type=_lambda_list, default=None)

    p = sub.add_parser("solve", parents=[common], help="solve a mechanism")
    p.add_argument("document")
    p.add_argument("kind", choices=[PRICING, SALE, AUCTION])

    p = sub.add_parser("verify", parents=[common], help="brute-force IC check of a mechanism CSV")
    p.add_argument("document")
    p.add_argument("mechanism")

    p = sub.add_parser("validate-alpha", parents=[common], help="most-discerning check of alpha")
    p.add_argument("document")

    p = sub.add_parser("canonicalize", parents=[common], help="canonical profile")
    p.add_argument("document", nargs="?")
    p.add_argument("--random", action="store_true", help="use a seeded random profile")

    p = sub.add_parser("figure-data", parents=[common], help="figure datasets as CSV")
    p.add_argument("name", choices=FigureTables.NAMES)
    p.add_argument("--lambdas", type=_lambda_list, default=None)
    return parser


def _emit(text, path):
    if path:
        write_text(path, text)
    else:
        sys.stdout.write(text)


def dispatch(args):
    command = args.command
    if command == "figure-data":
        text, code = run_figure(args.name, args.lambdas, args.grid, args.threads)
        _emit(text, args.output)
        return code
    if command == "canonicalize":
        if args.random:
            record, code = run_canonicalize(None, args.seed)
        elif args.document:
            record, code = run_canonicalize(load_document(args.document))
        else:
            raise ValueError("canonicalize needs a profile document or --random")
        _emit(json_text(record), args.output)
        return code

    doc = load_document(args.document)
    if command == "check-discernment":
        record, code = run_check_discernment(doc, args.theta, args.tau, args.psi, args.threads)
    elif command == "validate-alpha":
        record, code = run_validate_alpha(doc)
    elif command == "virtual-value":
        text, code = run_virtual_value(doc, args.lambdas, args.grid, args.threads)
        _emit(text, args.output)
        return code
    elif command == "solve":
        summary, csv_text, code = run_solve(doc, args.kind, args.grid, args.tol, args.threads)
        prefix = args.output or doc.output_prefix() or str(
            Path(args.document).with_suffix("")) + f"_{args.kind}"
        write_text(f"{prefix}.csv", csv_text)
        write_text(f"{prefix}.json", json_text(summary))
        logger.info("wrote %s.csv and %s.json", prefix, prefix)
        record = summary
        args.output = None
    else:
        record, code = run_verify(doc, args.mechanism, args.tol)
    _emit(json_text(record), args.output)
    return code


def main(argv=None):
    config.setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return dispatch(args)
    except (VeritestError, ValueError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return config.EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
