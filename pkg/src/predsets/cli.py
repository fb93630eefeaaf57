"""Command-line front end: ``predsets {simulate,coverage,fit-prior,predict,analyze}``."""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from .core import set_pvalues
from .eb import OptimizerConfig, fit_gamma
from .pipeline import (
    InputError,
    analyze_all,
    export_reports,
    ingest_records,
    knn_neighbors,
    read_adjacency,
    read_centroids,
    read_gamma,
    read_records,
)
from .sim import SimConfig, results_table, run_cardinality_experiment, run_coverage_experiment

DEFAULT_SEED = 20230501
FULL_REPLICATIONS = 25_000

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2


class UsageError(Exception):
    def __init__(self, message, usage=""):
        super().__init__(message)
        self.usage = usage


class NumericalError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, self.format_usage())


def _int_list(text):
    try:
        vals = [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError("values must be positive")
    return vals


def _alpha(text):
    try:
        a = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid alpha {text!r}") from None
    if not 0 < a < 1:
        raise argparse.ArgumentTypeError("alpha must lie in (0, 1)")
    return a


def _spec(text, allowed):
    """Parse ``name`` or ``name:value`` with a float value."""
    name, _, value = text.partition(":")
    if name not in allowed:
        raise argparse.ArgumentTypeError(f"expected one of {', '.join(allowed)}, got {name!r}")
    if not value:
        if allowed[name] is None:
            return (name,)
        raise argparse.ArgumentTypeError(f"{name} needs a value, e.g. {name}:{allowed[name]}")
    try:
        return (name, float(value))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number in {text!r}") from None


def _theta_spec(text):
    return _spec(text, {"low-entropy": "0.0001", "uniform": None})


def _prior_spec(text):
    return _spec(text, {"oracle-scaled": "10", "uniform": "1"})


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="predsets", description="Valid prediction sets for multinomial data.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, helptext in (
        ("simulate", "expected set cardinality by Monte Carlo"),
        ("coverage", "empirical coverage by Monte Carlo"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--K", type=_int_list, required=True, help="category counts, comma-separated")
        p.add_argument("--N", type=_int_list, required=True, help="sample sizes, comma-separated")
        p.add_argument("--alpha", type=_alpha, default=0.05)
        p.add_argument("--reps", type=int, default=None, help="replications (default 2000)")
        p.add_argument("--full", action="store_true", help=f"use {FULL_REPLICATIONS} replications")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--theta", type=_theta_spec, default=("low-entropy", 1e-4))
        p.add_argument("--prior", type=_prior_spec, default=("oracle-scaled", 10.0))

    p = sub.add_parser("fit-prior", help="fit a Dirichlet concentration to count rows")
    p.add_argument("--counts", required=True, help="records file (area_id,species_id,count)")
    p.add_argument("--rows", default=None, help="comma-separated area ids or row indices (default: all)")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=200)

    p = sub.add_parser("predict", help="prediction set for one area")
    p.add_argument("--counts", required=True, help="records file (area_id,species_id,count)")
    p.add_argument("--area", required=True)
    p.add_argument("--alpha", type=_alpha, default=0.05)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--gamma", default=None, help="prior file (species_id,gamma)")
    g.add_argument("--uniform", type=float, default=None, help="uniform prior constant")

    p = sub.add_parser("analyze", help="direct vs indirect sets for every area")
    p.add_argument("--records", required=True)
    p.add_argument("--centroids", default=None)
    p.add_argument("--adjacency", default=None)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--alpha", type=_alpha, default=0.05)
    p.add_argument("--uniform", type=float, default=None, help="skip fitting; use a uniform prior")
    p.add_argument("--out", required=True)
    return parser


def _simulation(args, out, coverage: bool):
    reps = FULL_REPLICATIONS if args.full else (args.reps if args.reps is not None else 2000)
    results = []
    for K in args.K:
        for N in args.N:
            cfg = SimConfig(
                K=K, N=N, alpha=args.alpha, replications=reps,
                theta_spec=args.theta, prior_spec=args.prior, seed=args.seed,
            )
            run = run_coverage_experiment if coverage else run_cardinality_experiment
            results.append(run(cfg))
    out.write(results_table(results, with_se=coverage))


def _select_rows(dataset, spec):
    if spec is None:
        return list(range(len(dataset.areas)))
    rows = []
    for tok in (t.strip() for t in spec.split(",")):
        if tok in dataset.areas:
            rows.append(dataset.areas.index(tok))
        elif tok.isdigit() and int(tok) < len(dataset.areas):
            rows.append(int(tok))
        else:
            raise InputError(f"--rows: unknown area or row {tok!r}")
    return rows


def _fit_prior(args, out, err):
    data = ingest_records(read_records(args.counts))
    rows = _select_rows(data, args.rows)
    fit = fit_gamma(data.counts[rows], OptimizerConfig(grad_tolerance=args.tol, max_iterations=args.max_iter))
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["species_id", "gamma"])
    for sp, g in zip(data.species, fit.gamma):
        w.writerow([sp, repr(float(g))])
    err.write(
        f"converged={fit.converged} iterations={fit.iterations} "
        f"grad_norm={fit.grad_norm!r} loglik={fit.loglik!r}\n"
    )
    if not fit.converged:
        raise NumericalError(f"prior fit did not converge: {fit.message}")


def _predict(args, out):
    data = ingest_records(read_records(args.counts))
    x = data.counts[data.area_index(args.area)]
    if args.gamma is not None:
        gamma = read_gamma(args.gamma, data.species)
    elif args.uniform is not None:
        if not args.uniform >= 0:
            raise InputError("--uniform must be non-negative")
        gamma = np.full(len(data.species), args.uniform)
    else:
        gamma = None
    p = set_pvalues(x, gamma=gamma)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["species_id", "count", "pvalue", "included"])
    for sp, c, pv in zip(data.species, x, p):
        w.writerow([sp, int(c), repr(float(pv)), int(pv > args.alpha)])


def _analyze(args, out):
    data = ingest_records(read_records(args.records))
    if args.centroids is not None:
        data = read_centroids(args.centroids, data)
    if args.adjacency is not None:
        graph = read_adjacency(args.adjacency, data)
    elif data.centroids is not None:
        graph = knn_neighbors(data, args.k)
    else:
        raise InputError("analyze needs --centroids or --adjacency")
    for i, nb in enumerate(graph.neighbors):
        if not nb:
            raise InputError(f"area {data.areas[i]!r} has no neighbors")
    if args.uniform is not None and not args.uniform >= 0:
        raise InputError("--uniform must be non-negative")
    reports = analyze_all(data, graph, alpha=args.alpha, uniform_prior=args.uniform)
    paths = export_reports(reports, args.out)
    fallbacks = sum(r.fallback for r in reports)
    out.write(f"wrote {paths['ratios']} and {paths['reports']} ({len(reports)} areas, {fallbacks} fallbacks)\n")


def run(argv=None, out=None, err=None) -> int:
    """Run one subcommand; returns the process exit code."""
    out = out if out is not None else sys.stdout
    err = err if err is not None else sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command in ("simulate", "coverage"):
            _simulation(args, out, coverage=args.command == "coverage")
        elif args.command == "fit-prior":
            _fit_prior(args, out, err)
        elif args.command == "predict":
            _predict(args, out)
        elif args.command == "analyze":
            _analyze(args, out)
    except UsageError as exc:
        err.write(exc.usage)
        err.write(f"error: {exc}\n")
        return EXIT_INPUT
    except NumericalError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_NUMERICAL
    except (InputError, ValueError, OSError) as exc:
        err.write(f"error: {' '.join(str(exc).split())}\n")
        return EXIT_INPUT
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
