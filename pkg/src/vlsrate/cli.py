"""Command line entry point: ``vlsrate {simulate,spectrum,bound,experiment,figure}``.

Exit codes: 0 success, 1 invalid input, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import logging
import sys
from pathlib import Path

import numpy as np

from .consensus_lift import build_matrices, fill_u_errors
from .errors import InvalidInputError, NumericalError
from .graph_core import FAMILIES, generate_family, read_edge_list
from .rank1_instance import load_instance, sample_instance, save_instance
from .rate_lab import (
    FIGURES,
    ExperimentConfig,
    emit_figure_data,
    parse_records,
    records_csv,
    run_experiment,
)
from .spectral_analysis import reports_csv, spectral_report, theorem2_bound
from .vls_engine import StopRule, init_state, run, trajectory_csv

DEFAULT_SEED = 0

log = logging.getLogger("vlsrate")


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _split_seed(seed: int) -> tuple[int, int]:
    """Independent instance and initialization seeds from one top-level seed."""
    a, b = np.random.SeedSequence(seed).generate_state(2, dtype=np.uint64)
    return int(a), int(b)


def _instance(args):
    if args.instance_file:
        return load_instance(args.instance_file)
    if args.graph_file:
        graph = read_edge_list(args.graph_file)
    else:
        if args.family is None or args.n is None:
            raise InvalidInputError("give --family and --n, --graph-file, or --instance-file")
        graph = generate_family(args.family, args.n)
    return sample_instance(graph, args.b, _split_seed(args.seed)[0])


def _add_instance_args(p):
    p.add_argument("--family", choices=FAMILIES)
    p.add_argument("--n", type=int)
    p.add_argument("--b", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--graph-file", help="edge list: 'n <value>' then 1-based 'i j' lines")
    p.add_argument("--instance-file", help="JSON instance written by --save-instance")
    p.add_argument("--save-instance")
    p.add_argument("--out", help="output file (default: stdout)")


def cmd_simulate(args):
    inst = _instance(args)
    if args.save_instance:
        save_instance(inst, args.save_instance)
    init_seed = _split_seed(args.seed)[1] if args.init_seed is None else args.init_seed
    stop = StopRule(max_iters=args.max_iters, cost_tol=args.cost_tol, u_consensus_tol=args.u_tol)
    traj = run(init_state(inst, seed=init_seed), inst, stop, stride=args.stride)
    fill_u_errors(traj, inst)
    log.info("stopped by %s at t=%d, cost %.3e", traj.status, traj.t_final, traj.final_cost)
    _emit(trajectory_csv(traj, inst), args.out)
    if args.snapshot_at is not None:
        match = [s for s in traj.states if s.t == args.snapshot_at]
        if not match:
            raise InvalidInputError(f"iteration {args.snapshot_at} was not recorded (stride {args.stride})")
        text = build_matrices(match[0], inst).dumps()
        _emit(text, args.snapshot_out)


def cmd_spectrum(args):
    inst = _instance(args)
    if args.save_instance:
        save_instance(inst, args.save_instance)
    _emit(reports_csv([spectral_report(inst)]), args.out)


def cmd_bound(args):
    bound, weaker = theorem2_bound(args.n, args.delta, args.b)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "delta", "b", "theorem2_bound", "weak_bound", "gap", "gershgorin_floor", "diag_floor"])
    gap = args.b**12 / (args.n * (args.n - 1) * args.delta)
    diag = args.b**8 / args.delta
    w.writerow([args.n, args.delta, repr(args.b), repr(bound), repr(weaker), repr(gap),
                repr(-1.0 + diag), repr(diag)])
    _emit(buf.getvalue(), args.out)


def cmd_experiment(args):
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    records = run_experiment(cfg, workers=args.workers)
    _emit(records_csv(records), args.out)


def cmd_figure(args):
    records = parse_records(Path(args.records).read_text())
    _emit(emit_figure_data(records, args.figure), args.out)


class _Parser(argparse.ArgumentParser):
    # usage errors are invalid input (1), not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vlsrate", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run VLS on one instance, write a trajectory CSV")
    _add_instance_args(p)
    p.add_argument("--init-seed", type=int, help="initialization seed (default: derived from --seed)")
    p.add_argument("--max-iters", type=int, default=10**6)
    p.add_argument("--cost-tol", type=float, default=1e-16)
    p.add_argument("--u-tol", type=float, default=None)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--snapshot-at", type=int, help="dump u, v, pi, P at this iteration")
    p.add_argument("--snapshot-out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("spectrum", help="spectral report of the limit matrix")
    _add_instance_args(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("bound", help="closed-form rate and Gershgorin bounds")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--delta", type=int, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("experiment", help="Monte Carlo sweep from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("figure", help="aggregate trial records into plot-ready CSV")
    p.add_argument("--records", required=True)
    p.add_argument("--figure", choices=FIGURES, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_figure)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
