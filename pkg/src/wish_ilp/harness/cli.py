"""``wish-ilp`` command line.

Settings come from three layers: built-in defaults, an optional flat
``key = value`` file given with ``--config``, and command-line flags, with
later layers winning.  Config keys are the long flag names with dashes
turned into underscores (``--budget-seconds`` is ``budget_seconds``).
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

from ..gf2 import format_system, greedy_sparsify, parse_system, rref
from ..hashing import HashFamilySpec, SeededRng, independence_audit, parse_family, sample
from ..map_solvers import Budget, branch_and_bound, build_ilp, message_passing_decode
from ..model import exact_log_partition, exact_map_with_parity
from .experiment import (
    ExperimentConfig,
    emit_anytime_trace,
    load_config,
    preprocess_system,
    run_experiment,
    sparsification_sweep,
)
from .selftest import run_selftest

DEFAULTS = {f.name: f.default for f in fields(ExperimentConfig)}


def _flag(parser: argparse.ArgumentParser, name: str, help: str, **kw) -> None:
    """A config-backed flag: parsed default is ``None`` so explicit use is detectable."""
    default = DEFAULTS[name]
    shown = "none" if default is None else default
    parser.add_argument("--" + name.replace("_", "-"), dest=name, default=None,
                        help=f"{help} (default: {shown})", **kw)


def _model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value file; flags override it (default: none)")
    _flag(p, "grid", "side length M of the M x M Ising grid", type=int)
    _flag(p, "field", "field strength f; theta_i(1) ~ U[-f, f]", type=float)
    _flag(p, "coupling", "coupling strength w; theta_ij(1,1) ~ U[-w, w]", type=float)
    _flag(p, "model_seed", "seed for the grid potentials", type=int)
    _flag(p, "model_file", "read the model from this file instead of generating a grid")


def _system_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--system", help="parity system file; overrides sampling (default: none)")
    p.add_argument("--m", type=int, default=0, help="number of sampled parity rows (default: 0)")
    _flag(p, "family", "hash family: dense, toeplitz or sparse:<k>")
    p.add_argument("--system-seed", type=int, default=0, help="seed for the sampled system (default: 0)")
    _flag(p, "preprocess", "none, rref or rref+greedy", choices=("none", "rref", "rref+greedy"))


def _budget_flags(p: argparse.ArgumentParser) -> None:
    _flag(p, "budget_seconds", "wall-clock budget per query in seconds", type=float)
    _flag(p, "budget_nodes", "LP-solve budget per query", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wish-ilp", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="WISH estimate of log Z")
    _model_flags(p)
    _flag(p, "mode", "exact, lower, upper or shortxor", choices=("exact", "lower", "upper", "shortxor"))
    _flag(p, "delta", "failure probability", type=float)
    _flag(p, "alpha", "constant in T = ceil(ln(1/delta)/alpha * ln n)", type=float)
    _flag(p, "T", "repetitions per level; overrides delta and alpha", type=int)
    _flag(p, "family", "hash family: dense, toeplitz or sparse:<k>")
    _flag(p, "solver", "brute, bnb, lp, mp or bp", choices=("brute", "bnb", "lp", "mp", "bp"))
    _flag(p, "encoding", "auto, jeroslow, feldman or yannakakis",
          choices=("auto", "jeroslow", "feldman", "yannakakis"))
    _flag(p, "preprocess", "none, rref or rref+greedy", choices=("none", "rref", "rref+greedy"))
    _budget_flags(p)
    _flag(p, "workers", "worker processes; 0 uses every available core", type=int)
    _flag(p, "seed", "first master seed", type=int)
    _flag(p, "repetitions", "number of master seeds (seed, seed+1, ...)", type=int)
    _flag(p, "out", "output directory for config.txt, queries.csv and summary.txt")

    p = sub.add_parser("exact", help="exact log Z (brute force or grid elimination)")
    _model_flags(p)

    p = sub.add_parser("map", help="one parity-constrained MAP query")
    _model_flags(p)
    _system_flags(p)
    p.add_argument("--solver", default="bnb", choices=("bnb", "mp", "brute"), help="solver (default: bnb)")
    _flag(p, "encoding", "auto, jeroslow, feldman or yannakakis",
          choices=("auto", "jeroslow", "feldman", "yannakakis"))
    _budget_flags(p)
    p.add_argument("--show-incumbent", action="store_true", help="also print the best configuration")

    p = sub.add_parser("sparsify", help="rref and/or greedy sparsification of a parity system")
    p.add_argument("input", nargs="?", default="-", help="system file, '-' for stdin (default: -)")
    p.add_argument("--method", default="rref+greedy", choices=("rref", "greedy", "rref+greedy"),
                   help="reduction to apply (default: rref+greedy)")
    p.add_argument("--depth", type=int, default=4, help="largest row combination tried by greedy (default: 4)")

    p = sub.add_parser("trace", help="anytime bounds of one branch-and-bound run")
    _model_flags(p)
    _system_flags(p)
    _flag(p, "encoding", "auto, jeroslow, feldman or yannakakis",
          choices=("auto", "jeroslow", "feldman", "yannakakis"))
    _budget_flags(p)
    p.add_argument("--out", help="two-column plot file 'elapsed_ms upper' (default: none)")

    p = sub.add_parser("sweep", help="bounds with and without sparsification over m")
    _model_flags(p)
    p.add_argument("--m-range", default="0:101:10",
                   help="start:stop:step or a comma list of m values (default: 0:101:10)")
    _budget_flags(p)
    _flag(p, "repetitions", "systems per m", type=int)
    _flag(p, "seed", "seed for the sampled systems", type=int)
    p.add_argument("--out", help="whitespace table output file (default: none)")

    p = sub.add_parser("audit", help="exact independence audit of a hash family")
    p.add_argument("--family", default="toeplitz", help="dense, toeplitz or sparse:<k> (default: toeplitz)")
    p.add_argument("--n", type=int, default=3, help="input bits (default: 3)")
    p.add_argument("--m", type=int, default=2, help="output bits (default: 2)")

    sub.add_parser("selftest", help="run the quick oracle-equivalence checks")
    return parser


def _config(args: argparse.Namespace) -> ExperimentConfig:
    overrides = {k: v for k, v in vars(args).items() if k in DEFAULTS}
    return load_config(getattr(args, "config", None), overrides)


def _query_system(args: argparse.Namespace, config: ExperimentConfig, n: int):
    if args.system:
        system = parse_system(Path(args.system).read_text())
        if system.n != n:
            raise SystemExit(f"system has n={system.n}, model has n={n}")
    else:
        family, k = parse_family(config.family)
        system = sample(HashFamilySpec(family, n, args.m, k), SeededRng(args.system_seed, (args.m, 0)))
    return preprocess_system(system, config.preprocess)


def _parse_range(text: str) -> list[int]:
    if ":" in text:
        parts = [int(v) for v in text.split(":")]
        return list(range(*parts))
    return [int(v) for v in text.split(",") if v.strip()]


def _cmd_estimate(args) -> int:
    config = _config(args)
    wish = config.wish_config()
    print(f"# {wish.alpha_regime}")
    record = run_experiment(config)
    exact = "unavailable" if record.exact_log_z is None else repr(record.exact_log_z)
    print(f"exact: {exact}")
    for s in record.summaries:
        line = f"seed {s.seed}: log_estimate {s.log_estimate!r} {s.guarantee} T={s.T}"
        if record.exact_log_z is not None:
            line += f" error {s.log_estimate - record.exact_log_z:+.4f}"
        print(line)
    return 0


def _cmd_exact(args) -> int:
    print(repr(exact_log_partition(_config(args).build_model())))
    return 0


def _cmd_map(args) -> int:
    config = _config(args)
    model = config.build_model()
    system = _query_system(args, config, model.n)
    if args.solver == "brute":
        result = exact_map_with_parity(model, system)
    elif args.solver == "mp":
        result = message_passing_decode(model, system)
    else:
        budget = Budget(config.budget_seconds, config.budget_nodes)
        result = branch_and_bound(build_ilp(model, system, config.encoding), budget)
    print(f"{result.lower!r} {result.upper!r} {result.status} {result.nodes} {result.runtime_ms:.3f}")
    if args.show_incumbent and result.incumbent is not None:
        print("".join(str(int(v)) for v in result.incumbent))
    return 0


def _cmd_sparsify(args) -> int:
    text = sys.stdin.read() if args.input == "-" else Path(args.input).read_text()
    system = parse_system(text)
    before = system.norm1()
    if args.method in ("rref", "rref+greedy"):
        system = rref(system)
    if args.method in ("greedy", "rref+greedy"):
        system = greedy_sparsify(system, args.depth)
    sys.stdout.write(format_system(system))
    print(f"norm1 {before} -> {system.norm1()}", file=sys.stderr)
    return 0


def _cmd_trace(args) -> int:
    config = _config(args)
    model = config.build_model()
    system = _query_system(args, config, model.n)
    trace = emit_anytime_trace(model, system, Budget(config.budget_seconds, config.budget_nodes), args.out,
                               config.encoding)
    print("elapsed_ms upper lower")
    for elapsed, upper, lower in trace:
        print(f"{elapsed:.3f} {upper!r} {lower!r}")
    return 0


def _cmd_sweep(args) -> int:
    config = _config(args)
    model = config.build_model()
    table = sparsification_sweep(model, _parse_range(args.m_range), Budget(config.budget_seconds, config.budget_nodes),
                                 repetitions=config.repetitions, seed=config.seed, path=args.out)
    print("m preprocessor runs feasible_rate median_lower median_upper mean_norm1")
    for r in table:
        print(f"{r.m} {r.preprocessor} {r.runs} {r.feasible_rate:.3f} {r.median_lower:.4f} "
              f"{r.median_upper:.4f} {r.mean_norm1:.1f}")
    return 0


def _cmd_audit(args) -> int:
    family, k = parse_family(args.family)
    report = independence_audit(HashFamilySpec(family, args.n, args.m, k))
    print(report.summary())
    return 0


def _cmd_selftest(args) -> int:
    return 0 if run_selftest() else 1


COMMANDS = {
    "estimate": _cmd_estimate,
    "exact": _cmd_exact,
    "map": _cmd_map,
    "sparsify": _cmd_sparsify,
    "trace": _cmd_trace,
    "sweep": _cmd_sweep,
    "audit": _cmd_audit,
    "selftest": _cmd_selftest,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    raise SystemExit(main())
