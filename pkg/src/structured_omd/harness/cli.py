"""Command line interface.

Exit codes: 0 on success, 1 for configuration problems (bad flags,
unreadable config files, malformed space strings), 2 when a solver fails.
"""

import argparse
import sys

from .. import omd
from ..loss_spaces import theoretical_bound
from ..omd import SolverError
from .config import ConfigError, load_config, load_sweep, parse_space
from .reports import emit_lower_bound, emit_report, emit_sweep, render_report
from .runner import run_experiment, run_lower_bound, run_sweep


class _Parser(argparse.ArgumentParser):
    """Reports bad usage through ConfigError so main() can exit 1."""

    def error(self, message):
        raise ConfigError(message)


def _build_parser():
    parser = _Parser(prog="structured-omd",
                     description="Online mirror descent over structured loss spaces.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment from an INI config")
    p.add_argument("--config", required=True, help="path to an [experiment] INI file")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--trials", type=int, default=None, help="override the trial count")
    p.add_argument("--out", default=None, help="override the output path")
    p.add_argument("--format", choices=("csv", "json"), default=None,
                   help="override the output format")

    p = sub.add_parser("bound", help="print the certified bound for a space")
    p.add_argument("--space", required=True, help="space string, e.g. sparse:s=3+noisy:eps=0.25")
    p.add_argument("--T", type=int, required=True, help="horizon")
    p.add_argument("--N", type=int, default=64, help="number of experts (default 64)")

    p = sub.add_parser("lowerbound", help="run the adversary against Hedge")
    p.add_argument("--V", type=int, required=True, help="adversary dimension")
    p.add_argument("--s", type=float, required=True, help="loss scale")
    p.add_argument("--N", type=int, required=True, help="number of experts")
    p.add_argument("--T", type=int, required=True, help="horizon")
    p.add_argument("--trials", type=int, required=True, help="number of games")
    p.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    p.add_argument("--eta", type=float, default=None,
                   help="Hedge rate (default sqrt(2 ln N / T))")
    p.add_argument("--out", default=None, help="write the summary as JSON here")

    p = sub.add_parser("sweep", help="run a parameter sweep from an INI config")
    p.add_argument("--config", required=True, help="path to a [sweep] INI file")

    return parser


def _cmd_run(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.trials is not None:
        cfg.trials = args.trials
    if args.out is not None:
        cfg.output_path = args.out
    if args.format is not None:
        cfg.format = args.format
    record = run_experiment(cfg)
    if cfg.output_path:
        emit_report(record, cfg.output_path, cfg.format)
        print("wrote %s: %d trials, mean final regret %.6g, %d bound violations"
              % (cfg.output_path, len(record.seeds), record.mean_final_regret,
                 record.bound_violations))
    else:
        sys.stdout.write(render_report(record, cfg.format))
    return 0


def _cmd_bound(args):
    space = parse_space(args.space, args.N)
    bound, recipe = theoretical_bound(space, args.T)
    cert = recipe.certificate()
    eta = omd.optimal_rate(cert, args.T)
    print("space: %s" % args.space)
    print("bound: %.17g" % bound)
    print("regularizer: %s" % type(recipe).__name__)
    print("D_squared: %.17g" % cert.D_squared)
    print("alpha: %.17g" % cert.alpha)
    print("eta_star: %.17g" % eta)
    if not cert.in_proven_range:
        print("note: certificate parameters sit outside the proven range")
    return 0


def _cmd_lowerbound(args):
    summary = run_lower_bound(args.V, args.s, args.N, args.T, args.trials,
                              seed=args.seed, eta=args.eta)
    if args.out:
        emit_lower_bound(summary, args.out)
    for key in ("V", "s", "N", "T", "k", "trials", "eta", "floor",
                "predicted_mean", "mean_regret", "stderr"):
        value = summary[key]
        if isinstance(value, float):
            print("%s: %.6g" % (key, value))
        else:
            print("%s: %s" % (key, value))
    return 0


def _cmd_sweep(args):
    base, grid = load_sweep(args.config)
    rows = run_sweep(base, grid)
    emit_sweep(rows, base.output_path)
    print("wrote %s: %d rows" % (base.output_path, len(rows)))
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "bound": _cmd_bound,
    "lowerbound": _cmd_lowerbound,
    "sweep": _cmd_sweep,
}


def main(argv=None):
    try:
        args = _build_parser().parse_args(argv)
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    except ValueError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    except SolverError as exc:
        print("solver failure: %s" % exc, file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print("solver failure: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
