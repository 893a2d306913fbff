"""Command-line entry point: ``bananacc propagate|contour|optimize|validate``."""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence

from . import harness
from .chance_opt import Method
from .errors import BananaError
from .scenario import load_scenario

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2


class _Parser(argparse.ArgumentParser):
    # usage errors share the generic error code; 2 is reserved for infeasibility
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bananacc", description="Chance-constrained impulse design with banana contours.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, *, method=True, u=True):
        p.add_argument("--scenario", required=True, help="scenario YAML file")
        p.add_argument("--out", help="directory for CSV/JSON artifacts")
        if method:
            p.add_argument("--method", choices=[m.value for m in Method], default=Method.BANANA.value)
        if u:
            p.add_argument(
                "--u", nargs=3, type=float, metavar=("UX", "UY", "UZ"),
                help="impulse in m/s (default: the scenario's u_guess)",
            )

    common(sub.add_parser("propagate", help="nominal trajectory and moment dump"), method=False)
    p = sub.add_parser("contour", help="slice contours and moments for a given impulse")
    common(p)
    p.add_argument("--gaussian", action="store_true", help="replace moments by their Gaussian closure")
    common(sub.add_parser("optimize", help="minimum-norm impulse under the box constraints"), u=False)
    p = sub.add_parser("validate", help="Monte Carlo check of an impulse")
    common(p)
    p.add_argument("--samples", type=int, help="number of Monte Carlo samples")
    p.add_argument("--seed", type=int, help="sampling seed")
    return parser


def _print_kv(pairs) -> None:
    width = max(len(k) for k, _ in pairs)
    for k, v in pairs:
        print(f"{k:<{width}}  {v}")


def run(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    u = getattr(args, "u", None) or scenario.u_guess

    if args.command == "propagate":
        times, states, ms = harness.cmd_propagate(scenario, u, args.out)
        _print_kv([("t1 [h]", f"{scenario.t1 / 3600:.4f}"), ("nominal final", states[-1].round(6)),
                   ("cubature mean", ms.mean.round(6))])
        return EXIT_OK

    if args.command == "contour":
        ev = harness.cmd_contour(scenario, u, args.method, args.out, force_gaussian=args.gaussian)
        for s in ev.slices:
            print(f"{s.label}: alpha={s.alpha:+.6g}")
        _print_kv([(f"min margin {lab}", f"{m:+.4f} m") for lab, m in zip(ev.constraint_labels, ev.min_margins)])
        return EXIT_OK

    if args.command == "optimize":
        report = harness.cmd_optimize(scenario, args.method, args.out)
        _print_kv([
            ("method", report.method.value),
            ("converged", report.converged),
            ("u* [m/s]", report.u_star.round(7)),
            ("|u*| [m/s]", f"{report.objective:.7f}"),
            ("iterations", report.iterations),
            ("message", report.message),
        ])
        if report.converged:
            return EXIT_OK
        feasible = min(report.min_margins.values()) >= -scenario.optimizer.constraint_tolerance
        return EXIT_ERROR if feasible else EXIT_INFEASIBLE

    rep = harness.cmd_validate(scenario, u, args.samples, args.seed, args.method, args.out)
    _print_kv([(f"P[{k}]", f"{v:.4f}") for k, v in rep.per_constraint.items()]
              + [("joint", f"{rep.joint:.4f}"), ("excluded", rep.n_excluded)])
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return run(args)
    except (BananaError, OSError, ValueError) as exc:
        print(f"bananacc: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
