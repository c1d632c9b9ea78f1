"""Command line entry point: ``szinterp <subcommand> [options]``."""
from __future__ import annotations

import argparse
import json
import sys

from .dualbasis import DualBasisError
from .experiments import (
    OPERATORS,
    ExperimentConfig,
    cmd_converge,
    cmd_heat,
    cmd_smooth,
    cmd_spacetime,
    dualbasis_dump,
    run_verify,
    write_output,
)
from .mesh import MeshError

STUDIES = {"converge": cmd_converge, "heat": cmd_heat, "smooth": cmd_smooth, "spacetime": cmd_spacetime}
STUDY_DEFAULTS = {
    "converge": {},
    "heat": {"levels": 5},
    "smooth": {"operator": "Pi", "preset": "smooth"},
    "spacetime": {"operator": "PiTensor", "levels": 4},
}


def _add_study_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with experiment settings")
    p.add_argument("--op", dest="operator", choices=OPERATORS)
    p.add_argument("--d", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--levels", type=int)
    p.add_argument("--preset")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.add_argument("--mesh", help="JSON mesh file used as the coarsest level")
    p.add_argument("--kt", dest="time_degree", type=int, help="time degree (spacetime)")
    p.add_argument("--refine", choices=("both", "space", "time"), help="refinement mode (spacetime)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="szinterp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", help="run the identity suite and print a JSON report")
    v.add_argument("--out")
    db = sub.add_parser("dualbasis", help="dump the reference dual basis as JSON")
    db.add_argument("--d", type=int, default=2)
    db.add_argument("--k", type=int, default=1)
    db.add_argument("--out")
    for name in STUDIES:
        _add_study_args(sub.add_parser(name, help=f"{name} study, CSV rate table"))
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    data = dict(STUDY_DEFAULTS[args.command])
    if args.config:
        with open(args.config) as fh:
            data.update(json.load(fh))
    cfg = ExperimentConfig.from_dict(data)
    keys = ("operator", "d", "k", "levels", "preset", "out", "mesh", "time_degree", "refine")
    return cfg.with_overrides(**{key: getattr(args, key) for key in keys}).validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            report = run_verify()
            write_output(json.dumps(report, indent=2, sort_keys=True), args.out)
            failed = [n for n, r in report["checks"].items() if not r["passed"]]
            for n in failed:
                r = report["checks"][n]
                detail = r["error"] if r["max_residual"] is None else f"residual {r['max_residual']:.3e}"
                print(f"FAILED {n}: {detail}", file=sys.stderr)
            return 0 if report["passed"] else 1
        if args.command == "dualbasis":
            write_output(json.dumps(dualbasis_dump(args.d, args.k), indent=2), args.out)
            return 0
        cfg = load_config(args)
        table = STUDIES[args.command](cfg)
        write_output(table.to_csv(), cfg.out)
        return 0
    except (ValueError, TypeError, OSError, MeshError, DualBasisError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
