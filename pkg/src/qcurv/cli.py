"""Command line entry point ``qcurv``.

``QCURV_SEED`` is reserved: nothing in the library is random, so it is read
by no code path.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import catalog
from .errors import QCurvError
from .io import load_json
from .runner import run_scenario, verify_all, write_outputs


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qcurv", description="Q-curvature deficit and isoperimetric checks.")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="execute a scenario file")
    run.add_argument("scenario", type=Path)
    run.add_argument("--out", type=Path, default=None, help="output directory (default: next to the scenario)")
    run.add_argument("--quad-order", type=int, default=None, help="sphere quadrature order")
    run.add_argument("--t-window", type=float, nargs=2, metavar=("A", "B"), default=None,
                     help="working window in t = log r")
    sub.add_parser("list-catalog", help="list catalog entries")
    ver = sub.add_parser("verify-all", help="run the regression suite")
    ver.add_argument("--out", type=Path, default=Path("qcurv-verify"))
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list-catalog":
        for e in catalog.list_catalog():
            print(f"{e['id']:14s} {json.dumps(e['defaults'], sort_keys=True):60s} {e['description']}")
        return 0
    if args.command == "verify-all":
        return 0 if verify_all(args.out, log=print) else 1
    try:
        sc = load_json(args.scenario)
        out = args.out or args.scenario.with_suffix("")
        res = run_scenario(sc, base_dir=args.scenario.parent, quad_order=args.quad_order,
                           t_window=args.t_window, name=sc.get("name", args.scenario.stem)
                           if isinstance(sc, dict) else None)
    except QCurvError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    write_outputs(res, out)
    sys.stdout.write(res.summary())
    for e in res.errors:
        print(f"error: {e}", file=sys.stderr)
    return 0 if res.ok else 1


if __name__ == "__main__":
    sys.exit(main())
