"""Command-line entry point: ``linrep <subcommand> ...``.

Exit codes: 0 success, 2 validation, 3 budget, 4 numerical divergence.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import SUBCOMMANDS, RunConfig, load_config
from .errors import LinrepError
from .problems import list_problems
from .runner import OUTPUT_ROOT_ENV, execute


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML config; command-line flags override its keys")
    p.add_argument("--out", help=f"output directory (default: ${OUTPUT_ROOT_ENV}/<name>-<hash>)")
    p.add_argument("--seed", type=int)
    p.add_argument("--no-plots", action="store_true", help="skip PNG rendering")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="linrep", description="Linear-representation solvers for nonlinear dynamics.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a YAML config")
    r.add_argument("config")
    r.add_argument("--out")
    r.add_argument("--no-plots", action="store_true")

    sub.add_parser("list-problems", help="print the built-in problem registry")

    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"{name} pipeline")
        _add_common(p)
        if name != "resources":
            p.add_argument("--problem")
            p.add_argument("--method")
            p.add_argument("--order", choices=("lie", "strang"))
            p.add_argument("--M", type=int)
            p.add_argument("--dt", type=float)
            p.add_argument("--eps", type=float, help="target accuracy; selects the mesh strategy")
            p.add_argument("--ell", type=float)
            p.add_argument("--steps", type=int)
            p.add_argument("--omega-cells", type=int)
            p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                           help="problem parameter override (repeatable)")
        else:
            p.add_argument("--d", type=int)
            p.add_argument("--eps", type=float)
            p.add_argument("--ell", type=float)
            p.add_argument("--alpha", type=float)
    return ap


def _config_from_args(args) -> RunConfig:
    base = load_config(args.config).to_dict() if args.config else {}
    base["subcommand"] = args.command
    if args.seed is not None:
        base["seed"] = args.seed
    if args.command == "resources":
        rc = base.setdefault("resources", {})
        for key in ("d", "eps", "ell", "alpha"):
            v = getattr(args, key)
            if v is not None:
                rc[key] = v
    else:
        prob = base.get("problem") or {}
        if args.problem:
            prob = {"name": args.problem, "params": {} if prob.get("name") != args.problem else prob.get("params", {})}
        for kv in args.param:
            k, sep, v = kv.partition("=")
            if not sep:
                raise SystemExit(f"--param expects KEY=VALUE, got {kv!r}")
            prob.setdefault("params", {})[k] = float(v)
        base["problem"] = prob
        if args.method:
            base["method"] = args.method
        if args.order:
            base["order"] = args.order
        mesh = base.setdefault("mesh", {})
        for key, attr in (("M", "M"), ("dt", "dt"), ("eps", "eps"), ("ell", "ell"), ("steps", "steps"),
                          ("omega_cells", "omega_cells")):
            v = getattr(args, attr)
            if v is not None:
                mesh[key] = v
    if base.get("sampling") is None:
        base.pop("sampling", None)
    return RunConfig.from_dict(base)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "list-problems":
            for p in list_problems():
                defaults = ", ".join(f"{k}={v}" for k, v in p["defaults"].items())
                print(f"{p['name']:<24} [{p['kind']}] {p['summary']}")
                print(f"{'':<24} anchor: {p['anchor']}; defaults: {defaults}")
            return 0
        cfg = load_config(args.config) if args.command == "run" else _config_from_args(args)
        if args.no_plots:
            cfg.plots = False
        directory, result = execute(cfg, args.out)
    except LinrepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    print(f"wrote {directory}")
    print(f"content-sha256 {result['content_sha256']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
