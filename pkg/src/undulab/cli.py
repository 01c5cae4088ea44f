"""Command-line runner: ``undulab run|list|describe``.

Exit codes: 0 when every built-in check passes, 1 when a check fails,
2 for usage or configuration errors.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import experiments as ex


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="undulab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment from a config file or by name")
    r.add_argument("config", help="path to a TOML config, or a catalog name for defaults")
    r.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override a config key (repeatable)")
    r.add_argument("--out", help="output directory (default runs/<experiment>)")
    r.add_argument("--seed", type=int, help="override the run seed")
    sub.add_parser("list", help="list the experiment catalog")
    d = sub.add_parser("describe", help="document an experiment's parameters")
    d.add_argument("name")
    return p


def _run(args) -> int:
    path = Path(args.config)
    if path.suffix == ".toml" or path.exists():
        raw = ex.load_config(path)
    elif args.config in ex.CATALOG:
        raw = {"experiment": args.config}
    else:
        raise ex.ConfigError(f"{args.config!r} is neither a config file nor an experiment")
    for assignment in args.set:
        ex.apply_override(raw, assignment)
    if args.seed is not None:
        raw["seed"] = args.seed
    cfg = ex.resolve(raw)
    out = args.out or cfg.get("out") or str(Path("runs") / cfg["experiment"])
    rec = ex.run(cfg, out)
    for name, ok in rec.verdicts.items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    print(f"{cfg['experiment']}: {'passed' if rec.passed else 'FAILED'} "
          f"in {rec.wall_clock:.2f} s; artifacts in {out}")
    return 0 if rec.passed else 1


def main(argv: list[str] | None = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "list":
            for name in ex.list_experiments():
                print(f"{name:20s} {ex.CATALOG[name].summary}")
            return 0
        if args.command == "describe":
            print(ex.describe(args.name))
            return 0
        return _run(args)
    except ex.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
