"""``qtsort`` command-line entry point."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import experiments as ex

# Flag dest -> RunConfig field, where they differ.
_RENAMES = {"s_space": "S"}


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--n", type=int, help="input length (search size for grover/minfind)")
    p.add_argument("--s-space", type=int, help="space budget S in qubits")
    p.add_argument("--c", type=float, help="block-plan constant (default 2)")
    p.add_argument("--c-dh", type=float, help="Durr-Hoyer budget constant (default 22.5)")
    p.add_argument("--trials", type=int, help="seeded repetitions")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--workers", type=int, help="worker processes for trials")
    p.add_argument("--config", help="JSON file mirroring the flags; flags win")
    p.add_argument("--engine", choices=ex.ENGINES)
    p.add_argument("--eps-initial", type=float)
    p.add_argument("--eps-successor", type=float)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qtsort", description="Space-bounded quantum sorting experiments."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()

    g = sub.add_parser("grover", parents=[common], help="fixed-iteration Grover search")
    g.add_argument("--k", type=int, help="number of marked items")
    g.add_argument("--t", type=int, help="iterations (default: near-optimal)")

    m = sub.add_parser("minfind", parents=[common], help="bounded-error minimum finding")
    m.add_argument("--epsilon", type=float, help="error bound (default 1/n^2)")

    sub.add_parser("sort", parents=[common], help="quantum sort runs")
    sub.add_parser("baseline", parents=[common], help="classical block/heap sort")

    t = sub.add_parser("tradeoff", parents=[common], help="T versus n sweep (CSV)")
    t.add_argument("--n-list", type=lambda s: [int(v) for v in s.split(",")],
                   help="comma-separated n values")
    t.add_argument("--s-coef", type=float, help="S = ceil(coef * log2(n)^2) (default 3)")
    t.add_argument("--algorithm", choices=("quantum", "classical"))

    lab = sub.add_parser("lab", parents=[common], help="lower-bound lab matrix")
    lab.add_argument("--quick", action="store_true", help="reduced matrix")
    return parser


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise ex.ConfigError("config file must hold a JSON object")
    return {_RENAMES.get(k.replace("-", "_"), k.replace("-", "_")): v for k, v in data.items()}


def make_config(args: argparse.Namespace) -> ex.RunConfig:
    merged = _load_config(args.config)
    for key, value in vars(args).items():
        if key in ("config", "command", "quick") or value is None:
            continue
        merged[_RENAMES.get(key, key)] = value
    unknown = set(merged) - ex.RunConfig.field_names()
    if unknown:
        raise ex.ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    merged.pop("command", None)
    return ex.RunConfig(args.command, **merged).validate()


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return ex.to_json(report)
    if report["command"] == "tradeoff":
        return ex.tradeoff_csv(report)
    return ex.flat_csv(report)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = make_config(args)
        if args.command == "lab":
            matrix = ex.QUICK_MATRIX if args.quick else ex.LabMatrix()
            report = ex.run_lab(cfg, matrix)
        else:
            report = ex.COMMANDS[args.command](cfg)
    except (ex.ConfigError, OSError, json.JSONDecodeError) as exc:
        parser.print_usage(sys.stderr)
        print(f"qtsort: error: {exc}", file=sys.stderr)
        return 2

    fmt = cfg.format or ("csv" if args.command == "tradeoff" else "json")
    text = render(report, fmt)
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)

    bad = ex.invariant_violations(report)
    if bad:
        print(f"qtsort: invariant violations: {', '.join(bad)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
