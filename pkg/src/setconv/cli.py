"""Command-line entry point: ``setconv <command> [flags]``.

Settings come from three layers: demo defaults, command-line flags, then
the ``--config`` JSON file, which overrides flags. Exit codes: 0 success,
2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .demos import DEFAULTS, run_demo
from .errors import NumericalFailure, ValidationError
from .io import load_json

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3

HELP = {
    "dist": "excess and truncated Hausdorff distance between two point clouds",
    "limits": "inner/outer limit estimates or a convergence table for a built-in set sequence",
    "epi-dist": "epi-distance between two registry functions",
    "epi-bounds": "minima and near-minimizer bounds for two registry functions",
    "penalty": "quadratic penalty example",
    "cubic": "naive versus softened constraint for the cubic example",
    "soften": "softened cubic reformulation along a schedule",
    "kw-density": "location-mixture density estimation over nested centers",
    "cp": "smoothed Newton method for a complementarity problem",
    "homotopy": "homotopy continuation for a single-valued equation",
    "cones": "tangent and normal cones of a polyhedron, exact and sampled",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_VALIDATION)


def _json_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="setconv", description="Set-convergence diagnostics and worked examples.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in DEFAULTS:
        s = sub.add_parser(name, help=HELP[name], description=HELP[name])
        s.add_argument("--rho", type=float)
        s.add_argument("--norm", help="euclidean, max, or a NormSpec JSON object")
        s.add_argument("--grid", action="append", metavar="LO:HI:STEPS", help="one per coordinate")
        s.add_argument("--out", metavar="DIR", help="write NAME.csv there instead of printing")
        s.add_argument("--seed", type=int)
        s.add_argument("--config", metavar="FILE", help="JSON settings; these override flags")
        s.add_argument("--svg", action="store_true", help="also write a static chart next to the CSV")
        s.add_argument("--set", action="append", default=[], metavar="KEY=JSON", help="override any setting")
        if name == "dist":
            s.add_argument("files", nargs="*", help="two point-cloud JSON files")
            s.add_argument("--builtin", choices=["sharpness-pair"])
            s.add_argument("--center", type=float, nargs="+")
        if name in ("epi-dist", "epi-bounds"):
            s.add_argument("--f", type=_json_value, help="registry name or field JSON")
            s.add_argument("--g", type=_json_value, help="registry name or field JSON")
        if name == "limits":
            s.add_argument("--sequence")
            s.add_argument("--mode", choices=["estimates", "report"])
        if name == "kw-density":
            s.add_argument("--sample", metavar="FILE")
    return p


def _overrides(args) -> dict:
    out = {}
    if args.rho is not None:
        out["rho"] = args.rho
    if args.norm is not None:
        out["norm"] = _json_value(args.norm)
    if args.grid:
        out["grid"] = args.grid
    if args.seed is not None:
        out["seed"] = args.seed
    for key in ("builtin", "center", "f", "g", "sequence", "mode", "sample"):
        v = getattr(args, key, None)
        if v is not None:
            out[key] = v
    files = getattr(args, "files", None)
    if files:
        if len(files) != 2:
            raise ValidationError("dist takes exactly two point-cloud files")
        out["a"], out["b"] = files
    for item in args.set:
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise ValidationError(f"--set expects KEY=JSON, got {item!r}")
        out[key] = _json_value(val)
    if args.config:
        cfg = load_json(args.config)
        if not isinstance(cfg, dict):
            raise ValidationError(f"{args.config}: the config must be a JSON object")
        out.update(cfg)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        report = run_demo(args.command, _overrides(args))
        if args.out:
            for path in report.write(args.out, svg=args.svg):
                print(path)
        else:
            sys.stdout.write(report.to_csv())
    except ValidationError as exc:
        print(f"setconv {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalFailure as exc:
        print(f"setconv {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
