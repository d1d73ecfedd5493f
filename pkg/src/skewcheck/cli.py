"""Command-line front end.

Every subcommand prints a JSON report (sorted keys, so identical inputs give
identical bytes) and exits 0 when the check passes, 1 when it fails and 2
on usage or input errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .constructions import CONSTRUCTIONS, construct
from .errors import DomainError, InputError, ResourceError
from .geometry import equivalence_check
from .jets import PolyMap
from .local_condition import (LocalOptions, boundary_sigma_min, certify_local_condition,
                              check_local_condition)
from .report import Report, to_jsonable
from .skewness import classify_failure, is_pair_skew, sweep_neighborhood
from .stratification import genericity_experiment, transversality_check

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def parse_vector(text: str, what: str) -> np.ndarray:
    try:
        return np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise InputError(f"--{what} must be comma-separated numbers, got {text!r}") from None


def load_map(args) -> PolyMap:
    if args.map is not None:
        try:
            text = Path(args.map).read_text()
        except OSError as exc:
            raise InputError(f"cannot read {args.map}: {exc}") from exc
        try:
            return PolyMap.from_json(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"{args.map}: invalid JSON at line {exc.lineno} "
                             f"column {exc.colno}: {exc.msg}") from exc
    if args.n is None:
        raise InputError("--n is required with --construct")
    return construct(args.construct, args.n, args.N)


def point_arg(text: str | None, f: PolyMap, what: str) -> np.ndarray:
    if text is None:
        return np.zeros(f.n)
    x = parse_vector(text, what)
    if x.shape != (f.n,):
        raise InputError(f"--{what} has {x.size} coordinates but the map has n={f.n}")
    return x


def _map_source(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--construct", choices=sorted(CONSTRUCTIONS),
                     help="named construction")
    src.add_argument("--map", metavar="FILE", help="PolyMap JSON file")
    p.add_argument("--n", type=int, help="domain dimension (constructions)")
    p.add_argument("--N", type=int, help="target dimension (constructions)")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=float, default=None, help="decision tolerance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", metavar="FILE", help="also write the report here")
    p.add_argument("--plot-data", metavar="FILE", help="write CSV plot data here")
    p.add_argument("--threads", type=int, default=1, help="maximum worker threads")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="skewcheck",
                     description="Numerical checks for totally skew embeddings.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("check-local", help="third-order local condition at a point")
    _map_source(p)
    p.add_argument("--at", help="base point x1,..,xn (default: origin)")
    p.add_argument("--certify", action="store_true", help="Lipschitz-certified mode")
    p.add_argument("--mesh", type=float, default=1e-3, help="net mesh for --certify")
    _common(p)

    p = sub.add_parser("check-pair", help="total skewness at a pair of points")
    _map_source(p)
    p.add_argument("--p", required=True)
    p.add_argument("--q", required=True)
    _common(p)

    p = sub.add_parser("sweep", help="skewness on random pairs near a point")
    _map_source(p)
    p.add_argument("--at", help="ball centre (default: origin)")
    p.add_argument("--r", type=float, default=0.05)
    p.add_argument("--trials", type=int, default=10_000)
    _common(p)

    p = sub.add_parser("geometry", help="local condition vs its geometric form")
    _map_source(p)
    p.add_argument("--at", help="base point (default: origin)")
    _common(p)

    p = sub.add_parser("genericity", help="failure rate over random jet triples")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--trials", type=int, default=1000)
    _common(p)

    p = sub.add_parser("transversality", help="injectivity at the degenerate triple")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    _common(p)

    p = sub.add_parser("construct", help="print a named construction as PolyMap JSON")
    p.add_argument("name", choices=sorted(CONSTRUCTIONS))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--N", type=int)
    p.add_argument("--out", metavar="FILE")
    return parser


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def cmd_check_local(args) -> tuple[dict, bool]:
    f = load_map(args)
    a = point_arg(args.at, f, "at")
    tol = 1e-8 if args.tol is None else args.tol
    opts = LocalOptions(tol=tol, seed=args.seed)
    if args.certify:
        rep = certify_local_condition(f, a, args.mesh, tol=tol, opts=opts)
    else:
        rep = check_local_condition(f, a, opts)
    if args.plot_data and f.n == 2:
        theta = np.linspace(0.0, 2 * np.pi, 720, endpoint=False)
        sig = boundary_sigma_min(f, a, np.column_stack([np.cos(theta), np.sin(theta)]))
        _write_csv(args.plot_data, ["theta", "sigma_min"], zip(theta, sig))
    return rep.to_dict(), rep.passed


def cmd_check_pair(args) -> tuple[dict, bool]:
    f = load_map(args)
    p, q = point_arg(args.p, f, "p"), point_arg(args.q, f, "q")
    tol = 1e-9 if args.tol is None else args.tol
    res = is_pair_skew(f, p, q, tol)
    cls = classify_failure(f, p, q, tol)
    data = {"p": p, "q": q, "sigma_min": res.sigma_min, "sigma_max": res.sigma_max,
            "margin": res.margin, "raw_margin": res.raw_margin,
            "blowup_margin": res.blowup_margin, "failure": cls.kind, "tol": tol}
    if cls.witness is not None:
        v1, v2, lam = cls.witness
        data["witness"] = {"v1": v1, "v2": v2, "lambda": lam}
    if res.reason:
        data["reason"] = res.reason
    rep = Report("pair", res.skew, data)
    return rep.to_dict(), rep.passed


def cmd_sweep(args) -> tuple[dict, bool]:
    f = load_map(args)
    a = point_arg(args.at, f, "at")
    tol = 1e-9 if args.tol is None else args.tol
    rep = sweep_neighborhood(f, a, args.r, trials=args.trials, tol=tol, seed=args.seed)
    return rep.to_dict(), rep.passed


def cmd_geometry(args) -> tuple[dict, bool]:
    f = load_map(args)
    a = point_arg(args.at, f, "at")
    tol = 1e-8 if args.tol is None else args.tol
    rep = equivalence_check(f, a, LocalOptions(tol=tol, seed=args.seed))
    return rep.to_dict(), rep.passed


def cmd_genericity(args) -> tuple[dict, bool]:
    tol = 1e-8 if args.tol is None else args.tol
    rep = genericity_experiment(args.n, args.N, trials=args.trials, seed=args.seed, tol=tol,
                                threads=args.threads, keep_values=bool(args.plot_data))
    values = rep.data.pop("min_sigma_values", None)
    if args.plot_data:
        logs = np.log10(np.maximum(values, 1e-18))
        counts, edges = np.histogram(logs, bins=20)
        _write_csv(args.plot_data, ["log10_sigma_left", "log10_sigma_right", "count"],
                   zip(edges[:-1], edges[1:], counts))
    return rep.to_dict(), rep.passed


def cmd_transversality(args) -> tuple[dict, bool]:
    tol = 1e-8 if args.tol is None else args.tol
    rep = transversality_check(args.n, args.N, tol)
    return rep.to_dict(), rep.passed


COMMANDS = {
    "check-local": cmd_check_local,
    "check-pair": cmd_check_pair,
    "sweep": cmd_sweep,
    "geometry": cmd_geometry,
    "genericity": cmd_genericity,
    "transversality": cmd_transversality,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "construct":
            text = construct(args.name, args.n, args.N).to_json(indent=2) + "\n"
            if args.out:
                Path(args.out).write_text(text)
            sys.stdout.write(text)
            return EXIT_PASS
        data, passed = COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (InputError, DomainError, ResourceError) as exc:
        print(f"skewcheck: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "plot_data")}
    data["config"] = config
    data["version"] = __version__
    text = json.dumps(to_jsonable(data), sort_keys=True, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_PASS if passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
