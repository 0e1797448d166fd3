"""Command-line interface: ``perfid <subcommand> ...``.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure,
3 genericity-gate rejection.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateInputError,
    GenericityError,
    PerfidError,
    SingularMatrixError,
    UnsupportedFormatError,
)
from .formats import (
    classify_format,
    de_lathauwer_bound,
    expected_generic_rank,
    format_to_string,
    parse_format,
    unbalanced_count,
)
from .koszul import decompose_2223, decompose_345, decompose_345_anyrank, format_koszul_table, koszul_table
from .monodromy import MonodromySettings, count_decompositions
from .tensors import Decomposition, DenseTensor, evaluate, loads, random_decomposition
from .tracker import TrackerSettings

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_GENERICITY = 0, 1, 2, 3

# config keys accepted in a --config file, with their converters
CONFIG_KEYS = {
    "seed": int,
    "rank": int,
    "stabilize": int,
    "max_loops": int,
    "workers": int,
    "dump": str,
    "output": str,
    "truth": str,
    "method": str,
    "tol": float,
    "verbose": int,
    "predictor": str,
    "initial_step": float,
    "min_step": float,
    "max_step": float,
    "newton_tol": float,
    "max_newton_iters": int,
    "max_steps": int,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def read_config(path: str | Path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment, dashes in keys are allowed."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = CONFIG_KEYS[key](value)
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return out


def _add_tracker_flags(p):
    g = p.add_argument_group("tracker overrides")
    g.add_argument("--predictor", choices=["euler", "rk4"])
    g.add_argument("--initial-step", type=float)
    g.add_argument("--min-step", type=float)
    g.add_argument("--max-step", type=float)
    g.add_argument("--newton-tol", type=float)
    g.add_argument("--max-newton-iters", type=int)
    g.add_argument("--max-steps", type=int)


def _tracker_settings(args) -> TrackerSettings:
    keys = ["predictor", "initial_step", "min_step", "max_step", "newton_tol", "max_newton_iters", "max_steps"]
    return TrackerSettings().updated(**{k: getattr(args, k, None) for k in keys})


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="perfid", description="Tensor decomposition counting and recovery.")
    parser.add_argument("--config", help="flat key=value file with defaults for any flag")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("info", help="closed-form facts about a format")
    p.add_argument("format")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("count", help="count decompositions by monodromy loops")
    p.add_argument("format")
    p.add_argument("--rank", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stabilize", type=int, default=50, help="quiet loops needed to stop")
    p.add_argument("--max-loops", type=int, default=2000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--dump", help="write the report and all found decompositions as JSON")
    p.add_argument("--json", action="store_true", help="print the report as JSON")
    _add_tracker_flags(p)

    p = sub.add_parser("decompose", help="unique decomposition of a (3,4,5) or (2,2,2,3) tensor")
    p.add_argument("tensor")
    p.add_argument("--method", choices=["auto", "koszul345", "koszul2223"], default="auto")
    p.add_argument("--rank", type=int, help="known rank below 6 for (3,4,5) tensors")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", help="decomposition file (default: stdout)")
    _add_tracker_flags(p)

    p = sub.add_parser("verify", help="relative residual of a decomposition against a tensor")
    p.add_argument("tensor")
    p.add_argument("decomposition")
    p.add_argument("--tol", type=float, default=1e-8)

    p = sub.add_parser("koszul-table", help="non-redundant Koszul flattenings of a format")
    p.add_argument("format")

    p = sub.add_parser("random-tensor", help="planted tensor plus its ground-truth decomposition")
    p.add_argument("format")
    p.add_argument("--rank", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", help="tensor file (default: stdout)")
    p.add_argument("--truth", help="where to write the planted decomposition")
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        try:
            cfg = read_config(known.config)
        except (OSError, UsageError) as exc:
            parser.exit(EXIT_USAGE, f"perfid: error: {exc}\n")
        # push config values into every subparser; explicit flags still win
        for action in parser._subparsers._group_actions:
            for subparser in action.choices.values():
                dests = {a.dest for a in subparser._actions}
                subparser.set_defaults(**{k: v for k, v in cfg.items() if k in dests})
        if "verbose" in cfg:
            parser.set_defaults(verbose=cfg["verbose"])
    return parser.parse_args(argv)


def _echo_config(args, out) -> None:
    shown = {k: v for k, v in vars(args).items() if v is not None and k not in ("command",)}
    print("# config: " + json.dumps(shown, sort_keys=True), file=out)


def _read_json(path: str):
    try:
        return loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"{path}: not a tensor or decomposition file ({exc})") from None


def _write(text: str, path: str | None, out) -> None:
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text, file=out)


def info_report(fmt) -> dict:
    R = expected_generic_rank(fmt)
    report = {
        "format": format_to_string(fmt),
        "ambient_dim": fmt.ambient_dim,
        "expected_generic_rank": str(R),
        "perfect": R.denominator == 1,
    }
    if fmt.is_ordinary:
        cls = classify_format(fmt)
        report["balanced"] = cls["balanced"]
        report["regime"] = cls["regime"]
        report["de_lathauwer_bound"] = de_lathauwer_bound(fmt)
        if cls["regime"] != "balanced":
            report.update(unbalanced_count(fmt))
    return report


def cmd_info(args, out) -> int:
    report = info_report(parse_format(args.format))
    if args.json:
        print(json.dumps(report), file=out)
        return EXIT_OK
    labels = {
        "format": "format",
        "ambient_dim": "ambient dimension",
        "expected_generic_rank": "expected generic rank",
        "perfect": "perfect",
        "balanced": "balanced",
        "regime": "regime",
        "generic_rank": "generic rank",
        "num_decompositions": "decompositions",
        "de_lathauwer_bound": "De Lathauwer bound",
    }
    width = max(len(v) for v in labels.values())
    for key, label in labels.items():
        if key in report:
            print(f"{label:<{width}}  {report[key]}", file=out)
    return EXIT_OK


def cmd_count(args, out) -> int:
    fmt = parse_format(args.format)
    settings = MonodromySettings(
        stabilize_after=args.stabilize,
        max_loops=args.max_loops,
        seed=args.seed,
        workers=args.workers,
        tracker=_tracker_settings(args),
    )
    if args.stabilize < 1 or args.max_loops < 1 or args.workers < 1:
        raise UsageError("--stabilize, --max-loops and --workers must be positive")
    _echo_config(args, out)

    def progress(state, added):
        logging.getLogger("perfid.cli").info(
            "loop %d: %d orbits (+%d), %d quiet", state.loops_run, len(state.known_orbits), added,
            state.loops_since_last_new,
        )

    try:
        report, state = count_decompositions(fmt, args.rank, settings, progress=progress)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(json.dumps(report.to_dict()) if args.json else report.table(), file=out)
    if args.dump:
        payload = {"report": report.to_dict(), "decompositions": [d.to_dict() for d in state.known_orbits]}
        Path(args.dump).write_text(json.dumps(payload) + "\n")
    return EXIT_OK


def cmd_decompose(args, out) -> int:
    T = _read_json(args.tensor)
    if not isinstance(T, DenseTensor):
        raise UsageError(f"{args.tensor} holds a decomposition, expected a tensor")
    fmt = T.format
    method = args.method
    if method == "auto":
        if fmt.is_ordinary and fmt.dims == (3, 4, 5):
            method = "koszul345"
        elif fmt.is_ordinary and fmt.dims == (2, 2, 2, 3):
            method = "koszul2223"
        else:
            raise UnsupportedFormatError(
                f"no decomposition algorithm for format {fmt}; supported: 3,4,5 and 2,2,2,3"
            )
    settings = _tracker_settings(args)
    if method == "koszul345":
        if args.rank is not None and args.rank != 6:
            dec = decompose_345_anyrank(T, args.rank, seed=args.seed, settings=settings)
        else:
            dec = decompose_345(T, seed=args.seed, settings=settings)
    else:
        dec = decompose_2223(T, seed=args.seed, settings=settings)
    res = relative_residual(T, dec)
    print(f"# seed={args.seed} method={method} terms={dec.rank} relative_residual={res:.3e}", file=sys.stderr)
    _write(json.dumps(dec.to_dict()), args.output, out)
    return EXIT_OK


def relative_residual(T: DenseTensor, dec: Decomposition) -> float:
    if T.format != dec.format:
        raise UsageError(f"format mismatch: tensor {T.format} vs decomposition {dec.format}")
    return float(np.linalg.norm(T.coeffs - evaluate(dec).coeffs) / (T.norm() or 1.0))


def cmd_verify(args, out) -> int:
    T = _read_json(args.tensor)
    dec = _read_json(args.decomposition)
    if not isinstance(T, DenseTensor) or not isinstance(dec, Decomposition):
        raise UsageError("expected a tensor file followed by a decomposition file")
    res = relative_residual(T, dec)
    ok = res <= args.tol
    print(f"{'pass' if ok else 'fail'}: relative residual {res:.3e} (tol {args.tol:.1e})", file=out)
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_koszul_table(args, out) -> int:
    fmt = parse_format(args.format)
    print(format_koszul_table(koszul_table(fmt)), file=out)
    return EXIT_OK


def cmd_random_tensor(args, out) -> int:
    fmt = parse_format(args.format)
    r = args.rank
    if r is None:
        R = expected_generic_rank(fmt)
        if R.denominator != 1:
            raise UsageError(f"format {fmt} is not perfect; pass --rank")
        r = int(R)
    if r < 1:
        raise UsageError("--rank must be positive")
    _echo_config(args, sys.stderr)
    dec = random_decomposition(fmt, r, args.seed)
    _write(json.dumps(evaluate(dec).to_dict()), args.output, out)
    if args.truth:
        Path(args.truth).write_text(json.dumps(dec.to_dict()) + "\n")
    return EXIT_OK


COMMANDS = {
    "info": cmd_info,
    "count": cmd_count,
    "decompose": cmd_decompose,
    "verify": cmd_verify,
    "koszul-table": cmd_koszul_table,
    "random-tensor": cmd_random_tensor,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args, out)
    except GenericityError as exc:
        print(f"perfid: genericity check failed: {exc}", file=sys.stderr)
        return EXIT_GENERICITY
    except (DegenerateInputError, SingularMatrixError, ArithmeticError) as exc:
        print(f"perfid: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (UsageError, UnsupportedFormatError, ValueError) as exc:
        print(f"perfid: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PerfidError as exc:
        print(f"perfid: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
