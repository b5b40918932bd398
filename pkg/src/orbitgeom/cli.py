"""Command-line entry point.

``orbitgeom run --config cfg.json [--out PATH] [--format csv|json] [--seed N] [-v]``
``orbitgeom verify [--n 2,3,4] [--seed N] [-v]``

Exit codes: 0 success, 1 invalid input (configuration, validation, I/O),
2 numerical failure (no convergence or a tolerance breach).
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import load_config
from .errors import NumericalError, OrbitGeomError, ParseError, ValidationError
from .runner import TaskError, emit, run
from .verify import verify

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2


def _dims(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not dims or min(dims) < 1:
        raise argparse.ArgumentTypeError("dimensions must be positive")
    return dims


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with 1; argparse's default 2 is reserved for numerical failures."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="orbitgeom", description="Isospectral density-operator geometry experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one configured experiment")
    r.add_argument("--config", required=True, help="path to the JSON configuration")
    r.add_argument("--out", help="output file (default: stdout)")
    r.add_argument("--format", choices=("csv", "json"), help="output format (default: from --out suffix, else json)")
    r.add_argument("--seed", type=int, help="override the configured seed")
    r.add_argument("-v", "--verbose", action="count", default=0)

    v = sub.add_parser("verify", help="run the property suite")
    v.add_argument("--n", type=_dims, default=(2, 3, 4), help="dimensions, e.g. 2,3,4")
    v.add_argument("--seed", type=int, default=42)
    v.add_argument("-v", "--verbose", action="count", default=0)
    return p


def _exit_code(exc: BaseException) -> int:
    cause = exc.cause if isinstance(exc, TaskError) else exc
    if isinstance(cause, NumericalError):
        return EXIT_NUMERICAL
    return EXIT_INPUT


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    rec = run(cfg)
    fmt = args.format or ("csv" if args.out and args.out.endswith(".csv") else "json")
    text = emit(rec, fmt, args.out)
    if args.out is None:
        sys.stdout.write(text)
    logging.getLogger("orbitgeom").info("wall time %.3f s", rec.wall_time)
    if not rec.ok:
        print(f"orbitgeom: task {rec.task} reported {rec.status}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_verify(args) -> int:
    rep = verify(args.n, args.seed)
    print(rep.format_table())
    print(f"\n{len(rep.checks) - len(rep.failures())}/{len(rep.checks)} checks passed in {rep.seconds:.1f} s")
    return EXIT_OK if rep.passed else EXIT_NUMERICAL


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_verify(args)
    except (ParseError, ValidationError) as exc:
        field = getattr(exc, "field", None)
        where = f" [field: {field}]" if field else ""
        print(f"orbitgeom: invalid input: {exc}{where}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"orbitgeom: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OrbitGeomError as exc:
        print(f"orbitgeom: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
