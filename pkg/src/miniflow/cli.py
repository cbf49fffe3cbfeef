"""Command-line entry point.

    miniflow run <script> [--workers N] [--mode threads|processes]
                          [--policy retain|reinit] [--guest-path P]
                          [--log-level L] [--listen ADDR] [--guest-backend B]
    miniflow check <script>      compile only
    miniflow dump-ir <script>    print the IR textual dump

Exit codes: 0 success, 2 compile error, 3 runtime error,
64 usage error, 66 missing input file.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .compiler import compile_file
from .errors import MiniflowError, SourceError
from .ir import dump_ir
from .runtime import RunConfig, run_compiled
from .stats import format_stats, summarize
from .worker import Policy

EXIT_OK = 0
EXIT_COMPILE = 2
EXIT_RUNTIME = 3
EXIT_USAGE = 64
EXIT_NOINPUT = 66

log = logging.getLogger("miniflow")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="miniflow",
                     description="Run dataflow scripts on a local engine/server/worker trio. "
                                 "The layout is fixed at one engine and one server; only the "
                                 "worker count varies.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="compile and run a script to quiescence")
    run_p.add_argument("script")
    run_p.add_argument("--workers", type=int, default=1, metavar="N")
    run_p.add_argument("--mode", choices=["threads", "processes"], default="threads")
    run_p.add_argument("--policy", choices=["retain", "reinit"], default="reinit",
                       help="guest interpreter lifecycle between tasks")
    run_p.add_argument("--guest-path", default=None, metavar="P",
                       help=f"guest package search path ({os.pathsep}-separated); "
                            "defaults to MINIFLOW_GUEST_PATH")
    run_p.add_argument("--log-level", default="warning",
                       choices=["debug", "info", "warning", "error"])
    run_p.add_argument("--listen", default="127.0.0.1:0", metavar="ADDR",
                       help="listen address for processes mode")
    run_p.add_argument("--guest-backend", choices=["pyexec", "toy"], default="pyexec")

    check_p = sub.add_parser("check", help="compile a script without running it")
    check_p.add_argument("script")

    dump_p = sub.add_parser("dump-ir", help="print the lowered dataflow program")
    dump_p.add_argument("script")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    level = getattr(args, "log_level", "warning")
    logging.basicConfig(level=level.upper(), stream=sys.stderr,
                        format="miniflow %(levelname)s: %(message)s")
    if args.command == "run" and args.workers < 1:
        print("miniflow: error: --workers must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    if not os.path.isfile(args.script):
        print(f"miniflow: error: script file {args.script!r} not found", file=sys.stderr)
        return EXIT_NOINPUT

    try:
        compiled = compile_file(args.script)
    except SourceError as exc:
        print(f"miniflow: compile error: {exc}", file=sys.stderr)
        return EXIT_COMPILE
    except MiniflowError as exc:
        print(f"miniflow: compile error: {exc}", file=sys.stderr)
        return EXIT_COMPILE

    if args.command == "check":
        print(f"{args.script}: ok")
        return EXIT_OK
    if args.command == "dump-ir":
        sys.stdout.write(dump_ir(compiled.ir))
        return EXIT_OK

    guest_path = args.guest_path.split(os.pathsep) if args.guest_path else None
    config = RunConfig(
        workers=args.workers,
        mode=args.mode,
        policy=Policy.RETAIN if args.policy == "retain" else Policy.REINITIALIZE,
        backend=args.guest_backend,
        guest_path=guest_path,
        listen=args.listen,
    )
    try:
        result = run_compiled(compiled, config)
    except MiniflowError as exc:
        print(f"miniflow: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if not result.ok:
        print(f"miniflow: runtime error: {result.error}", file=sys.stderr)
        return EXIT_RUNTIME
    for line in result.value_lines():
        print(line)
    if level in ("debug", "info"):
        stats = summarize(result.events, worker_count=args.workers)
        print(format_stats(stats), file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
