"""Command-line driver.

Exit codes: 0 success, 1 semantic failure (trap, failed assertion, invalid
module), 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

from .embedding import load_program, parse_arg
from .errors import EmbeddingError, LinkError, ParseError, ValidationError
from .runtime import DEFAULT_CTABLE_CAPACITY, DEFAULT_PROMPT_DEPTH, Limits

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
DEFAULT_FUEL = 10_000_000


class UsageError(Exception):
    pass


def _use_color(stream) -> bool:
    if os.environ.get("WASMK_COLOR", "") == "0":
        return False
    return hasattr(stream, "isatty") and stream.isatty()


def paint(text: str, color: str, stream=None) -> str:
    stream = stream or sys.stderr
    if not _use_color(stream):
        return text
    code = {"red": "31", "green": "32", "yellow": "33"}[color]
    return f"\033[{code}m{text}\033[0m"


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as f:
            return f.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None


@dataclass
class RunConfig:
    path: str
    entry: Optional[str] = None
    args: list = field(default_factory=list)
    engine: str = "fast"
    trace: bool = False
    check_preservation: bool = False
    epoch_debug: bool = False
    fuel: int = DEFAULT_FUEL
    ctable_cap: int = DEFAULT_CTABLE_CAPACITY
    prompt_depth: int = DEFAULT_PROMPT_DEPTH
    results: str = "stderr"

    def check(self) -> None:
        if self.engine == "oracle" and self.fuel <= 0:
            raise UsageError("--fuel must be positive")
        if self.trace and self.engine != "oracle":
            raise UsageError("--trace needs --engine oracle")
        if self.ctable_cap <= 0 or self.prompt_depth <= 0:
            raise UsageError("limits must be positive")

    def limits(self) -> Limits:
        return Limits(ctable_capacity=self.ctable_cap, prompt_depth=self.prompt_depth,
                      epoch_debug=self.epoch_debug)


def resolve_entry(inst, requested: Optional[str]) -> str:
    """The explicit name, else "main", else "_start"."""
    if requested is not None:
        return requested
    for name in ("main", "_start"):
        try:
            inst.export(name)
            return name
        except KeyError:
            pass
    raise UsageError('no --invoke given and the module exports neither "main" nor "_start"')


def cmd_validate(path: str, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    from .syntax import parse_module
    from .validator import validate_module
    text = _read(path)
    try:
        validate_module(parse_module(text))
    except ParseError as exc:
        print(f"{path}:{exc}: {paint('parse error', 'red', err)}", file=err)
        return EXIT_FAIL
    except ValidationError as exc:
        print(f"{path}: {paint('invalid', 'red', err)} {exc}", file=err)
        return EXIT_FAIL
    print("valid", file=out)
    return EXIT_OK


def cmd_run(cfg: RunConfig, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    cfg.check()
    text = _read(cfg.path)
    try:
        prog = load_program(text, cfg.limits())
    except ParseError as exc:
        print(f"{cfg.path}:{exc}: {paint('parse error', 'red', err)}", file=err)
        return EXIT_FAIL
    except (ValidationError, LinkError) as exc:
        print(f"{cfg.path}: {paint('invalid', 'red', err)} {exc}", file=err)
        return EXIT_FAIL
    inst = prog.inst
    entry = resolve_entry(inst, cfg.entry)
    try:
        params = inst.func_type(inst.export(entry)).params
    except KeyError:
        raise UsageError(f"no exported function named {entry!r}") from None
    if len(cfg.args) != len(params):
        raise UsageError(f"{entry} takes {len(params)} argument(s), got {len(cfg.args)}")
    try:
        args = [parse_arg(a, t) for a, t in zip(cfg.args, params)]
    except EmbeddingError as exc:
        raise UsageError(str(exc)) from None

    options = {}
    if cfg.engine == "oracle":
        options = {"fuel": cfg.fuel, "check_preservation": cfg.check_preservation}
        if cfg.trace:
            options["trace"] = lambda line: print(line, file=err)
    else:
        options = {"debug": cfg.check_preservation}
    try:
        result = prog.call(entry, args, engine=cfg.engine, **options)
    except EmbeddingError as exc:
        raise UsageError(str(exc)) from None
    except AssertionError as exc:
        out.write(prog.stdout)
        print(f"{paint('preservation violated', 'red', err)}: {exc}", file=err)
        return EXIT_FAIL
    out.write(prog.stdout)
    out.flush()
    if not result.ok:
        trap = getattr(result, "trap", None)
        detail = trap.message if trap is not None else str(result)
        print(f"{paint('trap', 'red', err)}: {result.kind}: {detail}", file=err)
        return EXIT_FAIL
    if cfg.results != "none":
        stream = out if cfg.results == "stdout" else err
        for v in result.values:
            print(f"{v.type}:{v.value}", file=stream)
    return EXIT_OK


def cmd_test(path: str, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    from .script import run_script
    text = _read(path)
    try:
        report = run_script(text)
    except ParseError as exc:
        raise UsageError(f"{path}:{exc}") from None
    for f in report.failures:
        print(f"{path}: {paint('FAIL', 'red', out)} {f}", file=out)
    status = paint("pass", "green", out) if report.ok else paint("fail", "red", out)
    print(f"{path}: {status}: {report.summary()}", file=out)
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_difftest(seed: int, count: int, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    from .difftest import difftest
    if count <= 0:
        raise UsageError("--count must be positive")
    report = difftest(seed, count)
    for f in report.failures:
        print(paint("divergence", "red", out), f, file=out)
    print(report.summary(), file=out)
    return EXIT_OK if report.ok else EXIT_FAIL


def _positive(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if n <= 0:
        raise argparse.ArgumentTypeError(f"{text} is not positive")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wasmk", description="WebAssembly with delimited continuations.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="type-check a module")
    v.add_argument("file")

    r = sub.add_parser("run", help="run an exported function")
    r.add_argument("file")
    r.add_argument("--invoke", metavar="NAME", help='export to call (default "main", then "_start")')
    r.add_argument("--arg", action="append", default=[], metavar="V",
                   help="argument such as 5 or i64:5; repeat for several")
    r.add_argument("--engine", choices=("fast", "oracle"), default="fast")
    r.add_argument("--trace", action="store_true", help="print every oracle step to stderr")
    r.add_argument("--check-preservation", action="store_true",
                   help="oracle: check the configuration type at every step; fast: check operand types")
    r.add_argument("--epoch-debug", action="store_true", help="tag continuation IDs with their prompt")
    r.add_argument("--fuel", type=int, default=DEFAULT_FUEL, help="oracle step budget")
    r.add_argument("--ctable-cap", type=_positive, default=DEFAULT_CTABLE_CAPACITY)
    r.add_argument("--prompt-depth", type=_positive, default=DEFAULT_PROMPT_DEPTH)
    r.add_argument("--results", choices=("stderr", "stdout", "none"), default="stderr",
                   help="where to print returned values")

    t = sub.add_parser("test", help="run an assertion script under both engines")
    t.add_argument("script")

    d = sub.add_parser("difftest", help="compare the engines on generated programs")
    d.add_argument("--seed", type=int, required=True)
    d.add_argument("--count", type=int, required=True)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if ns.command == "validate":
            return cmd_validate(ns.file)
        if ns.command == "run":
            cfg = RunConfig(ns.file, ns.invoke, ns.arg, ns.engine, ns.trace, ns.check_preservation,
                            ns.epoch_debug, ns.fuel, ns.ctable_cap, ns.prompt_depth, ns.results)
            return cmd_run(cfg)
        if ns.command == "test":
            return cmd_test(ns.script)
        return cmd_difftest(ns.seed, ns.count)
    except UsageError as exc:
        print(f"wasmk: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
