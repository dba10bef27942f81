"""Assertion scripts: modules followed by assert_return/assert_trap/assert_invalid.

Every invocation runs on both engines, each with its own store, and the
engines must agree with each other as well as with the assertion.
``assert_invalid`` only exercises the validator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .embedding import ENGINES, load_program
from .errors import EmbeddingError, LinkError, ValidationError
from .syntax import ast, parse_script
from .validator import validate_module


@dataclass
class Failure:
    line: int
    message: str

    def __str__(self):
        return f"line {self.line}: {self.message}"


@dataclass
class ScriptReport:
    passed: int = 0
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        return f"{self.passed} passed, {len(self.failures)} failed"


def same_value(a: ast.Const, b: ast.Const) -> bool:
    """Bitwise-style equality: NaN matches NaN, and 0.0 differs from -0.0."""
    if a.type != b.type:
        return False
    if isinstance(a.value, float):
        if math.isnan(a.value) or math.isnan(b.value):
            return math.isnan(a.value) and math.isnan(b.value)
        return a.value == b.value and math.copysign(1, a.value) == math.copysign(1, b.value)
    return a.value == b.value


def same_values(a, b) -> bool:
    return len(a) == len(b) and all(same_value(x, y) for x, y in zip(a, b))


def _show(values) -> str:
    return " ".join(repr(v) for v in values) if values else "(no values)"


def _describe(out) -> str:
    return f"trap {out.kind}" if not out.ok else _show(out.values)


class ScriptRunner:
    def __init__(self, engines=ENGINES, out=None):
        self.engines = tuple(engines)
        self.programs = None
        self.report = ScriptReport()
        self.out = out  # optional stream for host output

    def fail(self, line, message):
        self.report.failures.append(Failure(line, message))

    def run(self, script: ast.Script) -> ScriptReport:
        for d in script.directives:
            t = type(d)
            if t is ast.ModuleDirective:
                self.module(d)
            elif t is ast.AssertInvalid:
                self.assert_invalid(d)
            elif self.programs is None:
                self.fail(d.line, "no module to invoke")
            elif t is ast.AssertReturn:
                self.assert_return(d)
            elif t is ast.AssertTrap:
                self.assert_trap(d)
            elif t is ast.InvokeDirective:
                self.invoke(d.invoke, d.line)
        return self.report

    def module(self, d):
        try:
            self.programs = [load_program(d.module) for _ in self.engines]
        except (ValidationError, LinkError) as exc:
            self.programs = None
            self.fail(d.line, f"module rejected: {exc}")

    def invoke(self, inv: ast.Invoke, line: int):
        """Outcome shared by every engine, or None after recording a divergence."""
        outs = []
        for engine, prog in zip(self.engines, self.programs):
            before = len(prog.stdout)
            try:
                outs.append(prog.call(inv.name, inv.args, engine=engine))
            except EmbeddingError as exc:
                self.fail(line, f"invoke {inv.name}: {exc}")
                return None
            if self.out is not None and engine == self.engines[0]:
                self.out.write(prog.stdout[before:])
        first = outs[0]
        for engine, out in zip(self.engines[1:], outs[1:]):
            agree = first.ok == out.ok and (
                same_values(first.values, out.values) if first.ok else first.kind == out.kind)
            if not agree:
                self.fail(line, f"engines disagree on {inv.name}: {self.engines[0]} gave "
                                f"{_describe(first)}, {engine} gave {_describe(out)}")
                return None
        return first

    def assert_return(self, d):
        out = self.invoke(d.invoke, d.line)
        if out is None:
            return
        if not out.ok:
            self.fail(d.line, f"{d.invoke.name}: expected {_show(d.expected)}, got trap {out.kind}")
        elif not same_values(out.values, d.expected):
            self.fail(d.line, f"{d.invoke.name}: expected {_show(d.expected)}, got {_show(out.values)}")
        else:
            self.report.passed += 1

    def assert_trap(self, d):
        out = self.invoke(d.invoke, d.line)
        if out is None:
            return
        if out.ok:
            self.fail(d.line, f"{d.invoke.name}: expected trap {d.message}, got {_show(out.values)}")
        elif not (out.kind == d.message or out.kind.startswith(d.message)
                  or d.message in out.trap.message):
            self.fail(d.line, f"{d.invoke.name}: expected trap {d.message}, got trap {out.kind}")
        else:
            self.report.passed += 1

    def assert_invalid(self, d):
        if d.module is None:
            # the module did not even resolve its names
            self.report.passed += 1
            return
        try:
            validate_module(d.module)
        except ValidationError as exc:
            if d.message in (exc.rule, exc.bare_message) or d.message in str(exc):
                self.report.passed += 1
            else:
                self.fail(d.line, f"expected invalid [{d.message}], got {exc}")
            return
        self.fail(d.line, f"expected invalid [{d.message}], but the module validates")


def run_script(text: str, engines=ENGINES, out=None) -> ScriptReport:
    """Parse and run a script.  Parse errors propagate as ParseError."""
    return ScriptRunner(engines, out).run(parse_script(text))


__all__ = ["run_script", "ScriptRunner", "ScriptReport", "Failure", "same_value", "same_values"]
