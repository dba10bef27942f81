"""Example programs with expected outputs, run under both engines.

Each case is a directory holding ``main.wat``, ``args.txt`` (typed
arguments such as ``i64:5``) and ``expect.txt``.  ``expect.txt`` is line
based::

    # where the expected value comes from
    entry main
    option ctable-cap 4
    result i64:20            (or: result trap KIND)
    stdout "json string"

A case that must fail validation has just ``invalid RULE``.  Programs ported
from C also carry a ``notes.md`` mapping the C constructs to WAT.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..embedding import load_program, parse_arg
from ..errors import ParseError, ValidationError
from ..runtime import Limits
from ..syntax import parse_module
from ..validator import validate_module

ROOT = Path(__file__).parent
MASTER_SCRIPT = ROOT / "master.wast"
ENGINES = ("fast", "oracle")

_OPTIONS = {"ctable-cap": "ctable_capacity", "prompt-depth": "prompt_depth"}


@dataclass
class CorpusCase:
    name: str
    source: str
    entry: str = "main"
    args: tuple = ()
    values: Optional[tuple] = None  # expected result values
    trap: Optional[str] = None  # expected trap kind
    stdout: str = ""
    invalid: Optional[str] = None  # expected validation rule
    options: dict = field(default_factory=dict)
    provenance: list = field(default_factory=list)

    @property
    def path(self) -> Path:
        return ROOT / self.name

    def limits(self) -> Limits:
        return Limits(**self.options)


@dataclass
class CaseResult:
    name: str
    passed: bool
    diff: str = ""

    def __str__(self):
        return f"{self.name}: pass" if self.passed else f"{self.name}: FAIL {self.diff}"


def case_names() -> list:
    return sorted(p.name for p in ROOT.iterdir() if (p / "main.wat").is_file())


def load_case(name: str) -> CorpusCase:
    d = ROOT / name
    if not (d / "main.wat").is_file():
        raise KeyError(f"no corpus case {name!r}")
    case = CorpusCase(name, (d / "main.wat").read_text())
    args_file = d / "args.txt"
    if args_file.is_file():
        case.args = tuple(parse_arg(tok) for tok in args_file.read_text().split())
    for line in (d / "expect.txt").read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            case.provenance.append(line[1:].strip())
            continue
        key, _, rest = line.partition(" ")
        if key == "entry":
            case.entry = rest
        elif key == "option":
            opt, _, n = rest.partition(" ")
            case.options[_OPTIONS[opt]] = int(n)
        elif key == "result":
            if rest.startswith("trap "):
                case.trap = rest[5:]
            else:
                case.values = tuple(parse_arg(tok) for tok in rest.split())
        elif key == "stdout":
            case.stdout = json.loads(rest)
        elif key == "invalid":
            case.invalid = rest
        else:
            raise ValueError(f"{name}/expect.txt: unknown line {line!r}")
    return case


def validation_rule(source: str) -> Optional[str]:
    """The rule a module breaks, or None when it validates."""
    try:
        validate_module(parse_module(source))
    except ValidationError as exc:
        return exc.rule
    return None


def execute(case: CorpusCase, engine: str, **options):
    """Run a case once on a fresh store; returns (program, outcome)."""
    prog = load_program(case.source, case.limits(), record_events=True)
    out = prog.call(case.entry, case.args, engine=engine, **options)
    return prog, out


def _expected(case: CorpusCase) -> str:
    if case.trap is not None:
        return f"trap {case.trap}"
    return " ".join(repr(v) for v in case.values) if case.values else "(no values)"


def _got(out) -> str:
    return f"trap {out.kind}" if not out.ok else str(out)


def run_case(name: str, engines=ENGINES) -> CaseResult:
    """Run a case under every engine; the diff names the first divergence."""
    case = load_case(name)
    if case.invalid is not None:
        try:
            rule = validation_rule(case.source)
        except ParseError as exc:
            return CaseResult(name, False, f"parse error: {exc}")
        if rule != case.invalid:
            return CaseResult(name, False, f"expected invalid [{case.invalid}], got {rule or 'valid'}")
        return CaseResult(name, True)
    for engine in engines:
        prog, out = execute(case, engine)
        if prog.stdout != case.stdout:
            return CaseResult(name, False, f"[{engine}] stdout {prog.stdout!r}, expected {case.stdout!r}")
        if _got(out) != _expected(case):
            return CaseResult(name, False, f"[{engine}] result {_got(out)}, expected {_expected(case)}")
    return CaseResult(name, True)


def run_all(engines=ENGINES) -> list:
    return [run_case(n, engines) for n in case_names()]


def port_notes(name: str) -> Optional[str]:
    """C-to-WAT mapping for a ported program, or None for cases written in WAT."""
    load_case(name)
    notes = ROOT / name / "notes.md"
    return notes.read_text() if notes.is_file() else None


def _wast_value(c) -> str:
    return f"({c.type}.const {c.value!r})"


def master_script() -> str:
    """All runnable cases as one assertion script.

    Scripts have no way to set limits or check host output, so cases with
    options are left out and stdout is not compared.
    """
    out = [";; generated from the corpus directories; regenerate rather than edit", ""]
    for name in case_names():
        case = load_case(name)
        if case.options:
            out.append(f";; {name}: skipped, needs {', '.join(sorted(case.options))}")
            out.append("")
            continue
        body = case.source.strip()
        if case.invalid is not None:
            out.append(f";; {name}")
            out.append(f'(assert_invalid\n{body}\n  "{case.invalid}")')
            out.append("")
            continue
        out.append(f";; {name}")
        out.append(body)
        call = f'(invoke "{case.entry}"' + "".join(" " + _wast_value(a) for a in case.args) + ")"
        if case.trap is not None:
            out.append(f'(assert_trap {call} "{case.trap}")')
        else:
            vals = "".join(" " + _wast_value(v) for v in case.values or ())
            out.append(f"(assert_return {call}{vals})")
        out.append("")
    return "\n".join(out)


def write_master_script() -> Path:
    MASTER_SCRIPT.write_text(master_script())
    return MASTER_SCRIPT
