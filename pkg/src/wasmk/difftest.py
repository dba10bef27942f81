"""Differential testing of the fast interpreter against the reference oracle.

Programs come from a constrained generator: integer arithmetic without
division (so nothing traps by accident), nested blocks with branches to
their own label, ``if``, one ``prompt``, and ``control`` sites whose handlers
follow fixed templates.  Every template either behaves (always restores) or
fails in one known way, so the generator knows which trap, if any, the
program must end in.  The oracle runs with the configuration type checked
after every step.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from typing import Optional

from .embedding import load_program
from .errors import TrapKind
from .oracle import PreservationError, Stuck

# template name -> (handler body, trap kind when the control site runs)
HANDLERS = {
    "restore": ("(restore (local.get $k) (i64.add (local.get $v) (i64.const 3)))", None),
    "restore_dead": ("(restore (local.get $k) (i64.mul (local.get $v) (i64.const 2)))\n"
                     "    (i64.const 0) (drop) (unreachable)", None),
    "nested": ("(restore (local.get $k) (control $h_pass (local.get $v)))", None),
    "copy_fresh": ("(restore (local.get $k) (control $h_copier (local.get $v)))", None),
    "fall_through": ("(drop (local.get $v))", TrapKind.HANDLER_RETURNED),
    "double_restore": ("(restore (control $h_give_back (i64.const 0)) (local.get $v))",
                       TrapKind.UNALLOCATED_CONTINUATION),
    "restore_unallocated": ("(restore (i64.add (local.get $k) (i64.const 3)) (local.get $v))",
                            TrapKind.UNALLOCATED_CONTINUATION),
    "copy_root": ("(restore (continuation_copy (local.get $k)) (local.get $v))", TrapKind.ROOT_VIOLATION),
    "delete_root": ("(continuation_delete (local.get $k))\n    (restore (local.get $k) (local.get $v))",
                    TrapKind.ROOT_VIOLATION),
}

# handlers that the templates above call through a nested control
HELPERS = {
    "pass": "(restore (local.get $k) (i64.sub (local.get $v) (i64.const 1)))",
    "give_back": "(restore (local.get $k) (local.get $k))",
    "copier": "(local $c i64)\n"
              "    (local.set $c (continuation_copy (local.get $k)))\n"
              "    (continuation_delete (local.get $k))\n"
              "    (restore (local.get $c) (i64.xor (local.get $v) (i64.const 5)))",
}

SAFE = [n for n, (_, kind) in HANDLERS.items() if kind is None]
FAILING = [n for n, (_, kind) in HANDLERS.items() if kind is not None]

BINOPS = ("add", "sub", "mul", "and", "or", "xor", "shl", "shr_s", "shr_u", "rotl", "rotr")
CMPOPS = ("eq", "ne", "lt_s", "lt_u", "gt_s", "ge_u", "le_s")
UNOPS = ("clz", "ctz", "popcnt")


@dataclass
class GeneratedProgram:
    text: str
    expected_trap: Optional[str]  # None when the program must return normally
    templates: list


class _Gen:
    def __init__(self, rng: random.Random, trap_rate: float):
        self.rng = rng
        self.trap_rate = trap_rate
        self.certain = True  # is the code being emitted sure to run?
        self.expected = None
        self.used = []
        self.prompted = False
        self.labels = 0

    def label(self) -> str:
        self.labels += 1
        return f"$l{self.labels}"

    def const(self, t):
        bits = 31 if t == "i32" else 63
        v = self.rng.choice([0, 1, -1, 2, 7, self.rng.randint(-(1 << bits), (1 << bits) - 1)])
        return f"({t}.const {v})"

    def control(self, t, depth):
        # a failing template only matters if nothing before it has failed yet
        failing = self.certain and self.expected is None and self.rng.random() < self.trap_rate
        name = self.rng.choice(FAILING if failing else SAFE)
        self.used.append(name)
        arg = self.expr("i64", depth - 1)
        if self.certain and self.expected is None:
            self.expected = HANDLERS[name][1]
        site = f"(control $h_{name} {arg})"
        return site if t == "i64" else f"(i32.wrap_i64 {site})"

    def expr(self, t, depth):
        r = self.rng
        if depth <= 0:
            return self.const(t) if r.random() < 0.6 else f"(local.get ${t})"
        choice = r.choices(
            ["const", "local", "binop", "cmp", "unop", "convert", "tee", "block", "if",
             "select", "control", "prompt", "call"],
            [2, 2, 6, 1, 1, 1, 1, 2, 1, 1, 3, 1, 1])[0]
        if choice == "const":
            return self.const(t)
        if choice == "local":
            return f"(local.get ${t})"
        if choice == "binop":
            return f"({t}.{r.choice(BINOPS)} {self.expr(t, depth - 1)} {self.expr(t, depth - 1)})"
        if choice == "cmp":
            s = r.choice(("i32", "i64"))
            e = f"({s}.{r.choice(CMPOPS)} {self.expr(s, depth - 1)} {self.expr(s, depth - 1)})"
            return e if t == "i32" else f"(i64.extend_i32_u {e})"
        if choice == "unop":
            return f"({t}.{r.choice(UNOPS)} {self.expr(t, depth - 1)})"
        if choice == "convert":
            if t == "i32":
                return f"(i32.wrap_i64 {self.expr('i64', depth - 1)})"
            return f"(i64.extend_i32_s {self.expr('i32', depth - 1)})"
        if choice == "tee":
            return f"(local.tee ${t} {self.expr(t, depth - 1)})"
        if choice == "block":
            return self.block(t, depth)
        if choice == "if":
            cond = self.expr("i32", depth - 1)
            saved = self.certain
            self.certain = False
            a, b = self.expr(t, depth - 1), self.expr(t, depth - 1)
            self.certain = saved
            return f"(if (result {t}) {cond} (then {a}) (else {b}))"
        if choice == "select":
            a, b = self.expr(t, depth - 1), self.expr(t, depth - 1)
            return f"(select {a} {b} {self.expr('i32', depth - 1)})"
        if choice == "control":
            return self.control(t, depth)
        if choice == "prompt" and not self.prompted:
            self.prompted = True
            return f"(prompt (result {t}) {self.expr(t, depth - 1)})"
        if choice == "call":
            return f"(call $mix_{t} {self.expr(t, depth - 1)} {self.expr(t, depth - 1)})"
        return self.const(t)

    def block(self, t, depth):
        name = self.label()
        saved = self.certain
        parts = []
        for _ in range(self.rng.randint(0, 2)):
            parts.append(f"(drop (br_if {name} {self.expr(t, depth - 1)} {self.expr('i32', depth - 1)}))")
            self.certain = False
        if self.rng.random() < 0.3:
            parts.append(f"(br {name} {self.expr(t, depth - 1)})")
            self.certain = False
            parts.append(f"({t}.const 0) (drop)")
        parts.append(self.expr(t, depth - 1))
        self.certain = saved
        return f"(block {name} (result {t}) {' '.join(parts)})"


def generate(rng: random.Random, trap_rate: float = 0.25, depth: int = 4) -> GeneratedProgram:
    g = _Gen(rng, trap_rate)
    stmts = [f"(local.set $i32 {g.expr('i32', depth)})",
             f"(local.set $i64 {g.expr('i64', depth)})"]
    result = g.expr("i64", depth)
    funcs = []
    for name, (body, _) in HANDLERS.items():
        funcs.append(f"  (func $h_{name} (param $k i64) (param $v i64)\n    {body})")
    for name, body in HELPERS.items():
        funcs.append(f"  (func $h_{name} (param $k i64) (param $v i64)\n    {body})")
    for t in ("i32", "i64"):
        funcs.append(f"  (func $mix_{t} (param $a {t}) (param $b {t}) (result {t})\n"
                     f"    ({t}.xor ({t}.rotl (local.get $a) ({t}.const 5)) (local.get $b)))")
    main = ("  (func (export \"main\") (result i64)\n    (local $i32 i32) (local $i64 i64)\n    "
            + "\n    ".join(stmts) + f"\n    {result})")
    text = "(module\n" + "\n".join(funcs) + "\n" + main + ")\n"
    return GeneratedProgram(text, g.expected, g.used)


@dataclass
class Divergence:
    index: int
    seed: int
    message: str
    program: str

    def __str__(self):
        return (f"program {self.index} (seed {self.seed}): {self.message}\n"
                f"{self.program}")


@dataclass
class DiffReport:
    seed: int
    count: int
    failures: list = field(default_factory=list)
    traps: dict = field(default_factory=dict)  # trap kind (or "ok") -> programs
    steps: int = 0
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        kinds = ", ".join(f"{k}: {n}" for k, n in sorted(self.traps.items()))
        status = "pass" if self.ok else f"FAIL ({len(self.failures)} divergences)"
        return (f"difftest seed {self.seed}: {self.count} programs, {status}; "
                f"outcomes {kinds}; {self.steps} oracle steps checked in {self.seconds:.1f}s")


def _describe(out) -> str:
    return f"trap {out.kind}" if not out.ok else str(out)


def check_program(prog: GeneratedProgram, fuel: int = 200_000, exhaustive: bool = True) -> tuple:
    """Run one program under both engines; returns (error or None, outcome, steps)."""
    fast = load_program(prog.text)
    oracle = load_program(prog.text)
    steps = []
    a = fast.call("main", engine="fast", debug=True)
    try:
        b = oracle.call("main", engine="oracle", fuel=fuel, check_preservation=True,
                        exhaustive=exhaustive,
                        trace=lambda *info: steps.append(None))
    except (PreservationError, Stuck) as exc:
        return f"oracle: {type(exc).__name__}: {exc}", a, len(steps)
    if not a.same_as(b):
        return f"engines disagree: fast {_describe(a)}, oracle {_describe(b)}", a, len(steps)
    want = prog.expected_trap
    if want is None and not a.ok:
        return f"expected a normal return, both gave {_describe(a)}", a, len(steps)
    if want is not None and a.kind != want:
        return f"expected trap {want}, both gave {_describe(a)}", a, len(steps)
    if fast.live_entries() or oracle.live_entries():
        return "prompt stack not unwound after the call", a, len(steps)
    return None, a, len(steps)


def difftest(seed: int, count: int, trap_rate: float = 0.25) -> DiffReport:
    if count <= 0:
        raise ValueError("count must be positive")
    report = DiffReport(seed, count)
    start = time.perf_counter()
    for i in range(count):
        prog = generate(random.Random(f"{seed}-{i}"), trap_rate)
        err, out, steps = check_program(prog)
        report.steps += steps
        key = "ok" if out.ok else out.kind
        report.traps[key] = report.traps.get(key, 0) + 1
        if err is not None:
            report.failures.append(Divergence(i, seed, err, prog.text))
    report.seconds = time.perf_counter() - start
    return report
