"""A literal small-step interpreter over instruction terms.

Every step finds the innermost redex (descending through labels and
frames), rewrites it, and rebuilds the enclosing terms.  Capture is literal:
``control`` takes the entire configuration with a hole in place of the
redex, and ``restore`` plugs the value back into that term.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from ..errors import EmbeddingError, Trap, TrapKind
from ..numerics import NUMERIC_OPS, LOAD_OPS, default_value, load, store as mem_store
from ..runtime import (HostFunc, Outcome, Store, call_host, control_trans, copy_trans,
                       delete_trans, grow_memory, prompt_end_trans, prompt_trans,
                       resolve_indirect, restore_trans)
from ..syntax import ast
from ..syntax.ast import I32, I64, Const, FuncType
from .terms import HOLE, PROMPT_END, Frame, Hole, Label, TrapTerm, is_value, show

DEFAULT_FUEL = 10 ** 6


class Stuck(Exception):
    """No rule applies to a configuration that is not terminal."""


class PreservationError(AssertionError):
    """A step changed the configuration type."""


@dataclass
class OutOfFuel:
    steps: int

    ok = False
    kind = "out-of-fuel"

    def __str__(self):
        return f"out of fuel after {self.steps} steps"


@dataclass
class Config:
    """A store, an instance index and the instruction sequence being reduced."""

    store: Store
    instance: int
    seq: tuple
    steps: int = 0


@dataclass
class Decomposition:
    path: list  # (enclosing sequence, index of the label/frame descended into)
    seq: tuple  # innermost sequence holding the redex
    pos: int  # index of the redex instruction in seq
    kind: str  # "instr", "label-end", "frame-return" or "trap"


class OracleContext:
    """A captured configuration with one hole.  Terms are immutable, so a
    duplicate can share structure with the original."""

    __slots__ = ("term",)

    def __init__(self, term: tuple):
        self.term = term

    def duplicate(self) -> "OracleContext":
        return OracleContext(self.term)

    def plug(self, value) -> tuple:
        return plug(self.term, value)

    def __repr__(self):
        return f"OracleContext({show(self.term)})"


# -- decomposition ---------------------------------------------------------------------

def _first_non_value(seq) -> int:
    j = 0
    n = len(seq)
    while j < n and type(seq[j]) is Const:
        j += 1
    return j


def decompose(seq: tuple) -> Optional[Decomposition]:
    """Locate the next redex, or return None when ``seq`` is terminal."""
    path = []
    while True:
        j = _first_non_value(seq)
        if j == len(seq):
            if path:  # pragma: no cover - finished bodies are caught below
                raise Stuck("empty body reached")
            return None
        ins = seq[j]
        t = type(ins)
        if t is TrapTerm:
            if len(seq) == 1 and not path:
                return None
            return Decomposition(path, seq, j, "trap")
        if t is Label or t is Frame:
            body = ins.body
            k = _first_non_value(body)
            if k == len(body):
                return Decomposition(path, seq, j, "label-end" if t is Label else "frame-return")
            if len(body) == 1 and type(body[0]) is TrapTerm:
                return Decomposition(path, seq, j, "trap")
            path.append((seq, j))
            seq = body
            continue
        return Decomposition(path, seq, j, "instr")


def _with_body(term, body, locals_=None):
    if type(term) is Label:
        return Label(term.branch, term.results, term.cont, body)
    return Frame(term.func, term.locals if locals_ is None else locals_, term.results, body)


def recompose(path, inner: tuple, frame_level: Optional[int] = None, locals_=None) -> tuple:
    """Rebuild the configuration around a new innermost sequence."""
    for level in range(len(path) - 1, -1, -1):
        seq, idx = path[level]
        term = _with_body(seq[idx], inner, locals_ if level == frame_level else None)
        inner = seq[:idx] + (term,) + seq[idx + 1:]
    return inner


def plug(term: tuple, value) -> tuple:
    """Replace the hole in a captured context by ``value``."""
    path = []
    seq = term
    while True:
        j = _first_non_value(seq)
        ins = seq[j]
        if type(ins) is Hole:
            return recompose(path, seq[:j] + (value,) + seq[j + 1:])
        if type(ins) not in (Label, Frame):
            raise Stuck("captured context has no hole")
        path.append((seq, j))
        seq = ins.body


# -- stepping ------------------------------------------------------------------------------

def _innermost(path, cls):
    for level in range(len(path) - 1, -1, -1):
        seq, idx = path[level]
        if type(seq[idx]) is cls:
            return level
    return None


class _Step:
    """Applies one rule to a decomposed configuration."""

    def __init__(self, cfg: Config, d: Decomposition, entry_type):
        self.cfg = cfg
        self.d = d
        self.inst = cfg.store.instances[cfg.instance]
        self.entry_type = entry_type
        self.redex = ""

    def put(self, k: int, repl: tuple) -> tuple:
        d = self.d
        j = d.pos
        if j < k:
            raise Stuck(f"{show(d.seq[j:j + 1])} needs {k} operand(s)")
        self.redex = show(d.seq[j - k:j + 1])
        return recompose(d.path, d.seq[:j - k] + repl + d.seq[j + 1:])

    def vals(self, k: int) -> list:
        j = self.d.pos
        if j < k:
            raise Stuck(f"{show(self.d.seq[j:j + 1])} needs {k} operand(s)")
        return [v.value for v in self.d.seq[j - k:j]]

    def frame(self):
        level = _innermost(self.d.path, Frame)
        if level is None:
            raise Stuck("local access outside a frame")
        seq, idx = self.d.path[level]
        return level, seq[idx]

    def apply(self):
        d = self.d
        seq, j = d.seq, d.pos
        ins = seq[j]
        if d.kind == "label-end":
            self.redex = show((ins,))
            return "label-end", recompose(d.path, seq[:j] + ins.body + seq[j + 1:])
        if d.kind == "frame-return":
            self.redex = show((ins,))
            n = len(ins.results)
            body = ins.body
            if len(body) != n:
                raise Stuck("frame finished with the wrong number of values")
            return "frame-return", recompose(d.path, seq[:j] + body + seq[j + 1:])
        if d.kind == "trap":
            if type(ins) is TrapTerm:
                self.redex = show(seq)
                return "trap", recompose(d.path, (ins,))
            self.redex = show((ins,))
            return "trap", recompose(d.path, seq[:j] + ins.body + seq[j + 1:])
        try:
            return self.instr(ins)
        except Trap as trap:
            if not self.redex:
                self.redex = show((ins,))
            rule = _ERR_RULES.get(type(ins), "trap")
            return rule, recompose(d.path, seq[:j] + (TrapTerm(trap.kind, trap.message),) + seq[j + 1:])

    def instr(self, ins):
        t = type(ins)
        inst = self.inst
        store, i = self.cfg.store, self.cfg.instance
        if t is ast.Numeric:
            params, result, fn = NUMERIC_OPS[ins.op]
            args = self.vals(len(params))
            self.redex = show(self.d.seq[self.d.pos - len(params):self.d.pos + 1])
            return "numeric", self.put(len(params), (Const(result, fn(*args)),))
        if t is ast.Block or t is ast.Loop:
            m = len(ins.type.params)
            args = self.d.seq[self.d.pos - m:self.d.pos] if m else ()
            if t is ast.Block:
                label = Label(ins.type.results, ins.type.results, (), args + ins.body)
                return "block", self.put(m, (label,))
            label = Label(ins.type.params, ins.type.results, (ins,), args + ins.body)
            return "loop", self.put(m, (label,))
        if t is ast.If:
            (c,) = self.vals(1)
            return "if", self.put(1, (ast.Block(ins.type, ins.then if c else ins.else_),))
        if t is ast.Br:
            return "br", self.branch(ins.label)
        if t is ast.BrIf:
            (c,) = self.vals(1)
            return "br_if", self.put(1, (ast.Br(ins.label),) if c else ())
        if t is ast.BrTable:
            (idx,) = self.vals(1)
            idx &= 0xFFFFFFFF
            target = ins.labels[idx] if idx < len(ins.labels) else ins.default
            return "br_table", self.put(1, (ast.Br(target),))
        if t is ast.Return:
            return "return", self.do_return()
        if t is ast.LocalGet:
            _, fr = self.frame()
            return "local.get", self.put(0, (fr.locals[ins.index],))
        if t is ast.LocalSet or t is ast.LocalTee:
            level, fr = self.frame()
            (v,) = self.d.seq[self.d.pos - 1:self.d.pos]
            locals_ = fr.locals[:ins.index] + (v,) + fr.locals[ins.index + 1:]
            j = self.d.pos
            keep = (v,) if t is ast.LocalTee else ()
            self.redex = show(self.d.seq[j - 1:j + 1])
            inner = self.d.seq[:j - 1] + keep + self.d.seq[j + 1:]
            return ("local.set" if t is ast.LocalSet else "local.tee"), recompose(self.d.path, inner, level, locals_)
        if t is ast.GlobalGet:
            g = inst.module.globals[ins.index]
            return "global.get", self.put(0, (Const(g.type, inst.globals[ins.index]),))
        if t is ast.GlobalSet:
            (v,) = self.vals(1)
            inst.globals[ins.index] = v
            return "global.set", self.put(1, ())
        if t is ast.Load:
            (addr,) = self.vals(1)
            self.redex = show(self.d.seq[self.d.pos - 1:self.d.pos + 1])
            return "load", self.put(1, (Const(LOAD_OPS[ins.op][0], load(inst.memory, ins.op, addr, ins.offset)),))
        if t is ast.Store:
            addr, v = self.vals(2)
            self.redex = show(self.d.seq[self.d.pos - 2:self.d.pos + 1])
            mem_store(inst.memory, ins.op, addr, ins.offset, v)
            return "store", self.put(2, ())
        if t is ast.MemorySize:
            return "memory.size", self.put(0, (Const(I32, len(inst.memory) // 65536),))
        if t is ast.MemoryGrow:
            (delta,) = self.vals(1)
            return "memory.grow", self.put(1, (Const(I32, grow_memory(inst, delta)),))
        if t is ast.Drop:
            self.vals(1)
            return "drop", self.put(1, ())
        if t is ast.Select:
            a, b, c = self.d.seq[self.d.pos - 3:self.d.pos]
            return "select", self.put(3, (a if c.value else b,))
        if t is ast.Nop:
            return "nop", self.put(0, ())
        if t is ast.Unreachable:
            raise Trap(TrapKind.UNREACHABLE, "unreachable executed")
        if t is ast.Call:
            return "call", self.call(ins.func)
        if t is ast.CallIndirect:
            (idx,) = self.vals(1)
            self.redex = show(self.d.seq[self.d.pos - 1:self.d.pos + 1])
            callee = resolve_indirect(inst, idx, ins.type)
            return "call_indirect", self.put(1, (ast.Call(callee),))
        if t is ast.Control:
            return "Ctrl", self.control(ins)
        if t is ast.Restore:
            kappa, v = self.vals(2)
            self.redex = show(self.d.seq[self.d.pos - 2:self.d.pos + 1])
            entry = restore_trans(store, i, kappa)
            return "Restore", entry.ctx.plug(Const(I64, v))
        if t is ast.ContinuationCopy:
            (kappa,) = self.vals(1)
            self.redex = show(self.d.seq[self.d.pos - 1:self.d.pos + 1])
            return "Copy", self.put(1, (Const(I64, copy_trans(store, i, kappa)),))
        if t is ast.ContinuationDelete:
            (kappa,) = self.vals(1)
            self.redex = show(self.d.seq[self.d.pos - 1:self.d.pos + 1])
            delete_trans(store, i, kappa)
            return "Delete", self.put(1, ())
        if t is ast.Prompt:
            self.redex = show((ins,))
            prompt_trans(store, i)
            return "Prompt", self.put(0, (ast.Block(ins.type, ins.body), PROMPT_END))
        if t is type(PROMPT_END):
            self.redex = show((ins,))
            prompt_end_trans(store, i)
            return "Prompt-End", self.put(0, ())
        raise Stuck(f"no rule for {show((ins,))}")

    def branch(self, k: int) -> tuple:
        d = self.d
        seen = 0
        for level in range(len(d.path) - 1, -1, -1):
            seq, idx = d.path[level]
            term = seq[idx]
            if type(term) is Frame:
                break
            if seen == k:
                n = len(term.branch)
                j = d.pos
                if j < n:
                    raise Stuck("br without enough operands")
                vals = d.seq[j - n:j]
                self.redex = show(d.seq[j - n:j + 1])
                return recompose(d.path[:level], seq[:idx] + vals + term.cont + seq[idx + 1:])
            seen += 1
        raise Stuck(f"br {k} has no target label")

    def do_return(self) -> tuple:
        d = self.d
        level = _innermost(d.path, Frame)
        if level is None:
            raise Stuck("return outside a frame")
        seq, idx = d.path[level]
        n = len(seq[idx].results)
        j = d.pos
        vals = d.seq[j - n:j]
        self.redex = show(d.seq[j - n:j + 1])
        return recompose(d.path[:level], seq[:idx] + vals + seq[idx + 1:])

    def call(self, f: int) -> tuple:
        inst = self.inst
        target = inst.funcs[f]
        ft = inst.func_type(f)
        n = len(ft.params)
        args = self.vals(n)
        self.redex = show(self.d.seq[self.d.pos - n:self.d.pos + 1])
        if isinstance(target, HostFunc):
            res = call_host(self.cfg.store, self.cfg.instance, target, args, "oracle")
            return self.put(n, tuple(Const(t, v) for t, v in zip(ft.results, res)))
        depth = sum(1 for seq, idx in self.d.path if type(seq[idx]) is Frame)
        if depth + 1 > inst.limits.call_depth:
            raise Trap(TrapKind.RESOURCE_LIMIT, "call stack exhausted")
        locals_ = tuple(self.d.seq[self.d.pos - n:self.d.pos]) + tuple(
            Const(t, default_value(t)) for t in target.locals)
        body = (Label(ft.results, ft.results, (), target.body),)
        return self.put(n, (Frame(f, locals_, ft.results, body),))

    def control(self, ins) -> tuple:
        d = self.d
        j = d.pos
        (v,) = self.vals(1)
        self.redex = show(d.seq[j - 1:j + 1])
        ctx = recompose(d.path, d.seq[:j - 1] + (HOLE,) + d.seq[j + 1:])
        kappa = control_trans(self.cfg.store, self.cfg.instance, (), OracleContext(ctx), self.entry_type,
                              handler=ins.handler)
        return (Const(I64, kappa), Const(I64, v), ast.Call(ins.handler),
                TrapTerm(TrapKind.HANDLER_RETURNED, "continuation handler returned normally"))


_ERR_RULES = {
    ast.Restore: "Restore-Err",
    ast.ContinuationCopy: "Copy-Err",
    ast.ContinuationDelete: "Delete-Err",
}


def oracle_step(cfg: Config, entry_type=None) -> tuple:
    """Apply exactly one rule.  Returns ``(rule name, redex text)``.

    ``entry_type`` is recorded on a continuation captured by this step; the
    preservation checker passes the configuration type here.
    """
    d = decompose(cfg.seq)
    if d is None:
        raise Stuck("configuration is terminal")
    step = _Step(cfg, d, entry_type)
    rule, seq = step.apply()
    cfg.seq = seq
    cfg.steps += 1
    return rule, step.redex


def terminal_outcome(seq: tuple) -> Optional[Outcome]:
    if all(is_value(v) for v in seq):
        return Outcome(values=tuple(seq))
    if len(seq) == 1 and type(seq[0]) is TrapTerm:
        return Outcome(trap=Trap(seq[0].kind, seq[0].message))
    return None


def oracle_run(cfg: Config, fuel: int = DEFAULT_FUEL, trace: Optional[Callable] = None,
               check_preservation: bool = False, exhaustive: bool = False):
    """Step until terminal; returns an Outcome, or OutOfFuel."""
    if fuel <= 0:
        raise ValueError("fuel must be positive")
    from .typing import compatible, type_configuration
    while True:
        out = terminal_outcome(cfg.seq)
        if out is not None:
            return out
        if fuel <= 0:
            return OutOfFuel(cfg.steps)
        fuel -= 1
        before = None
        if check_preservation:
            before = type_configuration(cfg.store, cfg.instance, cfg.seq, exhaustive=exhaustive)
        rule, redex = oracle_step(cfg, before)
        if trace is not None:
            trace(f"step {cfg.steps}: {rule}: {redex}")
        if check_preservation:
            after = type_configuration(cfg.store, cfg.instance, cfg.seq, exhaustive=exhaustive)
            if not compatible(before, after):
                raise PreservationError(
                    f"step {cfg.steps} ({rule}) changed the configuration type from {before} to {after}")


def oracle_invoke(store: Store, instance: int, name_or_index, args=(), fuel: int = DEFAULT_FUEL,
                  trace: Optional[Callable] = None, check_preservation: bool = False,
                  exhaustive: bool = False):
    """Run an export (or function index) from an initial configuration that
    wraps the call in a prompt, then unwind the prompt stack."""
    from ..interpreter import coerce_args
    inst = store.instances[instance]
    if isinstance(name_or_index, str):
        try:
            func = inst.export(name_or_index)
        except KeyError:
            raise EmbeddingError(f"no exported function named {name_or_index!r}") from None
    else:
        func = name_or_index
    ft = inst.func_type(func)
    raw = coerce_args(ft, args)
    consts = tuple(Const(t, v) for t, v in zip(ft.params, raw))
    cfg = Config(store, instance, (ast.Prompt(FuncType((), ft.results), consts + (ast.Call(func),)),))
    depth = len(inst.pstack)
    try:
        out = oracle_run(cfg, fuel, trace, check_preservation, exhaustive)
    except RecursionError:
        out = Outcome(trap=Trap(TrapKind.RESOURCE_LIMIT, "recursion too deep"))
    finally:
        del inst.pstack[depth:]
    return out
