"""Type checking for the extended instruction set.

The label environment is a stack of label stacks.  Block-like instructions
push onto the top-most stack; ``prompt`` starts a new one and invalidates
``return``, so branches can never leave a prompt body.  Continuation IDs are
plain ``i64`` values: whether an ID is valid is only known at run time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .errors import ValidationError
from .numerics import LOAD_OPS, NUMERIC_OPS, STORE_OPS
from .syntax import ast
from .syntax.ast import HANDLER_TYPE, I32, I64, FuncType

_UNKNOWN = None


@dataclass
class ValidatedModule:
    module: ast.Module
    func_types: list
    # stack_types[defined func][instruction ordinal] -> operand types visible to
    # the executing frame just before the instruction (None where unknown)
    stack_types: list = field(default_factory=list, repr=False)

    def export(self, name: str) -> int:
        return self.module.export_map()[name]


@dataclass
class _Ctrl:
    kind: str
    start: tuple
    end: tuple
    height: int
    unreachable: bool = False
    branch: Optional[tuple] = None  # explicit branch types (administrative labels)

    @property
    def label_types(self):
        if self.branch is not None:
            return self.branch
        return self.start if self.kind == "loop" else self.end


@dataclass
class ValidationContext:
    """Typing environment for one function body."""

    module: ast.Module
    func_types: list
    locals: list
    returns: tuple
    func_index: int = 0
    vals: list = field(default_factory=list)
    ctrls: list = field(default_factory=list)
    # indices into ctrls where each label stack begins; the function body
    # starts stack 0, every prompt starts another
    stack_starts: list = field(default_factory=list)
    ordinal: int = 0
    current: int = 0
    record: dict = field(default_factory=dict)
    base_heights: list = field(default_factory=list)

    # -- errors -----------------------------------------------------------

    def fail(self, rule, msg):
        raise ValidationError(rule, msg, self.func_index, self.current)

    # -- operand stack ----------------------------------------------------

    def push(self, t):
        self.vals.append(t)

    def pop(self, expect=_UNKNOWN, what=""):
        frame = self.ctrls[-1]
        if len(self.vals) == frame.height:
            if frame.unreachable:
                return expect
            self.fail("type-mismatch", f"{what or 'instruction'}: operand stack underflow"
                      + (f", expected {expect}" if expect else ""))
        actual = self.vals.pop()
        if actual is _UNKNOWN or expect is _UNKNOWN:
            return actual if expect is _UNKNOWN else expect
        if actual != expect:
            self.fail("type-mismatch", f"{what or 'instruction'}: expected {expect}, found {actual}")
        return actual

    def pops(self, types, what=""):
        for t in reversed(types):
            self.pop(t, what)

    def pushes(self, types):
        for t in types:
            self.push(t)

    def set_unreachable(self):
        frame = self.ctrls[-1]
        del self.vals[frame.height:]
        frame.unreachable = True

    # -- labels -------------------------------------------------------------

    def push_ctrl(self, kind, start, end, new_stack=False):
        if new_stack:
            self.stack_starts.append(len(self.ctrls))
            self.base_heights.append(len(self.vals))
        self.ctrls.append(_Ctrl(kind, tuple(start), tuple(end), len(self.vals)))
        self.pushes(start)

    def pop_ctrl(self, what):
        frame = self.ctrls[-1]
        self.pops(frame.end, f"end of {what}")
        if len(self.vals) != frame.height:
            self.fail("type-mismatch", f"end of {what}: {len(self.vals) - frame.height} extra value(s) left on the stack")
        self.ctrls.pop()
        if self.stack_starts and self.stack_starts[-1] == len(self.ctrls):
            self.stack_starts.pop()
            self.base_heights.pop()
        return frame

    def label(self, k, what):
        """Resolve label ``k`` in the top-most label stack only."""
        top = self.stack_starts[-1]
        depth = len(self.ctrls) - top
        if k < depth:
            return self.ctrls[-1 - k]
        if k < len(self.ctrls):
            self.fail("prompt", f"{what} {k} targets a label outside the enclosing prompt")
        self.fail("br", f"{what}: unknown label {k}")

    def in_prompt(self):
        return len(self.stack_starts) > 1

    # -- recording ------------------------------------------------------------

    def note(self):
        """Record the frame-relative operand types before the current instruction."""
        base = self.base_heights[-1]
        frame = self.ctrls[-1]
        if frame.unreachable:
            self.record[self.current] = None
        else:
            self.record[self.current] = tuple(self.vals[base:])


def validate_module(module: ast.Module) -> ValidatedModule:
    """Type-check ``module``; raises ValidationError on the first failure."""
    n = module.num_funcs
    func_types = [module.func_type(i) for i in range(n)]
    for i, f in enumerate(module.funcs):
        if not 0 <= f.type < len(module.types):
            raise ValidationError("func", f"unknown type index {f.type}", len(module.imports) + i)
    if module.elems and module.table is None:
        raise ValidationError("table", "elem segment without a table")
    for e in module.elems:
        for idx in e.funcs:
            if not 0 <= idx < n:
                raise ValidationError("table", f"elem refers to unknown function {idx}")
    if module.datas and module.memory is None:
        raise ValidationError("memory", "data segment without a memory")
    if module.memory is not None and module.memory.min > 65536:
        raise ValidationError("memory", "memory size must be at most 65536 pages")
    names = set()
    for name, idx in module.exports:
        if name in names:
            raise ValidationError("export", f"duplicate export name {name!r}")
        names.add(name)
        if not 0 <= idx < n:
            raise ValidationError("export", f"export {name!r} refers to unknown function {idx}")
    for g in module.globals:
        if g.init.type != g.type:
            raise ValidationError("global", "global initializer has the wrong type")
    if module.start is not None:
        if not 0 <= module.start < n:
            raise ValidationError("start", "unknown start function")
        if func_types[module.start] != FuncType():
            raise ValidationError("start", "start function must have type [] -> []")

    stack_types = []
    for i, f in enumerate(module.funcs):
        fidx = len(module.imports) + i
        ft = func_types[fidx]
        ctx = ValidationContext(module, func_types, list(ft.params) + list(f.locals),
                                ft.results, func_index=fidx)
        ctx.push_ctrl("func", (), ft.results, new_stack=True)
        type_sequence(ctx, f.body)
        ctx.current = ctx.ordinal
        ctx.pop_ctrl("function")
        stack_types.append(ctx.record)
    return ValidatedModule(module, func_types, stack_types)


def type_sequence(ctx: ValidationContext, instrs) -> None:
    """Simulate the operand stack across ``instrs`` within the current control frame."""
    for ins in instrs:
        ctx.current = ctx.ordinal
        ctx.ordinal += 1
        ctx.note()
        _check(ctx, ins)


def _check(ctx: ValidationContext, ins) -> None:
    m = ctx.module
    if isinstance(ins, ast.Const):
        ctx.push(ins.type)
    elif isinstance(ins, ast.Numeric):
        params, result, _ = NUMERIC_OPS[ins.op]
        ctx.pops(params, ins.op)
        ctx.push(result)
    elif isinstance(ins, (ast.LocalGet, ast.LocalSet, ast.LocalTee)):
        if not 0 <= ins.index < len(ctx.locals):
            ctx.fail("local", f"unknown local {ins.index}")
        t = ctx.locals[ins.index]
        if isinstance(ins, ast.LocalGet):
            ctx.push(t)
        elif isinstance(ins, ast.LocalSet):
            ctx.pop(t, "local.set")
        else:
            ctx.pop(t, "local.tee")
            ctx.push(t)
    elif isinstance(ins, (ast.GlobalGet, ast.GlobalSet)):
        if not 0 <= ins.index < len(m.globals):
            ctx.fail("global", f"unknown global {ins.index}")
        g = m.globals[ins.index]
        if isinstance(ins, ast.GlobalGet):
            ctx.push(g.type)
        else:
            if not g.mutable:
                ctx.fail("global", f"global {ins.index} is immutable")
            ctx.pop(g.type, "global.set")
    elif isinstance(ins, ast.Load):
        _need_memory(ctx, ins.op)
        t, width, _ = LOAD_OPS[ins.op]
        _check_align(ctx, ins, width)
        ctx.pop(I32, ins.op)
        ctx.push(t)
    elif isinstance(ins, ast.Store):
        _need_memory(ctx, ins.op)
        t, width = STORE_OPS[ins.op]
        _check_align(ctx, ins, width)
        ctx.pop(t, ins.op)
        ctx.pop(I32, ins.op)
    elif isinstance(ins, ast.MemorySize):
        _need_memory(ctx, "memory.size")
        ctx.push(I32)
    elif isinstance(ins, ast.MemoryGrow):
        _need_memory(ctx, "memory.grow")
        ctx.pop(I32, "memory.grow")
        ctx.push(I32)
    elif isinstance(ins, (ast.Block, ast.Loop)):
        kind = "block" if isinstance(ins, ast.Block) else "loop"
        ctx.pops(ins.type.params, kind)
        ctx.push_ctrl(kind, ins.type.params, ins.type.results)
        type_sequence(ctx, ins.body)
        ctx.pop_ctrl(kind)
        ctx.pushes(ins.type.results)
    elif isinstance(ins, ast.If):
        ctx.pop(I32, "if condition")
        ctx.pops(ins.type.params, "if")
        ctx.push_ctrl("if", ins.type.params, ins.type.results)
        type_sequence(ctx, ins.then)
        ctx.pop_ctrl("if")
        if not ins.else_ and ins.type.params != ins.type.results:
            ctx.fail("type-mismatch", "if without else must leave its parameters unchanged")
        ctx.push_ctrl("else", ins.type.params, ins.type.results)
        type_sequence(ctx, ins.else_)
        ctx.pop_ctrl("else")
        ctx.pushes(ins.type.results)
    elif isinstance(ins, ast.Prompt):
        ctx.pops(ins.type.params, "prompt")
        ctx.push_ctrl("prompt", ins.type.params, ins.type.results, new_stack=True)
        type_sequence(ctx, ins.body)
        ctx.pop_ctrl("prompt")
        ctx.pushes(ins.type.results)
    elif isinstance(ins, ast.Br):
        frame = ctx.label(ins.label, "br")
        ctx.pops(frame.label_types, "br")
        ctx.set_unreachable()
    elif isinstance(ins, ast.BrIf):
        ctx.pop(I32, "br_if condition")
        frame = ctx.label(ins.label, "br_if")
        ctx.pops(frame.label_types, "br_if")
        ctx.pushes(frame.label_types)
    elif isinstance(ins, ast.BrTable):
        ctx.pop(I32, "br_table index")
        default = ctx.label(ins.default, "br_table").label_types
        for k in ins.labels:
            if len(ctx.label(k, "br_table").label_types) != len(default):
                ctx.fail("type-mismatch", "br_table targets have different arities")
        for k in ins.labels:
            types = ctx.label(k, "br_table").label_types
            ctx.pops(types, "br_table")
            ctx.pushes(types)
        ctx.pops(default, "br_table")
        ctx.set_unreachable()
    elif isinstance(ins, ast.Return):
        if ctx.in_prompt():
            ctx.fail("prompt", "return is not allowed inside a prompt")
        ctx.pops(ctx.returns, "return")
        ctx.set_unreachable()
    elif isinstance(ins, ast.Call):
        if not 0 <= ins.func < len(ctx.func_types):
            ctx.fail("call", f"unknown function {ins.func}")
        ft = ctx.func_types[ins.func]
        ctx.pops(ft.params, "call")
        ctx.pushes(ft.results)
    elif isinstance(ins, ast.CallIndirect):
        if m.table is None:
            ctx.fail("call_indirect", "call_indirect requires a table")
        if not 0 <= ins.type < len(m.types):
            ctx.fail("call_indirect", f"unknown type {ins.type}")
        ft = m.types[ins.type]
        ctx.pop(I32, "call_indirect")
        ctx.pops(ft.params, "call_indirect")
        ctx.pushes(ft.results)
    elif isinstance(ins, ast.Drop):
        ctx.pop(_UNKNOWN, "drop")
    elif isinstance(ins, ast.Select):
        ctx.pop(I32, "select")
        t1 = ctx.pop(_UNKNOWN, "select")
        t2 = ctx.pop(t1, "select")
        ctx.push(t2 if t2 is not _UNKNOWN else t1)
    elif isinstance(ins, ast.Nop):
        pass
    elif isinstance(ins, ast.Unreachable):
        ctx.set_unreachable()
    elif isinstance(ins, ast.Control):
        if not 0 <= ins.handler < len(ctx.func_types):
            ctx.fail("control", f"unknown handler function {ins.handler}")
        ht = ctx.func_types[ins.handler]
        if ht != HANDLER_TYPE:
            ctx.fail("control", f"handler {ins.handler} has type {ht}, expected {HANDLER_TYPE}")
        ctx.pop(I64, "control")
        ctx.push(I64)
    elif isinstance(ins, ast.Restore):
        ctx.pop(I64, "restore value")
        ctx.pop(I64, "restore continuation")
        ctx.set_unreachable()
    elif isinstance(ins, ast.ContinuationCopy):
        ctx.pop(I64, "continuation_copy")
        ctx.push(I64)
    elif isinstance(ins, ast.ContinuationDelete):
        ctx.pop(I64, "continuation_delete")
    else:
        ctx.fail("instruction", f"cannot validate {ins!r}")


def _need_memory(ctx, op):
    if ctx.module.memory is None:
        ctx.fail("memory", f"{op} requires a memory")


def _check_align(ctx, ins, width):
    if ins.align is not None:
        if ins.align <= 0 or ins.align & (ins.align - 1):
            ctx.fail("alignment", "alignment must be a power of two")
        if ins.align > width:
            ctx.fail("alignment", "alignment must not be larger than natural")
