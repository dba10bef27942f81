"""The fast execution engine.

Function bodies are flattened once into a list of tuples with resolved jump
targets.  Execution state is an explicit list of *segments*, one per active
prompt scope; each segment is a list of frames.  Capturing a continuation
moves the top segment into the continuation table and replaces it with a
fresh stack holding the handler call.  Restoring swaps a saved segment back
in.  No Python recursion is involved except for host functions that call
back into the module.

Operand stacks hold raw Python numbers; the typed ``Const`` form is only
used at the API boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import EmbeddingError, Trap, TrapKind
from .numerics import BITS, NUMERIC_OPS, PAGE_SIZE, default_value, load, store as mem_store
from .runtime import (HostFunc, Outcome, Store, call_host, control_trans,
                      copy_trans, delete_trans, grow_memory, prompt_end_trans, prompt_trans,
                      resolve_indirect, restore_trans)
from .syntax import ast
from .syntax.ast import F32, F64, I32, I64

__all__ = ["invoke", "invoke_index", "Outcome", "Frame", "ExecutionState", "compile_function"]

# opcodes, roughly ordered by frequency
(CONST, LGET, LSET, LTEE, NUM2, NUM1, BR, BRIF, BLOCK, LOOP, END, IF, ELSE, CALL,
 GGET, GSET, LOAD, STORE, DROP, SELECT, NOP, BRTABLE, RETURN, FEND, CALLIND,
 UNREACHABLE, MSIZE, MGROW, CONTROL, RESTORE, CCOPY, CDELETE, PROMPT, PEND,
 HANDLER_TRAP) = range(35)


@dataclass
class Code:
    ops: list
    ords: list  # instruction ordinal per op, None for structural ops
    nparams: int
    nresults: int
    local_types: tuple
    func: int


class Frame:
    """One activation.  Prompt bodies run in a frame of their own that shares
    the enclosing function's locals."""

    __slots__ = ("code", "pc", "stack", "locals", "labels")

    def __init__(self, code, pc, stack, locals_, labels):
        self.code = code
        self.pc = pc
        self.stack = stack
        self.locals = locals_
        self.labels = labels

    def __repr__(self):
        return f"Frame(func={self.code.func}, pc={self.pc}, stack={self.stack})"


class CapturedStack:
    """The context saved by ``control``: a list of suspended frames."""

    __slots__ = ("frames",)

    def __init__(self, frames):
        self.frames = frames

    def duplicate(self) -> "CapturedStack":
        shared = {}
        out = []
        for f in self.frames:
            key = id(f.locals)
            if key not in shared:
                shared[key] = list(f.locals)
            out.append(Frame(f.code, f.pc, list(f.stack), shared[key], list(f.labels)))
        return CapturedStack(out)


_SENTINEL_CODE = Code([(HANDLER_TRAP,)], [None], 0, 0, (), -1)


# -- compilation -------------------------------------------------------------------

def compile_function(module: ast.Module, func_index: int) -> Code:
    f = module.funcs[func_index - len(module.imports)]
    ft = module.types[f.type]
    ops: list = []
    ords: list = []
    counter = [0]

    def emit(op, ordinal=None):
        ops.append(op)
        ords.append(ordinal)
        return len(ops) - 1

    def body(instrs):
        for ins in instrs:
            n = counter[0]
            counter[0] += 1
            one(ins, n)

    def one(ins, n):
        if isinstance(ins, ast.Const):
            emit((CONST, ins.value), n)
        elif isinstance(ins, ast.Numeric):
            params, _, fn = NUMERIC_OPS[ins.op]
            emit((NUM2 if len(params) == 2 else NUM1, fn), n)
        elif isinstance(ins, ast.LocalGet):
            emit((LGET, ins.index), n)
        elif isinstance(ins, ast.LocalSet):
            emit((LSET, ins.index), n)
        elif isinstance(ins, ast.LocalTee):
            emit((LTEE, ins.index), n)
        elif isinstance(ins, ast.GlobalGet):
            emit((GGET, ins.index), n)
        elif isinstance(ins, ast.GlobalSet):
            emit((GSET, ins.index), n)
        elif isinstance(ins, ast.Load):
            emit((LOAD, ins.op, ins.offset), n)
        elif isinstance(ins, ast.Store):
            emit((STORE, ins.op, ins.offset), n)
        elif isinstance(ins, ast.MemorySize):
            emit((MSIZE,), n)
        elif isinstance(ins, ast.MemoryGrow):
            emit((MGROW,), n)
        elif isinstance(ins, ast.Block):
            at = emit(None, n)
            body(ins.body)
            end = emit((END,))
            ops[at] = (BLOCK, end + 1, len(ins.type.results), len(ins.type.params))
        elif isinstance(ins, ast.Loop):
            at = emit(None, n)
            body(ins.body)
            emit((END,))
            ops[at] = (LOOP, at, len(ins.type.params))
        elif isinstance(ins, ast.If):
            at = emit(None, n)
            body(ins.then)
            else_at = None
            if ins.else_:
                else_at = emit(None)
                body(ins.else_)
            end = emit((END,))
            if else_at is not None:
                ops[else_at] = (ELSE, end)
            target = else_at + 1 if else_at is not None else end
            ops[at] = (IF, target, end + 1, len(ins.type.results), len(ins.type.params))
        elif isinstance(ins, ast.Prompt):
            at = emit(None, n)
            body(ins.body)
            pend = emit((PEND, len(ins.type.results)))
            ops[at] = (PROMPT, at + 1, pend, len(ins.type.results), len(ins.type.params))
        elif isinstance(ins, ast.Br):
            emit((BR, ins.label), n)
        elif isinstance(ins, ast.BrIf):
            emit((BRIF, ins.label), n)
        elif isinstance(ins, ast.BrTable):
            emit((BRTABLE, ins.labels, ins.default), n)
        elif isinstance(ins, ast.Return):
            emit((RETURN,), n)
        elif isinstance(ins, ast.Call):
            emit((CALL, ins.func), n)
        elif isinstance(ins, ast.CallIndirect):
            emit((CALLIND, ins.type), n)
        elif isinstance(ins, ast.Drop):
            emit((DROP,), n)
        elif isinstance(ins, ast.Select):
            emit((SELECT,), n)
        elif isinstance(ins, ast.Nop):
            emit((NOP,), n)
        elif isinstance(ins, ast.Unreachable):
            emit((UNREACHABLE,), n)
        elif isinstance(ins, ast.Control):
            emit((CONTROL, ins.handler), n)
        elif isinstance(ins, ast.Restore):
            emit((RESTORE,), n)
        elif isinstance(ins, ast.ContinuationCopy):
            emit((CCOPY,), n)
        elif isinstance(ins, ast.ContinuationDelete):
            emit((CDELETE,), n)
        else:
            raise TypeError(f"cannot compile {ins!r}")

    body(f.body)
    emit((FEND,))
    return Code(ops, ords, len(ft.params), len(ft.results), tuple(f.locals), func_index)


def _codes(inst) -> list:
    cache = getattr(inst, "_codes", None)
    if cache is None:
        m = inst.module
        cache = [None] * len(m.imports) + [compile_function(m, i) for i in range(len(m.imports), m.num_funcs)]
        inst._codes = cache
    return cache


# -- execution -----------------------------------------------------------------------

def _new_frame(code: Code, args: list) -> Frame:
    locals_ = args + [default_value(t) for t in code.local_types]
    return Frame(code, 0, [], locals_, [(len(code.ops) - 1, code.nresults, 0)])


def _type_ok(t, v) -> bool:
    if t in (I32, I64):
        n = BITS[t]
        return type(v) is int and -(1 << (n - 1)) <= v < (1 << (n - 1))
    return type(v) is float


class ExecutionState:
    """Active segments (one frame stack per prompt level) for one invocation."""

    def __init__(self, store: Store, instance: int, debug: bool = False):
        self.store = store
        self.i = instance
        self.inst = store.instances[instance]
        self.codes = _codes(self.inst)
        self.segments: list = []
        self.depth = 0
        self.debug = debug
        self.steps = 0

    def check_types(self, frame: Frame) -> None:
        code = frame.code
        if code.func < 0:
            return
        ordinal = code.ords[frame.pc]
        if ordinal is None:
            return
        record = self.inst.validated.stack_types[code.func - len(self.inst.module.imports)]
        expect = record.get(ordinal)
        if expect is None:
            return
        stack = frame.stack
        if len(stack) != len(expect) or not all(_type_ok(t, v) for t, v in zip(expect, stack)):
            raise Trap(TrapKind.TYPE_CONFUSION,
                       f"func {code.func} instr {ordinal}: operand stack {stack} does not match {list(expect)}")

    def run(self, func: int, args: list) -> list:
        """Run ``func`` to completion inside an already pushed implicit prompt."""
        code = self.codes[func]
        frame = _new_frame(code, list(args))
        frames = [frame]
        self.segments = [frames]
        self.depth = 1
        inst = self.inst
        store = self.store
        i = self.i
        limit = inst.limits.call_depth
        debug = self.debug

        stack = frame.stack
        ops = code.ops
        pc = 0
        while True:
            op = ops[pc]
            if debug:
                frame.pc = pc
                self.check_types(frame)
            self.steps += 1
            pc += 1
            k = op[0]
            if k == CONST:
                stack.append(op[1])
            elif k == LGET:
                stack.append(frame.locals[op[1]])
            elif k == LSET:
                frame.locals[op[1]] = stack.pop()
            elif k == LTEE:
                frame.locals[op[1]] = stack[-1]
            elif k == NUM2:
                b = stack.pop()
                stack[-1] = op[1](stack[-1], b)
            elif k == NUM1:
                stack[-1] = op[1](stack[-1])
            elif k == BR or k == BRIF or k == BRTABLE:
                if k == BRIF:
                    if not stack.pop():
                        continue
                    depth = op[1]
                elif k == BR:
                    depth = op[1]
                else:
                    idx = stack.pop() & 0xFFFFFFFF
                    depth = op[1][idx] if idx < len(op[1]) else op[2]
                labels = frame.labels
                target, arity, height = labels[-1 - depth]
                if arity:
                    vals = stack[-arity:]
                    del stack[height:]
                    stack.extend(vals)
                else:
                    del stack[height:]
                del labels[len(labels) - 1 - depth:]
                pc = target
            elif k == BLOCK:
                frame.labels.append((op[1], op[2], len(stack) - op[3]))
            elif k == LOOP:
                frame.labels.append((op[1], op[2], len(stack) - op[2]))
            elif k == END:
                frame.labels.pop()
            elif k == IF:
                cond = stack.pop()
                frame.labels.append((op[2], op[3], len(stack) - op[4]))
                if not cond:
                    pc = op[1]
            elif k == ELSE:
                pc = op[1]
            elif k == CALL or k == CALLIND:
                if k == CALL:
                    callee = op[1]
                else:
                    callee = self.resolve_indirect(stack.pop(), op[1])
                target = inst.funcs[callee]
                if isinstance(target, HostFunc):
                    n = len(target.type.params)
                    args = stack[len(stack) - n:]
                    del stack[len(stack) - n:]
                    stack.extend(call_host(store, i, target, args, "fast"))
                    continue
                ccode = self.codes[callee]
                n = ccode.nparams
                args = stack[len(stack) - n:]
                del stack[len(stack) - n:]
                self.depth += 1
                if self.depth > limit:
                    raise Trap(TrapKind.RESOURCE_LIMIT, "call stack exhausted")
                frame.pc = pc
                frame = _new_frame(ccode, args)
                frames.append(frame)
                code, ops, stack, pc = ccode, ccode.ops, frame.stack, 0
            elif k == FEND or k == RETURN:
                n = code.nresults
                results = stack[len(stack) - n:] if n else []
                frames.pop()
                self.depth -= 1
                if not frames:
                    # bottom of the outermost segment: the invoked function returned
                    return results
                frame = frames[-1]
                code, ops, stack, pc = frame.code, frame.code.ops, frame.stack, frame.pc
                stack.extend(results)
            elif k == GGET:
                stack.append(inst.globals[op[1]])
            elif k == GSET:
                inst.globals[op[1]] = stack.pop()
            elif k == LOAD:
                stack[-1] = load(inst.memory, op[1], stack[-1], op[2])
            elif k == STORE:
                v = stack.pop()
                mem_store(inst.memory, op[1], stack.pop(), op[2], v)
            elif k == DROP:
                stack.pop()
            elif k == SELECT:
                c = stack.pop()
                b = stack.pop()
                if not c:
                    stack[-1] = b
            elif k == NOP:
                pass
            elif k == UNREACHABLE:
                raise Trap(TrapKind.UNREACHABLE, "unreachable executed")
            elif k == MSIZE:
                stack.append(len(inst.memory) // PAGE_SIZE)
            elif k == MGROW:
                stack[-1] = self.grow(stack[-1])
            elif k == CONTROL:
                v = stack.pop()
                frame.pc = pc
                handler = op[1]
                hcode = self.codes[handler]
                captured = CapturedStack(frames)
                kappa = control_trans(store, i, [], captured, handler=handler)
                self.depth += 2 - len(frames)
                sentinel = Frame(_SENTINEL_CODE, 0, [], [], [])
                target = inst.funcs[handler]
                if isinstance(target, HostFunc):
                    frames = [sentinel]
                    self.segments[-1] = frames
                    frame = sentinel
                    code, ops, stack, pc = _SENTINEL_CODE, _SENTINEL_CODE.ops, sentinel.stack, 0
                    call_host(store, i, target, [kappa, v], "fast")
                    continue
                frame = _new_frame(hcode, [kappa, v])
                frames = [sentinel, frame]
                self.segments[-1] = frames
                code, ops, stack, pc = hcode, hcode.ops, frame.stack, 0
            elif k == RESTORE:
                v = stack.pop()
                kappa = stack.pop()
                entry = restore_trans(store, i, kappa)
                saved = entry.ctx.frames
                self.depth += len(saved) - len(frames)
                frames = saved
                self.segments[-1] = frames
                frame = frames[-1]
                code, ops, stack, pc = frame.code, frame.code.ops, frame.stack, frame.pc
                stack.append(v)
            elif k == CCOPY:
                stack[-1] = copy_trans(store, i, stack[-1])
            elif k == CDELETE:
                delete_trans(store, i, stack.pop())
            elif k == PROMPT:
                n = op[4]
                args = stack[len(stack) - n:] if n else []
                del stack[len(stack) - n:]
                prompt_trans(store, i)
                frame.pc = op[2] + 1
                self.depth += 1
                if self.depth > limit:
                    raise Trap(TrapKind.RESOURCE_LIMIT, "call stack exhausted")
                frame = Frame(code, op[1], args, frame.locals, [(op[2], op[3], 0)])
                frames = [frame]
                self.segments.append(frames)
                stack, pc = frame.stack, op[1]
            elif k == PEND:
                n = op[1]
                results = stack[len(stack) - n:] if n else []
                prompt_end_trans(store, i)
                self.segments.pop()
                self.depth -= 1
                frames = self.segments[-1]
                frame = frames[-1]
                code, ops, stack, pc = frame.code, frame.code.ops, frame.stack, frame.pc
                stack.extend(results)
            elif k == HANDLER_TRAP:
                raise Trap(TrapKind.HANDLER_RETURNED, "continuation handler returned normally")
            else:  # pragma: no cover
                raise AssertionError(f"bad opcode {op!r}")

    def resolve_indirect(self, idx: int, type_index: int) -> int:
        return resolve_indirect(self.inst, idx, type_index)

    def grow(self, delta: int) -> int:
        return grow_memory(self.inst, delta)


# -- entry points ------------------------------------------------------------------------

def coerce_args(ft: ast.FuncType, args) -> list:
    """Check API arguments against a function type; returns raw values."""
    args = list(args)
    if len(args) != len(ft.params):
        raise EmbeddingError(f"expected {len(ft.params)} argument(s), got {len(args)}")
    out = []
    for t, a in zip(ft.params, args):
        if isinstance(a, ast.Const):
            if a.type != t:
                raise EmbeddingError(f"argument type {a.type} does not match {t}")
            out.append(a.value)
        elif t in (I32, I64) and isinstance(a, int) and not isinstance(a, bool):
            from .numerics import wrap
            out.append(wrap(t, a))
        elif t in (F32, F64) and isinstance(a, (int, float)):
            from .numerics import canon
            out.append(canon(t, float(a)) if t == F32 else float(a))
        else:
            raise EmbeddingError(f"argument {a!r} is not a {t}")
    return out


def invoke_index(store: Store, instance: int, func: int, args, debug: bool = False) -> Outcome:
    """Call function ``func`` under an implicit prompt and report the outcome."""
    inst = store.instances[instance]
    ft = inst.func_type(func)
    raw = coerce_args(ft, args)
    depth = len(inst.pstack)
    try:
        prompt_trans(store, instance)
        target = inst.funcs[func]
        if isinstance(target, HostFunc):
            results = call_host(store, instance, target, raw, "fast")
        else:
            results = ExecutionState(store, instance, debug).run(func, raw)
        prompt_end_trans(store, instance)
    except Trap as trap:
        del inst.pstack[depth:]
        return Outcome(trap=trap)
    except RecursionError:
        del inst.pstack[depth:]
        return Outcome(trap=Trap(TrapKind.RESOURCE_LIMIT, "host recursion too deep"))
    return Outcome(values=tuple(ast.Const(t, v) for t, v in zip(ft.results, results)))


def invoke(store: Store, instance: int, name: str, args=(), debug: bool = False) -> Outcome:
    inst = store.instances[instance]
    try:
        func = inst.export(name)
    except KeyError:
        raise EmbeddingError(f"no exported function named {name!r}") from None
    return invoke_index(store, instance, func, args, debug)

