"""Store, instances, prompt stack and continuation tables.

The six transition functions below are shared by the fast interpreter and
the reference oracle.  Each one touches only the top PromptContext of the
instance's prompt stack.  ``restore_trans``, ``copy_trans`` and
``delete_trans`` report an undefined transition by raising ``Trap`` with
the kind that classifies the failure.

Continuation IDs are plain table indices.  In epoch-debug mode the upper
32 bits of an ID carry an epoch number that is unique per prompt scope, so
an ID that outlives its prompt traps deterministically instead of aliasing
an unrelated entry.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from .errors import LinkError, Trap, TrapKind
from .numerics import MAX_PAGES, PAGE_SIZE, default_value
from .syntax import ast
from .syntax.ast import FuncType
from .validator import ValidatedModule

Value = ast.Const


@dataclass
class Outcome:
    """Result of running a function: either values or a trap."""

    values: Optional[tuple] = None
    trap: Optional[Trap] = None

    @property
    def ok(self) -> bool:
        return self.trap is None

    @property
    def kind(self) -> Optional[str]:
        return None if self.trap is None else self.trap.kind

    def same_as(self, other: "Outcome") -> bool:
        """Equal values, or traps of the same kind."""
        if self.ok != other.ok:
            return False
        return self.values == other.values if self.ok else self.kind == other.kind

    def __str__(self):
        if self.trap is not None:
            return f"trap {self.trap}"
        return " ".join(repr(v) for v in self.values) if self.values else "(no values)"

DEFAULT_CTABLE_CAPACITY = 65536
DEFAULT_PROMPT_DEPTH = 1024


@dataclass
class Limits:
    ctable_capacity: int = DEFAULT_CTABLE_CAPACITY
    prompt_depth: int = DEFAULT_PROMPT_DEPTH
    epoch_debug: bool = False
    call_depth: int = 10000


@dataclass
class ContinuationEntry:
    """A captured stack: saved locals, the captured context and the instance.

    ``ctx`` is opaque to this module.  The fast interpreter stores a list of
    suspended frames (whose locals are part of each frame, so ``locals`` is
    left empty); the oracle stores a context term with a hole.  ``type`` is
    the result type the captured context would produce once resumed, used by
    configuration typing.
    """

    locals: Any
    ctx: Any
    inst: int = 0
    type: Optional[tuple] = None

    def duplicate(self) -> "ContinuationEntry":
        dup = getattr(self.ctx, "duplicate", None)
        ctx = dup() if dup is not None else copy.deepcopy(self.ctx)
        return ContinuationEntry(copy.deepcopy(self.locals), ctx, self.inst, self.type)


@dataclass
class PromptContext:
    capacity: int = DEFAULT_CTABLE_CAPACITY
    root: Optional[int] = None
    entries: dict = field(default_factory=dict)  # index -> ContinuationEntry
    # nil indices below ``high`` form the free list; indices >= high were never used
    free: list = field(default_factory=list)
    high: int = 0
    epoch: int = 0

    @property
    def live(self) -> int:
        return len(self.entries)

    def alloc(self) -> int:
        if self.free:
            # lowest free index first
            return _pop_min(self.free)
        if self.high >= self.capacity:
            raise Trap(TrapKind.RESOURCE_LIMIT,
                       f"continuation table full ({self.capacity} live entries)")
        self.high += 1
        return self.high - 1

    def release(self, index: int) -> None:
        del self.entries[index]
        self.free.append(index)

    def check_free_list(self) -> bool:
        """Free indices are exactly the nil slots below the high-water mark."""
        nil = {i for i in range(self.high) if i not in self.entries}
        return nil == set(self.free) and len(nil) == len(self.free)


def _pop_min(xs: list) -> int:
    i = min(range(len(xs)), key=xs.__getitem__)
    xs[i], xs[-1] = xs[-1], xs[i]
    return xs.pop()


# -- store ---------------------------------------------------------------------

@dataclass
class HostFunc:
    """A function provided by the embedder."""

    type: FuncType
    fn: Callable
    name: str = ""


@dataclass
class Instance:
    module: ast.Module
    validated: ValidatedModule
    funcs: list  # index -> ast.Func | HostFunc
    globals: list  # raw python values
    table: list  # function index or None
    memory: Optional[bytearray]
    mem_max: Optional[int]
    pstack: list = field(default_factory=list)
    limits: Limits = field(default_factory=Limits)
    epochs: int = 0
    # observer(event, info) receives control/restore/copy/delete/prompt events
    observer: Optional[Callable] = None

    def emit(self, event: str, **info) -> None:
        if self.observer is not None:
            info["depth"] = len(self.pstack)
            info["live"] = self.pstack[-1].live if self.pstack else 0
            self.observer(event, info)

    def func_type(self, idx: int) -> FuncType:
        return self.validated.func_types[idx]

    def export(self, name: str) -> int:
        exports = self.module.export_map()
        if name not in exports:
            raise KeyError(name)
        return exports[name]


@dataclass
class Store:
    instances: list = field(default_factory=list)
    # scratch area shared with the embedder (e.g. captured host output)
    host: dict = field(default_factory=dict)


def instantiate(vm: ValidatedModule, imports: Optional[dict] = None,
                limits: Optional[Limits] = None, store: Optional[Store] = None):
    """Create an instance of ``vm``.  ``imports`` maps "module.name" to HostFunc."""
    imports = imports or {}
    module = vm.module
    funcs = []
    for imp in module.imports:
        key = f"{imp.module}.{imp.name}"
        if key not in imports:
            raise LinkError(f"missing import {key}")
        host = imports[key]
        if host.type != imp.type:
            raise LinkError(f"import {key} has type {host.type}, module expects {imp.type}")
        funcs.append(host)
    funcs.extend(module.funcs)
    globals_ = [g.init.value for g in module.globals]
    table = []
    if module.table is not None:
        table = [None] * module.table.min
        for e in module.elems:
            if e.offset + len(e.funcs) > len(table):
                raise LinkError("elements segment does not fit")
            table[e.offset:e.offset + len(e.funcs)] = list(e.funcs)
    memory = None
    mem_max = None
    if module.memory is not None:
        memory = bytearray(module.memory.min * PAGE_SIZE)
        mem_max = module.memory.max
        for d in module.datas:
            if d.offset + len(d.data) > len(memory):
                raise LinkError("data segment does not fit")
            memory[d.offset:d.offset + len(d.data)] = d.data
    store = store or Store()
    inst = Instance(module, vm, funcs, globals_, table, memory, mem_max,
                    limits=limits or Limits())
    store.instances.append(inst)
    return store, len(store.instances) - 1


def local_defaults(module: ast.Module, func: ast.Func) -> list:
    return [default_value(t) for t in func.locals]


# -- ctable helpers --------------------------------------------------------------

def _top(store: Store, i: int) -> PromptContext:
    return store.instances[i].pstack[-1]


def get_root(store: Store, i: int) -> Optional[int]:
    return _top(store, i).root


def set_root(store: Store, i: int, kappa: Optional[int]) -> None:
    _top(store, i).root = kappa


def get_cont(store: Store, i: int, kappa: int) -> Optional[ContinuationEntry]:
    pc = _top(store, i)
    idx = _index(pc, kappa, store.instances[i].limits, strict=False)
    return None if idx is None else pc.entries.get(idx)


def set_cont(store: Store, i: int, kappa: int, entry: Optional[ContinuationEntry]) -> None:
    pc = _top(store, i)
    idx = _index(pc, kappa, store.instances[i].limits, strict=False)
    if idx is None:
        raise ValueError(f"continuation ID {kappa} is out of range")
    if entry is None:
        if idx in pc.entries:
            pc.release(idx)
        return
    if idx not in pc.entries:
        if idx in pc.free:
            pc.free.remove(idx)
        elif idx >= pc.high:
            pc.free.extend(range(pc.high, idx))
            pc.high = idx + 1
    pc.entries[idx] = entry


def _index(pc: PromptContext, kappa: int, limits: Limits, strict: bool = True):
    """Table index addressed by the i64 ``kappa``, or None if out of range.

    With ``strict`` an epoch mismatch raises a trap; otherwise it reads as nil.
    """
    k = kappa & 0xFFFFFFFFFFFFFFFF
    if limits.epoch_debug:
        epoch, idx = k >> 32, k & 0xFFFFFFFF
        if epoch != pc.epoch:
            if strict:
                raise Trap(TrapKind.UNALLOCATED_CONTINUATION,
                           f"stale continuation {kappa} (epoch mismatch)")
            return None
        k = idx
    if k >= pc.capacity:
        return None
    return k


def _encode(pc: PromptContext, idx: int, limits: Limits) -> int:
    if limits.epoch_debug:
        k = (pc.epoch << 32) | idx
        return k - (1 << 64) if k >> 63 else k
    return idx


def _same(pc: PromptContext, root: Optional[int], idx: int) -> bool:
    return root is not None and root == idx


# -- transition functions ------------------------------------------------------------
#
# Roots are kept as raw table indices; IDs handed to programs go through
# ``_encode`` so that epoch-debug mode can tag them.

def control_trans(store: Store, i: int, locals_, ctx, type_=None, handler=None) -> int:
    """Store a captured context at a fresh ID; the first capture becomes the root.

    ``handler`` is only reported to the observer.
    """
    inst = store.instances[i]
    pc = inst.pstack[-1]
    idx = pc.alloc()
    pc.entries[idx] = ContinuationEntry(locals_, ctx, i, type_)
    if pc.root is None:
        pc.root = idx
    kappa = _encode(pc, idx, inst.limits)
    inst.emit("control", kappa=kappa, root=pc.root == idx, handler=handler)
    return kappa


def restore_trans(store: Store, i: int, kappa: int) -> ContinuationEntry:
    inst = store.instances[i]
    pc = inst.pstack[-1]
    if pc.root is None:
        raise Trap(TrapKind.ROOT_VIOLATION,
                   "restore while the root continuation is executing")
    idx = _index(pc, kappa, inst.limits)
    entry = pc.entries.get(idx) if idx is not None else None
    if entry is None:
        raise Trap(TrapKind.UNALLOCATED_CONTINUATION,
                   f"restore of unallocated continuation {kappa}")
    pc.release(idx)
    was_root = pc.root == idx
    if was_root:
        pc.root = None
    inst.emit("restore", kappa=kappa, root=was_root)
    return entry


def copy_trans(store: Store, i: int, kappa: int) -> int:
    inst = store.instances[i]
    pc = inst.pstack[-1]
    idx = _index(pc, kappa, inst.limits)
    if _same(pc, pc.root, idx):
        raise Trap(TrapKind.ROOT_VIOLATION, f"continuation_copy of the root continuation {kappa}")
    entry = pc.entries.get(idx) if idx is not None else None
    if entry is None:
        raise Trap(TrapKind.UNALLOCATED_CONTINUATION,
                   f"continuation_copy of unallocated continuation {kappa}")
    new = pc.alloc()
    pc.entries[new] = entry.duplicate()
    copied = _encode(pc, new, inst.limits)
    inst.emit("copy", kappa=kappa, copy=copied)
    return copied


def delete_trans(store: Store, i: int, kappa: int) -> None:
    inst = store.instances[i]
    pc = inst.pstack[-1]
    idx = _index(pc, kappa, inst.limits)
    if _same(pc, pc.root, idx):
        raise Trap(TrapKind.ROOT_VIOLATION, f"continuation_delete of the root continuation {kappa}")
    if idx is None or idx not in pc.entries:
        raise Trap(TrapKind.UNALLOCATED_CONTINUATION,
                   f"continuation_delete of unallocated continuation {kappa}")
    pc.release(idx)
    inst.emit("delete", kappa=kappa)


def prompt_trans(store: Store, i: int) -> PromptContext:
    inst = store.instances[i]
    if len(inst.pstack) >= inst.limits.prompt_depth:
        raise Trap(TrapKind.RESOURCE_LIMIT,
                   f"prompt depth limit ({inst.limits.prompt_depth}) exceeded")
    inst.epochs += 1
    pc = PromptContext(capacity=inst.limits.ctable_capacity, epoch=inst.epochs & 0x7FFFFFFF)
    inst.pstack.append(pc)
    inst.emit("prompt")
    return pc


def prompt_end_trans(store: Store, i: int) -> PromptContext:
    inst = store.instances[i]
    pc = inst.pstack[-1]
    if pc.root is not None:
        raise Trap(TrapKind.UNBALANCED_PROMPT,
                   "prompt ended while its root continuation is suspended")
    inst.emit("prompt_end")
    inst.pstack.pop()
    return pc


# -- host calls --------------------------------------------------------------------

@dataclass
class Caller:
    """Handle given to host callbacks: memory access and reentry."""

    store: Store
    instance: int
    engine: str = "fast"

    @property
    def memory(self) -> Optional[bytearray]:
        return self.store.instances[self.instance].memory

    def invoke(self, name: str, args=()) -> Outcome:
        """Call back into an export; runs under a fresh implicit prompt."""
        from .embedding import host_call_in
        return host_call_in(self.store, self.instance, name, list(args), engine=self.engine)


def call_host(store: Store, i: int, host: HostFunc, raw_args: list, engine: str) -> list:
    """Run a host function on raw operand values and return raw results."""
    args = [ast.Const(t, v) for t, v in zip(host.type.params, raw_args)]
    try:
        res = host.fn(Caller(store, i, engine), args)
    except Trap:
        raise
    except Exception as exc:  # host failures become traps
        raise Trap(TrapKind.HOST_ERROR, f"{host.name or 'host function'} failed: {exc}") from exc
    res = list(res or ())
    if len(res) != len(host.type.results) or any(
            not isinstance(r, ast.Const) or r.type != t for r, t in zip(res, host.type.results)):
        raise Trap(TrapKind.HOST_ERROR,
                   f"{host.name or 'host function'} returned {res}, expected {host.type.results}")
    return [r.value for r in res]


def resolve_indirect(inst: Instance, idx: int, type_index: int) -> int:
    """Function index stored at table slot ``idx``, checked against a type."""
    idx &= 0xFFFFFFFF
    if idx >= len(inst.table) or inst.table[idx] is None:
        raise Trap(TrapKind.UNDEFINED_ELEMENT, f"undefined table element {idx}")
    callee = inst.table[idx]
    if inst.func_type(callee) != inst.module.types[type_index]:
        raise Trap(TrapKind.INDIRECT_CALL_MISMATCH, "indirect call type mismatch")
    return callee


def grow_memory(inst: Instance, delta: int) -> int:
    """memory.grow: old size in pages, or -1 when the limit would be exceeded."""
    delta &= 0xFFFFFFFF
    old = len(inst.memory) // PAGE_SIZE
    cap = inst.mem_max if inst.mem_max is not None else MAX_PAGES
    if old + delta > cap:
        return -1
    inst.memory.extend(bytes(delta * PAGE_SIZE))
    return old
