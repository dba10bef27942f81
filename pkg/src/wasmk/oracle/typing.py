"""Typing of runtime configurations.

When every prompt scope of the instance has a nil root, the configuration
is typed directly from its instruction sequence.  Otherwise the type is the
one recorded for the root continuation of the outermost scope whose root is
set: that continuation is what eventually runs to completion.

Direct typing extends the validator with the administrative terms: labels,
frames (typed under their own function's locals), traps (stack
polymorphic) and ``prompt_end`` (only well-typed in a live configuration
while the top scope's root is nil).
"""

from __future__ import annotations

from ..errors import ValidationError
from ..syntax.ast import I64, Const
from ..validator import ValidationContext, _check, _Ctrl
from .terms import Frame, Hole, Label, PromptEnd, TrapTerm


class _Any:
    """The type of a configuration that has trapped: compatible with anything."""

    def __repr__(self):
        return "any"


ANY = _Any()


class IllTyped(Exception):
    pass


def compatible(a, b) -> bool:
    return a is ANY or b is ANY or a == b


def type_term(inst, seq, live: bool = True):
    """Direct type of an instruction sequence at the top of a configuration."""
    ctx = ValidationContext(inst.module, inst.validated.func_types, [], (), func_index=-1)
    ctx.push_ctrl("config", (), (), new_stack=True)
    bottom = ctx.ctrls[0]
    try:
        _type_seq(ctx, seq, inst, live)
    except ValidationError as exc:
        raise IllTyped(str(exc)) from None
    if bottom.unreachable:
        return ANY
    out = tuple(ctx.vals[bottom.height:])
    return ANY if None in out else out


def _type_seq(ctx: ValidationContext, seq, inst, live: bool) -> None:
    for ins in seq:
        t = type(ins)
        if t is Const:
            ctx.push(ins.type)
        elif t is Label:
            ctx.ctrls.append(_Ctrl("label", (), tuple(ins.results), len(ctx.vals), branch=tuple(ins.branch)))
            _type_seq(ctx, ins.body, inst, live)
            ctx.pop_ctrl("label")
            ctx.pushes(ins.results)
        elif t is Frame:
            _type_frame(ctx, ins, inst, live)
            ctx.pushes(ins.results)
        elif t is TrapTerm:
            ctx.set_unreachable()
        elif t is PromptEnd:
            if live and inst.pstack and inst.pstack[-1].root is not None:
                raise IllTyped("prompt_end while the top root continuation is suspended")
        elif t is Hole:
            raise IllTyped("unplugged hole")
        else:
            ctx.current = ctx.ordinal
            _check(ctx, ins)


def _type_frame(outer: ValidationContext, fr: Frame, inst, live: bool) -> None:
    module = inst.module
    nimp = len(module.imports)
    if not nimp <= fr.func < module.num_funcs:
        raise IllTyped(f"frame of unknown function {fr.func}")
    ft = inst.validated.func_types[fr.func]
    declared = list(ft.params) + list(module.funcs[fr.func - nimp].locals)
    if [v.type for v in fr.locals] != declared:
        raise IllTyped(f"frame locals {fr.locals} do not match {declared}")
    if tuple(fr.results) != tuple(ft.results):
        raise IllTyped("frame arity does not match its function")
    ctx = ValidationContext(module, inst.validated.func_types, declared, tuple(ft.results), func_index=fr.func)
    ctx.push_ctrl("func", (), tuple(ft.results), new_stack=True)
    _type_seq(ctx, fr.body, inst, live)
    ctx.pop_ctrl("frame")


def check_store(inst) -> None:
    """Exhaustively re-type every stored continuation against its recorded type."""
    for pc in inst.pstack:
        if not pc.check_free_list():
            raise IllTyped("free list out of sync with the continuation table")
        if pc.root is not None and pc.root not in pc.entries:
            raise IllTyped(f"root {pc.root} indexes a nil entry")
        for idx, entry in pc.entries.items():
            plug = getattr(entry.ctx, "plug", None)
            if plug is None:
                continue
            ty = type_term(inst, plug(Const(I64, 0)), live=False)
            if entry.type is not None and not compatible(ty, entry.type):
                raise IllTyped(f"continuation {idx} has type {ty}, recorded {entry.type}")


def type_configuration(store, i: int, seq, exhaustive: bool = False):
    """Type of the configuration ``seq`` running in instance ``i``."""
    inst = store.instances[i]
    direct = type_term(inst, seq, live=True)
    if exhaustive:
        check_store(inst)
    pstack = inst.pstack
    # position p counts from the top of the prompt stack
    set_roots = [p for p in range(len(pstack)) if pstack[-1 - p].root is not None]
    if not set_roots:
        return direct
    p_r = max(set_roots)
    pc = pstack[-1 - p_r]
    entry = pc.entries.get(pc.root)
    if entry is None:
        raise IllTyped(f"root continuation {pc.root} is nil")
    if entry.type is None:
        raise IllTyped(f"no type recorded for root continuation {pc.root}")
    return entry.type
