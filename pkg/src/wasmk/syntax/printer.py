"""Pretty-printing of modules and instructions back to the text format.

Output uses numeric indices and the flat instruction form; parsing the
output yields a structurally identical module.
"""

import math

from . import ast


def format_value(t: str, v) -> str:
    if t in (ast.I32, ast.I64):
        return str(v)
    if math.isnan(v):
        from ..numerics import float_bits
        bits = float_bits(t, v)
        sign = "-" if bits >> (31 if t == ast.F32 else 63) else ""
        mask = (1 << 23) - 1 if t == ast.F32 else (1 << 52) - 1
        return f"{sign}nan:0x{bits & mask:x}"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v.hex()


def _types(ft: ast.FuncType) -> str:
    parts = []
    if ft.params:
        parts.append(f"(param {' '.join(ft.params)})")
    if ft.results:
        parts.append(f"(result {' '.join(ft.results)})")
    return " ".join(parts)


def format_instr(ins) -> str:
    """One-line rendering of an instruction (blocks show their type only)."""
    if isinstance(ins, ast.Const):
        return f"{ins.type}.const {format_value(ins.type, ins.value)}"
    if isinstance(ins, ast.Numeric):
        return ins.op
    simple = {
        ast.LocalGet: "local.get", ast.LocalSet: "local.set", ast.LocalTee: "local.tee",
        ast.GlobalGet: "global.get", ast.GlobalSet: "global.set",
    }
    for cls, kw in simple.items():
        if isinstance(ins, cls):
            return f"{kw} {ins.index}"
    if isinstance(ins, (ast.Load, ast.Store)):
        s = ins.op
        if ins.offset:
            s += f" offset={ins.offset}"
        if ins.align is not None:
            s += f" align={ins.align}"
        return s
    if isinstance(ins, ast.Br):
        return f"br {ins.label}"
    if isinstance(ins, ast.BrIf):
        return f"br_if {ins.label}"
    if isinstance(ins, ast.BrTable):
        return "br_table " + " ".join(str(x) for x in (*ins.labels, ins.default))
    if isinstance(ins, ast.Call):
        return f"call {ins.func}"
    if isinstance(ins, ast.CallIndirect):
        return f"call_indirect (type {ins.type})"
    if isinstance(ins, ast.Control):
        return f"control {ins.handler}"
    kw = {
        ast.Block: "block", ast.Loop: "loop", ast.If: "if", ast.Prompt: "prompt",
    }.get(type(ins))
    if kw:
        t = _types(ins.type)
        return f"{kw} {t}".rstrip()
    names = {
        ast.Return: "return", ast.Drop: "drop", ast.Select: "select", ast.Nop: "nop",
        ast.Unreachable: "unreachable", ast.Restore: "restore",
        ast.ContinuationCopy: "continuation_copy", ast.ContinuationDelete: "continuation_delete",
        ast.MemorySize: "memory.size", ast.MemoryGrow: "memory.grow",
    }
    if type(ins) in names:
        return names[type(ins)]
    fmt = getattr(ins, "pretty", None)
    if fmt is not None:
        return fmt()
    raise TypeError(f"cannot print {ins!r}")


def format_body(body, indent: int = 0) -> list:
    lines = []
    pad = "  " * indent
    for ins in body:
        if isinstance(ins, (ast.Block, ast.Loop, ast.Prompt)):
            lines.append(pad + format_instr(ins))
            lines.extend(format_body(ins.body, indent + 1))
            lines.append(pad + "end")
        elif isinstance(ins, ast.If):
            lines.append(pad + format_instr(ins))
            lines.extend(format_body(ins.then, indent + 1))
            if ins.else_:
                lines.append(pad + "else")
                lines.extend(format_body(ins.else_, indent + 1))
            lines.append(pad + "end")
        else:
            lines.append(pad + format_instr(ins))
    return lines


def _string(data: bytes) -> str:
    out = []
    for b in data:
        if 0x20 <= b < 0x7F and b not in (0x22, 0x5C):
            out.append(chr(b))
        else:
            out.append(f"\\{b:02x}")
    return '"' + "".join(out) + '"'


def print_module(m: ast.Module) -> str:
    lines = ["(module"]
    for ft in m.types:
        lines.append(f"  (type (func {_types(ft)}))".replace(" )", ")"))
    for imp in m.imports:
        tidx = m.types.index(imp.type) if imp.type in m.types else None
        sig = f"(type {tidx}) {_types(imp.type)}" if tidx is not None else _types(imp.type)
        lines.append(f'  (import {_string(imp.module.encode())} {_string(imp.name.encode())} (func {sig}))'.replace(" )", ")"))
    for f in m.funcs:
        head = f"  (func (type {f.type})"
        ft = m.types[f.type]
        if ft.params or ft.results:
            head += " " + _types(ft)
        if f.locals:
            head += f" (local {' '.join(f.locals)})"
        lines.append(head)
        lines.extend(format_body(f.body, 2))
        lines.append("  )")
    if m.table is not None:
        mx = f" {m.table.max}" if m.table.max is not None else ""
        lines.append(f"  (table {m.table.min}{mx} funcref)")
    for e in m.elems:
        lines.append(f"  (elem (i32.const {e.offset}) func {' '.join(map(str, e.funcs))})".replace(" )", ")"))
    if m.memory is not None:
        mx = f" {m.memory.max}" if m.memory.max is not None else ""
        lines.append(f"  (memory {m.memory.min}{mx})")
    for d in m.datas:
        lines.append(f"  (data (i32.const {d.offset}) {_string(d.data)})")
    for g in m.globals:
        t = f"(mut {g.type})" if g.mutable else g.type
        lines.append(f"  (global {t} ({g.init.type}.const {format_value(g.type, g.init.value)}))")
    for name, idx in m.exports:
        lines.append(f"  (export {_string(name.encode())} (func {idx}))")
    if m.start is not None:
        lines.append(f"  (start {m.start})")
    lines.append(")")
    return "\n".join(lines) + "\n"
