"""Parser for modules and test scripts in the extended text format.

Both the flat (``block ... end``) and folded (``(block ...)``) instruction
forms are accepted.  Symbolic names (``$f``) are resolved to indices here,
so ``control $handler`` is stored as ``Control(<function index>)``.
"""

from __future__ import annotations

import re

from ..errors import ParseError
from ..numerics import LOAD_OPS, NUMERIC_OPS, STORE_OPS, bits_float, round_f32, wrap
from . import ast
from .ast import F32, I32, I64, VALTYPES, FuncType
from .sexpr import Atom, SList, String, read_all

_NO_IMMEDIATE = {
    "return": ast.Return, "drop": ast.Drop, "select": ast.Select, "nop": ast.Nop,
    "unreachable": ast.Unreachable, "restore": ast.Restore,
    "continuation_copy": ast.ContinuationCopy, "continuation_delete": ast.ContinuationDelete,
    "memory.size": ast.MemorySize, "memory.grow": ast.MemoryGrow,
}
_INDEX_OPS = {
    "local.get": ast.LocalGet, "local.set": ast.LocalSet, "local.tee": ast.LocalTee,
    "global.get": ast.GlobalGet, "global.set": ast.GlobalSet,
}
_BLOCKS = ("block", "loop", "if", "prompt")


def _err(node, msg):
    raise ParseError(msg, getattr(node, "line", 0), getattr(node, "col", 0))


def _is_list(node, head=None):
    return isinstance(node, SList) and (head is None or node.head == head)


def _is_name(node):
    return isinstance(node, Atom) and node.text.startswith("$")


def parse_int(text: str, node=None) -> int:
    t = text.replace("_", "")
    try:
        if re.fullmatch(r"[+-]?0x[0-9a-fA-F]+", t):
            return int(t, 16)
        if re.fullmatch(r"[+-]?[0-9]+", t):
            return int(t, 10)
    except ValueError:
        pass
    _err(node, f"expected an integer, got {text!r}")


def parse_const_value(t: str, text: str, node=None):
    if t in (I32, I64):
        v = parse_int(text, node)
        bits = 32 if t == I32 else 64
        if not -(1 << (bits - 1)) <= v < (1 << bits):
            _err(node, f"constant {text} out of range for {t}")
        return wrap(t, v)
    s = text.replace("_", "")
    sign = -1.0 if s.startswith("-") else 1.0
    body = s.lstrip("+-")
    if body == "inf":
        v = sign * float("inf")
    elif body == "nan":
        v = float("nan") if sign > 0 else -float("nan")
    elif body.startswith("nan:0x"):
        payload = int(body[6:], 16)
        if t == F32:
            bits = 0x7F800000 | payload | (0x80000000 if sign < 0 else 0)
        else:
            bits = 0x7FF0000000000000 | payload | (1 << 63 if sign < 0 else 0)
        return bits_float(t, bits)
    else:
        try:
            v = sign * (float.fromhex(body) if body.lower().startswith("0x") else float(body))
        except ValueError:
            _err(node, f"expected a float, got {text!r}")
    return round_f32(v) if t == F32 else v


def _valtype(node) -> str:
    if not isinstance(node, Atom) or node.text not in VALTYPES:
        _err(node, f"expected a value type, got {node!r}")
    return node.text


class _ModuleParser:
    def __init__(self, form: SList):
        self.form = form
        items = form.items[1:]
        if items and _is_name(items[0]):
            items = items[1:]
        self.fields = items
        self.types: list = []
        self.type_names: dict = {}
        self.func_names: dict = {}
        self.global_names: dict = {}
        self.imports: list = []
        self.func_forms: list = []
        self.globals: list = []
        self.exports: list = []
        self.export_names: set = set()
        self.table = None
        self.elems: list = []
        self.memory = None
        self.datas: list = []
        self.start = None

    # -- helpers --------------------------------------------------------------

    def type_index(self, ft: FuncType) -> int:
        if ft in self.types:
            return self.types.index(ft)
        self.types.append(ft)
        return len(self.types) - 1

    def resolve(self, node, names: dict, kind: str, limit=None) -> int:
        if _is_name(node):
            if node.text not in names:
                _err(node, f"unknown {kind} {node.text}")
            return names[node.text]
        if not isinstance(node, Atom):
            _err(node, f"expected {kind} index")
        idx = parse_int(node.text, node)
        if idx < 0 or (limit is not None and idx >= limit):
            _err(node, f"{kind} index {idx} out of range")
        return idx

    def func_ref(self, node) -> int:
        return self.resolve(node, self.func_names, "function", len(self.imports) + len(self.func_forms))

    def add_export(self, node, name: str, index: int):
        if name in self.export_names:
            _err(node, f"duplicate export name {name!r}")
        self.export_names.add(name)
        self.exports.append((name, index))

    def parse_functype_lists(self, items, start, allow_names):
        """Parse ``(param ...)* (result ...)*``; returns (FuncType, param names, next index)."""
        params, names, results = [], [], []
        i = start
        while i < len(items) and _is_list(items[i], "param"):
            p = items[i].items[1:]
            if p and _is_name(p[0]):
                if not allow_names:
                    _err(p[0], "named parameters are not allowed here")
                if len(p) != 2:
                    _err(items[i], "named param takes exactly one type")
                names.append(p[0].text)
                params.append(_valtype(p[1]))
            else:
                for t in p:
                    names.append(None)
                    params.append(_valtype(t))
            i += 1
        while i < len(items) and _is_list(items[i], "result"):
            for t in items[i].items[1:]:
                results.append(_valtype(t))
            i += 1
        if len(results) > 1:
            _err(items[start] if start < len(items) else self.form, "at most one result type is supported")
        return FuncType(tuple(params), tuple(results)), names, i

    def parse_typeuse(self, items, start, allow_names=True):
        """Parse ``(type x)? (param ...)* (result ...)*``; returns (type index, names, next index)."""
        i = start
        explicit = None
        if i < len(items) and _is_list(items[i], "type"):
            tnode = items[i]
            if len(tnode.items) != 2:
                _err(tnode, "type use takes exactly one index")
            explicit = self.resolve(tnode.items[1], self.type_names, "type", len(self.types))
            i += 1
        ft, names, j = self.parse_functype_lists(items, i, allow_names)
        if explicit is not None:
            if j > i and ft != self.types[explicit]:
                _err(items[start], "inline signature does not match the referenced type")
            if j == i:
                names = [None] * len(self.types[explicit].params)
            return explicit, names, j
        return self.type_index(ft), names, j

    def parse_block_type(self, items, start):
        """Block types: ``(type x)? (param ...)* (result ...)*`` giving a FuncType."""
        i = start
        if i < len(items) and _is_list(items[i], "type"):
            idx = self.resolve(items[i].items[1], self.type_names, "type", len(self.types))
            ft, _, j = self.parse_functype_lists(items, i + 1, False)
            if j > i + 1 and ft != self.types[idx]:
                _err(items[i], "inline block type does not match the referenced type")
            return self.types[idx], j
        ft, _, j = self.parse_functype_lists(items, i, False)
        return ft, j

    def const_expr(self, node, expect=None) -> ast.Const:
        if not _is_list(node) or not node.head or not node.head.endswith(".const") or len(node.items) != 2:
            _err(node, "expected a constant expression like (i32.const 0)")
        t = node.head.split(".")[0]
        if t not in VALTYPES or (expect and t != expect):
            _err(node, f"expected a {expect or 'typed'} constant")
        return ast.Const(t, parse_const_value(t, node.items[1].text, node.items[1]))

    # -- passes -------------------------------------------------------------------

    def parse(self) -> ast.Module:
        # Pass 1: explicit types and index spaces.
        for f in self.fields:
            if not isinstance(f, SList) or f.head is None:
                _err(f, "expected a module field")
            h = f.head
            if h == "type":
                rest = f.items[1:]
                if rest and _is_name(rest[0]):
                    self.type_names[rest[0].text] = len(self.types)
                    rest = rest[1:]
                if len(rest) != 1 or not _is_list(rest[0], "func"):
                    _err(f, "expected (type $name? (func ...))")
                ft, _, j = self.parse_functype_lists(rest[0].items, 1, True)
                if j != len(rest[0].items):
                    _err(rest[0].items[j], "unexpected item in function type")
                self.types.append(ft)
            elif h == "import":
                if self.func_forms:
                    _err(f, "imports must precede function definitions")
                if len(f.items) != 4 or not isinstance(f.items[1], String) or not isinstance(f.items[2], String):
                    _err(f, 'expected (import "module" "name" (func ...))')
                desc = f.items[3]
                if not _is_list(desc, "func"):
                    _err(desc, "only function imports are supported")
                if len(desc.items) > 1 and _is_name(desc.items[1]):
                    self.func_names[desc.items[1].text] = len(self.imports)
                self.imports.append(f)
            elif h == "func":
                rest = f.items[1:]
                if rest and _is_name(rest[0]):
                    if rest[0].text in self.func_names:
                        _err(rest[0], f"duplicate function name {rest[0].text}")
                    self.func_names[rest[0].text] = len(self.imports) + len(self.func_forms)
                self.func_forms.append(f)
            elif h == "global":
                rest = f.items[1:]
                if rest and _is_name(rest[0]):
                    self.global_names[rest[0].text] = len(self.globals)
                self.globals.append(f)
            elif h not in ("memory", "table", "elem", "data", "export", "start"):
                _err(f, f"unknown module field {h!r}")

        imports = []
        for f in self.imports:
            desc = f.items[3]
            start = 2 if len(desc.items) > 1 and _is_name(desc.items[1]) else 1
            tidx, _, j = self.parse_typeuse(desc.items, start)
            if j != len(desc.items):
                _err(desc.items[j], "unexpected item in import")
            imports.append(ast.Import(f.items[1].text, f.items[2].text, self.types[tidx]))
        self.imports = imports

        globals_ = []
        for f in self.globals:
            rest = f.items[1:]
            name = None
            if rest and _is_name(rest[0]):
                name = rest[0].text
                rest = rest[1:]
            while rest and _is_list(rest[0], "export"):
                _err(rest[0], "only function exports are supported")
            if len(rest) != 2:
                _err(f, "expected (global $name? type init)")
            if _is_list(rest[0], "mut"):
                t, mut = _valtype(rest[0].items[1]), True
            else:
                t, mut = _valtype(rest[0]), False
            globals_.append(ast.Global(t, mut, self.const_expr(rest[1], t), name))

        # Function signatures first (implicit types are appended in order).
        sigs = []
        for f in self.func_forms:
            rest = f.items[1:]
            i = 1 if rest and _is_name(rest[0]) else 0
            while i < len(rest) and _is_list(rest[i], "export"):
                e = rest[i]
                if len(e.items) != 2 or not isinstance(e.items[1], String):
                    _err(e, 'expected (export "name")')
                self.add_export(e, e.items[1].text, len(self.imports) + len(sigs))
                i += 1
            tidx, names, i = self.parse_typeuse(rest, i)
            sigs.append((tidx, names, rest, i))

        funcs = []
        for (tidx, names, rest, i), f in zip(sigs, self.func_forms):
            local_types = []
            local_names = dict()
            for k, n in enumerate(names):
                if n is not None:
                    local_names[n] = k
            nparams = len(self.types[tidx].params)
            while i < len(rest) and _is_list(rest[i], "local"):
                p = rest[i].items[1:]
                if p and _is_name(p[0]):
                    if len(p) != 2:
                        _err(rest[i], "named local takes exactly one type")
                    local_names[p[0].text] = nparams + len(local_types)
                    local_types.append(_valtype(p[1]))
                else:
                    local_types.extend(_valtype(t) for t in p)
                i += 1
            ctx = _FuncContext(self, local_names, nparams + len(local_types))
            body = ctx.parse_seq(rest, i, ())
            fname = f.items[1].text if len(f.items) > 1 and _is_name(f.items[1]) else None
            funcs.append(ast.Func(tidx, tuple(local_types), tuple(body), fname))

        for f in self.fields:
            h = f.head
            if h == "memory":
                self.parse_memory(f)
            elif h == "table":
                self.parse_table(f)
            elif h == "elem":
                self.parse_elem(f)
            elif h == "data":
                self.parse_data(f)
            elif h == "export":
                if len(f.items) != 3 or not isinstance(f.items[1], String) or not _is_list(f.items[2]):
                    _err(f, 'expected (export "name" (func x))')
                desc = f.items[2]
                if desc.head == "memory":
                    continue  # memory exports carry no meaning for the host API here
                if desc.head != "func" or len(desc.items) != 2:
                    _err(desc, "only function exports are supported")
                self.add_export(f, f.items[1].text, self.func_ref(desc.items[1]))
            elif h == "start":
                if len(f.items) != 2:
                    _err(f, "expected (start x)")
                self.start = self.func_ref(f.items[1])

        return ast.Module(
            types=tuple(self.types), imports=tuple(self.imports), funcs=tuple(funcs),
            globals=tuple(globals_), table=self.table, elems=tuple(self.elems),
            memory=self.memory, datas=tuple(self.datas), exports=tuple(self.exports),
            start=self.start,
        )

    def parse_limits(self, f, items):
        nums = [parse_int(a.text, a) for a in items if isinstance(a, Atom)]
        if not 1 <= len(nums) <= 2 or len(nums) != len(items):
            _err(f, "expected limits: min max?")
        return nums[0], (nums[1] if len(nums) > 1 else None)

    def parse_memory(self, f):
        if self.memory is not None:
            _err(f, "at most one memory is allowed")
        rest = f.items[1:]
        if rest and _is_name(rest[0]):
            rest = rest[1:]
        rest = [r for r in rest if not _is_list(r, "export")]
        lo, hi = self.parse_limits(f, rest)
        self.memory = ast.Memory(lo, hi)

    def parse_table(self, f):
        if self.table is not None:
            _err(f, "at most one table is allowed")
        rest = f.items[1:]
        if rest and _is_name(rest[0]):
            rest = rest[1:]
        if rest and isinstance(rest[0], Atom) and rest[0].text == "funcref" and len(rest) == 2 and _is_list(rest[1], "elem"):
            funcs = tuple(self.func_ref(x) for x in rest[1].items[1:])
            self.table = ast.Table(len(funcs), len(funcs))
            self.elems.append(ast.Elem(0, funcs))
            return
        if not rest or not isinstance(rest[-1], Atom) or rest[-1].text != "funcref":
            _err(f, "expected (table min max? funcref)")
        lo, hi = self.parse_limits(f, rest[:-1])
        self.table = ast.Table(lo, hi)

    def _offset(self, node):
        if _is_list(node, "offset"):
            if len(node.items) != 2:
                _err(node, "expected (offset (i32.const n))")
            node = node.items[1]
        return self.const_expr(node, I32).value

    def parse_elem(self, f):
        rest = f.items[1:]
        if rest and _is_name(rest[0]):
            rest = rest[1:]
        if not rest:
            _err(f, "expected (elem (i32.const n) func*)")
        offset = self._offset(rest[0])
        refs = rest[1:]
        if refs and isinstance(refs[0], Atom) and refs[0].text == "func":
            refs = refs[1:]
        self.elems.append(ast.Elem(offset, tuple(self.func_ref(x) for x in refs)))

    def parse_data(self, f):
        rest = f.items[1:]
        if rest and _is_name(rest[0]):
            rest = rest[1:]
        if rest and _is_list(rest[0], "memory"):
            rest = rest[1:]
        if not rest:
            _err(f, 'expected (data (i32.const n) "bytes"*)')
        offset = self._offset(rest[0])
        data = b""
        for s in rest[1:]:
            if not isinstance(s, String):
                _err(s, "expected a string in data segment")
            data += s.data
        self.datas.append(ast.Data(offset, data))


class _FuncContext:
    def __init__(self, mod: _ModuleParser, local_names: dict, nlocals: int):
        self.mod = mod
        self.local_names = local_names
        self.nlocals = nlocals
        self.labels: list = []  # innermost last; entries are names or None

    def label_ref(self, node) -> int:
        if _is_name(node):
            for depth, name in enumerate(reversed(self.labels)):
                if name == node.text:
                    return depth
            _err(node, f"unknown label {node.text}")
        if not isinstance(node, Atom):
            _err(node, "expected a label")
        return parse_int(node.text, node)

    def parse_seq(self, items, i, terminators):
        """Parse instructions from ``items[i:]`` until the end or a flat terminator atom."""
        out = []
        while i < len(items):
            node = items[i]
            if isinstance(node, SList):
                out.extend(self.parse_folded(node))
                i += 1
                continue
            if isinstance(node, String):
                _err(node, "unexpected string in instruction sequence")
            if node.text in terminators:
                return out, i
            if node.text in ("end", "else", "then"):
                _err(node, f"unexpected '{node.text}'")
            instr, i = self.parse_flat(items, i)
            out.append(instr)
        if terminators:
            where = items[-1] if items else None
            _err(where, f"missing '{terminators[-1]}'")
        return out

    def _label_name(self, items, i):
        if i < len(items) and _is_name(items[i]):
            return items[i].text, i + 1
        return None, i

    def _skip_end_label(self, items, i, name):
        if i < len(items) and _is_name(items[i]):
            if items[i].text != name:
                _err(items[i], "mismatched label after 'end'")
            return i + 1
        return i

    def parse_flat(self, items, i):
        node = items[i]
        op = node.text
        if op in ("block", "loop", "prompt"):
            name, i = self._label_name(items, i + 1)
            bt, i = self.mod.parse_block_type(items, i)
            self.labels.append(name)
            body, i = self.parse_seq(items, i, ("end",))
            self.labels.pop()
            i = self._skip_end_label(items, i + 1, name)
            return self._make_block(op, bt, body), i
        if op == "if":
            name, i = self._label_name(items, i + 1)
            bt, i = self.mod.parse_block_type(items, i)
            self.labels.append(name)
            then, i = self.parse_seq(items, i, ("else", "end"))
            else_ = []
            if items[i].text == "else":
                i = self._skip_end_label(items, i + 1, name)
                else_, i = self.parse_seq(items, i, ("end",))
            self.labels.pop()
            i = self._skip_end_label(items, i + 1, name)
            return ast.If(bt, tuple(then), tuple(else_)), i
        return self.parse_plain(items, i)

    def _make_block(self, op, bt, body):
        cls = {"block": ast.Block, "loop": ast.Loop, "prompt": ast.Prompt}[op]
        return cls(bt, tuple(body))

    def parse_folded(self, node: SList):
        op = node.head
        items = node.items
        if op is None:
            _err(node, "expected an instruction")
        if op in ("block", "loop", "prompt"):
            name, i = self._label_name(items, 1)
            bt, i = self.mod.parse_block_type(items, i)
            self.labels.append(name)
            body = self.parse_seq(items, i, ())
            self.labels.pop()
            return [self._make_block(op, bt, body)]
        if op == "if":
            name, i = self._label_name(items, 1)
            bt, i = self.mod.parse_block_type(items, i)
            cond = []
            while i < len(items) and not _is_list(items[i], "then"):
                if not isinstance(items[i], SList):
                    _err(items[i], "expected folded condition or (then ...)")
                cond.extend(self.parse_folded(items[i]))
                i += 1
            if i >= len(items):
                _err(node, "folded if requires (then ...)")
            self.labels.append(name)
            then = self.parse_seq(items[i].items, 1, ())
            else_ = []
            i += 1
            if i < len(items):
                if not _is_list(items[i], "else") or i != len(items) - 1:
                    _err(items[i], "expected (else ...) to close folded if")
                else_ = self.parse_seq(items[i].items, 1, ())
            self.labels.pop()
            return cond + [ast.If(bt, tuple(then), tuple(else_))]
        instr, i = self.parse_plain(items, 0)
        operands = []
        for rest in items[i:]:
            if not isinstance(rest, SList):
                _err(rest, f"unexpected immediate {rest!r} for {op}")
            operands.extend(self.parse_folded(rest))
        return operands + [instr]

    def _need(self, items, i, what):
        if i >= len(items) or not isinstance(items[i], Atom):
            _err(items[i - 1], f"{items[i - 1].text} expects {what}")
        return items[i]

    def parse_plain(self, items, i):
        node = items[i]
        op = node.text
        if op in NUMERIC_OPS:
            return ast.Numeric(op), i + 1
        if op.endswith(".const") and op[:-6] in VALTYPES:
            lit = self._need(items, i + 1, "a literal")
            return ast.Const(op[:-6], parse_const_value(op[:-6], lit.text, lit)), i + 2
        if op in _NO_IMMEDIATE:
            return _NO_IMMEDIATE[op](), i + 1
        if op in _INDEX_OPS:
            ref = self._need(items, i + 1, "an index")
            if op.startswith("local"):
                idx = self.mod.resolve(ref, self.local_names, "local", self.nlocals)
            else:
                idx = self.mod.resolve(ref, self.mod.global_names, "global", len(self.mod.globals))
            return _INDEX_OPS[op](idx), i + 2
        if op in LOAD_OPS or op in STORE_OPS:
            offset, align = 0, None
            i += 1
            while i < len(items) and isinstance(items[i], Atom) and "=" in items[i].text:
                key, _, val = items[i].text.partition("=")
                if key == "offset":
                    offset = parse_int(val, items[i])
                elif key == "align":
                    align = parse_int(val, items[i])
                else:
                    _err(items[i], f"unknown memory immediate {key!r}")
                i += 1
            cls = ast.Load if op in LOAD_OPS else ast.Store
            return cls(op, offset, align), i
        if op in ("br", "br_if"):
            ref = self._need(items, i + 1, "a label")
            cls = ast.Br if op == "br" else ast.BrIf
            return cls(self.label_ref(ref)), i + 2
        if op == "br_table":
            labels = []
            i += 1
            while i < len(items) and isinstance(items[i], Atom) and (
                    _is_name(items[i]) or re.fullmatch(r"[0-9_]+|0x[0-9a-fA-F_]+", items[i].text)):
                labels.append(self.label_ref(items[i]))
                i += 1
            if not labels:
                _err(node, "br_table expects at least one label")
            return ast.BrTable(tuple(labels[:-1]), labels[-1]), i
        if op == "call":
            ref = self._need(items, i + 1, "a function")
            return ast.Call(self.mod.func_ref(ref)), i + 2
        if op == "control":
            ref = self._need(items, i + 1, "a handler function")
            return ast.Control(self.mod.func_ref(ref)), i + 2
        if op == "call_indirect":
            i += 1
            if i < len(items) and isinstance(items[i], Atom) and not items[i].text.startswith(("$", "(")) \
                    and re.fullmatch(r"[0-9]+", items[i].text):
                i += 1  # table index; only table 0 exists
            tidx, _, i = self.mod.parse_typeuse(items, i, allow_names=False)
            return ast.CallIndirect(tidx), i
        if op in ("block", "loop", "if", "prompt", "end", "else", "then"):
            _err(node, f"misplaced '{op}'")
        _err(node, f"unknown instruction {op!r}")


def parse_module(text: str) -> ast.Module:
    """Parse a single ``(module ...)`` form (or a bare sequence of module fields)."""
    forms = read_all(text)
    if len(forms) == 1 and _is_list(forms[0], "module"):
        return module_from_sexpr(forms[0])
    if all(_is_list(f) and f.head != "module" for f in forms):
        return module_from_sexpr(SList([Atom("module", 1, 1)] + forms, 1, 1))
    bad = forms[1] if len(forms) > 1 else forms[0]
    _err(bad, "expected exactly one (module ...) form")


def module_from_sexpr(form: SList) -> ast.Module:
    return _ModuleParser(form).parse()


def _parse_invoke(node) -> ast.Invoke:
    if not _is_list(node, "invoke") or len(node.items) < 2 or not isinstance(node.items[1], String):
        _err(node, 'expected (invoke "name" arg*)')
    args = tuple(_const_value_form(a) for a in node.items[2:])
    return ast.Invoke(node.items[1].text, args)


def _const_value_form(node) -> ast.Const:
    if not _is_list(node) or not node.head or not node.head.endswith(".const") or len(node.items) != 2:
        _err(node, "expected a constant like (i64.const 1)")
    t = node.head[:-6]
    if t not in VALTYPES:
        _err(node, f"unknown value type {t!r}")
    return ast.Const(t, parse_const_value(t, node.items[1].text, node.items[1]))


def parse_script(text: str) -> ast.Script:
    directives = []
    for form in read_all(text):
        if not isinstance(form, SList) or form.head is None:
            _err(form, "expected a script directive")
        h = form.head
        if h == "module":
            directives.append(ast.ModuleDirective(module_from_sexpr(form), form.line))
        elif h == "assert_return":
            if len(form.items) < 2:
                _err(form, "assert_return expects an invoke")
            inv = _parse_invoke(form.items[1])
            expected = tuple(_const_value_form(e) for e in form.items[2:])
            directives.append(ast.AssertReturn(inv, expected, form.line))
        elif h == "assert_trap":
            if len(form.items) != 3 or not isinstance(form.items[2], String):
                _err(form, 'expected (assert_trap (invoke ...) "message")')
            directives.append(ast.AssertTrap(_parse_invoke(form.items[1]), form.items[2].text, form.line))
        elif h == "assert_invalid":
            if len(form.items) != 3 or not _is_list(form.items[1], "module") or not isinstance(form.items[2], String):
                _err(form, 'expected (assert_invalid (module ...) "message")')
            try:
                mod, perr = module_from_sexpr(form.items[1]), None
            except ParseError as exc:
                mod, perr = None, str(exc)
            directives.append(ast.AssertInvalid(mod, form.items[2].text, form.line, perr))
        elif h == "invoke":
            directives.append(ast.InvokeDirective(_parse_invoke(form), form.line))
        else:
            _err(form, f"unknown directive {h!r}")
    return ast.Script(tuple(directives))
