"""Semantics of the stack-only numeric instructions.

Integers are kept in signed canonical form (``i64.const -5`` holds ``-5``).
Floats are Python floats; ``f32`` results are rounded to single precision.
Every NaN produced by arithmetic is replaced by the positive quiet NaN so
that two engines can be compared bit for bit.
"""

import ctypes
import math
import struct

from .errors import Trap, TrapKind
from .syntax.ast import F32, F64, I32, I64

BITS = {I32: 32, I64: 64, F32: 32, F64: 64}
CANONICAL_NAN = float("nan")


def wrap(t: str, x: int) -> int:
    n = BITS[t]
    x &= (1 << n) - 1
    return x - (1 << n) if x >> (n - 1) else x


def unsigned(t: str, x: int) -> int:
    return x & ((1 << BITS[t]) - 1)


def round_f32(x: float) -> float:
    if math.isnan(x):
        return x
    return ctypes.c_float(x).value


def canon(t: str, x: float) -> float:
    if math.isnan(x):
        return CANONICAL_NAN
    return round_f32(x) if t == F32 else x


def float_bits(t: str, x: float) -> int:
    if t == F32:
        return struct.unpack("<I", struct.pack("<f", x))[0]
    return struct.unpack("<Q", struct.pack("<d", x))[0]


def bits_float(t: str, b: int) -> float:
    if t == F32:
        return struct.unpack("<f", struct.pack("<I", b & 0xFFFFFFFF))[0]
    return struct.unpack("<d", struct.pack("<Q", b & 0xFFFFFFFFFFFFFFFF))[0]


def default_value(t: str):
    return 0 if t in (I32, I64) else 0.0


# -- integer operations -------------------------------------------------------

def _int_binops(t):
    n = BITS[t]
    u = lambda x: unsigned(t, x)
    w = lambda x: wrap(t, x)

    def div_s(a, b):
        if b == 0:
            raise Trap(TrapKind.DIVIDE_BY_ZERO, "integer divide by zero")
        if a == -(1 << (n - 1)) and b == -1:
            raise Trap(TrapKind.INTEGER_OVERFLOW, "integer overflow")
        q = abs(a) // abs(b)
        return q if (a < 0) == (b < 0) else -q

    def div_u(a, b):
        if b == 0:
            raise Trap(TrapKind.DIVIDE_BY_ZERO, "integer divide by zero")
        return w(u(a) // u(b))

    def rem_s(a, b):
        if b == 0:
            raise Trap(TrapKind.DIVIDE_BY_ZERO, "integer divide by zero")
        r = abs(a) % abs(b)
        return -r if a < 0 else r

    def rem_u(a, b):
        if b == 0:
            raise Trap(TrapKind.DIVIDE_BY_ZERO, "integer divide by zero")
        return w(u(a) % u(b))

    def rotl(a, b):
        k = b % n
        x = u(a)
        return w((x << k) | (x >> (n - k)))

    def rotr(a, b):
        k = b % n
        x = u(a)
        return w((x >> k) | (x << (n - k)))

    return {
        "add": lambda a, b: w(a + b),
        "sub": lambda a, b: w(a - b),
        "mul": lambda a, b: w(a * b),
        "div_s": div_s,
        "div_u": div_u,
        "rem_s": rem_s,
        "rem_u": rem_u,
        "and": lambda a, b: w(a & b),
        "or": lambda a, b: w(a | b),
        "xor": lambda a, b: w(a ^ b),
        "shl": lambda a, b: w(a << (b % n)),
        "shr_s": lambda a, b: a >> (b % n),
        "shr_u": lambda a, b: w(u(a) >> (b % n)),
        "rotl": rotl,
        "rotr": rotr,
    }


def _int_relops(t):
    u = lambda x: unsigned(t, x)
    return {
        "eq": lambda a, b: int(a == b),
        "ne": lambda a, b: int(a != b),
        "lt_s": lambda a, b: int(a < b),
        "lt_u": lambda a, b: int(u(a) < u(b)),
        "gt_s": lambda a, b: int(a > b),
        "gt_u": lambda a, b: int(u(a) > u(b)),
        "le_s": lambda a, b: int(a <= b),
        "le_u": lambda a, b: int(u(a) <= u(b)),
        "ge_s": lambda a, b: int(a >= b),
        "ge_u": lambda a, b: int(u(a) >= u(b)),
    }


def _int_unops(t):
    n = BITS[t]

    def ctz(a):
        x = unsigned(t, a)
        return n if x == 0 else (x & -x).bit_length() - 1

    ops = {
        "clz": lambda a: n - unsigned(t, a).bit_length(),
        "ctz": ctz,
        "popcnt": lambda a: bin(unsigned(t, a)).count("1"),
        "extend8_s": lambda a: wrap(t, _sext(a, 8)),
        "extend16_s": lambda a: wrap(t, _sext(a, 16)),
    }
    if t == I64:
        ops["extend32_s"] = lambda a: _sext(a, 32)
    return ops


def _sext(a: int, bits: int) -> int:
    a &= (1 << bits) - 1
    return a - (1 << bits) if a >> (bits - 1) else a


# -- float operations ---------------------------------------------------------

def _fmin(a, b):
    if math.isnan(a) or math.isnan(b):
        return CANONICAL_NAN
    if a == b == 0.0:
        return a if math.copysign(1.0, a) < 0 else b
    return min(a, b)


def _fmax(a, b):
    if math.isnan(a) or math.isnan(b):
        return CANONICAL_NAN
    if a == b == 0.0:
        return b if math.copysign(1.0, a) < 0 else a
    return max(a, b)


def _fdiv(a, b):
    if b == 0.0:
        if a == 0.0 or math.isnan(a):
            return CANONICAL_NAN
        sign = math.copysign(1.0, a) * math.copysign(1.0, b)
        return math.copysign(math.inf, sign)
    return a / b


def _fmul(a, b):
    try:
        return a * b
    except OverflowError:  # pragma: no cover - floats saturate in CPython
        return math.copysign(math.inf, a * b)


def _nearest(a):
    if math.isnan(a) or math.isinf(a) or a == 0.0:
        return a
    r = float(round(a))
    return math.copysign(r, a) if r == 0.0 else r


def _ftrunc(a):
    if math.isnan(a) or math.isinf(a):
        return a
    return math.copysign(float(math.trunc(a)), a)


def _fceil(a):
    if math.isnan(a) or math.isinf(a):
        return a
    return math.copysign(float(math.ceil(a)), a)


def _ffloor(a):
    if math.isnan(a) or math.isinf(a):
        return a
    return math.copysign(float(math.floor(a)), a)


def _fsqrt(a):
    if math.isnan(a) or a < 0:
        return CANONICAL_NAN
    return math.sqrt(a)


_FLOAT_BINOPS = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": _fmul,
    "div": _fdiv,
    "min": _fmin,
    "max": _fmax,
    "copysign": math.copysign,
}

_FLOAT_UNOPS = {
    "abs": abs,
    "neg": lambda a: -a,
    "sqrt": _fsqrt,
    "ceil": _fceil,
    "floor": _ffloor,
    "trunc": _ftrunc,
    "nearest": _nearest,
}

_FLOAT_RELOPS = {
    "eq": lambda a, b: int(a == b),
    "ne": lambda a, b: int(a != b),
    "lt": lambda a, b: int(a < b),
    "gt": lambda a, b: int(a > b),
    "le": lambda a, b: int(a <= b),
    "ge": lambda a, b: int(a >= b),
}


# -- conversions ----------------------------------------------------------------

def _trunc_to(t: str, signed: bool):
    n = BITS[t]

    def conv(a):
        if math.isnan(a):
            raise Trap(TrapKind.INVALID_CONVERSION, "invalid conversion to integer")
        if math.isinf(a):
            raise Trap(TrapKind.INTEGER_OVERFLOW, "integer overflow")
        x = math.trunc(a)
        lo, hi = (-(1 << (n - 1)), (1 << (n - 1)) - 1) if signed else (0, (1 << n) - 1)
        if not lo <= x <= hi:
            raise Trap(TrapKind.INTEGER_OVERFLOW, "integer overflow")
        return wrap(t, x)

    return conv


def _convert_from(src: str, signed: bool, dst: str):
    def conv(a):
        x = a if signed else unsigned(src, a)
        return canon(dst, float(x))

    return conv


def _build():
    ops = {}
    for t in (I32, I64):
        for name, fn in _int_binops(t).items():
            ops[f"{t}.{name}"] = ((t, t), t, fn)
        for name, fn in _int_relops(t).items():
            ops[f"{t}.{name}"] = ((t, t), I32, fn)
        for name, fn in _int_unops(t).items():
            ops[f"{t}.{name}"] = ((t,), t, fn)
        ops[f"{t}.eqz"] = ((t,), I32, lambda a: int(a == 0))
    for t in (F32, F64):
        for name, fn in _FLOAT_BINOPS.items():
            ops[f"{t}.{name}"] = ((t, t), t, (lambda f, t: lambda a, b: canon(t, f(a, b)))(fn, t))
        for name, fn in _FLOAT_UNOPS.items():
            ops[f"{t}.{name}"] = ((t,), t, (lambda f, t: lambda a: canon(t, f(a)))(fn, t))
        for name, fn in _FLOAT_RELOPS.items():
            ops[f"{t}.{name}"] = ((t, t), I32, fn)

    ops["i32.wrap_i64"] = ((I64,), I32, lambda a: wrap(I32, a))
    ops["i64.extend_i32_s"] = ((I32,), I64, lambda a: a)
    ops["i64.extend_i32_u"] = ((I32,), I64, lambda a: unsigned(I32, a))
    for it in (I32, I64):
        for ft in (F32, F64):
            for sx in ("s", "u"):
                ops[f"{it}.trunc_{ft}_{sx}"] = ((ft,), it, _trunc_to(it, sx == "s"))
                ops[f"{ft}.convert_{it}_{sx}"] = ((it,), ft, _convert_from(it, sx == "s", ft))
    ops["f32.demote_f64"] = ((F64,), F32, lambda a: canon(F32, a))
    ops["f64.promote_f32"] = ((F32,), F64, lambda a: canon(F64, a))
    ops["i32.reinterpret_f32"] = ((F32,), I32, lambda a: wrap(I32, float_bits(F32, a)))
    ops["i64.reinterpret_f64"] = ((F64,), I64, lambda a: wrap(I64, float_bits(F64, a)))
    ops["f32.reinterpret_i32"] = ((I32,), F32, lambda a: bits_float(F32, a))
    ops["f64.reinterpret_i64"] = ((I64,), F64, lambda a: bits_float(F64, a))
    return ops


# keyword -> (param types, result type, implementation)
NUMERIC_OPS = _build()


# -- memory access ----------------------------------------------------------------

# keyword -> (value type, width in bytes, signed)
LOAD_OPS = {
    "i32.load": (I32, 4, True), "i64.load": (I64, 8, True),
    "f32.load": (F32, 4, None), "f64.load": (F64, 8, None),
    "i32.load8_s": (I32, 1, True), "i32.load8_u": (I32, 1, False),
    "i32.load16_s": (I32, 2, True), "i32.load16_u": (I32, 2, False),
    "i64.load8_s": (I64, 1, True), "i64.load8_u": (I64, 1, False),
    "i64.load16_s": (I64, 2, True), "i64.load16_u": (I64, 2, False),
    "i64.load32_s": (I64, 4, True), "i64.load32_u": (I64, 4, False),
}

STORE_OPS = {
    "i32.store": (I32, 4), "i64.store": (I64, 8),
    "f32.store": (F32, 4), "f64.store": (F64, 8),
    "i32.store8": (I32, 1), "i32.store16": (I32, 2),
    "i64.store8": (I64, 1), "i64.store16": (I64, 2), "i64.store32": (I64, 4),
}

PAGE_SIZE = 65536
MAX_PAGES = 65536


def load(mem: bytearray, op: str, addr: int, offset: int):
    t, width, signed = LOAD_OPS[op]
    ea = unsigned(I32, addr) + offset
    if ea + width > len(mem):
        raise Trap(TrapKind.MEMORY_OUT_OF_BOUNDS, "out of bounds memory access")
    raw = bytes(mem[ea:ea + width])
    if t in (F32, F64):
        return bits_float(t, int.from_bytes(raw, "little"))
    return wrap(t, int.from_bytes(raw, "little", signed=bool(signed)))


def store(mem: bytearray, op: str, addr: int, offset: int, value) -> None:
    t, width = STORE_OPS[op]
    ea = unsigned(I32, addr) + offset
    if ea + width > len(mem):
        raise Trap(TrapKind.MEMORY_OUT_OF_BOUNDS, "out of bounds memory access")
    bits = float_bits(t, value) if t in (F32, F64) else value
    mem[ea:ea + width] = (bits & ((1 << (8 * width)) - 1)).to_bytes(width, "little")
