"""Integer and float operations checked against ctypes and struct."""

import ctypes
import math
import struct
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from wasmk.errors import Trap
from wasmk.numerics import NUMERIC_OPS, load, store

i32s = st.integers(min_value=-(2**31), max_value=2**31 - 1)
i64s = st.integers(min_value=-(2**63), max_value=2**63 - 1)

C_SIGNED = {"i32": ctypes.c_int32, "i64": ctypes.c_int64}
C_UNSIGNED = {"i32": ctypes.c_uint32, "i64": ctypes.c_uint64}
WIDTH = {"i32": 32, "i64": 64}


def op(name, *args):
    return NUMERIC_OPS[name][2](*args)


def s(t, x):
    return C_SIGNED[t](x).value


def u(t, x):
    return C_UNSIGNED[t](x).value


def ref_binop(t, name, a, b):
    n = WIDTH[t]
    k = u(t, b) % n
    table = {
        "add": lambda: s(t, a + b),
        "sub": lambda: s(t, a - b),
        "mul": lambda: s(t, a * b),
        "and": lambda: s(t, a & b),
        "or": lambda: s(t, a | b),
        "xor": lambda: s(t, a ^ b),
        "shl": lambda: s(t, u(t, a) << k),
        "shr_s": lambda: a >> k,
        "shr_u": lambda: s(t, u(t, a) >> k),
        "rotl": lambda: s(t, (u(t, a) << k) | (u(t, a) >> ((n - k) % n))),
        "rotr": lambda: s(t, (u(t, a) >> k) | (u(t, a) << ((n - k) % n))),
    }
    return table[name]()


@pytest.mark.parametrize("t,ints", [("i32", i32s), ("i64", i64s)])
@pytest.mark.parametrize("name", ["add", "sub", "mul", "and", "or", "xor", "shl", "shr_s",
                                  "shr_u", "rotl", "rotr"])
def test_integer_binops(t, ints, name):
    @given(ints, ints)
    def check(a, b):
        assert op(f"{t}.{name}", a, b) == ref_binop(t, name, a, b)
    check()


@given(i64s, i64s.filter(lambda b: b != 0))
def test_division_truncates_toward_zero(a, b):
    if a == -(2**63) and b == -1:
        with pytest.raises(Trap) as info:
            op("i64.div_s", a, b)
        assert info.value.kind == "integer-overflow"
        return
    q = math.trunc(Fraction(a, b))
    assert op("i64.div_s", a, b) == q
    assert op("i64.rem_s", a, b) == a - q * b
    assert u("i64", op("i64.div_u", a, b)) == u("i64", a) // u("i64", b)


@pytest.mark.parametrize("name", ["i32.div_s", "i32.div_u", "i64.rem_s", "i64.rem_u"])
def test_divide_by_zero_traps(name):
    with pytest.raises(Trap) as info:
        op(name, 1, 0)
    assert info.value.kind == "divide-by-zero"


@given(i64s)
def test_counting_ops(a):
    bits = format(u("i64", a), "064b")
    assert op("i64.popcnt", a) == bits.count("1")
    assert op("i64.clz", a) == len(bits) - len(bits.lstrip("0"))
    assert op("i64.ctz", a) == len(bits) - len(bits.rstrip("0"))


@given(i32s, i32s)
def test_unsigned_compare(a, b):
    assert op("i32.lt_u", a, b) == int(u("i32", a) < u("i32", b))
    assert op("i32.ge_s", a, b) == int(a >= b)


@given(i64s)
def test_wrap_and_extend(a):
    assert op("i32.wrap_i64", a) == s("i32", a)
    w = op("i32.wrap_i64", a)
    assert op("i64.extend_i32_u", w) == u("i32", w)
    assert op("i64.extend_i32_s", w) == w


def f32(x):
    return struct.unpack("<f", struct.pack("<f", x))[0]


@given(st.floats(width=32, allow_nan=False), st.floats(width=32, allow_nan=False))
def test_f32_arithmetic_rounds_to_single(a, b):
    for name, ref in [("add", a + b), ("sub", a - b), ("mul", a * b)]:
        got = op(f"f32.{name}", a, b)
        try:
            want = f32(ref)
        except OverflowError:
            want = math.copysign(math.inf, ref)
        if math.isnan(want):
            assert math.isnan(got)
        else:
            assert got == want


def test_float_special_cases():
    assert math.isnan(op("f64.div", 0.0, 0.0))
    assert op("f64.min", 0.0, -0.0) == 0.0 and math.copysign(1, op("f64.min", 0.0, -0.0)) == -1
    assert op("f64.nearest", 2.5) == 2.0
    assert op("f64.nearest", -0.5) == 0.0 and math.copysign(1, op("f64.nearest", -0.5)) == -1
    with pytest.raises(Trap) as info:
        op("i32.trunc_f64_s", float("nan"))
    assert info.value.kind == "invalid-conversion"
    with pytest.raises(Trap) as info:
        op("i32.trunc_f64_s", 2.0**31)
    assert info.value.kind == "integer-overflow"


@given(i64s)
def test_memory_store_load_round_trip(v):
    mem = bytearray(64)
    store(mem, "i64.store", 8, 4, v)
    assert load(mem, "i64.load", 8, 4) == v
    assert mem[12:20] == struct.pack("<q", v)
    assert load(mem, "i64.load8_u", 8, 4) == u("i64", v) & 0xFF


def test_out_of_bounds_access_traps():
    with pytest.raises(Trap) as info:
        load(bytearray(16), "i64.load", 12, 0)
    assert info.value.kind == "memory-out-of-bounds"
