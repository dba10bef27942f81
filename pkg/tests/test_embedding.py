import io

import pytest

from wasmk.embedding import (HostRegistry, host_call_in, load_program, parse_arg,
                             register_host_function, standard_imports)
from wasmk.errors import EmbeddingError, LinkError
from wasmk.syntax.ast import Const, FuncType

I64_TO_I64 = FuncType(("i64",), ("i64",))


def test_registry_rules():
    reg = HostRegistry()
    register_host_function(reg, "env.f", I64_TO_I64, lambda caller, args: args)
    with pytest.raises(EmbeddingError):
        reg.register("env.f", I64_TO_I64, lambda caller, args: args)
    with pytest.raises(EmbeddingError):
        reg.register("nodot", I64_TO_I64, lambda caller, args: args)
    reg.resolve()
    with pytest.raises(EmbeddingError):
        reg.register("env.g", I64_TO_I64, lambda caller, args: args)
    assert reg.names() == ["env.f"]


def test_standard_imports_write_text():
    out = io.StringIO()
    reg = standard_imports(out)
    reg["env.print_i64"].fn(None, [Const("i64", -12)])
    reg["env.print_char"].fn(None, [Const("i32", 10)])
    assert out.getvalue() == "-12\n"


WAT = """(module
  (import "env" "host" (func $host (param i64) (result i64)))
  (func $h (param $k i64) (param $v i64) (restore (local.get $k) (local.get $v)))
  (func (export "inner") (param i64) (result i64)
    (i64.mul (control $h (local.get 0)) (i64.const 3)))
  (func (export "boom") (param i64) (result i64) (unreachable))
  (func (export "main") (param i64) (result i64)
    (i64.add (control $h (i64.const 1)) (call $host (local.get 0)))))"""


def program(behavior):
    reg = HostRegistry().register("env.host", I64_TO_I64, behavior)
    return load_program(WAT, registry=reg)


@pytest.mark.parametrize("engine", ["fast", "oracle"])
def test_host_reenters_the_module(engine):
    depths = []

    def host(caller, args):
        inst = caller.store.instances[caller.instance]
        depths.append(len(inst.pstack))
        inner = caller.invoke("inner", [args[0]])
        failed = caller.invoke("boom", [args[0]])
        depths.append(len(inst.pstack))
        assert failed.kind == "unreachable"
        return [Const("i64", inner.values[0].value + 1)]

    prog = program(host)
    out = prog.call("main", [4], engine=engine)
    assert [v.value for v in out.values] == [1 + 4 * 3 + 1]
    # the reentrant calls push and pop their own prompts
    assert depths[0] == depths[1] >= 1
    assert prog.inst.pstack == []


@pytest.mark.parametrize("behavior", [
    lambda caller, args: 1 / 0,
    lambda caller, args: [Const("i32", 1)],
    lambda caller, args: [],
])
@pytest.mark.parametrize("engine", ["fast", "oracle"])
def test_host_failures_become_traps(behavior, engine):
    out = program(behavior).call("main", [1], engine=engine)
    assert out.kind == "host-error"


def test_missing_import_is_a_link_error():
    with pytest.raises(LinkError):
        load_program('(module (import "env" "nothing" (func)))')


def test_bad_api_calls():
    prog = program(lambda caller, args: args)
    with pytest.raises(EmbeddingError):
        prog.call("nope")
    with pytest.raises(EmbeddingError):
        prog.call("main", [1, 2])
    with pytest.raises(EmbeddingError):
        prog.call("main", [Const("i32", 1)])
    with pytest.raises(EmbeddingError):
        host_call_in(prog.store, prog.instance, "main", [1], engine="jit")


@pytest.mark.parametrize("text,t,expected", [
    ("i64:5", None, Const("i64", 5)),
    ("7", "i32", Const("i32", 7)),
    ("f64:0.5", None, Const("f64", 0.5)),
    ("i32:0xffffffff", None, Const("i32", -1)),
])
def test_parse_arg(text, t, expected):
    assert parse_arg(text, t) == expected


@pytest.mark.parametrize("text", ["5", "i8:1", "i32:x"])
def test_parse_arg_errors(text):
    with pytest.raises(EmbeddingError):
        parse_arg(text)
