"""Execution tests shared by both engines (the ``engine`` fixture runs each twice)."""

import pytest

from conftest import run
from wasmk.interpreter import invoke
from wasmk.runtime import Limits


def values(out):
    assert out.ok, out
    return [v.value for v in out.values]


def test_loop_sum(engine):
    wat = """(module (func (export "main") (param $n i64) (result i64) (local $s i64)
      (block $done (loop $next
        (br_if $done (i64.eqz (local.get $n)))
        (local.set $s (i64.add (local.get $s) (local.get $n)))
        (local.set $n (i64.sub (local.get $n) (i64.const 1)))
        (br $next)))
      (local.get $s)))"""
    out, _ = run(wat, args=[10], engine=engine)
    assert values(out) == [55]


def test_br_table_and_if(engine):
    wat = """(module (func (export "main") (param i32) (result i32)
      (block $c (block $b (block $a (br_table $a $b $c (local.get 0)))
          (return (i32.const 10)))
        (return (if (result i32) (i32.const 0) (then (i32.const 1)) (else (i32.const 20)))))
      (i32.const 30)))"""
    assert [values(run(wat, args=[k], engine=engine)[0]) for k in (0, 1, 2, 7)] == [[10], [20], [30], [30]]


def test_recursion_globals_and_memory(engine):
    wat = """(module (memory 1) (global $calls (mut i32) (i32.const 0))
      (func $fib (param i32) (result i32)
        (global.set $calls (i32.add (global.get $calls) (i32.const 1)))
        (if (result i32) (i32.lt_s (local.get 0) (i32.const 2))
          (then (local.get 0))
          (else (i32.add (call $fib (i32.sub (local.get 0) (i32.const 1)))
                         (call $fib (i32.sub (local.get 0) (i32.const 2)))))))
      (func (export "main") (result i32)
        (i32.store offset=4 (i32.const 0) (call $fib (i32.const 10)))
        (i32.add (i32.load offset=4 (i32.const 0)) (global.get $calls))))"""
    assert values(run(wat, engine=engine)[0]) == [55 + 177]


def test_call_indirect(engine):
    wat = """(module (type $un (func (param i32) (result i32)))
      (table 2 funcref) (elem (i32.const 0) $inc $dbl)
      (func $inc (param i32) (result i32) (i32.add (local.get 0) (i32.const 1)))
      (func $dbl (param i32) (result i32) (i32.mul (local.get 0) (i32.const 2)))
      (func (export "main") (param i32) (result i32)
        (call_indirect (type $un) (i32.const 20) (local.get 0))))"""
    assert values(run(wat, args=[0], engine=engine)[0]) == [21]
    assert values(run(wat, args=[1], engine=engine)[0]) == [40]
    assert run(wat, args=[5], engine=engine)[0].kind == "undefined-element"


@pytest.mark.parametrize("body,kind", [
    ("(unreachable)", "unreachable"),
    ("(drop (i32.div_s (i32.const 1) (i32.const 0)))", "divide-by-zero"),
    ("(drop (i32.load (i32.const 65535)))", "memory-out-of-bounds"),
])
def test_ordinary_traps(engine, body, kind):
    out, prog = run(f'(module (memory 1) (func (export "main") {body}))', engine=engine)
    assert out.kind == kind
    assert prog.inst.pstack == []


def test_handler_value_flows_back_through_restore(engine):
    wat = """(module
      (func $h (param $k i64) (param $v i64)
        (restore (local.get $k) (i64.mul (local.get $v) (i64.const 4))))
      (func (export "main") (param i64) (result i64)
        (i64.add (i64.const 1) (control $h (local.get 0)))))"""
    assert values(run(wat, args=[5], engine=engine)[0]) == [21]


def test_capture_keeps_locals_and_blocks(engine):
    wat = """(module
      (func $h (param $k i64) (param $v i64) (restore (local.get $k) (local.get $v)))
      (func (export "main") (result i64) (local $x i64)
        (local.set $x (i64.const 100))
        (block $out (result i64)
          (loop $again
            (local.set $x (i64.add (local.get $x) (control $h (i64.const 1))))
            (br_if $again (i64.lt_s (local.get $x) (i64.const 103))))
          (local.get $x))))"""
    assert values(run(wat, engine=engine)[0]) == [103]


def test_prompt_delimits_capture(engine):
    # the handler sees only the prompt body; its table dies with the prompt
    wat = """(module
      (global $k (mut i64) (i64.const -1))
      (func $h (param $k i64) (param $v i64)
        (global.set $k (local.get $k))
        (restore (local.get $k) (i64.add (local.get $v) (i64.const 1))))
      (func (export "main") (result i64)
        (i64.add
          (prompt (result i64) (i64.mul (i64.const 10) (control $h (i64.const 4))))
          (global.get $k))))"""
    out, prog = run(wat, engine=engine)
    assert values(out) == [50]
    prompts = [e for e, _ in prog.events if e in ("prompt", "prompt_end")]
    assert prompts == ["prompt", "prompt", "prompt_end", "prompt_end"]


def test_copy_runs_a_continuation_twice(engine):
    wat = """(module
      (global $first (mut i32) (i32.const 1))
      (global $total (mut i64) (i64.const 0))
      (global $spare (mut i64) (i64.const 0))
      (func $fork (param $k i64) (param $v i64)
        (global.set $spare (continuation_copy (local.get $k)))
        (restore (local.get $k) (i64.const 1)))
      (func $body (param $k i64) (param $root i64)
        (global.set $total (i64.add (global.get $total) (control $fork (i64.const 0))))
        (if (global.get $first)
          (then (global.set $first (i32.const 0))
                (restore (global.get $spare) (i64.const 10))))
        (restore (local.get $root) (global.get $total)))
      (func (export "main") (result i64)
        (control $body (i64.const 0))))"""
    # the copy was taken after the old total (0) was pushed, so its run stores 0 + 10
    out, prog = run(wat, engine=engine)
    assert values(out) == [10]
    assert [e for e, _ in prog.events].count("copy") == 1


def test_nested_prompts_trap_unwinds_everything(engine):
    wat = """(module
      (func $bad (param i64 i64))
      (func (export "main") (result i64)
        (prompt (result i64) (prompt (result i64) (control $bad (i64.const 0))))))"""
    out, prog = run(wat, engine=engine)
    assert out.kind == "handler-returned"
    assert prog.inst.pstack == []


def test_handler_trap_inside_prompt_leaves_outer_state(engine):
    wat = """(module (func $bad (param i64 i64))
      (func (export "main") (result i64) (prompt (result i64) (control $bad (i64.const 0)))))"""
    prog_out, prog = run(wat, engine=engine)
    assert prog_out.kind == "handler-returned"
    # the store is still usable afterwards
    assert prog.call("main", engine=engine).kind == "handler-returned"


def test_deep_recursion_is_a_resource_limit(engine):
    wat = """(module (func $f (param i64) (result i64) (call $f (local.get 0)))
      (func (export "main") (result i64) (call $f (i64.const 0))))"""
    out, _ = run(wat, engine=engine, limits=Limits(call_depth=200))
    assert out.kind == "resource-limit"


def test_debug_mode_checks_operand_types():
    wat = """(module
      (func $h (param $k i64) (param $v i64) (restore (local.get $k) (local.get $v)))
      (func (export "main") (result i64)
        (i64.add (i64.const 1) (control $h (i64.const 2)))))"""
    out, prog = run(wat, debug=True)
    assert values(out) == [3]
    assert invoke(prog.store, prog.instance, "main", [], debug=True).ok
