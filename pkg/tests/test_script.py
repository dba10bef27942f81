from wasmk.script import run_script, same_value
from wasmk.syntax.ast import Const

QUAD2 = """(module
  (func $h (param $k i64) (param $v i64)
    (restore (local.get $k) (i64.add (local.get $v) (local.get $v))))
  (func (export "quadruple2") (param i64) (result i64)
    (i64.add (control $h (local.get 0)) (control $h (local.get 0))))
  (func (export "oops") (unreachable)))
"""


def test_passing_script():
    report = run_script(QUAD2 + """
      (assert_return (invoke "quadruple2" (i64.const 5)) (i64.const 20))
      (assert_trap (invoke "oops") "unreachable")
      (invoke "quadruple2" (i64.const 1))
      (assert_invalid (module (func (result i64) (prompt (result i64) (return (i64.const 1))))) "prompt")""")
    assert report.ok, report.failures
    assert report.passed == 3


def test_wrong_expectation_reports_what_was_computed():
    report = run_script(QUAD2 + '(assert_return (invoke "quadruple2" (i64.const 5)) (i64.const 21))')
    assert not report.ok
    assert "got i64.const 20" in str(report.failures[0])


def test_assert_invalid_on_valid_module_fails():
    report = run_script('(assert_invalid (module (func)) "type-mismatch")')
    assert "validates" in str(report.failures[0])


def test_wrong_trap_kind_fails():
    report = run_script(QUAD2 + '(assert_trap (invoke "oops") "root-violation")')
    assert "got trap unreachable" in str(report.failures[0])


def test_invoke_before_module_fails():
    assert not run_script('(invoke "f")').ok


def test_same_value_is_bitwise_for_floats():
    nan = float("nan")
    assert same_value(Const("f64", nan), Const("f64", nan))
    assert not same_value(Const("f64", 0.0), Const("f64", -0.0))
    assert not same_value(Const("i32", 1), Const("i64", 1))
