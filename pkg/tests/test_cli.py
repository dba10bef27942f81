import subprocess
import sys

import pytest

from wasmk.cli import main
from wasmk.corpus import MASTER_SCRIPT, ROOT


def wat(name):
    return str(ROOT / name / "main.wat")


def test_validate(capsys):
    assert main(["validate", wat("quadruple2")]) == 0
    assert capsys.readouterr().out == "valid\n"


def test_validate_names_the_rule(capsys):
    assert main(["validate", wat("br_escape")]) == 1
    assert "[prompt]" in capsys.readouterr().err


def test_missing_file_is_an_io_error(capsys):
    assert main(["validate", "/nonexistent/x.wat"]) == 2
    assert main(["run", "/nonexistent/x.wat"]) == 2


def test_parse_error_is_reported(tmp_path, capsys):
    bad = tmp_path / "bad.wat"
    bad.write_text("(module (func (i32.const)")
    assert main(["validate", str(bad)]) == 1
    assert "parse error" in capsys.readouterr().err


def test_run_green_threads(capsys):
    assert main(["run", wat("green_threads")]) == 0
    cap = capsys.readouterr()
    assert cap.out == "A\nA\nB\nB\n"
    assert cap.err == "i32:0\n"


def test_run_with_args_and_results_on_stdout(capsys):
    assert main(["run", wat("quadruple"), "--invoke", "quadruple", "--arg", "i64:5",
                 "--results", "stdout"]) == 0
    assert capsys.readouterr().out == "i64:20\n"


def test_run_trap_exits_one_with_kind(capsys):
    assert main(["run", wat("double_restore")]) == 1
    assert "trap: unallocated-continuation" in capsys.readouterr().err


def test_run_oracle_trace(capsys):
    assert main(["run", wat("fig8a"), "--engine", "oracle", "--trace", "--check-preservation"]) == 0
    err = capsys.readouterr().err
    assert "step 5: numeric: i64.const 3 i64.const 4 i64.add" in err
    assert err.rstrip().endswith("i64:-5")


def test_trace_output_is_deterministic(capsys):
    main(["run", wat("generators"), "--engine", "oracle", "--trace"])
    first = capsys.readouterr()
    main(["run", wat("generators"), "--engine", "oracle", "--trace"])
    assert capsys.readouterr() == first


def test_limits_flags(capsys):
    assert main(["run", wat("ctable_overflow"), "--ctable-cap", "4"]) == 1
    assert "resource-limit" in capsys.readouterr().err
    assert main(["run", wat("prompt_depth"), "--prompt-depth", "16", "--engine", "oracle"]) == 1
    assert "resource-limit" in capsys.readouterr().err


def test_epoch_debug_flag(capsys):
    assert main(["run", wat("prob_sum_d6"), "--epoch-debug"]) == 0
    assert capsys.readouterr().out.startswith("2 1/36\n")


def test_default_entry_falls_back_to_start(tmp_path, capsys):
    f = tmp_path / "s.wat"
    f.write_text('(module (func (export "_start") (result i32) (i32.const 3)))')
    assert main(["run", str(f)]) == 0
    assert capsys.readouterr().err == "i32:3\n"
    f.write_text('(module (func (export "other")))')
    assert main(["run", str(f)]) == 2


@pytest.mark.parametrize("argv", [
    ["run", wat("fig8a"), "--trace"],
    ["run", wat("fig8a"), "--engine", "oracle", "--fuel", "0"],
    ["run", wat("quadruple"), "--invoke", "quadruple"],
    ["run", wat("quadruple"), "--invoke", "quadruple", "--arg", "x"],
    ["run", wat("quadruple"), "--invoke", "missing"],
    ["run", wat("fig8a"), "--ctable-cap", "0"],
    ["difftest", "--seed", "1", "--count", "0"],
    ["frobnicate"],
    [],
])
def test_usage_errors(argv, capsys):
    assert main(argv) == 2


def test_out_of_fuel_is_a_failure(capsys):
    assert main(["run", wat("generators"), "--engine", "oracle", "--fuel", "10"]) == 1
    assert "out-of-fuel" in capsys.readouterr().err


def test_script_command(tmp_path, capsys):
    assert main(["test", str(MASTER_SCRIPT)]) == 0
    assert "0 failed" in capsys.readouterr().out
    bad = tmp_path / "bad.wast"
    bad.write_text((ROOT / "quadruple2" / "main.wat").read_text()
                   + '(assert_return (invoke "quadruple2" (i64.const 5)) (i64.const 21))')
    assert main(["test", str(bad)]) == 1
    assert "got i64.const 20" in capsys.readouterr().out


def test_difftest_command(capsys):
    assert main(["difftest", "--seed", "2", "--count", "10"]) == 0
    assert "10 programs, pass" in capsys.readouterr().out


def test_color_can_be_disabled(monkeypatch):
    from wasmk.cli import paint

    class Tty:
        def isatty(self):
            return True

    assert paint("x", "red", Tty()) != "x"
    monkeypatch.setenv("WASMK_COLOR", "0")
    assert paint("x", "red", Tty()) == "x"


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "wasmk.cli", "run", wat("generators")],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout == "0 1 2 3 4 5 6 7 8 9\n"
