"""Acceptance criteria, one test each.

Every test prints a single ``[PASS]``/``[FAIL]`` line, visible in normal
pytest output, and fails the usual way when the criterion is not met.
Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import ctypes
import random
import time
from collections import Counter
from fractions import Fraction

import pytest

from conftest import thread_schedule
from wasmk.cli import main as cli_main
from wasmk.corpus import ROOT, case_names, execute, load_case, validation_rule
from wasmk.difftest import difftest
from wasmk.embedding import ENGINES, load_program
from wasmk.runtime import Limits


@pytest.fixture
def report(capsys, request):
    """Call with (ok, detail); prints the criterion line and asserts ok."""
    title = request.node.function.__doc__.strip().splitlines()[0]

    def emit(ok, detail=""):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {title}" + (f": {detail}" if detail else ""))
        assert ok, detail
    return emit


def test_criterion_01_corpus_equivalence(report):
    """1. quadruple(x) = quadruple2(x) = 4x for 100 random i64 inputs, both engines, under 1 s"""
    rng = random.Random(20240601)
    xs = [rng.randint(-(2**63), 2**63 - 1) for _ in range(100)]
    progs = {n: load_program(load_case(n).source) for n in ("quadruple", "quadruple2")}
    start = time.perf_counter()
    bad = []
    for engine in ENGINES:
        for x in xs:
            a = progs["quadruple"].call("quadruple", [x], engine=engine)
            b = progs["quadruple2"].call("quadruple2", [x], engine=engine)
            want = ctypes.c_int64(4 * x).value
            if not (a.ok and b.ok and a.values[0].value == b.values[0].value == want):
                bad.append((engine, x))
    elapsed = time.perf_counter() - start
    report(not bad and elapsed < 1.0, f"{200 - len(bad)}/200 agree in {elapsed:.3f}s")


def test_criterion_02_green_threads(report, capsys):
    """2. green threads print AABB, exit 0, at least 2 yields, FIFO scheduling"""
    path = str(ROOT / "green_threads" / "main.wat")
    code = cli_main(["run", path, "--results", "none"])
    out = capsys.readouterr().out
    details = []
    ok = code == 0 and out == "A\nA\nB\nB\n"
    details.append(f"exit {code}, stdout {out!r}")
    for engine in ENGINES:
        prog, res = execute(load_case("green_threads"), engine)
        yields = prog.call("yield_count", engine=engine).values[0].value
        order = thread_schedule(prog)
        ok &= res.ok and yields >= 2 and order == ["T1", "T2", "T1", "T2"]
        details.append(f"{engine}: {yields} yields, resume order {' '.join(order)}")
    report(ok, "; ".join(details))


def test_criterion_03_generators(report):
    """3. generators print 0 through 9 and leave no live continuation after free"""
    ok, details = True, []
    for engine in ENGINES:
        prog, res = execute(load_case("generators"), engine)
        deletes = [e for e, _ in prog.events].count("delete")
        # the last event is the implicit prompt ending; its table is the one that must be empty
        last_live = prog.events[-1][1]["live"]
        ok &= (res.ok and prog.stdout == "0 1 2 3 4 5 6 7 8 9\n" and deletes == 1
               and last_live == 0 and prog.live_entries() == 0)
        details.append(f"{engine}: {prog.stdout.strip()!r}, {deletes} delete, {last_live} live at prompt end")
    report(ok, "; ".join(details))


def test_criterion_04_probabilistic_pmf(report):
    """4. prob_sum_d6 matches brute-force enumeration of 36 outcomes, with 36 collections"""
    counts = Counter(a + b for a in range(1, 7) for b in range(1, 7))
    total = sum(counts.values())
    want = {s: Fraction(c, total) for s, c in counts.items()}
    ok, details = True, []
    for engine in ENGINES:
        prog, res = execute(load_case("prob_sum_d6"), engine)
        got = {}
        for line in prog.stdout.splitlines():
            s, frac = line.split()
            got[int(s)] = Fraction(frac)
        collected = prog.call("result_count", engine=engine).values[0].value
        copies = [e for e, _ in prog.events].count("copy")
        ok &= res.ok and got == want and collected == 36
        details.append(f"{engine}: {len(got)} sums, {collected} collections, {copies} copies")
    report(ok, "; ".join(details))


TRAP_MATRIX = [
    ("double_restore", "unallocated-continuation"),
    ("restore_in_root", "root-violation"),
    ("restore_unallocated", "unallocated-continuation"),
    ("copy_root", "root-violation"),
    ("copy_nil", "unallocated-continuation"),
    ("delete_root", "root-violation"),
    ("double_delete", "unallocated-continuation"),
    ("handler_return", "handler-returned"),
    ("ctable_overflow", "resource-limit"),
    ("prompt_depth", "resource-limit"),
]


def test_criterion_05_trap_matrix(report):
    """5. each trap fixture ends in its exact trap kind under both engines"""
    wrong = []
    for name, kind in TRAP_MATRIX:
        case = load_case(name)
        kinds = {engine: execute(case, engine)[1].kind for engine in ENGINES}
        if set(kinds.values()) != {kind}:
            wrong.append(f"{name}: {kinds}")
    report(not wrong, "; ".join(wrong) or f"{len(TRAP_MATRIX)} fixtures, both engines agree")


def test_criterion_06_validator_rejections(report):
    """6. prompt-escaping br, return in prompt and a bad handler are rejected by rule"""
    expected = {"br_escape": "prompt", "prompt_return": "prompt", "bad_handler": "control"}
    got = {name: validation_rule(load_case(name).source) for name in expected}
    report(got == expected, ", ".join(f"{n} [{r}]" for n, r in got.items()))


def test_criterion_07_oracle_fidelity(report):
    """7. the oracle trace of fig8a shows its four reductions in order and ends in -5"""
    from test_oracle import FIG8B, in_order
    prog = load_program(load_case("fig8a").source)
    lines = []
    out = prog.call("main", engine="oracle", trace=lines.append)
    value = out.values[0].value if out.ok else None
    report(in_order(FIG8B, lines) and value == -5, f"{len(lines)} steps, result {value}")


def test_criterion_08_differential_and_preservation(report):
    """8. difftest seed 42 with 500 programs: engines agree, types preserved, under 60 s"""
    r = difftest(42, 500)
    report(r.ok and r.seconds < 60, r.summary())


class _Balance:
    """Wraps every host-to-module call and records the prompt depth around it."""

    def __init__(self, monkeypatch):
        import wasmk.embedding as emb
        self.calls = 0
        self.unbalanced = []
        real = emb.host_call_in

        def checked(store, instance, name, *args, **kwargs):
            before = len(store.instances[instance].pstack)
            try:
                return real(store, instance, name, *args, **kwargs)
            finally:
                self.calls += 1
                after = len(store.instances[instance].pstack)
                if after != before:
                    self.unbalanced.append((name, before, after))
        monkeypatch.setattr(emb, "host_call_in", checked)


LEAK = """(module
  (global $leaked (mut i64) (i64.const -1))
  (func $stash (param $k i64) (param $root i64)
    (global.set $leaked (local.get $k))
    (restore (local.get $root) (i64.const 0)))
  (func $h (param $k i64) (param $v i64)
    (drop (control $stash (local.get $k)))
    (restore (local.get $k) (i64.const 1)))
  ;; captures inside a prompt; the handler's own stack stays live in the
  ;; prompt's table and its ID escapes through a global
  (func (export "leak") (result i64)
    (prompt (result i64) (control $h (i64.const 0))))
  (func $resume_leaked (param $k i64) (param $root i64)
    (restore (global.get $leaked) (i64.const 2)))
  (func $use (param $k i64) (param $v i64)
    (restore (local.get $k) (control $resume_leaked (local.get $k))))
  ;; in a later call slot 1 of the new table is live as well, so the stale
  ;; ID would silently alias it unless IDs carry their prompt's epoch
  (func (export "reuse") (result i64)
    (control $use (i64.const 0))))
"""


def test_criterion_09_prompt_balance_and_ffi_safety(report, monkeypatch):
    """9. prompt depth is unchanged by every host call; leaked IDs never resume (epoch debug)"""
    bal = _Balance(monkeypatch)
    for name in case_names():
        case = load_case(name)
        if case.invalid is None:
            for engine in ENGINES:
                execute(case, engine)
    stale = {}
    for engine in ENGINES:
        for epoch_debug in (False, True):
            prog = load_program(LEAK, Limits(epoch_debug=epoch_debug))
            first = prog.call("leak", engine=engine)
            again = prog.call("reuse", engine=engine)
            stale[engine, epoch_debug] = (first.ok, again.kind)
    aliased = all(stale[e, False] == (True, None) for e in ENGINES)
    caught = {e: stale[e, True] for e in ENGINES}
    ok = bal.calls > 0 and not bal.unbalanced and aliased and all(
        v == (True, "unallocated-continuation") for v in caught.values())
    report(ok, f"{bal.calls} host calls balanced, {len(bal.unbalanced)} unbalanced; "
               f"leaked ID on reuse: {', '.join(f'{e} {k}' for e, (_, k) in caught.items())}"
               f" (aliases a live slot without epoch debug: {aliased})")


def test_criterion_10_resource_limit(report, capsys):
    """10. with --ctable-cap 4 the fifth simultaneous live capture traps with resource-limit"""
    path = str(ROOT / "ctable_overflow" / "main.wat")
    code = cli_main(["run", path, "--ctable-cap", "4"])
    err = capsys.readouterr().err
    ok = code == 1 and "resource-limit" in err
    details = [f"exit {code}"]
    for engine in ENGINES:
        prog, res = execute(load_case("ctable_overflow"), engine)
        live = max(info["live"] for e, info in prog.events if e == "control")
        done = prog.call("captures", engine=engine).values[0].value
        ok &= res.kind == "resource-limit" and live == 4 and done == 4
        details.append(f"{engine}: {done} captures live, fifth trapped with {res.kind}")
    report(ok, "; ".join(details))
