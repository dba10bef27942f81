import random

import pytest

from wasmk.difftest import FAILING, HANDLERS, check_program, difftest, generate


def test_generation_is_deterministic():
    assert generate(random.Random("7-3")).text == generate(random.Random("7-3")).text


def test_small_run_passes():
    report = difftest(seed=3, count=40)
    assert report.ok, "\n".join(map(str, report.failures))
    assert report.steps > 0


def test_count_must_be_positive():
    with pytest.raises(ValueError):
        difftest(seed=1, count=0)


@pytest.mark.parametrize("template", FAILING)
def test_each_failing_template_traps_with_its_kind(template):
    seed = 0
    while True:
        prog = generate(random.Random(f"find-{template}-{seed}"), trap_rate=1.0)
        if prog.expected_trap == HANDLERS[template][1] and template in prog.templates:
            break
        seed += 1
    err, out, _ = check_program(prog)
    assert err is None, err
    assert out.kind == HANDLERS[template][1]


def test_divergence_is_reported(monkeypatch):
    import wasmk.difftest as dt
    monkeypatch.setitem(dt.HANDLERS, "restore", (dt.HANDLERS["restore"][0], "root-violation"))
    report = difftest(seed=5, count=30, trap_rate=0.0)
    assert not report.ok
    first = report.failures[0]
    assert "expected trap root-violation" in first.message and "(module" in first.program
