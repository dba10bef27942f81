import random

import pytest
from hypothesis import given, settings, strategies as st

from wasmk.corpus import load_case
from wasmk.difftest import generate
from wasmk.embedding import load_program
from wasmk.oracle import (ANY, Config, IllTyped, OutOfFuel, compatible, decompose, oracle_step,
                          plug, recompose, type_configuration, type_term)
from wasmk.oracle.terms import HOLE, Label, show
from wasmk.runtime import prompt_trans
from wasmk.syntax import ast
from wasmk.syntax.ast import FuncType

FIG8A = load_case("fig8a")


FIG8B = [
    ("block", "block (result i64) i64.const 3 i64.const 4 i64.add br 0 end"),
    ("numeric", "i64.const 3 i64.const 4 i64.add"),
    ("br", "i64.const 7 br 0"),
    ("numeric", "i64.const 2 i64.const 7 i64.sub"),
]


def in_order(wanted, lines):
    """Whether every (rule, redex) of ``wanted`` occurs in ``lines`` in order."""
    it = iter(line.split(": ", 2)[1:] for line in lines)
    return all(any(got == [rule, redex] for got in it) for rule, redex in wanted)


def test_fig8a_trace_contains_the_user_visible_steps():
    prog = load_program(FIG8A.source)
    lines = []
    out = prog.call("main", engine="oracle", trace=lines.append)
    assert [v.value for v in out.values] == [-5]
    assert in_order(FIG8B, lines)
    assert not in_order(FIG8B[::-1], lines)
    assert all(line.startswith(f"step {n}: ") for n, line in enumerate(lines, 1))


def test_trace_is_deterministic():
    def trace():
        lines = []
        load_program(load_case("generators").source).call("main", engine="oracle", trace=lines.append)
        return lines
    assert trace() == trace()


def configurations(text, limit=400):
    """Every configuration reached while running ``main`` in the oracle."""
    prog = load_program(text)
    inst = prog.inst
    ft = inst.func_type(inst.export("main"))
    cfg = Config(prog.store, prog.instance,
                 (ast.Prompt(FuncType((), ft.results), (ast.Call(inst.export("main")),)),))
    seen = []
    try:
        while decompose(cfg.seq) is not None and len(seen) < limit:
            seen.append(cfg.seq)
            oracle_step(cfg, None)
    finally:
        inst.pstack.clear()
    return seen


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_decompose_recompose_identity(seed):
    for seq in configurations(generate(random.Random(seed)).text):
        d = decompose(seq)
        assert recompose(d.path, d.seq) == seq
        # cutting a hole at the redex and plugging it back is also the identity
        holed = recompose(d.path, d.seq[:d.pos] + (HOLE,) + d.seq[d.pos + 1:])
        assert plug(holed, d.seq[d.pos]) == seq


@pytest.mark.parametrize("name", ["quadruple2", "green_threads", "generators", "prob_sum_d6",
                                  "double_restore", "handler_return"])
def test_preservation_with_exhaustive_store_checks(name):
    case = load_case(name)
    prog = load_program(case.source)
    out = prog.call(case.entry, case.args, engine="oracle", check_preservation=True, exhaustive=True)
    assert (out.kind if not out.ok else None) == case.trap


def test_out_of_fuel():
    prog = load_program(load_case("generators").source)
    out = prog.call("main", engine="oracle", fuel=50)
    assert isinstance(out, OutOfFuel) and out.steps == 50
    assert prog.inst.pstack == []


def test_direct_typing_of_administrative_terms():
    prog = load_program("(module)")
    inst = prog.inst
    c = ast.Const
    label = Label(("i64",), ("i64",), (), (c("i64", 1), c("i64", 2), ast.Numeric("i64.add")))
    assert type_term(inst, (label,)) == ("i64",)
    assert type_term(inst, (c("i32", 0), ast.Unreachable())) is ANY
    with pytest.raises(IllTyped):
        type_term(inst, (c("i32", 1), ast.Numeric("i64.eqz")))
    with pytest.raises(IllTyped):
        type_term(inst, (HOLE,))


def test_configuration_type_follows_the_outermost_suspended_root():
    case = load_case("quadruple2")
    prog = load_program(case.source)
    seen = []

    def observe(event, info):
        if event == "control":
            pc = prog.inst.pstack[-1]
            seen.append(pc.entries[pc.root].type)

    prog.inst.observer = observe
    prog.call(case.entry, case.args, engine="oracle", check_preservation=True)
    assert seen and all(t == ("i64",) for t in seen)


def test_compatible():
    assert compatible(ANY, ("i32",)) and compatible(("i64",), ANY)
    assert not compatible(("i32",), ("i64",))


def test_type_configuration_without_roots_is_direct():
    prog = load_program("(module)")
    prompt_trans(prog.store, prog.instance)
    seq = (ast.Const("i32", 1),)
    assert type_configuration(prog.store, prog.instance, seq, exhaustive=True) == ("i32",)
    assert show(seq) == "i32.const 1"
