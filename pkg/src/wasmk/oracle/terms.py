"""Administrative terms of the reduction semantics and a term printer.

Configurations are tuples of instructions.  Values are ``Const``
instructions.  Blocks reduce to ``Label`` terms, calls to ``Frame`` terms
that carry their own locals, and failures to ``TrapTerm``.  ``Hole`` marks
the position where a captured context expects the value passed to restore.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..syntax import ast
from ..syntax.printer import format_instr


@dataclass(frozen=True)
class Label(ast.Instr):
    branch: tuple  # types carried by a branch to this label
    results: tuple  # types left when the body finishes normally
    cont: tuple  # instructions run after a branch (the loop itself, for loops)
    body: tuple

    def pretty(self):
        return f"label_{len(self.branch)}{{{show(self.cont)}}} {show(self.body)} end".replace("  ", " ")


@dataclass(frozen=True)
class Frame(ast.Instr):
    func: int
    locals: tuple  # Const values
    results: tuple
    body: tuple

    def pretty(self):
        locs = " ".join(repr(v) for v in self.locals)
        return f"frame_{len(self.results)}{{func {self.func}; {locs}}} {show(self.body)} end".replace("  ", " ")


@dataclass(frozen=True)
class TrapTerm(ast.Instr):
    kind: str
    message: str = ""

    def pretty(self):
        return f"trap({self.kind})"


@dataclass(frozen=True)
class PromptEnd(ast.Instr):
    def pretty(self):
        return "prompt_end"


@dataclass(frozen=True)
class Hole(ast.Instr):
    def pretty(self):
        return "[_]"


HOLE = Hole()
PROMPT_END = PromptEnd()


def is_value(ins) -> bool:
    return type(ins) is ast.Const


def show(seq) -> str:
    """Render an instruction sequence on one line, bodies included."""
    out = []
    for ins in seq:
        if isinstance(ins, (ast.Block, ast.Loop, ast.Prompt)):
            out.append(f"{format_instr(ins)} {show(ins.body)} end".replace("  ", " "))
        elif isinstance(ins, ast.If):
            s = f"{format_instr(ins)} {show(ins.then)}"
            if ins.else_:
                s += f" else {show(ins.else_)}"
            out.append(s + " end")
        else:
            out.append(format_instr(ins))
    return " ".join(x for x in out if x)
