"""Abstract syntax for modules in the extended text format.

Value types are the plain strings ``"i32"``, ``"i64"``, ``"f32"`` and
``"f64"``.  Continuation IDs are ordinary ``i64`` values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

I32, I64, F32, F64 = "i32", "i64", "f32", "f64"
VALTYPES = (I32, I64, F32, F64)


@dataclass(frozen=True)
class FuncType:
    params: tuple = ()
    results: tuple = ()

    def __post_init__(self):
        if len(self.results) > 1:
            raise ValueError("multi-value results are not supported")

    def __str__(self):
        return f"[{' '.join(self.params)}] -> [{' '.join(self.results)}]"


HANDLER_TYPE = FuncType((I64, I64), ())


# -- instructions -----------------------------------------------------------

class Instr:
    """Base class of every instruction variant (including administrative ones)."""

    __slots__ = ()


@dataclass(frozen=True)
class Const(Instr):
    """A typed constant.  Doubles as the runtime value representation."""

    type: str
    value: Union[int, float]

    def __repr__(self):
        return f"{self.type}.const {self.value}"

    def __eq__(self, other):
        # Bitwise equality so NaNs compare equal to themselves.
        if not isinstance(other, Const):
            return NotImplemented
        if other.type != self.type:
            return False
        if isinstance(self.value, float):
            from ..numerics import float_bits
            return float_bits(self.type, self.value) == float_bits(self.type, other.value)
        return self.value == other.value

    def __hash__(self):
        return hash((self.type, repr(self.value)))


@dataclass(frozen=True)
class Numeric(Instr):
    """Any stack-only numeric instruction, identified by its keyword (``i64.add``)."""

    op: str


@dataclass(frozen=True)
class LocalGet(Instr):
    index: int


@dataclass(frozen=True)
class LocalSet(Instr):
    index: int


@dataclass(frozen=True)
class LocalTee(Instr):
    index: int


@dataclass(frozen=True)
class GlobalGet(Instr):
    index: int


@dataclass(frozen=True)
class GlobalSet(Instr):
    index: int


@dataclass(frozen=True)
class Load(Instr):
    op: str
    offset: int = 0
    align: Optional[int] = None


@dataclass(frozen=True)
class Store(Instr):
    op: str
    offset: int = 0
    align: Optional[int] = None


@dataclass(frozen=True)
class MemorySize(Instr):
    pass


@dataclass(frozen=True)
class MemoryGrow(Instr):
    pass


@dataclass(frozen=True)
class Block(Instr):
    type: FuncType
    body: tuple


@dataclass(frozen=True)
class Loop(Instr):
    type: FuncType
    body: tuple


@dataclass(frozen=True)
class If(Instr):
    type: FuncType
    then: tuple
    else_: tuple = ()


@dataclass(frozen=True)
class Br(Instr):
    label: int


@dataclass(frozen=True)
class BrIf(Instr):
    label: int


@dataclass(frozen=True)
class BrTable(Instr):
    labels: tuple
    default: int


@dataclass(frozen=True)
class Call(Instr):
    func: int


@dataclass(frozen=True)
class CallIndirect(Instr):
    type: int


@dataclass(frozen=True)
class Return(Instr):
    pass


@dataclass(frozen=True)
class Drop(Instr):
    pass


@dataclass(frozen=True)
class Select(Instr):
    pass


@dataclass(frozen=True)
class Nop(Instr):
    pass


@dataclass(frozen=True)
class Unreachable(Instr):
    pass


@dataclass(frozen=True)
class Control(Instr):
    handler: int


@dataclass(frozen=True)
class Restore(Instr):
    pass


@dataclass(frozen=True)
class ContinuationCopy(Instr):
    pass


@dataclass(frozen=True)
class ContinuationDelete(Instr):
    pass


@dataclass(frozen=True)
class Prompt(Instr):
    type: FuncType
    body: tuple


# -- module -----------------------------------------------------------------

@dataclass(frozen=True)
class Import:
    module: str
    name: str
    type: FuncType


@dataclass(frozen=True)
class Func:
    type: int
    locals: tuple
    body: tuple
    name: Optional[str] = field(default=None, compare=False)


@dataclass(frozen=True)
class Global:
    type: str
    mutable: bool
    init: Const
    name: Optional[str] = field(default=None, compare=False)


@dataclass(frozen=True)
class Table:
    min: int
    max: Optional[int] = None


@dataclass(frozen=True)
class Elem:
    offset: int
    funcs: tuple


@dataclass(frozen=True)
class Memory:
    min: int
    max: Optional[int] = None


@dataclass(frozen=True)
class Data:
    offset: int
    data: bytes


@dataclass(frozen=True)
class Module:
    """A parsed module.

    Function indices count imports first, as in WebAssembly: function ``i``
    is ``imports[i]`` when ``i < len(imports)``, else ``funcs[i - len(imports)]``.
    """

    types: tuple = ()
    imports: tuple = ()
    funcs: tuple = ()
    globals: tuple = ()
    table: Optional[Table] = None
    elems: tuple = ()
    memory: Optional[Memory] = None
    datas: tuple = ()
    exports: tuple = ()  # (name, func index) pairs in source order
    start: Optional[int] = None

    def func_type(self, index: int) -> FuncType:
        if index < len(self.imports):
            return self.imports[index].type
        return self.types[self.funcs[index - len(self.imports)].type]

    @property
    def num_funcs(self) -> int:
        return len(self.imports) + len(self.funcs)

    def export_map(self) -> dict:
        return dict(self.exports)


# -- scripts ----------------------------------------------------------------

@dataclass(frozen=True)
class Invoke:
    name: str
    args: tuple


@dataclass(frozen=True)
class ModuleDirective:
    module: Module
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class AssertReturn:
    invoke: Invoke
    expected: tuple
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class AssertTrap:
    invoke: Invoke
    message: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class AssertInvalid:
    module: Optional[Module]
    message: str
    line: int = field(default=0, compare=False)
    # Modules that fail name resolution during parsing are kept as the error.
    parse_error: Optional[str] = field(default=None, compare=False)


@dataclass(frozen=True)
class InvokeDirective:
    invoke: Invoke
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Script:
    directives: tuple = ()
