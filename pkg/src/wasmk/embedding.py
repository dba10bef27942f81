"""Host functions and the host-to-module call boundary.

Every call from the host into a module goes through ``host_call_in``, which
runs the export under a fresh implicit prompt.  Continuations captured during
the call live in that prompt's table and die with it, so the host always sees
exactly one completion: values or a trap.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import EmbeddingError, ParseError
from .runtime import HostFunc, Limits, Outcome, Store, instantiate
from .syntax import parse_module
from .syntax.ast import I32, I64, VALTYPES, Const, FuncType
from .syntax.parser import parse_const_value
from .validator import validate_module

ENGINES = ("fast", "oracle")


class HostRegistry:
    """Named host functions ("module.item"), frozen once used for instantiation."""

    def __init__(self):
        self._funcs: dict = {}
        self.frozen = False

    def register(self, name: str, type_: FuncType, behavior: Callable) -> "HostRegistry":
        if self.frozen:
            raise EmbeddingError("registry is frozen after instantiation")
        if "." not in name:
            raise EmbeddingError(f"host function name {name!r} must look like module.item")
        if name in self._funcs:
            raise EmbeddingError(f"host function {name!r} is already registered")
        self._funcs[name] = HostFunc(type_, behavior, name)
        return self

    def __contains__(self, name):
        return name in self._funcs

    def __getitem__(self, name):
        return self._funcs[name]

    def names(self) -> list:
        return sorted(self._funcs)

    def resolve(self) -> dict:
        self.frozen = True
        return dict(self._funcs)


def register_host_function(registry: HostRegistry, name: str, type_: FuncType,
                           behavior: Callable) -> HostRegistry:
    return registry.register(name, type_, behavior)


def standard_imports(out, registry: Optional[HostRegistry] = None) -> HostRegistry:
    """env.print_i64 and env.print_char, writing text to ``out``."""
    registry = registry or HostRegistry()

    def print_i64(caller, args):
        out.write(str(args[0].value))

    def print_char(caller, args):
        out.write(chr(args[0].value & 0x10FFFF))

    registry.register("env.print_i64", FuncType((I64,), ()), print_i64)
    registry.register("env.print_char", FuncType((I32,), ()), print_char)
    return registry


def host_call_in(store: Store, instance: int, name: str, args=(), engine: str = "fast",
                 **options) -> Outcome:
    """Call export ``name`` from the host.

    ``engine`` selects the fast interpreter or the reference oracle; extra
    options go to that engine (``debug`` for the former; ``fuel``, ``trace``,
    ``check_preservation`` and ``exhaustive`` for the latter).
    """
    inst = store.instances[instance]
    depth = len(inst.pstack)
    if engine == "fast":
        from .interpreter import invoke
        out = invoke(store, instance, name, args, **options)
    elif engine == "oracle":
        from .oracle import oracle_invoke
        out = oracle_invoke(store, instance, name, args, **options)
    else:
        raise EmbeddingError(f"unknown engine {engine!r}")
    if len(inst.pstack) != depth:  # pragma: no cover - guarded by both engines
        raise AssertionError("prompt stack unbalanced after a host call")
    return out


@dataclass
class Program:
    """A parsed, validated and instantiated module with captured host output."""

    store: Store
    instance: int
    output: io.StringIO
    events: list = field(default_factory=list)

    @property
    def inst(self):
        return self.store.instances[self.instance]

    @property
    def stdout(self) -> str:
        return self.output.getvalue()

    def call(self, name: str, args=(), engine: str = "fast", **options) -> Outcome:
        return host_call_in(self.store, self.instance, name, args, engine, **options)

    def live_entries(self) -> int:
        return sum(pc.live for pc in self.inst.pstack)


def load_program(text, limits: Optional[Limits] = None,
                 registry: Optional[HostRegistry] = None, record_events: bool = False) -> Program:
    """Validate and instantiate ``text`` (WAT source or a parsed module) with
    the standard imports."""
    vm = validate_module(parse_module(text) if isinstance(text, str) else text)
    out = io.StringIO()
    registry = standard_imports(out, registry)
    store, i = instantiate(vm, registry.resolve(), limits)
    prog = Program(store, i, out)
    if record_events:
        store.instances[i].observer = lambda event, info: prog.events.append((event, info))
    return prog


def parse_arg(text: str, type_: Optional[str] = None) -> Const:
    """Parse an argument written ``i64:5`` (or a bare number given ``type_``)."""
    if ":" in text:
        t, _, raw = text.partition(":")
    else:
        t, raw = type_, text
    if t not in VALTYPES:
        raise EmbeddingError(f"argument {text!r} needs a type, as in i64:{text}")
    try:
        return Const(t, parse_const_value(t, raw))
    except ParseError as exc:
        raise EmbeddingError(f"bad argument {text!r}: {exc.bare_message}") from None
