"""WebAssembly interpreter with first-class delimited continuations."""

__version__ = "0.1.0"

# The parser uses numerics, which uses syntax.ast.  Loading the syntax
# package first makes that cycle resolve the same way for every entry point.
from . import syntax  # noqa: E402,F401
