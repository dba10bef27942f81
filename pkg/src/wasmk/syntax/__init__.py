"""Text-format front end: AST, parser and printer."""

from .ast import *  # noqa: F401,F403
from .parser import parse_module, parse_script
from .printer import format_instr, print_module

__all__ = ["parse_module", "parse_script", "print_module", "format_instr"]
