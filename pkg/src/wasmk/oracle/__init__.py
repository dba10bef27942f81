"""Reference small-step semantics and configuration typing."""

from .machine import (DEFAULT_FUEL, Config, Decomposition, OracleContext, OutOfFuel,
                      PreservationError, Stuck, decompose, oracle_invoke, oracle_run,
                      oracle_step, plug, recompose)
from .terms import Frame, Hole, Label, PromptEnd, TrapTerm, show
from .typing import ANY, IllTyped, check_store, compatible, type_configuration, type_term

__all__ = [
    "DEFAULT_FUEL", "Config", "Decomposition", "OracleContext", "OutOfFuel", "PreservationError",
    "Stuck", "decompose", "oracle_invoke", "oracle_run", "oracle_step", "plug", "recompose",
    "Frame", "Hole", "Label", "PromptEnd", "TrapTerm", "show",
    "ANY", "IllTyped", "check_store", "compatible", "type_configuration", "type_term",
]
