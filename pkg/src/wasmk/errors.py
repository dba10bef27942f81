"""Exception types shared across the package."""


class TrapKind:
    TYPE_CONFUSION = "type-confusion"
    UNALLOCATED_CONTINUATION = "unallocated-continuation"
    ROOT_VIOLATION = "root-violation"
    HANDLER_RETURNED = "handler-returned"
    UNBALANCED_PROMPT = "unbalanced-prompt"
    RESOURCE_LIMIT = "resource-limit"
    UNREACHABLE = "unreachable"
    DIVIDE_BY_ZERO = "divide-by-zero"
    MEMORY_OUT_OF_BOUNDS = "memory-out-of-bounds"
    INTEGER_OVERFLOW = "integer-overflow"
    INVALID_CONVERSION = "invalid-conversion"
    INDIRECT_CALL_MISMATCH = "indirect-call-mismatch"
    UNDEFINED_ELEMENT = "undefined-element"
    HOST_ERROR = "host-error"

    ALL = (
        TYPE_CONFUSION, UNALLOCATED_CONTINUATION, ROOT_VIOLATION, HANDLER_RETURNED,
        UNBALANCED_PROMPT, RESOURCE_LIMIT, UNREACHABLE, DIVIDE_BY_ZERO,
        MEMORY_OUT_OF_BOUNDS, INTEGER_OVERFLOW, INVALID_CONVERSION,
        INDIRECT_CALL_MISMATCH, UNDEFINED_ELEMENT, HOST_ERROR,
    )


class Trap(Exception):
    """A WebAssembly trap.  ``str(trap)`` is ``"<kind>: <message>"``."""

    def __init__(self, kind: str, message: str = ""):
        self.kind = kind
        self.message = message or kind
        super().__init__(f"{kind}: {self.message}")


class ParseError(Exception):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        self.bare_message = message
        super().__init__(f"{line}:{column}: {message}" if line else message)


class ValidationError(Exception):
    """First validation failure in a module.

    ``rule`` names the typing rule that failed (``control``, ``prompt``,
    ``br``, ``type-mismatch`` ...); ``func`` and ``offset`` locate the
    instruction (function index including imports, instruction ordinal in
    pre-order within the body).
    """

    def __init__(self, rule: str, message: str, func=None, offset=None):
        self.rule = rule
        self.func = func
        self.offset = offset
        self.bare_message = message
        where = ""
        if func is not None:
            where = f" (func {func}" + (f", instr {offset})" if offset is not None else ")")
        super().__init__(f"[{rule}] {message}{where}")


class LinkError(Exception):
    """Raised by instantiation for missing or mistyped imports."""


class EmbeddingError(Exception):
    """Misuse of the embedding API (unknown export, wrong argument types...)."""
