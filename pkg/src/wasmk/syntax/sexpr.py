"""Tokenizer and reader for the s-expression surface syntax."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ParseError


@dataclass
class Atom:
    text: str
    line: int
    col: int

    def __repr__(self):
        return self.text


@dataclass
class String:
    data: bytes
    line: int
    col: int

    @property
    def text(self) -> str:
        return self.data.decode("utf-8", errors="replace")

    def __repr__(self):
        return repr(self.data)


@dataclass
class SList:
    items: list
    line: int
    col: int

    @property
    def head(self):
        if self.items and isinstance(self.items[0], Atom):
            return self.items[0].text
        return None

    def __repr__(self):
        return "(" + " ".join(map(repr, self.items)) + ")"


_ESCAPES = {"n": 10, "t": 9, "r": 13, '"': 34, "'": 39, "\\": 92}
_DELIMS = set('()";')


def read_all(text: str) -> list:
    """Read every top-level s-expression in ``text``."""
    reader = _Reader(text)
    out = []
    while True:
        reader.skip_space()
        if reader.at_end():
            return out
        out.append(reader.read())


class _Reader:
    def __init__(self, text: str):
        self.s = text
        self.i = 0
        self.line = 1
        self.col = 1

    def at_end(self) -> bool:
        return self.i >= len(self.s)

    def error(self, msg, line=None, col=None):
        raise ParseError(msg, line or self.line, col or self.col)

    def advance(self, n=1):
        for _ in range(n):
            if self.s[self.i] == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
            self.i += 1

    def skip_space(self):
        s = self.s
        while self.i < len(s):
            c = s[self.i]
            if c.isspace():
                self.advance()
            elif s.startswith(";;", self.i):
                while self.i < len(s) and s[self.i] != "\n":
                    self.advance()
            elif s.startswith("(;", self.i):
                line, col = self.line, self.col
                depth = 0
                while True:
                    if self.i >= len(s):
                        self.error("unterminated block comment", line, col)
                    if s.startswith("(;", self.i):
                        depth += 1
                        self.advance(2)
                    elif s.startswith(";)", self.i):
                        depth -= 1
                        self.advance(2)
                        if depth == 0:
                            break
                    else:
                        self.advance()
            else:
                return

    def read(self):
        c = self.s[self.i]
        line, col = self.line, self.col
        if c == "(":
            self.advance()
            items = []
            while True:
                self.skip_space()
                if self.at_end():
                    self.error("unbalanced parentheses: list opened here is never closed", line, col)
                if self.s[self.i] == ")":
                    self.advance()
                    return SList(items, line, col)
                items.append(self.read())
        if c == ")":
            self.error("unexpected ')'")
        if c == '"':
            return self.read_string()
        start = self.i
        while self.i < len(self.s) and not self.s[self.i].isspace() and self.s[self.i] not in _DELIMS:
            self.advance()
        if self.i == start:
            self.error(f"unexpected character {c!r}")
        return Atom(self.s[start:self.i], line, col)

    def read_string(self) -> String:
        line, col = self.line, self.col
        self.advance()
        out = bytearray()
        s = self.s
        while True:
            if self.i >= len(s) or s[self.i] == "\n":
                self.error("unterminated string", line, col)
            c = s[self.i]
            if c == '"':
                self.advance()
                return String(bytes(out), line, col)
            if c == "\\":
                nxt = s[self.i + 1:self.i + 2]
                if nxt in _ESCAPES:
                    out.append(_ESCAPES[nxt])
                    self.advance(2)
                elif len(s) >= self.i + 3 and all(ch in "0123456789abcdefABCDEF" for ch in s[self.i + 1:self.i + 3]):
                    out.append(int(s[self.i + 1:self.i + 3], 16))
                    self.advance(3)
                else:
                    self.error(f"bad escape sequence \\{nxt}")
            else:
                out.extend(c.encode("utf-8"))
                self.advance()
