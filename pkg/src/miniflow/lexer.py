"""Tokenizer for the dataflow scripting language (.mf sources)."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import LexError

KEYWORDS = {
    "int", "float", "string", "blob",
    "foreach", "in",
    "leaf", "func", "package", "template", "native", "guest",
}

# Longest match first for multi-char punctuation (none today, kept for clarity).
PUNCTUATION = {";", "=", "(", ")", "{", "}", "[", "]", ":", ",", "+", "-", "*", "/", "%", "@"}

_ESCAPES = {'"': '"', "\\": "\\", "n": "\n", "t": "\t", "r": "\r"}


class TokenKind(enum.Enum):
    KEYWORD = "keyword"
    IDENTIFIER = "identifier"
    INT_LITERAL = "integer-literal"
    FLOAT_LITERAL = "float-literal"
    STRING_LITERAL = "string-literal"
    PUNCTUATION = "punctuation"


@dataclass
class Token:
    kind: TokenKind
    text: str  # exact source slice; string literals keep quotes and escapes
    line: int = field(compare=False, default=0)
    column: int = field(compare=False, default=0)

    def __repr__(self) -> str:
        return f"Token({self.kind.value}, {self.text!r}, {self.line}:{self.column})"


def tokenize(source: str) -> list[Token]:
    """Scan source text into tokens. Comments (// to end of line) are dropped;
    string literals preserve their interior text verbatim, including any
    `<<`/`>>` sequences used by code templates."""
    tokens: list[Token] = []
    i = 0
    line = 1
    col = 1
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "/" and i + 1 < n and source[i + 1] == "/":
            while i < n and source[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if ch == '"':
            j = i + 1
            while j < n:
                c = source[j]
                if c == "\\":
                    j += 2
                    continue
                if c == '"':
                    break
                if c == "\n":
                    raise LexError("unterminated string literal", start_line, start_col)
                j += 1
            if j >= n:
                raise LexError("unterminated string literal", start_line, start_col)
            text = source[i:j + 1]
            tokens.append(Token(TokenKind.STRING_LITERAL, text, start_line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        if ch.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            is_float = False
            if j < n and source[j] == "." and j + 1 < n and source[j + 1].isdigit():
                is_float = True
                j += 1
                while j < n and source[j].isdigit():
                    j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    is_float = True
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            kind = TokenKind.FLOAT_LITERAL if is_float else TokenKind.INT_LITERAL
            tokens.append(Token(kind, text, start_line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            text = source[i:j]
            kind = TokenKind.KEYWORD if text in KEYWORDS else TokenKind.IDENTIFIER
            tokens.append(Token(kind, text, start_line, start_col))
            col += j - i
            i = j
            continue
        if ch in PUNCTUATION:
            tokens.append(Token(TokenKind.PUNCTUATION, ch, start_line, start_col))
            i += 1
            col += 1
            continue
        raise LexError(f"unexpected character {ch!r}", line, col)
    return tokens


def decode_string_literal(text: str, line: int = 0, col: int = 0) -> str:
    """Turn a raw string-literal token (with quotes) into its value."""
    assert text.startswith('"') and text.endswith('"')
    out = []
    i = 1
    end = len(text) - 1
    while i < end:
        c = text[i]
        if c == "\\":
            i += 1
            if i >= end:
                raise LexError("dangling escape in string literal", line, col)
            esc = text[i]
            if esc not in _ESCAPES:
                raise LexError(f"unknown escape \\{esc} in string literal", line, col)
            out.append(_ESCAPES[esc])
        else:
            out.append(c)
        i += 1
    return "".join(out)


def encode_string_literal(value: str) -> str:
    """Inverse of decode_string_literal; used by the pretty-printer."""
    out = ['"']
    for c in value:
        if c == '"':
            out.append('\\"')
        elif c == "\\":
            out.append("\\\\")
        elif c == "\n":
            out.append("\\n")
        elif c == "\t":
            out.append("\\t")
        elif c == "\r":
            out.append("\\r")
        else:
            out.append(c)
    out.append('"')
    return "".join(out)
