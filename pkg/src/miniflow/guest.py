"""Embedded guest interpreters behind a fixed five-call interface:
init / bind_var / eval / read_var / finalize.

Two backends ship with the runtime:

* "pyexec" embeds the host Python interpreter itself: each environment is an
  isolated namespace that code fragments are exec'd into. This is the
  full-featured backend the CLI uses by default.
* "toy" is a tiny self-contained expression evaluator (assignments plus
  arithmetic and string concatenation) used to keep CI independent of any
  real guest language. Its operator semantics mirror Python's so the same
  leaf bodies behave identically on both backends.

Blobs cross the boundary as opaque handles; guest code inspects them through
accessor functions rather than by copying into guest containers.
"""

from __future__ import annotations

import math

from . import blob as _blob
from .errors import GuestError


class GuestBackend:
    """Interface marker; concrete backends implement the five calls."""

    name = "abstract"

    def init(self):
        raise NotImplementedError

    def bind_var(self, env, name: str, value) -> None:
        raise NotImplementedError

    def eval(self, env, code: str) -> None:
        raise NotImplementedError

    def read_var(self, env, name: str):
        raise NotImplementedError

    def finalize(self, env) -> None:
        raise NotImplementedError


def blob_helpers() -> dict:
    """Accessor functions exposed to guest code for working with blob handles."""
    return {
        "blob_len": lambda b: len(b.data),
        "blob_byte": lambda b, i: b.data[i],
        "blob_f64s": lambda b: tuple(_blob.f64s_of_blob(b)),
        "blob_i64s": lambda b: tuple(_blob.i64s_of_blob(b)),
        "blob_of_f64s": lambda xs: _blob.blob_of_f64s(list(xs)),
        "blob_of_i64s": lambda xs: _blob.blob_of_i64s(list(xs)),
        "blob_of_string": _blob.blob_of_string,
        "string_of_blob": _blob.string_of_blob,
        "blob_elem_type": lambda b: b.elem_type.value if b.elem_type else "",
        "blob_shape": lambda b: list(b.shape) if b.shape is not None else None,
    }


class PyExecBackend(GuestBackend):
    """Evaluates fragments with the embedded Python interpreter; one namespace
    dict per environment, retained or discarded by the worker's policy."""

    name = "pyexec"

    def init(self):
        env = {"__builtins__": __builtins__, "math": math}
        env.update(blob_helpers())
        return env

    def bind_var(self, env, name, value):
        env[name] = value

    def eval(self, env, code):
        try:
            exec(code, env)
        except Exception as exc:
            raise GuestError(f"{type(exc).__name__}: {exc}") from exc

    def read_var(self, env, name):
        if name not in env:
            raise GuestError(f"undefined variable {name!r}")
        return env[name]

    def finalize(self, env):
        env.clear()


# ---------------------------------------------------------------------------
# Toy expression evaluator
# ---------------------------------------------------------------------------

_TOY_PUNCT = {"(", ")", ",", "=", "+", "-", "*", "/", "%"}
_TOY_ESCAPES = {'"': '"', "\\": "\\", "n": "\n", "t": "\t", "r": "\r"}


def _toy_tokens(code: str) -> list[tuple[str, object]]:
    tokens: list[tuple[str, object]] = []
    i = 0
    n = len(code)
    while i < n:
        c = code[i]
        if c in " \t\r":
            i += 1
            continue
        if c in "\n;":
            tokens.append(("sep", c))
            i += 1
            continue
        if c == '"':
            j = i + 1
            out = []
            while j < n and code[j] != '"':
                if code[j] == "\\":
                    j += 1
                    if j >= n or code[j] not in _TOY_ESCAPES:
                        raise GuestError("bad escape in string literal")
                    out.append(_TOY_ESCAPES[code[j]])
                else:
                    out.append(code[j])
                j += 1
            if j >= n:
                raise GuestError("unterminated string literal")
            tokens.append(("str", "".join(out)))
            i = j + 1
            continue
        if c.isdigit():
            j = i
            while j < n and code[j].isdigit():
                j += 1
            is_float = False
            if j < n and code[j] == "." and j + 1 < n and code[j + 1].isdigit():
                is_float = True
                j += 1
                while j < n and code[j].isdigit():
                    j += 1
            if j < n and code[j] in "eE":
                k = j + 1
                if k < n and code[k] in "+-":
                    k += 1
                if k < n and code[k].isdigit():
                    is_float = True
                    j = k
                    while j < n and code[j].isdigit():
                        j += 1
            text = code[i:j]
            tokens.append(("num", float(text) if is_float else int(text)))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (code[j].isalnum() or code[j] == "_"):
                j += 1
            tokens.append(("name", code[i:j]))
            i = j
            continue
        if c in _TOY_PUNCT:
            tokens.append(("punct", c))
            i += 1
            continue
        raise GuestError(f"unexpected character {c!r}")
    return tokens


class _ToyParser:
    def __init__(self, tokens, env, builtins):
        self.tokens = tokens
        self.pos = 0
        self.env = env
        self.builtins = builtins

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self):
        tok = self.peek()
        if tok is None:
            raise GuestError("unexpected end of code")
        self.pos += 1
        return tok

    def at_punct(self, text):
        tok = self.peek()
        return tok is not None and tok[0] == "punct" and tok[1] == text

    def run(self):
        while self.peek() is not None:
            while self.peek() is not None and self.peek()[0] == "sep":
                self.next()
            if self.peek() is None:
                break
            self.statement()
            tok = self.peek()
            if tok is not None and tok[0] != "sep":
                raise GuestError(f"unexpected token {tok[1]!r} after statement")

    def statement(self):
        tok = self.peek()
        nxt = self.tokens[self.pos + 1] if self.pos + 1 < len(self.tokens) else None
        if tok[0] == "name" and nxt is not None and nxt[0] == "punct" and nxt[1] == "=":
            self.next()
            self.next()
            self.env[tok[1]] = self.expr()
        else:
            self.expr()  # evaluated for errors, value discarded

    def expr(self):
        value = self.term()
        while self.at_punct("+") or self.at_punct("-"):
            op = self.next()[1]
            rhs = self.term()
            value = self.apply(op, value, rhs)
        return value

    def term(self):
        value = self.factor()
        while self.at_punct("*") or self.at_punct("/") or self.at_punct("%"):
            op = self.next()[1]
            rhs = self.factor()
            value = self.apply(op, value, rhs)
        return value

    def factor(self):
        tok = self.next()
        if tok[0] == "punct" and tok[1] == "-":
            return self.apply("neg", self.factor(), None)
        if tok[0] == "punct" and tok[1] == "(":
            value = self.expr()
            if not self.at_punct(")"):
                raise GuestError("missing ')'")
            self.next()
            return value
        if tok[0] in ("num", "str"):
            return tok[1]
        if tok[0] == "name":
            if self.at_punct("("):
                self.next()
                args = []
                if not self.at_punct(")"):
                    while True:
                        args.append(self.expr())
                        if self.at_punct(","):
                            self.next()
                            continue
                        break
                if not self.at_punct(")"):
                    raise GuestError("missing ')' in call")
                self.next()
                fn = self.builtins.get(tok[1])
                if fn is None:
                    raise GuestError(f"unknown function {tok[1]!r}")
                try:
                    return fn(*args)
                except GuestError:
                    raise
                except Exception as exc:
                    raise GuestError(f"{tok[1]}: {exc}") from exc
            if tok[1] not in self.env:
                raise GuestError(f"undefined variable {tok[1]!r}")
            return self.env[tok[1]]
        raise GuestError(f"unexpected token {tok[1]!r}")

    def apply(self, op, a, b):
        # Operator semantics deliberately mirror Python's so pyexec and toy
        # evaluate identical fragments identically.
        try:
            if op == "neg":
                if isinstance(a, str):
                    raise GuestError("cannot negate a string")
                return -a
            if op == "+":
                if isinstance(a, str) != isinstance(b, str):
                    raise GuestError("cannot mix strings and numbers with '+'")
                return a + b
            if isinstance(a, str) or isinstance(b, str):
                raise GuestError(f"operator {op!r} not defined for strings")
            if op == "-":
                return a - b
            if op == "*":
                return a * b
            if op == "/":
                return a / b
            if op == "%":
                return a % b
        except ZeroDivisionError:
            raise GuestError("division by zero") from None
        except TypeError as exc:
            raise GuestError(str(exc)) from None
        raise GuestError(f"unknown operator {op!r}")


class ToyExprBackend(GuestBackend):
    """Built-in expression evaluator: `name = expr` statements separated by
    newlines or semicolons. Hermetic stand-in for a real guest language."""

    name = "toy"

    def __init__(self):
        self.builtins = {
            "abs": abs, "min": min, "max": max,
            "int": int, "float": float, "str": str, "len": len,
        }
        helpers = blob_helpers()
        for key in ("blob_len", "blob_byte", "string_of_blob", "blob_of_string"):
            self.builtins[key] = helpers[key]

    def init(self):
        return {}

    def bind_var(self, env, name, value):
        env[name] = value

    def eval(self, env, code):
        parser = _ToyParser(_toy_tokens(code), env, self.builtins)
        parser.run()

    def read_var(self, env, name):
        if name not in env:
            raise GuestError(f"undefined variable {name!r}")
        return env[name]

    def finalize(self, env):
        env.clear()


_BACKENDS = {"pyexec": PyExecBackend, "toy": ToyExprBackend}


def make_backend(name: str) -> GuestBackend:
    if name not in _BACKENDS:
        raise GuestError(f"unknown guest backend {name!r} (choose from {sorted(_BACKENDS)})")
    return _BACKENDS[name]()
