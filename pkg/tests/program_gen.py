"""Random program generator for property and acceptance tests.

Generates valid scripts only: every variable is declared with an initializer
(so all futures resolve), loops nest at most three deep, and leaf bodies use
only arithmetic the toy guest backend evaluates. Deterministic for a given
seed.
"""

from __future__ import annotations

import random

LEAF_DECLS = """\
leaf (int o) add2 (int a, int b) guest "o = a + b";
leaf (int o) mix3 (int a, int b) guest "o = a * 2 + b - 1";
leaf (int o) square (int a) guest "o = a * a";
leaf (int o) const7 () guest "o = 7";
leaf (float o) fmix (float x, float y) guest "o = x * 0.5 + y";
leaf (float o) fdiff (float x, float y) guest "o = x - y";
leaf (string o) glue (string s, string t) guest "o = s + t";
leaf (string o) bang (string s) guest "o = s + \\"!\\"";
leaf () poke (int a) guest "tmp = a + 1";
"""

INT_LEAVES = [("add2", 2), ("mix3", 2), ("square", 1), ("const7", 0)]
FLOAT_LEAVES = [("fmix", 2), ("fdiff", 2)]
STRING_LEAVES = [("glue", 2), ("bang", 1)]

MAX_LOOP_DEPTH = 3


class _Gen:
    def __init__(self, rng: random.Random, max_statements: int = 50):
        self.rng = rng
        self.budget = max_statements
        self.counter = 0
        self.lines: list[str] = []

    def fresh(self, prefix: str = "v") -> str:
        self.counter += 1
        return f"{prefix}{self.counter}"

    def emit(self, indent: int, text: str) -> None:
        self.lines.append("    " * indent + text)

    # -- expressions ---------------------------------------------------------

    def int_atom(self, scope) -> str:
        pool = scope["int"]
        if pool and self.rng.random() < 0.6:
            return self.rng.choice(pool)
        return str(self.rng.randint(-20, 20))

    def float_atom(self, scope) -> str:
        pool = scope["float"]
        if pool and self.rng.random() < 0.6:
            return self.rng.choice(pool)
        return f"{self.rng.randint(-40, 40) / 4}"

    def string_atom(self, scope) -> str:
        pool = scope["string"]
        if pool and self.rng.random() < 0.6:
            return self.rng.choice(pool)
        return '"' + "".join(self.rng.choice("abcxyz") for _ in range(3)) + '"'

    def int_expr(self, scope, depth: int = 0) -> str:
        r = self.rng.random()
        if depth < 2 and r < 0.25:
            op = self.rng.choice(["+", "-", "*"])
            return f"({self.int_expr(scope, depth + 1)} {op} {self.int_expr(scope, depth + 1)})"
        if depth < 2 and r < 0.35:
            name, arity = self.rng.choice(INT_LEAVES)
            args = ", ".join(self.int_expr(scope, depth + 1) for _ in range(arity))
            return f"{name}({args})"
        if depth < 2 and r < 0.40:
            return f"({self.int_expr(scope, depth + 1)} % 13)"
        return self.int_atom(scope)

    def float_expr(self, scope, depth: int = 0) -> str:
        r = self.rng.random()
        if depth < 2 and r < 0.25:
            op = self.rng.choice(["+", "-", "*"])
            return f"({self.float_expr(scope, depth + 1)} {op} {self.float_expr(scope, depth + 1)})"
        if depth < 2 and r < 0.35:
            name, arity = self.rng.choice(FLOAT_LEAVES)
            args = ", ".join(self.float_expr(scope, depth + 1) for _ in range(arity))
            return f"{name}({args})"
        return self.float_atom(scope)

    def string_expr(self, scope, depth: int = 0) -> str:
        r = self.rng.random()
        if depth < 2 and r < 0.2:
            return f"({self.string_expr(scope, depth + 1)} + {self.string_expr(scope, depth + 1)})"
        if depth < 2 and r < 0.35:
            name, arity = self.rng.choice(STRING_LEAVES)
            args = ", ".join(self.string_expr(scope, depth + 1) for _ in range(arity))
            return f"{name}({args})"
        return self.string_atom(scope)

    # -- statements ----------------------------------------------------------

    def statement(self, scope, indent: int, loop_depth: int) -> None:
        self.budget -= 1
        roll = self.rng.random()
        prio = f"@priority({self.rng.randint(1, 3)}) " if self.rng.random() < 0.08 else ""
        if roll < 0.12 and loop_depth < MAX_LOOP_DEPTH and self.budget > 3:
            self.foreach(scope, indent, loop_depth)
            return
        if roll < 0.18:
            name = self.fresh("s")
            self.emit(indent, f'{prio}string {name} = {self.string_expr(scope)};')
            scope["string"].append(name)
            return
        if roll < 0.34:
            name = self.fresh("f")
            self.emit(indent, f"{prio}float {name} = {self.float_expr(scope)};")
            scope["float"].append(name)
            return
        if roll < 0.40:
            self.emit(indent, f"{prio}poke({self.int_expr(scope)});")
            return
        name = self.fresh("n")
        self.emit(indent, f"{prio}int {name} = {self.int_expr(scope)};")
        scope["int"].append(name)

    def foreach(self, scope, indent: int, loop_depth: int) -> None:
        index = self.fresh("i")
        start = self.rng.randint(0, 3)
        end = start + self.rng.randint(0, 2)
        self.emit(indent, f"foreach {index} in [{start}:{end}] {{")
        inner = {key: list(values) for key, values in scope.items()}
        inner["int"] = inner["int"] + [index]
        body_statements = self.rng.randint(1, min(4, max(1, self.budget - 1)))
        for _ in range(body_statements):
            if self.budget <= 0:
                break
            self.statement(inner, indent + 1, loop_depth + 1)
        self.emit(indent, "}")


def generate_program(seed: int, max_statements: int = 50) -> str:
    rng = random.Random(seed)
    gen = _Gen(rng, max_statements)
    scope = {"int": [], "float": [], "string": []}
    top = rng.randint(3, 12)
    while top > 0 and gen.budget > 0:
        gen.statement(scope, 0, 0)
        top -= 1
    return LEAF_DECLS + "\n".join(gen.lines) + "\n"
