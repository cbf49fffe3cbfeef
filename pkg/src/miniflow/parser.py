"""Recursive-descent parser for the dataflow scripting language.

Grammar sketch (statements end with `;` unless block-formed):

    program    := { statement }
    statement  := var_decl | assign | call_stmt | foreach | leaf_decl
                | func_def | "@" "priority" "(" INT ")" statement
    var_decl   := type IDENT [ "=" expr ] ";"
    assign     := IDENT "=" expr ";"
    call_stmt  := IDENT "(" [ expr { "," expr } ] ")" ";"
    foreach    := "foreach" IDENT "in" "[" int_lit ":" int_lit "]" "{" { statement } "}"
    leaf_decl  := "leaf" "(" params ")" IDENT "(" params ")"
                  [ "package" STRING STRING ] kind [ STRING ] ";"
    func_def   := "func" "(" params ")" IDENT "(" params ")" "{" { statement } "}"
    kind       := "template" | "native" | "guest"
    expr       := term { ("+" | "-") term }
    term       := factor { ("*" | "/" | "%") factor }
    factor     := literal | IDENT | call | "(" expr ")" | "-" factor
"""

from __future__ import annotations

from .errors import ParseError, TemplateError
from .lexer import Token, TokenKind, decode_string_literal, encode_string_literal, tokenize
from .nodes import (
    Assign,
    BinOp,
    Call,
    CallStmt,
    ExecKind,
    Expr,
    Foreach,
    FuncDef,
    Ident,
    LeafDecl,
    Literal,
    Param,
    Program,
    Stmt,
    UnaryOp,
    VarDecl,
)
from .templates import extract_template_slots
from .values import I64_MAX, I64_MIN, ScalarType

TYPE_KEYWORDS = {"int", "float", "string", "blob"}
_KIND_WORDS = {"template": ExecKind.TEMPLATE, "native": ExecKind.NATIVE, "guest": ExecKind.GUEST_EVAL}


class _TokenStream:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self, ahead: int = 0) -> Token | None:
        idx = self.pos + ahead
        return self.tokens[idx] if idx < len(self.tokens) else None

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input", *self._last_pos())
        self.pos += 1
        return tok

    def _last_pos(self):
        if self.tokens:
            t = self.tokens[-1]
            return t.line, t.column + len(t.text)
        return 1, 1

    def expect_punct(self, text: str) -> Token:
        tok = self.peek()
        if tok is None:
            raise ParseError(f"expected {text!r} but reached end of input", *self._last_pos())
        if tok.kind is not TokenKind.PUNCTUATION or tok.text != text:
            raise ParseError(f"expected {text!r}, found {tok.text!r}", tok.line, tok.column)
        return self.next()

    def expect_keyword(self, word: str) -> Token:
        tok = self.peek()
        if tok is None:
            raise ParseError(f"expected {word!r} but reached end of input", *self._last_pos())
        if tok.kind is not TokenKind.KEYWORD or tok.text != word:
            raise ParseError(f"expected {word!r}, found {tok.text!r}", tok.line, tok.column)
        return self.next()

    def expect_ident(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise ParseError("expected identifier but reached end of input", *self._last_pos())
        if tok.kind is not TokenKind.IDENTIFIER:
            raise ParseError(f"expected identifier, found {tok.text!r}", tok.line, tok.column)
        return self.next()

    def expect_string(self) -> tuple[str, Token]:
        tok = self.peek()
        if tok is None:
            raise ParseError("expected string literal but reached end of input", *self._last_pos())
        if tok.kind is not TokenKind.STRING_LITERAL:
            raise ParseError(f"expected string literal, found {tok.text!r}", tok.line, tok.column)
        self.next()
        return decode_string_literal(tok.text, tok.line, tok.column), tok

    def at_punct(self, text: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind is TokenKind.PUNCTUATION and tok.text == text

    def at_keyword(self, word: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind is TokenKind.KEYWORD and tok.text == word


def parse(tokens: list[Token]) -> Program:
    """Parse a token sequence into a program: one node per top-level statement."""
    stream = _TokenStream(tokens)
    statements = []
    while stream.peek() is not None:
        statements.append(_parse_statement(stream, top_level=True))
    return Program(statements)


def parse_source(source: str) -> Program:
    return parse(tokenize(source))


def parse_leaf_decl(tokens: list[Token]) -> LeafDecl:
    """Parse a standalone leaf declaration."""
    stream = _TokenStream(tokens)
    decl = _parse_leaf_decl(stream)
    if stream.peek() is not None:
        tok = stream.peek()
        raise ParseError(f"unexpected token {tok.text!r} after declaration", tok.line, tok.column)
    return decl


def _parse_statement(stream: _TokenStream, top_level: bool) -> Stmt:
    tok = stream.peek()
    assert tok is not None
    if tok.kind is TokenKind.PUNCTUATION and tok.text == "@":
        return _parse_priority(stream, top_level)
    if tok.kind is TokenKind.KEYWORD:
        if tok.text == "leaf":
            if not top_level:
                raise ParseError("leaf declarations are only allowed at top level", tok.line, tok.column)
            return _parse_leaf_decl(stream)
        if tok.text == "func":
            if not top_level:
                raise ParseError("func definitions are only allowed at top level", tok.line, tok.column)
            return _parse_func_def(stream)
        if tok.text == "foreach":
            return _parse_foreach(stream)
        if tok.text in TYPE_KEYWORDS:
            return _parse_var_decl(stream)
        raise ParseError(f"unexpected keyword {tok.text!r}", tok.line, tok.column)
    if tok.kind is TokenKind.IDENTIFIER:
        nxt = stream.peek(1)
        if nxt is not None and nxt.kind is TokenKind.PUNCTUATION and nxt.text == "(":
            call = _parse_call(stream)
            stream.expect_punct(";")
            return CallStmt(call, line=tok.line, column=tok.column)
        return _parse_assign(stream)
    raise ParseError(f"unexpected token {tok.text!r}", tok.line, tok.column)


def _parse_priority(stream: _TokenStream, top_level: bool) -> Stmt:
    at = stream.expect_punct("@")
    name = stream.expect_ident()
    if name.text != "priority":
        raise ParseError(f"unknown annotation @{name.text}", name.line, name.column)
    stream.expect_punct("(")
    value = _parse_int_literal(stream)
    stream.expect_punct(")")
    stmt = _parse_statement(stream, top_level)
    if isinstance(stmt, (LeafDecl, FuncDef)):
        raise ParseError("@priority does not apply to declarations", at.line, at.column)
    stmt.priority = value
    return stmt


def _parse_int_literal(stream: _TokenStream) -> int:
    neg = False
    if stream.at_punct("-"):
        stream.next()
        neg = True
    tok = stream.peek()
    if tok is None or tok.kind is not TokenKind.INT_LITERAL:
        found = tok.text if tok else "end of input"
        line, col = (tok.line, tok.column) if tok else stream._last_pos()
        raise ParseError(f"expected integer literal, found {found!r}", line, col)
    stream.next()
    value = -int(tok.text) if neg else int(tok.text)
    if not I64_MIN <= value <= I64_MAX:
        raise ParseError(f"integer literal {value} outside 64-bit range", tok.line, tok.column)
    return value


def _parse_var_decl(stream: _TokenStream) -> VarDecl:
    type_tok = stream.next()
    var_type = ScalarType.parse(type_tok.text)
    name = stream.expect_ident()
    init = None
    if stream.at_punct("="):
        stream.next()
        init = _parse_expr(stream)
    stream.expect_punct(";")
    return VarDecl(name.text, var_type, init, line=type_tok.line, column=type_tok.column)


def _parse_assign(stream: _TokenStream) -> Assign:
    name = stream.expect_ident()
    stream.expect_punct("=")
    expr = _parse_expr(stream)
    stream.expect_punct(";")
    return Assign(name.text, expr, line=name.line, column=name.column)


def _parse_foreach(stream: _TokenStream) -> Foreach:
    kw = stream.expect_keyword("foreach")
    index = stream.expect_ident()
    stream.expect_keyword("in")
    stream.expect_punct("[")
    start = _parse_int_literal(stream)
    stream.expect_punct(":")
    end = _parse_int_literal(stream)
    stream.expect_punct("]")
    stream.expect_punct("{")
    body = []
    while not stream.at_punct("}"):
        if stream.peek() is None:
            raise ParseError("unterminated foreach body", kw.line, kw.column)
        body.append(_parse_statement(stream, top_level=False))
    stream.expect_punct("}")
    return Foreach(index.text, start, end, body, line=kw.line, column=kw.column)


def _parse_params(stream: _TokenStream) -> list[Param]:
    stream.expect_punct("(")
    params: list[Param] = []
    if stream.at_punct(")"):
        stream.next()
        return params
    while True:
        tok = stream.peek()
        if tok is None or tok.kind is not TokenKind.KEYWORD or tok.text not in TYPE_KEYWORDS:
            found = tok.text if tok else "end of input"
            line, col = (tok.line, tok.column) if tok else stream._last_pos()
            raise ParseError(f"expected parameter type, found {found!r}", line, col)
        stream.next()
        name = stream.expect_ident()
        params.append(Param(name.text, ScalarType.parse(tok.text)))
        if stream.at_punct(","):
            stream.next()
            continue
        stream.expect_punct(")")
        return params


def _parse_leaf_decl(stream: _TokenStream) -> LeafDecl:
    kw = stream.expect_keyword("leaf")
    outputs = _parse_params(stream)
    name = stream.expect_ident()
    inputs = _parse_params(stream)
    pkg_name = pkg_version = None
    if stream.at_keyword("package"):
        stream.next()
        pkg_name, _ = stream.expect_string()
        pkg_version, _ = stream.expect_string()
    tok = stream.peek()
    if tok is None or tok.kind is not TokenKind.KEYWORD or tok.text not in _KIND_WORDS:
        found = tok.text if tok else "end of input"
        line, col = (tok.line, tok.column) if tok else stream._last_pos()
        raise ParseError(f"expected execution kind (template/native/guest), found {found!r}", line, col)
    stream.next()
    kind = _KIND_WORDS[tok.text]
    template = None
    if stream.peek() is not None and stream.peek().kind is TokenKind.STRING_LITERAL:
        template, ttok = stream.expect_string()
    else:
        ttok = tok
    stream.expect_punct(";")
    decl = LeafDecl(outputs, name.text, inputs, pkg_name, pkg_version, kind, template,
                    line=kw.line, column=kw.column)
    _check_leaf_decl(decl, ttok)
    return decl


def _check_leaf_decl(decl: LeafDecl, near: Token) -> None:
    names = {p.name for p in decl.inputs} | {p.name for p in decl.outputs}
    if len(names) != len(decl.inputs) + len(decl.outputs):
        raise ParseError(f"duplicate parameter name in leaf {decl.name!r}", near.line, near.column)
    if decl.exec_kind in (ExecKind.TEMPLATE, ExecKind.GUEST_EVAL):
        if decl.template is None:
            raise ParseError(
                f"leaf {decl.name!r} with kind {decl.exec_kind.value!r} requires a code template",
                near.line, near.column)
        try:
            slots = extract_template_slots(decl.template)
        except TemplateError as exc:
            raise ParseError(f"leaf {decl.name!r}: {exc}", near.line, near.column) from None
        for slot in slots:
            if slot.variable_name not in names:
                raise ParseError(
                    f"leaf {decl.name!r}: template slot <<{slot.variable_name}>> "
                    "does not name an input or output", near.line, near.column)
        if decl.exec_kind is ExecKind.TEMPLATE:
            # Outputs are read back through slot tokens, so each one must appear.
            slot_names = {s.variable_name for s in slots}
            for out in decl.outputs:
                if out.name not in slot_names:
                    raise ParseError(
                        f"leaf {decl.name!r}: output {out.name!r} never appears as a template slot",
                        near.line, near.column)


def _parse_func_def(stream: _TokenStream) -> FuncDef:
    kw = stream.expect_keyword("func")
    outputs = _parse_params(stream)
    name = stream.expect_ident()
    inputs = _parse_params(stream)
    stream.expect_punct("{")
    body = []
    while not stream.at_punct("}"):
        if stream.peek() is None:
            raise ParseError("unterminated func body", kw.line, kw.column)
        body.append(_parse_statement(stream, top_level=False))
    stream.expect_punct("}")
    return FuncDef(outputs, name.text, inputs, body, line=kw.line, column=kw.column)


def _parse_call(stream: _TokenStream) -> Call:
    name = stream.expect_ident()
    stream.expect_punct("(")
    args: list[Expr] = []
    if not stream.at_punct(")"):
        while True:
            args.append(_parse_expr(stream))
            if stream.at_punct(","):
                stream.next()
                continue
            break
    stream.expect_punct(")")
    return Call(name.text, args, line=name.line, column=name.column)


def _parse_expr(stream: _TokenStream) -> Expr:
    left = _parse_term(stream)
    while stream.at_punct("+") or stream.at_punct("-"):
        op = stream.next()
        right = _parse_term(stream)
        left = BinOp(op.text, left, right, line=op.line, column=op.column)
    return left


def _parse_term(stream: _TokenStream) -> Expr:
    left = _parse_factor(stream)
    while stream.at_punct("*") or stream.at_punct("/") or stream.at_punct("%"):
        op = stream.next()
        right = _parse_factor(stream)
        left = BinOp(op.text, left, right, line=op.line, column=op.column)
    return left


def _parse_factor(stream: _TokenStream) -> Expr:
    tok = stream.peek()
    if tok is None:
        raise ParseError("expected expression but reached end of input", *stream._last_pos())
    if tok.kind is TokenKind.PUNCTUATION and tok.text == "-":
        stream.next()
        nxt = stream.peek()
        if nxt is not None and nxt.kind is TokenKind.INT_LITERAL:
            stream.next()
            value = -int(nxt.text)
            if value < I64_MIN:
                raise ParseError(f"integer literal {value} outside 64-bit range", nxt.line, nxt.column)
            return Literal(value, ScalarType.INT, line=tok.line, column=tok.column)
        if nxt is not None and nxt.kind is TokenKind.FLOAT_LITERAL:
            stream.next()
            return Literal(-float(nxt.text), ScalarType.FLOAT, line=tok.line, column=tok.column)
        operand = _parse_factor(stream)
        if isinstance(operand, Literal) and operand.type in (ScalarType.INT, ScalarType.FLOAT):
            return Literal(-operand.value, operand.type, line=tok.line, column=tok.column)
        return UnaryOp("-", operand, line=tok.line, column=tok.column)
    if tok.kind is TokenKind.PUNCTUATION and tok.text == "(":
        stream.next()
        expr = _parse_expr(stream)
        stream.expect_punct(")")
        return expr
    if tok.kind is TokenKind.INT_LITERAL:
        stream.next()
        value = int(tok.text)
        if value > I64_MAX:
            raise ParseError(f"integer literal {value} outside 64-bit range", tok.line, tok.column)
        return Literal(value, ScalarType.INT, line=tok.line, column=tok.column)
    if tok.kind is TokenKind.FLOAT_LITERAL:
        stream.next()
        return Literal(float(tok.text), ScalarType.FLOAT, line=tok.line, column=tok.column)
    if tok.kind is TokenKind.STRING_LITERAL:
        stream.next()
        value = decode_string_literal(tok.text, tok.line, tok.column)
        return Literal(value, ScalarType.STRING, line=tok.line, column=tok.column)
    if tok.kind is TokenKind.IDENTIFIER:
        nxt = stream.peek(1)
        if nxt is not None and nxt.kind is TokenKind.PUNCTUATION and nxt.text == "(":
            return _parse_call(stream)
        stream.next()
        return Ident(tok.text, line=tok.line, column=tok.column)
    raise ParseError(f"unexpected token {tok.text!r} in expression", tok.line, tok.column)


# ---------------------------------------------------------------------------
# Pretty printer (canonical source form; parse(pretty(ast)) == ast)
# ---------------------------------------------------------------------------


def pretty_print(program: Program) -> str:
    lines: list[str] = []
    for stmt in program.statements:
        _pp_stmt(stmt, lines, "")
    return "\n".join(lines) + ("\n" if lines else "")


def _pp_stmt(stmt: Stmt, lines: list[str], indent: str) -> None:
    prio = ""
    if getattr(stmt, "priority", 0):
        prio = f"@priority({stmt.priority}) "
    if isinstance(stmt, VarDecl):
        init = f" = {_pp_expr(stmt.init)}" if stmt.init is not None else ""
        lines.append(f"{indent}{prio}{stmt.var_type.value} {stmt.name}{init};")
    elif isinstance(stmt, Assign):
        lines.append(f"{indent}{prio}{stmt.target} = {_pp_expr(stmt.expr)};")
    elif isinstance(stmt, CallStmt):
        lines.append(f"{indent}{prio}{_pp_expr(stmt.call)};")
    elif isinstance(stmt, Foreach):
        lines.append(f"{indent}{prio}foreach {stmt.index_var} in "
                     f"[{stmt.range_start}:{stmt.range_end}] {{")
        for inner in stmt.body:
            _pp_stmt(inner, lines, indent + "    ")
        lines.append(f"{indent}}}")
    elif isinstance(stmt, LeafDecl):
        outs = ", ".join(f"{p.type.value} {p.name}" for p in stmt.outputs)
        ins = ", ".join(f"{p.type.value} {p.name}" for p in stmt.inputs)
        pkg = ""
        if stmt.package_name is not None:
            pkg = (f" package {encode_string_literal(stmt.package_name)}"
                   f" {encode_string_literal(stmt.package_version)}")
        tpl = f" {encode_string_literal(stmt.template)}" if stmt.template is not None else ""
        lines.append(f"{indent}leaf ({outs}) {stmt.name} ({ins}){pkg} {stmt.exec_kind.value}{tpl};")
    elif isinstance(stmt, FuncDef):
        outs = ", ".join(f"{p.type.value} {p.name}" for p in stmt.outputs)
        ins = ", ".join(f"{p.type.value} {p.name}" for p in stmt.inputs)
        lines.append(f"{indent}func ({outs}) {stmt.name} ({ins}) {{")
        for inner in stmt.body:
            _pp_stmt(inner, lines, indent + "    ")
        lines.append(f"{indent}}}")
    else:
        raise AssertionError(f"unknown statement {stmt!r}")


def _pp_expr(expr: Expr) -> str:
    if isinstance(expr, Literal):
        if expr.type is ScalarType.STRING:
            return encode_string_literal(expr.value)
        if expr.type is ScalarType.FLOAT:
            text = repr(expr.value)
            return text if text.lstrip("-")[0].isdigit() else f"({text})"
        if expr.value < 0:
            return f"(-{-expr.value})"
        return str(expr.value)
    if isinstance(expr, Ident):
        return expr.name
    if isinstance(expr, Call):
        return f"{expr.name}({', '.join(_pp_expr(a) for a in expr.args)})"
    if isinstance(expr, BinOp):
        return f"({_pp_expr(expr.left)} {expr.op} {_pp_expr(expr.right)})"
    if isinstance(expr, UnaryOp):
        return f"(-{_pp_expr(expr.operand)})"
    raise AssertionError(f"unknown expression {expr!r}")
