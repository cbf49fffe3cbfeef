import pytest

from miniflow.errors import ParseError
from miniflow.lexer import tokenize
from miniflow.nodes import (
    Assign,
    BinOp,
    Call,
    CallStmt,
    ExecKind,
    Foreach,
    FuncDef,
    Ident,
    LeafDecl,
    Literal,
    VarDecl,
)
from miniflow.parser import parse, parse_leaf_decl, parse_source, pretty_print
from miniflow.values import ScalarType

FRAGMENT = "int x; x = f(); int y = g(x); int z = g(x);"


def test_dataflow_fragment_statement_shapes():
    program = parse_source(FRAGMENT)
    assert len(program.statements) == 4
    s0, s1, s2, s3 = program.statements
    assert isinstance(s0, VarDecl) and s0.name == "x" and s0.init is None
    assert isinstance(s1, Assign) and isinstance(s1.expr, Call) and s1.expr.name == "f"
    # Declaration-with-initializer is a single statement acting as both.
    for stmt, name in ((s2, "y"), (s3, "z")):
        assert isinstance(stmt, VarDecl) and stmt.name == name
        assert isinstance(stmt.init, Call) and stmt.init.name == "g"
        assert stmt.init.args == [Ident("x")]


def test_foreach_loop_with_two_statement_body():
    program = parse_source("foreach i in [0:9] { t = f(i); v = g(t); }")
    (loop,) = program.statements
    assert isinstance(loop, Foreach)
    assert (loop.index_var, loop.range_start, loop.range_end) == ("i", 0, 9)
    assert len(loop.body) == 2
    assert all(isinstance(s, Assign) for s in loop.body)


def test_missing_semicolon_errors_at_end_of_input():
    with pytest.raises(ParseError) as err:
        parse_source("int x")
    assert "';'" in str(err.value)


def test_unexpected_token_named_in_error():
    with pytest.raises(ParseError) as err:
        parse_source("int x = ;")
    assert "';'" in str(err.value)


def test_expression_precedence():
    program = parse_source("int a = 1 + 2 * 3;")
    (decl,) = program.statements
    expr = decl.init
    assert isinstance(expr, BinOp) and expr.op == "+"
    assert isinstance(expr.right, BinOp) and expr.right.op == "*"


def test_negative_literals_fold():
    program = parse_source("int a = -5; float b = -2.5;")
    assert program.statements[0].init == Literal(-5, ScalarType.INT)
    assert program.statements[1].init == Literal(-2.5, ScalarType.FLOAT)


def test_call_statement():
    program = parse_source("poke(1, x);")
    (stmt,) = program.statements
    assert isinstance(stmt, CallStmt)
    assert stmt.call.name == "poke" and len(stmt.call.args) == 2


def test_priority_annotation():
    program = parse_source("@priority(5) int x = f();")
    (stmt,) = program.statements
    assert stmt.priority == 5


def test_func_def():
    program = parse_source("func (int o) twice (int a) { o = a + a; }")
    (func,) = program.statements
    assert isinstance(func, FuncDef)
    assert func.outputs[0].name == "o"
    assert len(func.body) == 1


# -- leaf declarations -------------------------------------------------------


def test_leaf_decl_full_form():
    tokens = tokenize(
        'leaf (int o) f (int i, int j) package "my_package" "1.0" '
        'template "set <<o>> [ f <<i>> <<j>> ]";')
    decl = parse_leaf_decl(tokens)
    assert isinstance(decl, LeafDecl)
    assert [p.name for p in decl.outputs] == ["o"]
    assert [p.name for p in decl.inputs] == ["i", "j"]
    assert (decl.package_name, decl.package_version) == ("my_package", "1.0")
    assert decl.exec_kind is ExecKind.TEMPLATE
    assert decl.template == "set <<o>> [ f <<i>> <<j>> ]"


def test_leaf_decl_native_without_template():
    decl = parse_leaf_decl(tokenize('leaf (int o) sin1 (float x) native;'))
    assert decl.exec_kind is ExecKind.NATIVE
    assert decl.template is None


def test_leaf_decl_unresolved_slot_rejected():
    with pytest.raises(ParseError) as err:
        parse_leaf_decl(tokenize('leaf (int o) f (int i) guest "o = <<k>> + 1";'))
    assert "<<k>>" in str(err.value)


def test_leaf_decl_template_kind_requires_template():
    with pytest.raises(ParseError):
        parse_leaf_decl(tokenize("leaf (int o) f (int i) template;"))


def test_leaf_decl_template_kind_requires_output_slots():
    with pytest.raises(ParseError) as err:
        parse_leaf_decl(tokenize('leaf (int o) f (int i) template "puts <<i>>";'))
    assert "output" in str(err.value)


def test_leaf_decl_package_optional():
    decl = parse_leaf_decl(tokenize('leaf (int o) f () guest "o = 1";'))
    assert decl.package_name is None


def test_leaf_decl_only_at_top_level():
    with pytest.raises(ParseError):
        parse_source('foreach i in [0:1] { leaf (int o) f () guest "o = 1"; }')


def test_scalar_signature_types_only():
    decl = parse_leaf_decl(tokenize('leaf (blob b) mk (int n, float x, string s) guest "b = n";'))
    assert [p.type for p in decl.inputs] == [ScalarType.INT, ScalarType.FLOAT, ScalarType.STRING]
    assert decl.outputs[0].type is ScalarType.BLOB


# -- pretty-print round trip -------------------------------------------------

CORPUS = [
    FRAGMENT,
    "foreach i in [0:9] { t = f(i); v = g(t); }",
    'leaf (int o) f (int i, int j) package "my_package" "1.0" template "set <<o>> [ f <<i>> <<j>> ]";',
    'leaf (int o) sin1 (float x) native;',
    'leaf () shout (string s) guest "print(s)";',
    "func (int o) twice (int a) { o = a + a; }",
    "int a = 1 + 2 * 3 % 4 - 5;",
    "float b = -2.5 * (1.5 + 0.25);",
    'string s = "he\\"llo\\n";',
    "@priority(3) int x = f();",
    "foreach i in [0:2] { foreach j in [1:3] { int t = i + j; } }",
    "int q = g(f(1), 2 + 3);",
]


@pytest.mark.parametrize("source", CORPUS)
def test_pretty_print_round_trip(source):
    first = parse(tokenize(source))
    printed = pretty_print(first)
    second = parse(tokenize(printed))
    assert first == second


def test_pretty_print_round_trip_generated():
    from program_gen import generate_program

    for seed in range(25):
        source = generate_program(seed)
        first = parse_source(source)
        assert parse_source(pretty_print(first)) == first
