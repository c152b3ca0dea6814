import math

import numpy as np
import pytest
from hypothesis import assume, example, given, settings, strategies as st

from dynflow import expr as E
from dynflow.expr import BinOp, Call, Const, Neg, Num, Var

VARS = ("x1", "x2", "x3")

# source text and a hand transcription into Python
CORPUS = [
    ("1 + 2*3", lambda x1, x2, x3: 7.0),
    ("2 + 3*x1", lambda x1, x2, x3: 2 + 3 * x1),
    ("(2 + 3)*x1", lambda x1, x2, x3: 5 * x1),
    ("x1 - x2 - x3", lambda x1, x2, x3: (x1 - x2) - x3),
    ("x1 / x2 / x3", lambda x1, x2, x3: (x1 / x2) / x3),
    ("2^3^2", lambda x1, x2, x3: 2.0 ** 9),
    ("-2^2", lambda x1, x2, x3: -4.0),
    ("(-2)^2", lambda x1, x2, x3: 4.0),
    ("-x1*x2", lambda x1, x2, x3: -(x1 * x2)),
    ("x1^-1", lambda x1, x2, x3: 1 / x1),
    ("2^-x1", lambda x1, x2, x3: 2.0 ** (-x1)),
    ("x1 - -x2", lambda x1, x2, x3: x1 + x2),
    ("--x1", lambda x1, x2, x3: x1),
    ("sin(x1)*cos(x2)", lambda x1, x2, x3: math.sin(x1) * math.cos(x2)),
    ("exp(-x1^2 - x2^2)", lambda x1, x2, x3: math.exp(-x1 ** 2 - x2 ** 2)),
    ("log(1 + x1^2)", lambda x1, x2, x3: math.log(1 + x1 * x1)),
    ("sqrt(x1^2 + x2^2 + x3^2)", lambda x1, x2, x3: math.sqrt(x1 * x1 + x2 * x2 + x3 * x3)),
    ("abs(x1 - x3)", lambda x1, x2, x3: abs(x1 - x3)),
    ("pi*x1", lambda x1, x2, x3: math.pi * x1),
    ("e^x2", lambda x1, x2, x3: math.e ** x2),
    ("x^2 - y^2", lambda x1, x2, x3: x1 * x1 - x2 * x2),
    ("x*y*z", lambda x1, x2, x3: x1 * x2 * x3),
    ("x1^3 - 3*x1*x2^2", lambda x1, x2, x3: x1 ** 3 - 3 * x1 * x2 ** 2),
    ("1.5e-3*x1 + .25", lambda x1, x2, x3: 1.5e-3 * x1 + 0.25),
    ("(x1 + x2)^2/(1 + x3^2)", lambda x1, x2, x3: (x1 + x2) ** 2 / (1 + x3 ** 2)),
    ("sin(cos(exp(x1/4)))", lambda x1, x2, x3: math.sin(math.cos(math.exp(x1 / 4)))),
    ("2*x1*-x2", lambda x1, x2, x3: 2 * x1 * -x2),
    ("x1^0.5", lambda x1, x2, x3: math.sqrt(x1)),
    ("3 - 2 + 1", lambda x1, x2, x3: 2.0),
    ("12/3/2", lambda x1, x2, x3: 2.0),
]
POINTS = [(0.7, -1.3, 2.1), (1.9, 0.4, -0.6), (0.05, 2.5, 1.0)]


def test_corpus_size():
    assert len(CORPUS) == 30


@pytest.mark.parametrize("text,oracle", CORPUS, ids=[c[0] for c in CORPUS])
def test_corpus_matches_transcription(text, oracle):
    node = E.parse_expr(text, VARS)
    for p in POINTS:
        got = float(E.evaluate(node, dict(zip(VARS, p))))
        want = oracle(*p)
        assert math.isclose(got, want, rel_tol=1e-12, abs_tol=1e-12)


@pytest.mark.parametrize("text", [c[0] for c in CORPUS])
def test_corpus_unparse_parse_fixpoint(text):
    node = E.parse_expr(text, VARS)
    again = E.parse_expr(E.unparse(node), VARS)
    assert again == node
    assert E.unparse(again) == E.unparse(node)


@pytest.mark.parametrize("text,tree", [
    ("a+b*c", BinOp("+", Var("x1"), BinOp("*", Var("x2"), Var("x3")))),
    ("a^b^c", BinOp("^", Var("x1"), BinOp("^", Var("x2"), Var("x3")))),
    ("-a^b", Neg(BinOp("^", Var("x1"), Var("x2")))),
    ("-a*b", BinOp("*", Neg(Var("x1")), Var("x2"))),
    ("a-b-c", BinOp("-", BinOp("-", Var("x1"), Var("x2")), Var("x3"))),
])
def test_precedence_and_associativity(text, tree):
    text = text.replace("a", "x1").replace("b", "x2").replace("c", "x3")
    assert E.parse_expr(text, VARS) == tree


@pytest.mark.parametrize("text", ["1 +", "(x1", "x1)", "sin x1", "foo(x1)", "x1 $ 2", "", "2 3"])
def test_syntax_errors(text):
    with pytest.raises(E.DSLSyntaxError):
        E.parse_expr(text, VARS)


def test_syntax_error_reports_position():
    with pytest.raises(E.DSLSyntaxError) as info:
        E.parse_flow_spec("dim = 2\na1 = x1 +\na2 = x2\n")
    assert info.value.line == 2


def test_undeclared_variable():
    with pytest.raises(E.UndeclaredVariableError):
        E.parse_flow_spec("dim=2; a1=x3; a2=x1")


def test_aliases_only_up_to_three_dimensions():
    E.parse_flow_spec("dim=3; a1=x; a2=y; a3=z")
    with pytest.raises(E.DSLSyntaxError):
        E.parse_flow_spec("dim=4; a1=x; a2=x2; a3=x3; a4=x4")


@pytest.mark.parametrize("text", ["a1=x1", "dim=0; a1=1", "dim=2; a1=x1"])
def test_bad_dimension_or_missing_components(text):
    with pytest.raises(E.DSLError):
        E.parse_flow_spec(text)


def test_flow_examples():
    f = E.parse_flow_spec("dim=2; a1=-x2; a2=x1")
    assert E.eval_flow(f, (1, 2)) == (-2.0, 1.0)
    assert E.eval_flow(E.parse_flow_spec("dim=1; a1=2+3*x1"), (2,)) == (8.0,)
    assert E.eval_flow(E.parse_flow_spec("dim=2; a1=x2; a2=x1"), (3, 5)) == (5.0, 3.0)
    assert E.eval_flow(E.parse_flow_spec("dim=1; a1=sin(x1)"), (0,)) == (0.0,)


def test_flow_file_roundtrip():
    f = E.parse_flow_spec("# comment\ndim = 2\na1 = -x2  # trailing\na2 = x1^2\nphi = x1*x2\n")
    assert E.parse_flow_spec(f.unparse()) == f


@pytest.mark.parametrize("text,component", [
    ("dim=2; a1=1; a2=log(x1)", 2),
    ("dim=2; a1=sqrt(x1); a2=0", 1),
    ("dim=2; a1=1/x1; a2=0", 1),
    ("dim=2; a1=x1^0.5; a2=0", 1),
    ("dim=2; a1=0; a2=exp(9^3 + x1)", 2),
    ("dim=2; a1=(1 - x1)^2000.5; a2=0", 1),
])
def test_domain_errors_name_component(text, component):
    f = E.parse_flow_spec(text)
    with pytest.raises(E.DomainError) as info:
        E.eval_flow(f, (-1.0, 0.0) if "1/x1" not in text else (0.0, 0.0))
    assert info.value.component == component


def test_integer_power_of_negative_base_is_allowed():
    assert E.evaluate(E.parse_expr("x1^3", VARS), {"x1": -2.0}) == -8.0


def test_jacobian_examples():
    rot = E.parse_flow_spec("dim=2; a1=-x2; a2=x1")
    # dyadic steps and points keep x +- h exact, so the difference quotient is too
    for h in (2.0 ** -4, 2.0 ** -13):
        assert np.array_equal(E.numeric_jacobian(rot, (0.375, -0.75), h), [[0.0, -1.0], [1.0, 0.0]])
    for h in (1e-1, 1e-4):
        assert np.allclose(E.numeric_jacobian(rot, (0.3, -0.7), h), [[0.0, -1.0], [1.0, 0.0]], rtol=0, atol=1e-11)
    sq = E.parse_flow_spec("dim=2; a1=x1^2; a2=0")
    assert abs(E.numeric_jacobian(sq, (1.0, 0.0), 1e-3)[0, 0] - 2.0) <= 1e-9
    assert not np.any(E.numeric_jacobian(E.parse_flow_spec("dim=2; a1=3; a2=-1"), (1, 2)))
    with pytest.raises(ValueError):
        E.numeric_jacobian(rot, (0, 0), 0.0)


def test_gradient_flow_examples():
    f = E.gradient_flow(E.parse_expr("x1", ("x1",)), dim=1)
    assert abs(E.eval_flow(f, (0.3,))[0] - 1.0) <= 1e-12
    q = E.gradient_flow(E.parse_expr("x1^2 - x2^2", ("x1", "x2")), h=0.1, dim=2)
    assert np.allclose(E.eval_flow(q, (0.5, 2.0)), (1.0, -4.0), atol=1e-12)
    s = E.gradient_flow(E.parse_expr("sin(x1)", ("x1",)), dim=1)
    assert abs(E.eval_flow(s, (0.0,))[0] - 1.0) <= 1e-8
    assert s.potential is not None


def test_jacobian_converges_at_second_order():
    # sin(x1)cosh(x2), cosh written through exp
    phi = E.parse_expr("sin(x1)*(exp(x2) + exp(-x2))/2", ("x1", "x2"))
    f = E.FlowField(2, (E.parse_expr("cos(x1)*(exp(x2) + exp(-x2))/2", ("x1", "x2")),
                        E.parse_expr("sin(x1)*(exp(x2) - exp(-x2))/2", ("x1", "x2"))), phi)
    x = np.array([0.4, 0.3])
    exact = np.array([[-math.sin(x[0]) * math.cosh(x[1]), math.cos(x[0]) * math.sinh(x[1])],
                      [math.cos(x[0]) * math.sinh(x[1]), math.sin(x[0]) * math.cosh(x[1])]])
    errs = [np.max(np.abs(E.numeric_jacobian(f, x, h) - exact)) for h in (0.1, 0.05)]
    order = math.log2(errs[0] / errs[1])
    assert 1.8 <= order <= 2.2


# independent scalar oracle for random trees

def oracle(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Const):
        return {"pi": math.pi, "e": math.e}[node.name]
    if isinstance(node, Neg):
        return -oracle(node.operand, env)
    if isinstance(node, Call):
        a = oracle(node.arg, env)
        return {"sin": math.sin, "cos": math.cos, "exp": math.exp, "log": math.log,
                "sqrt": math.sqrt, "abs": abs}[node.func](a)
    a, b = oracle(node.left, env), oracle(node.right, env)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        return a / b
    if float(b).is_integer():
        r = 1.0
        for _ in range(abs(int(b))):
            r *= a
        return r if b >= 0 else 1.0 / r
    return math.pow(a, b)


leaves = st.one_of(
    st.integers(0, 9).map(lambda k: Num(float(k))),
    st.sampled_from([Var("x1"), Var("x2"), Const("pi")]),
)


def _extend(children):
    return st.one_of(
        st.builds(Neg, children),
        st.builds(Call, st.sampled_from(["sin", "cos", "exp", "log", "sqrt", "abs"]), children),
        st.builds(BinOp, st.sampled_from(["+", "-", "*", "/"]), children, children),
        st.builds(BinOp, st.just("^"), children, st.integers(0, 3).map(lambda k: Num(float(k)))),
    )


def depth(node):
    if isinstance(node, (Num, Var, Const)):
        return 1
    if isinstance(node, Neg):
        return 1 + depth(node.operand)
    if isinstance(node, Call):
        return 1 + depth(node.arg)
    return 1 + max(depth(node.left), depth(node.right))


trees = st.recursive(leaves, _extend, max_leaves=16).filter(lambda n: depth(n) <= 5)


@settings(max_examples=400, deadline=None)
@example(Call("exp", BinOp("^", Num(9.0), Num(3.0))), 0.0, 0.0)
@given(trees, st.floats(-2, 2), st.floats(-2, 2))
def test_random_trees_match_oracle(node, x1, x2):
    env = {"x1": x1, "x2": x2}
    try:
        want = oracle(node, env)
    except (ValueError, ZeroDivisionError, OverflowError):
        with pytest.raises(E.DomainError):
            with np.errstate(all="ignore"):
                E.evaluate(node, env)
        return
    assume(math.isfinite(want) and abs(want) < 1e12)
    with np.errstate(all="ignore"):
        got = float(E.evaluate(node, env))
    assert math.isclose(got, want, rel_tol=1e-12, abs_tol=1e-12)
    # source form round-trips to the same tree
    assert E.parse_expr(E.unparse(node), ("x1", "x2")) == node
