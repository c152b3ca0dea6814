"""Expression language for flows, potentials, curves and surfaces.

Grammar (loosest to tightest)::

    expr   := expr ('+' | '-') expr          left-assoc
            | expr ('*' | '/') expr          left-assoc
            | '-' expr                       unary minus
            | expr '^' expr                  right-assoc
            | number | name | func '(' expr ')' | '(' expr ')'

Names are ``x1..xn`` (``x, y, z`` as aliases when ``n <= 3``), the curve
parameter ``t``, surface parameters ``u1..u{n-1}`` and the constants ``pi``
and ``e``.  Evaluation is vectorized: variables may be bound to numpy arrays.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
}
CONSTANTS = {"pi": math.pi, "e": math.e}
ALIASES = {"x": "x1", "y": "x2", "z": "x3"}


class DSLError(ValueError):
    pass


class DSLSyntaxError(DSLError):
    def __init__(self, message: str, line: int = 1, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class UndeclaredVariableError(DSLSyntaxError):
    pass


class DomainError(DSLError):
    """Evaluation outside the domain of log, sqrt, division or powers."""

    def __init__(self, message: str, component: int | None = None):
        if component is not None:
            message = f"component a{component}: {message}"
        super().__init__(message)
        self.component = component


# AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


@dataclass(frozen=True)
class CentralDiff:
    """Central difference of ``body`` in ``var``; built by code, never parsed."""

    body: "Expr"
    var: str
    h: float


Expr = Union[Num, Var, Const, Neg, BinOp, Call, CentralDiff]


# tokenizer

_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    col: int


def _tokenize(text: str, line: int, col0: int) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise DSLSyntaxError(f"unexpected character {text[pos]!r}", line, col0 + pos)
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, m.group(), col0 + pos))
        pos = m.end()
    tokens.append(_Token("end", "", col0 + len(text)))
    return tokens


_LBP = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_UNARY_BP = 30


class _Parser:
    def __init__(self, text: str, variables: Iterable[str], aliases: bool, line: int, col0: int):
        self.tokens = _tokenize(text, line, col0)
        self.i = 0
        self.line = line
        self.variables = frozenset(variables)
        self.aliases = aliases

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, msg: str, tok: _Token) -> DSLSyntaxError:
        return DSLSyntaxError(msg, self.line, tok.col)

    def parse(self) -> Expr:
        node = self.expression(0)
        tok = self.peek()
        if tok.kind != "end":
            raise self.error(f"unexpected {tok.text!r}", tok)
        return node

    def expression(self, rbp: int) -> Expr:
        left = self.nud(self.advance())
        while rbp < _LBP.get(self.peek().text if self.peek().kind == "op" else "", 0):
            left = self.led(self.advance(), left)
        return left

    def nud(self, tok: _Token) -> Expr:
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "name":
            return self.name(tok)
        if tok.text == "-":
            return Neg(self.expression(_UNARY_BP))
        if tok.text == "(":
            inner = self.expression(0)
            self.expect(")")
            return inner
        if tok.kind == "end":
            raise self.error("unexpected end of expression", tok)
        raise self.error(f"unexpected {tok.text!r}", tok)

    def led(self, tok: _Token, left: Expr) -> Expr:
        if tok.text == "^":
            return BinOp("^", left, self.expression(_LBP["^"] - 1))
        return BinOp(tok.text, left, self.expression(_LBP[tok.text]))

    def expect(self, text: str) -> None:
        tok = self.advance()
        if tok.text != text:
            raise self.error(f"expected {text!r}, got {tok.text or 'end'!r}", tok)

    def name(self, tok: _Token) -> Expr:
        name = tok.text
        if name in FUNCTIONS:
            self.expect("(")
            arg = self.expression(0)
            self.expect(")")
            return Call(name, arg)
        if name in CONSTANTS:
            return Const(name)
        if name in ALIASES and self.aliases:
            name = ALIASES[name]
        if name not in self.variables:
            raise UndeclaredVariableError(f"undeclared variable {tok.text!r}", self.line, tok.col)
        return Var(name)


def space_variables(dim: int) -> tuple[str, ...]:
    return tuple(f"x{i}" for i in range(1, dim + 1))


def parse_expr(text: str, variables: Iterable[str] = (), *, aliases: bool | None = None,
               line: int = 1, column: int = 1) -> Expr:
    """Parse ``text`` into an AST, checking every name against ``variables``.

    Aliases ``x, y, z`` are accepted when ``aliases`` is true; by default that
    is the case iff the declared space variables number at most three.
    """
    variables = tuple(variables)
    if aliases is None:
        n_space = sum(1 for v in variables if re.fullmatch(r"x\d+", v))
        aliases = n_space <= 3
    if aliases:
        variables = variables + tuple(a for a, v in ALIASES.items() if v in variables)
    return _Parser(text, variables, aliases, line, column).parse()


# printing

def _level(node: Expr) -> int:
    if isinstance(node, BinOp):
        return {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}[node.op]
    if isinstance(node, Neg):
        return 3
    return 5


def unparse(node: Expr) -> str:
    """Render ``node`` with the minimal parentheses that parse back to it."""
    if isinstance(node, Num):
        if not math.isfinite(node.value) or node.value < 0:
            raise DSLError(f"literal {node.value!r} has no source form")
        return repr(float(node.value))
    if isinstance(node, (Var, Const)):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({unparse(node.arg)})"
    if isinstance(node, Neg):
        inner = unparse(node.operand)
        return f"-({inner})" if _level(node.operand) < 3 else f"-{inner}"
    if isinstance(node, BinOp):
        lvl = _level(node)
        left, right = unparse(node.left), unparse(node.right)
        if node.op == "^":
            if _level(node.left) <= 4:
                left = f"({left})"
            if _level(node.right) < 3:
                right = f"({right})"
            return f"{left}^{right}"
        if _level(node.left) < lvl:
            left = f"({left})"
        if _level(node.right) <= lvl:
            right = f"({right})"
        return f"{left} {node.op} {right}"
    raise DSLError(f"{type(node).__name__} has no source form")


def free_variables(node: Expr) -> frozenset[str]:
    if isinstance(node, Var):
        return frozenset([node.name])
    if isinstance(node, Neg):
        return free_variables(node.operand)
    if isinstance(node, Call):
        return free_variables(node.arg)
    if isinstance(node, BinOp):
        return free_variables(node.left) | free_variables(node.right)
    if isinstance(node, CentralDiff):
        return free_variables(node.body) | {node.var}
    return frozenset()


def substitute(node: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions."""
    if isinstance(node, Var):
        return mapping.get(node.name, node)
    if isinstance(node, Neg):
        return Neg(substitute(node.operand, mapping))
    if isinstance(node, Call):
        return Call(node.func, substitute(node.arg, mapping))
    if isinstance(node, BinOp):
        return BinOp(node.op, substitute(node.left, mapping), substitute(node.right, mapping))
    if isinstance(node, CentralDiff):
        if node.var in mapping:
            raise DSLError("cannot substitute the differentiation variable")
        return CentralDiff(substitute(node.body, mapping), node.var, node.h)
    return node


# evaluation

def _is_integral(value) -> bool:
    arr = np.asarray(value)
    return bool(np.all(np.isfinite(arr)) and np.all(arr == np.round(arr)))


def _int_power(base, k: int):
    if k < 0:
        denom = _int_power(base, -k)
        if np.any(np.asarray(denom) == 0):
            raise DomainError("zero raised to a negative power")
        return 1.0 / denom
    result = np.ones_like(base, dtype=float) if isinstance(base, np.ndarray) else 1.0
    for _ in range(k):
        result = result * base
    return result


def _power(base, exponent):
    exp_arr = np.asarray(exponent)
    if exp_arr.ndim == 0 and _is_integral(exp_arr):
        return _int_power(base, int(exp_arr))
    integral = np.isfinite(exp_arr) & (exp_arr == np.round(exp_arr))
    if np.any((np.asarray(base) < 0) & ~integral):
        raise DomainError("negative base with non-integer exponent")
    return np.power(base, exponent)


def _check_overflow(arg, out, what: str) -> None:
    if np.any(np.isfinite(arg) & ~np.isfinite(out)):
        raise DomainError(f"overflow in {what}")


def evaluate(node: Expr, env: Mapping[str, object]):
    """Evaluate by structural recursion; values may be floats or arrays."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise DSLError(f"variable {node.name!r} is unbound") from None
    if isinstance(node, Const):
        return CONSTANTS[node.name]
    if isinstance(node, Neg):
        return -evaluate(node.operand, env)
    if isinstance(node, Call):
        arg = evaluate(node.arg, env)
        if node.func == "log" and np.any(np.asarray(arg) <= 0):
            raise DomainError("log of a nonpositive value")
        if node.func == "sqrt" and np.any(np.asarray(arg) < 0):
            raise DomainError("sqrt of a negative value")
        with np.errstate(over="ignore"):
            out = FUNCTIONS[node.func](arg)
        if node.func == "exp":
            _check_overflow(arg, out, "exp")
        return out
    if isinstance(node, BinOp):
        a = evaluate(node.left, env)
        if node.op == "^" and isinstance(node.right, Num) and node.right.value.is_integer():
            return _int_power(a, int(node.right.value))
        b = evaluate(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            if np.any(np.asarray(b) == 0):
                raise DomainError("division by zero")
            return a / b
        with np.errstate(over="ignore", invalid="ignore"):
            out = _power(a, b)
        _check_overflow(np.asarray(a) + np.asarray(b), out, "^")
        return out
    if isinstance(node, CentralDiff):
        x = env[node.var]
        plus = dict(env)
        minus = dict(env)
        plus[node.var] = x + node.h
        minus[node.var] = x - node.h
        return (evaluate(node.body, plus) - evaluate(node.body, minus)) / (2.0 * node.h)
    raise DSLError(f"cannot evaluate {node!r}")


def evaluate_on(node: Expr, names: Sequence[str], points: np.ndarray) -> np.ndarray:
    """Evaluate at points of shape ``(..., len(names))``; result shape ``(...)``."""
    pts = np.asarray(points, dtype=float)
    env = {name: pts[..., k] for k, name in enumerate(names)}
    value = evaluate(node, env)
    return np.broadcast_to(np.asarray(value, dtype=float), pts.shape[:-1]).copy()


# flows

DEFAULT_STEP = 1e-4


@dataclass(frozen=True)
class FlowField:
    """Covector field ``x -> (a_1(x), ..., a_n(x))`` on R^n."""

    dim: int
    components: tuple
    potential: Expr | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise DSLError(f"dimension must be >= 1, got {self.dim}")
        if len(self.components) != self.dim:
            raise DSLError(f"expected {self.dim} components, got {len(self.components)}")
        allowed = set(space_variables(self.dim))
        for k, comp in enumerate(self.components, 1):
            extra = free_variables(comp) - allowed
            if extra:
                raise DSLError(f"component a{k} uses undeclared {sorted(extra)}")
        if self.potential is not None and free_variables(self.potential) - allowed:
            raise DSLError("potential may only reference x-variables")

    @property
    def variables(self) -> tuple[str, ...]:
        return space_variables(self.dim)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Components at points of shape ``(..., n)``; returns ``(..., n)``."""
        pts = np.asarray(points, dtype=float)
        if pts.shape[-1] != self.dim:
            raise DSLError(f"points have dimension {pts.shape[-1]}, field has {self.dim}")
        out = np.empty(pts.shape)
        for k, comp in enumerate(self.components):
            try:
                out[..., k] = evaluate_on(comp, self.variables, pts)
            except DomainError as exc:
                raise DomainError(str(exc), component=k + 1) from None
        return out

    def unparse(self) -> str:
        lines = [f"dim = {self.dim}"]
        lines += [f"a{k} = {unparse(c)}" for k, c in enumerate(self.components, 1)]
        if self.potential is not None:
            lines.append(f"phi = {unparse(self.potential)}")
        return "\n".join(lines) + "\n"


def eval_flow(field: FlowField, x: Sequence[float]) -> tuple[float, ...]:
    x = np.asarray(x, dtype=float)
    if x.shape != (field.dim,):
        raise DSLError(f"point has dimension {x.size}, field has {field.dim}")
    if not np.all(np.isfinite(x)):
        raise DSLError("point coordinates must be finite")
    return tuple(float(v) for v in field.evaluate(x))


def jacobian(field: FlowField, points: np.ndarray, h: float = DEFAULT_STEP) -> np.ndarray:
    """Central-difference Jacobian ``J[..., i, j] = d a_i / d x_j``."""
    if h <= 0:
        raise ValueError("step h must be positive")
    pts = np.asarray(points, dtype=float)
    n = field.dim
    jac = np.empty(pts.shape[:-1] + (n, n))
    for j in range(n):
        step = np.zeros(n)
        step[j] = h
        jac[..., :, j] = (field.evaluate(pts + step) - field.evaluate(pts - step)) / (2.0 * h)
    return jac


def numeric_jacobian(field: FlowField, x: Sequence[float], h: float = DEFAULT_STEP) -> np.ndarray:
    return jacobian(field, np.asarray(x, dtype=float), h)


def gradient_flow(phi: Expr, h: float = DEFAULT_STEP, dim: int | None = None) -> FlowField:
    """Flow of central-difference partial derivatives of the potential ``phi``."""
    if h <= 0:
        raise ValueError("step h must be positive")
    if dim is None:
        indices = [int(v[1:]) for v in free_variables(phi) if re.fullmatch(r"x\d+", v)]
        dim = max(indices, default=1)
    comps = tuple(CentralDiff(phi, f"x{i}", h) for i in range(1, dim + 1))
    return FlowField(dim, comps, potential=phi)


# definition files

@dataclass(frozen=True)
class Statement:
    key: str
    args: tuple[str, ...]
    rhs: str
    line: int
    column: int  # column of the first character of rhs


_LHS_RE = re.compile(r"\s*([A-Za-z_][A-Za-z_0-9]*)\s*(?:\(([^)]*)\))?\s*$")


def parse_statements(text: str) -> list[Statement]:
    """Split a definition file into ``lhs = rhs`` statements.

    Statements are separated by newlines or ``;``; ``#`` starts a comment.
    """
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        start = 0
        for piece in line.split(";"):
            col = start + 1
            start += len(piece) + 1
            if not piece.strip():
                continue
            if "=" not in piece:
                lead = len(piece) - len(piece.lstrip())
                raise DSLSyntaxError("expected 'name = value'", lineno, col + lead)
            lhs, rhs = piece.split("=", 1)
            m = _LHS_RE.match(lhs)
            if not m:
                raise DSLSyntaxError(f"bad left-hand side {lhs.strip()!r}", lineno, col)
            args = tuple(a.strip() for a in m.group(2).split(",")) if m.group(2) else ()
            rhs_col = col + len(lhs) + 1
            lead = len(rhs) - len(rhs.lstrip())
            out.append(Statement(m.group(1), args, rhs.strip(), lineno, rhs_col + lead))
    return out


def read_dim(stmts: Sequence[Statement]) -> int:
    found = [s for s in stmts if s.key == "dim"]
    if not found:
        raise DSLSyntaxError("missing 'dim = <n>'", 1, 1)
    s = found[0]
    try:
        dim = int(s.rhs)
    except ValueError:
        raise DSLSyntaxError(f"dim must be an integer, got {s.rhs!r}", s.line, s.column) from None
    if dim < 1:
        raise DSLSyntaxError(f"dim must be >= 1, got {dim}", s.line, s.column)
    return dim


def parse_flow_spec(text: str) -> FlowField:
    """Build a :class:`FlowField` from flow-file text."""
    stmts = parse_statements(text)
    dim = read_dim(stmts)
    names = space_variables(dim)
    comps: dict[int, Expr] = {}
    potential = None
    for s in stmts:
        if s.key == "dim":
            continue
        if s.args:
            raise DSLSyntaxError(f"unexpected arguments on {s.key!r}", s.line, s.column)
        m = re.fullmatch(r"a(\d+)", s.key)
        if m:
            k = int(m.group(1))
            if not 1 <= k <= dim:
                raise DSLSyntaxError(f"component {s.key} outside 1..{dim}", s.line, s.column)
            if k in comps:
                raise DSLSyntaxError(f"duplicate component {s.key}", s.line, s.column)
            comps[k] = parse_expr(s.rhs, names, line=s.line, column=s.column)
        elif s.key == "phi":
            potential = parse_expr(s.rhs, names, line=s.line, column=s.column)
        else:
            raise DSLSyntaxError(f"unknown key {s.key!r} in flow file", s.line, s.column)
    missing = [k for k in range(1, dim + 1) if k not in comps]
    if missing:
        if potential is not None and len(missing) == dim:
            return gradient_flow(potential, dim=dim)
        raise DSLSyntaxError(f"missing components {', '.join(f'a{k}' for k in missing)}", 1, 1)
    return FlowField(dim, tuple(comps[k] for k in range(1, dim + 1)), potential)
