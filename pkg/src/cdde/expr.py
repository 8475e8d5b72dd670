"""Expression trees for vector fields f(t, x, u).

Trees are immutable tuples of nodes.  Each node can be serialized to the JSON
form ``{"op": ..., "args": [...]}`` (variables ``{"var": "x1"}``, constants
``{"const": 2.5}``) and compiled to a closure evaluating on numpy arrays.

A small infix parser (built on :mod:`ast`) accepts strings such as
``"sin(2*pi*t)*x"`` or ``"where(t < 0.5, 1, 2)*u"``.
"""

from __future__ import annotations

import ast
import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

__all__ = [
    "Expr",
    "Const",
    "Var",
    "Op",
    "Piecewise",
    "Shift",
    "EvaluationError",
    "ExpressionSyntaxError",
    "parse",
    "from_json",
    "to_json",
    "compile_expr",
    "breakpoints",
    "uses_var",
]

UNARY = ("neg", "abs", "sin", "cos", "exp")
BINARY = ("add", "sub", "mul", "div", "pow")
NARY = ("min", "max")

_ALIASES = {"+": "add", "-": "sub", "*": "mul", "×": "mul", "/": "div", "÷": "div",
            "^": "pow", "**": "pow", "power": "pow", "const": "const"}


class EvaluationError(ArithmeticError):
    """Singular evaluation of an expression node."""


class ExpressionSyntaxError(ValueError):
    pass


class Expr:
    """Base class of expression nodes."""

    __slots__ = ()

    def __add__(self, other):
        return Op("add", (self, _lift(other)))

    def __radd__(self, other):
        return Op("add", (_lift(other), self))

    def __sub__(self, other):
        return Op("sub", (self, _lift(other)))

    def __rsub__(self, other):
        return Op("sub", (_lift(other), self))

    def __mul__(self, other):
        return Op("mul", (self, _lift(other)))

    def __rmul__(self, other):
        return Op("mul", (_lift(other), self))

    def __truediv__(self, other):
        return Op("div", (self, _lift(other)))

    def __neg__(self):
        return Op("neg", (self,))

    def __str__(self):
        return render(self)


@dataclass(frozen=True, slots=True)
class Const(Expr):
    value: float


@dataclass(frozen=True, slots=True)
class Var(Expr):
    name: str


@dataclass(frozen=True, slots=True)
class Op(Expr):
    op: str
    args: tuple

    def __post_init__(self):
        n = len(self.args)
        if self.op in UNARY and n != 1:
            raise ExpressionSyntaxError(f"{self.op} takes one argument, got {n}")
        if self.op in BINARY and n != 2:
            raise ExpressionSyntaxError(f"{self.op} takes two arguments, got {n}")
        if self.op in NARY and n < 1:
            raise ExpressionSyntaxError(f"{self.op} needs at least one argument")
        if self.op not in UNARY + BINARY + NARY:
            raise ExpressionSyntaxError(f"unknown operation {self.op!r}")


@dataclass(frozen=True, slots=True)
class Piecewise(Expr):
    """Piece ``k`` applies on ``[breaks[k-1], breaks[k])`` (unbounded ends)."""

    breaks: tuple
    pieces: tuple

    def __post_init__(self):
        if len(self.pieces) != len(self.breaks) + 1:
            raise ExpressionSyntaxError("piecewise needs len(breaks) + 1 pieces")
        if any(b2 <= b1 for b1, b2 in zip(self.breaks, self.breaks[1:])):
            raise ExpressionSyntaxError("piecewise breaks must be strictly increasing")


@dataclass(frozen=True, slots=True)
class Shift(Expr):
    """Time translation: evaluates ``body`` at ``t + by``."""

    by: float
    body: Expr


def _lift(v) -> Expr:
    if isinstance(v, Expr):
        return v
    return Const(float(v))


# ---------------------------------------------------------------------------
# structural queries


def breakpoints(e: Expr, offset: float = 0.0) -> list[float]:
    """Switch times of every piecewise node, in the outer time variable."""
    out: list[float] = []
    _collect_breaks(e, offset, out)
    return sorted(set(out))


def _collect_breaks(e, offset, out):
    if isinstance(e, Piecewise):
        out.extend(b - offset for b in e.breaks)
        for p in e.pieces:
            _collect_breaks(p, offset, out)
    elif isinstance(e, Shift):
        _collect_breaks(e.body, offset + e.by, out)
    elif isinstance(e, Op):
        for a in e.args:
            _collect_breaks(a, offset, out)


def uses_var(e: Expr, name: str) -> bool:
    if isinstance(e, Var):
        return e.name == name
    if isinstance(e, Op):
        return any(uses_var(a, name) for a in e.args)
    if isinstance(e, Piecewise):
        return name == "t" or any(uses_var(p, name) for p in e.pieces)
    if isinstance(e, Shift):
        return uses_var(e.body, name)
    return False


def render(e: Expr) -> str:
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Shift):
        return f"shift({e.by!r}, {render(e.body)})"
    if isinstance(e, Piecewise):
        inner = ", ".join(render(p) for p in e.pieces)
        return f"piecewise({list(e.breaks)!r}, {inner})"
    sym = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "**"}
    if e.op in sym:
        return f"({render(e.args[0])} {sym[e.op]} {render(e.args[1])})"
    if e.op == "neg":
        return f"(-{render(e.args[0])})"
    return f"{e.op}({', '.join(render(a) for a in e.args)})"


# ---------------------------------------------------------------------------
# JSON


def to_json(e: Expr):
    if isinstance(e, Const):
        return {"const": e.value}
    if isinstance(e, Var):
        return {"var": e.name}
    if isinstance(e, Piecewise):
        return {"op": "piecewise", "breaks": list(e.breaks),
                "args": [to_json(p) for p in e.pieces]}
    if isinstance(e, Shift):
        return {"op": "shift", "by": e.by, "args": [to_json(e.body)]}
    return {"op": e.op, "args": [to_json(a) for a in e.args]}


def from_json(obj) -> Expr:
    if isinstance(obj, (int, float)) and not isinstance(obj, bool):
        return Const(float(obj))
    if isinstance(obj, str):
        return parse(obj)
    if not isinstance(obj, Mapping):
        raise ExpressionSyntaxError(f"cannot read expression node {obj!r}")
    if "var" in obj:
        return Var(str(obj["var"]))
    if "const" in obj:
        return Const(float(obj["const"]))
    op = _ALIASES.get(obj.get("op"), obj.get("op"))
    args = [from_json(a) for a in obj.get("args", [])]
    if op == "const":
        return Const(float(obj["value"]))
    if op == "piecewise":
        return Piecewise(tuple(float(b) for b in obj["breaks"]), tuple(args))
    if op == "shift":
        if len(args) != 1:
            raise ExpressionSyntaxError("shift takes one argument")
        return Shift(float(obj["by"]), args[0])
    if op == "sub" and len(args) == 1:
        return Op("neg", tuple(args))
    return Op(op, tuple(args))


# ---------------------------------------------------------------------------
# infix parser

_FUNCS1 = {"sin", "cos", "exp", "abs"}
_CONSTS = {"pi": math.pi, "e": math.e}
_UNICODE = [("π", "pi"), ("·", "*"), ("×", "*"), ("−", "-"), ("÷", "/"), ("²", "**2"), ("³", "**3")]


def parse(text: str, params: Mapping[str, float] | None = None) -> Expr:
    """Parse an infix expression.

    Recognized names: ``t``, ``x``/``u`` (aliases of ``x1``/``u1``), ``xK``,
    ``uK``, ``pi``, ``e`` and any entry of ``params``.  Functions: ``sin``,
    ``cos``, ``exp``, ``abs``, ``min``, ``max``, ``where(t < c, a, b)``,
    ``step(c)`` (0 before ``c``, 1 after) and ``indicator(a, b)``.
    """
    for name in params or {}:
        if name in ("t", "x", "u") or name in _CONSTS or re.fullmatch(r"[xu][1-9]\d*", name):
            raise ExpressionSyntaxError(f"parameter name {name!r} is reserved")
    src = text
    for a, b in _UNICODE:
        src = src.replace(a, b)
    src = src.replace("^", "**")
    # implicit multiplication "2pi" / "2t"
    src = re.sub(r"(\d)\s*(pi|t\b|x\d*|u\d*)", r"\1*\2", src)
    try:
        tree = ast.parse(src.strip(), mode="eval")
    except SyntaxError as exc:
        raise ExpressionSyntaxError(f"cannot parse {text!r}: {exc.msg}") from None
    return _Builder(dict(params or {}), text).build(tree.body)


class _Builder:
    def __init__(self, params, text):
        self.params = params
        self.text = text

    def fail(self, msg):
        raise ExpressionSyntaxError(f"{msg} in {self.text!r}")

    def const_value(self, node) -> float:
        e = self.build(node)
        if uses_any_var(e):
            self.fail("expected a constant expression")
        return float(compile_expr(e)(0.0, (), ()))

    def build(self, node) -> Expr:
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return Const(float(node.value))
        if isinstance(node, ast.Name):
            name = node.id
            if name in self.params:
                return Const(float(self.params[name]))
            if name in _CONSTS:
                return Const(_CONSTS[name])
            if name in ("x", "u"):
                return Var(name + "1")
            if name == "t" or re.fullmatch(r"[xu][1-9]\d*", name):
                return Var(name)
            self.fail(f"unknown name {name!r}")
        if isinstance(node, ast.UnaryOp):
            arg = self.build(node.operand)
            if isinstance(node.op, ast.USub):
                if isinstance(arg, Const):
                    return Const(-arg.value)
                return Op("neg", (arg,))
            if isinstance(node.op, ast.UAdd):
                return arg
        if isinstance(node, ast.BinOp):
            ops = {ast.Add: "add", ast.Sub: "sub", ast.Mult: "mul", ast.Div: "div", ast.Pow: "pow"}
            kind = ops.get(type(node.op))
            if kind is None:
                self.fail("unsupported operator")
            return Op(kind, (self.build(node.left), self.build(node.right)))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
            name = node.func.id
            if node.keywords:
                self.fail("keyword arguments are not supported")
            if name in _FUNCS1:
                if len(node.args) != 1:
                    self.fail(f"{name} takes one argument")
                return Op(name, (self.build(node.args[0]),))
            if name in ("min", "max"):
                return Op(name, tuple(self.build(a) for a in node.args))
            if name == "step":
                return Piecewise((self.const_value(node.args[0]),), (Const(0.0), Const(1.0)))
            if name == "indicator":
                a, b = (self.const_value(x) for x in node.args)
                return Piecewise((a, b), (Const(0.0), Const(1.0), Const(0.0)))
            if name == "where":
                return self.build_where(node)
            if name == "piecewise":
                # piecewise([b1, b2], e0, e1, e2)
                if not node.args or not isinstance(node.args[0], (ast.List, ast.Tuple)):
                    self.fail("piecewise expects a list of breaks first")
                breaks = tuple(self.const_value(b) for b in node.args[0].elts)
                return Piecewise(breaks, tuple(self.build(a) for a in node.args[1:]))
            self.fail(f"unknown function {name!r}")
        self.fail(f"unsupported syntax {ast.dump(node)[:40]}")

    def build_where(self, node) -> Expr:
        if len(node.args) != 3 or not isinstance(node.args[0], ast.Compare):
            self.fail("where expects (t < c, a, b)")
        cmp = node.args[0]
        if len(cmp.ops) != 1:
            self.fail("where supports a single comparison")
        left, right, op = cmp.left, cmp.comparators[0], cmp.ops[0]
        if isinstance(left, ast.Name) and left.id == "t":
            c, less = self.const_value(right), isinstance(op, (ast.Lt, ast.LtE))
        elif isinstance(right, ast.Name) and right.id == "t":
            c, less = self.const_value(left), isinstance(op, (ast.Gt, ast.GtE))
        else:
            self.fail("where conditions may only compare t with a constant")
        a, b = self.build(node.args[1]), self.build(node.args[2])
        return Piecewise((c,), (a, b) if less else (b, a))


def uses_any_var(e: Expr) -> bool:
    if isinstance(e, Var):
        return True
    if isinstance(e, Op):
        return any(uses_any_var(a) for a in e.args)
    if isinstance(e, (Piecewise, Shift)):
        return True
    return False


# ---------------------------------------------------------------------------
# compilation

Evaluator = Callable[[object, Sequence, Sequence], object]


def compile_expr(e: Expr) -> Evaluator:
    """Closure ``fn(t, xs, us)`` with ``xs``/``us`` sequences of component arrays."""
    return _compile(e)


def _node_label(e: Expr) -> str:
    s = render(e)
    return s if len(s) < 60 else s[:57] + "..."


def _compile(e: Expr) -> Evaluator:
    if isinstance(e, Const):
        v = e.value
        return lambda t, xs, us: v
    if isinstance(e, Var):
        name = e.name
        if name == "t":
            return lambda t, xs, us: t
        idx = int(name[1:]) - 1
        if name[0] == "x":
            def var_x(t, xs, us):
                try:
                    return xs[idx]
                except IndexError:
                    raise EvaluationError(f"variable {name} is out of range") from None
            return var_x

        def var_u(t, xs, us):
            try:
                return us[idx]
            except IndexError:
                raise EvaluationError(f"variable {name} is out of range") from None
        return var_u
    if isinstance(e, Shift):
        body, by = _compile(e.body), e.by
        return lambda t, xs, us: body(t + by, xs, us)
    if isinstance(e, Piecewise):
        return _compile_piecewise(e)
    args = [_compile(a) for a in e.args]
    op = e.op
    if op == "add":
        a, b = args
        return lambda t, xs, us: a(t, xs, us) + b(t, xs, us)
    if op == "sub":
        a, b = args
        return lambda t, xs, us: a(t, xs, us) - b(t, xs, us)
    if op == "mul":
        a, b = args
        return lambda t, xs, us: a(t, xs, us) * b(t, xs, us)
    if op == "neg":
        (a,) = args
        return lambda t, xs, us: -a(t, xs, us)
    if op == "abs":
        (a,) = args
        return lambda t, xs, us: np.abs(a(t, xs, us))
    if op in ("sin", "cos", "exp"):
        (a,) = args
        fn = getattr(np, op)
        if op == "exp":
            label = _node_label(e)

            def exp_(t, xs, us):
                with np.errstate(over="ignore"):
                    v = np.exp(a(t, xs, us))
                if not np.all(np.isfinite(v)):
                    raise EvaluationError(f"overflow in {label}")
                return v
            return exp_
        return lambda t, xs, us: fn(a(t, xs, us))
    if op == "div":
        a, b = args
        label = _node_label(e)

        def div(t, xs, us):
            den = b(t, xs, us)
            if np.any(np.asarray(den) == 0):
                raise EvaluationError(f"division by zero in {label}")
            return a(t, xs, us) / den
        return div
    if op == "pow":
        a, b = args
        label = _node_label(e)
        expo = e.args[1]
        if isinstance(expo, Const) and float(expo.value).is_integer() and expo.value >= 0:
            k = int(expo.value)

            def ipow(t, xs, us):
                return a(t, xs, us) ** k
            return ipow

        def rpow(t, xs, us):
            base = np.asarray(a(t, xs, us), dtype=float)
            ex = np.asarray(b(t, xs, us), dtype=float)
            integral = np.equal(np.mod(ex, 1.0), 0.0)
            if np.any((base < 0) & ~integral):
                raise EvaluationError(f"power of negative base in {label}")
            if np.any((base == 0) & (ex < 0)):
                raise EvaluationError(f"zero to a negative power in {label}")
            out = np.power(base, ex)
            return out if out.ndim else float(out)
        return rpow
    if op in ("min", "max"):
        fn = np.minimum if op == "min" else np.maximum

        def reduce_(t, xs, us):
            acc = args[0](t, xs, us)
            for g in args[1:]:
                acc = fn(acc, g(t, xs, us))
            return acc
        return reduce_
    raise ExpressionSyntaxError(f"cannot compile {op}")  # pragma: no cover


def _compile_piecewise(e: Piecewise) -> Evaluator:
    breaks = np.asarray(e.breaks, dtype=float)
    pieces = [_compile(p) for p in e.pieces]

    def piecewise(t, xs, us):
        k = np.searchsorted(breaks, t, side="right")
        if np.ndim(k) == 0:
            return pieces[int(k)](t, xs, us)
        vals = [p(t, xs, us) for p in pieces]
        shape = np.broadcast_shapes(np.shape(t), *(np.shape(v) for v in vals))
        k = np.broadcast_to(k, shape)
        out = np.empty(shape)
        for i, v in enumerate(vals):
            sel = k == i
            out[sel] = np.broadcast_to(v, shape)[sel]
        return out

    return piecewise
