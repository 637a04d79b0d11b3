"""Small arithmetic-expression interpreter for closed-form fields in configs.

Expressions are parsed with :mod:`ast` and evaluated against numpy arrays, so
``"2 + 0.3*sin(2*pi*x1)*sin(2*pi*t)"`` becomes a vectorized callable.  Only
arithmetic, ``**``/``^``, a handful of elementary functions and named
constants are accepted; anything else raises :class:`ExpressionError`.
"""

from __future__ import annotations

import ast
import operator
from functools import reduce
from typing import Callable, Mapping

import numpy as np

__all__ = ["ExpressionError", "Expression", "compile_expression"]


class ExpressionError(ValueError):
    """Raised for malformed or disallowed expressions."""


_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: np.power,
}

_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def _nary(fn):
    def call(*args):
        if len(args) < 2:
            raise ExpressionError("min/max need at least two arguments")
        return reduce(fn, args)
    return call


_FUNCS: dict[str, Callable] = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "tanh": np.tanh,
    "min": _nary(np.minimum),
    "max": _nary(np.maximum),
}

_CONSTANTS = {"pi": np.pi, "e": np.e}


class Expression:
    """A compiled expression over a fixed set of variable names."""

    def __init__(self, source: str, variables: tuple[str, ...]):
        self.source = source
        self.variables = tuple(variables)
        try:
            # "^" as power, with the precedence of "**"
            tree = ast.parse(source.strip().replace("^", "**"), mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {source!r}: {exc.msg}") from None
        self._check(tree.body)
        self._tree = tree.body

    def _check(self, node: ast.AST) -> None:
        if isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if type(node.op) not in _UNARY:
                raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
            self._check(node.operand)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
                raise ExpressionError(f"unknown function in {self.source!r}")
            if node.keywords:
                raise ExpressionError("keyword arguments not allowed")
            for arg in node.args:
                self._check(arg)
        elif isinstance(node, ast.Name):
            if node.id not in self.variables and node.id not in _CONSTANTS:
                raise ExpressionError(f"unknown name {node.id!r} in {self.source!r}")
        elif isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                raise ExpressionError(f"literal {node.value!r} not allowed")
        else:
            raise ExpressionError(f"syntax {type(node).__name__} not allowed")

    def _eval(self, node: ast.AST, env: Mapping[str, object]):
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            return _UNARY[type(node.op)](self._eval(node.operand, env))
        if isinstance(node, ast.Call):
            return _FUNCS[node.func.id](*(self._eval(a, env) for a in node.args))
        if isinstance(node, ast.Name):
            if node.id in env:
                return env[node.id]
            return _CONSTANTS[node.id]
        return float(node.value)

    def __call__(self, **values):
        missing = [v for v in self.variables if v not in values]
        if missing:
            raise ExpressionError(f"missing variables {missing}")
        arrays = [np.asarray(v, dtype=float) for v in values.values()]
        shape = np.broadcast_shapes(*(a.shape for a in arrays)) if arrays else ()
        with np.errstate(all="ignore"):
            out = self._eval(self._tree, values)
        return np.broadcast_to(np.asarray(out, dtype=float), shape).copy()

    def __repr__(self):
        return f"Expression({self.source!r})"


def compile_expression(source: str | float | int, variables) -> Expression:
    """Compile ``source``; bare numbers are accepted as constant expressions."""
    if isinstance(source, (int, float)) and not isinstance(source, bool):
        source = repr(float(source))
    if not isinstance(source, str):
        raise ExpressionError(f"expected a string expression, got {type(source).__name__}")
    return Expression(source, tuple(variables))
