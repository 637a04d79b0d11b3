"""Built-in structure functions A, B, C and expression-string wrappers.

Calling conventions (all arguments broadcast, trailing axis of ``x``/``xi`` is
the spatial component)::

    A(t, x, s, xi) -> (..., N)     B(t, x, s, xi) -> (...)     C(t, x, s) -> (...)

Exponents are callables ``p(t, x)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .expr import compile_expression

__all__ = [
    "PLaplacian",
    "PowerReaction",
    "PowerBoundaryFlux",
    "Zero",
    "ExpressionFlux",
    "ExpressionSource",
    "ExpressionBoundary",
    "ConstantExponent",
    "ExpressionExponent",
    "MirroredFlux",
    "MirroredSource",
    "MirroredBoundary",
]


@dataclass(frozen=True)
class ConstantExponent:
    value: float

    def __call__(self, t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        return np.full(np.broadcast_shapes(t.shape, x.shape[:-1]), self.value)

    def __repr__(self):
        return f"{self.value:g}"


class ExpressionExponent:
    """Exponent given by an expression over ``t, x1..xN``."""

    def __init__(self, source, N: int):
        self.N = N
        self.source = source
        self.expr = compile_expression(source, ("t",) + tuple(f"x{i + 1}" for i in range(N)))

    def __call__(self, t, x):
        x = np.asarray(x, dtype=float)
        env = {"t": np.asarray(t, dtype=float)}
        env.update({f"x{i + 1}": x[..., i] for i in range(self.N)})
        return self.expr(**env)

    def __repr__(self):
        return str(self.source)


@dataclass(frozen=True)
class PLaplacian:
    """``coef * (|xi|^2 + eps)^((p-2)/2) xi``; eps is the gradient regularization."""

    p: Callable
    coef: float = 1.0
    eps: float = 1e-8

    def with_eps(self, eps: float) -> "PLaplacian":
        return replace(self, eps=eps)

    def __call__(self, t, x, s, xi):
        xi = np.asarray(xi, dtype=float)
        g2 = np.sum(xi * xi, axis=-1) + self.eps
        pv = self.p(t, x)
        return (self.coef * g2 ** ((pv - 2.0) / 2.0))[..., None] * xi


@dataclass(frozen=True)
class PowerReaction:
    """``coef * |s|^(q1-2) s``."""

    q1: Callable
    coef: float = 1.0

    def __call__(self, t, x, s, xi):
        s = np.asarray(s, dtype=float)
        a = np.abs(s)
        # |s|^(q-2) s -> 0 at s = 0 even when q < 2
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(a > 0, self.coef * a ** (self.q1(t, x) - 2.0) * s, 0.0)


@dataclass(frozen=True)
class PowerBoundaryFlux:
    """``coef * |s|^(q2-2) s`` on the boundary."""

    q2: Callable
    coef: float = 1.0

    def __call__(self, t, x, s):
        s = np.asarray(s, dtype=float)
        a = np.abs(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(a > 0, self.coef * a ** (self.q2(t, x) - 2.0) * s, 0.0)


class Zero:
    """Vanishing source / boundary flux, callable with either signature."""

    def __call__(self, t, x, s, xi=None):
        return np.zeros_like(np.asarray(s, dtype=float))

    def __repr__(self):
        return "Zero()"


def _env(N, t, x, s, xi=None, exps=None):
    x = np.asarray(x, dtype=float)
    env = {"t": np.asarray(t, dtype=float), "s": np.asarray(s, dtype=float)}
    env.update({f"x{i + 1}": x[..., i] for i in range(N)})
    if xi is not None:
        xi = np.asarray(xi, dtype=float)
        env.update({f"g{i + 1}": xi[..., i] for i in range(N)})
        env["gnorm"] = np.linalg.norm(xi, axis=-1)
    for name, fn in (exps or {}).items():
        env[name] = fn(t, x)
    return env


def _names(N, grad: bool, exps):
    names = ["t", "s"] + [f"x{i + 1}" for i in range(N)]
    if grad:
        names += [f"g{i + 1}" for i in range(N)] + ["gnorm"]
    return tuple(names) + tuple(exps)


class ExpressionFlux:
    """Vector flux A from N component expressions over ``t, x*, s, g*, gnorm`` and exponents."""

    def __init__(self, sources, N: int, exponents: dict):
        if len(sources) != N:
            raise ValueError(f"flux needs {N} component expressions")
        self.N, self.exps = N, exponents
        self.exprs = [compile_expression(src, _names(N, True, exponents)) for src in sources]

    def __call__(self, t, x, s, xi):
        env = _env(self.N, t, x, s, xi, self.exps)
        return np.stack([e(**env) for e in self.exprs], axis=-1)


class ExpressionSource:
    def __init__(self, source, N: int, exponents: dict):
        self.N, self.exps = N, exponents
        self.expr = compile_expression(source, _names(N, True, exponents))

    def __call__(self, t, x, s, xi):
        return self.expr(**_env(self.N, t, x, s, xi, self.exps))


class ExpressionBoundary:
    def __init__(self, source, N: int, exponents: dict):
        self.N, self.exps = N, exponents
        self.expr = compile_expression(source, _names(N, False, exponents))

    def __call__(self, t, x, s):
        return self.expr(**_env(self.N, t, x, s, None, self.exps))


# u -> -u mirrors used for supersolutions


@dataclass(frozen=True)
class MirroredFlux:
    A: Callable

    def __call__(self, t, x, s, xi):
        return -self.A(t, x, -np.asarray(s), -np.asarray(xi))

    def with_eps(self, eps):
        inner = self.A.with_eps(eps) if hasattr(self.A, "with_eps") else self.A
        return MirroredFlux(inner)


@dataclass(frozen=True)
class MirroredSource:
    B: Callable

    def __call__(self, t, x, s, xi):
        return -self.B(t, x, -np.asarray(s), -np.asarray(xi))


@dataclass(frozen=True)
class MirroredBoundary:
    C: Callable

    def __call__(self, t, x, s):
        return -self.C(t, x, -np.asarray(s))
