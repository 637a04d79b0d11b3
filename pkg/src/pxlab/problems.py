"""Built-in test problems, the manufactured-solution builder and the JSON problem loader."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import sympy

from .exponents import StructureConstants
from .expr import ExpressionError, compile_expression
from .grid import BoxDomain
from .solver import ProblemSpec
from .structure import (
    ConstantExponent,
    ExpressionBoundary,
    ExpressionExponent,
    ExpressionFlux,
    ExpressionSource,
    PLaplacian,
    PowerBoundaryFlux,
    PowerReaction,
    Zero,
)

__all__ = [
    "ConfigError",
    "BUILTINS",
    "builtin",
    "builtin_suite",
    "heat_1d",
    "heat_neumann",
    "plaplacian_reaction",
    "variable_exponent_flux",
    "manufactured_problem",
    "problem_from_dict",
    "load_problem",
]


class ConfigError(ValueError):
    """Malformed problem or run configuration."""


def _cos_product(x):
    return np.prod(np.cos(np.pi * np.asarray(x)), axis=-1)


def heat_1d(T: float = 0.1) -> ProblemSpec:
    """``u_t = u_xx`` on (0,1), zero flux, ``u0 = cos(pi x)``; exact ``exp(-pi^2 t) cos(pi x)``."""
    two = ConstantExponent(2.0)
    return ProblemSpec(
        name="heat-1d",
        domain=BoxDomain.unit(1),
        T=T,
        u0=_cos_product,
        A=PLaplacian(two),
        B=Zero(),
        C=Zero(),
        p=two,
        q1=ConstantExponent(2.5),
        q2=ConstantExponent(2.5),
        exact=lambda t, x: np.exp(-np.pi**2 * t) * _cos_product(x),
        time_independent_p=True,
    )


def heat_neumann(T: float = 0.1) -> ProblemSpec:
    """Heat equation on the unit square with zero flux, ``u0 = cos(pi x1) cos(pi x2)``."""
    two = ConstantExponent(2.0)
    return ProblemSpec(
        name="heat-neumann",
        domain=BoxDomain.unit(2),
        T=T,
        u0=_cos_product,
        A=PLaplacian(two),
        B=Zero(),
        C=Zero(),
        p=two,
        q1=ConstantExponent(2.5),
        q2=ConstantExponent(2.5),
        exact=lambda t, x: np.exp(-2 * np.pi**2 * t) * _cos_product(x),
        time_independent_p=True,
    )


def plaplacian_reaction(T: float = 0.5) -> ProblemSpec:
    """``u_t - div(|grad u|^0.5 grad u) = |u| u`` with zero flux."""
    p, q = ConstantExponent(2.5), ConstantExponent(3.0)
    return ProblemSpec(
        name="p-laplacian-reaction",
        domain=BoxDomain.unit(2),
        T=T,
        u0=lambda x: 1.0 + 0.5 * _cos_product(x),
        A=PLaplacian(p),
        B=PowerReaction(q, 1.0),
        C=Zero(),
        p=p,
        q1=q,
        q2=q,
        time_independent_p=True,
    )


def variable_exponent_flux(T: float = 0.25) -> ProblemSpec:
    """Variable p(t,x) diffusion with nonlinear boundary flux ``0.5 |u|^(q2-2) u``."""

    def p(t, x):
        x = np.asarray(x)
        return 2.0 + 0.3 * np.sin(2 * np.pi * x[..., 0]) * np.sin(2 * np.pi * np.asarray(t))

    def q1(t, x):
        return p(t, x) + 0.5

    def q2(t, x):
        return p(t, x) + 0.25

    return ProblemSpec(
        name="variable-exponent-flux",
        domain=BoxDomain.unit(2),
        T=T,
        u0=lambda x: 1.0 + 0.5 * _cos_product(x),
        A=PLaplacian(p),
        B=Zero(),
        C=PowerBoundaryFlux(q2, 0.5),
        p=p,
        q1=q1,
        q2=q2,
    )


BUILTINS = {
    "heat-1d": heat_1d,
    "heat-neumann": heat_neumann,
    "p-laplacian-reaction": plaplacian_reaction,
    "variable-exponent-flux": variable_exponent_flux,
}


def builtin(name: str, **kw) -> ProblemSpec:
    try:
        return BUILTINS[name](**kw)
    except KeyError:
        raise ConfigError(f"unknown built-in problem {name!r}; choose from {sorted(BUILTINS)}") from None


def builtin_suite() -> list[ProblemSpec]:
    """The 2D suite used by the energy and certificate checks."""
    return [heat_neumann(), plaplacian_reaction(), variable_exponent_flux()]


# --------------------------------------------------------------------- manufactured solutions


def manufactured_problem(
    p_src: str = "2 + 0.5*t*x1",
    u_src: str = "exp(-t)*(1 + x1**2)",
    T: float = 0.5,
) -> ProblemSpec:
    """1D problem ``u_t - (|u_x|^(p-2) u_x)_x = f`` whose exact solution is ``u_src``.

    The interior source ``f`` and the boundary flux ``A . nu`` of the target are
    derived symbolically; the boundary forcing makes the target satisfy the
    flux condition with ``C = 0``.
    """
    t, x = sympy.symbols("t x1", real=True)
    loc = {"t": t, "x1": x, "exp": sympy.exp, "sin": sympy.sin, "cos": sympy.cos}
    pe = sympy.sympify(p_src, locals=loc)
    ue = sympy.sympify(u_src, locals=loc)
    ux = sympy.diff(ue, x)
    flux = sympy.Abs(ux) ** (pe - 2) * ux
    f = sympy.diff(ue, t) - sympy.diff(flux, x)
    f_np = sympy.lambdify((t, x), f, "numpy")
    flux_np = sympy.lambdify((t, x), flux, "numpy")
    u_np = sympy.lambdify((t, x), ue, "numpy")
    p_np = sympy.lambdify((t, x), pe, "numpy")

    def bc(fn):
        def call(t_, x_):
            t_, x_ = np.asarray(t_, float), np.asarray(x_, float)[..., 0]
            with np.errstate(all="ignore"):
                v = np.asarray(fn(t_, x_), dtype=float)
                bad = ~np.isfinite(v)
                if np.any(bad):
                    # removable singularities such as 0*log(0): evaluate just inside
                    x_in = np.where(x_ > 0.5, x_ - 1e-12, x_ + 1e-12)
                    v = np.where(bad, fn(t_, x_in), v)
            return np.broadcast_to(v, np.broadcast_shapes(t_.shape, x_.shape)).astype(float)

        return call

    p, f_b, flux_b, u_b = bc(p_np), bc(f_np), bc(flux_np), bc(u_np)

    return ProblemSpec(
        name="mms-variable-exponent",
        domain=BoxDomain.unit(1),
        T=T,
        u0=lambda xx: u_b(0.0, xx),
        A=PLaplacian(p),
        B=Zero(),
        C=Zero(),
        p=p,
        q1=lambda tt, xx: p(tt, xx) + 0.5,
        q2=lambda tt, xx: p(tt, xx) + 0.25,
        forcing=f_b,
        boundary_forcing=lambda tt, xx, nu: flux_b(tt, xx) * nu[0],
        exact=u_b,
    )


# --------------------------------------------------------------------- JSON loader


def _exponent(src, N):
    if isinstance(src, (int, float)) and not isinstance(src, bool):
        return ConstantExponent(float(src))
    return ExpressionExponent(src, N)


def _structure(entry, kind: str, N: int, exps: dict):
    if entry is None or entry == 0:
        return Zero()
    if not isinstance(entry, dict):
        raise ConfigError(f"structure entry {kind} must be an object, 0 or null")
    coef = float(entry.get("coef", 1.0))
    if "type" in entry:
        typ = entry["type"]
        if kind == "A" and typ == "p-laplacian":
            return PLaplacian(exps["p"], coef)
        if kind == "B" and typ == "power-reaction":
            return PowerReaction(exps["q1"], coef)
        if kind == "C" and typ == "power-boundary-flux":
            return PowerBoundaryFlux(exps["q2"], coef)
        if typ == "zero":
            return Zero()
        raise ConfigError(f"built-in {typ!r} is not valid for {kind}")
    if "expr" in entry:
        src = entry["expr"]
        if kind == "A":
            return ExpressionFlux(src if isinstance(src, list) else [src], N, exps)
        if kind == "B":
            return ExpressionSource(src, N, exps)
        return ExpressionBoundary(src, N, exps)
    raise ConfigError(f"structure entry {kind} needs 'type' or 'expr'")


def problem_from_dict(d: dict) -> ProblemSpec:
    """Build a ProblemSpec from a JSON-style dict (see README for the schema)."""
    if "builtin" in d:
        kw = {"T": float(d["T"])} if "T" in d else {}
        return builtin(d["builtin"], **kw)
    try:
        dom = BoxDomain(tuple(d["domain"]["lower"]), tuple(d["domain"]["upper"]))
        N = dom.N
        ex = d["exponents"]
        exps = {k: _exponent(ex[k], N) for k in ("p", "q1", "q2")}
        u0 = compile_expression(d["u0"], tuple(f"x{i + 1}" for i in range(N)))
        consts = StructureConstants(**d.get("constants", {}))
        spec = ProblemSpec(
            name=str(d.get("name", "custom")),
            domain=dom,
            T=float(d["T"]),
            u0=lambda x: u0(**{f"x{i + 1}": np.asarray(x)[..., i] for i in range(N)}),
            A=_structure(d.get("A", {"type": "p-laplacian"}), "A", N, exps),
            B=_structure(d.get("B"), "B", N, exps),
            C=_structure(d.get("C"), "C", N, exps),
            p=exps["p"],
            q1=exps["q1"],
            q2=exps["q2"],
            constants=consts,
            time_independent_p=bool(d.get("time_independent_p", False)),
        )
    except KeyError as exc:
        raise ConfigError(f"problem config missing field {exc}") from None
    except (ExpressionError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return spec


def load_problem(path) -> ProblemSpec:
    with open(Path(path)) as fh:
        return problem_from_dict(json.load(fh))
