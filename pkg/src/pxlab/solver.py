"""Implicit-Euler finite-volume solver for ``u_t - div A(t,x,u,grad u) = B`` with
nonlinear flux boundary condition ``A . nu = C(t,x,u)``.

Unknowns live on the nodes of a uniform box grid.  Node ``i`` owns a control
volume of size ``prod_d cv_d`` (``h_d`` inside, ``h_d / 2`` on the boundary), so
the control volumes are exactly the trapezoid weights.  Normal fluxes are
evaluated at face midpoints; on a boundary face the missing half-cell flux is
replaced by the prescribed ``C``, which is the ghost-node closure
``F_{-1/2} = 2 F_0 - F_{1/2}`` with ``F_0 = -C``.  Summed against the weights
the discrete divergence telescopes to the boundary integral of ``C``.

Each step solves the nonlinear system with damped Newton; the Jacobian comes
from finite differences with a 3^N colouring of the compact stencil.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .exponents import ExponentField, HypothesisSet, StructureConstants
from .grid import (
    BoxDomain,
    SampledField,
    SpaceTimeGrid,
    SpatialGrid,
    TraceField,
    gradient,
    trace,
)
from .structure import MirroredBoundary, MirroredFlux, MirroredSource

__all__ = [
    "ProblemSpec",
    "SolverConfig",
    "StepDiagnostics",
    "Solution",
    "SolverDivergence",
    "solve",
    "WeakResidualReport",
    "weak_residual",
    "default_test_functions",
    "interpolate_exact",
]

log = logging.getLogger(__name__)


class SolverDivergence(RuntimeError):
    """A time step failed to converge or produced non-finite values."""

    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or []


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Problem data; exponents ``p, q1, q2`` are callables ``(t, x) -> array``.

    ``forcing(t, x)`` is an extra interior source and
    ``boundary_forcing(t, x, nu)`` an extra boundary flux; both exist for
    manufactured solutions and are ``None`` otherwise.
    """

    name: str
    domain: BoxDomain
    T: float
    u0: Callable
    A: Callable
    B: Callable
    C: Callable
    p: Callable
    q1: Callable
    q2: Callable
    constants: StructureConstants = StructureConstants()
    forcing: Callable | None = None
    boundary_forcing: Callable | None = None
    exact: Callable | None = None
    time_independent_p: bool = False

    @property
    def N(self) -> int:
        return self.domain.N

    def hypotheses(self, grid: SpaceTimeGrid) -> HypothesisSet:
        return HypothesisSet(
            ExponentField.from_function(grid, self.p),
            ExponentField.from_function(grid, self.q1),
            ExponentField.from_function(grid, self.q2, boundary=True),
            self.constants,
        )

    def initial_values(self, space: SpatialGrid) -> np.ndarray:
        return np.broadcast_to(self.u0(space.coords), space.shape).astype(float)

    def negated(self) -> "ProblemSpec":
        """Problem solved by ``-u`` whenever ``u`` solves this one."""
        f, g, ex = self.forcing, self.boundary_forcing, self.exact
        return replace(
            self,
            name=f"{self.name}[negated]",
            u0=lambda x: -self.u0(x),
            A=MirroredFlux(self.A),
            B=MirroredSource(self.B),
            C=MirroredBoundary(self.C),
            forcing=None if f is None else (lambda t, x: -f(t, x)),
            boundary_forcing=None if g is None else (lambda t, x, nu: -g(t, x, nu)),
            exact=None if ex is None else (lambda t, x: -ex(t, x)),
        )


@dataclass(frozen=True)
class SolverConfig:
    n: tuple[int, ...] | int = 21
    nt: int = 40
    eps_reg: float = 1e-8
    tol: float = 1e-10
    max_iter: int = 100
    damping: float = 0.5

    def __post_init__(self):
        if not self.eps_reg > 0:
            raise ValueError("eps_reg must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.damping < 1:
            raise ValueError("damping must lie in (0, 1)")

    def grid(self, spec: ProblemSpec) -> SpaceTimeGrid:
        return SpaceTimeGrid.uniform(spec.domain, self.n, spec.T, self.nt)


@dataclass(frozen=True)
class StepDiagnostics:
    step: int
    iterations: int
    residual: float
    fallback_steps: int
    max_change: float
    converged: bool


@dataclass(frozen=True, eq=False)
class Solution:
    grid: SpaceTimeGrid
    u: SampledField
    diagnostics: tuple[StepDiagnostics, ...] = field(default=())

    @property
    def boundary(self) -> TraceField:
        return trace(self.u)

    @property
    def values(self) -> np.ndarray:
        return self.u.values

    def __neg__(self) -> "Solution":
        return Solution(self.grid, -self.u, self.diagnostics)


# --------------------------------------------------------------------- discretization


class _Operator:
    """Residual ``u - u_old - dt (div_h A + B + f)`` at one time level."""

    def __init__(self, spec: ProblemSpec, space: SpatialGrid, A: Callable):
        self.spec, self.space, self.A = spec, space, A
        self.N = space.N
        X = space.coords
        self.x = X
        self.cv = []
        self.face_x = []
        for d, (k, h) in enumerate(zip(space.n, space.h)):
            cv = np.full(k, h)
            cv[0] = cv[-1] = 0.5 * h
            self.cv.append(cv.reshape((-1,) + (1,) * (self.N - 1 - d)))
            lo = [slice(None)] * self.N
            hi = [slice(None)] * self.N
            lo[d], hi[d] = slice(0, -1), slice(1, None)
            self.face_x.append(0.5 * (X[tuple(lo)] + X[tuple(hi)]))
        self.faces = list(space.domain.faces())

    def _grad(self, u):
        parts = np.gradient(u, *self.space.h, edge_order=1)
        return np.stack(parts if self.N > 1 else [parts], axis=-1)

    def balance(self, t: float, u: np.ndarray) -> np.ndarray:
        """``div_h A + B + f`` per unit volume."""
        spec, N = self.spec, self.N
        G = self._grad(u)
        out = np.asarray(spec.B(t, self.x, u, G), dtype=float)
        if spec.forcing is not None:
            out = out + spec.forcing(t, self.x)
        for d in range(N):
            lo = [slice(None)] * N
            hi = [slice(None)] * N
            lo[d], hi[d] = slice(0, -1), slice(1, None)
            lo, hi = tuple(lo), tuple(hi)
            xi = 0.5 * (G[lo] + G[hi])
            xi[..., d] = (u[hi] - u[lo]) / self.space.h[d]
            F = self.A(t, self.face_x[d], 0.5 * (u[lo] + u[hi]), xi)[..., d]
            bshape = list(u.shape)
            bshape[d] = 1
            Fpad = []
            for side in (0, 1):
                idx = self.space.face_index(d, side)
                nu = np.zeros(N)
                nu[d] = -1.0 if side == 0 else 1.0
                xb = self.x[idx]
                c = np.asarray(spec.C(t, xb, u[idx]), dtype=float)
                if spec.boundary_forcing is not None:
                    c = c + spec.boundary_forcing(t, xb, nu)
                Fpad.append(np.reshape(nu[d] * c, bshape))
            Fpad = np.concatenate([Fpad[0], F, Fpad[1]], axis=d)
            hi2 = [slice(None)] * N
            lo2 = [slice(None)] * N
            hi2[d], lo2[d] = slice(1, None), slice(0, -1)
            out = out + (Fpad[tuple(hi2)] - Fpad[tuple(lo2)]) / self.cv[d]
        return out

    def residual(self, t, dt, u, u_old):
        return (u - u_old) - dt * self.balance(t, u)


def _colour_pattern(shape):
    """Per colour: (perturbation mask, rows, cols) for a 3^N-coloured compact stencil."""
    N = len(shape)
    idx = np.indices(shape).reshape(N, -1)
    flat = np.arange(idx.shape[1])
    out = []
    for c in np.ndindex(*(3,) * N):
        c = np.array(c)[:, None]
        mask = np.all(idx % 3 == c, axis=0)
        off = (c - idx) % 3
        off = np.where(off == 2, -1, off)
        j = idx + off
        valid = np.all((j >= 0) & (j < np.array(shape)[:, None]), axis=0)
        cols = np.ravel_multi_index(tuple(j[:, valid]), shape)
        out.append((mask, flat[valid], cols))
    return out


def _jacobian(fun, u, r0, pattern):
    size = u.size
    uf = u.ravel()
    step = np.sqrt(np.finfo(float).eps) * np.maximum(1.0, np.abs(uf))
    rows, cols, data = [], [], []
    for mask, r, c in pattern:
        if not np.any(mask):
            continue
        du = np.where(mask, step, 0.0)
        dr = fun((uf + du).reshape(u.shape)).ravel() - r0.ravel()
        rows.append(r)
        cols.append(c)
        data.append(dr[r] / step[c])
    J = sp.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
    )
    return J


def solve(spec: ProblemSpec, cfg: SolverConfig = SolverConfig()) -> Solution:
    """Implicit Euler in time, damped Newton per step.

    Raises :class:`SolverDivergence` when a step exhausts ``cfg.max_iter``
    or produces non-finite values.
    """
    grid = cfg.grid(spec)
    space = grid.space
    A = spec.A.with_eps(cfg.eps_reg) if hasattr(spec.A, "with_eps") else spec.A
    op = _Operator(spec, space, A)
    pattern = _colour_pattern(space.shape)
    U = np.empty(grid.shape)
    U[0] = spec.initial_values(space)
    if not np.all(np.isfinite(U[0])):
        raise ValueError("initial datum has non-finite values")
    dt = grid.dt
    diags = []
    for n in range(grid.nt):
        t = grid.times[n + 1]
        u_old = U[n]
        u = u_old.copy()
        scale = cfg.tol * max(1.0, float(np.max(np.abs(u_old))))

        def fun(v):
            return op.residual(t, dt, v, u_old)

        fallbacks = 0
        r = fun(u)
        rn = float(np.max(np.abs(r)))
        it = 0
        while not rn <= scale:
            if it >= cfg.max_iter or not np.isfinite(rn):
                diags.append(StepDiagnostics(n + 1, it, rn, fallbacks, float("nan"), False))
                raise SolverDivergence(
                    f"step {n + 1} (t={t:.4g}) failed: residual {rn:.3e} after {it} iterations",
                    diags,
                )
            it += 1
            J = _jacobian(fun, u, r, pattern)
            try:
                du = spsolve(J.tocsc(), -r.ravel()).reshape(u.shape)
            except RuntimeError:
                du = np.full(u.shape, np.nan)
            lam, accepted = 1.0, False
            if np.all(np.isfinite(du)):
                while lam > 1e-4:
                    trial = u + lam * du
                    rt = fun(trial)
                    rtn = float(np.max(np.abs(rt)))
                    if np.isfinite(rtn) and rtn < (1.0 - 1e-4 * lam) * rn:
                        u, r, rn, accepted = trial, rt, rtn, True
                        break
                    lam *= cfg.damping
            if not accepted:
                # damped Jacobi fixed-point step
                dj = J.diagonal().reshape(u.shape)
                dj = np.where(np.abs(dj) > 1e-14, dj, 1.0)
                u = u - cfg.damping * r / dj
                r = fun(u)
                rn = float(np.max(np.abs(r)))
                fallbacks += 1
        if not np.all(np.isfinite(u)):
            raise SolverDivergence(f"non-finite values at step {n + 1}", diags)
        U[n + 1] = u
        diags.append(
            StepDiagnostics(n + 1, it, rn, fallbacks, float(np.max(np.abs(u - u_old))), True)
        )
    log.debug("solved %s on %s nodes x %d steps", spec.name, space.shape, grid.nt)
    return Solution(grid, SampledField(grid, U), tuple(diags))


def interpolate_exact(spec: ProblemSpec, grid: SpaceTimeGrid) -> Solution:
    """Wrap the manufactured/exact solution sampled on ``grid`` as a Solution."""
    if spec.exact is None:
        raise ValueError(f"problem {spec.name!r} has no exact solution")
    return Solution(grid, SampledField(grid, grid.sample(spec.exact)))


# --------------------------------------------------------------------- weak residual


@dataclass(frozen=True)
class WeakResidualReport:
    max_defect: float
    defects: tuple[float, ...]
    terms: tuple[dict, ...]


def default_test_functions(domain: BoxDomain, T: float) -> list[Callable]:
    """Nonnegative test functions vanishing at ``t = T``."""
    lo, w = np.asarray(domain.lower), domain.widths

    def make(psi):
        return lambda t, x: (1.0 - t / T) * psi((np.asarray(x) - lo) / w)

    psis = [
        lambda z: np.ones(z.shape[:-1]),
        lambda z: 1.0 + np.cos(np.pi * z[..., 0]),
        lambda z: 1.0 + np.prod(np.cos(np.pi * z), axis=-1),
        lambda z: np.prod(np.sin(np.pi * z) ** 2, axis=-1),
        lambda z: np.exp(-np.sum((z - 0.3) ** 2, axis=-1) / 0.1),
    ]
    out = [make(psi) for psi in psis]
    # one test with a nonlinear time profile
    out.append(lambda t, x: (1.0 - t / T) ** 2 * (1.0 + np.cos(np.pi * (np.asarray(x)[..., 0] - lo[0]) / w[0])))
    return out


def weak_residual(sol: Solution, spec: ProblemSpec, tests: Sequence[Callable] | None = None) -> WeakResidualReport:
    """Signed defect of the weak formulation for each nonnegative test function.

    defect = -int u0 phi(0) - intint u phi_t + intint A . grad phi
             - intint (B + f) phi - intint_Gamma (C + g) phi
    """
    grid = sol.grid
    space = grid.space
    if tests is None:
        tests = default_test_functions(spec.domain, spec.T)
    A = spec.A
    U = sol.u.values
    t = grid.times.reshape((-1,) + (1,) * space.N)
    X = space.coords[None]
    G = gradient(sol.u).values
    Av = A(t, X, U, G)
    Bv = spec.B(t, X, U, G)
    if spec.forcing is not None:
        Bv = Bv + spec.forcing(t, X)
    w = grid.time_weights()[(slice(None),) + (None,) * space.N] * space.weights
    tw = grid.time_weights()
    u0 = spec.initial_values(space)
    defects, terms = [], []
    for phi_fn in tests:
        phi = SampledField(grid, grid.sample(phi_fn))
        phi_t = np.gradient(phi.values, grid.dt, axis=0, edge_order=2)
        gphi = gradient(phi).values
        init = -float(np.sum(space.weights * u0 * phi.values[0]))
        time = -float(np.sum(w * U * phi_t))
        flux = float(np.sum(w * np.sum(Av * gphi, axis=-1)))
        source = float(np.sum(w * Bv * phi.values))
        bnd = 0.0
        for d, side, nu in spec.domain.faces():
            idx = (slice(None),) + space.face_index(d, side)
            xb = space.coords[space.face_index(d, side)][None]
            c = spec.C(t.reshape((-1,) + (1,) * (space.N - 1)), xb, U[idx])
            if spec.boundary_forcing is not None:
                c = c + spec.boundary_forcing(t.reshape((-1,) + (1,) * (space.N - 1)), xb, nu)
            fw = space.face_weights(d)
            bnd += float(np.sum(tw.reshape((-1,) + (1,) * (space.N - 1)) * fw * c * phi.values[idx]))
        defect = init + time + flux - source - bnd
        defects.append(defect)
        terms.append({"initial": init, "time": time, "flux": flux, "source": source, "boundary": bnd, "defect": defect})
    return WeakResidualReport(float(np.max(np.abs(defects))), tuple(defects), tuple(terms))
