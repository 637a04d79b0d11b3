"""Smoothing operators: spatial mollifier, exponential time averages, Steklov
averages, and the regularized weak formulation with its boundary-collar remainder.

Time averages act on the piecewise-linear interpolant of a sampled signal and
are integrated exactly, so ``(tau_h w)_t = (w - tau_h w) / h`` holds at nodes
and the backward average is the exact discrete adjoint of the forward one in
the trapezoid inner product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.ndimage import convolve
from scipy.signal import fftconvolve

from .grid import SampledField, SpaceTimeGrid, SpatialGrid, gradient

__all__ = [
    "MollifierKernel",
    "mollify_space",
    "time_average",
    "time_average_field",
    "steklov",
    "steklov_field",
    "ResidualReport",
    "regularized_residual",
    "steklov_residual",
    "CollarUnresolved",
]


def _bump(r2):
    out = np.zeros_like(r2)
    inside = r2 < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return out


@dataclass(frozen=True)
class MollifierKernel:
    """``rho_h(x) = h^-N rho(x/h)`` sampled on a grid with the given spacing.

    ``c_N`` is computed by midpoint quadrature on a 33^N sub-grid of the unit
    cube; the discrete stencil is then renormalized to sum exactly to one.
    """

    h: float
    spacing: tuple[float, ...]
    subgrid: int = 33

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("mollifier radius must be positive")
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))

    @property
    def N(self) -> int:
        return len(self.spacing)

    @cached_property
    def c_N(self) -> float:
        m = self.subgrid
        c = (np.arange(m) + 0.5) * 2.0 / m - 1.0
        mesh = np.meshgrid(*([c] * self.N), indexing="ij")
        r2 = sum(g * g for g in mesh)
        return 1.0 / (np.sum(_bump(r2)) * (2.0 / m) ** self.N)

    def rho(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.c_N * _bump(np.sum(x * x, axis=-1))

    @cached_property
    def radius_nodes(self) -> tuple[int, ...]:
        return tuple(int(math.floor(self.h / s * (1 - 1e-12))) for s in self.spacing)

    @cached_property
    def stencil(self) -> np.ndarray:
        """Discrete weights ``rho_h(x_k) * prod(spacing)``, normalized to sum 1."""
        axes = [np.arange(-r, r + 1) * s / self.h for r, s in zip(self.radius_nodes, self.spacing)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        w = self.rho(mesh)
        total = w.sum()
        if total == 0.0:
            # radius below the grid spacing: identity
            w = np.zeros(w.shape)
            w[tuple(r for r in self.radius_nodes)] = 1.0
            return w
        return w / total

    @property
    def is_identity(self) -> bool:
        return all(r == 0 for r in self.radius_nodes)


def mollify_space(w: SampledField, h: float) -> SampledField:
    """``S_h w`` on the original grid, with ``w`` extended evenly across the boundary.

    Radii below the grid spacing leave ``w`` unchanged.
    """
    space = w.grid.space if w.is_spacetime else w.grid
    if any(h >= 0.5 * wd for wd in space.domain.widths):
        raise ValueError("mollifier radius must be below half the domain width")
    if w.rank != 0:
        raise ValueError("mollify_space expects a scalar field")
    k = MollifierKernel(h, space.h)
    if k.is_identity:
        return w
    st = k.stencil
    if w.is_spacetime:
        st = st[None]
    return SampledField(w.grid, convolve(w.values, st, mode="mirror"))


# --------------------------------------------------------------------- time averages


def _coefficients(dt, h):
    a = dt / h
    E = math.exp(-a)
    if a < 1e-4:
        # series to avoid cancellation
        I0 = 1 - a / 2 + a * a / 6 - a**3 / 24
        I1 = 0.5 - a / 3 + a * a / 8 - a**3 / 30
    else:
        I0 = (1.0 - E) / a
        I1 = (1.0 - E - a * E) / (a * a)
    return E, a * I1, a * (I0 - I1)


def time_average(w, dt: float, h: float, direction: str = "forward", axis: int = 0) -> np.ndarray:
    """Exponential time average of a sampled signal along ``axis``.

    forward:  ``(tau_h w)(t) = (1/h) int_0^t exp(-(t-s)/h) w(s) ds`` of the linear interpolant.
    backward: ``tau_h^*``, the trapezoid adjoint ``W^-1 K^T W`` of the forward map ``K``,
    so ``sum(W v tau^* w) == sum(W (tau v) w)`` to rounding.
    """
    if not h > 0:
        raise ValueError("averaging parameter h must be positive")
    w = np.moveaxis(np.asarray(w, dtype=float), axis, 0)
    n = w.shape[0]
    E, alpha, beta = _coefficients(dt, h)
    out = np.empty_like(w)
    if direction == "forward":
        out[0] = 0.0
        for i in range(1, n):
            out[i] = E * out[i - 1] + alpha * w[i - 1] + beta * w[i]
    elif direction == "backward":
        W = np.full(n, dt)
        W[0] = W[-1] = 0.5 * dt
        z = w * W.reshape((-1,) + (1,) * (w.ndim - 1))
        S = np.empty_like(w)
        S[-1] = z[-1]
        for j in range(n - 2, -1, -1):
            S[j] = z[j] + E * S[j + 1]
        out[-1] = beta * S[-1]
        out[:-1] = alpha * S[1:]
        out[1:-1] += beta * S[1:-1]
        out /= W.reshape((-1,) + (1,) * (w.ndim - 1))
    else:
        raise ValueError(f"direction must be 'forward' or 'backward', not {direction!r}")
    return np.moveaxis(out, 0, axis)


def time_average_field(u: SampledField, h: float, direction: str = "forward") -> SampledField:
    if not u.is_spacetime:
        raise ValueError("time averages need a space-time field")
    return SampledField(u.grid, time_average(u.values, u.grid.dt, h, direction))


def steklov(v, dt: float, h: float, axis: int = 0) -> np.ndarray:
    """``v_h(t) = (1/h) int_t^{t+h} v`` on the nodes of ``[0, T-h]`` (trapezoid).

    ``h`` must be a positive integer multiple of ``dt``.
    """
    m = h / dt
    if not h > 0 or abs(m - round(m)) > 1e-9 * max(1.0, m):
        raise ValueError("Steklov step h must be a positive multiple of the time step")
    m = int(round(m))
    v = np.moveaxis(np.asarray(v, dtype=float), axis, 0)
    if m >= v.shape[0] - 1:
        raise ValueError("Steklov step must be shorter than the horizon")
    cum = np.concatenate([np.zeros((1,) + v.shape[1:]), np.cumsum(0.5 * dt * (v[1:] + v[:-1]), axis=0)])
    out = (cum[m:] - cum[:-m]) / h
    return np.moveaxis(out, 0, axis)


def steklov_field(u: SampledField, h: float) -> SampledField:
    g = u.grid
    vals = steklov(u.values, g.dt, h)
    m = vals.shape[0] - 1
    grid = SpaceTimeGrid(g.space, m * g.dt, m)
    return SampledField(grid, vals)


# --------------------------------------------------------------------- regularized weak form


class CollarUnresolved(ValueError):
    """The boundary collar of width h^gamma cannot be resolved within the node budget."""


@dataclass(frozen=True)
class ResidualReport:
    h: float
    t0: float
    initial: float
    time_derivative: float
    remainder: float
    flux: float
    source: float
    boundary: float
    defect: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _cutoff(s):
    """C^1 cutoff: 1 at s = 0, 0 for s >= 1."""
    return np.where(s < 1.0, np.cos(0.5 * np.pi * np.clip(s, 0.0, 1.0)) ** 2, 0.0)


class _ExtendedGrid:
    """Fine uniform grid covering Omega_h plus a mollifier margin."""

    def __init__(self, domain, h, gamma, max_nodes):
        self.domain = domain
        self.collar = h**gamma
        widths = domain.widths
        target = self.collar / 4.0
        self.m = [int(math.ceil(w / target)) for w in widths]
        self.dx = [w / m for w, m in zip(widths, self.m)]
        self.ext = [int(math.ceil((self.collar + h) / d)) + 1 for d in self.dx]
        sizes = [m + 1 + 2 * e for m, e in zip(self.m, self.ext)]
        if float(np.prod(sizes, dtype=float)) > max_nodes:
            raise CollarUnresolved(
                f"collar width {self.collar:.3g} needs {int(np.prod(sizes, dtype=float))} fine nodes "
                f"(budget {max_nodes})"
            )
        lo = np.asarray(domain.lower)
        self.axes = [lo[d] + (np.arange(sizes[d]) - self.ext[d]) * self.dx[d] for d in range(domain.N)]
        self.shape = tuple(sizes)
        X = np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)
        self.coords = X
        lo, hi = np.asarray(domain.lower), np.asarray(domain.upper)
        out = np.maximum(lo - X, 0.0) + np.maximum(X - hi, 0.0)
        self.dist = np.linalg.norm(out, axis=-1)
        self.reflected = np.where(X < lo, 2 * lo - X, np.where(X > hi, 2 * hi - X, X))
        inside = [(a >= lo[d] - 1e-12 * self.dx[d]) & (a <= hi[d] + 1e-12 * self.dx[d]) for d, a in enumerate(self.axes)]
        w = np.ones(())
        for d in range(domain.N):
            wd = np.where(inside[d], self.dx[d], 0.0)
            i0, i1 = self.ext[d], self.ext[d] + self.m[d]
            wd[i0] *= 0.5
            wd[i1] *= 0.5
            w = np.multiply.outer(w, wd)
        self.w_omega = w
        cell = float(np.prod(self.dx))
        self.w_collar = np.where((self.dist <= self.collar) & (self.dist < np.inf), cell, 0.0) - w
        self.w_collar[self.dist > self.collar] = 0.0
        self.w_collar = np.clip(self.w_collar, 0.0, None)
        self.chi = _cutoff(self.dist / self.collar)
        self.omega_index = tuple(slice(e, e + m + 1) for e, m in zip(self.ext, self.m))

    def extend(self, fn_t_x, times):
        """``E_h f``: reflection across the box times the collar cutoff."""
        t = np.asarray(times).reshape((-1,) + (1,) * self.domain.N)
        vals = np.broadcast_to(fn_t_x(t, self.reflected[None]), (len(times),) + self.shape)
        return vals * self.chi[None]

    def mollify(self, vals, h):
        k = MollifierKernel(h, self.dx)
        st = k.stencil[None]
        return fftconvolve(vals, st, mode="same", axes=tuple(range(1, 1 + self.domain.N)))

    def face_parts(self):
        """Per face: (index into the fine grid, surface weights)."""
        out = []
        N = self.domain.N
        for d in range(N):
            for side in (0, 1):
                idx = list(self.omega_index)
                idx[d] = self.ext[d] + (0 if side == 0 else self.m[d])
                w = np.ones(())
                for k in range(N):
                    if k != d:
                        wk = np.full(self.m[k] + 1, self.dx[k])
                        wk[0] = wk[-1] = 0.5 * self.dx[k]
                        w = np.multiply.outer(w, wk)
                out.append((tuple(idx), w))
        return out


def _interpolator(space: SpatialGrid, values):
    """Linear interpolation in space of ``values`` with shape ``(nt+1, *n, ...)``."""
    v = np.moveaxis(values, 0, space.N)  # (*n, nt+1, ...)
    return RegularGridInterpolator(space.axes, v, method="linear", bounds_error=False, fill_value=None)


def regularized_residual(
    sol,
    psi: Callable,
    h: float,
    problem,
    t0: float | None = None,
    gamma: float = 3.0,
    max_nodes: int = 4_000_000,
    u_fn: Callable | None = None,
) -> ResidualReport:
    """Time-integrated terms of the regularized weak formulation over ``(0, t0)``.

    Terms (each integrated over ``(0, t0)``)::

        initial  = -(1/h) int exp(-t/h) u0 S_h E_h psi
        time     =  int_Omega (tau_h S_h E_h u)_t psi
        remainder=  int_{collar} (tau_h E_h u)_t S_h E_h psi - int_{collar} (tau_h S_h E_h u)_t E_h psi
        flux     =  int_Omega tau_h A . grad(S_h E_h psi)
        source   =  int_Omega tau_h B  S_h E_h psi
        boundary =  int_Gamma tau_h C  S_h E_h psi

    ``defect = initial + time - remainder + flux - source - boundary``.
    ``E_h`` reflects across the boundary and multiplies by a cutoff vanishing
    at distance ``h^gamma``.

    Raises
    ------
    CollarUnresolved
        if resolving the collar with four cells needs more than ``max_nodes`` nodes.
    """
    grid = sol.grid
    space = grid.space
    T0 = grid.T if t0 is None else float(t0)
    fg = _ExtendedGrid(space.domain, h, gamma, max_nodes)
    times = grid.times
    dt = grid.dt
    nd = space.N
    sp_axes = tuple(range(1, 1 + nd))

    U = sol.u.values
    if u_fn is not None:
        Eu = fg.extend(u_fn, times)
    else:
        interp_u = _interpolator(space, U)
        Eu_vals = interp_u(fg.reflected.reshape(-1, nd)).reshape(fg.shape + (len(times),))
        Eu = np.moveaxis(Eu_vals, -1, 0) * fg.chi[None]
    Epsi = fg.extend(psi, times)
    SEpsi = fg.mollify(Epsi, h)
    SEu = fg.mollify(Eu, h)

    tau_Eu = time_average(Eu, dt, h)
    tau_SEu = time_average(SEu, dt, h)
    dtau_Eu = (Eu - tau_Eu) / h
    dtau_SEu = (SEu - tau_SEu) / h

    tw = grid.time_weights(T0).reshape((-1,) + (1,) * nd)
    wO = fg.w_omega[None] * tw
    wC = fg.w_collar[None] * tw

    u0 = np.broadcast_to(problem.u0(fg.reflected), fg.shape)
    e1 = np.exp(-times / h).reshape((-1,) + (1,) * nd)
    initial = -float(np.sum(wO * e1 / h * u0[None] * SEpsi))
    time_term = float(np.sum(wO * dtau_SEu * Epsi))
    remainder = float(np.sum(wC * dtau_Eu * SEpsi) - np.sum(wC * dtau_SEu * Epsi))

    tt = times.reshape((-1,) + (1,) * nd)
    X = space.coords[None]
    G = gradient(sol.u).values
    Av = problem.A(tt, X, U, G)
    Bv = np.broadcast_to(problem.B(tt, X, U, G), U.shape)
    if problem.forcing is not None:
        Bv = Bv + problem.forcing(tt, X)
    tA = time_average(Av, dt, h)
    tB = time_average(Bv, dt, h)
    pts = fg.coords[fg.omega_index].reshape(-1, nd)
    oshape = fg.coords[fg.omega_index].shape[:-1]
    tA_f = np.moveaxis(_interpolator(space, tA)(pts).reshape(oshape + (len(times), nd)), nd, 0)
    tB_f = np.moveaxis(_interpolator(space, tB)(pts).reshape(oshape + (len(times),)), nd, 0)
    gS = np.gradient(SEpsi, *fg.dx, axis=sp_axes)
    if nd == 1:
        gS = [gS]
    gS = np.stack(gS, axis=-1)[(slice(None),) + fg.omega_index]
    wOi = fg.w_omega[fg.omega_index][None] * tw
    flux = float(np.sum(wOi * np.sum(tA_f * gS, axis=-1)))
    source = float(np.sum(wOi * tB_f * SEpsi[(slice(None),) + fg.omega_index]))

    boundary = 0.0
    Cv = np.empty_like(U)
    for d, side, nu in space.domain.faces():
        idx = space.face_index(d, side)
        full = (slice(None),) + idx
        c = problem.C(tt.reshape((-1,) + (1,) * (nd - 1)), space.coords[idx][None], U[full])
        if problem.boundary_forcing is not None:
            c = c + problem.boundary_forcing(tt.reshape((-1,) + (1,) * (nd - 1)), space.coords[idx][None], nu)
        Cv[full] = c
    tC = time_average(Cv, dt, h)
    interp_c = _interpolator(space, tC)
    twb = grid.time_weights(T0)
    for idx, w in fg.face_parts():
        xs = fg.coords[idx]
        vals = np.moveaxis(interp_c(xs.reshape(-1, nd)).reshape(xs.shape[:-1] + (len(times),)), -1, 0)
        s = SEpsi[(slice(None),) + idx]
        boundary += float(np.sum(twb.reshape((-1,) + (1,) * (nd - 1)) * w * vals * s))

    defect = initial + time_term - remainder + flux - source - boundary
    return ResidualReport(h, T0, initial, time_term, remainder, flux, source, boundary, defect)


def steklov_residual(sol, psi: Callable, h: float, problem, t0: float | None = None) -> ResidualReport:
    """Steklov-averaged weak form for time-independent exponents, integrated over ``(0, t0)``.

    ``int (u_h)_t psi + int (A)_h . grad psi - int (B)_h psi - int_Gamma (C)_h psi``,
    with ``(u_h)_t = (u(t+h) - u(t)) / h``; ``t0 <= T - h``.
    """
    grid = sol.grid
    space = grid.space
    nd = space.N
    U = sol.u.values
    m = int(round(h / grid.dt))
    if m < 1 or m >= grid.nt:
        raise ValueError("Steklov step must be a positive multiple of dt below T")
    sgrid = SpaceTimeGrid(space, (grid.nt - m) * grid.dt, grid.nt - m)
    T0 = sgrid.T if t0 is None else float(t0)
    tt = grid.times.reshape((-1,) + (1,) * nd)
    X = space.coords[None]
    G = gradient(sol.u).values
    Ah = steklov(problem.A(tt, X, U, G), grid.dt, h)
    Bv = np.broadcast_to(problem.B(tt, X, U, G), U.shape)
    if problem.forcing is not None:
        Bv = Bv + problem.forcing(tt, X)
    Bh = steklov(Bv, grid.dt, h)
    du = (U[m:] - U[:-m]) / h
    ts = sgrid.times.reshape((-1,) + (1,) * nd)
    P = np.broadcast_to(psi(ts, X), sgrid.shape)
    gP = gradient(SampledField(sgrid, P)).values
    w = sgrid.time_weights(T0).reshape((-1,) + (1,) * nd) * space.weights
    time_term = float(np.sum(w * du * P))
    flux = float(np.sum(w * np.sum(Ah * gP, axis=-1)))
    source = float(np.sum(w * Bh * P))
    boundary = 0.0
    for d, side, nu in space.domain.faces():
        idx = space.face_index(d, side)
        full = (slice(None),) + idx
        tb = tt.reshape((-1,) + (1,) * (nd - 1))
        c = problem.C(tb, space.coords[idx][None], U[full])
        if problem.boundary_forcing is not None:
            c = c + problem.boundary_forcing(tb, space.coords[idx][None], nu)
        ch = steklov(np.broadcast_to(c, U[full].shape), grid.dt, h)
        boundary += float(
            np.sum(sgrid.time_weights(T0).reshape((-1,) + (1,) * (nd - 1)) * space.face_weights(d) * ch * P[full])
        )
    defect = time_term + flux - source - boundary
    return ResidualReport(h, T0, 0.0, time_term, 0.0, flux, source, boundary, defect)
