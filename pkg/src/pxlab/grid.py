"""Box domains, uniform space-time grids, sampled fields and quadrature.

Everything here is plain numpy on tensor-product grids.  Integrals use the
composite trapezoid rule in every direction (space, time and along boundary
faces), gradients use second-order central differences inside and
first-order one-sided differences on the boundary.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "BoxDomain",
    "SpatialGrid",
    "SpaceTimeGrid",
    "SampledField",
    "TraceField",
    "ConvergenceError",
    "integrate",
    "integrate_modular",
    "modular",
    "luxemburg_norm",
    "lp_norm",
    "gradient",
    "trace",
    "sup_over_time",
    "slice_integrals",
    "write_field_csv",
    "read_field_csv",
]


class ConvergenceError(RuntimeError):
    """An iterative procedure hit its iteration cap."""


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box ``prod_i (lower_i, upper_i)`` in R^N, N <= 3."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi) or not 1 <= len(lo) <= 3:
            raise ValueError("box corners must have matching dimension 1..3")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ValueError(f"need lower < upper componentwise, got {lo} / {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, N: int) -> "BoxDomain":
        return cls((0.0,) * N, (1.0,) * N)

    @property
    def N(self) -> int:
        return len(self.lower)

    @property
    def widths(self) -> np.ndarray:
        return np.subtract(self.upper, self.lower)

    @property
    def measure(self) -> float:
        return float(np.prod(self.widths))

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.widths))

    @property
    def boundary_measure(self) -> float:
        """(N-1)-dimensional measure of the boundary (counting measure in 1D)."""
        w = self.widths
        if self.N == 1:
            return 2.0
        return float(sum(2.0 * np.prod(np.delete(w, d)) for d in range(self.N)))

    def faces(self):
        """Yield ``(axis, side, outer_normal)`` with side 0 = lower, 1 = upper."""
        for d in range(self.N):
            for side in (0, 1):
                nu = np.zeros(self.N)
                nu[d] = -1.0 if side == 0 else 1.0
                yield d, side, nu

    def to_dict(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper)}


def _trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


@dataclass(frozen=True, eq=False)
class SpatialGrid:
    """Uniform node-based grid on a box, ``n[i]`` nodes along axis i."""

    domain: BoxDomain
    n: tuple[int, ...]

    def __post_init__(self):
        n = tuple(int(v) for v in np.broadcast_to(self.n, (self.domain.N,)))
        if any(v < 3 for v in n):
            raise ValueError("need at least 3 nodes per axis")
        object.__setattr__(self, "n", n)

    @property
    def N(self) -> int:
        return self.domain.N

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    @cached_property
    def h(self) -> tuple[float, ...]:
        return tuple(float(w) / (k - 1) for w, k in zip(self.domain.widths, self.n))

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(np.linspace(a, b, k) for a, b, k in zip(self.domain.lower, self.domain.upper, self.n))

    @cached_property
    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``(*n, N)``."""
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid (equivalently, control-volume) weights, shape ``n``."""
        w = np.ones(())
        for k, h in zip(self.n, self.h):
            w = np.multiply.outer(w, _trapezoid_weights(k, h))
        return w

    @cached_property
    def boundary_weights(self) -> np.ndarray:
        """Surface trapezoid weights for d-sigma, zero at interior nodes."""
        out = np.zeros(self.n)
        for d, side, _ in self.domain.faces():
            out[self.face_index(d, side)] += self.face_weights(d)
        return out

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        for d, side, _ in self.domain.faces():
            mask[self.face_index(d, side)] = True
        return mask

    def face_index(self, axis: int, side: int) -> tuple:
        idx = [slice(None)] * self.N
        idx[axis] = 0 if side == 0 else self.n[axis] - 1
        return tuple(idx)

    def face_weights(self, axis: int) -> np.ndarray:
        """Trapezoid weights on one face (a scalar 1.0 in 1D)."""
        w = np.ones(())
        for d, (k, h) in enumerate(zip(self.n, self.h)):
            if d != axis:
                w = np.multiply.outer(w, _trapezoid_weights(k, h))
        return w

    def to_dict(self) -> dict:
        return {"domain": self.domain.to_dict(), "n": list(self.n)}


@dataclass(frozen=True, eq=False)
class SpaceTimeGrid:
    """Tensor grid of ``nt + 1`` uniform time levels on ``[0, T]`` times a spatial grid."""

    space: SpatialGrid
    T: float
    nt: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        if int(self.nt) < 1:
            raise ValueError("need at least one time step")
        object.__setattr__(self, "nt", int(self.nt))
        object.__setattr__(self, "T", float(self.T))

    @classmethod
    def uniform(cls, domain: BoxDomain, n, T: float, nt: int) -> "SpaceTimeGrid":
        return cls(SpatialGrid(domain, n), T, nt)

    @property
    def domain(self) -> BoxDomain:
        return self.space.domain

    @property
    def N(self) -> int:
        return self.space.N

    @property
    def dt(self) -> float:
        return self.T / self.nt

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.nt + 1,) + self.space.shape

    @cached_property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.nt + 1)

    def time_weights(self, T0: float | None = None) -> np.ndarray:
        """Weights integrating the piecewise-linear interpolant over ``[0, T0]``."""
        if T0 is None or T0 >= self.T:
            return _trapezoid_weights(self.nt + 1, self.dt)
        if T0 < 0:
            raise ValueError("window end must be nonnegative")
        w = np.zeros(self.nt + 1)
        k = min(int(math.floor(T0 / self.dt + 1e-12)), self.nt)
        w[: k + 1] = _trapezoid_weights(k + 1, self.dt) if k > 0 else 0.0
        theta = (T0 - self.times[k]) / self.dt
        if theta > 1e-12 and k < self.nt:
            w[k] += self.dt * (theta - 0.5 * theta**2)
            w[k + 1] += self.dt * 0.5 * theta**2
        return w

    def sample(self, fn: Callable) -> np.ndarray:
        """Evaluate ``fn(t, x)`` on all nodes, ``t`` shape ``(nt+1, 1.., 1)``."""
        t = self.times.reshape((-1,) + (1,) * self.N)
        x = self.space.coords[None]
        return np.broadcast_to(fn(t, x), self.shape).astype(float)

    def to_dict(self) -> dict:
        return {**self.space.to_dict(), "T": self.T, "nt": self.nt}


@dataclass(frozen=True, eq=False)
class SampledField:
    """Node values on a spatial or space-time grid; scalar or N-vector valued."""

    grid: SpatialGrid | SpaceTimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        gs = self.grid.shape
        if v.shape != gs and v.shape != gs + (self.grid.N,):
            raise ValueError(f"field shape {v.shape} does not match grid {gs}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field has non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def rank(self) -> int:
        return 0 if self.values.shape == self.grid.shape else 1

    @property
    def is_spacetime(self) -> bool:
        return isinstance(self.grid, SpaceTimeGrid)

    def __neg__(self):
        return SampledField(self.grid, -self.values)

    def __mul__(self, c: float):
        return SampledField(self.grid, c * self.values)

    __rmul__ = __mul__

    def slice(self, k: int) -> "SampledField":
        """Time slice ``k`` as a spatial field."""
        return SampledField(self.grid.space, self.values[k])


@dataclass(frozen=True, eq=False)
class TraceField:
    """Boundary-node values per time slice with their d-sigma weights."""

    values: np.ndarray  # (nt + 1, n_boundary) or (n_boundary,)
    weights: np.ndarray  # (n_boundary,)
    index: tuple[np.ndarray, ...] = field(repr=False)

    def integral(self, fn=lambda v: v) -> np.ndarray:
        return np.tensordot(fn(self.values), self.weights, axes=([-1], [0]))


# --------------------------------------------------------------------- quadrature


def _space(grid):
    return grid.space if isinstance(grid, SpaceTimeGrid) else grid


def _weights(grid, region: str = "interior", window: float | None = None) -> np.ndarray:
    sp = _space(grid)
    if region == "interior":
        w = sp.weights
    elif region == "boundary":
        w = sp.boundary_weights
    else:
        raise ValueError(f"region must be 'interior' or 'boundary', not {region!r}")
    if isinstance(grid, SpaceTimeGrid):
        tw = grid.time_weights(window)
        w = tw.reshape((-1,) + (1,) * sp.N) * w
    return w


def _values(u) -> np.ndarray:
    return u.values if isinstance(u, SampledField) else np.asarray(u, dtype=float)


def _exponent(p, shape) -> np.ndarray:
    vals = getattr(p, "values", p)
    return np.broadcast_to(np.asarray(vals, dtype=float), shape)


def integrate(u: SampledField, region: str = "interior", window: float | None = None) -> float:
    """Trapezoid integral of a scalar field over Q_T (or Omega), or over Gamma."""
    return float(np.sum(_weights(u.grid, region, window) * u.values))


def integrate_modular(u: SampledField, p, region: str = "interior", window: float | None = None) -> float:
    """Trapezoid approximation of the modular ``int |u|^{p(t,x)}``."""
    v = np.abs(_values(u))
    w = _weights(u.grid, region, window)
    return float(np.sum(w * v ** _exponent(p, v.shape)))


modular = integrate_modular


def luxemburg_norm(
    u: SampledField,
    p,
    region: str = "interior",
    window: float | None = None,
    rtol: float = 1e-10,
    max_iter: int = 200,
) -> float:
    """Luxemburg norm ``inf{tau > 0 : modular(u / tau) <= 1}``.

    Bracketing by doubling/halving from ``tau = 1`` followed by bisection.
    The returned value is the upper end of the final bracket, so
    ``modular(u / norm) <= 1`` holds on the nose.
    """
    v = np.abs(_values(u))
    w = _weights(u.grid, region, window)
    pv = _exponent(p, v.shape)
    keep = (w > 0) & (v > 0)
    if not np.any(keep):
        return 0.0
    w, logv, pv = w[keep], np.log(v[keep]), pv[keep]

    def mod(tau):
        with np.errstate(over="ignore"):
            return float(np.sum(w * np.exp(pv * (logv - math.log(tau)))))

    it = 0
    lo = hi = 1.0
    if mod(1.0) > 1.0:
        while mod(hi) > 1.0:
            lo, hi = hi, 2.0 * hi
            it += 1
            if it > max_iter:
                raise ConvergenceError("Luxemburg bracket search did not terminate")
    else:
        while mod(lo) <= 1.0:
            hi, lo = lo, 0.5 * lo
            it += 1
            if it > max_iter:
                raise ConvergenceError("Luxemburg bracket search did not terminate")
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if mod(mid) > 1.0:
            lo = mid
        else:
            hi = mid
        it += 1
        if it > max_iter:
            raise ConvergenceError("Luxemburg bisection exceeded its iteration cap")
    return hi


def lp_norm(u: SampledField, p: float, region: str = "interior", window: float | None = None) -> float:
    """Classical ``(int |u|^p)^(1/p)`` for a constant exponent."""
    return integrate_modular(u, p, region, window) ** (1.0 / p)


# --------------------------------------------------------------------- operators


def gradient(u: SampledField) -> SampledField:
    """Spatial gradient: central differences inside, one-sided on the boundary."""
    if u.rank != 0:
        raise ValueError("gradient expects a scalar field")
    sp = _space(u.grid)
    off = 1 if u.is_spacetime else 0
    parts = np.gradient(u.values, *sp.h, axis=tuple(range(off, off + sp.N)), edge_order=1)
    if sp.N == 1:
        parts = [parts]
    return SampledField(u.grid, np.stack(parts, axis=-1))


def trace(u: SampledField) -> TraceField:
    """Restriction of a scalar field to the boundary nodes."""
    sp = _space(u.grid)
    index = np.nonzero(sp.boundary_mask)
    vals = u.values[(slice(None),) + index] if u.is_spacetime else u.values[index]
    return TraceField(vals, sp.boundary_weights[index], index)


def slice_integrals(u: SampledField, fn=lambda v: v, region: str = "interior") -> np.ndarray:
    """Per-time-slice spatial integrals of ``fn(u)``."""
    sp = _space(u.grid)
    w = sp.weights if region == "interior" else sp.boundary_weights
    vals = fn(u.values)
    return np.tensordot(vals, w, axes=(tuple(range(1, 1 + sp.N)), tuple(range(sp.N))))


def sup_over_time(u: SampledField, functional: Callable[[SampledField], float], window: float | None = None) -> float:
    """Grid version of ``esssup_t functional(u(t))``: max over time slices."""
    if not u.is_spacetime:
        raise ValueError("sup_over_time needs a space-time field")
    times = u.grid.times
    last = len(times) if window is None else int(np.searchsorted(times, window, side="right"))
    return max(functional(u.slice(k)) for k in range(max(last, 1)))


# --------------------------------------------------------------------- CSV


def write_field_csv(path, u: SampledField) -> None:
    """One row per node: ``t, x1..xN, value`` (or ``v1..vN``), 17 significant digits."""
    sp = _space(u.grid)
    N = sp.N
    cols = [f"x{i + 1}" for i in range(N)]
    vcols = ["value"] if u.rank == 0 else [f"v{i + 1}" for i in range(N)]
    coords = sp.coords.reshape(-1, N)
    if u.is_spacetime:
        cols = ["t"] + cols
        tt = np.repeat(u.grid.times, coords.shape[0])[:, None]
        coords = np.hstack([tt, np.tile(coords, (u.grid.nt + 1, 1))])
    vals = u.values.reshape(coords.shape[0], -1)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(cols + vcols)
        for c, v in zip(coords, vals):
            wr.writerow(["%.17g" % x for x in c] + ["%.17g" % x for x in v])


def read_field_csv(path) -> SampledField:
    """Inverse of :func:`write_field_csv`; the grid is inferred from the coordinates."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array([[float(x) for x in r] for r in rows[1:]])
    has_t = header[0] == "t"
    xcols = [i for i, h in enumerate(header) if h.startswith("x")]
    vcols = [i for i, h in enumerate(header) if h == "value" or h.startswith("v")]
    axes = [np.unique(body[:, i]) for i in xcols]
    domain = BoxDomain(tuple(a[0] for a in axes), tuple(a[-1] for a in axes))
    space = SpatialGrid(domain, tuple(len(a) for a in axes))
    if has_t:
        times = np.unique(body[:, 0])
        grid = SpaceTimeGrid(space, times[-1], len(times) - 1)
    else:
        grid = space
    vals = body[:, vcols]
    shape = grid.shape if len(vcols) == 1 else grid.shape + (len(vcols),)
    return SampledField(grid, vals.reshape(shape))
