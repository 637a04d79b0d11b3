"""Space-time patch partition on which the exponents are locally admissible."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ..exponents import HypothesisSet
from ..grid import BoxDomain, SpaceTimeGrid

__all__ = ["PartitionError", "PartitionData", "ball_centres", "build_partition"]


class PartitionError(RuntimeError):
    """No admissible partition at or above the grid resolution."""


def ball_centres(domain: BoxDomain, R: float) -> np.ndarray:
    """Cell midpoints of a lattice with ``ceil(W/R)`` cells per axis (spacing <= R).

    For N <= 3 every point of the closed box is within ``R sqrt(N)/2 < R`` of a centre.
    """
    axes = []
    for lo, w in zip(domain.lower, domain.widths):
        c = max(1, math.ceil(w / R - 1e-12))
        axes.append(lo + (np.arange(c) + 0.5) * w / c)
    return np.array(list(itertools.product(*axes)), dtype=float)


@dataclass(frozen=True, eq=False)
class PartitionData:
    """Balls ``B_j`` of radius ``R``, slabs of length ``delta`` and patch extrema.

    Patch arrays have shape ``(l, m)`` (slab, ball).  Boundary extrema of q2
    are NaN for balls that contain no boundary node.
    """

    R: float
    delta: float
    centres: np.ndarray
    l: int
    L: float
    p_minus: np.ndarray
    p_plus: np.ndarray
    q1_minus: np.ndarray
    q1_plus: np.ndarray
    q2_minus: np.ndarray
    q2_plus: np.ndarray
    refinements: tuple[str, ...] = ()

    @property
    def m(self) -> int:
        return len(self.centres)

    def _bumps(self, x):
        d = np.asarray(x, dtype=float)[..., None, :] - self.centres
        r2 = np.sum(d * d, axis=-1) / self.R**2
        phi = np.clip(1.0 - r2, 0.0, None) ** 2
        dphi = (-4.0 / self.R**2) * np.clip(1.0 - r2, 0.0, None)[..., None] * d
        return phi, dphi

    def xi(self, x) -> np.ndarray:
        """Partition-of-unity values, shape ``(..., m)``."""
        phi, _ = self._bumps(x)
        return phi / np.sum(phi, axis=-1, keepdims=True)

    def grad_xi(self, x) -> np.ndarray:
        """Analytic gradients, shape ``(..., m, N)``."""
        phi, dphi = self._bumps(x)
        S = np.sum(phi, axis=-1, keepdims=True)
        dS = np.sum(dphi, axis=-2, keepdims=True)
        return (dphi * S[..., None] - phi[..., None] * dS) / S[..., None] ** 2

    def slab(self, i: int) -> tuple[float, float]:
        return (i * self.delta, (i + 1) * self.delta)

    def as_dict(self) -> dict:
        return {
            "R": self.R,
            "delta": self.delta,
            "m": self.m,
            "l": self.l,
            "L": self.L,
            "refinements": list(self.refinements),
        }


def _masks(grid: SpaceTimeGrid, centres, R, delta, l):
    coords = grid.space.coords.reshape(-1, grid.N)
    d = np.linalg.norm(coords[:, None, :] - centres[None], axis=-1)
    ball = d <= R * (1 + 1e-12)  # (nodes, m)
    t = grid.times
    slabs = [(t >= i * delta - 1e-12 * grid.T) & (t <= (i + 1) * delta + 1e-12 * grid.T) for i in range(l)]
    return ball, slabs


def _extrema(vals, ball, slabs, sel=None):
    """Min/max of a (nt+1, nodes) array over each (slab, ball) patch."""
    l, m = len(slabs), ball.shape[1]
    lo, hi = np.full((l, m), np.nan), np.full((l, m), np.nan)
    osc_t, osc_x = np.zeros((l, m)), np.zeros((l, m))
    for i, s in enumerate(slabs):
        v = vals[s]
        for j in range(m):
            b = ball[:, j] if sel is None else ball[:, j] & sel
            if not np.any(b):
                continue
            w = v[:, b]
            lo[i, j], hi[i, j] = w.min(), w.max()
            osc_t[i, j] = np.max(w.max(axis=0) - w.min(axis=0))
            osc_x[i, j] = np.max(w.max(axis=1) - w.min(axis=1))
    return lo, hi, osc_t, osc_x


def _lipschitz(part_kw, grid: SpaceTimeGrid) -> float:
    P = PartitionData(**part_kw, L=1.0)
    pts = grid.space.coords.reshape(-1, grid.N)
    g = np.linalg.norm(P.grad_xi(pts), axis=-1)
    return max(1.0 + 1e-6, float(g.max()))


def build_partition(H: HypothesisSet, grid: SpaceTimeGrid | None = None) -> PartitionData:
    """Refine balls and slabs until every patch satisfies

    ``p+ <= q1+ < (p-)*`` and ``p+ <= q2+ < (p-)_*``.

    Starts from one slab and balls of radius diam(Omega); halves ``delta``
    when the time oscillation of the exponents dominates on the failing
    patches, otherwise halves ``R``.
    """
    grid = grid or H.p.grid
    N = grid.N
    if N < 2:
        raise PartitionError("the partition needs N >= 2")
    dom = grid.domain
    R, delta = dom.diameter, grid.T
    hmin = min(grid.space.h)
    nodes = int(np.prod(grid.space.shape))
    flat = lambda f: f.values.reshape(grid.nt + 1, nodes)
    p, q1, q2 = flat(H.p), flat(H.q1), flat(H.q2)
    bsel = grid.space.boundary_mask.reshape(-1)
    history = []
    while True:
        l = max(1, int(round(grid.T / delta)))
        centres = ball_centres(dom, R)
        ball, slabs = _masks(grid, centres, R, delta, l)
        pm, pp, pot, pox = _extrema(p, ball, slabs)
        q1m, q1p, aot, aox = _extrema(q1, ball, slabs)
        q2m, q2p, bot, box = _extrema(q2, ball, slabs, bsel)
        star = pm * (N + 2) / N
        low = star - 2.0 / N
        ok1 = (pp <= q1p) & (q1p < star)
        has_b = ~np.isnan(q2p)
        ok2 = ~has_b | ((pp <= np.where(has_b, q2p, np.inf)) & (np.where(has_b, q2p, -np.inf) < low))
        bad = ~(ok1 & ok2)
        if not np.any(bad):
            kw = dict(R=R, delta=delta, centres=centres, l=l, p_minus=pm, p_plus=pp, q1_minus=q1m,
                      q1_plus=q1p, q2_minus=q2m, q2_plus=q2p, refinements=tuple(history))
            return PartitionData(**kw, L=_lipschitz(kw, grid))
        ot = float(np.max((pot + aot + bot)[bad]))
        ox = float(np.max((pox + aox + box)[bad]))
        if ot >= ox:
            delta /= 2
            history.append("delta")
        else:
            R /= 2
            history.append("R")
        if delta < grid.dt * (1 - 1e-12) or R < hmin:
            raise PartitionError(
                f"no admissible partition above grid resolution (R={R:.3g}, delta={delta:.3g}); "
                "the exponents are not locally admissible"
            )
