"""Variable exponents and the standing hypotheses on them and on the structure.

Covers the critical exponents ``p* = p(N+2)/N`` and ``p_* = p(N+2)/N - 2/N``,
the log-Hoelder modulus check, nodewise admissibility
``p <= q1 < p*`` / ``p <= q2 < p_*`` and sample-based validation of the four
growth conditions on the structure functions A, B, C.

All checks are performed on grid nodes only; they are necessary conditions
for the continuum hypotheses, not proofs of them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Callable

import numpy as np

from .grid import SpaceTimeGrid, SpatialGrid

__all__ = [
    "ExponentField",
    "StructureConstants",
    "HypothesisSet",
    "critical_exponents",
    "LogHolderReport",
    "check_log_holder",
    "AdmissibilityReport",
    "check_admissible",
    "StructureReport",
    "default_structure_samples",
    "validate_structure",
]


@dataclass(frozen=True, eq=False)
class ExponentField:
    """An exponent sampled on a grid.

    ``boundary=True`` marks a field that is only meaningful on boundary nodes
    (the boundary exponent q2); extrema are then taken over those nodes.
    """

    grid: SpaceTimeGrid | SpatialGrid
    values: np.ndarray
    boundary: bool = False
    inf_value: float = field(init=False)
    sup_value: float = field(init=False)

    def __post_init__(self):
        v = np.broadcast_to(np.asarray(self.values, dtype=float), self.grid.shape).copy()
        if not np.all(np.isfinite(v)):
            raise ValueError("exponent field has non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        rel = v[..., self.mask] if self.boundary else v
        object.__setattr__(self, "inf_value", float(rel.min()))
        object.__setattr__(self, "sup_value", float(rel.max()))

    @property
    def mask(self) -> np.ndarray:
        space = self.grid.space if isinstance(self.grid, SpaceTimeGrid) else self.grid
        if self.boundary:
            return space.boundary_mask
        return np.ones(space.shape, dtype=bool)

    @classmethod
    def from_function(cls, grid: SpaceTimeGrid, fn: Callable, boundary: bool = False) -> "ExponentField":
        return cls(grid, grid.sample(fn), boundary)

    @classmethod
    def constant(cls, grid, value: float, boundary: bool = False) -> "ExponentField":
        return cls(grid, np.full(grid.shape, float(value)), boundary)


@dataclass(frozen=True)
class StructureConstants:
    """Positive constants of the flux, coercivity, reaction and boundary growth conditions."""

    a0: float = 1.0
    a1: float = 1.0
    a2: float = 1.0
    a3: float = 1.0
    a4: float = 1.0
    a5: float = 1.0
    b0: float = 1.0
    b1: float = 1.0
    b2: float = 1.0
    c0: float = 1.0
    c1: float = 1.0

    def __post_init__(self):
        bad = [f.name for f in fields(self) if not getattr(self, f.name) > 0]
        if bad:
            raise ValueError(f"structure constants must be strictly positive: {bad}")

    def as_dict(self) -> dict[str, float]:
        return {f.name: float(getattr(self, f.name)) for f in fields(self)}


@dataclass(frozen=True, eq=False)
class HypothesisSet:
    p: ExponentField
    q1: ExponentField
    q2: ExponentField
    constants: StructureConstants = StructureConstants()

    def __post_init__(self):
        if not self.p.inf_value > 1.0:
            raise ValueError(f"need inf p > 1, got {self.p.inf_value}")
        if not self.q2.boundary:
            object.__setattr__(self, "q2", ExponentField(self.q2.grid, self.q2.values, boundary=True))


def critical_exponents(p, N: int):
    """Return ``(p*, p_*) = (p (N+2)/N, p (N+2)/N - 2/N)``."""
    if int(N) != N or N < 2:
        raise ValueError(f"spatial dimension must be an integer >= 2, got {N}")
    p = np.asarray(p, dtype=float)
    if np.any(p <= 1.0):
        raise ValueError("exponent must exceed 1")
    star = p * (N + 2) / N
    lower = star - 2.0 / N
    if star.ndim == 0:
        return float(star), float(lower)
    return star, lower


# --------------------------------------------------------------------- log-Hoelder


@dataclass(frozen=True)
class LogHolderReport:
    verdict: bool
    k: float | None
    k_fit: float
    witness: tuple | None  # ((t, x), (t', x')) maximizing |dp| log(e + 1/d)
    violation_ratio: float


def _node_table(f: ExponentField):
    grid = f.grid
    if isinstance(grid, SpaceTimeGrid):
        space = grid.space
        t = np.repeat(grid.times, int(np.prod(space.shape)))
        x = np.tile(space.coords.reshape(-1, space.N), (grid.nt + 1, 1))
        keep = np.tile(f.mask.ravel(), grid.nt + 1)
    else:
        x = grid.coords.reshape(-1, grid.N)
        t = np.zeros(x.shape[0])
        keep = f.mask.ravel()
    return t[keep], x[keep], f.values.ravel()[keep]


def check_log_holder(f: ExponentField, k: float | None = None, mode: str = "check", chunk: int = 512) -> LogHolderReport:
    """Check ``|p(z) - p(z')| <= k / log(e + 1/(|t-t'| + |x-x'|))`` over all node pairs.

    ``mode="fit"`` ignores ``k`` and returns the smallest constant that passes
    on the grid (as both ``k`` and ``k_fit``).
    """
    if mode not in ("check", "fit"):
        raise ValueError("mode must be 'check' or 'fit'")
    if mode == "check" and (k is None or not k > 0):
        raise ValueError("log-Hoelder constant k must be positive")
    t, x, v = _node_table(f)
    best, arg = 0.0, None
    n = len(v)
    for i0 in range(0, n, chunk):
        sl = slice(i0, min(i0 + chunk, n))
        d = np.abs(t[sl, None] - t[None, :]) + np.linalg.norm(x[sl, None, :] - x[None, :, :], axis=-1)
        dp = np.abs(v[sl, None] - v[None, :])
        with np.errstate(divide="ignore"):
            g = np.where(d > 0, dp * np.log(np.e + 1.0 / np.where(d > 0, d, 1.0)), 0.0)
        j = int(np.argmax(g))
        if g.flat[j] > best:
            best = float(g.flat[j])
            arg = (i0 + j // n, j % n)
    witness = None
    if arg is not None:
        i, j = arg
        witness = ((float(t[i]), tuple(x[i])), (float(t[j]), tuple(x[j])))
    if mode == "fit":
        return LogHolderReport(True, best, best, witness, 1.0 if best > 0 else 0.0)
    ratio = best / k
    return LogHolderReport(ratio <= 1.0, float(k), best, witness if ratio > 1.0 else None, ratio)


# --------------------------------------------------------------------- admissibility


@dataclass(frozen=True)
class AdmissibilityReport:
    admissible: bool
    failures: dict  # condition -> first violating node (index, values) or None

    def __bool__(self):
        return self.admissible


def _first(mask: np.ndarray, *arrays):
    idx = np.argwhere(mask)
    if len(idx) == 0:
        return None
    i = tuple(int(v) for v in idx[0])
    return {"index": i, "values": tuple(float(a[i]) for a in arrays)}


def check_admissible(H: HypothesisSet, N: int) -> AdmissibilityReport:
    """Nodewise ``p <= q1 < p*`` on Q_T, ``p <= q2 < p_*`` on Gamma_T, ``inf p > 1``."""
    p, q1, q2 = H.p.values, H.q1.values, H.q2.values
    failures = {"p>1": _first(~(p > 1.0), p)}
    pc = np.where(p > 1.0, p, np.nan)
    star, lower = pc * (N + 2) / N, pc * (N + 2) / N - 2.0 / N
    bmask = np.broadcast_to(H.q2.mask, p.shape)
    failures["p<=q1"] = _first(~(p <= q1), p, q1)
    failures["q1<p*"] = _first(~(q1 < star) & (p > 1.0), q1, star)
    failures["p<=q2"] = _first(bmask & ~(p <= q2), p, q2)
    failures["q2<p_*"] = _first(bmask & ~(q2 < lower) & (p > 1.0), q2, lower)
    return AdmissibilityReport(all(v is None for v in failures.values()), failures)


# --------------------------------------------------------------------- structure


@dataclass(frozen=True)
class StructureReport:
    passed: bool
    conditions: dict  # name -> {"passed", "worst_margin", "witness"}

    def __bool__(self):
        return self.passed


def default_structure_samples(grid: SpaceTimeGrid, seed: int = 0, n_times: int = 8):
    """Tensor sample set: time nodes x spatial nodes x s x xi.

    ``s`` in {0, +-1, +-10}; ``|xi|`` in {0, 0.1, 1, 10, 100} with random
    directions.  Returns a dict of flat arrays ``t, x, s, xi, it, ix`` where
    ``it``/``ix`` index the grid node each sample sits on.
    """
    rng = np.random.default_rng(seed)
    N = grid.N
    it = np.unique(np.linspace(0, grid.nt, min(n_times, grid.nt + 1)).round().astype(int))
    nsp = int(np.prod(grid.space.shape))
    s_vals = np.array([0.0, 1.0, -1.0, 10.0, -10.0])
    mags = np.array([0.0, 0.1, 1.0, 10.0, 100.0])
    I, X, S, M = np.meshgrid(it, np.arange(nsp), s_vals, mags, indexing="ij")
    I, X, S, M = I.ravel(), X.ravel(), S.ravel(), M.ravel()
    dirs = rng.normal(size=(len(M), N))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    coords = grid.space.coords.reshape(-1, N)
    return {"t": grid.times[I], "x": coords[X], "s": S, "xi": dirs * M[:, None], "it": I, "ix": X}


def _condition(lhs, rhs, greater: bool, samples, sel=None):
    margin = (lhs - rhs) if greater else (rhs - lhs)
    scale = 1e-12 * (np.abs(lhs) + np.abs(rhs) + 1.0)
    finite = np.isfinite(margin)
    margin = np.where(finite, margin, -np.inf)
    j = int(np.argmin(margin))
    ok = bool(np.all(finite) and np.all(margin >= -scale))
    idx = np.arange(len(margin)) if sel is None else sel
    k = idx[j]
    witness = {
        "t": float(samples["t"][k]),
        "x": tuple(float(v) for v in samples["x"][k]),
        "s": float(samples["s"][k]),
        "xi": tuple(float(v) for v in samples["xi"][k]),
    }
    return {"passed": ok, "worst_margin": float(margin[j]), "witness": witness}


def validate_structure(A, B, C, H: HypothesisSet, samples: dict | None = None, seed: int = 0) -> StructureReport:
    """Check the four structure inequalities pointwise at every sample with the declared constants."""
    grid = H.p.grid
    if samples is None:
        samples = default_structure_samples(grid, seed)
    c = H.constants
    t, x, s, xi = samples["t"], samples["x"], samples["s"], samples["xi"]
    it, ix = samples["it"], samples["ix"]
    p = H.p.values.reshape(grid.nt + 1, -1)[it, ix]
    q1 = H.q1.values.reshape(grid.nt + 1, -1)[it, ix]
    q2 = H.q2.values.reshape(grid.nt + 1, -1)[it, ix]
    g = np.linalg.norm(xi, axis=-1)
    a = np.abs(s)
    with np.errstate(all="ignore"):
        Av = np.asarray(A(t, x, s, xi), dtype=float).reshape(len(t), -1)
        Bv = np.asarray(B(t, x, s, xi), dtype=float).reshape(len(t))
        res = {}
        res["flux-growth"] = _condition(
            np.linalg.norm(Av, axis=-1),
            c.a0 * g ** (p - 1) + c.a1 * a ** (q1 * (p - 1) / p) + c.a2,
            False,
            samples,
        )
        res["coercivity"] = _condition(
            np.sum(Av * xi, axis=-1),
            c.a3 * g**p - c.a4 * a**q1 - c.a5,
            True,
            samples,
        )
        res["reaction-growth"] = _condition(
            np.abs(Bv),
            c.b0 * g ** (p * (q1 - 1) / q1) + c.b1 * a ** (q1 - 1) + c.b2,
            False,
            samples,
        )
        bsel = np.nonzero(grid.space.boundary_mask.ravel()[ix])[0]
        Cv = np.asarray(C(t[bsel], x[bsel], s[bsel]), dtype=float).reshape(len(bsel))
        res["boundary-growth"] = _condition(
            np.abs(Cv),
            c.c0 * a[bsel] ** (q2[bsel] - 1) + c.c1,
            False,
            samples,
            sel=bsel,
        )
    return StructureReport(all(r["passed"] for r in res.values()), res)
