"""Level sets, truncation energies and the local energy estimate."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..exponents import HypothesisSet, StructureConstants
from ..grid import SampledField, SpaceTimeGrid, gradient
from ..solver import ProblemSpec, Solution

__all__ = [
    "PreconditionError",
    "LevelSet",
    "level_sets",
    "TruncationEnergy",
    "truncation_energy",
    "EnergyConstants",
    "energy_constants",
    "EnergyCheck",
    "check_energy_estimate",
    "kappa_floor",
    "IterationVariables",
    "iteration_variables",
    "ChainCheck",
    "chain_checks",
]


class PreconditionError(ValueError):
    """An estimate was requested outside the range where it applies."""


def _field(u) -> SampledField:
    return u.u if isinstance(u, Solution) else u


@dataclass(frozen=True)
class LevelSet:
    t: float
    kappa: float
    interior: np.ndarray  # bool mask on the spatial grid, u > kappa
    boundary: np.ndarray  # bool mask on the spatial grid restricted to boundary nodes
    measure: float
    boundary_measure: float


def level_sets(u, kappa: float, t: float) -> LevelSet:
    """Superlevel sets ``{u(t) > kappa}`` in Omega and on Gamma at the time node nearest ``t``."""
    f = _field(u)
    g: SpaceTimeGrid = f.grid
    k = int(np.argmin(np.abs(g.times - t)))
    sp = g.space
    inside = f.values[k] > kappa
    bnd = inside & sp.boundary_mask
    return LevelSet(
        float(g.times[k]),
        float(kappa),
        inside,
        bnd,
        float(np.sum(sp.weights * inside)),
        float(np.sum(sp.boundary_weights * bnd)),
    )


def _window_weights(g: SpaceTimeGrid, T0: float | None):
    wt = g.time_weights(T0)
    sp = g.space
    shape = (-1,) + (1,) * sp.N
    return wt.reshape(shape) * sp.weights[None], wt.reshape(shape) * sp.boundary_weights[None], wt


def _last_index(g: SpaceTimeGrid, T0: float | None) -> int:
    if T0 is None:
        return g.nt
    return int(np.searchsorted(g.times, T0 * (1 + 1e-12), side="right")) - 1


@dataclass(frozen=True)
class TruncationEnergy:
    """Integrals of the truncation ``(u - kappa)_+`` over ``(0, T0)``.

    ``Z`` and ``Z_boundary`` are the interior and boundary integrals of
    ``(u - kappa)_+^{q}``; ``sup_term`` is ``max_t int (u - kappa)_+^2`` and
    ``grad_term`` is ``int int |grad (u - kappa)_+|^p``.  ``reaction`` and
    ``flux`` are ``int int_{u > kappa} u^{q1}`` and its boundary analogue
    with ``q2``.
    """

    kappa: float
    T0: float
    Z: float
    Z_boundary: float
    sup_term: float
    grad_term: float
    reaction: float
    flux: float
    measure: float  # int_0^T0 |A_kappa(t)| dt

    @property
    def lhs(self) -> float:
        return self.sup_term + self.grad_term

    @property
    def Y(self) -> float:
        return self.Z + self.Z_boundary


def truncation_energy(u, H: HypothesisSet, kappa: float, T0: float | None = None) -> TruncationEnergy:
    f = _field(u)
    g: SpaceTimeGrid = f.grid
    T0 = g.T if T0 is None else float(T0)
    w, wb, _ = _window_weights(g, T0)
    v = f.values
    above = v > kappa
    tr = np.where(above, v - kappa, 0.0)
    pos = np.where(above, v, 0.0)
    q1, q2, p = H.q1.values, H.q2.values, H.p.values
    grad = np.linalg.norm(gradient(SampledField(g, tr)).values, axis=-1)
    last = _last_index(g, T0)
    sup_term = float(np.max(np.tensordot(tr[: last + 1] ** 2, g.space.weights, axes=g.N)))
    return TruncationEnergy(
        float(kappa),
        T0,
        float(np.sum(w * tr**q1)),
        float(np.sum(wb * tr**q2)),
        sup_term,
        float(np.sum(w * grad**p)),
        float(np.sum(w * np.where(above, pos**q1, 0.0))),
        float(np.sum(wb * np.where(above, pos**q2, 0.0))),
        float(np.sum(w * above)),
    )


@dataclass(frozen=True)
class EnergyConstants:
    eps: float
    M1_tilde: float
    M2_tilde: float
    M1: float
    M2: float

    def as_dict(self):
        return {k: float(getattr(self, k)) for k in ("eps", "M1_tilde", "M2_tilde", "M1", "M2")}


def energy_constants(c: StructureConstants, q1_plus: float) -> EnergyConstants:
    """Constants of the energy estimate from the structure constants and ``sup q1``."""
    eps = min(1.0, c.a3 / (2 * c.b0))
    m1t = c.a4 + c.a5 + c.b0 * eps ** (-(q1_plus - 1)) + c.b1 + c.b2
    m2t = c.c0 + c.c1
    k = min(1.0, c.a3)
    return EnergyConstants(eps, m1t, m2t, 2 * m1t / k, 2 * m2t / k)


def kappa_floor(u, mode: str = "sub") -> float:
    """``max(1, esssup u0)`` on the grid (``-u0`` for supersolutions)."""
    v0 = _field(u).values[0]
    return max(1.0, float(np.max(-v0 if mode == "super" else v0)))


@dataclass(frozen=True)
class EnergyCheck:
    kappa: float
    lhs: float
    rhs: float
    margin: float  # rhs - lhs
    holds: bool
    energy: TruncationEnergy


def check_energy_estimate(
    sol: Solution,
    spec: ProblemSpec,
    kappas,
    T0: float | None = None,
    mode: str = "sub",
    rtol: float = 1e-9,
) -> list[EnergyCheck]:
    """Test ``sup int (u-k)_+^2 + int int |grad (u-k)_+|^p <= M1 int int u^q1 + M2 int int_Gamma u^q2``.

    ``mode="super"`` applies the estimate to ``-u`` (the supersolution side).
    Levels below ``max(1, esssup u0)`` raise :class:`PreconditionError`.
    """
    if mode not in ("sub", "super"):
        raise ValueError("mode must be 'sub' or 'super'")
    u = -sol.u if mode == "super" else sol.u
    H = spec.hypotheses(sol.grid)
    floor = kappa_floor(u)
    kappas = np.atleast_1d(np.asarray(kappas, dtype=float))
    if np.any(kappas < floor):
        raise PreconditionError(f"levels must be >= {floor:.6g} = max(1, esssup u0)")
    C = energy_constants(spec.constants, H.q1.sup_value)
    out = []
    for k in kappas:
        e = truncation_energy(u, H, float(k), T0)
        rhs = C.M1 * e.reaction + C.M2 * e.flux
        out.append(EnergyCheck(float(k), e.lhs, rhs, rhs - e.lhs, bool(e.lhs <= rhs * (1 + rtol)), e))
    return out


# --------------------------------------------------------------------- iteration variables


@dataclass(frozen=True)
class IterationVariables:
    kappa: float
    delta: float
    levels: np.ndarray  # kappa_n = kappa (2 - 2^-n)
    Z: np.ndarray
    Z_boundary: np.ndarray

    @property
    def Y(self) -> np.ndarray:
        return self.Z + self.Z_boundary


def iteration_variables(u, H: HypothesisSet, kappa: float, delta: float, n: int = 6) -> IterationVariables:
    """``Z_n``, boundary ``Z_n`` and ``Y_n`` on the level ladder ``kappa (2 - 2^-n)`` over ``(0, delta)``."""
    levels = kappa * (2.0 - 2.0 ** -np.arange(n + 1))
    es = [truncation_energy(u, H, float(k), delta) for k in levels]
    return IterationVariables(float(kappa), float(delta), levels, np.array([e.Z for e in es]), np.array([e.Z_boundary for e in es]))


@dataclass(frozen=True)
class ChainCheck:
    n: int
    reaction: float  # int int_{A_{n+1}} u^q1
    reaction_bound: float  # 2^{q1+ (n+2)} Z_n
    measure: float  # int |A_{n+1}| dt
    measure_bound: float  # 2^{q1+ (n+1)} kappa^{-q1-} Z_n
    holds: bool


def chain_checks(u, H: HypothesisSet, kappa: float, delta: float, n: int = 5, rtol: float = 1e-12) -> list[ChainCheck]:
    """Pointwise inequalities linking consecutive ladder levels, evaluated on the grid."""
    if kappa < 1:
        raise PreconditionError("ladder checks need kappa >= 1")
    qp, qm = H.q1.sup_value, H.q1.inf_value
    IV = iteration_variables(u, H, kappa, delta, n + 1)
    out = []
    for j in range(n + 1):
        e = truncation_energy(u, H, float(IV.levels[j + 1]), delta)
        rb = 2.0 ** (qp * (j + 2)) * IV.Z[j]
        mb = 2.0 ** (qp * (j + 1)) * kappa ** (-qm) * IV.Z[j]
        ok = e.reaction <= rb * (1 + rtol) + 1e-300 and e.measure <= mb * (1 + rtol) + 1e-300
        out.append(ChainCheck(j, e.reaction, rb, e.measure, mb, bool(ok)))
    return out
