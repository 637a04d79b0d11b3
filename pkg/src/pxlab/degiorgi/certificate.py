"""Exponent algebra, the constant chain and the L-infinity bound certificate."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import mpmath as mp
import numpy as np

from ..exponents import check_log_holder
from ..grid import SpaceTimeGrid
from ..inequalities import empirical_embedding_constant
from ..solver import ProblemSpec, Solution
from .energy import PreconditionError, energy_constants
from .partition import PartitionData, build_partition

__all__ = [
    "CertificateError",
    "ExponentAlgebra",
    "exponent_algebra",
    "constant_chain",
    "BoundCertificate",
    "compute_bound_certificate",
    "supersolution_certificate",
]

mp.mp.dps = 40


class CertificateError(PreconditionError):
    """The exponents do not allow a certificate (e.g. eta_hat >= 1)."""


@dataclass(frozen=True)
class ExponentAlgebra:
    eta: float
    eta_tilde: float
    eta_hat: float
    q_plus: float
    q1_minus: float
    delta1: float
    delta2: float
    a: float
    beta: float
    s_values: tuple[float, ...]

    def as_dict(self):
        d = {k: getattr(self, k) for k in ("eta", "eta_tilde", "eta_hat", "q_plus", "q1_minus", "delta1", "delta2", "a", "beta")}
        d["s_values"] = list(self.s_values)
        return d


def exponent_algebra(p_minus, q1_plus, q2_plus, N: int, q_plus: float | None = None, q1_minus: float | None = None) -> ExponentAlgebra:
    """Iteration exponents from per-ball extrema.

    ``p_minus``, ``q1_plus``, ``q2_plus`` are per-ball arrays (``q2_plus`` NaN
    for balls off the boundary).  ``q_plus`` defaults to the largest of the
    q extrema and ``q1_minus`` to the smallest ``q1_plus``.
    """
    pm = np.atleast_1d(np.asarray(p_minus, dtype=float))
    a1 = np.atleast_1d(np.asarray(q1_plus, dtype=float))
    r = np.atleast_1d(np.asarray(q2_plus, dtype=float))
    star = pm * (N + 2) / N
    low = star - 2.0 / N
    eta = float(np.max(a1 / star))
    on = ~np.isnan(r)
    s = N * ((r[on] + low[on]) / 2 + 2.0 / N) / (N + 2)
    eta_t = float(np.max(s / pm[on])) if np.any(on) else 0.0
    eta_h = max(eta, eta_t)
    qp = float(q_plus) if q_plus is not None else float(np.nanmax(np.concatenate([a1, r])))
    q1m = float(q1_minus) if q1_minus is not None else float(np.min(a1))
    cand = [1.0, 1.0 - eta, qp, qp - eta, 1.0 - eta_t, 2 * qp, 2 * qp - eta_t]
    d1, d2 = min(cand), max(cand)
    a = q1m * (1.0 - eta_h)
    beta = d2 / a if a > 0 else math.inf
    return ExponentAlgebra(eta, eta_t, eta_h, qp, q1m, d1, d2, a, beta, tuple(float(v) for v in s))


@lru_cache(maxsize=512)
def _emb(p: float, side: str) -> float:
    return empirical_embedding_constant(p, side)


def _embedding_constants(pm, s, safety=2.0):
    Ct = max(1.0, safety * max(_emb(round(float(v), 12), "interior") for v in np.unique(pm)))
    Ch = max(1.0, safety * max(_emb(round(float(v), 12), "boundary") for v in np.unique(s))) if len(s) else 1.0
    return Ct, Ch


def constant_chain(c, q1_plus, q2_plus, p_plus, m, L, C_int, C_bnd) -> dict:
    """The iteration constants ``M1..M16``, ``K`` and ``b`` as mpmath numbers."""
    E = energy_constants(c, q1_plus)
    q1p, q2p, pp = mp.mpf(q1_plus), mp.mpf(q2_plus), mp.mpf(p_plus)
    qp = max(q1p, q2p)
    two = mp.mpf(2)
    m, L = mp.mpf(m), mp.mpf(L)
    M = {"M1": mp.mpf(E.M1), "M2": mp.mpf(E.M2)}
    M["M3"] = max(M["M1"] * two ** (2 * q1p), M["M2"] * two ** (2 * q2p))
    M["M4"] = max(two**q1p, two**q2p)
    M["M5"] = M["M3"] + m * two**q1p
    M["M6"] = mp.mpf(C_int) ** qp * two**pp * L**pp
    M["M7"] = M["M6"] * two**qp * (M["M5"] ** qp + two ** (2 * q1p * qp))
    M["M8"] = M["M4"] ** qp
    M["M9"] = 2 * m ** (q1p + 1) * M["M7"] * two**q1p
    M["M10"] = M["M8"] * two**q1p
    M["M11"] = 2 * mp.mpf(C_bnd) ** qp * two**pp * L**pp
    M["M12"] = M["M11"] * two ** (2 * qp) * (M["M5"] ** (2 * qp) + two ** (4 * q1p * qp))
    M["M13"] = M["M4"] ** (2 * qp)
    M["M14"] = M["M12"] * two ** (2 * q1p)
    M["M15"] = M["M13"] * two**q1p
    M["M16"] = 2 * m ** (q2p + 1) * M["M14"]
    M["K"] = max(M["M9"], M["M16"])
    M["b"] = max(M["M10"], M["M15"])
    return M


def _num(x) -> dict:
    x = mp.mpf(x)
    return {"value": mp.nstr(x, 17), "log10": float(mp.log10(x)) if x > 0 else None}


@dataclass(frozen=True)
class BoundCertificate:
    """Certified bound for one solution.

    ``mode="upper"``: ``u <= bound``; ``mode="lower"``: ``u >= bound``.
    Large numbers are mpmath values; ``bound`` is the float (possibly inf).
    """

    mode: str
    problem: str
    final_bound: mp.mpf
    kappa: mp.mpf
    C: mp.mpf
    beta: float
    C1: float
    integrals: dict
    partition: dict
    algebra: tuple[dict, ...]
    constants: tuple[dict, ...]
    embedding: tuple[dict, ...]
    observed: float  # max u for upper, min u for lower
    log_holder: dict = field(default_factory=dict)

    @property
    def bound(self) -> float:
        v = -self.final_bound if self.mode == "lower" else self.final_bound
        try:
            return float(v)
        except OverflowError:
            return math.copysign(math.inf, float(mp.sign(v)))

    @property
    def log10_bound(self) -> float:
        return float(mp.log10(self.final_bound))

    @property
    def finite(self) -> bool:
        return bool(mp.isfinite(self.final_bound) and mp.isfinite(self.kappa))

    @property
    def sound(self) -> bool:
        if self.mode == "upper":
            return bool(mp.mpf(self.observed) <= self.final_bound)
        return bool(mp.mpf(self.observed) >= -self.final_bound)

    def to_dict(self) -> dict:
        sign = -1 if self.mode == "lower" else 1
        return {
            "mode": self.mode,
            "problem": self.problem,
            "bound": {"value": mp.nstr(sign * self.final_bound, 17), "log10_abs": self.log10_bound},
            "kappa": _num(self.kappa),
            "C": _num(self.C),
            "beta": self.beta,
            "C1": self.C1,
            "observed": self.observed,
            "sound": self.sound,
            "finite": self.finite,
            "integrals": self.integrals,
            "partition": self.partition,
            "exponents": list(self.algebra),
            "constants": [{k: _num(v) for k, v in c.items()} for c in self.constants],
            "embedding": list(self.embedding),
            "log_holder": self.log_holder,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, **kw)


def _integral(grid: SpaceTimeGrid, vals, q, region, T0=None):
    wt = grid.time_weights(T0).reshape((-1,) + (1,) * grid.N)
    w = grid.space.weights if region == "interior" else grid.space.boundary_weights
    return float(np.sum(wt * w[None] * np.clip(vals, 0.0, None) ** q))


def compute_bound_certificate(sol: Solution, spec: ProblemSpec, partition: PartitionData | None = None, log_holder: bool = True) -> BoundCertificate:
    """Upper bound ``esssup u <= 2^l max(C1, C (1 + I_Omega + I_Gamma)^beta)``.

    Each slab gets its own exponent algebra and constant chain; the bound
    uses the worst ``C`` and ``beta`` over slabs.  ``C1`` is the grid max of
    the initial data.  Raises :class:`CertificateError` when ``eta_hat >= 1``.
    """
    return _certificate(sol, spec, "upper", partition, log_holder)


def supersolution_certificate(sol: Solution, spec: ProblemSpec, partition: PartitionData | None = None, log_holder: bool = True) -> BoundCertificate:
    """Lower bound for ``u`` from the upper bound of ``-u`` on the mirrored problem."""
    return _certificate(-sol, spec.negated(), "lower", partition, log_holder, observed=float(sol.values.min()))


def _certificate(sol, spec, mode, partition, do_lh, observed=None) -> BoundCertificate:
    g = sol.grid
    N = g.N
    H = spec.hypotheses(g)
    P = partition or build_partition(H, g)
    q1p, q2p, pp = H.q1.sup_value, H.q2.sup_value, H.p.sup_value
    qp = max(q1p, q2p)
    algebras, chains, embs = [], [], []
    Cs, betas = [], []
    for i in range(P.l):
        A = exponent_algebra(P.p_minus[i], P.q1_plus[i], P.q2_plus[i], N, q_plus=qp, q1_minus=H.q1.inf_value)
        if A.eta_hat >= 1:
            raise CertificateError(f"eta_hat = {A.eta_hat:.6g} >= 1 on slab {i}; the iteration does not close")
        Ct, Ch = _embedding_constants(P.p_minus[i], np.asarray(A.s_values))
        M = constant_chain(spec.constants, q1p, q2p, pp, P.m, P.L, Ct, Ch)
        a = mp.mpf(A.a)
        d1, d2 = mp.mpf(A.delta1), mp.mpf(A.delta2)
        C = (16 * M["K"]) ** (1 / a) * M["b"] ** (1 / (d1 * a) + (d2 - d1) / (d2 * a))
        algebras.append(A.as_dict())
        chains.append(M)
        embs.append({"interior": Ct, "boundary": Ch})
        Cs.append(C)
        betas.append(A.beta)
    C, beta = max(Cs), max(betas)
    v = sol.values
    q1v, q2v = H.q1.values, H.q2.values
    I_om = _integral(g, v, q1v, "interior")
    I_ga = _integral(g, v, q2v, "boundary")
    I_d = _integral(g, v, q1v, "interior", P.delta) + _integral(g, v, q2v, "boundary", P.delta)
    C1 = float(np.max(v[0]))
    kappa = max(mp.mpf(max(1.0, C1)), Cs[0] * (1 + mp.mpf(I_d)) ** betas[0])
    final = mp.mpf(2) ** P.l * max(mp.mpf(C1), C * (1 + mp.mpf(I_om) + mp.mpf(I_ga)) ** beta)
    lh = {"status": "skipped (time-independent p)"} if spec.time_independent_p else {}
    if do_lh and not spec.time_independent_p:
        rep = check_log_holder(H.p, mode="fit")
        lh = {"status": "fitted", "k": rep.k_fit}
    if observed is None:
        observed = float(v.max())
    return BoundCertificate(
        mode,
        spec.name,
        final,
        kappa,
        C,
        float(beta),
        C1 if mode == "upper" else -C1,
        {"I_Omega": I_om, "I_Gamma": I_ga, "I_delta": I_d},
        P.as_dict(),
        tuple(algebras),
        tuple(chains),
        tuple(embs),
        float(observed),
        lh,
    )
