"""Gagliardo-Nirenberg interpolation exponents and numerical checks of the
interior/trace multiplicative inequalities and the parabolic embeddings.

All checks return empirical ratios ``lhs / rhs``; a finite ratio certifies the
inequality for that sample with constant ``C = ratio`` (or ``ratio^(1/q)``
for the parabolic embeddings, whose constant enters as ``C^q``).
Empirical maxima are lower bounds for the true constants, never sharp values.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .exponents import critical_exponents
from .grid import (
    BoxDomain,
    SampledField,
    SpaceTimeGrid,
    SpatialGrid,
    gradient,
    integrate_modular,
    lp_norm,
    slice_integrals,
)

__all__ = [
    "InadmissibleExponents",
    "InterpolationSetup",
    "gn_exponent",
    "GNResult",
    "check_gn",
    "EmbeddingResult",
    "check_parabolic_embedding",
    "CORPUS_VERSION",
    "corpus_functions",
    "embedding_corpus",
    "spatial_corpus",
    "concentration_family",
    "ProbeResult",
    "supercritical_probe",
    "empirical_embedding_constant",
]

CORPUS_VERSION = "1"


class InadmissibleExponents(ValueError):
    """The requested (N, p, s, q) violates a constraint; ``constraint`` names it."""

    def __init__(self, constraint: str, msg: str):
        super().__init__(msg)
        self.constraint = constraint


def _denominator(N, p, s):
    return 1.0 / N - 1.0 / p + 1.0 / s


def gn_exponent(N: int, p: float, s: float, q: float, side: str = "interior") -> float:
    """Interpolation exponent alpha for the interior or trace inequality.

    interior: ``alpha = (1/s - 1/q) / (1/N - 1/p + 1/s)``
    boundary: ``alpha = (1/s - (N-1)/(N q)) / (1/N - 1/p + 1/s)``, with ``alpha > 1/q`` required.

    Raises
    ------
    InadmissibleExponents
        if N < 2, an exponent is not in (1, inf), ``p = N s/(N+s)``,
        alpha lies outside [0, 1], or (boundary) ``alpha <= 1/q``.
    """
    if side not in ("interior", "boundary"):
        raise ValueError(f"side must be 'interior' or 'boundary', not {side!r}")
    if int(N) != N or N < 2:
        raise InadmissibleExponents("N>=2", f"dimension N={N} must be an integer >= 2")
    for name, v in (("p", p), ("s", s), ("q", q)):
        if not (1.0 < v < np.inf):
            raise InadmissibleExponents(f"{name} in (1,inf)", f"{name}={v} must lie in (1, inf)")
    den = _denominator(N, p, s)
    if abs(den) <= 1e-14 * (1.0 / N + 1.0 / p + 1.0 / s):
        raise InadmissibleExponents("p != Ns/(N+s)", f"p={p} equals Ns/(N+s) for s={s}, N={N}")
    if side == "interior":
        alpha = (1.0 / s - 1.0 / q) / den
    else:
        alpha = (1.0 / s - (N - 1) / (N * q)) / den
    if not 0.0 <= alpha <= 1.0:
        raise InadmissibleExponents("alpha in [0,1]", f"alpha={alpha:.6g} outside [0, 1]")
    if side == "boundary" and not alpha > 1.0 / q:
        raise InadmissibleExponents(
            "alpha>1/q", f"alpha={alpha:.6g} does not exceed 1/q={1.0 / q:.6g}"
        )
    return float(alpha)


@dataclass(frozen=True)
class InterpolationSetup:
    N: int
    p: float
    s: float
    q: float
    side: str = "interior"

    @property
    def alpha(self) -> float:
        return gn_exponent(self.N, self.p, self.s, self.q, self.side)

    def linking_residual(self) -> float:
        """Defect of the linking equation at the computed alpha (zero up to rounding)."""
        a, N, p, s, q = self.alpha, self.N, self.p, self.s, self.q
        lhs = N / q if self.side == "interior" else (N - 1) / q
        return lhs - (a * (N / p - 1.0) + (1.0 - a) * N / s)


# --------------------------------------------------------------------- GN check


@dataclass(frozen=True)
class GNResult:
    lhs: float  # ||u||_{L^q(Omega or Gamma)}
    w1p: float
    ls: float
    alpha: float
    ratio: float
    degenerate: bool


def w1p_norm(u: SampledField, p: float) -> float:
    """``(||grad u||_p^p + ||u||_p^p)^(1/p)`` on a spatial field."""
    g = np.linalg.norm(gradient(u).values, axis=-1)
    gp = integrate_modular(SampledField(u.grid, g), p)
    return (gp + integrate_modular(u, p)) ** (1.0 / p)


def check_gn(u: SampledField, setup: InterpolationSetup) -> GNResult:
    """Ratio ``||u||_q / (||u||_{W^{1,p}}^alpha ||u||_s^(1-alpha))`` for a spatial field."""
    if u.is_spacetime or u.rank != 0:
        raise ValueError("check_gn expects a scalar spatial field")
    alpha = setup.alpha
    region = "interior" if setup.side == "interior" else "boundary"
    lhs = lp_norm(u, setup.q, region)
    w = w1p_norm(u, setup.p)
    ls = lp_norm(u, setup.s)
    den = w**alpha * ls ** (1.0 - alpha)
    if den == 0.0:
        return GNResult(lhs, w, ls, alpha, float("nan"), True)
    return GNResult(lhs, w, ls, alpha, lhs / den, False)


# --------------------------------------------------------------------- parabolic embeddings


@dataclass(frozen=True)
class EmbeddingResult:
    side: str
    p: float
    q: float
    lhs: float
    energy: float  # intint |grad u|^p + |u|^p
    sup_l2: float  # max_t int u^2
    rhs: float
    ratio: float  # empirical C^q
    degenerate: bool

    def holds_with(self, C: float) -> bool:
        if self.degenerate:
            return self.lhs == 0.0
        return self.lhs <= C**self.q * self.rhs * (1 + 1e-12)


def check_parabolic_embedding(
    u: SampledField,
    p: float,
    side: str = "interior",
    q: float | None = None,
    window: float | None = None,
) -> EmbeddingResult:
    """Both sides of the parabolic embedding for constant ``p``.

    LHS = intint |u|^q over Q_T (interior) or Gamma_T (boundary); RHS =
    (intint |grad u|^p + intint |u|^p) * (max_t int u^2)^(p/N) (interior) or
    ^((p-1)/N) (boundary).  ``q`` defaults to the critical exponent; pass a
    larger value to probe supercritical growth.
    """
    if not u.is_spacetime:
        raise ValueError("parabolic embedding needs a space-time field")
    N = u.grid.N
    pstar, plow = critical_exponents(p, N)
    if side == "interior":
        q = pstar if q is None else float(q)
        power = p / N
    elif side == "boundary":
        q = plow if q is None else float(q)
        power = (p - 1.0) / N
    else:
        raise ValueError(f"side must be 'interior' or 'boundary', not {side!r}")
    lhs = integrate_modular(u, q, side, window)
    g = np.linalg.norm(gradient(u).values, axis=-1)
    energy = integrate_modular(SampledField(u.grid, g), p, "interior", window) + integrate_modular(
        u, p, "interior", window
    )
    l2 = slice_integrals(u, np.square)
    if window is not None:
        l2 = l2[u.grid.times <= window + 1e-12]
    sup_l2 = float(np.max(l2))
    rhs = energy * sup_l2**power
    if rhs == 0.0:
        return EmbeddingResult(side, p, q, lhs, energy, sup_l2, rhs, float("nan"), True)
    return EmbeddingResult(side, p, q, lhs, energy, sup_l2, rhs, lhs / rhs, False)


# --------------------------------------------------------------------- corpus


def _r2(x, c):
    return np.sum((x - np.asarray(c)) ** 2, axis=-1)


def _corner_profile(x, k):
    """``k^(N/2) (1 - k^2 |x|^2)_+^2``, concentrated at the origin corner."""
    N = x.shape[-1]
    return k ** (N / 2) * np.clip(1.0 - k * k * np.sum(x * x, axis=-1), 0.0, None) ** 2


def corpus_functions() -> list[tuple[str, Callable]]:
    """The versioned 20-member corpus of space-time test functions on the unit square.

    Members: 12 basic shapes (including the k=1 corner profile), the corner
    concentration family for k = 2, 4, 8 and oscillations sin(k pi x1) for k = 2..6.
    """
    x1 = lambda x: x[..., 0]
    x2 = lambda x: x[..., 1]
    basic = [
        ("constant", lambda t, x: np.ones(np.broadcast_shapes(np.shape(t), x.shape[:-1]))),
        ("sine-product", lambda t, x: np.exp(-t) * np.sin(np.pi * x1(x)) * np.sin(np.pi * x2(x))),
        ("cosine-product", lambda t, x: np.exp(-t) * np.cos(np.pi * x1(x)) * np.cos(np.pi * x2(x))),
        ("affine", lambda t, x: (1.0 + t) * (1.0 + x1(x) + 2.0 * x2(x))),
        ("quadratic", lambda t, x: (1.0 - 0.5 * t) * (x1(x) ** 2 + x2(x) ** 2)),
        ("saddle", lambda t, x: (1.0 + t) * (x1(x) - 0.5) * (x2(x) - 0.5)),
        ("interior-bump", lambda t, x: np.cos(t) * np.clip(1.0 - _r2(x, (0.5, 0.5)) / 0.09, 0, None) ** 2),
        ("gaussian", lambda t, x: np.exp(-2.0 * t) * np.exp(-_r2(x, (0.3, 0.6)) / 0.02)),
        ("boundary-layer", lambda t, x: np.exp(-10.0 * x1(x)) * (1.0 + 0 * t)),
        ("root-cusp", lambda t, x: (1.0 + t) * (0.05 + _r2(x, (0.5, 0.5))) ** 0.25),
        ("front", lambda t, x: np.tanh(10.0 * (x1(x) - 0.3 - 0.4 * t))),
        ("corner-k1", lambda t, x: _corner_profile(x, 1.0) * (1.0 + 0 * t)),
    ]
    conc = [(f"corner-k{k}", (lambda k: lambda t, x: _corner_profile(x, k) * (1.0 + 0 * t))(k)) for k in (2, 4, 8)]
    osc = [
        (f"oscillation-k{k}", (lambda k: lambda t, x: np.exp(-t) * np.sin(k * np.pi * x1(x)))(k))
        for k in range(2, 7)
    ]
    return basic + conc + osc


@lru_cache(maxsize=8)
def embedding_corpus(n: int = 65, nt: int = 16, T: float = 1.0) -> tuple[tuple[str, SampledField], ...]:
    """Corpus sampled on the unit square times [0, T]."""
    grid = SpaceTimeGrid.uniform(BoxDomain.unit(2), n, T, nt)
    return tuple((name, SampledField(grid, grid.sample(fn))) for name, fn in corpus_functions())


@lru_cache(maxsize=8)
def spatial_corpus(n: int = 65) -> tuple[tuple[str, SampledField], ...]:
    """The corpus frozen at t = 0, as spatial fields."""
    space = SpatialGrid(BoxDomain.unit(2), n)
    x = space.coords
    return tuple(
        (name, SampledField(space, np.broadcast_to(fn(0.0, x), space.shape).astype(float)))
        for name, fn in corpus_functions()
    )


def concentration_family(n: int = 257, nt: int = 4, ks=(1, 2, 4, 8)) -> list[tuple[int, SampledField]]:
    """Corner profiles ``k^(N/2) phi(k x)``: scale-invariant at the critical exponents."""
    grid = SpaceTimeGrid.uniform(BoxDomain.unit(2), n, 1.0, nt)
    return [(k, SampledField(grid, grid.sample(lambda t, x, k=k: _corner_profile(x, k) * (1.0 + 0 * t)))) for k in ks]


@dataclass(frozen=True)
class ProbeResult:
    side: str
    p: float
    ks: tuple[int, ...]
    critical: tuple[float, ...]
    supercritical: tuple[float, ...]

    @property
    def critical_band(self) -> float:
        return max(self.critical) / min(self.critical)

    @property
    def supercritical_growth(self) -> float:
        return self.supercritical[-1] / self.supercritical[0]

    @property
    def supercritical_monotone(self) -> bool:
        return bool(np.all(np.diff(self.supercritical) > 0))

    @property
    def passed(self) -> bool:
        return self.critical_band <= 2.0 and self.supercritical_growth > 2.0 and self.supercritical_monotone


def supercritical_probe(p: float, side: str, family=None, shift: float = 0.5) -> ProbeResult:
    """Ratios along the concentration family at the critical q and at ``q + shift``."""
    family = concentration_family() if family is None else family
    N = family[0][1].grid.N
    qc = critical_exponents(p, N)[0 if side == "interior" else 1]
    crit = tuple(check_parabolic_embedding(u, p, side).ratio for _, u in family)
    sup = tuple(check_parabolic_embedding(u, p, side, q=qc + shift).ratio for _, u in family)
    return ProbeResult(side, p, tuple(k for k, _ in family), crit, sup)


def empirical_embedding_constant(p: float, side: str = "interior", n: int = 65, nt: int = 16) -> float:
    """``max_corpus ratio^(1/q)``: empirical lower bound for the embedding constant."""
    ratios = []
    for _, u in embedding_corpus(n, nt):
        r = check_parabolic_embedding(u, p, side)
        if not r.degenerate:
            ratios.append(r.ratio ** (1.0 / r.q))
    return float(max(ratios))
