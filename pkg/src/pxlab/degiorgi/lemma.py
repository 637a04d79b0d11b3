"""Geometric-convergence lemma for ``Y_{n+1} <= K b^n (Y_n^{1+d1} + Y_n^{1+d2})``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["IterationParams", "LemmaResult", "thresholds", "decay_bound", "iterate_lemma", "threshold_sweep"]

SLACK = 1e-12


@dataclass(frozen=True)
class IterationParams:
    K: float
    b: float
    delta1: float
    delta2: float

    def __post_init__(self):
        if not self.K > 0:
            raise ValueError("K must be positive")
        if not self.b > 1:
            raise ValueError("b must exceed 1")
        if not 0 < self.delta1 <= self.delta2:
            raise ValueError("need 0 < delta1 <= delta2")


def _g(P: IterationParams) -> float:
    """``(2K)^(-1/d1) b^(-1/d1^2)``, computed in logs."""
    return math.exp(-math.log(2 * P.K) / P.delta1 - math.log(P.b) / P.delta1**2)


def thresholds(P: IterationParams) -> tuple[float, float]:
    """The two sufficient bounds on ``Y_0``.

    first:  ``min(1, (2K)^(-1/d1) b^(-1/d1^2))``
    second: ``min((2K)^(-1/d1) b^(-1/d1^2), (2K)^(-1/d2) b^(-1/(d1 d2) - (d2-d1)/d2^2))``
    """
    d1, d2 = P.delta1, P.delta2
    g = _g(P)
    h = math.exp(-math.log(2 * P.K) / d2 - math.log(P.b) * (1 / (d1 * d2) + (d2 - d1) / d2**2))
    return min(1.0, g), min(g, h)


def decay_bound(P: IterationParams, n: int) -> float:
    """``min(1, (2K)^(-1/d1) b^(-1/d1^2) b^(-n/d1))``."""
    return min(1.0, math.exp(-math.log(2 * P.K) / P.delta1 - math.log(P.b) * (1 / P.delta1**2 + n / P.delta1)))


@dataclass(frozen=True)
class LemmaResult:
    sequence: tuple[float, ...]
    verdict: str  # "converges" when Y0 meets a threshold, else "no-guarantee"
    reached_one: bool
    n0: int | None
    decay_holds: bool
    diverged: bool
    first_violation: int | None = None


def iterate_lemma(Y0: float, P: IterationParams, n_max: int = 60) -> LemmaResult:
    """Iterate the worst case of the recursion and test the lemma's conclusions.

    Overflow is reported as divergence.  The decay bound is checked at every
    ``n >= n0`` with relative slack 1e-12.
    """
    if Y0 < 0:
        raise ValueError("Y0 must be nonnegative")
    th1, th2 = thresholds(P)
    meets = Y0 <= th1 * (1 + SLACK) or Y0 <= th2 * (1 + SLACK)
    Y = [float(Y0)]
    diverged = False
    for n in range(n_max):
        y = Y[-1]
        try:
            nxt = P.K * P.b**n * (y ** (1 + P.delta1) + y ** (1 + P.delta2))
        except OverflowError:
            nxt = math.inf
        if not math.isfinite(nxt):
            diverged = True
            Y.append(math.inf)
            break
        Y.append(nxt)
    n0 = next((n for n, y in enumerate(Y) if y <= 1.0), None)
    decay, bad = True, None
    if n0 is not None:
        for n in range(n0, len(Y)):
            if not Y[n] <= decay_bound(P, n) * (1 + SLACK):
                decay, bad = False, n
                break
    else:
        decay = False
    return LemmaResult(
        tuple(Y), "converges" if meets else "no-guarantee", n0 is not None, n0, decay, diverged, bad
    )


def threshold_sweep(n: int = 200, seed: int = 0, n_max: int = 60):
    """Random admissible parameters with ``Y0`` set at each threshold.

    ``K in [0.5, 5]``, ``b in (1, 4]``, ``0 < d1 <= d2 <= 3``.  Yields
    ``(params, which, Y0, result)`` rows.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(n):
        K = rng.uniform(0.5, 5.0)
        b = 4.0 - rng.uniform(0.0, 3.0) * (1 - 1e-9)  # (1, 4]
        d = np.sort(rng.uniform(1e-3, 3.0, size=2))
        P = IterationParams(float(K), float(b), float(d[0]), float(d[1]))
        for which, y0 in zip(("first", "second"), thresholds(P)):
            rows.append((P, which, y0, iterate_lemma(y0, P, n_max)))
    return rows
