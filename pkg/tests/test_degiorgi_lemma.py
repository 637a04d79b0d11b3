import math
import time
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pxlab.degiorgi import IterationParams, decay_bound, iterate_lemma, threshold_sweep, thresholds


def exact_sequence(K, b, d, Y0, n):
    """Rational iteration for integer exponents."""
    Y = [Fraction(Y0)]
    for k in range(n):
        y = Y[-1]
        Y.append(Fraction(K) * Fraction(b) ** k * (y ** (1 + d) + y ** (1 + d)))
    return Y


def test_worked_example():
    P = IterationParams(1.0, 2.0, 1.0, 1.0)
    assert thresholds(P) == (0.25, 0.25)
    r = iterate_lemma(0.25, P, 8)
    exact = exact_sequence(1, 2, 1, Fraction(1, 4), 8)
    assert list(r.sequence[:4]) == [0.25, 0.125, 0.0625, 0.03125]
    assert all(Fraction(a) == b for a, b in zip(r.sequence, exact))
    assert r.verdict == "converges" and r.reached_one and r.decay_holds and r.n0 == 0
    assert all(y <= decay_bound(P, n) for n, y in enumerate(r.sequence))


def test_zero_start():
    r = iterate_lemma(0.0, IterationParams(3.0, 2.0, 0.5, 1.0), 10)
    assert set(r.sequence) == {0.0}


def test_blowup_above_threshold():
    P = IterationParams(1.0, 2.0, 1.0, 1.0)
    r = iterate_lemma(10.0, P, 10)
    assert r.verdict == "no-guarantee" and r.diverged and not r.reached_one
    assert max(r.sequence) > 1e100


def test_parameter_validation():
    for args in ((0.0, 2.0, 1.0, 1.0), (1.0, 1.0, 1.0, 1.0), (1.0, 2.0, 2.0, 1.0), (1.0, 2.0, 0.0, 1.0)):
        with pytest.raises(ValueError):
            IterationParams(*args)
    with pytest.raises(ValueError):
        iterate_lemma(-1.0, IterationParams(1.0, 2.0, 1.0, 1.0))


def test_threshold_formulas_by_hand():
    K, b, d1, d2 = 2.0, 3.0, 0.5, 2.0
    g = (2 * K) ** (-1 / d1) * b ** (-1 / d1**2)
    h = (2 * K) ** (-1 / d2) * b ** (-1 / (d1 * d2) - (d2 - d1) / d2**2)
    t1, t2 = thresholds(IterationParams(K, b, d1, d2))
    assert t1 == pytest.approx(min(1, g), rel=1e-14)
    assert t2 == pytest.approx(min(g, h), rel=1e-14)


def test_sweep_is_seeded():
    a = threshold_sweep(5, seed=7)
    b = threshold_sweep(5, seed=7)
    assert [r[0] for r in a] == [r[0] for r in b]
    for P, _, _, _ in a:
        assert 0.5 <= P.K <= 5 and 1 < P.b <= 4 and 0 < P.delta1 <= P.delta2 <= 3


@settings(max_examples=200, deadline=None)
@given(st.floats(0.5, 5), st.floats(1.0001, 4), st.floats(0.01, 3), st.floats(0.01, 3), st.floats(0.0, 1.0))
def test_below_threshold_converges(K, b, x, y, frac):
    d1, d2 = min(x, y), max(x, y)
    P = IterationParams(K, b, d1, d2)
    Y0 = frac * thresholds(P)[0]
    r = iterate_lemma(Y0, P, 40)
    assert r.reached_one and r.decay_holds and not r.diverged
