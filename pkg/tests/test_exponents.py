import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pxlab.exponents import (
    ExponentField,
    HypothesisSet,
    StructureConstants,
    check_admissible,
    check_log_holder,
    critical_exponents,
    default_structure_samples,
    validate_structure,
)
from pxlab.grid import BoxDomain, SpaceTimeGrid, SpatialGrid
from pxlab.structure import ConstantExponent, PLaplacian, PowerBoundaryFlux, PowerReaction, Zero


@pytest.mark.parametrize("p,N,expected", [(2, 2, (4, 3)), (1.5, 2, (3, 2)), (3, 3, (5, 13 / 3))])
def test_critical_exponents(p, N, expected):
    star, low = critical_exponents(p, N)
    assert star == pytest.approx(expected[0], abs=1e-14)
    assert low == pytest.approx(expected[1], abs=1e-14)


@pytest.mark.parametrize("p,N", [(2.0, 1), (1.0, 2), (0.5, 3), (2.0, 2.5)])
def test_critical_exponents_rejects(p, N):
    with pytest.raises(ValueError):
        critical_exponents(p, N)


def _line(n):
    return SpatialGrid(BoxDomain.unit(1), (n,))


def test_log_holder_constant_field():
    sp = _line(33)
    f = ExponentField(sp, np.full(sp.shape, 2.0))
    assert check_log_holder(f, 0.01).verdict


def test_log_holder_fit_matches_bruteforce():
    sp = _line(64)
    x = sp.coords[..., 0]
    f = ExponentField(sp, 2 + 0.2 * x)
    rep = check_log_holder(f, mode="fit", chunk=7)
    best = 0.0
    for i, j in itertools.combinations(range(64), 2):
        d = abs(x[i] - x[j])
        best = max(best, abs(0.2 * (x[i] - x[j])) * math.log(math.e + 1 / d))
    assert math.isfinite(rep.k_fit)
    assert rep.k_fit == pytest.approx(best, rel=1e-12)
    assert check_log_holder(f, rep.k_fit * (1 + 1e-12)).verdict


def test_log_holder_step_field_fails_with_adjacent_witness():
    sp = _line(64)
    x = sp.coords[..., 0]
    f = ExponentField(sp, np.where(x < 0.5, 2.0, 3.0))
    rep = check_log_holder(f, 2.0)
    assert not rep.verdict
    (_, xa), (_, xb) = rep.witness
    assert abs(xa[0] - xb[0]) == pytest.approx(sp.h[0])
    assert min(xa[0], xb[0]) < 0.5 <= max(xa[0], xb[0])


def test_log_holder_spacetime_table():
    g = SpaceTimeGrid.uniform(BoxDomain.unit(2), 5, 1.0, 3)
    f = ExponentField.from_function(g, lambda t, x: 2 + 0.1 * t + 0 * x[..., 0])
    rep = check_log_holder(f, mode="fit")
    # largest contribution: |dt| = 1 pair at equal x  ->  0.1 log(e + 1)
    assert rep.k_fit == pytest.approx(0.1 * math.log(math.e + 1), rel=1e-12)


def _hyp(p, q1, q2, N=2):
    g = SpaceTimeGrid.uniform(BoxDomain.unit(N), 5, 1.0, 2)
    return HypothesisSet(ExponentField.constant(g, p), ExponentField.constant(g, q1), ExponentField.constant(g, q2, True))


def test_admissible_example():
    assert check_admissible(_hyp(2, 3, 2.5), 2).admissible


def test_admissible_rejects_q1_at_critical():
    rep = check_admissible(_hyp(2, 4, 2.5), 2)
    assert not rep.admissible and rep.failures["q1<p*"] is not None


def test_admissible_rejects_q2_at_critical():
    rep = check_admissible(_hyp(2, 3, 3), 2)
    assert not rep.admissible and rep.failures["q2<p_*"] is not None


def test_hypothesis_set_requires_p_above_one():
    with pytest.raises(ValueError):
        _hyp(1.0, 2, 2)


def test_q2_extrema_only_on_boundary():
    g = SpaceTimeGrid.uniform(BoxDomain.unit(2), 5, 1.0, 2)
    vals = np.full(g.shape, 2.5)
    vals[:, 2, 2] = 99.0  # interior node, ignored for a boundary field
    f = ExponentField(g, vals, boundary=True)
    assert f.sup_value == 2.5


def test_structure_constants_positive():
    with pytest.raises(ValueError):
        StructureConstants(a3=0.0)


def _grid_h(p=2.5, q=3.0):
    g = SpaceTimeGrid.uniform(BoxDomain.unit(2), 5, 1.0, 2)
    return HypothesisSet(ExponentField.constant(g, p), ExponentField.constant(g, q), ExponentField.constant(g, q, True))


def test_structure_plaplacian_passes():
    H = _grid_h()
    p = ConstantExponent(2.5)
    rep = validate_structure(PLaplacian(p, eps=0.0), PowerReaction(ConstantExponent(3.0)), PowerBoundaryFlux(ConstantExponent(3.0)), H)
    assert rep.passed
    # equality case of the coercivity condition at |xi| = 1, s = 0: A.xi = |xi|^p
    assert rep.conditions["coercivity"]["passed"]


def test_structure_detects_large_flux():
    g = SpaceTimeGrid.uniform(BoxDomain.unit(2), 5, 1.0, 2)
    c = StructureConstants(a0=1.0, a1=0.01, a2=0.01)
    H = HypothesisSet(ExponentField.constant(g, 2.0), ExponentField.constant(g, 3.0), ExponentField.constant(g, 2.5, True), c)
    rep = validate_structure(PLaplacian(ConstantExponent(2.0), coef=2.0, eps=0.0), Zero(), Zero(), H)
    h1 = rep.conditions["flux-growth"]
    assert not h1["passed"]
    w = h1["witness"]
    assert np.linalg.norm(w["xi"]) > 1.0


def test_default_samples_cover_zero_gradient_and_signs():
    g = SpaceTimeGrid.uniform(BoxDomain.unit(2), 5, 1.0, 2)
    s = default_structure_samples(g, seed=3)
    assert set(np.unique(s["s"])) == {-10.0, -1.0, 0.0, 1.0, 10.0}
    assert np.min(np.linalg.norm(s["xi"], axis=1)) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.floats(1.05, 6.0), st.integers(2, 3))
def test_critical_gap_property(p, N):
    star, low = critical_exponents(p, N)
    assert star - low == pytest.approx(2.0 / N)
    assert star > p
