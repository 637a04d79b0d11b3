import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pxlab.degiorgi import (
    PreconditionError,
    chain_checks,
    check_energy_estimate,
    energy_constants,
    iteration_variables,
    kappa_floor,
    level_sets,
    truncation_energy,
)
from pxlab.exponents import StructureConstants
from pxlab.grid import BoxDomain, SampledField, SpaceTimeGrid
from pxlab.problems import heat_neumann
from pxlab.solver import SolverConfig, solve


def line_field(fn, n=101, nt=4):
    g = SpaceTimeGrid.uniform(BoxDomain.unit(1), n, 1.0, nt)
    return SampledField(g, g.sample(fn))


def test_level_sets_examples():
    u = line_field(lambda t, x: x[..., 0] + 0 * t)
    L = level_sets(u, 0.5, 0.3)
    assert abs(L.measure - 0.5) <= u.grid.space.h[0]
    assert level_sets(u, 1.0, 0.0).measure == 0.0 and level_sets(u, 1.0, 0.0).boundary_measure == 0.0
    full = level_sets(u, -1.0, 1.0)
    assert full.measure == pytest.approx(1.0) and full.boundary_measure == pytest.approx(2.0)
    assert L.t == pytest.approx(0.25)


def test_energy_constants_by_hand():
    c = energy_constants(StructureConstants(), 2.5)
    assert c.eps == 0.5
    assert c.M1_tilde == pytest.approx(4 + 0.5**-1.5, rel=1e-15)
    assert c.M1 == pytest.approx(2 * (4 + 0.5**-1.5), rel=1e-15)
    assert (c.M2_tilde, c.M2) == (2.0, 4.0)
    c2 = energy_constants(StructureConstants(a3=0.5, b0=2.0), 3.0)
    assert c2.eps == 0.125
    assert c2.M1 == pytest.approx(2 * (4 + 2 * 0.125**-2) / 0.5)


@pytest.fixture(scope="module")
def heat():
    spec = heat_neumann()
    return spec, solve(spec, SolverConfig(n=17, nt=20))


def test_heat_energy_at_floor(heat):
    spec, sol = heat
    assert kappa_floor(sol.u) == 1.0
    (c,) = check_energy_estimate(sol, spec, [1.0])
    # the maximum principle keeps u <= 1, so both sides vanish at the floor
    assert c.holds and c.margin >= 0.0


def test_levels_above_max_are_trivial(heat):
    spec, sol = heat
    for c in check_energy_estimate(sol, spec, [1.5, 3.0]):
        assert c.lhs == 0.0 and c.rhs == 0.0 and c.holds


def test_precondition(heat):
    spec, sol = heat
    with pytest.raises(PreconditionError):
        check_energy_estimate(sol, spec, [0.5])
    with pytest.raises(ValueError):
        check_energy_estimate(sol, spec, [1.0], mode="sideways")


def test_mirror_margins_match(heat):
    spec, sol = heat
    neg = solve(spec.negated(), SolverConfig(n=17, nt=20))
    ks = [1.0, 1.2]
    a = check_energy_estimate(sol, spec, ks, mode="super")
    b = check_energy_estimate(neg, spec.negated(), ks, mode="sub")
    for x, y in zip(a, b):
        assert x.margin == pytest.approx(y.margin, abs=1e-12)
        assert x.lhs == pytest.approx(y.lhs, abs=1e-12)


def test_nontrivial_estimate_holds(suite_solutions):
    spec, sol = suite_solutions[2]
    floor = kappa_floor(sol.u)
    ks = np.linspace(floor, sol.values.max(), 6)
    res = check_energy_estimate(sol, spec, ks)
    assert res[0].lhs > 0 and all(c.holds for c in res)
    assert all(c.margin > 0 for c in res[:-1])


def test_truncation_by_hand():
    # u = 2 everywhere on the unit cylinder: (u - 1)_+ = 1
    g = SpaceTimeGrid.uniform(BoxDomain.unit(2), 5, 1.0, 4)
    u = SampledField(g, np.full(g.shape, 2.0))
    from pxlab.exponents import ExponentField, HypothesisSet

    H = HypothesisSet(ExponentField.constant(g, 2.0), ExponentField.constant(g, 3.0), ExponentField.constant(g, 2.5, True))
    e = truncation_energy(u, H, 1.0, 0.5)
    assert e.Z == pytest.approx(0.5) and e.Z_boundary == pytest.approx(2.0)
    assert e.sup_term == pytest.approx(1.0) and e.grad_term == 0.0
    assert e.reaction == pytest.approx(0.5 * 8) and e.flux == pytest.approx(2.0 * 2**2.5)
    assert e.measure == pytest.approx(0.5)


def test_chain_checks_on_suite(suite_solutions):
    for spec, sol in suite_solutions:
        H = spec.hypotheses(sol.grid)
        assert all(c.holds for c in chain_checks(sol.u, H, 1.0, spec.T / 2)), spec.name
    with pytest.raises(PreconditionError):
        chain_checks(sol.u, H, 0.5, spec.T)


def test_ladder_levels(suite_solutions):
    spec, sol = suite_solutions[1]
    IV = iteration_variables(sol.u, spec.hypotheses(sol.grid), 1.0, spec.T, 4)
    np.testing.assert_allclose(IV.levels, [1.0, 1.5, 1.75, 1.875, 1.9375])
    assert np.all(np.diff(IV.Y) <= 0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_truncation_monotone_in_level(k1, k2):
    g = SpaceTimeGrid.uniform(BoxDomain.unit(2), 9, 1.0, 4)
    u = SampledField(g, g.sample(lambda t, x: 1 + np.sin(3 * x[..., 0]) * np.cos(2 * x[..., 1]) * (1 + t)))
    from pxlab.exponents import ExponentField, HypothesisSet

    H = HypothesisSet(ExponentField.constant(g, 2.0), ExponentField.constant(g, 3.0), ExponentField.constant(g, 2.5, True))
    lo, hi = sorted((k1, k2))
    a, b = truncation_energy(u, H, lo), truncation_energy(u, H, hi)
    assert b.Z <= a.Z and b.Z_boundary <= a.Z_boundary and b.sup_term <= a.sup_term and b.measure <= a.measure
