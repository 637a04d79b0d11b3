import numpy as np
import pytest

from pxlab.grid import BoxDomain, integrate
from pxlab.problems import heat_1d, heat_neumann, plaplacian_reaction, problem_from_dict
from pxlab.solver import (
    ProblemSpec,
    SolverConfig,
    SolverDivergence,
    interpolate_exact,
    solve,
    weak_residual,
)
from pxlab.structure import ConstantExponent, ExpressionSource, PLaplacian, Zero


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(eps_reg=0.0)
    with pytest.raises(ValueError):
        SolverConfig(damping=1.0)
    with pytest.raises(ValueError):
        SolverConfig(tol=-1.0)


def test_constants_are_steady():
    p = ConstantExponent(2.7)
    spec = ProblemSpec("const", BoxDomain.unit(2), 0.2, lambda x: np.full(x.shape[:-1], 1.7), PLaplacian(p), Zero(), Zero(), p, p, p)
    sol = solve(spec, SolverConfig(n=9, nt=5))
    np.testing.assert_allclose(sol.values, 1.7, atol=1e-13)


def test_heat_tracks_exact_solution():
    spec = heat_1d()
    sol = solve(spec, SolverConfig(n=65, nt=200))
    ex = interpolate_exact(spec, sol.grid)
    assert np.max(np.abs(sol.values - ex.values)) < 2e-3


def test_mass_conserved_each_step():
    spec = heat_neumann()
    sol = solve(spec, SolverConfig(n=17, nt=10))
    mass = [integrate(sol.u.slice(k)) for k in range(sol.grid.nt + 1)]
    assert np.max(np.abs(np.diff(mass))) < 1e-8


def test_negated_problem_gives_negated_solution():
    spec = plaplacian_reaction(T=0.1)
    cfg = SolverConfig(n=9, nt=5)
    a = solve(spec, cfg)
    b = solve(spec.negated(), cfg)
    np.testing.assert_allclose(b.values, -a.values, atol=1e-9)
    np.testing.assert_array_equal((-a).values, -a.values)


def test_divergence_is_reported():
    q = ConstantExponent(3.0)
    p = ConstantExponent(2.0)
    # u - dt u^2 = 10 has no real root for dt = 0.1
    B = ExpressionSource("s^2", 2, {})
    spec = ProblemSpec("blowup", BoxDomain.unit(2), 1.0, lambda x: np.full(x.shape[:-1], 10.0), PLaplacian(p), B, Zero(), p, q, q)
    with pytest.raises(SolverDivergence):
        solve(spec, SolverConfig(n=5, nt=10, max_iter=30))


def test_diagnostics_recorded():
    sol = solve(heat_neumann(), SolverConfig(n=9, nt=4))
    assert len(sol.diagnostics) == 4
    assert all(d.converged for d in sol.diagnostics)


def test_weak_residual_zero_problem():
    p = ConstantExponent(2.0)
    spec = ProblemSpec("zero", BoxDomain.unit(2), 0.5, lambda x: np.zeros(x.shape[:-1]), PLaplacian(p), Zero(), Zero(), p, p, p)
    sol = solve(spec, SolverConfig(n=9, nt=4))
    assert weak_residual(sol, spec).max_defect == 0.0


def test_weak_residual_vanishes_for_exact_heat_solution():
    spec = heat_neumann()
    d = []
    for n, nt in ((9, 20), (17, 80), (33, 320)):
        g = SolverConfig(n=n, nt=nt).grid(spec)
        d.append(weak_residual(interpolate_exact(spec, g), spec).max_defect)
    assert d[0] > d[1] > d[2]
    assert d[2] < 2e-3


def test_weak_residual_detects_perturbation():
    spec = heat_neumann()
    sol = solve(spec, SolverConfig(n=17, nt=40))
    base = weak_residual(sol, spec).max_defect
    g = sol.grid
    # smooth, nonnegative-mean perturbation
    noise = g.sample(lambda t, x: np.sin(3 * np.pi * t / spec.T) * (1 + x[..., 0] * x[..., 1]))
    from pxlab.grid import SampledField
    from pxlab.solver import Solution

    pert = Solution(g, SampledField(g, sol.values + 0.1 * noise))
    assert weak_residual(pert, spec).max_defect > 10 * base


def test_boundary_flux_changes_mass():
    spec = problem_from_dict(
        {
            "domain": {"lower": [0, 0], "upper": [1, 1]},
            "T": 0.1,
            "exponents": {"p": 2, "q1": 2.5, "q2": 2.5},
            "u0": "1",
            "B": None,
            "C": {"expr": "-1"},
        }
    )
    sol = solve(spec, SolverConfig(n=9, nt=10))
    # d/dt int u = int_Gamma C = -perimeter
    m0, m1 = integrate(sol.u.slice(0)), integrate(sol.u.slice(sol.grid.nt))
    assert m1 - m0 == pytest.approx(-0.4, rel=1e-8)
