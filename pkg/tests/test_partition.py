import numpy as np
import pytest

from pxlab.degiorgi import PartitionError, ball_centres, build_partition
from pxlab.exponents import ExponentField, HypothesisSet
from pxlab.grid import BoxDomain, SpaceTimeGrid
from pxlab.problems import variable_exponent_flux
from pxlab.solver import SolverConfig


def constant_h(p, q1, q2, n=9, nt=4):
    g = SpaceTimeGrid.uniform(BoxDomain.unit(2), n, 1.0, nt)
    return HypothesisSet(ExponentField.constant(g, p), ExponentField.constant(g, q1), ExponentField.constant(g, q2, True)), g


def test_constant_exponents_single_patch():
    H, g = constant_h(2.0, 3.0, 2.5)
    P = build_partition(H, g)
    assert P.l == 1 and P.m == 1 and P.refinements == ()
    assert P.R == pytest.approx(np.sqrt(2)) and P.delta == 1.0
    assert P.p_minus[0, 0] == 2.0 and P.q1_plus[0, 0] == 3.0 and P.q2_plus[0, 0] == 2.5
    assert P.L == pytest.approx(1.0 + 1e-6)


def test_inadmissible_constant_exponents_fail():
    H, g = constant_h(2.0, 4.0, 2.5)
    with pytest.raises(PartitionError):
        build_partition(H, g)


def test_variable_exponents_refine_to_admissible_patches():
    spec = variable_exponent_flux()
    g = SolverConfig(n=17, nt=20).grid(spec)
    P = build_partition(spec.hypotheses(g), g)
    assert np.isfinite(P.R) and np.isfinite(P.delta) and len(P.refinements) > 0
    N = 2
    star = P.p_minus * (N + 2) / N
    assert np.all(P.p_plus <= P.q1_plus) and np.all(P.q1_plus < star)
    on = ~np.isnan(P.q2_plus)
    assert np.all(P.q2_plus[on] < (star - 2 / N)[on]) and np.all(P.p_plus[on] <= P.q2_plus[on])


def test_cover_and_partition_of_unity():
    spec = variable_exponent_flux()
    g = SolverConfig(n=17, nt=20).grid(spec)
    P = build_partition(spec.hypotheses(g), g)
    x = np.random.default_rng(0).uniform(0, 1, (10_000, 2))
    xi = P.xi(x)
    assert np.max(np.abs(xi.sum(axis=-1) - 1.0)) < 1e-10
    assert xi.min() >= 0
    d = np.min(np.linalg.norm(x[:, None] - P.centres[None], axis=-1), axis=1)
    assert np.all(d < P.R)


def test_gradient_matches_finite_differences():
    spec = variable_exponent_flux()
    g = SolverConfig(n=17, nt=20).grid(spec)
    P = build_partition(spec.hypotheses(g), g)
    x = np.random.default_rng(1).uniform(0.05, 0.95, (50, 2))
    e = 1e-6
    for d in range(2):
        dx = np.zeros(2)
        dx[d] = e
        fd = (P.xi(x + dx) - P.xi(x - dx)) / (2 * e)
        np.testing.assert_allclose(P.grad_xi(x)[..., d], fd, atol=1e-5 * P.L)
    assert P.L >= np.max(np.linalg.norm(P.grad_xi(x), axis=-1)) * (1 - 1e-12)


def test_ball_centres_spacing():
    c = ball_centres(BoxDomain((0, 0), (2, 1)), 0.3)
    xs, ys = np.unique(c[:, 0]), np.unique(c[:, 1])
    assert len(xs) == 7 and len(ys) == 4
    assert np.max(np.diff(xs)) <= 0.3 and np.max(np.diff(ys)) <= 0.3


def test_one_dimensional_rejected():
    g = SpaceTimeGrid.uniform(BoxDomain.unit(1), 9, 1.0, 4)
    H = HypothesisSet(ExponentField.constant(g, 2.0), ExponentField.constant(g, 2.0), ExponentField.constant(g, 2.0, True))
    with pytest.raises(PartitionError):
        build_partition(H, g)
