from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pxlab.grid import BoxDomain, SampledField, SpaceTimeGrid, SpatialGrid
from pxlab.inequalities import (
    CORPUS_VERSION,
    InadmissibleExponents,
    InterpolationSetup,
    check_gn,
    check_parabolic_embedding,
    concentration_family,
    corpus_functions,
    empirical_embedding_constant,
    gn_exponent,
    spatial_corpus,
)


def alpha_oracle(N, p, s, q, side):
    """Solve the linking equation in exact rational arithmetic."""
    N, p, s, q = (Fraction(v) for v in (N, p, s, q))
    lhs = N / q if side == "interior" else (N - 1) / q
    # lhs = a (N/p - 1) + (1 - a) N/s  =>  a = (lhs - N/s) / (N/p - 1 - N/s)
    return (lhs - N / s) / (N / p - 1 - N / s)


@pytest.mark.parametrize(
    "N,p,s,q,side",
    [(2, 2, 2, 4, "interior"), (2, 2, 2, 3, "boundary"), (3, 2.5, 2, 3, "interior"), (3, 3, 1.5, 4, "boundary")],
)
def test_gn_exponent_matches_rational_oracle(N, p, s, q, side):
    assert gn_exponent(N, p, s, q, side) == pytest.approx(float(alpha_oracle(N, p, s, q, side)), abs=1e-14)


def test_gn_named_examples():
    assert gn_exponent(2, 2, 2, 4) == pytest.approx(0.5, abs=1e-15)
    a2 = gn_exponent(2, 2, 2, 3, "boundary")
    assert a2 == pytest.approx(2 / 3, abs=1e-15) and a2 > 1 / 3


@pytest.mark.parametrize("p", [1.5, 2.0, 3.7])
def test_gn_rejects_s_equal_q_equal_p_boundary(p):
    with pytest.raises(InadmissibleExponents) as exc:
        gn_exponent(2, p, p, p, "boundary")
    assert exc.value.constraint == "alpha>1/q"


def test_gn_rejections():
    with pytest.raises(InadmissibleExponents):
        gn_exponent(1, 2, 2, 3)
    with pytest.raises(InadmissibleExponents):
        gn_exponent(2, 1.0, 2, 3)
    with pytest.raises(InadmissibleExponents):
        gn_exponent(2, 2, 4, 2)  # alpha = -1
    with pytest.raises(ValueError):
        gn_exponent(2, 2, 2, 3, "side")


def test_gn_rejects_degenerate_denominator():
    # p = N s / (N + s)
    with pytest.raises(InadmissibleExponents):
        gn_exponent(2, 2 * 3 / 5, 3, 4)


def test_gn_constant_function_ratio_one():
    u = dict(spatial_corpus(65))["constant"]
    r = check_gn(u, InterpolationSetup(2, 2.0, 2.0, 4.0))
    assert r.ratio == pytest.approx(1.0, abs=1e-12)


def test_gn_sine_product_finite():
    u = dict(spatial_corpus(65))["sine-product"]
    r = check_gn(u, InterpolationSetup(2, 2.0, 2.0, 4.0))
    assert np.isfinite(r.ratio) and 0 < r.ratio < 1


def test_gn_oscillation_family_bounded():
    sp = SpatialGrid(BoxDomain.unit(2), 129)
    setup = InterpolationSetup(2, 2.0, 2.0, 4.0)
    ratios = [check_gn(SampledField(sp, np.sin(k * np.pi * sp.coords[..., 0])), setup).ratio for k in range(1, 7)]
    # closed form on the unit square: (3 / (2 (k^2 pi^2 + 1)))^(1/4)
    exact = [(3.0 / (2.0 * (k * k * np.pi**2 + 1.0))) ** 0.25 for k in range(1, 7)]
    np.testing.assert_allclose(ratios, exact, rtol=2e-3)
    assert max(ratios) == ratios[0]


@pytest.mark.parametrize("lam", [0.1, 10.0])
def test_gn_scaling_invariance(lam):
    setup = InterpolationSetup(2, 2.0, 2.0, 3.0, "boundary")
    for name, u in spatial_corpus(33):
        r1 = check_gn(u, setup)
        if r1.degenerate:
            continue
        r2 = check_gn(u * lam, setup)
        assert r2.ratio == pytest.approx(r1.ratio, rel=1e-9), name


def test_gn_zero_is_degenerate():
    sp = SpatialGrid(BoxDomain.unit(2), 9)
    r = check_gn(SampledField(sp, np.zeros(sp.shape)), InterpolationSetup(2, 2.0, 2.0, 4.0))
    assert r.degenerate and r.lhs == 0.0


def test_corpus_is_versioned_and_sized():
    names = [n for n, _ in corpus_functions()]
    assert CORPUS_VERSION == "1"
    assert len(names) == 20 and len(set(names)) == 20


def test_embedding_constant_function_ratio_one():
    g = SpaceTimeGrid.uniform(BoxDomain.unit(2), 9, 1.0, 4)
    u = SampledField(g, np.ones(g.shape))
    r = check_parabolic_embedding(u, 2.0)
    assert (r.lhs, r.rhs, r.ratio) == pytest.approx((1.0, 1.0, 1.0), abs=1e-12)


def test_embedding_decaying_sine_finite():
    g = SpaceTimeGrid.uniform(BoxDomain.unit(2), 33, 1.0, 16)
    u = SampledField(g, g.sample(lambda t, x: np.exp(-t) * np.sin(np.pi * x[..., 0]) * np.sin(np.pi * x[..., 1])))
    for side in ("interior", "boundary"):
        r = check_parabolic_embedding(u, 2.0, side)
        assert np.isfinite(r.ratio)


def test_embedding_rejects_spatial_field():
    sp = SpatialGrid(BoxDomain.unit(2), 9)
    with pytest.raises(ValueError):
        check_parabolic_embedding(SampledField(sp, np.ones(sp.shape)), 2.0)


def test_concentration_family_is_scale_invariant_in_energy_norm():
    fam = concentration_family(n=129, nt=2)
    l2 = [float(np.sum(u.grid.space.weights * u.values[0] ** 2)) for _, u in fam]
    assert max(l2) / min(l2) < 1.2


def test_empirical_constant_bounds_corpus():
    C = empirical_embedding_constant(2.0, "boundary", n=33, nt=8)
    from pxlab.inequalities import embedding_corpus

    for _, u in embedding_corpus(33, 8):
        assert check_parabolic_embedding(u, 2.0, "boundary").holds_with(C)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 3), st.floats(1.1, 5.0), st.floats(1.1, 5.0), st.floats(1.1, 12.0), st.sampled_from(["interior", "boundary"]))
def test_gn_linking_property(N, p, s, q, side):
    setup = InterpolationSetup(N, p, s, q, side)
    try:
        setup.alpha
    except InadmissibleExponents:
        return
    assert abs(setup.linking_residual()) <= 1e-12 * max(1.0, N / p + N / s)
