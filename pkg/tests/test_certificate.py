import json
from dataclasses import replace

import mpmath as mp
import numpy as np
import pytest

from pxlab.degiorgi import (
    CertificateError,
    build_partition,
    compute_bound_certificate,
    constant_chain,
    exponent_algebra,
    supersolution_certificate,
)
from pxlab.exponents import StructureConstants
from pxlab.problems import heat_neumann, plaplacian_reaction, problem_from_dict
from pxlab.solver import SolverConfig, solve


def test_hand_example():
    A = exponent_algebra(2.0, 2.0, 2.0, 2)
    assert A.eta == 0.5 and A.s_values == (1.75,) and A.eta_tilde == 0.875 and A.eta_hat == 0.875
    assert A.q_plus == 2.0
    assert A.delta1 == 0.125 and A.delta2 == 4.0 and A.a == 0.25 and A.beta == 16.0


def test_exponent_algebra_balls_off_boundary():
    A = exponent_algebra([2.0, 2.0], [2.0, 3.0], [np.nan, 2.0], 2)
    assert A.eta == 0.75 and len(A.s_values) == 1


def test_constant_chain_by_hand():
    # q1 = q2 = p = 2, m = 1, L = 1, unit embedding constants, unit structure constants
    M = constant_chain(StructureConstants(), 2.0, 2.0, 2.0, 1, 1.0, 1.0, 1.0)
    M1 = 2 * (4 + 0.5**-1)  # eps = 1/2
    assert float(M["M1"]) == pytest.approx(M1)
    M3 = max(M1 * 16, 4 * 16)
    M5 = M3 + 4
    M7 = 4 * 4 * (M5**2 + 2**8)
    assert float(M["M9"]) == pytest.approx(2 * M7 * 4)
    M12 = 2 * 4 * 2**4 * (M5**4 + 2**16)
    assert float(M["M16"]) == pytest.approx(2 * M12 * 16)
    assert float(M["b"]) == pytest.approx(max(16 * 4, 256 * 4))


@pytest.fixture(scope="module")
def heat():
    spec = heat_neumann()
    return spec, solve(spec, SolverConfig(n=17, nt=20))


def test_heat_soundness_and_symmetry(heat):
    spec, sol = heat
    up = compute_bound_certificate(sol, spec)
    lo = supersolution_certificate(sol, spec)
    assert up.sound and lo.sound and up.finite and lo.finite
    assert mp.mpf(sol.values.max()) <= up.final_bound
    # cos(pi x1) cos(pi x2) is odd under x1 -> 1 - x1: mirrored certificate is exact
    assert float(mp.log10(lo.final_bound)) == pytest.approx(float(mp.log10(up.final_bound)), rel=1e-12)
    assert up.C1 == 1.0 and up.log_holder["status"].startswith("skipped")


def test_json_roundtrip(heat):
    spec, sol = heat
    up = compute_bound_certificate(sol, spec)
    d = json.loads(up.to_json())
    assert abs(mp.mpf(d["bound"]["value"]) / up.final_bound - 1) < 1e-15
    assert d["exponents"][0]["beta"] == up.beta
    assert d["sound"] is True and d["mode"] == "upper"


def test_monotone_in_b0():
    spec = plaplacian_reaction(T=0.1)
    sol = solve(spec, SolverConfig(n=9, nt=5))
    prev = None
    for b0 in (0.5, 1.0, 2.0, 4.0):
        s = replace(spec, constants=StructureConstants(b0=b0))
        c = compute_bound_certificate(sol, s)
        if prev is not None:
            assert c.final_bound >= prev
        prev = c.final_bound


def test_negative_constant_solution():
    spec = problem_from_dict(
        {"domain": {"lower": [0, 0], "upper": [1, 1]}, "T": 0.1, "exponents": {"p": 2, "q1": 2.5, "q2": 2.5}, "u0": "-0.5"}
    )
    sol = solve(spec, SolverConfig(n=9, nt=4))
    lo = supersolution_certificate(sol, spec)
    assert lo.bound <= -0.5 and lo.sound


def test_rejects_non_closing_exponents(heat):
    spec, sol = heat
    P = build_partition(spec.hypotheses(sol.grid), sol.grid)
    bad = replace(P, q1_plus=np.full_like(P.q1_plus, 4.5))
    with pytest.raises(CertificateError):
        compute_bound_certificate(sol, spec, partition=bad)


def test_variable_exponent_certificate_records_log_holder(suite_solutions):
    spec, sol = suite_solutions[2]
    c = compute_bound_certificate(sol, spec)
    assert c.log_holder["status"] == "fitted" and c.log_holder["k"] > 0
    assert c.sound and c.finite and c.partition["l"] >= 1
