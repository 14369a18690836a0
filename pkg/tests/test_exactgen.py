import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiercontact import exactgen
from hiercontact.bounds import f

params = st.tuples(st.floats(0.05, 5.0), st.lists(st.floats(0.01, 10.0), min_size=3, max_size=3))


@pytest.mark.parametrize("n,N", [(1, 2), (2, 2), (3, 2), (1, 3), (2, 3)])
def test_contact_generator_rows_sum_to_zero(n, N):
    G = exactgen.build_contact_generator(n, 0.7, [1.1, 0.4, 2.0][:n], N)
    assert exactgen.check_generator(G) < 1e-13
    # the all-healthy state is absorbing
    assert G.getrow(0).nnz == 0


def test_one_level_generator_entries():
    G = exactgen.build_contact_generator(1, 1.0, [2.0]).toarray()
    # state 1 = site 0 infected: recovers at delta, infects site 1 at alpha_1/2
    assert G[1, 0] == 1.0 and G[1, 3] == 1.0
    assert G[3, 1] == 1.0 and G[3, 2] == 1.0


@given(params)
@settings(max_examples=25, deadline=None)
def test_symmetric_restriction_matches_two_by_two(p):
    delta, (a1, _, _) = p
    R = exactgen.build_contact_generator(1, delta, [a1]).toarray()
    u, v = 0.3, -1.7
    fvec = np.array([0.0, u, u, v])
    M = np.array([[-(delta + 0.5 * a1), 0.5 * a1], [2 * delta, -2 * delta]])
    got = R @ fvec
    assert got[0] == 0
    assert np.allclose(got[[1, 3]], M @ [u, v], rtol=1e-13, atol=1e-13)
    assert got[1] == pytest.approx(got[2], abs=1e-13)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_kernel_is_stochastic(n):
    P = exactgen.build_kernel(n, 0.3)
    assert np.allclose(np.asarray(P.sum(axis=1)).ravel(), 1.0, atol=1e-15)
    assert P.shape == (exactgen.n_states(n), exactgen.n_states(n - 1))


def test_kernel_examples():
    xi = 0.3
    assert exactgen.kernel_prob(1, 0, 1, xi) == xi
    assert exactgen.kernel_prob(1, 1, 1, xi) == 1 - xi
    # blocks (01, 11): block 0 holds one infection, block 1 is full
    x = 0b1110
    P = exactgen.build_kernel(2, xi).toarray()
    assert P[x, 0b10] == pytest.approx(xi)
    assert P[x, 0b11] == pytest.approx(1 - xi)
    assert P[x, 0b00] == 0 and P[x, 0b01] == 0
    with pytest.raises(ValueError):
        exactgen.build_kernel(2, 0.7)


def test_tables_and_acceptance_probabilities():
    xi = 0.2
    A, B = exactgen.a_table(xi), exactgen.b_table(xi)
    assert A[1, 2] == 1.0 and B[0, 0] == 0.0
    assert A[0, 1] == pytest.approx(1 - xi) and A[0, 2] == pytest.approx(2 * (1 - xi))
    from hiercontact.coupling import acceptance_probabilities
    probs = acceptance_probabilities(xi)
    expected = {1.0, 0.5, 1 / (2 * (1 - xi)), 1 / (4 * (1 - xi))}
    assert all(any(abs(p - e) < 1e-15 for e in expected) for p in probs)
    assert all(0 < p <= 1 for p in probs)


@given(params)
@settings(max_examples=15, deadline=None)
def test_intertwining_property(p):
    delta, alpha = p
    for n in (1, 2):
        assert exactgen.intertwine_residual(n, delta, alpha[:n]) < 1e-12
    assert exactgen.commute_residual(1, delta, alpha[:1]) < 1e-12


def test_fixed_examples():
    assert exactgen.verify_intertwine(1, 1.0, [2.0])["pass"]
    assert exactgen.verify_intertwine(2, 1.0, [2.0, 1.0])["pass"]
    assert exactgen.verify_commute(1, 1.0, [2.0])["max_residual"] < 1e-12
    assert exactgen.verify_commute(2, 1.0, [2.0, 1.0])["max_residual"] < 1e-10


def test_wrong_xi_breaks_intertwining():
    rep = exactgen.verify_intertwine(2, 1.0, [2.0, 1.0], xi=0.4)
    assert not rep["pass"] and rep["max_residual"] > 1e-3


def test_all_ones_star_independent():
    xi, dp, ap = exactgen.addon_params(1.0, [2.0, 1.0])
    ga = exactgen.build_addon_generator(0b1111, 2, dp, ap, xi, exactgen.STAR_A).toarray()
    gb = exactgen.build_addon_generator(0b1111, 2, dp, ap, xi, exactgen.STAR_B).toarray()
    # rows reachable from P(1111, .) = point mass at 11 agree
    assert np.array_equal(ga[3], gb[3])


def test_joint_generator_marginal():
    G = exactgen.build_joint_generator(1, 1.0, [2.0])
    assert exactgen.check_generator(G) < 1e-13
    rep = exactgen.joint_marginal_check(1, 1.0, [2.0], x0=1, t=1.0)
    assert rep["max_marginal_diff"] < 1e-10 and rep["max_conditional_diff"] < 1e-10
    rep = exactgen.joint_marginal_check(2, 0.8, [1.5, 0.6], x0=0b0110, t=0.7)
    assert rep["max_marginal_diff"] < 1e-10 and rep["max_conditional_diff"] < 1e-10


def test_spectrum_closed_values():
    sp = exactgen.one_level_spectrum(1.0, 0.0)
    assert sorted(sp["lambda_numeric"]) == pytest.approx([-2.0, -1.0], abs=1e-14)
    assert sp["lambda_lead"] == pytest.approx(-1.0, abs=1e-15)
    sp = exactgen.one_level_spectrum(0.6, 3.3)
    assert sp["eigvec"][0] == 0.0
    assert sp["lambda_lead"] == pytest.approx(-2 * 0.6 * f(3.3 / 0.6), rel=1e-14)
    assert sp["full_residual"] < 1e-12


@pytest.mark.parametrize("xi", [0.05, 0.25, 0.5])
def test_two_level_specific_entries(xi):
    rep = exactgen.verify_two_level_tables(xi)
    t = rep["tables"]
    assert t["P00"][1][1] == pytest.approx(xi ** 2, abs=1e-16)
    assert t["IP00"][1][1] == pytest.approx(-0.5 * xi ** 2, abs=1e-16)
    assert np.allclose(np.array(t["IP01"]), -np.array(t["IP11"]), atol=1e-16)
    assert rep["pass"]


def test_level_limits():
    with pytest.raises(ValueError):
        exactgen.build_contact_generator(exactgen.MAX_EXACT_LEVEL + 1, 1.0, [1.0] * 5)
    with pytest.raises(ValueError):
        exactgen.verify_intertwine(4, 1.0, [1.0] * 4)
