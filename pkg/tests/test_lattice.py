import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiercontact.lattice import (
    Address, DoubleExp, EffectiveDim, Explicit, Geometric, RateModel, add_mod, address_from_index,
    alpha_from_json, beta_tail, block_members, concat, condition_diagnostics, hdist, index_hdist,
    infection_rate, neg, parse_alpha, restrict, site_index, total_infection_rate,
)


@st.composite
def addresses(draw, N=None, n=6):
    N = N or draw(st.integers(2, 5))
    return Address(tuple(draw(st.lists(st.integers(0, N - 1), min_size=0, max_size=n))), N)


@st.composite
def address_triples(draw):
    N = draw(st.integers(2, 5))
    return tuple(draw(addresses(N=N)) for _ in range(3))


@given(address_triples())
def test_ultrametric_and_translation_invariance(tr):
    i, j, k = tr
    assert hdist(i, k) <= max(hdist(i, j), hdist(j, k))
    assert hdist(i, j) == hdist(j, i)
    assert hdist(add_mod(i, k), add_mod(j, k)) == hdist(i, j)
    assert hdist(i, j) == hdist(add_mod(i, neg(j)), Address.origin(i.base))
    assert (hdist(i, j) == 0) == (i == j)


@given(st.integers(2, 4), st.integers(0, 5), st.data())
def test_site_index_roundtrip_and_index_hdist(N, n, data):
    s = data.draw(st.integers(0, N ** n - 1))
    t = data.draw(st.integers(0, N ** n - 1))
    a, b = address_from_index(s, n, N), address_from_index(t, n, N)
    assert site_index(a, n) == s
    assert index_hdist(s, t, N) == hdist(a, b)


def test_trailing_zeros_are_canonical():
    assert Address((1, 0, 0)) == Address((1,))
    assert Address((0, 0)).norm == 0
    with pytest.raises(ValueError):
        Address((2,), 2)
    with pytest.raises(ValueError):
        hdist(Address((1,), 2), Address((1,), 3))


def test_blocks_and_restriction():
    j = Address((1,), 3)
    members = block_members(2, j, 3)
    assert len(members) == 9
    assert all(hdist(m, members[0]) <= 2 for m in members)
    assert all(m.digit(2) == 1 for m in members)
    x = list(range(27))
    assert restrict(x, j, 2, 3) == x[9:18]
    assert concat(Address((1, 1), 3), 2, Address((2,), 3), 1) == Address((1, 1, 2), 3)


@pytest.mark.parametrize("N,n", [(2, 4), (3, 3), (4, 2)])
def test_per_site_total_rate_matches_brute_force(N, n):
    model = RateModel(N, 1.0, Explicit((0.3, 1.7, 0.9, 2.2)))
    o = Address.origin(N)
    brute = sum(infection_rate(model, o, address_from_index(s, n, N)) for s in range(1, N ** n))
    assert brute == pytest.approx(total_infection_rate(model, n), rel=1e-13)


def test_double_exp_tail_against_direct_sum():
    a = DoubleExp(2.0)
    direct = math.fsum(math.exp(-2.0 ** m) for m in range(3, 63))
    assert beta_tail(a, 3) == pytest.approx(direct, rel=1e-12)


def test_geometric_and_effective_dim_values():
    assert Geometric(0.5).values(3) == pytest.approx([0.5, 0.25, 0.125])
    e = EffectiveDim(d=2.0, N=3)
    assert e.value(2) == pytest.approx(3.0 ** (-2 * 2 / 2.0))
    assert beta_tail(Geometric(0.5), 2) == pytest.approx(0.5)
    assert Explicit((2.0, 1.0, 0.0)).support_end == 2
    assert Explicit((2.0, 1.0)).value(5) == 0.0


@pytest.mark.parametrize("spec", ["geometric:0.5", "double_exp:1.5", "effective_dim:4", "explicit:2,1,0.5"])
def test_json_roundtrip(spec):
    a = parse_alpha(spec, 2)
    b = alpha_from_json(a.to_json(), 2)
    assert b.values(6) == a.values(6)
    assert parse_alpha(a.dumps(), 2).values(6) == a.values(6)


@pytest.mark.parametrize("spec", ["geometric", "nope:1", "explicit:a,b", "geometric:-1"])
def test_parse_errors(spec):
    with pytest.raises(ValueError):
        parse_alpha(spec, 2)


def test_rate_model_validation():
    with pytest.raises(ValueError):
        RateModel(1, 1.0, Geometric(0.5))
    with pytest.raises(ValueError):
        RateModel(2, -1.0, Geometric(0.5))
    with pytest.raises(ValueError):
        RateModel(2, math.nan, Geometric(0.5))


def test_condition_diagnostics_regimes():
    assert condition_diagnostics(DoubleExp(3.0), 2)["verdict"] == "extinction-condition-indicated"
    assert condition_diagnostics(DoubleExp(1.5), 2)["verdict"] == "survival-condition-indicated"
    rep = condition_diagnostics(Geometric(0.5), 2)
    assert rep["heuristic"] is True
