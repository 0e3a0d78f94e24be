from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from padic_cris.cech_descent import (
    CechComplex,
    CechWindow,
    WindowTooSmall,
    build_level,
    check_cosimplicial,
    check_dd_zero,
    check_frobenius_naturality,
    check_multiplicative,
    coface,
    coface_index,
    de_rham_oracle,
    h_modp,
    total_differential,
)


@pytest.mark.parametrize("p", [2, 3])
def test_first_difference_is_minus_t_mod_p(p):
    w = CechWindow(p, p * p, N=1)
    R0, R1 = build_level(0, w), build_level(1, w)
    x = R0.monomial([1])
    diff = coface(0, 0, x) - coface(1, 0, x)
    assert diff == R1.monomial([0, 1], -1)
    assert diff.terms == {R1.key([0, 1]): p - 1}
    assert coface(0, 0, R0.one()) == R1.one()


def test_first_difference_witt_correction():
    # [x + t] differs from [x] + [t] by 2[x t]^{1/2} modulo 4
    w = CechWindow(2, 4, m_den=2, N=2)
    R0, R1 = build_level(0, w), build_level(1, w)
    x = R0.monomial([1])
    want = R1.monomial([0, 1], -1) + R1.monomial([F(1, 2), F(1, 2)], -2)
    assert coface(0, 0, x) - coface(1, 0, x) == want


def test_coface_of_root_by_hand():
    w = CechWindow(2, 4, m_den=2, N=2)
    R0, R1 = build_level(0, w), build_level(1, w)
    got = coface(1, 0, R0.monomial([F(1, 2)]), w)
    want = R1.monomial([F(1, 2), 0]) + R1.monomial([F(1, 4), F(1, 4)], 2) + R1.monomial([0, F(1, 2)])
    assert got == want


def test_coface_index_convention():
    assert [coface_index(0, 1)(k) for k in range(2)] == [0, 1]
    assert [coface_index(2, 1)(k) for k in range(2)] == [1, 2]
    with pytest.raises(ValueError):
        coface_index(3, 1)


@pytest.mark.parametrize("m", [0, 1])
def test_cosimplicial_identities_on_indices(m):
    # d^k d^j = d^j d^{k−1} for j < k, checked on the index maps
    for k in range(m + 3):
        for j in range(k):
            lhs = [coface_index(k, m + 1)(coface_index(j, m)(i)) for i in range(m + 1)]
            rhs = [coface_index(j, m + 1)(coface_index(k - 1, m)(i)) for i in range(m + 1)]
            assert lhs == rhs


def test_differential_kills_p_th_powers_and_constants():
    w = CechWindow(2, 4, N=1)
    R0 = build_level(0, w)
    d = total_differential(0, w)
    assert all(c == 0 for c in d.apply(R0.monomial([2])).terms.values())
    assert d.apply(R0.one()).terms == {}
    assert d.apply(R0.monomial([1])).terms != {}


def test_window_too_small():
    w = CechWindow(2, 4, N=1)
    R0 = build_level(0, w)
    with pytest.raises(WindowTooSmall):
        coface(0, 0, R0.monomial([3]), w)
    with pytest.raises(WindowTooSmall):
        coface(0, 0, R0.monomial([F(1, 4)]), w)
    with pytest.raises(ValueError):
        CechWindow(1, 4)


@pytest.mark.parametrize("p,D,m_den", [(2, 4, 1), (2, 4, 2), (3, 9, 1), (3, 9, 2), (2, 8, 1)])
def test_h0_matches_oracle(p, D, m_den):
    rep = h_modp(0, CechWindow(p, D, m_den=m_den))
    assert rep.matches
    h0, _ = de_rham_oracle(p, F(D, p))
    assert sorted(rep.per_weight) == h0


@pytest.mark.parametrize("p,D,m_den", [(2, 4, 1), (3, 9, 1), (2, 8, 1)])
def test_h1_matches_oracle(p, D, m_den):
    rep = h_modp(1, CechWindow(p, D, m_den=m_den))
    _, h1 = de_rham_oracle(p, F(D, p))
    assert rep.matches and sorted(rep.per_weight) == h1


def test_h0_explicit_small_cases():
    assert h_modp(0, CechWindow(2, 4, 2)).basis == ["1", "x^2"]
    assert h_modp(0, CechWindow(3, 9, 2)).basis == ["1", "x^3"]
    with pytest.raises(ValueError):
        h_modp(0, CechWindow(2, 4, N=2))


@pytest.mark.parametrize("p,N", [(2, 1), (2, 2), (3, 1), (3, 2), (2, 3)])
def test_structural_identities(p, N):
    w = CechWindow(p, p * p, m_den=1, N=N)
    assert check_dd_zero(w, 0, samples=8)
    assert check_cosimplicial(w, 0, samples=5)
    assert check_multiplicative(w, 0, samples=5)
    assert check_frobenius_naturality(w, 0, samples=5)


@settings(max_examples=15, deadline=None)
@given(st.sampled_from([2, 3]), st.integers(0, 8))
def test_dd_zero_on_weight_pieces(p, k):
    w = CechWindow(p, p * p, N=1)
    weight = F(k, p)
    if weight > w.interior_bound:
        weight = w.interior_bound
    cx = CechComplex(w, m_max=2)
    d0, d1 = cx.differential(0, weight), cx.differential(1, weight)
    R0 = build_level(0, w)
    for key in d0.domain:
        image = d0.apply(R0.basis_key(key))
        assert all(c == 0 for c in d1.apply(image).terms.values())
