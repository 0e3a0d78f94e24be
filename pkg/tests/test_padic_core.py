import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from padic_cris.padic_core import (
    CompositeModulus,
    GaloisRingElem,
    NoSolution,
    NotASubfield,
    Prec,
    embed_tower,
    get_ring,
    is_prime,
    make_field,
    residue_roots,
    semilinear_solve,
    teichmuller,
    vp,
)

SMALL = [(2, 1), (2, 2), (2, 3), (3, 1), (3, 2), (5, 1), (5, 2), (7, 1)]


def test_prime_and_valuation_helpers():
    assert [n for n in range(20) if is_prime(n)] == [2, 3, 5, 7, 11, 13, 17, 19]
    assert vp(48, 2) == 4 and vp(0, 3, cap=5) == 5
    with pytest.raises(CompositeModulus):
        Prec(4, 2)


def test_teichmuller_known_values():
    assert int(teichmuller(make_field(5, 1), 3, 2)) == 57
    assert int(teichmuller(make_field(3, 1), 2, 2)) == 8
    assert int(teichmuller(make_field(7, 1), 1, 3)) == 3


@pytest.mark.parametrize("p", [3, 5, 7])
def test_teichmuller_brute_force_oracle(p):
    # the unique lift of a that is a (p-1)-th root of unity, found by search
    N = 3
    q = p**N
    for a in range(1, p):
        roots = [x for x in range(a, q, p) if pow(x, p - 1, q) == 1]
        assert roots == [int(teichmuller(make_field(p, 1), N, a))]


def test_canonical_modulus_is_irreducible_and_lexicographic():
    fd = make_field(2, 4)
    assert fd.minpoly == (1, 0, 0, 1, 1)
    R1 = get_ring(3, 2, 1)
    # x^2 + 1 has no root in F_3, so it is the first irreducible with c0 = 1
    assert make_field(3, 2).minpoly == (1, 0, 1)
    assert residue_roots(get_ring(3, 1, 1), [1, 0, 1]) == []
    assert len(list(R1.elements())) == 9


@pytest.mark.parametrize("p,f", SMALL)
def test_ring_axioms_and_inverse(p, f):
    R = get_ring(p, f, 3)
    rng = random.Random(p * 10 + f)
    for _ in range(30):
        a, b, c = (R.random(rng) for _ in range(3))
        assert R.mul(a, R.add(b, c)) == R.add(R.mul(a, b), R.mul(a, c))
        assert R.mul(R.mul(a, b), c) == R.mul(a, R.mul(b, c))
        if R.is_unit(a):
            assert R.mul(a, R.inv(a)) == R.one


@pytest.mark.parametrize("p,f", SMALL)
def test_sigma_is_frobenius_lift(p, f):
    R, R1 = get_ring(p, f, 3), get_ring(p, f, 1)
    rng = random.Random(f)
    for _ in range(20):
        a, b = R.random(rng), R.random(rng)
        assert R.sigma(R.mul(a, b)) == R.mul(R.sigma(a), R.sigma(b))
        assert R.sigma(R.add(a, b)) == R.add(R.sigma(a), R.sigma(b))
        assert R.residue(R.sigma(a)) == R1.pow(R.residue(a), p)
        assert R.sigma_pow(a, f) == a
        assert R.sigma_inv(R.sigma(a)) == a


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([(2, 2), (3, 2), (5, 1), (2, 3)]), st.integers(0, 10**6))
def test_teichmuller_multiplicative(pf, seed):
    p, f = pf
    R, R1 = get_ring(p, f, 4), get_ring(p, f, 1)
    rng = random.Random(seed)
    a, b = R1.random(rng), R1.random(rng)
    assert R.mul(R.teich(a), R.teich(b)) == R.teich(R1.mul(a, b))
    assert R.pow(R.teich(a), p**f) == R.teich(a)
    assert R.sigma(R.teich(a)) == R.pow(R.teich(a), p)


def test_element_wrapper_arithmetic():
    x = GaloisRingElem.from_int(5, 1, 3, 7)
    assert int(x * 18 + 1) == (7 * 18 + 1) % 125
    assert (x - x) == 0 and x.valuation() == 0
    y = GaloisRingElem.from_coeffs(2, 2, 3, [2, 4])
    assert y.valuation() == 1
    assert int(y.residue().coeffs[0]) == 0
    assert (x.inverse() * x) == 1


@pytest.mark.parametrize("p,f,f2", [(2, 1, 2), (2, 2, 4), (3, 1, 2), (3, 2, 4), (2, 2, 6)])
def test_embed_tower_is_sigma_equivariant_ring_map(p, f, f2):
    R = get_ring(p, f, 3)
    target = make_field(p, f2)
    rng = random.Random(f2)
    for _ in range(10):
        a, b = (GaloisRingElem(R, R.random(rng)) for _ in range(2))
        ea, eb = embed_tower(a, target), embed_tower(b, target)
        assert embed_tower(a * b, target) == ea * eb
        assert embed_tower(a + b, target) == ea + eb
        assert embed_tower(a.sigma(), target) == ea.sigma()
    with pytest.raises(NotASubfield):
        embed_tower(GaloisRingElem(get_ring(p, 2, 2), get_ring(p, 2, 2).one), make_field(p, 3))


@pytest.mark.parametrize("p,f,a", [(2, 2, 1), (3, 1, 1), (5, 2, 2), (2, 1, 3)])
def test_semilinear_solve_contracting(p, f, a):
    R = get_ring(p, f, 4)
    rng = random.Random(a)
    for _ in range(10):
        rhs = GaloisRingElem(R, R.random(rng))
        _, lam = semilinear_solve(a, rhs)
        assert lam * 0 + (lam.sigma() * p**a - lam) == rhs


@pytest.mark.parametrize("p,f,N", [(2, 1, 3), (2, 2, 3), (3, 1, 2), (3, 2, 2)])
def test_semilinear_solve_artin_schreier(p, f, N):
    # an unsolvable trace forces an extension of degree p^k, k ≤ N
    R = get_ring(p, f, N)
    rng = random.Random(7)
    for _ in range(6):
        rhs = GaloisRingElem(R, R.random(rng))
        field, lam = semilinear_solve(0, rhs, allow_extension=True)
        assert field.f % f == 0 and (field.f // f) in [p**k for k in range(N + 1)]
        assert lam.sigma() - lam == embed_tower(rhs, field)


def test_semilinear_solve_without_extension_raises():
    R = get_ring(2, 1, 2)
    with pytest.raises(NoSolution):
        semilinear_solve(0, GaloisRingElem(R, 1))
