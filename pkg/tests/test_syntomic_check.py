import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from padic_cris.acris_ring import TateUnit, get_pd_ring
from padic_cris.padic_core import get_ring
from padic_cris.syntomic_check import (
    ModpBasisForm,
    acris_modp_form,
    etale_frobenius_minus_one,
    etale_preimage,
    etale_sequence_check,
    logbar,
    map_M,
    map_M_via_series,
    modp_normal_form,
    solve_log_preimage,
    solve_M_preimage,
    verify_syntomic_exactness,
)


def _ring(p, f=1, n=1):
    return get_pd_ring(p, f, 1, n, 0, 10)


def test_logbar_of_one_plus_x():
    ring = _ring(2)
    lb = logbar(TateUnit.of(ring, [(1, [1], 1)]))
    k = ring.key
    assert lb.coeffs == {k([Fraction(1, 2)]): 1, k([1]): 1, k([2]): 1}
    assert map_M(lb).is_zero()


def _random_nyg(ring, rng, terms=4):
    keys = [ring.key([Fraction(rng.randrange(0, 4 * ring.p**2), ring.p**2) for _ in range(ring.n_pd)]) for _ in range(terms)]
    F = get_ring(ring.p, ring.f, 1)
    return ModpBasisForm(ring, "nyg", {k: F.random(rng) for k in keys})


@settings(max_examples=80, deadline=None)
@given(st.sampled_from([(2, 1, 1), (3, 1, 1), (2, 2, 1), (2, 1, 2), (5, 1, 1)]), st.integers(0, 10**6))
def test_map_M_formulas_match_series_route(pfn, seed):
    ring = _ring(*pfn)
    a = _random_nyg(ring, random.Random(seed))
    assert map_M(a) == map_M_via_series(a)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from([(2, 1, 1), (3, 1, 1), (2, 2, 1)]), st.integers(0, 10**6))
def test_modp_normal_form_round_trip(pfn, seed):
    ring = _ring(*pfn)
    a = _random_nyg(ring, random.Random(seed))
    assert modp_normal_form(a.to_pdseries()) == a


@pytest.mark.parametrize("p,f", [(2, 1), (3, 1), (2, 2)])
def test_M_preimage_by_substitution(p, f):
    ring = _ring(p, f)
    rng = random.Random(p)
    for _ in range(15):
        a = _random_nyg(ring, rng, 3)
        t = map_M(a)
        sol = solve_M_preimage(t)
        assert map_M(sol) == t


@pytest.mark.parametrize("p", [2, 3])
def test_log_preimage_recovers_kernel_elements(p):
    ring = _ring(p)
    rng = random.Random(0)
    for _ in range(10):
        exps = [Fraction(rng.randint(p, p * p), p)]
        u = TateUnit.of(ring, [(1, exps, rng.randrange(1, p))])
        lb = logbar(u)
        v = solve_log_preimage(lb)
        assert logbar(v) == lb


@pytest.mark.parametrize("args", [(2, 1, 1, 3), (3, 1, 1, 2), (2, 2, 1, 2), (2, 1, 2, 2), (5, 1, 1, 1)])
def test_exactness_small(args):
    rep = verify_syntomic_exactness(*args, samples=20, seed=1)
    assert rep.all_pass, rep.counterexample
    assert rep.witnesses["kernel_dim"] == rep.witnesses["unit_generators"]


def test_etale_preimage_of_x():
    ring = _ring(2)
    x = ModpBasisForm(ring, "acris", {ring.key([1]): 1})
    y = etale_preimage(x)
    assert etale_frobenius_minus_one(y) == x
    # x^2 = 2·e_2 dies mod 2, so the geometric series stops after one step
    assert y == -x


@pytest.mark.parametrize("p,f", [(2, 1), (3, 2), (5, 1)])
def test_etale_sequence(p, f):
    rep = etale_sequence_check(p, f, depth=2, samples=10)
    assert rep.all_pass and rep.kernel_dim == 1


def test_space_errors():
    ring = _ring(2)
    with pytest.raises(ValueError):
        map_M(ModpBasisForm(ring, "acris", {}))
    with pytest.raises(ValueError):
        ModpBasisForm(ring, "other", {})
    assert acris_modp_form(ring.one()).coeffs == {ring.key([0]): 1}
