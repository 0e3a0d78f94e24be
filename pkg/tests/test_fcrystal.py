import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from padic_cris.fcrystal import (
    BadParameters,
    BaseMismatch,
    CaseInapplicable,
    CokerWitness,
    DivisorReport,
    FCrystal,
    NegativeDivisibleRank,
    PrecisionInsufficient,
    brauer_profile,
    charpoly,
    coker_F_minus_p_witness,
    fppf_groups,
    isogeny_action_check,
    newton_polygon,
    nygaard_lattice,
    ordinary_av,
    restrict_scalars,
    standard_slope_module,
    supersingular_curve,
    supersingular_exe,
    syntomic_level,
    tower_cokernel,
    unit_crystal,
    wedge_and_kunneth,
)
from padic_cris.padic_core import get_ring
from padic_cris.zpn_linalg import cokernel_divisors, kernel, smith_form

SLOPES = [(1, 0), (1, 1), (1, 2), (2, 1), (3, 1), (3, 2), (2, 3), (4, 1)]


def _faddeev_leverrier(A):
    """Characteristic polynomial over Q, an independent route."""
    n = len(A)
    M = [[Fraction(0)] * n for _ in range(n)]
    coeffs = [Fraction(1)]
    I = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    for k in range(1, n + 1):
        M = [[sum(Fraction(A[i][l]) * M[l][j] for l in range(n)) + coeffs[-1] * I[i][j] for j in range(n)] for i in range(n)]
        AM = [[sum(Fraction(A[i][l]) * M[l][j] for l in range(n)) for j in range(n)] for i in range(n)]
        coeffs.append(-sum(AM[i][i] for i in range(n)) / k)
    return coeffs


def _expand(nw):
    return [s for s, m in nw.slopes for _ in range(m)]


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4).flatmap(lambda n: st.lists(st.lists(st.integers(-20, 20), min_size=n, max_size=n), min_size=n, max_size=n)))
def test_charpoly_matches_faddeev_leverrier(A):
    R = get_ring(3, 1, 4)
    got = charpoly(R, [[R.from_int(x) for x in row] for row in A])
    want = [int(c) % R.q for c in _faddeev_leverrier(A)]
    assert got == want


@pytest.mark.parametrize("r,s", SLOPES)
def test_newton_polygon_slope_modules(r, s):
    for base in [(2, 1, 6), (3, 1, 5), (2, 2, 6)]:
        X = standard_slope_module(r, s, base)
        assert _expand(newton_polygon(X)) == [Fraction(s, r)] * r


def test_newton_polygons_of_presets():
    assert _expand(newton_polygon(ordinary_av(2, 1, 5, 3))) == [0, 0, 1, 1]
    assert _expand(newton_polygon(supersingular_curve(2, 3))) == [Fraction(1, 2)] * 2
    assert _expand(newton_polygon(supersingular_exe(2, 3, 7))) == [1] * 6
    M = wedge_and_kunneth([standard_slope_module(1, 0, (2, 1, 5)), standard_slope_module(2, 1, (2, 1, 5))], "sum")
    assert _expand(newton_polygon(M)) == [0, Fraction(1, 2), Fraction(1, 2)]


def test_wedge_and_kunneth_ranks_and_slopes():
    h1 = supersingular_curve(3, 5)
    s = wedge_and_kunneth([h1, h1], "sum")
    t = wedge_and_kunneth([h1, h1], "tensor")
    assert s.rank == 4 and t.rank == 4
    for i in range(5):
        assert wedge_and_kunneth(s, ("wedge", i)).rank == math.comb(4, i)
    assert _expand(newton_polygon(t)) == [1] * 4
    with pytest.raises(BaseMismatch):
        wedge_and_kunneth([h1, supersingular_curve(2, 5)], "sum")
    with pytest.raises(BadParameters):
        wedge_and_kunneth(s, ("wedge", 5))


def test_newton_polygon_needs_precision():
    with pytest.raises(PrecisionInsufficient):
        newton_polygon(supersingular_exe(2, 3, 3))


def test_bad_parameters():
    with pytest.raises(BadParameters):
        standard_slope_module(2, 2, (2, 1, 3))
    with pytest.raises(BadParameters):
        FCrystal.from_matrix(4, 1, 2, [[1]])


def test_guard_digit_keeps_F_over_p_exact():
    X = supersingular_curve(3, 2)
    assert X.matrix(3)[0][1] == 3
    assert X.at_prec(2) == X


def test_base_change_keeps_slopes():
    X = standard_slope_module(2, 1, (2, 1, 4))
    Y = X.base_change(2)
    assert Y.f == 2 and _expand(newton_polygon(Y)) == [Fraction(1, 2)] * 2


def test_nygaard_lattice_ordinary():
    L = nygaard_lattice(ordinary_av(1, 1, 5, 3))
    assert L.module.generators() == [(5, 0), (0, 1)]


def test_restrict_scalars_F_minus_1_unit_root():
    M = restrict_scalars(standard_slope_module(1, 0, (2, 2, 3)), "F-1")
    # F − 1 = σ − 1 on W(F_4)/8 has kernel Z/8
    assert kernel(M).log_order() == 3


@pytest.mark.parametrize("X", [ordinary_av(1, 1, 2, 3), supersingular_exe(2, 2, 3), standard_slope_module(1, 1, (2, 1, 3))])
def test_normal_and_galois_models_agree(X):
    for fp in (2, 4):
        a = syntomic_level(X, fp, "normal")
        b = syntomic_level(X, fp, "galois")
        assert sorted(a.exponents) == sorted(b.exponents)


@pytest.mark.parametrize("p", [2, 5])
@pytest.mark.parametrize("g", [1, 2])
def test_ordinary_fppf_ranks(p, g):
    for i in range(2 * g + 1):
        grp = fppf_groups(ordinary_av(g, i, p, 3), tower_levels=2, degree=i)
        assert grp.free_rank == (g * math.comb(g, i - 1) if i else 0)
        assert grp.finite_torsion == () and grp.unipotent_a == 0


def test_supersingular_h2_tower():
    grp = fppf_groups(supersingular_exe(2, 2, 3), tower_levels=3, degree=2)
    assert grp.free_rank == 6
    assert [lv.torsion_dim for lv in grp.levels] == [1, 2, 4, 8]
    assert grp.unipotent_a == 1 and grp.unipotent_b == 0 and grp.law_exact
    assert fppf_groups(supersingular_exe(1, 2, 3), degree=1).free_rank == 0


def test_supersingular_h2_tower_p3():
    grp = fppf_groups(supersingular_exe(2, 3, 3), tower_levels=3, degree=2)
    assert grp.free_rank == 6
    assert grp.unipotent_a == 1


def test_unit_and_tate_crystals():
    # F/p − 1 is invertible on slope 0 and vanishes identically on slope 1
    grp = fppf_groups(unit_crystal(3, 1, 3), degree=0)
    assert grp.free_rank == 0 and all(lv.torsion_dim == 0 for lv in grp.levels)
    grp = fppf_groups(standard_slope_module(1, 1, (3, 1, 3)))
    assert grp.free_rank == 1 and all(lv.torsion_dim == 0 for lv in grp.levels)


def _check_witness(X, w, target):
    # independent substitution: (F − p)(x) computed from X.apply
    R = X.ring
    Fx = X.apply(w.certificate)
    back = tuple(R.sub(a, R.smul(b, X.p)) for a, b in zip(Fx, w.certificate))
    assert back == tuple(R.from_int(t) if isinstance(t, int) else t for t in target)


@pytest.mark.parametrize("r,s,p", [(1, 2, 2), (1, 0, 2), (2, 1, 2), (1, 3, 3), (2, 3, 2), (3, 1, 3)])
def test_coker_witnesses(r, s, p):
    X = standard_slope_module(r, s, (p, 1, 4))
    R = X.ring
    lam = Fraction(s, r)
    need = r if lam > 1 else s
    rng = random.Random(r * 7 + s)
    for _ in range(10):
        tgt = tuple(R.smul(R.random(rng), p**need) for _ in range(r))
        w = coker_F_minus_p_witness(X, tgt)
        assert isinstance(w, CokerWitness) and w.verified
        assert w.case == (2 if lam > 1 else 3)
        _check_witness(X, w, tgt)


def test_coker_witness_guards():
    X = standard_slope_module(1, 2, (2, 1, 4))
    with pytest.raises(CaseInapplicable):
        coker_F_minus_p_witness(X, [1])
    rep = coker_F_minus_p_witness(standard_slope_module(1, 1, (2, 1, 4)), [1])
    assert isinstance(rep, DivisorReport) and rep.reason == "slope 1"


@pytest.mark.parametrize("r,s", [(1, 0), (1, 1), (1, 2), (2, 1), (3, 1), (3, 2)])
def test_tower_cokernel_exponent_bounded(r, s):
    X = standard_slope_module(r, s, (2, 1, 4))
    tops = [max(cd.exponents, default=0) for cd in tower_cokernel(X, "F-p", 3)]
    assert max(tops) < 4 and len(set(tops[1:])) <= 1


@pytest.mark.parametrize(
    "X,i", [(ordinary_av(1, 1, 5, 3), 1), (supersingular_exe(2, 2, 3), 2), (supersingular_exe(2, 3, 3), 2)]
)
def test_isogeny_acts_by_power(X, i):
    for n in sorted({2, 3, X.p}):
        for fp in (1, 2, 4):
            rep = isogeny_action_check(X, n, i, fprime=fp)
            assert rep.ok, rep.to_dict()


def test_isogeny_detects_wrong_weight():
    # [2] on H² acting by 2^1 instead of 2^2 does not commute with the torsion structure
    X = supersingular_exe(2, 3, 3)
    rep = isogeny_action_check(X, 2, 2, fprime=4, endo=[[2 if a == b else 0 for b in range(6)] for a in range(6)])
    assert not rep.ok


def test_brauer_profile():
    h2 = fppf_groups(supersingular_exe(2, 2, 3), degree=2)
    prof = brauer_profile(h2, h2, 6)
    assert prof.a == 0 and prof.h2_free_rank == 6
    with pytest.raises(NegativeDivisibleRank):
        brauer_profile(h2, h2, 7)


def test_smith_of_F_minus_p_on_slope_one():
    cd = cokernel_divisors(restrict_scalars(standard_slope_module(1, 1, (2, 1, 3)), "F-p"))
    assert cd.free == 1
    assert smith_form(restrict_scalars(standard_slope_module(1, 0, (2, 1, 3)), "F")).exponents == (0,)
