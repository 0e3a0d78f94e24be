"""One test per acceptance criterion; the summary section lists PASS/FAIL for each."""

import json
import math
import random
import subprocess
import sys
import time
from fractions import Fraction

import pytest

from padic_cris.acris_ring import PDSeries, frobenius_intersection, get_pd_ring, nygaard_criteria, window_keys
from padic_cris.cech_descent import CechWindow, check_dd_zero, de_rham_oracle, h_modp
from padic_cris.fcrystal import (
    CokerWitness,
    coker_F_minus_p_witness,
    fppf_groups,
    isogeny_action_check,
    newton_polygon,
    ordinary_av,
    standard_slope_module,
    supersingular_curve,
    supersingular_exe,
    tower_cokernel,
    unit_crystal,
)
from padic_cris.padic_core import get_ring, make_field, teichmuller
from padic_cris.syntomic_check import etale_sequence_check, verify_syntomic_exactness

SLOPE_PAIRS = [(1, 0), (1, 1), (1, 2), (2, 1), (3, 1), (3, 2)]


class _Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.t = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.1f}s, budget {self.seconds}s"


def _slopes(X):
    return [s for s, m in newton_polygon(X).slopes for _ in range(m)]


@pytest.mark.criterion(1, "Teichmuller lifts")
def test_criterion_01_teichmuller():
    with _Budget(1):
        assert int(teichmuller(make_field(5, 1), 3, 2)) == 57
        assert int(teichmuller(make_field(3, 1), 2, 2)) == 8
        rng = random.Random(1)
        for p, f in [(2, 2), (3, 2), (5, 1)]:
            R, R1 = get_ring(p, f, 4), get_ring(p, f, 1)
            for _ in range(100):
                a, b = R1.random(rng), R1.random(rng)
                ta, tb = R.teich(a), R.teich(b)
                assert R.mul(ta, tb) == R.teich(R1.mul(a, b))
                assert R.pow(ta, p**f) == ta
                if not R1.is_zero(a):
                    assert R.pow(ta, p**f - 1) == R.one


@pytest.mark.criterion(2, "syntomic exactness")
def test_criterion_02_syntomic_exactness():
    with _Budget(60):
        for args in [(2, 1, 1, 3), (3, 1, 1, 3), (2, 2, 1, 2), (5, 1, 1, 2), (2, 1, 2, 2)]:
            rep = verify_syntomic_exactness(*args, samples=100, seed=0)
            assert rep.left_injective and rep.middle_exact and rep.right_surjective, (args, rep.counterexample)
            assert rep.witnesses["kernel_witnesses"] > 0 and rep.witnesses["right_witnesses"] > 0


@pytest.mark.criterion(3, "Nygaard criterion equivalence")
def test_criterion_03_nygaard_equivalence():
    with _Budget(10):
        rng = random.Random(3)
        for p in (2, 3):
            ring = get_pd_ring(p, 1, 2, 1, 0, 6)
            keys = window_keys(ring, 3, p * p)
            assert keys
            for k in keys:
                for coeff in (1, p):
                    coef_ok, frob_ok = nygaard_criteria(PDSeries(ring, {k: coeff}))
                    assert coef_ok == frob_ok, (p, k, coeff)
            q = ring.R.q
            for _ in range(500):
                terms = {rng.choice(keys): rng.randrange(1, q) for _ in range(rng.randint(1, 6))}
                coef_ok, frob_ok = nygaard_criteria(PDSeries(ring, terms))
                assert coef_ok == frob_ok, (p, terms)


@pytest.mark.criterion(4, "ordinary abelian varieties")
def test_criterion_04_ordinary():
    with _Budget(120):
        for p in (2, 5):
            for g in (1, 2, 3):
                for i in range(2 * g + 1):
                    grp = fppf_groups(ordinary_av(g, i, p, 3), tower_levels=3, degree=i)
                    want = g * math.comb(g, i - 1) if i else 0
                    assert grp.free_rank == want, (p, g, i)
                    assert grp.finite_torsion == () and grp.unipotent_a == 0


@pytest.mark.criterion(5, "supersingular ExE")
def test_criterion_05_supersingular():
    with _Budget(120):
        h2 = fppf_groups(supersingular_exe(2, 2, 3), tower_levels=3, degree=2)
        assert h2.unipotent_a == 1 and h2.law_exact and h2.stable
        for lv in h2.levels:
            # one copy of F_{p^f'}: dimension f' over F_p, every divisor equal to p
            assert lv.torsion_dim == lv.fprime
            assert set(lv.stable_torsion) == {1}
        assert h2.free_rank == 6
        assert fppf_groups(supersingular_exe(1, 2, 3), tower_levels=3, degree=1).free_rank == 0
        assert all(lv.torsion_dim == 0 for lv in fppf_groups(unit_crystal(2, 1, 3), tower_levels=3, degree=0).levels)


@pytest.mark.criterion(6, "slope-module cokernels")
def test_criterion_06_slope_cokernels():
    with _Budget(30):
        p, N = 2, 4
        for (r, s), case, need in [((1, 2), 2, 1), ((1, 0), 3, 0)]:
            X = standard_slope_module(r, s, (p, 1, N))
            R = X.ring
            rng = random.Random(6)
            for _ in range(20):
                tgt = [R.smul(R.random(rng), p**need) for _ in range(r)]
                w = coker_F_minus_p_witness(X, tgt)
                assert isinstance(w, CokerWitness) and w.case == case
                Fx = X.apply(w.certificate)
                assert [R.sub(a, R.smul(b, p)) for a, b in zip(Fx, w.certificate)] == tgt
        for r, s in SLOPE_PAIRS:
            tops = [max(cd.exponents, default=0) for cd in tower_cokernel(standard_slope_module(r, s, (p, 1, N)), "F-p", 3)]
            assert max(tops) < N and len(set(tops[1:])) <= 1, (r, s, tops)


@pytest.mark.criterion(7, "Newton polygons")
def test_criterion_07_newton():
    with _Budget(5):
        for r, s in SLOPE_PAIRS:
            assert _slopes(standard_slope_module(r, s, (2, 1, 6))) == [Fraction(s, r)] * r
        assert _slopes(ordinary_av(1, 1, 5, 3)) == [0, 1]
        assert _slopes(supersingular_curve(3, 3)) == [Fraction(1, 2)] * 2


@pytest.mark.criterion(8, "infinitesimal comparison")
def test_criterion_08_infinitesimal():
    with _Budget(30):
        for p in (2, 3):
            rep = frobenius_intersection(p, 2, 3, 3)
            assert rep.equal
            assert rep.intersection == rep.ainf and rep.ainf.log_order() > 0


@pytest.mark.criterion(9, "etale sequence")
def test_criterion_09_etale():
    with _Budget(10):
        for p in (2, 3):
            rep = etale_sequence_check(p, 1, depth=3, samples=20, seed=0)
            assert rep.kernel_dim == 1 and rep.kernel_is_constants
            # the fixed target x plus 20 sampled ones
            assert rep.preimages_checked == 1 + 20 and rep.preimages_ok


@pytest.mark.criterion(10, "Cech descent for the affine line")
def test_criterion_10_cech():
    with _Budget(120):
        for p in (2, 3):
            for m_den in (1, 2):
                w = CechWindow(p, p * p, m_den)
                h0_oracle, h1_oracle = de_rham_oracle(p, Fraction(p))
                h0 = h_modp(0, w)
                assert h0.basis == ["1", f"x^{p}"] and sorted(h0.per_weight) == h0_oracle
                h1 = h_modp(1, w)
                assert h1.dimension == len(h1_oracle) == 1
                assert check_dd_zero(w, 0, samples=5)


@pytest.mark.criterion(11, "isogeny action")
def test_criterion_11_isogeny():
    with _Budget(30):
        cases = [(ordinary_av(1, 1, 5, 3), 1), (ordinary_av(1, 1, 2, 3), 1)]
        cases += [(supersingular_exe(2, p, 3), 2) for p in (2, 3)]
        for X, i in cases:
            for n in sorted({2, 3, X.p}):
                for fp in (1, 2, 4):
                    assert isogeny_action_check(X, n, i, fprime=fp).ok, (X.label, X.p, n, fp)


def _cli(*argv):
    return subprocess.run(
        [sys.executable, "-m", "padic_cris", "--no-timings", *argv], capture_output=True, check=False
    )


@pytest.mark.criterion(12, "determinism and fault detection")
def test_criterion_12_determinism_and_fault():
    with _Budget(180):
        a = _cli("selftest", "--level", "quick")
        b = _cli("selftest", "--level", "quick")
        assert a.returncode == 0, a.stdout[-2000:]
        assert a.stdout == b.stdout
        report = json.loads(a.stdout)
        assert report["status"] == "ok"
        bad = _cli("selftest", "--criteria", "3", "--inject-fault", "gamma_val")
        assert bad.returncode == 1
        assert json.loads(bad.stdout)["results"]["failed"] == [3]
        assert len(report["checks"]) == 11 and report["results"]["failed"] == []
