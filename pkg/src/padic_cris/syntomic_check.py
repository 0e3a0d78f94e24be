"""Exactness of 0 → (1+J)^× → Nyg Acris --F/p−1--> Acris → 0 modulo p.

Two mod-p spaces appear:

* ``"nyg"``: Nyg/p·Nyg with basis {p·x^α : Σ⌊α_i⌋ = 0} ∪ {x^α/(α!)_p : Σ⌊α_i⌋ ≥ 1},
* ``"acris"``: Acris/p with basis {x^α/(α!)_p}.

Both are stored as maps from monomial keys to residues in F_{p^f}.
"""

from __future__ import annotations

import functools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from .acris_ring import (
    PDRing,
    PDSeries,
    TateUnit,
    WindowTooSmall,
    f_over_p_minus_1,
    get_pd_ring,
    nygaard_test,
    pd_frobenius,
    pd_log_unit,
    window_keys,
)
from .padic_core import PadicError, get_ring, semilinear_solve, GaloisRingElem
from .zpn_linalg import ZpnMatrix, kernel

__all__ = [
    "PrecisionMismatch",
    "NotInKernel",
    "ModpBasisForm",
    "ExactnessReport",
    "EtaleReport",
    "modp_normal_form",
    "acris_modp_form",
    "map_M",
    "map_M_via_series",
    "logbar",
    "solve_M_preimage",
    "solve_log_preimage",
    "verify_syntomic_exactness",
    "etale_frobenius_minus_one",
    "etale_preimage",
    "etale_sequence_check",
]


class PrecisionMismatch(PadicError, ValueError):
    pass


class NotInKernel(PadicError, ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ModpBasisForm:
    ring: PDRing = field(repr=False)
    space: str
    coeffs: Mapping

    def __post_init__(self) -> None:
        if self.space not in ("nyg", "acris"):
            raise ValueError("space must be 'nyg' or 'acris'")
        R1 = self.R1
        clean = {k: R1.lift(v) for k, v in self.coeffs.items()}
        object.__setattr__(self, "coeffs", {k: v for k, v in clean.items() if not R1.is_zero(v)})

    @property
    def R1(self):
        return get_ring(self.ring.p, self.ring.f, 1)

    def _check(self, other: "ModpBasisForm") -> None:
        if self.space != other.space or self.ring.signature != other.ring.signature:
            raise ValueError("forms live in different spaces")

    def __add__(self, other: "ModpBasisForm") -> "ModpBasisForm":
        self._check(other)
        R1 = self.R1
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = R1.add(out[k], v) if k in out else v
        return ModpBasisForm(self.ring, self.space, out)

    def __neg__(self) -> "ModpBasisForm":
        R1 = self.R1
        return ModpBasisForm(self.ring, self.space, {k: R1.neg(v) for k, v in self.coeffs.items()})

    def __sub__(self, other: "ModpBasisForm") -> "ModpBasisForm":
        return self + (-other)

    def scale(self, c) -> "ModpBasisForm":
        R1 = self.R1
        c = R1.lift(c)
        return ModpBasisForm(self.ring, self.space, {k: R1.mul(v, c) for k, v in self.coeffs.items()})

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ModpBasisForm)
            and self.space == other.space
            and self.ring.signature == other.ring.signature
            and self.coeffs == other.coeffs
        )

    def __hash__(self):
        return hash((self.space, self.ring.signature, frozenset(self.coeffs.items())))

    def is_zero(self) -> bool:
        return not self.coeffs

    def to_pdseries(self) -> PDSeries:
        """Nyg forms land at precision 2, Acris/p forms at precision 1."""
        if self.space == "acris":
            ring = self.ring.at_prec(1)
            return PDSeries(ring, {k: ring.R.lift(v) for k, v in self.coeffs.items()})
        ring = self.ring.at_prec(2)
        R = ring.R
        out = {}
        for k, v in self.coeffs.items():
            c = R.lift(v)
            out[k] = R.smul(c, ring.p) if ring.floor_sum(k) == 0 else c
        return PDSeries(ring, out)

    def leading_key(self):
        """Key of minimal total degree (ties broken lexicographically)."""
        if not self.coeffs:
            return None
        return min(self.coeffs, key=lambda k: (sum(k), k))

    def __repr__(self) -> str:
        ring = self.ring
        parts = []
        for k, v in sorted(self.coeffs.items(), key=lambda kv: (sum(kv[0]), kv[0])):
            exps = ",".join(str(e) for e in ring.exps(k))
            if self.space == "nyg" and ring.floor_sum(k) == 0:
                parts.append(f"{v}*p*x^({exps})")
            else:
                parts.append(f"{v}*x^({exps})/p^{ring.gamma(k)}")
        return f"{self.space}[" + " + ".join(parts) + "]"


def modp_normal_form(a: PDSeries) -> ModpBasisForm:
    """Coordinates of a Nygaard element in Nyg/p·Nyg.

    The p·x^α coordinates are only visible modulo p², so the input must carry
    precision at least 2.
    """
    ring = a.ring
    if ring.N < 2:
        raise PrecisionMismatch("Nyg/pNyg coordinates need precision at least 2")
    R, R1 = ring.R, get_ring(ring.p, ring.f, 1)
    out = {}
    for k, v in a.terms.items():
        if ring.floor_sum(k) == 0:
            if R.val(v) < 1:
                raise PrecisionMismatch("element is not in the Nygaard ideal")
            out[k] = R.reduce(R.divp(v, 1), R1)
        else:
            out[k] = R.reduce(v, R1)
    return ModpBasisForm(ring.at_prec(1), "nyg", out)


def acris_modp_form(a: PDSeries) -> ModpBasisForm:
    ring = a.ring
    R, R1 = ring.R, get_ring(ring.p, ring.f, 1)
    return ModpBasisForm(ring.at_prec(1), "acris", {k: R.reduce(v, R1) for k, v in a.terms.items()})


def _add(out: dict, R1, k, v) -> None:
    out[k] = R1.add(out[k], v) if k in out else v


def map_M(a: ModpBasisForm) -> ModpBasisForm:
    """F/p − 1 from Nyg/p·Nyg to Acris/p by the three monomial formulas."""
    if a.space != "nyg":
        raise ValueError("map_M acts on Nyg/pNyg")
    ring, R1, p = a.ring, a.R1, a.ring.p
    out: dict = {}
    for k, b in a.coeffs.items():
        fl = ring.floor_sum(k)
        pk = tuple(p * x for x in k)
        if fl == 0:
            _add(out, R1, pk, R1.sigma(b))
        elif fl == 1:
            _add(out, R1, pk, R1.sigma(b))
            _add(out, R1, k, R1.neg(b))
        else:
            _add(out, R1, k, R1.neg(b))
    return ModpBasisForm(ring, "acris", out)


def map_M_via_series(a: ModpBasisForm) -> ModpBasisForm:
    """The same map computed as F(a)/p − a on a precision-2 lift."""
    return acris_modp_form(f_over_p_minus_1(a.to_pdseries()))


@functools.lru_cache(maxsize=200_000)
def _logbar_factor(ring: PDRing, c, key: tuple, e: int) -> ModpBasisForm:
    u = TateUnit(ring.at_prec(2), ((c, key, e),))
    return modp_normal_form(pd_log_unit(u, 2))


def logbar(u: TateUnit) -> ModpBasisForm:
    """The logarithm read in Nyg/p·Nyg (computed at precision 2)."""
    ring = u.ring.at_prec(1)
    acc = ModpBasisForm(ring, "nyg", {})
    for c, key, e in u.factors:
        e %= ring.p
        if e:
            acc = acc + _logbar_factor(ring, c, key, e)
    return acc


def solve_M_preimage(target: ModpBasisForm) -> ModpBasisForm:
    """Some a in Nyg/p·Nyg with map_M(a) = target."""
    if target.space != "acris":
        raise ValueError("targets live in Acris/p")
    ring, R1, p = target.ring, target.R1, target.ring.p
    out: dict = {}
    for k, b in target.coeffs.items():
        fl = ring.floor_sum(k)
        if fl >= 2:
            _add(out, R1, k, R1.neg(b))
        elif fl == 0:
            _add(out, R1, ring.root_key(k), R1.sigma_inv(b))
        else:
            # M(−b e_α) + σ(b) e_{pα} = b e_α, and e_{pα} has floor sum ≥ p ≥ 2
            _add(out, R1, k, R1.neg(b))
            _add(out, R1, tuple(p * x for x in k), R1.neg(R1.sigma(b)))
    return ModpBasisForm(ring, "nyg", out)


def solve_log_preimage(a: ModpBasisForm, max_steps: int = 10_000) -> TateUnit:
    """A unit u with logbar(u) = a, for a in the kernel of map_M.

    The lowest-degree term of logbar(1 + b·x^α) is b^{1/p}·p·x^{α/p}, so the
    kernel element is peeled one total degree at a time.
    """
    if a.space != "nyg":
        raise ValueError("expected an element of Nyg/pNyg")
    if not map_M(a).is_zero():
        raise NotInKernel("element is not in the kernel of F/p − 1")
    ring, R1, p = a.ring, a.R1, a.ring.p
    factors: list = []
    rem = a
    for _ in range(max_steps):
        if rem.is_zero():
            return TateUnit(ring, tuple(factors))
        low = [k for k in rem.coeffs if ring.floor_sum(k) == 0]
        if not low:
            raise NotInKernel("kernel element without p·x^α part")
        deg = min(sum(k) for k in low)
        step = []
        for k in low:
            if sum(k) == deg:
                step.append((R1.sigma(rem.coeffs[k]), tuple(p * x for x in k), 1))
        u = TateUnit(ring, tuple(step))
        new = rem - logbar(u)
        if any(ring.floor_sum(k) == 0 and sum(k) <= deg for k in new.coeffs):
            raise NotInKernel("leading term did not cancel")
        factors.extend(step)
        rem = new
    raise NotInKernel("peeling did not terminate")


# ---------------------------------------------------------------------------
# windows and linear algebra over F_p


def _unit_keys(ring: PDRing, depth: int) -> list[tuple]:
    """Exponents with every coordinate in [0, p) at the given depth and some ≥ 1."""
    s, p = ring.scale, ring.p
    keys = window_keys(ring, depth, Fraction(p))
    return [k for k in keys if all(a < p * s for a in k) and any(a >= s for a in k)]


def _residue_basis(R1) -> list:
    return [R1.from_coords([1 if j == i else 0 for j in range(R1.f)]) for i in range(R1.f)]


def _components(keys: list[tuple], p: int) -> list[list[tuple]]:
    """Classes of the relation α ~ pα restricted to ``keys``."""
    present = set(keys)
    parent = {k: k for k in keys}

    def find(k):
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    for k in keys:
        pk = tuple(p * x for x in k)
        if pk in present:
            ra, rb = find(k), find(pk)
            if ra != rb:
                parent[ra] = rb
    groups: dict = {}
    for k in keys:
        groups.setdefault(find(k), []).append(k)
    return [sorted(g) for g in groups.values()]


def _linear_kernel(
    ring: PDRing, keys: list[tuple], apply, space_in: str, space_out: str
) -> list[ModpBasisForm]:
    """F_p-basis of the kernel of an F_p-linear map on span(keys)·F_{p^f}."""
    R1 = get_ring(ring.p, ring.f, 1)
    basis = _residue_basis(R1)
    f = ring.f
    out_forms = []
    for comp in _components(keys, ring.p):
        cols = []
        targets: dict = {}
        images = []
        for k in comp:
            for b in basis:
                img = apply(ModpBasisForm(ring, space_in, {k: b}))
                images.append(img)
                for tk in img.coeffs:
                    if tk not in targets:
                        targets[tk] = len(targets)
        if not targets:
            mat = np.zeros((1, len(comp) * f), dtype=np.int64)
        else:
            mat = np.zeros((len(targets) * f, len(comp) * f), dtype=np.int64)
            for j, img in enumerate(images):
                for tk, v in img.coeffs.items():
                    for i, x in enumerate(R1.coords(v)):
                        mat[targets[tk] * f + i, j] = x
        ker = kernel(ZpnMatrix.from_rows(ring.p, 1, mat.tolist()))
        for g in ker.generators():
            coeffs: dict = {}
            for idx, k in enumerate(comp):
                cs = g[idx * f : (idx + 1) * f]
                if any(cs):
                    coeffs[k] = R1.from_coords(cs)
            out_forms.append(ModpBasisForm(ring, space_in, coeffs))
    return out_forms


def _fp_rank(ring: PDRing, forms: list[ModpBasisForm]) -> int:
    R1 = get_ring(ring.p, ring.f, 1)
    index: dict = {}
    for fm in forms:
        for k in fm.coeffs:
            index.setdefault(k, len(index))
    f = ring.f
    rows = []
    for fm in forms:
        row = [0] * (len(index) * f)
        for k, v in fm.coeffs.items():
            for i, x in enumerate(R1.coords(v)):
                row[index[k] * f + i] = x
        rows.append(row)
    if not rows or not index:
        return 0
    from .zpn_linalg import howell_form

    return howell_form(ZpnMatrix.from_rows(ring.p, 1, rows)).rows


@dataclass
class ExactnessReport:
    p: int
    f: int
    n: int
    depth: int
    left_injective: bool
    middle_exact: bool
    right_surjective: bool
    counterexample: str | None = None
    witnesses: dict = field(default_factory=dict)

    @property
    def all_pass(self) -> bool:
        return self.left_injective and self.middle_exact and self.right_surjective

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "f": self.f,
            "n": self.n,
            "depth": self.depth,
            "left_injective": self.left_injective,
            "middle_exact": self.middle_exact,
            "right_surjective": self.right_surjective,
            "counterexample": self.counterexample,
            "witnesses": dict(self.witnesses),
        }


def _ring_for(p: int, f: int, n: int, depth: int) -> PDRing:
    # log at precision 2 needs K = W extra root digits beyond depth
    from .acris_ring import log_truncation

    _, W = log_truncation(p, 2)
    return get_pd_ring(p, f, 1, n, 0, depth + W + 1)


def verify_syntomic_exactness(
    p: int, f: int, n: int, depth: int, samples: int = 100, seed: int = 0
) -> ExactnessReport:
    """Check the mod-p syntomic sequence on a window with explicit witnesses.

    Left: logbar of the generators 1 + b·x^α (α with coordinates in [0, p),
    some coordinate ≥ 1) is F_p-independent and has the predicted leading
    term.  Middle: map_M kills every logbar, and every kernel vector of map_M
    on the depth+1 window has a unit preimage.  Right: every Acris/p monomial
    of the window has a verified map_M preimage.
    """
    ring = _ring_for(p, f, n, depth)
    R1 = get_ring(p, f, 1)
    rng = random.Random(seed)
    basis = _residue_basis(R1)
    report = ExactnessReport(p, f, n, depth, True, True, True)
    w = report.witnesses

    def fail(flag: str, msg: str) -> None:
        setattr(report, flag, False)
        if report.counterexample is None:
            report.counterexample = msg

    # left
    gens = [(b, k) for k in _unit_keys(ring, depth) for b in basis]
    logs = []
    for b, k in gens:
        lb = logbar(TateUnit(ring, ((b, k, 1),)))
        logs.append(lb)
        lead = lb.leading_key()
        want = ring.root_key(k)
        if lead != want or lb.coeffs.get(want) != R1.sigma_inv(b) or ring.floor_sum(want) != 0:
            fail("left_injective", f"leading term of logbar(1+{b}x^{ring.exps(k)}) is {lead}")
        if not map_M(lb).is_zero():
            fail("middle_exact", f"map_M(logbar(1+{b}x^{ring.exps(k)})) != 0")
    rank = _fp_rank(ring, logs)
    w["unit_generators"] = len(gens)
    w["logbar_rank"] = rank
    if rank != len(gens):
        fail("left_injective", f"logbar rank {rank} < {len(gens)}")
    random_units = 0
    for _ in range(samples):
        chosen = rng.sample(range(len(gens)), min(len(gens), rng.randint(1, 3)))
        factors = tuple((gens[i][0], gens[i][1], rng.randrange(1, p)) for i in chosen)
        lb = logbar(TateUnit(ring, factors))
        if lb.is_zero():
            fail("left_injective", f"nontrivial unit {factors} has zero logbar")
        if not map_M(lb).is_zero():
            fail("middle_exact", f"map_M(logbar) != 0 for {factors}")
        random_units += 1
    w["random_units"] = random_units

    # middle
    dom = [k for k in window_keys(ring, depth + 1, Fraction(2 * p)) if all(a < 2 * p * ring.scale for a in k)]
    ker = _linear_kernel(ring, dom, map_M, "nyg", "acris")
    w["kernel_dim"] = len(ker)
    if len(ker) != len(gens):
        fail("middle_exact", f"kernel dimension {len(ker)} differs from {len(gens)} generators")
    kernel_witnesses = 0
    for a in ker:
        try:
            u = solve_log_preimage(a)
        except NotInKernel as exc:
            fail("middle_exact", f"no unit preimage for {a}: {exc}")
            continue
        if logbar(u) != a:
            fail("middle_exact", f"witness failed for {a}")
        else:
            kernel_witnesses += 1
    for _ in range(samples if ker else 0):
        a = ModpBasisForm(ring, "nyg", {})
        for g in ker:
            c = rng.randrange(p)
            if c:
                a = a + g.scale(R1.from_int(c))
        u = solve_log_preimage(a)
        if logbar(u) != a:
            fail("middle_exact", f"random kernel witness failed for {a}")
        else:
            kernel_witnesses += 1
    w["kernel_witnesses"] = kernel_witnesses

    # right
    tgt_keys = [k for k in window_keys(ring, depth, Fraction(2 * p)) if all(a < 2 * p * ring.scale for a in k)]
    right = 0
    for k in tgt_keys:
        for b in basis:
            t = ModpBasisForm(ring, "acris", {k: b})
            if map_M(solve_M_preimage(t)) != t:
                fail("right_surjective", f"preimage failed for {t}")
            else:
                right += 1
    for _ in range(samples):
        coeffs = {tgt_keys[rng.randrange(len(tgt_keys))]: R1.random(rng) for _ in range(rng.randint(1, 6))}
        t = ModpBasisForm(ring, "acris", coeffs)
        if map_M(solve_M_preimage(t)) != t:
            fail("right_surjective", f"preimage failed for {t}")
        else:
            right += 1
    w["right_witnesses"] = right
    return report


# ---------------------------------------------------------------------------
# the étale variant: 0 → Z_p → Acris --F−1--> Acris


def etale_frobenius_minus_one(a: ModpBasisForm) -> ModpBasisForm:
    """F − 1 on Acris/p."""
    if a.space != "acris":
        raise ValueError("expected an element of Acris/p")
    return acris_modp_form(pd_frobenius(a.to_pdseries())) - a


def etale_preimage(t: ModpBasisForm, max_iter: int = 10_000) -> ModpBasisForm:
    """y with (F − 1)(y) = t, or NoSolution when the constant term obstructs.

    The nonconstant part uses −Σ F^k(t), which terminates mod p; the constant
    term is handled by the Artin–Schreier solver over the same residue field.
    """
    ring, R1 = t.ring, t.R1
    zero_key = (0,) * ring.nvars
    c = t.coeffs.get(zero_key)
    rest = ModpBasisForm(ring, "acris", {k: v for k, v in t.coeffs.items() if k != zero_key})
    acc = ModpBasisForm(ring, "acris", {})
    cur = rest
    for _ in range(max_iter):
        if cur.is_zero():
            break
        acc = acc - cur
        cur = acris_modp_form(pd_frobenius(cur.to_pdseries()))
    else:
        raise WindowTooSmall("Frobenius orbit did not terminate")
    if c is not None:
        _, lam = semilinear_solve(0, GaloisRingElem(R1, c), allow_extension=False)
        acc = acc + ModpBasisForm(ring, "acris", {zero_key: lam.value})
    return acc


@dataclass
class EtaleReport:
    p: int
    f: int
    depth: int
    bound: Fraction
    kernel_dim: int
    kernel_is_constants: bool
    preimages_checked: int
    preimages_ok: bool
    counterexample: str | None = None

    @property
    def all_pass(self) -> bool:
        return self.kernel_is_constants and self.preimages_ok

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "f": self.f,
            "depth": self.depth,
            "bound": str(self.bound),
            "kernel_dim": self.kernel_dim,
            "kernel_is_constants": self.kernel_is_constants,
            "preimages_checked": self.preimages_checked,
            "preimages_ok": self.preimages_ok,
            "counterexample": self.counterexample,
        }


def etale_sequence_check(p: int, f: int, depth: int = 3, bound=None, samples: int = 20, seed: int = 0) -> EtaleReport:
    """ker(F − 1) on the Acris/p window is F_p·1; sampled image elements have preimages.

    The window (exponents in (1/p^depth)Z ∩ [0, bound], bound ≥ p) is closed
    under F modulo p, so the windowed kernel is the true kernel intersected
    with the window.
    """
    bound = Fraction(p if bound is None else bound)
    if bound < p:
        raise WindowTooSmall("the window must reach exponent p")
    ring = get_pd_ring(p, f, 1, 1, 0, depth + 1)
    R1 = get_ring(p, f, 1)
    keys = window_keys(ring, depth, bound)
    ker = _linear_kernel(ring, keys, etale_frobenius_minus_one, "acris", "acris")
    one = ModpBasisForm(ring, "acris", {(0,): R1.one})
    consts = len(ker) == 1 and ker[0] in (one.scale(R1.from_int(c)) for c in range(1, p))
    report = EtaleReport(p, f, depth, bound, len(ker), consts, 0, True)
    if not consts:
        report.counterexample = f"kernel basis {ker}"
    rng = random.Random(seed)
    fixed = [ModpBasisForm(ring, "acris", {ring.key([1]): R1.one})]
    for t in fixed + [None] * samples:
        if t is None:
            coeffs = {keys[rng.randrange(len(keys))]: R1.random(rng) for _ in range(rng.randint(1, 5))}
            t = etale_frobenius_minus_one(ModpBasisForm(ring, "acris", coeffs))
        y = etale_preimage(t)
        report.preimages_checked += 1
        if etale_frobenius_minus_one(y) != t:
            report.preimages_ok = False
            report.counterexample = report.counterexample or f"preimage of {t} failed"
    return report
