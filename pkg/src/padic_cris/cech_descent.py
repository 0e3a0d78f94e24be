"""Čech–Alexander complex of the affine line through the coperfection cover.

Level m is Acris of F_p[x^{1/p^∞}]^{⊗(m+1)} over F_p[x], modelled as a
:class:`PDRing` with one perfect monoid variable ``x`` (the coordinate x_0)
and m divided-power variables t_i = x_i − x_0.  A coface is the coordinate
substitution attached to a monotone injection δ: [m] → [m+1]:

    x_0 ↦ x_0 + t'_{δ(0)},      t_i ↦ t'_{δ(i)} − t'_{δ(0)}     (t'_0 = 0).

Teichmüller lifts of sums are evaluated as p^K-th powers of sums of roots,
which is exact modulo p^{K+1}.

Every coface preserves the total weight (x-degree plus t-degree), so the
complex splits as a direct sum over weights and all homology is computed
weight by weight.  The interior of a window of x-degree bound D consists of
weights w with p·w ≤ D.
"""

from __future__ import annotations

import functools
import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from .acris_ring import PDRing, PDSeries, WindowTooSmall, get_pd_ring, pd_frobenius
from .padic_core import vp
from .zpn_linalg import ZpnMatrix, smith_form

__all__ = [
    "CechWindow",
    "CechDifferential",
    "CechComplex",
    "HReport",
    "build_level",
    "coface_index",
    "coface",
    "substitute",
    "total_differential",
    "weight_basis",
    "h_modp",
    "de_rham_oracle",
    "check_dd_zero",
    "check_cosimplicial",
    "check_multiplicative",
    "check_frobenius_naturality",
]


@dataclass(frozen=True)
class CechWindow:
    """x-degree bound D, denominator depth m_den, t-degree bound T, precision N."""

    p: int
    D: int
    m_den: int = 1
    T: int | None = None
    N: int = 1

    def __post_init__(self) -> None:
        if self.p < 2 or self.D < 0 or self.m_den < 0 or self.N < 1:
            raise ValueError("invalid Čech window")
        if self.T is not None and self.T < 0:
            raise ValueError("negative t-degree bound")

    @property
    def t_bound(self) -> int:
        return self.D if self.T is None else self.T

    @property
    def interior_bound(self) -> Fraction:
        """Largest interior weight: one Frobenius or one product stays in range."""
        return Fraction(self.D, self.p)

    @property
    def ring_depth(self) -> int:
        # root splitting at working precision N + γ(T) needs that many extra digits
        return self.m_den + self.N + _gamma_int(self.t_bound, self.p) + 1

    def weights(self, interior: bool = True) -> list[Fraction]:
        top = self.interior_bound if interior else Fraction(self.D)
        step = self.p**self.m_den
        return [Fraction(k, step) for k in range(int(top * step) + 1)]

    def to_dict(self) -> dict:
        return {"p": self.p, "D": self.D, "m_den": self.m_den, "T": self.t_bound, "N": self.N}


def _gamma_int(n: int, p: int) -> int:
    s, k = 0, n
    while k:
        k //= p
        s += k
    return s


def build_level(m: int, window: CechWindow, N: int | None = None) -> PDRing:
    """Level-m ring: monoid variable x, divided-power variables t1..tm."""
    if m < 0:
        raise ValueError("level must be non-negative")
    names = ("x",) + tuple(f"t{i + 1}" for i in range(m))
    return get_pd_ring(window.p, 1, window.N if N is None else N, m, 1, window.ring_depth, names)


def coface_index(j: int, m: int) -> Callable[[int], int]:
    """δ_j: [m] → [m+1]; j = 0 keeps x_0 and j = m+1 sends it to x_1."""
    if not 0 <= j <= m + 1:
        raise ValueError(f"level {m} has cofaces 0..{m + 1}")
    cut = m + 1 - j
    return lambda k: k if k < cut else k + 1


# ---------------------------------------------------------------------------
# Teichmüller binomials


def _binom_mod(n: int, i: int, p: int, q: int, M: int) -> int:
    if _kummer(n, i, p) >= M:
        return 0
    return math.comb(n, i) % q


def _kummer(n: int, i: int, p: int) -> int:
    """v_p C(n, i) as the number of carries adding i and n − i in base p."""
    a, b, carry, c = i, n - i, 0, 0
    while a or b or carry:
        s = a % p + b % p + carry
        carry = 1 if s >= p else 0
        c += carry
        a //= p
        b //= p
    return c


@functools.lru_cache(maxsize=None)
def _teich_sum_power(
    ring: PDRing, ia: int, ib: int, sign: int, exp: Fraction
) -> tuple:
    """[v_a + sign·v_b]^exp at the ring's precision, as a term tuple.

    Variables are key positions; the result is Σ C(n,i)(±1)^i [v_a]^{(n−i)/p^e} [v_b]^{i/p^e}
    with n = k·p^K, exp = k/p^d and e = d + K, K = N − 1.
    """
    p, N = ring.p, ring.N
    q = p**N
    k, den = exp.numerator, exp.denominator
    d = vp(den, p) if den > 1 else 0
    K = N - 1
    e = d + K
    if e > ring.depth:
        raise WindowTooSmall(f"root splitting needs {e} denominator digits, ring has {ring.depth}")
    n = k * p**K
    unit = ring.scale // p**e
    out: dict = {}
    zero = [0] * ring.nvars
    for i in range(n + 1):
        c = _binom_mod(n, i, p, q, N)
        if not c:
            continue
        if sign < 0 and i % 2:
            c = -c
        key = list(zero)
        key[ia] += (n - i) * unit
        key[ib] += i * unit
        key_t = tuple(key)
        g = ring.gamma(key_t)
        if g >= N:
            continue
        out[key_t] = (out.get(key_t, 0) + c * p**g) % q
    return tuple((kk, v) for kk, v in out.items() if v)


def _diff_sign(p: int) -> int:
    # [−b] = −[b] for odd p, and [−b] = [b] in characteristic 2
    return 1 if p == 2 else -1


@functools.lru_cache(maxsize=None)
def _x_image(ring: PDRing, c: int, beta: Fraction) -> PDSeries:
    """[x_0 + t'_c]^β in the target ring."""
    return PDSeries(ring, dict(_teich_sum_power(ring, 0, c, 1, beta)))


@functools.lru_cache(maxsize=None)
def _t_image(ring: PDRing, a: int, c: int, alpha: Fraction) -> PDSeries:
    """[t'_a − t'_c]^α/(α!)_p, computed γ(α) digits deeper and divided exactly."""
    g = ring.gamma_floor(math.floor(alpha))
    deep = ring.at_prec(ring.N + g)
    raw = PDSeries(deep, dict(_teich_sum_power(deep, a, c, _diff_sign(ring.p), alpha)))
    return raw.divide_p(g) if g else raw


# ---------------------------------------------------------------------------
# cofaces


def substitute(a: PDSeries, delta: Callable[[int], int], target: PDRing) -> PDSeries:
    """Apply the ring map attached to an index map δ: [m] → [m'] with δ monotone injective."""
    src = a.ring
    m = src.n_pd
    if src.n_mon != 1 or target.n_mon != 1:
        raise ValueError("Čech levels carry exactly one monoid variable")
    if target.p != src.p or target.N != src.N or target.depth != src.depth:
        raise ValueError("source and target levels disagree")
    c = delta(0)
    images = [delta(i) for i in range(1, m + 1)]
    if any(not 0 < t <= target.n_pd for t in images) or not 0 <= c <= target.n_pd:
        raise ValueError("index map leaves the target level")
    q = target.R.q
    s = src.scale
    if c == 0:
        out: dict = {}
        for key, v in a.terms.items():
            nk = [0] * target.nvars
            nk[0] = key[0]
            for i, t in enumerate(images):
                nk[t] = key[1 + i]
            nk_t = tuple(nk)
            out[nk_t] = (out.get(nk_t, 0) + v) % q
        return PDSeries(target, {k: v for k, v in out.items() if v})
    total = target.zero()
    for key, v in a.terms.items():
        img = _x_image(target, c, Fraction(key[0], s))
        for i, t in enumerate(images):
            al = key[1 + i]
            if al:
                img = img * _t_image(target, t, c, Fraction(al, s))
        total = total + img.scale(v)
    return total


def coface(j: int, m: int, a: PDSeries, window: CechWindow | None = None) -> PDSeries:
    """d^j(a) for a at level m; with a window, a must lie in its interior."""
    if a.ring.n_pd != m:
        raise ValueError(f"element lives at level {a.ring.n_pd}, not {m}")
    if window is not None:
        _check_interior(a, window)
    target = get_pd_ring(a.ring.p, 1, a.ring.N, m + 1, 1, a.ring.depth, _names(m + 1))
    return substitute(a, coface_index(j, m), target)


def _names(m: int) -> tuple[str, ...]:
    return ("x",) + tuple(f"t{i + 1}" for i in range(m))


def _weight(ring: PDRing, key) -> Fraction:
    return Fraction(sum(key), ring.scale)


def _check_interior(a: PDSeries, window: CechWindow) -> None:
    step = a.ring.scale // window.p**window.m_den
    for key in a.terms:
        if any(x % step for x in key):
            raise WindowTooSmall(f"exponent denominators exceed p^{window.m_den}")
        if _weight(a.ring, key) > window.interior_bound:
            raise WindowTooSmall(f"weight {_weight(a.ring, key)} outside the interior window")


# ---------------------------------------------------------------------------
# differentials


def weight_basis(m: int, window: CechWindow, weight: Fraction) -> list[tuple[int, ...]]:
    """Window monomials of level m with total weight exactly `weight`."""
    ring = build_level(m, window)
    step = window.p**window.m_den
    units = weight * step
    if units.denominator != 1:
        return []
    units = int(units)
    tb = window.t_bound * step
    scale = ring.scale // step
    out = []
    for ts in itertools.product(range(min(units, tb) + 1), repeat=m):
        s = sum(ts)
        if s <= units:
            out.append(tuple(x * scale for x in (units - s,) + ts))
    return sorted(out)


@dataclass
class CechDifferential:
    """Matrix of Σ_j (−1)^j d^j from level m to m+1 on explicit monomial bases."""

    m: int
    matrix: ZpnMatrix
    domain: list
    codomain: list

    def apply(self, a: PDSeries) -> PDSeries:
        idx = {k: i for i, k in enumerate(self.domain)}
        v = [0] * len(self.domain)
        for k, c in a.terms.items():
            if k not in idx:
                raise WindowTooSmall("element has monomials outside the differential's domain")
            v[idx[k]] = c
        w = self.matrix.apply(v)
        ring = get_pd_ring(a.ring.p, 1, a.ring.N, self.m + 1, 1, a.ring.depth, _names(self.m + 1))
        return PDSeries(ring, {k: c for k, c in zip(self.codomain, w) if c})


def _alternating(a: PDSeries, m: int) -> PDSeries:
    total = None
    for j in range(m + 2):
        d = coface(j, m, a)
        total = d if total is None else (total - d if j % 2 else total + d)
    return total


def total_differential(
    m: int,
    window: CechWindow,
    weight: Fraction | None = None,
    domain: Sequence[tuple[int, ...]] | None = None,
) -> CechDifferential:
    """Σ_j (−1)^j d^j from level m on the window basis (optionally one weight only).

    Codomain monomials are indexed as they appear, in sorted order.
    """
    ring = build_level(m, window)
    if domain is None:
        weights = window.weights(interior=False) if weight is None else [Fraction(weight)]
        domain = [k for w in weights for k in weight_basis(m, window, w)]
    domain = list(domain)
    cols = []
    for key in domain:
        cols.append(_alternating(PDSeries(ring, {key: 1}), m))
    codomain = sorted({k for c in cols for k in c.terms})
    idx = {k: i for i, k in enumerate(codomain)}
    rows = [[0] * len(domain) for _ in codomain]
    for j, c in enumerate(cols):
        for k, v in c.terms.items():
            rows[idx[k]][j] = v
    mat = ZpnMatrix.from_rows(window.p, window.N, rows, cols=len(domain))
    return CechDifferential(m, mat, domain, codomain)


@dataclass
class CechComplex:
    """Levels 0..m_max with weight-graded differentials, built lazily."""

    window: CechWindow
    m_max: int = 2
    _cache: dict = field(default_factory=dict, repr=False)

    def ring(self, m: int) -> PDRing:
        return build_level(m, self.window)

    def cofaces(self, m: int) -> int:
        return m + 2  # cofaces out of level m

    def differential(self, m: int, weight: Fraction) -> CechDifferential:
        if not 0 <= m < self.m_max:
            raise ValueError(f"differential d_{m} is outside levels 0..{self.m_max}")
        key = (m, Fraction(weight))
        if key not in self._cache:
            self._cache[key] = total_differential(m, self.window, weight=Fraction(weight))
        return self._cache[key]


# ---------------------------------------------------------------------------
# homology mod p


def _fp_rank(mat: ZpnMatrix) -> int:
    if mat.rows == 0 or mat.cols == 0:
        return 0
    return sum(1 for e in smith_form(mat.reduce(1)).exponents if e == 0)


def _fmt_x(w: Fraction) -> str:
    if w == 0:
        return "1"
    return "x" if w == 1 else f"x^{w}" if w.denominator == 1 else f"x^({w})"


def de_rham_oracle(p: int, bound: Fraction) -> tuple[list[Fraction], list[Fraction]]:
    """Interior weights of ker d = F_p[x^p] and of the classes x^{pj+p−1}dx.

    A class x^{n}dx sits in Čech weight n + 1.
    """
    h0 = [Fraction(p * j) for j in range(int(bound // p) + 1)]
    h1 = [Fraction(p * (j + 1)) for j in range(int(bound // p))]
    return h0, h1


@dataclass
class HReport:
    degree: int
    p: int
    window: dict
    dimension: int
    basis: list
    per_weight: dict
    oracle_dimension: int
    oracle_basis: list

    @property
    def matches(self) -> bool:
        return self.dimension == self.oracle_dimension and (
            self.degree != 0 or self.basis == self.oracle_basis
        )

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "p": self.p,
            "window": self.window,
            "dimension": self.dimension,
            "basis": self.basis,
            "per_weight": {str(k): v for k, v in self.per_weight.items()},
            "oracle_dimension": self.oracle_dimension,
            "oracle_basis": self.oracle_basis,
            "matches": self.matches,
        }


def h_modp(degree: int, window: CechWindow) -> HReport:
    """H^degree of the Čech complex mod p, restricted to interior weights."""
    if degree not in (0, 1):
        raise ValueError("degree must be 0 or 1")
    if window.N != 1:
        raise ValueError("h_modp works at N = 1")
    p = window.p
    weights = window.weights(interior=True)
    oracle0, oracle1 = de_rham_oracle(p, window.interior_bound)
    cx = CechComplex(window, m_max=2)
    per_weight: dict = {}
    basis: list = []
    for w in weights:
        d0 = cx.differential(0, w)
        if degree == 0:
            # C^0 in weight w is spanned by x^w alone
            dim = 1 - _fp_rank(d0.matrix)
            if dim:
                basis.append(_fmt_x(w))
        else:
            d1 = cx.differential(1, w)
            if any(k not in set(d1.domain) for k in d0.codomain):
                raise WindowTooSmall(f"d0(x^{w}) leaves the level-1 window")
            z = len(d1.domain) - _fp_rank(d1.matrix)
            dim = z - _fp_rank(d0.matrix)
            if dim:
                basis.append(f"weight {w}: {dim}")
        if dim:
            per_weight[w] = dim
    dimension = sum(per_weight.values())
    if degree == 0:
        oracle_basis = [_fmt_x(w) for w in oracle0]
        oracle_dim = len(oracle0)
    else:
        oracle_basis = [f"x^{w - 1}dx" if w > 2 else "x dx" for w in oracle1]
        oracle_dim = len(oracle1)
    return HReport(degree, p, window.to_dict(), dimension, basis, per_weight, oracle_dim, oracle_basis)


# ---------------------------------------------------------------------------
# structural checks on sampled elements


def _random_interior(ring: PDRing, window: CechWindow, rng: random.Random, terms: int = 3) -> PDSeries:
    m = ring.n_pd
    weights = window.weights(interior=True)
    out: dict = {}
    for _ in range(terms):
        w = rng.choice(weights)
        keys = weight_basis(m, window, w)
        out[rng.choice(keys)] = rng.randrange(1, ring.R.q)
    return PDSeries(ring, out)


def check_dd_zero(window: CechWindow, m: int = 0, samples: int = 20, seed: int = 0) -> bool:
    rng = random.Random(seed)
    ring = build_level(m, window)
    for _ in range(samples):
        a = _random_interior(ring, window, rng)
        if not _alternating(_alternating(a, m), m + 1).is_zero():
            return False
    return True


def check_cosimplicial(window: CechWindow, m: int = 0, samples: int = 10, seed: int = 0) -> bool:
    """d^k d^j = d^j d^{k−1} for j < k on sampled level-m elements."""
    rng = random.Random(seed)
    ring = build_level(m, window)
    for _ in range(samples):
        a = _random_interior(ring, window, rng)
        for k in range(1, m + 3):
            for j in range(k):
                lhs = coface(k, m + 1, coface(j, m, a))
                rhs = coface(j, m + 1, coface(k - 1, m, a))
                if lhs != rhs:
                    return False
    return True


def check_multiplicative(window: CechWindow, m: int = 0, samples: int = 10, seed: int = 0) -> bool:
    rng = random.Random(seed)
    ring = build_level(m, window)
    half = CechWindow(window.p, window.D // 2, window.m_den, window.T, window.N)
    for _ in range(samples):
        a = _random_interior(ring, half, rng, terms=2)
        b = _random_interior(ring, half, rng, terms=2)
        for j in range(m + 2):
            if coface(j, m, a * b) != coface(j, m, a) * coface(j, m, b):
                return False
    return True


def check_frobenius_naturality(window: CechWindow, m: int = 0, samples: int = 10, seed: int = 0) -> bool:
    rng = random.Random(seed)
    ring = build_level(m, window)
    for _ in range(samples):
        a = _random_interior(ring, window, rng, terms=1)
        for j in range(m + 2):
            if pd_frobenius(coface(j, m, a)) != coface(j, m, pd_frobenius(a)):
                return False
    return True
