"""Truncated divided-power series rings Acris(C) for C = B[x^{1/p^∞}]/(x).

An element is a finite sum Σ b_α · u^β x^α/(α!)_p where

* ``u`` are perfect monoid variables of the coefficient base (no divided
  powers; used by the Čech complex),
* ``x`` are the divided-power variables,
* (α!)_p = p^{γ(α)} is the p-part of Π⌊α_i⌋!,
* b_α lies in GR(p^N, f).

Exponents are stored as integers scaled by p^depth, so every exponent with
denominator dividing p^depth is exact.  A monomial key is a tuple holding the
monoid exponents first and the divided-power exponents after them.
"""

from __future__ import annotations

import functools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence

from .padic_core import GaloisRing, NoSolution, PadicError, get_ring, vp
from .zpn_linalg import Submodule, intersect

__all__ = [
    "BaseMismatch",
    "NotNygaard",
    "PrecisionExhausted",
    "WindowTooSmall",
    "FracExp",
    "gamma_val",
    "PDRing",
    "get_pd_ring",
    "PDSeries",
    "SharpSeries",
    "TateUnit",
    "pd_frobenius",
    "nygaard_test",
    "nygaard_criteria",
    "sharp_root",
    "teichmuller_lift",
    "binomial_unit_lift",
    "pd_log_unit",
    "log_truncation",
    "f_over_p_minus_1",
    "frobenius_intersection",
    "IntersectionReport",
    "window_keys",
]


class BaseMismatch(PadicError, ValueError):
    pass


class NotNygaard(PadicError, ValueError):
    pass


class PrecisionExhausted(PadicError, ArithmeticError):
    pass


class WindowTooSmall(PadicError, ValueError):
    pass


# ---------------------------------------------------------------------------
# exponents


@dataclass(frozen=True)
class FracExp:
    """Nonnegative rational numerator / p^denom_exp in lowest terms."""

    numerator: int
    denom_exp: int
    p: int

    def __post_init__(self) -> None:
        if self.numerator < 0 or self.denom_exp < 0:
            raise ValueError("exponents are nonnegative")
        if self.denom_exp > 0 and self.numerator % self.p == 0:
            n, e = self.numerator, self.denom_exp
            while e > 0 and n % self.p == 0:
                n //= self.p
                e -= 1
            object.__setattr__(self, "numerator", n)
            object.__setattr__(self, "denom_exp", e)

    @classmethod
    def of(cls, value, p: int) -> "FracExp":
        if isinstance(value, FracExp):
            return value
        fr = Fraction(value)
        d, e = fr.denominator, 0
        while d % p == 0:
            d //= p
            e += 1
        if d != 1:
            raise ValueError(f"{value} does not have a p-power denominator")
        return cls(fr.numerator, e, p)

    @property
    def value(self) -> Fraction:
        return Fraction(self.numerator, self.p**self.denom_exp)

    def floor(self) -> int:
        return self.numerator // self.p**self.denom_exp

    def __lt__(self, other: "FracExp") -> bool:
        return self.value < other.value

    def __str__(self) -> str:
        return str(self.value)


def _legendre(k: int, p: int) -> int:
    s = 0
    while k:
        k //= p
        s += k
    return s


def gamma_val(alpha, p: int | None = None) -> int:
    """v_p(⌊α⌋!), the exponent of (α!)_p."""
    if isinstance(alpha, FracExp):
        return _legendre(alpha.floor(), alpha.p)
    if p is None:
        raise ValueError("p is required for non-FracExp exponents")
    return _legendre(math.floor(Fraction(alpha)), p)


# ---------------------------------------------------------------------------
# rings


class PDRing:
    """Context for Acris elements: coefficient ring, variables and scale."""

    def __init__(
        self,
        p: int,
        f: int,
        N: int,
        n_pd: int,
        n_mon: int = 0,
        depth: int = 12,
        names: Sequence[str] | None = None,
    ):
        self.p, self.f, self.N = p, f, N
        self.n_pd, self.n_mon = n_pd, n_mon
        self.nvars = n_pd + n_mon
        self.depth = depth
        self.scale = p**depth
        self.R: GaloisRing = get_ring(p, f, N)
        if names is None:
            mon = ["u"] if n_mon == 1 else [f"u{i + 1}" for i in range(n_mon)]
            pd = ["x"] if n_pd == 1 else [f"x{i + 1}" for i in range(n_pd)]
            names = mon + pd
        self.names = tuple(names)
        self._gtab: list[int] = []

    def __repr__(self) -> str:
        return (
            f"PDRing(p={self.p}, f={self.f}, N={self.N}, n_pd={self.n_pd}, "
            f"n_mon={self.n_mon}, depth={self.depth})"
        )

    @property
    def signature(self) -> tuple:
        return (self.p, self.f, self.n_pd, self.n_mon, self.depth)

    def at_prec(self, N: int) -> "PDRing":
        return get_pd_ring(self.p, self.f, N, self.n_pd, self.n_mon, self.depth, self.names)

    # -- divided-power bookkeeping
    def gamma_floor(self, k: int) -> int:
        tab = self._gtab
        while len(tab) <= k:
            tab.append(gamma_val(len(tab), self.p))
        return tab[k]

    def gamma(self, key: tuple[int, ...]) -> int:
        s = self.scale
        g = self.gamma_floor
        return sum(g(a // s) for a in key[self.n_mon :])

    def floor_sum(self, key: tuple[int, ...]) -> int:
        s = self.scale
        return sum(a // s for a in key[self.n_mon :])

    # -- keys
    def key(self, exps: Sequence) -> tuple[int, ...]:
        if len(exps) != self.nvars:
            raise ValueError(f"expected {self.nvars} exponents")
        out = []
        for e in exps:
            v = FracExp.of(e, self.p).value * self.scale
            if v.denominator != 1:
                raise WindowTooSmall(f"exponent {e} needs more than {self.depth} denominator digits")
            out.append(int(v))
        return tuple(out)

    def exps(self, key: tuple[int, ...]) -> tuple[Fraction, ...]:
        return tuple(Fraction(a, self.scale) for a in key)

    def key_depth(self, key: tuple[int, ...]) -> int:
        d = 0
        for a in key:
            if a:
                d = max(d, self.depth - vp(a, self.p))
        return max(d, 0)

    def root_key(self, key: tuple[int, ...], k: int = 1) -> tuple[int, ...]:
        pk = self.p**k
        if any(a % pk for a in key):
            raise WindowTooSmall("p-th root leaves the representable exponent range")
        return tuple(a // pk for a in key)

    # -- constructors
    def zero(self) -> "PDSeries":
        return PDSeries(self, {})

    def one(self) -> "PDSeries":
        return PDSeries(self, {(0,) * self.nvars: self.R.one})

    def scalar(self, c) -> "PDSeries":
        c = c if not isinstance(c, int) else self.R.from_int(c)
        return PDSeries(self, {(0,) * self.nvars: c})

    def basis(self, exps: Sequence, coeff=1) -> "PDSeries":
        """coeff · u^β x^α/(α!)_p."""
        c = self.R.from_int(coeff) if isinstance(coeff, int) else coeff
        return PDSeries(self, {self.key(exps): c})

    def basis_key(self, key: tuple[int, ...], coeff=1) -> "PDSeries":
        c = self.R.from_int(coeff) if isinstance(coeff, int) else coeff
        return PDSeries(self, {key: c})

    def monomial(self, exps: Sequence, coeff=1) -> "PDSeries":
        """The Teichmüller monomial coeff · [u^β x^α] = coeff · p^{γ(α)} e_α."""
        k = self.key(exps)
        return self.monomial_key(k, coeff)

    def monomial_key(self, key: tuple[int, ...], coeff=1) -> "PDSeries":
        c = self.R.from_int(coeff) if isinstance(coeff, int) else coeff
        return PDSeries(self, {key: self.R.smul(c, self.p ** self.gamma(key))})

    def var(self, i: int) -> "PDSeries":
        exps = [0] * self.nvars
        exps[i] = 1
        return self.monomial(exps)

    def random_element(self, rng: random.Random, terms: int = 4, depth: int = 2, bound: int = 3) -> "PDSeries":
        out: dict = {}
        for _ in range(terms):
            key = tuple(
                rng.randrange(bound * self.p**depth + 1) * (self.scale // self.p**depth) for _ in range(self.nvars)
            )
            out[key] = self.R.random(rng)
        return PDSeries(self, out)


@functools.lru_cache(maxsize=None)
def get_pd_ring(
    p: int,
    f: int,
    N: int,
    n_pd: int,
    n_mon: int = 0,
    depth: int = 12,
    names: tuple[str, ...] | None = None,
) -> PDRing:
    return PDRing(p, f, N, n_pd, n_mon, depth, names)


def window_keys(ring: PDRing, depth: int, bound) -> list[tuple[int, ...]]:
    """All keys with every exponent in (1/p^depth)Z ∩ [0, bound]."""
    if depth > ring.depth:
        raise WindowTooSmall("window depth exceeds ring depth")
    step = ring.scale // ring.p**depth
    top = int(Fraction(bound) * ring.p**depth)
    ranges = [range(0, (top + 1) * step, step)] * ring.nvars
    keys: list[tuple[int, ...]] = [()]
    for r in ranges:
        keys = [k + (a,) for k in keys for a in r]
    return keys


# ---------------------------------------------------------------------------
# elements


class PDSeries:
    """Finite sum Σ b_key · e_key with coefficients in GR(p^N, f)."""

    __slots__ = ("ring", "terms")

    def __init__(self, ring: PDRing, terms: Mapping):
        self.ring = ring
        R = ring.R
        self.terms = {k: v for k, v in terms.items() if not R.is_zero(v)}

    # -- structure
    def _same(self, other: "PDSeries") -> None:
        if not isinstance(other, PDSeries) or other.ring is not self.ring:
            if isinstance(other, PDSeries) and other.ring.signature == self.ring.signature and other.ring.N == self.ring.N:
                return
            raise BaseMismatch("elements of different rings")

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other) -> bool:
        if isinstance(other, int):
            return self == self.ring.scalar(other)
        if not isinstance(other, PDSeries):
            return NotImplemented
        return self.ring.signature == other.ring.signature and self.ring.N == other.ring.N and self.terms == other.terms

    def __hash__(self):
        return hash((self.ring.signature, self.ring.N, frozenset(self.terms.items())))

    def __len__(self) -> int:
        return len(self.terms)

    def items(self) -> Iterator:
        return iter(sorted(self.terms.items()))

    def coeff(self, exps: Sequence):
        return self.terms.get(self.ring.key(exps), self.ring.R.zero)

    def coeff_key(self, key):
        return self.terms.get(key, self.ring.R.zero)

    # -- arithmetic
    def __add__(self, other) -> "PDSeries":
        if isinstance(other, int):
            other = self.ring.scalar(other)
        self._same(other)
        R = self.ring.R
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = R.add(out[k], v) if k in out else v
        return PDSeries(self.ring, out)

    __radd__ = __add__

    def __neg__(self) -> "PDSeries":
        R = self.ring.R
        return PDSeries(self.ring, {k: R.neg(v) for k, v in self.terms.items()})

    def __sub__(self, other) -> "PDSeries":
        if isinstance(other, int):
            other = self.ring.scalar(other)
        return self + (-other)

    def __rsub__(self, other) -> "PDSeries":
        return (-self) + other

    def scale(self, c) -> "PDSeries":
        """Multiply by a coefficient (native) or an integer."""
        R = self.ring.R
        if isinstance(c, int) and self.ring.f != 1:
            return PDSeries(self.ring, {k: R.smul(v, c) for k, v in self.terms.items()})
        c = R.from_int(c) if isinstance(c, int) else c
        return PDSeries(self.ring, {k: R.mul(v, c) for k, v in self.terms.items()})

    def __mul__(self, other) -> "PDSeries":
        if isinstance(other, int):
            return self.scale(other)
        self._same(other)
        ring = self.ring
        R, p, N = ring.R, ring.p, ring.N
        gam = ring.gamma
        a_terms = [(k, v, gam(k)) for k, v in self.terms.items()]
        b_terms = [(k, v, gam(k)) for k, v in other.terms.items()]
        out: dict = {}
        pows = [p**c for c in range(N)]
        if ring.f == 1:
            q = R.q
            for ka, va, ga in a_terms:
                for kb, vb, gb in b_terms:
                    k = tuple(x + y for x, y in zip(ka, kb))
                    c = gam(k) - ga - gb
                    if c >= N:
                        continue
                    out[k] = (out.get(k, 0) + va * vb * pows[c]) % q
        else:
            for ka, va, ga in a_terms:
                for kb, vb, gb in b_terms:
                    k = tuple(x + y for x, y in zip(ka, kb))
                    c = gam(k) - ga - gb
                    if c >= N:
                        continue
                    v = R.mul(va, vb)
                    if c:
                        v = R.smul(v, pows[c])
                    out[k] = R.add(out[k], v) if k in out else v
        return PDSeries(ring, out)

    __rmul__ = __mul__

    def __pow__(self, e: int) -> "PDSeries":
        if e < 0:
            raise ValueError("negative powers are not supported")
        result, base = self.ring.one(), self
        while e:
            if e & 1:
                result = result * base
            e >>= 1
            if e:
                base = base * base
        return result

    def frobenius(self) -> "PDSeries":
        return pd_frobenius(self)

    # -- precision changes
    def to_prec(self, N: int) -> "PDSeries":
        """Reduce (N smaller) or lift by coefficient representatives (N larger)."""
        ring2 = self.ring.at_prec(N)
        R, R2 = self.ring.R, ring2.R
        if N <= self.ring.N:
            return PDSeries(ring2, {k: R.reduce(v, R2) for k, v in self.terms.items()})
        return PDSeries(ring2, {k: R2.lift(v) for k, v in self.terms.items()})

    def divide_p(self, k: int = 1) -> "PDSeries":
        """Exact coordinatewise division by p^k, landing at precision N − k."""
        R = self.ring.R
        ring2 = self.ring.at_prec(self.ring.N - k)
        R2 = ring2.R
        out = {}
        for key, v in self.terms.items():
            try:
                out[key] = R.reduce(R.divp(v, k), R2)
            except ArithmeticError as exc:
                raise PrecisionExhausted("coefficient not divisible by p") from exc
        return PDSeries(ring2, out)

    def min_valuation(self) -> int:
        R = self.ring.R
        return min((R.val(v) for v in self.terms.values()), default=self.ring.N)

    # -- display
    def _fmt_mono(self, key) -> str:
        ring = self.ring
        parts = []
        pd_exps = []
        for name, a, is_pd in zip(ring.names, ring.exps(key), [False] * ring.n_mon + [True] * ring.n_pd):
            if a == 0:
                continue
            parts.append(name if a == 1 else f"{name}^({a})" if a.denominator != 1 else f"{name}^{a}")
            if is_pd and a >= 1:
                pd_exps.append(a)
        mono = "*".join(parts) or "1"
        g = ring.gamma(key)
        if g:
            mono = f"{mono}/p^{g}"
        return mono

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        R = self.ring.R
        parts = []
        for k, v in sorted(self.terms.items()):
            c = v if R.f == 1 else list(v)
            parts.append(f"{c}*{self._fmt_mono(k)}")
        return " + ".join(parts)


# ---------------------------------------------------------------------------
# Frobenius and Nygaard ideal


def pd_frobenius(a: PDSeries) -> PDSeries:
    """F(b·e_α) = σ(b)·p^{γ(pα)−γ(α)}·e_{pα}; monoid exponents scale by p."""
    ring = a.ring
    R, p, N = ring.R, ring.p, ring.N
    out: dict = {}
    for k, v in a.terms.items():
        k2 = tuple(p * x for x in k)
        c = ring.gamma(k2) - ring.gamma(k)
        if c >= N:
            continue
        w = R.sigma(v)
        if c:
            w = R.smul(w, p**c)
        out[k2] = R.add(out[k2], w) if k2 in out else w
    return PDSeries(ring, out)


def nygaard_criteria(a: PDSeries) -> tuple[bool, bool]:
    """(coefficient test, Frobenius divisibility test)."""
    ring = a.ring
    R, p = ring.R, ring.p
    coef_ok = all(
        R.val(v) >= 1 for k, v in a.terms.items() if ring.floor_sum(k) == 0
    )
    frob_ok = all(R.val(v) >= 1 for v in pd_frobenius(a).terms.values())
    return coef_ok, frob_ok


def nygaard_test(a: PDSeries) -> bool:
    """p | b_α for every term with all divided-power exponents below 1."""
    return nygaard_criteria(a)[0]


# ---------------------------------------------------------------------------
# the tilt C♭ and Teichmüller lifts


class SharpSeries:
    """Finite sum Σ c_k · u^β x^α in C♭ with coefficients in F_{p^f}."""

    __slots__ = ("ring", "terms")

    def __init__(self, ring: PDRing, terms: Mapping):
        self.ring = ring
        R1 = get_ring(ring.p, ring.f, 1)
        lifted = ((k, R1.lift(v)) for k, v in terms.items())
        self.terms = {k: v for k, v in lifted if not R1.is_zero(v)}

    @property
    def R1(self) -> GaloisRing:
        return get_ring(self.ring.p, self.ring.f, 1)

    @classmethod
    def from_exps(cls, ring: PDRing, terms: Iterable[tuple[Sequence, object]]) -> "SharpSeries":
        R1 = get_ring(ring.p, ring.f, 1)
        out: dict = {}
        for exps, c in terms:
            c = R1.from_int(c) if isinstance(c, int) else R1.from_coords(c) if isinstance(c, (list, tuple)) else c
            k = ring.key(exps)
            out[k] = R1.add(out[k], c) if k in out else c
        return cls(ring, out)

    def __eq__(self, other) -> bool:
        return isinstance(other, SharpSeries) and self.ring.signature == other.ring.signature and self.terms == other.terms

    def __hash__(self):
        return hash((self.ring.signature, frozenset(self.terms.items())))

    def __add__(self, other: "SharpSeries") -> "SharpSeries":
        R1 = self.R1
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = R1.add(out[k], v) if k in out else v
        return SharpSeries(self.ring, out)

    def __mul__(self, other: "SharpSeries") -> "SharpSeries":
        R1 = self.R1
        out: dict = {}
        for ka, va in self.terms.items():
            for kb, vb in other.terms.items():
                k = tuple(x + y for x, y in zip(ka, kb))
                v = R1.mul(va, vb)
                out[k] = R1.add(out[k], v) if k in out else v
        return SharpSeries(self.ring, out)

    def __pow__(self, e: int) -> "SharpSeries":
        result = SharpSeries(self.ring, {(0,) * self.ring.nvars: self.R1.one})
        base = self
        while e:
            if e & 1:
                result = result * base
            e >>= 1
            if e:
                base = base * base
        return result

    def frobenius(self) -> "SharpSeries":
        """The p-th power map, computed termwise (characteristic p)."""
        R1, p = self.R1, self.ring.p
        return SharpSeries(self.ring, {tuple(p * a for a in k): R1.sigma(v) for k, v in self.terms.items()})

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        return " + ".join(f"{v}*{self.ring.exps(k)}" for k, v in sorted(self.terms.items()))


def sharp_root(s: SharpSeries) -> SharpSeries:
    """Inverse Frobenius of the perfect ring C♭."""
    ring, R1 = s.ring, s.R1
    return SharpSeries(ring, {ring.root_key(k): R1.sigma_inv(v) for k, v in s.terms.items()})


def teichmuller_lift(s: SharpSeries, N: int | None = None) -> PDSeries:
    """[s] as the p^K-th power of a naive lift of s^{1/p^K}, with K = N."""
    N = s.ring.N if N is None else N
    ring = s.ring.at_prec(N)
    R = ring.R
    r = s
    for _ in range(N):
        r = sharp_root(r)
    naive = PDSeries(ring, {k: R.smul(R.lift(v), ring.p ** ring.gamma(k)) for k, v in r.terms.items()})
    return naive ** (ring.p**N)


def binomial_unit_lift(ring: PDRing, c, key: tuple[int, ...], K: int | None = None) -> PDSeries:
    """[1 + c·x^α] from the closed form Σ_k C(p^K, k) [c]^{k/p^K} [x]^{kα/p^K}."""
    K = ring.N if K is None else K
    R, p = ring.R, ring.p
    pK = p**K
    base_key = ring.root_key(key, K)
    tc = R.teich(c)
    for _ in range(K):
        tc = R.sigma_inv(tc)
    out: dict = {}
    power = R.one
    for k in range(pK + 1):
        kk = tuple(k * a for a in base_key)
        coef = R.smul(power, math.comb(pK, k) * p ** ring.gamma(kk))
        if not R.is_zero(coef):
            out[kk] = R.add(out[kk], coef) if kk in out else coef
        power = R.mul(power, tc)
    return PDSeries(ring, out)


# ---------------------------------------------------------------------------
# Tate units and the logarithm


@dataclass(frozen=True)
class TateUnit:
    """Formal product Π (1 + c·x^α)^e of units congruent to 1 modulo J.

    Each factor is (c, key, e) with c a residue native of F_{p^f}.
    """

    ring: PDRing = field(compare=False)
    factors: tuple[tuple[object, tuple[int, ...], int], ...] = ()

    def __post_init__(self) -> None:
        s = self.ring.scale
        for c, key, e in self.factors:
            if not any(a >= s for a in key[self.ring.n_mon :]):
                raise ValueError("factor is not congruent to 1 modulo J")

    @classmethod
    def of(cls, ring: PDRing, factors: Iterable[tuple[object, Sequence, int]]) -> "TateUnit":
        R1 = get_ring(ring.p, ring.f, 1)
        out = []
        for c, exps, e in factors:
            c = R1.from_int(c) if isinstance(c, int) else R1.from_coords(c) if isinstance(c, (list, tuple)) else c
            if not R1.is_zero(c) and e % ring.p**ring.N:
                out.append((c, ring.key(exps), e))
        return cls(ring, tuple(out))

    def __mul__(self, other: "TateUnit") -> "TateUnit":
        return TateUnit(self.ring, self.factors + other.factors)

    def __pow__(self, e: int) -> "TateUnit":
        return TateUnit(self.ring, tuple((c, k, m * e) for c, k, m in self.factors))

    def is_one(self) -> bool:
        return not self.factors

    def to_sharp(self) -> SharpSeries:
        """The unit as an element of C♭ (nonnegative exponents only)."""
        R1 = get_ring(self.ring.p, self.ring.f, 1)
        one = SharpSeries(self.ring, {(0,) * self.ring.nvars: R1.one})
        acc = one
        for c, key, e in self.factors:
            if e < 0:
                raise ValueError("negative exponents have no finite C♭ expansion")
            acc = acc * (one + SharpSeries(self.ring, {key: c})) ** e
        return acc

    def __repr__(self) -> str:
        if not self.factors:
            return "TateUnit(1)"
        parts = [f"(1+{c}*x^{self.ring.exps(k)})^{e}" for c, k, e in self.factors]
        return "TateUnit(" + "*".join(parts) + ")"


def log_truncation(p: int, N: int) -> tuple[int, int]:
    """(d_max, working precision) for the logarithm at precision N."""
    d = 1
    while _legendre(d - 1, p) < N:
        d += 1
    W = N + max(vp(k, p) for k in range(1, d + 1))
    return d, W


@functools.lru_cache(maxsize=None)
def _universal_log_polys(p: int, K: int, dmax: int, modulus: int) -> tuple[tuple[int, ...], ...]:
    """Coefficients of y^d, y = (1+z)^{p^K} − 1, for d = 1..dmax, mod ``modulus``."""
    pK = p**K
    y = [math.comb(pK, k) % modulus for k in range(pK + 1)]
    y[0] = 0
    out = []
    cur = [1]
    for _ in range(dmax):
        nxt = [0] * (len(cur) + pK)
        for i, a in enumerate(cur):
            if a:
                for j in range(1, pK + 1):
                    b = y[j]
                    if b:
                        nxt[i + j] = (nxt[i + j] + a * b) % modulus
        cur = nxt
        out.append(tuple(cur))
    return tuple(out)


def _log_binomial(ring: PDRing, c, key: tuple[int, ...], dmax: int, W: int) -> dict:
    """log([1 + c x^α]) at precision ring.N via the universal polynomial in z."""
    p, N = ring.p, ring.N
    R = ring.R
    K = W
    vmax = W - N
    base_key = ring.root_key(key, K)
    polys = _universal_log_polys(p, K, dmax, p ** (N + vmax))
    tc = R.teich(c)
    for _ in range(K):
        tc = R.sigma_inv(tc)
    top = len(polys[-1])
    q_work = p ** (N + vmax)
    out: dict = {}
    power = R.one
    for m in range(1, top):
        power = R.mul(power, tc)
        km = tuple(m * a for a in base_key)
        g = ring.gamma(km)
        total = 0
        pg = p**g
        for d in range(1, dmax + 1):
            poly = polys[d - 1]
            if m >= len(poly) or not poly[m]:
                continue
            vd = vp(d, p)
            num = poly[m] * pg
            if num % p**vd:
                raise PrecisionExhausted("logarithm term not divisible by d")
            term = (num // p**vd) * pow(d // p**vd, -1, q_work)
            total += term if d % 2 else -term
        total %= R.q
        if total:
            coef = R.smul(power, total)
            out[km] = R.add(out[km], coef) if km in out else coef
    return out


def pd_log_unit(u: TateUnit, N: int | None = None, method: str = "closed") -> PDSeries:
    """log([u]) = Σ_{d≥1} (−1)^{d−1}([u]−1)^d/d at precision N.

    ``method="closed"`` evaluates the series once as a polynomial in [x]^{α/p^K}
    and substitutes per factor; ``method="series"`` runs the series directly in
    PDSeries arithmetic at the working precision.  Both truncate at the least
    d with v_p((d−1)!) ≥ N.
    """
    ring = u.ring.at_prec(u.ring.N if N is None else N)
    N = ring.N
    dmax, W = log_truncation(ring.p, N)
    R = ring.R
    if method == "closed":
        out: dict = {}
        for c, key, e in u.factors:
            part = _log_binomial(ring, c, key, dmax, W)
            for k, v in part.items():
                v = R.smul(v, e)
                out[k] = R.add(out[k], v) if k in out else v
        return PDSeries(ring, out)
    if method != "series":
        raise ValueError(f"unknown method {method!r}")
    wring = ring.at_prec(W)
    tu = TateUnit(wring, u.factors)
    lifted = teichmuller_lift(tu.to_sharp(), W)
    y = lifted - 1
    acc = wring.zero()
    power = wring.one()
    for d in range(1, dmax + 1):
        power = power * y
        vd = vp(d, ring.p)
        term = power.divide_p(vd).to_prec(N) if vd else power.to_prec(N)
        term = term.scale(pow(d // ring.p**vd, -1, R.q))
        acc = acc.to_prec(N) + (term if d % 2 else -term)
    return acc.to_prec(N)


def f_over_p_minus_1(a: PDSeries) -> PDSeries:
    """F(a)/p − a, computing F at precision N+1 on representative lifts."""
    if not nygaard_test(a):
        raise NotNygaard("F/p − 1 is only defined on the Nygaard ideal")
    N = a.ring.N
    lifted = a.to_prec(N + 1)
    fa = pd_frobenius(lifted)
    return fa.divide_p(1) - a


# ---------------------------------------------------------------------------
# Ainf = ∩ F^n Acris on a finite window


@dataclass
class IntersectionReport:
    p: int
    f: int
    N: int
    depth: int
    bound: Fraction
    n_max: int
    ambient: int
    intersection: Submodule
    ainf: Submodule
    equal: bool
    images: list[Submodule] = field(repr=False, default_factory=list)


def frobenius_intersection(
    p: int, N: int, depth: int, n_max: int, bound=None, f: int = 1, ring_depth: int | None = None
) -> IntersectionReport:
    """Compare ∩_{j≤n_max} F^j(Acris) with {Σ b_α e_α : (α!)_p | b_α} on a window.

    The window is all one-variable exponents in (1/p^depth)Z ∩ [0, bound],
    each tensored with the basis of GR(p^N, f) over Z/p^N.  F is injective on
    monomials, so the image of F^j inside the window is spanned by F^j of the
    monomials whose exponent times p^j lies in the window.
    """
    bound = Fraction(p**2 if bound is None else bound)
    ring_depth = depth + n_max if ring_depth is None else ring_depth
    if ring_depth < depth + n_max:
        raise WindowTooSmall("F-preimages need depth + n_max denominator digits")
    ring = get_pd_ring(p, f, N, 1, 0, ring_depth)
    R = ring.R
    keys = window_keys(ring, depth, bound)
    index = {k: i for i, k in enumerate(keys)}
    dim = len(keys) * f
    unit_basis = [R.from_coords([1 if j == i else 0 for j in range(f)]) for i in range(f)]

    def vec(s: PDSeries) -> list[int]:
        v = [0] * dim
        for k, c in s.terms.items():
            if k not in index:
                raise WindowTooSmall("image left the window")
            for j, x in enumerate(R.coords(c)):
                v[index[k] * f + j] = x
        return v

    images = []
    inter = Submodule.full(p, N, dim)
    top = int(bound * ring.scale)
    for j in range(1, n_max + 1):
        gens = []
        step = ring.scale // p ** (depth + j)
        for src in range(0, top // p**j + 1, step):
            k = (src,)
            for b in unit_basis:
                s = PDSeries(ring, {k: b})
                for _ in range(j):
                    s = pd_frobenius(s)
                gens.append(vec(s))
        img = Submodule.from_generators(p, N, dim, gens)
        images.append(img)
        inter = intersect(inter, img)
    ainf_gens = []
    for k in keys:
        for b in unit_basis:
            ainf_gens.append(vec(ring.monomial_key(k, b)))
    ainf = Submodule.from_generators(p, N, dim, ainf_gens)
    return IntersectionReport(p, f, N, depth, bound, n_max, dim, inter, ainf, inter == ainf, images)
