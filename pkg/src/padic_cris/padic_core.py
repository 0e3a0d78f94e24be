"""Exact arithmetic in Z/p^N and in unramified Galois rings GR(p^N, f).

A Galois ring GR(p^N, f) = W(F_{p^f})/p^N is stored in the polynomial basis
1, t, ..., t^{f-1} modulo a monic lift of the canonical irreducible polynomial
of degree f over F_p.  Internally elements are "natives": a plain ``int`` when
f = 1 and a tuple of f ints otherwise.  :class:`GaloisRingElem` wraps a native
together with its ring for the public API.
"""

from __future__ import annotations

import functools
import itertools
import random
from dataclasses import dataclass
from typing import Iterator, Sequence

__all__ = [
    "PadicError",
    "CompositeModulus",
    "NotASubfield",
    "NoSolution",
    "Prec",
    "FieldDesc",
    "GaloisRing",
    "GaloisRingElem",
    "is_prime",
    "vp",
    "make_field",
    "get_ring",
    "teichmuller",
    "frobenius_sigma",
    "embed_tower",
    "semilinear_solve",
    "residue_roots",
]


class PadicError(Exception):
    """Base class for errors raised by this package."""


class CompositeModulus(PadicError, ValueError):
    pass


class NotASubfield(PadicError, ValueError):
    pass


class NoSolution(PadicError, ArithmeticError):
    pass


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


def vp(n: int, p: int, cap: int | None = None) -> int:
    """p-adic valuation of an integer; ``cap`` is returned for zero."""
    if n == 0:
        if cap is None:
            raise ValueError("valuation of zero needs a cap")
        return cap
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v if cap is None else min(v, cap)


@dataclass(frozen=True)
class Prec:
    p: int
    N: int

    def __post_init__(self) -> None:
        if not is_prime(self.p):
            raise CompositeModulus(f"{self.p} is not prime")
        if self.N < 1:
            raise ValueError("precision N must be at least 1")

    @property
    def modulus(self) -> int:
        return self.p**self.N


@dataclass(frozen=True)
class FieldDesc:
    """Residue field F_{p^f} with its canonical minimal polynomial.

    ``minpoly`` lists coefficients in ascending degree and is monic.
    """

    p: int
    f: int
    minpoly: tuple[int, ...]

    @property
    def order(self) -> int:
        return self.p**self.f


# ---------------------------------------------------------------------------
# dense polynomials over a ring given by native operations


class _PolyArith:
    """Univariate polynomials (lists, lowest degree first) over a field ring."""

    def __init__(self, ring: "GaloisRing"):
        self.R = ring

    def norm(self, a: list) -> list:
        a = list(a)
        while a and self.R.is_zero(a[-1]):
            a.pop()
        return a

    def add(self, a: list, b: list) -> list:
        R = self.R
        n = max(len(a), len(b))
        out = [
            R.add(a[i] if i < len(a) else R.zero, b[i] if i < len(b) else R.zero)
            for i in range(n)
        ]
        return self.norm(out)

    def sub(self, a: list, b: list) -> list:
        return self.add(a, [self.R.neg(c) for c in b])

    def mul(self, a: list, b: list) -> list:
        R = self.R
        if not a or not b:
            return []
        out = [R.zero] * (len(a) + len(b) - 1)
        for i, x in enumerate(a):
            if R.is_zero(x):
                continue
            for j, y in enumerate(b):
                out[i + j] = R.add(out[i + j], R.mul(x, y))
        return self.norm(out)

    def divmod(self, a: list, b: list) -> tuple[list, list]:
        R = self.R
        b = self.norm(b)
        if not b:
            raise ZeroDivisionError("polynomial division by zero")
        a = self.norm(a)
        inv_lead = R.inv(b[-1])
        q = [R.zero] * max(len(a) - len(b) + 1, 0)
        while len(a) >= len(b):
            c = R.mul(a[-1], inv_lead)
            k = len(a) - len(b)
            q[k] = c
            for i, y in enumerate(b):
                a[k + i] = R.sub(a[k + i], R.mul(c, y))
            a = self.norm(a)
        return self.norm(q), a

    def mod(self, a: list, b: list) -> list:
        return self.divmod(a, b)[1]

    def monic(self, a: list) -> list:
        a = self.norm(a)
        if not a:
            return a
        inv = self.R.inv(a[-1])
        return [self.R.mul(c, inv) for c in a]

    def gcd(self, a: list, b: list) -> list:
        a, b = self.norm(a), self.norm(b)
        while b:
            a, b = b, self.mod(a, b)
        return self.monic(a)

    def powmod(self, a: list, e: int, m: list) -> list:
        result = [self.R.one]
        base = self.mod(a, m)
        while e:
            if e & 1:
                result = self.mod(self.mul(result, base), m)
            e >>= 1
            if e:
                base = self.mod(self.mul(base, base), m)
        return result

    def evaluate(self, a: list, x):
        R = self.R
        acc = R.zero
        for c in reversed(a):
            acc = R.add(R.mul(acc, x), c)
        return acc


# ---------------------------------------------------------------------------
# canonical fields


def _is_irreducible_mod_p(coeffs: Sequence[int], p: int) -> bool:
    """Rabin's test for a monic polynomial over F_p."""
    f = len(coeffs) - 1
    if f == 1:
        return True
    if coeffs[0] % p == 0:
        return False
    P = _PolyArith(get_ring(p, 1, 1))
    g = [c % p for c in coeffs]
    X = [0, 1]
    if P.sub(P.powmod(X, p**f, g), X):
        return False
    for q in _prime_factors(f):
        h = P.sub(P.powmod(X, p ** (f // q), g), X)
        if len(P.gcd(g, h)) > 1:
            return False
    return True


def _prime_factors(n: int) -> list[int]:
    out, d = [], 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


@functools.lru_cache(maxsize=None)
def make_field(p: int, f: int) -> FieldDesc:
    """Canonical F_{p^f}: lexicographically least irreducible monic polynomial.

    Candidates are compared by their coefficient tuple (c_0, ..., c_{f-1}).
    """
    if not is_prime(p):
        raise CompositeModulus(f"{p} is not prime")
    if f < 1:
        raise ValueError("extension degree must be at least 1")
    if f == 1:
        return FieldDesc(p, 1, (0, 1))
    # c_0 = 0 is never irreducible, so the scan starts at c_0 = 1
    for c0 in range(1, p):
        for low in itertools.product(range(p), repeat=f - 1):
            cand = (c0,) + tuple(low) + (1,)
            if _is_irreducible_mod_p(cand, p):
                return FieldDesc(p, f, cand)
    raise AssertionError("no irreducible polynomial found")  # pragma: no cover


# ---------------------------------------------------------------------------
# Galois rings


class GaloisRing:
    """Arithmetic context for GR(p^N, f) working on natives."""

    def __init__(self, p: int, f: int, N: int):
        self.prec = Prec(p, N)
        self.fd = make_field(p, f)
        self.p, self.f, self.N = p, f, N
        self.q = p**N
        self.zero = 0 if f == 1 else (0,) * f
        self.one = 1 % self.q if f == 1 else (1 % self.q,) + (0,) * (f - 1)
        if f > 1:
            m = self.fd.minpoly
            # reductions of t^k for f <= k <= 2f-2 in the basis 1..t^{f-1}
            red = []
            cur = [(-c) % self.q for c in m[:f]]
            for _ in range(f, 2 * f - 1):
                red.append(tuple(cur))
                lead = cur[-1]
                cur = [0] + cur[:-1]
                cur = [(cur[i] - lead * m[i]) % self.q for i in range(f)]
            self._red = red
        self._sigma_mat: list[list[int]] | None = None
        self._sigma_inv_mat: list[list[int]] | None = None

    def __repr__(self) -> str:
        return f"GaloisRing(p={self.p}, f={self.f}, N={self.N})"

    # -- basic conversions
    def from_int(self, n: int):
        return n % self.q if self.f == 1 else (n % self.q,) + (0,) * (self.f - 1)

    def from_coords(self, coords: Sequence[int]):
        if self.f == 1:
            (c,) = coords
            return int(c) % self.q
        if len(coords) != self.f:
            raise ValueError("wrong number of coordinates")
        return tuple(int(c) % self.q for c in coords)

    def coords(self, a) -> tuple[int, ...]:
        return (a,) if self.f == 1 else a

    def gen(self):
        """The class of t (for f = 1 the root 0 of the minimal polynomial t)."""
        if self.f == 1:
            return 0
        return tuple(1 if i == 1 else 0 for i in range(self.f))

    def reduce(self, a, other: "GaloisRing"):
        """Map a native of ``self`` into ``other`` (same p, f) by reducing representatives."""
        if self.f == 1:
            return a % other.q
        return tuple(c % other.q for c in a)

    # -- ring operations
    def is_zero(self, a) -> bool:
        return a == 0 if self.f == 1 else not any(a)

    def add(self, a, b):
        if self.f == 1:
            return (a + b) % self.q
        q = self.q
        return tuple((x + y) % q for x, y in zip(a, b))

    def sub(self, a, b):
        if self.f == 1:
            return (a - b) % self.q
        q = self.q
        return tuple((x - y) % q for x, y in zip(a, b))

    def neg(self, a):
        if self.f == 1:
            return (-a) % self.q
        return tuple((-x) % self.q for x in a)

    def smul(self, a, n: int):
        if self.f == 1:
            return (a * n) % self.q
        q = self.q
        return tuple((x * n) % q for x in a)

    def mul(self, a, b):
        if self.f == 1:
            return (a * b) % self.q
        f, q = self.f, self.q
        prod = [0] * (2 * f - 1)
        for i, x in enumerate(a):
            if x:
                for j, y in enumerate(b):
                    prod[i + j] += x * y
        low = prod[:f]
        for k, r in enumerate(self._red):
            c = prod[f + k]
            if c:
                for i in range(f):
                    low[i] += c * r[i]
        return tuple(x % q for x in low)

    def pow(self, a, e: int):
        if e < 0:
            return self.pow(self.inv(a), -e)
        result, base = self.one, a
        while e:
            if e & 1:
                result = self.mul(result, base)
            e >>= 1
            if e:
                base = self.mul(base, base)
        return result

    def val(self, a) -> int:
        """Minimum p-adic valuation of the coordinates (N for zero)."""
        return min(vp(c, self.p, self.N) for c in self.coords(a))

    def is_unit(self, a) -> bool:
        return self.val(a) == 0

    def inv(self, a):
        if not self.is_unit(a):
            raise ZeroDivisionError("element is not a unit")
        if self.f == 1:
            return pow(a, -1, self.q)
        b = self.pow(a, self.p**self.f - 2)
        two = self.from_int(2)
        prec = 1
        while prec < self.N:
            b = self.mul(b, self.sub(two, self.mul(a, b)))
            prec *= 2
        return b

    def divp(self, a, k: int):
        """Exact division by p^k; result read at precision N - k in this ring."""
        pk = self.p**k
        cs = self.coords(a)
        if any(c % pk for c in cs):
            raise ArithmeticError("not divisible")
        return self.from_coords([c // pk for c in cs])

    def residue(self, a):
        """Reduction mod p as a native of GR(p, f) (precision 1)."""
        return self.reduce(a, get_ring(self.p, self.f, 1))

    def lift(self, a):
        """Lift a native of GR(p^k, f) (k <= N) by coordinate representatives."""
        return self.from_coords(a if isinstance(a, tuple) else (a,))

    def random(self, rng: random.Random):
        return self.from_coords([rng.randrange(self.q) for _ in range(self.f)])

    def elements(self) -> Iterator:
        for cs in itertools.product(range(self.q), repeat=self.f):
            yield self.from_coords(cs)

    # -- Frobenius
    def _sigma_setup(self) -> None:
        f, q = self.f, self.q
        if f == 1:
            self._sigma_mat = [[1 % q]]
            self._sigma_inv_mat = [[1 % q]]
            return
        P = _PolyArith(self)
        g = [self.from_int(c) for c in self.fd.minpoly]
        dg = [self.smul(c, i) for i, c in enumerate(g)][1:]
        theta = self.pow(self.gen(), self.p)
        for _ in range(self.N + 1):
            theta = self.sub(theta, self.mul(P.evaluate(g, theta), self.inv(P.evaluate(dg, theta))))
        cols = [self.coords(self.pow(theta, i)) for i in range(f)]
        S = [[cols[j][i] for j in range(f)] for i in range(f)]
        self._sigma_mat = S
        Sinv = [[1 % q if i == j else 0 for j in range(f)] for i in range(f)]
        for _ in range(f - 1):
            Sinv = _matmul(Sinv, S, q)
        self._sigma_inv_mat = Sinv

    @property
    def sigma_matrix(self) -> list[list[int]]:
        """Matrix of σ over Z/p^N; column i holds the coordinates of σ(t^i)."""
        if self._sigma_mat is None:
            self._sigma_setup()
        return self._sigma_mat  # type: ignore[return-value]

    def sigma(self, a):
        if self.f == 1:
            return a
        S = self.sigma_matrix
        q = self.q
        return tuple(sum(S[i][j] * a[j] for j in range(self.f)) % q for i in range(self.f))

    def sigma_inv(self, a):
        if self.f == 1:
            return a
        if self._sigma_inv_mat is None:
            self._sigma_setup()
        S = self._sigma_inv_mat
        q = self.q
        return tuple(sum(S[i][j] * a[j] for j in range(self.f)) % q for i in range(self.f))  # type: ignore[index]

    def sigma_pow(self, a, k: int):
        k %= self.f
        for _ in range(k):
            a = self.sigma(a)
        return a

    def mul_matrix(self, a) -> list[list[int]]:
        """Matrix of multiplication by a; column i holds a·t^i."""
        cols = []
        basis = [self.from_coords([1 if j == i else 0 for j in range(self.f)]) for i in range(self.f)]
        for b in basis:
            cols.append(self.coords(self.mul(a, b)))
        return [[cols[j][i] for j in range(self.f)] for i in range(self.f)]

    def trace(self, a) -> int:
        M = self.mul_matrix(a)
        return sum(M[i][i] for i in range(self.f)) % self.q

    def teich(self, a):
        """Teichmüller lift of a residue (any native whose reduction is meant)."""
        x = self.lift(a)
        e = self.p**self.f
        for _ in range(self.N):
            x = self.pow(x, e)
        return x


def _matmul(A: list[list[int]], B: list[list[int]], q: int) -> list[list[int]]:
    n, m, k = len(A), len(B[0]), len(B)
    return [[sum(A[i][l] * B[l][j] for l in range(k)) % q for j in range(m)] for i in range(n)]


@functools.lru_cache(maxsize=None)
def get_ring(p: int, f: int, N: int) -> GaloisRing:
    return GaloisRing(p, f, N)


# ---------------------------------------------------------------------------
# public element type


@dataclass(frozen=True)
class GaloisRingElem:
    ring: GaloisRing
    value: object

    @property
    def base(self) -> FieldDesc:
        return self.ring.fd

    @property
    def prec(self) -> Prec:
        return self.ring.prec

    @property
    def coeffs(self) -> tuple[int, ...]:
        return self.ring.coords(self.value)

    @classmethod
    def from_coeffs(cls, p: int, f: int, N: int, coeffs: Sequence[int]) -> "GaloisRingElem":
        R = get_ring(p, f, N)
        return cls(R, R.from_coords(coeffs))

    @classmethod
    def from_int(cls, p: int, f: int, N: int, n: int) -> "GaloisRingElem":
        R = get_ring(p, f, N)
        return cls(R, R.from_int(n))

    def _coerce(self, other) -> object:
        if isinstance(other, GaloisRingElem):
            if other.ring is not self.ring:
                raise ValueError("elements of different Galois rings")
            return other.value
        if isinstance(other, int):
            return self.ring.from_int(other)
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else GaloisRingElem(self.ring, self.ring.add(self.value, o))

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else GaloisRingElem(self.ring, self.ring.sub(self.value, o))

    def __rsub__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else GaloisRingElem(self.ring, self.ring.sub(o, self.value))

    def __neg__(self):
        return GaloisRingElem(self.ring, self.ring.neg(self.value))

    def __mul__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else GaloisRingElem(self.ring, self.ring.mul(self.value, o))

    __rmul__ = __mul__

    def __pow__(self, e: int):
        return GaloisRingElem(self.ring, self.ring.pow(self.value, e))

    def __eq__(self, other):
        if isinstance(other, int):
            return self.value == self.ring.from_int(other)
        if isinstance(other, GaloisRingElem):
            return self.ring is other.ring and self.value == other.value
        return NotImplemented

    def __hash__(self):
        return hash((self.ring.p, self.ring.f, self.ring.N, self.value))

    def __int__(self):
        if self.ring.f != 1 and any(self.coeffs[1:]):
            raise TypeError("element is not in Z/p^N")
        return self.coeffs[0]

    def __repr__(self):
        R = self.ring
        if R.f == 1:
            return f"{self.value} (mod {R.p}^{R.N})"
        return f"GR({R.p}^{R.N},{R.f}){list(self.value)}"

    def inverse(self) -> "GaloisRingElem":
        return GaloisRingElem(self.ring, self.ring.inv(self.value))

    def sigma(self, k: int = 1) -> "GaloisRingElem":
        R = self.ring
        if k < 0:
            v = self.value
            for _ in range(-k):
                v = R.sigma_inv(v)
            return GaloisRingElem(R, v)
        return GaloisRingElem(R, R.sigma_pow(self.value, k))

    def valuation(self) -> int:
        return self.ring.val(self.value)

    def residue(self) -> "GaloisRingElem":
        R1 = get_ring(self.ring.p, self.ring.f, 1)
        return GaloisRingElem(R1, self.ring.residue(self.value))


# ---------------------------------------------------------------------------
# operations


def _as_native(R: GaloisRing, a) -> object:
    if isinstance(a, GaloisRingElem):
        return R.lift(a.value)
    if isinstance(a, int):
        return R.from_int(a)
    return R.from_coords(a)


def teichmuller(fd: FieldDesc, N: int, a) -> GaloisRingElem:
    """Teichmüller representative of a ∈ F_{p^f} in GR(p^N, f).

    ``a`` may be an int (prime field), a coordinate sequence, or an element of
    any GR(p^k, f) whose residue is used.  The lift is the stable value of
    x ↦ x^{p^f} after N iterations.
    """
    R = get_ring(fd.p, fd.f, N)
    x = _as_native(R, a)
    return GaloisRingElem(R, R.teich(x))


def frobenius_sigma(x: GaloisRingElem) -> GaloisRingElem:
    return x.sigma()


def residue_roots(R1: GaloisRing, poly: Sequence, seed: int = 0) -> list:
    """All roots in F_{p^f} = R1 of a polynomial with native coefficients.

    Uses gcd with X^q - X followed by equal-degree splitting; roots come back
    sorted by coordinate tuple, so the result does not depend on ``seed``.
    """
    if R1.N != 1:
        raise ValueError("root finding needs a residue field")
    P = _PolyArith(R1)
    g = P.monic(poly)
    if len(g) <= 1:
        return []
    qf = R1.p**R1.f
    X = [R1.zero, R1.one]
    h = P.gcd(g, P.sub(P.powmod(X, qf, g), X))
    rng = random.Random(seed)
    roots: list = []
    stack = [h]
    while stack:
        u = stack.pop()
        d = len(u) - 1
        if d == 0:
            continue
        if d == 1:
            roots.append(R1.neg(u[0]))
            continue
        while True:
            c = R1.random(rng)
            if R1.p == 2:
                # trace map of c·X
                cur = [R1.zero, c]
                acc = list(cur)
                for _ in range(R1.f - 1):
                    cur = P.mod(P.mul(cur, cur), u)
                    acc = P.add(acc, cur)
                w = P.gcd(u, acc)
            else:
                w = P.gcd(u, P.sub(P.powmod([c, R1.one], (qf - 1) // 2, u), [R1.one]))
            if 0 < len(w) - 1 < d:
                stack.append(w)
                stack.append(P.divmod(u, w)[0])
                break
    return sorted(roots, key=R1.coords)


@functools.lru_cache(maxsize=None)
def _embedding_image(p: int, f: int, f2: int, N: int):
    """Native of GR(p^N, f2) giving the image of t ∈ GR(p^N, f)."""
    R1 = get_ring(p, f2, 1)
    fd = make_field(p, f)
    g1 = [R1.from_int(c) for c in fd.minpoly]
    roots = residue_roots(R1, g1)
    if not roots:  # pragma: no cover - guaranteed by f | f2
        raise NotASubfield("minimal polynomial has no root")
    R = get_ring(p, f2, N)
    rho = R.lift(roots[0])
    P = _PolyArith(R)
    g = [R.from_int(c) for c in fd.minpoly]
    dg = [R.smul(c, i) for i, c in enumerate(g)][1:]
    for _ in range(N + 1):
        rho = R.sub(rho, R.mul(P.evaluate(g, rho), R.inv(P.evaluate(dg, rho))))
    return rho


def embed_tower(x: GaloisRingElem, target: FieldDesc) -> GaloisRingElem:
    """Embed GR(p^N, f) into GR(p^N, f') for f | f'.

    The image of t is the Hensel lift of the root of the minimal polynomial
    with the lexicographically smallest coordinate vector.
    """
    R = x.ring
    if target.p != R.p or target.f % R.f:
        raise NotASubfield(f"F_{R.p}^{R.f} is not a subfield of F_{target.p}^{target.f}")
    T = get_ring(R.p, target.f, R.N)
    if target.f == R.f:
        return GaloisRingElem(T, x.value)
    if R.f == 1:
        return GaloisRingElem(T, T.from_int(x.value))  # type: ignore[arg-type]
    rho = _embedding_image(R.p, R.f, target.f, R.N)
    acc, power = T.zero, T.one
    for c in x.coeffs:
        acc = T.add(acc, T.smul(power, c))
        power = T.mul(power, rho)
    return GaloisRingElem(T, acc)


def semilinear_solve(
    a: int, rhs: GaloisRingElem, allow_extension: bool = False
) -> tuple[FieldDesc, GaloisRingElem]:
    """Solve p^a·σ(λ) − λ = rhs.

    For a ≥ 1 the geometric series −Σ (p^a σ)^j (rhs) terminates.  For a = 0 the
    residue equation x^p − x = r̄ is solved by root finding and lifted one
    p-adic digit at a time.  The field is enlarged to degree f·p^k exactly when
    the trace of rhs is not yet divisible by p^N.
    """
    if a < 0:
        raise ValueError("a must be nonnegative")
    R = rhs.ring
    p, N = R.p, R.N
    if a >= 1:
        pa = p**a
        acc, term = R.zero, rhs.value
        while not R.is_zero(term):
            acc = R.sub(acc, term)
            term = R.smul(R.sigma(term), pa)
        return R.fd, GaloisRingElem(R, acc)

    if R.is_zero(rhs.value):
        return R.fd, GaloisRingElem(R, R.zero)
    v = vp(R.trace(rhs.value), p, N)
    k = max(0, N - v)
    if k and not allow_extension:
        raise NoSolution("σ(λ) − λ = rhs has no solution over this field")
    target = make_field(p, R.f * p**k)
    T = get_ring(p, target.f, N)
    rhs_t = embed_tower(rhs, target).value
    R1 = get_ring(p, target.f, 1)
    lam = T.zero
    for level in range(N):
        err = T.sub(rhs_t, T.sub(T.sigma(lam), lam))
        if T.is_zero(err):
            break
        ebar = T.residue(T.divp(err, level))
        # x^p − x − ē
        poly = [R1.neg(ebar), R1.neg(R1.one)] + [R1.zero] * (p - 2) + [R1.one]
        roots = residue_roots(R1, poly)
        if not roots:
            raise NoSolution("Artin–Schreier equation has no root")
        lam = T.add(lam, T.smul(T.lift(roots[0]), p**level))
    if T.sub(T.sigma(lam), lam) != rhs_t:  # pragma: no cover - guarded by construction
        raise NoSolution("lifting failed")
    return target, GaloisRingElem(T, lam)
