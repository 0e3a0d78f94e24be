"""Linear algebra over the local ring Z/p^N.

Matrices are numpy arrays with ``int64`` entries whenever (p^N)^2 fits in a
machine word and Python-object entries otherwise, so every row operation is a
vectorized update reduced mod p^N.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .padic_core import NoSolution, PadicError, Prec

__all__ = [
    "AmbientMismatch",
    "ZpnMatrix",
    "Submodule",
    "SmithForm",
    "CokernelDivisors",
    "howell_form",
    "kernel",
    "smith_form",
    "cokernel_divisors",
    "preimage",
    "intersect",
    "valuations",
]

_INT64_LIMIT = 3_037_000_499  # floor(sqrt(2**63 - 1))


class AmbientMismatch(PadicError, ValueError):
    pass


def _dtype(q: int):
    return np.int64 if q <= _INT64_LIMIT else object


def _as_array(data, q: int, cols: int | None = None) -> np.ndarray:
    dt = _dtype(q)
    if isinstance(data, np.ndarray):
        arr = data.astype(dt, copy=True) if data.dtype != dt else data.copy()
    else:
        rows = [list(r) for r in data]
        if not rows:
            return np.zeros((0, cols or 0), dtype=dt)
        arr = np.array([[int(x) for x in r] for r in rows], dtype=dt)
    if arr.ndim != 2:
        raise ValueError("matrix data must be two-dimensional")
    return arr % q


def valuations(arr: np.ndarray, p: int, N: int) -> np.ndarray:
    """Elementwise p-adic valuation, capped at N (so zero has valuation N)."""
    v = np.zeros(arr.shape, dtype=np.int64)
    pe = 1
    for _ in range(N):
        pe *= p
        v += (arr % pe == 0).astype(np.int64)
    return v


@dataclass(frozen=True, eq=False)
class ZpnMatrix:
    """Matrix over Z/p^N with reduced entries."""

    prec: Prec
    data: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        arr = _as_array(self.data, self.prec.modulus)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_rows(cls, p: int, N: int, rows: Iterable[Sequence[int]], cols: int | None = None) -> "ZpnMatrix":
        rows = [list(r) for r in rows]
        q = p**N
        if not rows:
            return cls(Prec(p, N), np.zeros((0, cols or 0), dtype=_dtype(q)))
        return cls(Prec(p, N), _as_array(rows, q))

    @classmethod
    def zeros(cls, p: int, N: int, rows: int, cols: int) -> "ZpnMatrix":
        return cls(Prec(p, N), np.zeros((rows, cols), dtype=_dtype(p**N)))

    @classmethod
    def identity(cls, p: int, N: int, n: int) -> "ZpnMatrix":
        return cls(Prec(p, N), np.eye(n, dtype=_dtype(p**N)))

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def q(self) -> int:
        return self.prec.modulus

    def tolist(self) -> list[list[int]]:
        return [[int(x) for x in r] for r in self.data]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ZpnMatrix)
            and self.prec == other.prec
            and self.data.shape == other.data.shape
            and bool(np.all(self.data == other.data))
        )

    def __hash__(self):
        return hash((self.prec, self.data.shape, tuple(map(int, self.data.ravel()))))

    def __repr__(self) -> str:
        return f"ZpnMatrix(p={self.prec.p}, N={self.prec.N}, {self.tolist()})"

    def __matmul__(self, other: "ZpnMatrix") -> "ZpnMatrix":
        if self.prec != other.prec:
            raise AmbientMismatch("precision mismatch")
        return ZpnMatrix(self.prec, _mulmod(self.data, other.data, self.q))

    def __add__(self, other: "ZpnMatrix") -> "ZpnMatrix":
        return ZpnMatrix(self.prec, (self.data + other.data) % self.q)

    def __sub__(self, other: "ZpnMatrix") -> "ZpnMatrix":
        return ZpnMatrix(self.prec, (self.data - other.data) % self.q)

    def scale(self, c: int) -> "ZpnMatrix":
        return ZpnMatrix(self.prec, (self.data * (c % self.q)) % self.q)

    def apply(self, v: Sequence[int]) -> tuple[int, ...]:
        vec = np.array([int(x) % self.q for x in v], dtype=self.data.dtype)
        if vec.shape[0] != self.cols:
            raise ValueError("vector length does not match column count")
        return tuple(int(x) for x in _mulmod(self.data, vec.reshape(-1, 1), self.q).ravel())

    def transpose(self) -> "ZpnMatrix":
        return ZpnMatrix(self.prec, self.data.T.copy())

    def reduce(self, N: int) -> "ZpnMatrix":
        return ZpnMatrix(Prec(self.prec.p, N), self.data)


def _mulmod(A: np.ndarray, B: np.ndarray, q: int) -> np.ndarray:
    if A.dtype == object or B.dtype == object or A.shape[1] * (q - 1) ** 2 >= 2**63:
        out = np.dot(A.astype(object), B.astype(object)) % q
        return out.astype(_dtype(q))
    # accumulate in chunks small enough to avoid overflow
    k = A.shape[1]
    step = max(1, (2**62) // max((q - 1) ** 2, 1))
    out = np.zeros((A.shape[0], B.shape[1]), dtype=np.int64)
    for s in range(0, k, step):
        out = (out + A[:, s : s + step] @ B[s : s + step, :]) % q
    return out


# ---------------------------------------------------------------------------
# Howell form


def _unit_part_inverse(x: int, p: int, v: int, q: int) -> int:
    return pow((int(x) // p**v) % q, -1, q)


def _howell_rows(A: np.ndarray, p: int, N: int) -> list[tuple[int, int, np.ndarray]]:
    """Return (pivot column, pivot valuation, row) triples of the Howell form."""
    q = p**N
    work = A % q
    out: list[tuple[int, int, np.ndarray]] = []
    ncols = work.shape[1]
    for col in range(ncols):
        if work.shape[0] == 0:
            break
        colvals = work[:, col]
        nz = np.nonzero(colvals)[0]
        if nz.size == 0:
            continue
        vals = valuations(colvals[nz], p, N)
        k = int(nz[int(np.argmin(vals))])
        v = int(vals.min())
        pv = p**v
        piv = (work[k] * _unit_part_inverse(work[k, col], p, v, q)) % q
        work = np.delete(work, k, axis=0)
        if work.shape[0]:
            factors = work[:, col] // pv
            work = (work - np.outer(factors, piv)) % q
        if v > 0:
            ann = (piv * p ** (N - v)) % q
            if np.any(ann):
                work = np.vstack([work, ann.reshape(1, -1)])
        if work.shape[0]:
            work = work[np.any(work != 0, axis=1)]
        out.append((col, v, piv))
    for i, (col_i, v_i, row_i) in enumerate(out):
        pv = p**v_i
        for j in range(i):
            cj, vj, row_j = out[j]
            e = int(row_j[col_i])
            if e >= pv:
                out[j] = (cj, vj, (row_j - (e // pv) * row_i) % q)
    return out


def howell_form(m: ZpnMatrix) -> ZpnMatrix:
    """Canonical row-echelon generator matrix of the row span of ``m``.

    Pivots are powers of p and entries above a pivot p^v lie in [0, p^v).
    """
    p, N = m.prec.p, m.prec.N
    rows = _howell_rows(m.data, p, N)
    if not rows:
        return ZpnMatrix(m.prec, np.zeros((0, m.cols), dtype=m.data.dtype))
    return ZpnMatrix(m.prec, np.vstack([r for _, _, r in rows]))


@dataclass(frozen=True, eq=False)
class Submodule:
    """Submodule of (Z/p^N)^ambient held by its Howell generator matrix."""

    prec: Prec
    ambient: int
    gens: ZpnMatrix = field(repr=False)

    @classmethod
    def from_generators(cls, p: int, N: int, ambient: int, gens: Iterable[Sequence[int]] | np.ndarray) -> "Submodule":
        q = p**N
        if isinstance(gens, np.ndarray):
            arr = _as_array(gens.reshape(-1, ambient) if gens.size else np.zeros((0, ambient)), q)
        else:
            rows = [list(g) for g in gens]
            arr = _as_array(rows, q, cols=ambient) if rows else np.zeros((0, ambient), dtype=_dtype(q))
        if arr.shape[1] != ambient:
            raise AmbientMismatch("generator length differs from ambient rank")
        return cls(Prec(p, N), ambient, howell_form(ZpnMatrix(Prec(p, N), arr)))

    @classmethod
    def full(cls, p: int, N: int, ambient: int) -> "Submodule":
        return cls.from_generators(p, N, ambient, np.eye(ambient, dtype=np.int64))

    @classmethod
    def zero(cls, p: int, N: int, ambient: int) -> "Submodule":
        return cls.from_generators(p, N, ambient, [])

    def _pivots(self) -> list[tuple[int, int]]:
        p, N = self.prec.p, self.prec.N
        out = []
        for row in self.gens.data:
            nz = np.nonzero(row)[0]
            col = int(nz[0])
            out.append((col, valuations(row[col : col + 1], p, N)[0].item()))
        return out

    def contains(self, v: Sequence[int]) -> bool:
        q = self.prec.modulus
        p = self.prec.p
        if len(v) != self.ambient:
            raise AmbientMismatch("vector length differs from ambient rank")
        vec = np.array([int(x) % q for x in v], dtype=self.gens.data.dtype)
        for (col, val), row in zip(self._pivots(), self.gens.data):
            e = int(vec[col])
            pv = p**val
            if e % pv:
                return False
            if e:
                vec = (vec - (e // pv) * row) % q
        return not np.any(vec)

    def __contains__(self, v) -> bool:
        return self.contains(v)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Submodule)
            and self.prec == other.prec
            and self.ambient == other.ambient
            and self.gens == other.gens
        )

    def __hash__(self):
        return hash((self.prec, self.ambient, self.gens))

    def __le__(self, other: "Submodule") -> bool:
        return all(other.contains(r) for r in self.gens.tolist())

    def __add__(self, other: "Submodule") -> "Submodule":
        self._check(other)
        rows = self.gens.tolist() + other.gens.tolist()
        return Submodule.from_generators(self.prec.p, self.prec.N, self.ambient, rows)

    def _check(self, other: "Submodule") -> None:
        if self.prec != other.prec or self.ambient != other.ambient:
            raise AmbientMismatch("submodules live in different ambient modules")

    def log_order(self) -> int:
        """log_p of the cardinality."""
        return sum(self.prec.N - v for _, v in self._pivots())

    def generators(self) -> list[tuple[int, ...]]:
        return [tuple(r) for r in self.gens.tolist()]

    def __repr__(self) -> str:
        return f"Submodule(p={self.prec.p}, N={self.prec.N}, ambient={self.ambient}, gens={self.gens.tolist()})"


# ---------------------------------------------------------------------------
# Smith form


@dataclass(frozen=True, eq=False)
class SmithForm:
    """U·m·V = diag(p^{e_1}, ..., p^{e_k}, 0, ...) with U, V invertible.

    ``exponents`` has length min(rows, cols); an exponent equal to N marks a
    zero diagonal entry.
    """

    prec: Prec
    U: np.ndarray = field(repr=False)
    V: np.ndarray = field(repr=False)
    U_inv: np.ndarray = field(repr=False)
    exponents: tuple[int, ...]


def smith_form(m: ZpnMatrix) -> SmithForm:
    p, N = m.prec.p, m.prec.N
    q = p**N
    A = m.data.copy()
    r, c = A.shape
    dt = A.dtype
    U = np.eye(r, dtype=dt)
    Uinv = np.eye(r, dtype=dt)
    V = np.eye(c, dtype=dt)
    exps: list[int] = []
    for k in range(min(r, c)):
        sub = A[k:, k:]
        nz = np.argwhere(sub != 0)
        if nz.size == 0:
            exps.extend([N] * (min(r, c) - k))
            break
        vals = valuations(sub[nz[:, 0], nz[:, 1]], p, N)
        idx = int(np.argmin(vals))
        v = int(vals[idx])
        i, j = int(nz[idx, 0]) + k, int(nz[idx, 1]) + k
        if i != k:
            A[[k, i]] = A[[i, k]]
            U[[k, i]] = U[[i, k]]
            Uinv[:, [k, i]] = Uinv[:, [i, k]]
        if j != k:
            A[:, [k, j]] = A[:, [j, k]]
            V[:, [k, j]] = V[:, [j, k]]
        unit = (int(A[k, k]) // p**v) % q
        uinv = pow(unit, -1, q)
        A[k] = (A[k] * uinv) % q
        U[k] = (U[k] * uinv) % q
        Uinv[:, k] = (Uinv[:, k] * unit) % q
        pv = p**v
        f = A[k + 1 :, k] // pv
        if np.any(f):
            A[k + 1 :] = (A[k + 1 :] - np.outer(f, A[k])) % q
            U[k + 1 :] = (U[k + 1 :] - np.outer(f, U[k])) % q
            Uinv[:, k] = (Uinv[:, k] + _mulmod(Uinv[:, k + 1 :], f.reshape(-1, 1), q).ravel()) % q
        g = A[k, k + 1 :] // pv
        if np.any(g):
            A[:, k + 1 :] = (A[:, k + 1 :] - np.outer(A[:, k], g)) % q
            V[:, k + 1 :] = (V[:, k + 1 :] - np.outer(V[:, k], g)) % q
        exps.append(v)
    return SmithForm(m.prec, U % q, V % q, Uinv % q, tuple(exps))


@dataclass(frozen=True)
class CokernelDivisors:
    """coker ≅ ⊕ Z/p^e ⊕ (Z/p^N)^free, one exponent 0 < e < N per summand."""

    p: int
    exponents: tuple[int, ...]
    free: int

    @property
    def divisors(self) -> tuple[int, ...]:
        return tuple(self.p**e for e in self.exponents)


def cokernel_divisors(m: ZpnMatrix) -> CokernelDivisors:
    N = m.prec.N
    sf = smith_form(m)
    exps = sorted(e for e in sf.exponents if 0 < e < N)
    zeros = sum(1 for e in sf.exponents if e >= N)
    free = zeros + (m.rows - len(sf.exponents))
    return CokernelDivisors(m.prec.p, tuple(exps), free)


def kernel(m: ZpnMatrix) -> Submodule:
    """{x : m·x = 0} as a submodule of (Z/p^N)^cols."""
    p, N = m.prec.p, m.prec.N
    q = p**N
    sf = smith_form(m)
    gens = []
    for k in range(m.cols):
        e = sf.exponents[k] if k < len(sf.exponents) else N
        if e == 0:
            continue
        scale = p ** (N - e) if e < N else 1
        gens.append((sf.V[:, k] * scale) % q)
    arr = np.vstack(gens) if gens else np.zeros((0, m.cols), dtype=m.data.dtype)
    return Submodule.from_generators(p, N, m.cols, arr)


def preimage(m: ZpnMatrix, v: Sequence[int]) -> tuple[int, ...]:
    """Some x with m·x = v; raises NoSolution if v is outside the column span."""
    p, N = m.prec.p, m.prec.N
    q = p**N
    if len(v) != m.rows:
        raise ValueError("target length does not match row count")
    sf = smith_form(m)
    vec = np.array([int(x) % q for x in v], dtype=m.data.dtype).reshape(-1, 1)
    w = _mulmod(sf.U, vec, q).ravel()
    y = np.zeros(m.cols, dtype=m.data.dtype)
    for k in range(m.rows):
        e = sf.exponents[k] if k < len(sf.exponents) else N
        wk = int(w[k])
        if e >= N:
            if wk:
                raise NoSolution("vector is not in the image")
            continue
        if wk % p**e:
            raise NoSolution("vector is not in the image")
        y[k] = wk // p**e
    x = _mulmod(sf.V, y.reshape(-1, 1), q).ravel()
    return tuple(int(t) for t in x)


def intersect(a: Submodule, b: Submodule) -> Submodule:
    a._check(b)
    p, N = a.prec.p, a.prec.N
    q = p**N
    GA, GB = a.gens.data, b.gens.data
    if GA.shape[0] == 0 or GB.shape[0] == 0:
        return Submodule.zero(p, N, a.ambient)
    K = np.hstack([GA.T, (-GB.T) % q])
    ker = kernel(ZpnMatrix(a.prec, K))
    U = ker.gens.data[:, : GA.shape[0]]
    if U.shape[0] == 0:
        return Submodule.zero(p, N, a.ambient)
    return Submodule.from_generators(p, N, a.ambient, _mulmod(U, GA, q))
