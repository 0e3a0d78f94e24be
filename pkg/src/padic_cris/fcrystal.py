"""σ-semilinear crystals over W(F_{p^f})/p^N.

An :class:`FCrystal` is a free module with basis e_1..e_r and a Frobenius
F(Σ λ_j e_j) = Σ_j σ(λ_j)·Φe_j.  Everything downstream (Nygaard lattice,
F/p − 1, fppf groups along a field tower) is computed by restriction of
scalars to Z/p^N and Smith forms.

Tower levels use one of two realizations of W(F_{p^{f'}}):

* ``"galois"``: the Galois ring with its polynomial basis and σ matrix,
* ``"normal"``: a normal integral basis, on which σ is the cyclic shift.

The second exists because unramified extensions have normal integral bases,
so for crystals with entries in Z_p it is an isomorphic model that needs no
field arithmetic at all.  Small levels are cross-checked against the first.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .padic_core import (
    GaloisRingElem,
    NoSolution,
    PadicError,
    embed_tower,
    get_ring,
    is_prime,
    make_field,
    vp,
)
from .zpn_linalg import (
    CokernelDivisors,
    Submodule,
    ZpnMatrix,
    _mulmod,
    cokernel_divisors,
    kernel,
    preimage,
    smith_form,
)

__all__ = [
    "BadParameters",
    "BaseMismatch",
    "NotNygaardDomain",
    "PrecisionInsufficient",
    "CaseInapplicable",
    "TowerUnstable",
    "NegativeDivisibleRank",
    "FCrystal",
    "NygaardLattice",
    "LevelReport",
    "FppfGroups",
    "NewtonPolygon",
    "CokerWitness",
    "DivisorReport",
    "IsogenyReport",
    "BrauerProfile",
    "standard_slope_module",
    "restrict_scalars",
    "nygaard_lattice",
    "syntomic_level",
    "fppf_groups",
    "tower_cokernel",
    "wedge_and_kunneth",
    "newton_polygon",
    "coker_F_minus_p_witness",
    "isogeny_action_check",
    "brauer_profile",
    "unit_crystal",
    "ordinary_av",
    "supersingular_curve",
    "supersingular_exe",
    "charpoly",
]


class BadParameters(PadicError, ValueError):
    pass


class BaseMismatch(PadicError, ValueError):
    pass


class NotNygaardDomain(PadicError, ValueError):
    pass


class PrecisionInsufficient(PadicError, ArithmeticError):
    pass


class CaseInapplicable(PadicError, ValueError):
    pass


class TowerUnstable(PadicError, RuntimeError):
    pass


class NegativeDivisibleRank(PadicError, ValueError):
    pass


# ---------------------------------------------------------------------------
# crystals


def _native(R, x):
    if isinstance(x, (int, np.integer)):
        return R.from_int(int(x))
    if isinstance(x, GaloisRingElem):
        return R.lift(x.value)
    return R.from_coords(x)


@dataclass(frozen=True, eq=False)
class FCrystal:
    """Free W(F_{p^f})/p^N-module of rank r with Frobenius matrix Φ (columns are F(e_j)).

    Φ is stored with one guard digit (precision N+1) so that F/p is exact at
    precision N; integer input is therefore read exactly.
    """

    p: int
    f: int
    N: int
    phi: tuple
    label: str = ""

    def __post_init__(self) -> None:
        if not is_prime(self.p) or self.f < 1 or self.N < 1:
            raise BadParameters("need p prime, f ≥ 1, N ≥ 1")
        R = get_ring(self.p, self.f, self.N + 1)
        rows = tuple(tuple(_native(R, x) for x in row) for row in self.phi)
        if any(len(row) != len(rows) for row in rows):
            raise BadParameters("Φ must be square")
        object.__setattr__(self, "phi", rows)

    @classmethod
    def from_matrix(cls, p: int, f: int, N: int, rows: Iterable[Sequence], label: str = "") -> "FCrystal":
        return cls(p, f, N, tuple(tuple(r) for r in rows), label)

    @property
    def rank(self) -> int:
        return len(self.phi)

    @property
    def ring(self):
        return get_ring(self.p, self.f, self.N)

    @property
    def base(self) -> tuple[int, int, int]:
        return (self.p, self.f, self.N)

    def __eq__(self, other) -> bool:
        return isinstance(other, FCrystal) and self.base == other.base and self.phi == other.phi

    def __hash__(self):
        return hash((self.base, self.phi))

    def __repr__(self) -> str:
        tag = f" {self.label!r}" if self.label else ""
        return f"FCrystal(p={self.p}, f={self.f}, N={self.N}, rank={self.rank}{tag})"

    @property
    def guard_ring(self):
        return get_ring(self.p, self.f, self.N + 1)

    def entry(self, i: int, j: int):
        return self.guard_ring.reduce(self.phi[i][j], self.ring)

    def matrix(self, prec: int | None = None) -> list[list]:
        """Φ as natives of GR(p^prec, f): reduced, or lifted by representatives above N+1."""
        prec = self.N if prec is None else prec
        G, R = self.guard_ring, get_ring(self.p, self.f, prec)
        if prec <= self.N + 1:
            return [[G.reduce(x, R) for x in row] for row in self.phi]
        return [[R.lift(x) for x in row] for row in self.phi]

    def is_integral(self) -> bool:
        """True when every entry of Φ lies in Z/p^N."""
        if self.f == 1:
            return True
        return all(not any(x[1:]) for row in self.phi for x in row)

    def int_matrix(self) -> list[list[int]]:
        if not self.is_integral():
            raise BadParameters("Φ has entries outside Z/p^N")
        return [[x if self.f == 1 else x[0] for x in row] for row in self.phi]

    def apply(self, v: Sequence):
        """F(v) = Φ·σ(v) for a vector of natives."""
        R = self.ring
        sv = [R.sigma(_native(R, x)) for x in v]
        out = []
        for row in self.matrix():
            acc = R.zero
            for a, b in zip(row, sv):
                acc = R.add(acc, R.mul(a, b))
            out.append(acc)
        return tuple(out)

    def at_prec(self, N: int) -> "FCrystal":
        """Same Φ read at another precision (representative lifts beyond the guard digit)."""
        return FCrystal(self.p, self.f, N, tuple(map(tuple, self.matrix(N + 1))), self.label)

    def base_change(self, f2: int) -> "FCrystal":
        if f2 % self.f:
            raise BaseMismatch(f"F_p^{self.f} is not a subfield of F_p^{f2}")
        if f2 == self.f:
            return self
        R, target = self.guard_ring, make_field(self.p, f2)
        rows = tuple(
            tuple(embed_tower(GaloisRingElem(R, x), target).value for x in row) for row in self.phi
        )
        return FCrystal(self.p, f2, self.N, rows, self.label)

    def frobenius_power_matrix(self, k: int | None = None) -> list[list]:
        """Φ·σ(Φ)·…·σ^{k−1}(Φ), the matrix of the linear map F^k (default k = f)."""
        k = self.f if k is None else k
        R, r = self.ring, self.rank
        acc = [[R.one if i == j else R.zero for j in range(r)] for i in range(r)]
        cur = self.matrix()
        for _ in range(k):
            acc = _gr_matmul(R, acc, cur)
            cur = [[R.sigma(x) for x in row] for row in cur]
        return acc

    def to_rows(self) -> list[list[list[int]]]:
        R = self.guard_ring
        return [[list(R.coords(x)) for x in row] for row in self.phi]


def _gr_matmul(R, A, B):
    n, m, k = len(A), len(B[0]) if B else 0, len(B)
    out = []
    for i in range(n):
        row = []
        for j in range(m):
            acc = R.zero
            for l in range(k):
                acc = R.add(acc, R.mul(A[i][l], B[l][j]))
            row.append(acc)
        out.append(row)
    return out


def unit_crystal(p: int, f: int, N: int, label: str = "unit") -> FCrystal:
    """Rank one with F = σ (the zeroth exterior power)."""
    return FCrystal.from_matrix(p, f, N, [[1]], label)


def standard_slope_module(r: int, s: int, base: tuple[int, int, int]) -> FCrystal:
    """M_{s/r}: F(e_i) = e_{i+1} for i < r and F(e_r) = p^s·e_1."""
    p, f, N = base
    if r < 1 or s < 0 or math.gcd(r, s) != 1:
        raise BadParameters("need r ≥ 1, s ≥ 0 and gcd(r, s) = 1")
    rows = [[0] * r for _ in range(r)]
    for i in range(r - 1):
        rows[i + 1][i] = 1
    rows[0][r - 1] = p**s
    return FCrystal.from_matrix(p, f, N, rows, f"M_{s}/{r}")


# ---------------------------------------------------------------------------
# determinants and exterior algebra


def charpoly(R, A: Sequence[Sequence]) -> list:
    """[1, c_1, ..., c_n] with det(T·I − A) = T^n + c_1T^{n−1} + … (division free)."""
    n = len(A)
    if n == 0:
        return [R.one]
    if n == 1:
        return [R.one, R.neg(A[0][0])]
    a = A[0][0]
    Rrow = list(A[0][1:])
    C = [A[i][0] for i in range(1, n)]
    sub = [list(A[i][1:]) for i in range(1, n)]
    diags = []
    vec = C
    for _ in range(n - 1):
        acc = R.zero
        for x, y in zip(Rrow, vec):
            acc = R.add(acc, R.mul(x, y))
        diags.append(R.neg(acc))
        vec = [
            _dot(R, sub[i], vec) for i in range(n - 1)
        ]
    diags = [R.one, R.neg(a)] + diags
    inner = charpoly(R, sub)
    out = []
    for i in range(n + 1):
        acc = R.zero
        for j in range(n):
            if i - j >= 0:
                acc = R.add(acc, R.mul(diags[i - j], inner[j]))
        out.append(acc)
    return out


def _dot(R, u, v):
    acc = R.zero
    for x, y in zip(u, v):
        acc = R.add(acc, R.mul(x, y))
    return acc


def _det(R, A) -> object:
    n = len(A)
    c = charpoly(R, A)[-1]
    return c if n % 2 == 0 else R.neg(c)


def _wedge_matrix(R, phi, i: int):
    r = len(phi)
    subsets = list(itertools.combinations(range(r), i))
    if i == 0:
        return [[R.one]]
    return [
        [_det(R, [[phi[a][b] for b in J] for a in I]) for J in subsets]
        for I in subsets
    ]


def _same_base(inputs: Sequence[FCrystal]) -> tuple[int, int, int]:
    bases = {X.base for X in inputs}
    if len(bases) != 1:
        raise BaseMismatch(f"crystals live over different bases: {sorted(bases)}")
    return bases.pop()


def wedge_and_kunneth(inputs: Sequence[FCrystal] | FCrystal, shape) -> FCrystal:
    """Exterior power, tensor product or direct sum.

    ``shape`` is ``("wedge", i)``, ``"tensor"`` or ``"sum"``.  Bases are the
    sorted subsets e_I, the lexicographic pairs e_a⊗e_b and the concatenation.
    """
    if isinstance(inputs, FCrystal):
        inputs = [inputs]
    p, f, N = _same_base(inputs)
    R = get_ring(p, f, N + 1)
    if isinstance(shape, tuple) and shape[0] == "wedge":
        (X,) = inputs
        i = int(shape[1])
        if not 0 <= i <= X.rank:
            raise BadParameters("wedge degree out of range")
        rows = _wedge_matrix(R, X.phi, i)
        return FCrystal(p, f, N, tuple(map(tuple, rows)), f"∧{i}({X.label})")
    if shape == "tensor":
        out = [[R.one]]
        for X in inputs:
            out = [
                [R.mul(out[a][b], X.phi[c][d]) for b in range(len(out)) for d in range(X.rank)]
                for a in range(len(out))
                for c in range(X.rank)
            ]
        return FCrystal(p, f, N, tuple(map(tuple, out)), "⊗".join(X.label for X in inputs))
    if shape == "sum":
        n = sum(X.rank for X in inputs)
        out = [[R.zero] * n for _ in range(n)]
        off = 0
        for X in inputs:
            for a in range(X.rank):
                for b in range(X.rank):
                    out[off + a][off + b] = X.phi[a][b]
            off += X.rank
        return FCrystal(p, f, N, tuple(map(tuple, out)), "⊕".join(X.label for X in inputs))
    raise BadParameters(f"unknown shape {shape!r}")


def ordinary_av(g: int, degree: int | None, p: int, N: int, f: int = 1) -> FCrystal:
    """H^i of an ordinary abelian variety: ∧^i of F(x_k) = x_k, F(y_k) = p·y_k."""
    if g < 1:
        raise BadParameters("g must be positive")
    h1 = FCrystal.from_matrix(
        p, f, N, [[(1 if k < g else p) if k == l else 0 for l in range(2 * g)] for k in range(2 * g)], f"ordH1(g={g})"
    )
    if degree is None or degree == 1:
        return h1
    X = wedge_and_kunneth(h1, ("wedge", degree))
    return FCrystal(p, f, N, X.phi, f"ordH{degree}(g={g})")


def supersingular_curve(p: int, N: int, f: int = 1) -> FCrystal:
    """H¹ of a supersingular elliptic curve: F(x) = y, F(y) = p·x."""
    return FCrystal.from_matrix(p, f, N, [[0, p], [1, 0]], "ssH1")


def supersingular_exe(degree: int, p: int, N: int, f: int = 1) -> FCrystal:
    """H^i(E×E) = ∧^i(H¹(E) ⊕ H¹(E))."""
    h1 = supersingular_curve(p, N, f)
    X = wedge_and_kunneth(wedge_and_kunneth([h1, h1], "sum"), ("wedge", degree))
    return FCrystal(p, f, N, X.phi, f"ssExE_H{degree}")


# ---------------------------------------------------------------------------
# realizations over Z/p^k


def _sigma_block(p: int, fprime: int, prec: int, model: str) -> np.ndarray:
    q = p**prec
    if model == "normal":
        S = np.zeros((fprime, fprime), dtype=object)
        for k in range(fprime):
            S[(k + 1) % fprime, k] = 1
        return S
    return np.array(get_ring(p, fprime, prec).sigma_matrix, dtype=object) % q


def _fixed_basis(p: int, f_small: int, fprime: int, prec: int, model: str) -> np.ndarray:
    """Columns spanning W(F_{p^f_small})/p^prec inside W(F_{p^fprime})/p^prec."""
    E = np.zeros((fprime, f_small), dtype=object)
    if model == "normal":
        for k in range(fprime):
            E[k, k % f_small] = 1
        return E
    R = get_ring(p, f_small, prec)
    target = make_field(p, fprime)
    for i in range(f_small):
        t = GaloisRingElem(R, R.from_coords([1 if j == i else 0 for j in range(f_small)]))
        col = get_ring(p, fprime, prec).coords(embed_tower(t, target).value)
        for k, c in enumerate(col):
            E[k, i] = c
    return E


def _pick_model(X: FCrystal, model: str) -> str:
    if model == "auto":
        return "normal" if X.is_integral() else "galois"
    if model == "normal" and not X.is_integral():
        raise BadParameters("the normal-basis model needs Φ with entries in Z_p")
    if model not in ("normal", "galois"):
        raise BadParameters(f"unknown model {model!r}")
    return model


def _frobenius_matrix(X: FCrystal, fprime: int, prec: int, model: str) -> np.ndarray:
    """Z/p^prec matrix of F on (W_{f'}/p^prec)^r, coordinates indexed a·f' + k."""
    p = X.p
    q = p**prec
    S = _sigma_block(p, fprime, prec, model)
    r = X.rank
    if model == "normal":
        return np.kron(np.array(X.int_matrix(), dtype=object), S) % q
    Y = X.base_change(fprime)
    R = get_ring(p, fprime, prec)
    phi = Y.matrix(prec)
    out = np.zeros((r * fprime, r * fprime), dtype=object)
    for a in range(r):
        for b in range(r):
            M = np.array(R.mul_matrix(phi[a][b]), dtype=object)
            out[a * fprime : (a + 1) * fprime, b * fprime : (b + 1) * fprime] = M.dot(S) % q
    return out


def _zm(p: int, N: int, arr: np.ndarray) -> ZpnMatrix:
    return ZpnMatrix.from_rows(p, N, arr.tolist(), cols=arr.shape[1] if arr.ndim == 2 else 0)


def _lattice_basis(RF: np.ndarray, p: int, prec: int) -> np.ndarray:
    """Columns forming a Z_p-basis of F^{-1}(pM), read modulo p^prec.

    With Ū·F̄·V̄ = diag(1^ρ, 0) over F_p, the lifted columns p·V_0..p·V_{ρ−1},
    V_ρ..V_{n−1} are a basis because V̄ is invertible.
    """
    n = RF.shape[0]
    if n == 0:
        return np.zeros((0, 0), dtype=object)
    sf = smith_form(_zm(p, 1, RF % p))
    V = sf.V.astype(object)
    B = V.copy()
    rho = sum(1 for e in sf.exponents if e == 0)
    B[:, :rho] *= p
    return B % p**prec


@dataclass(frozen=True, eq=False)
class NygaardLattice:
    """F^{-1}(pM), stored at precision N+1 by a basis (columns) and its Howell module."""

    crystal: FCrystal
    basis: ZpnMatrix
    module: Submodule

    @property
    def rank(self) -> int:
        return self.basis.cols

    def contains(self, v: Sequence) -> bool:
        X = self.crystal
        R = get_ring(X.p, X.f, X.N + 1)
        coords = [c for x in v for c in R.coords(R.lift(_native(X.ring, x)))]
        return self.module.contains(coords)

    def __contains__(self, v) -> bool:
        return self.contains(v)


def nygaard_lattice(X: FCrystal) -> NygaardLattice:
    p, N = X.p, X.N
    model = "galois"
    RF = _frobenius_matrix(X, X.f, N + 1, model)
    B = _lattice_basis(RF, p, N + 1)
    n = RF.shape[0]
    Bm = _zm(p, N + 1, B) if n else ZpnMatrix.zeros(p, N + 1, 0, 0)
    module = Submodule.from_generators(p, N + 1, n, B.T.tolist() if n else [])
    return NygaardLattice(X, Bm, module)


def _f_over_p_minus_one(RF: np.ndarray, B: np.ndarray, p: int, N: int) -> np.ndarray:
    """(F(b)/p − b) for the basis columns b, at precision N (RF, B at N+1)."""
    q1 = p ** (N + 1)
    img = np.dot(RF.astype(object), B.astype(object)) % q1
    if np.any(img % p):
        raise NotNygaardDomain("F does not map the domain into p·M")
    return (img // p - B) % p**N


def restrict_scalars(X: FCrystal, map_kind: str, lattice: NygaardLattice | None = None, a: int = 0) -> ZpnMatrix:
    """Z/p^N-matrix of a σ-semilinear map on the polynomial basis of GR(p^N, f).

    ``map_kind`` is one of ``"F"``, ``"F-p"``, ``"F-1"``, ``"F/p-1"`` (columns
    indexed by the Nygaard lattice basis) or ``"p^a sigma-1"``.
    """
    p, f, N = X.base
    q = p**N
    n = X.rank * f
    if map_kind == "F/p-1":
        L = nygaard_lattice(X) if lattice is None else lattice
        if L.crystal.base != X.base or L.crystal.rank != X.rank:
            raise BaseMismatch("lattice belongs to another crystal")
        RF1 = _frobenius_matrix(X, f, N + 1, "galois")
        B = L.basis.data.astype(object)
        return _zm(p, N, _f_over_p_minus_one(RF1, B, p, N))
    RF = _frobenius_matrix(X, f, N, "galois")
    eye = np.eye(n, dtype=object)
    if map_kind == "F":
        return _zm(p, N, RF % q)
    if map_kind == "F-p":
        return _zm(p, N, (RF - p * eye) % q)
    if map_kind == "F-1":
        return _zm(p, N, (RF - eye) % q)
    if map_kind in ("p^a sigma-1", "psigma-1"):
        S = _sigma_block(p, f, N, "galois")
        return _zm(p, N, (np.kron(np.eye(X.rank, dtype=object), S) * p**a - eye) % q)
    raise BadParameters(f"unknown map kind {map_kind!r}")


# ---------------------------------------------------------------------------
# syntomic data at one level


@dataclass(frozen=True)
class _LevelCore:
    fprime: int
    model: str
    A: np.ndarray  # F/p − 1 in lattice coordinates, mod p^N
    B: np.ndarray  # lattice basis, mod p^{N+1}
    exponents: tuple[int, ...]
    U: np.ndarray
    U_inv: np.ndarray
    V: np.ndarray


def syntomic_level(X: FCrystal, fprime: int | None = None, model: str = "auto") -> _LevelCore:
    """F/p − 1 from the Nygaard lattice to M over W(F_{p^{f'}}), with its Smith form."""
    p, N = X.p, X.N
    fprime = X.f if fprime is None else fprime
    if fprime % X.f:
        raise BaseMismatch("tower level must be a multiple of f")
    model = _pick_model(X, model)
    RF = _frobenius_matrix(X, fprime, N + 1, model)
    B = _lattice_basis(RF, p, N + 1)
    n = RF.shape[0]
    if n == 0:
        z = np.zeros((0, 0), dtype=object)
        return _LevelCore(fprime, model, z, z, (), z, z, z)
    A = _f_over_p_minus_one(RF, B, p, N)
    sf = smith_form(_zm(p, N, A))
    return _LevelCore(fprime, model, A, B, sf.exponents, sf.U.astype(object), sf.U_inv.astype(object), sf.V.astype(object))


def _kernel_rank(core: _LevelCore, N: int) -> int:
    return sum(1 for e in core.exponents if e >= N)


def _coker_torsion(core: _LevelCore, N: int) -> tuple[int, ...]:
    return tuple(sorted(e for e in core.exponents if 0 < e < N))


def _image_structure(gens: np.ndarray, exps: Sequence[int], p: int, N: int) -> tuple[tuple[int, ...], int]:
    """Elementary divisors of the subgroup of ⊕Z/p^{e_k} spanned by the columns ``gens``.

    Returns (torsion exponents 0 < e < N, number of Z/p^N summands).
    """
    keep = [k for k, e in enumerate(exps) if e > 0]
    if not keep or gens.shape[1] == 0:
        return (), 0
    rows = []
    for k in keep:
        e = exps[k]
        rows.append([(int(x) % p**e) * p ** (N - e) for x in gens[k]])
    sf = smith_form(ZpnMatrix.from_rows(p, N, rows))
    tors = tuple(sorted(N - d for d in sf.exponents if 0 < d < N))
    free = sum(1 for d in sf.exponents if d == 0)
    return tors, free


def _stable_image(core_top: _LevelCore, X: FCrystal, f_small: int, N: int) -> tuple[tuple[int, ...], int]:
    """Structure of the image of coker(level f_small) inside coker(top level)."""
    E = _fixed_basis(X.p, f_small, core_top.fprime, N, core_top.model)
    Efull = np.kron(np.eye(X.rank, dtype=object), E)
    G = np.dot(core_top.U, Efull) % X.p**N
    return _image_structure(G, core_top.exponents, X.p, N)


# ---------------------------------------------------------------------------
# fppf groups along the tower


@dataclass(frozen=True)
class LevelReport:
    level: int
    fprime: int
    kernel_rank: int
    coker_free_rank: int
    raw_torsion: tuple[int, ...]
    stable_torsion: tuple[int, ...]

    @property
    def torsion_dim(self) -> int:
        """F_p-dimension of the stabilized torsion (one per cyclic summand after ⊗F_p)."""
        return len(self.stable_torsion)

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "fprime": self.fprime,
            "kernel_rank": self.kernel_rank,
            "coker_free_rank": self.coker_free_rank,
            "raw_torsion": list(self.raw_torsion),
            "stable_torsion": list(self.stable_torsion),
            "torsion_dim": self.torsion_dim,
        }


@dataclass(frozen=True)
class FppfGroups:
    """H^i_fl free rank and H^{i+1}_fl torsion computed from the degree-i crystal."""

    degree: int | None
    p: int
    N: int
    levels: tuple[LevelReport, ...]
    free_rank: int
    unipotent_a: Fraction
    unipotent_b: Fraction
    finite_torsion: tuple[int, ...]
    exponent_bound: int
    law_exact: bool
    stable: bool
    stabilization_levels: tuple[int, int]
    model: str
    label: str = ""
    warnings: tuple[str, ...] = ()

    @property
    def divisors(self) -> tuple[int, ...]:
        return tuple(self.p**e for e in self.finite_torsion)

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "label": self.label,
            "p": self.p,
            "N": self.N,
            "free_rank": self.free_rank,
            "unipotent_a": str(self.unipotent_a),
            "unipotent_b": str(self.unipotent_b),
            "finite_torsion_divisors": list(self.divisors),
            "exponent_bound": self.exponent_bound,
            "law_exact": self.law_exact,
            "stable": self.stable,
            "stabilization_levels": list(self.stabilization_levels),
            "model": self.model,
            "levels": [lv.to_dict() for lv in self.levels],
            "warnings": list(self.warnings),
        }


def _blocks(X: FCrystal) -> list[list[int]]:
    """Index sets of the F-stable coordinate blocks (components of Φ's support)."""
    r = X.rank
    R = X.guard_ring
    parent = list(range(r))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a in range(r):
        for b in range(r):
            if not R.is_zero(X.phi[a][b]):
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[ra] = rb
    groups: dict = {}
    for i in range(r):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values())


def _sub_crystal(X: FCrystal, idx: Sequence[int]) -> FCrystal:
    return FCrystal(X.p, X.f, X.N, tuple(tuple(X.phi[a][b] for b in idx) for a in idx), X.label)


def _default_stabilization(p: int, N: int, top: int, model: str) -> int:
    # trace-type quotients die after an extension of degree p^N when the tower
    # step is p; for odd p the 2-power tower never kills them, so one extra
    # level only confirms the torsion structure
    if model == "normal" and p == 2:
        return top + N
    return top + 1


def fppf_groups(
    X: FCrystal,
    tower_levels: int = 3,
    degree: int | None = None,
    model: str = "auto",
    stabilize_at: int | None = None,
) -> FppfGroups:
    """Kernel and cokernel of F/p − 1 on the Nygaard lattice over the tower f·2^j.

    The free rank is the number of vanishing Smith invariants at the top
    level.  Torsion at level j is read from the image of coker(level j) in
    coker(level T) for T = ``stabilize_at`` and T + 1; the two must agree.
    The unipotent law dim = a·f' + b is fitted on the last two levels.
    """
    p, N = X.p, X.N
    model = _pick_model(X, model)
    J = tower_levels
    T = _default_stabilization(p, N, J, model) if stabilize_at is None else stabilize_at
    if T < J:
        raise BadParameters("stabilization level must be at least the top tower level")
    warnings: list[str] = []
    blocks: dict = {}
    for idx in _blocks(X):
        sub = _sub_crystal(X, idx)
        blocks[sub.phi] = (sub, blocks.get(sub.phi, (sub, 0))[1] + 1)
    per_level = []
    stable = True
    for j in range(J + 1):
        fj = X.f * 2**j
        kr = cf = 0
        raw: list[int] = []
        st: list[int] = []
        for sub, mult in blocks.values():
            core = _cached_level(sub, fj, model)
            k = _kernel_rank(core, N)
            kr += mult * k
            cf += mult * (k + (sub.rank * fj - len(core.exponents)))
            raw += list(_coker_torsion(core, N)) * mult
            t0, _ = _stable_image(_cached_level(sub, X.f * 2**T, model), sub, fj, N)
            t1, _ = _stable_image(_cached_level(sub, X.f * 2 ** (T + 1), model), sub, fj, N)
            if t0 != t1:
                stable = False
                warnings.append(f"torsion image at level {j} changes between levels {T} and {T + 1}")
            st += list(t1) * mult
        per_level.append(LevelReport(j, fj, kr, cf, tuple(sorted(raw)), tuple(sorted(st))))
    last = per_level[-1]
    if J >= 1:
        prev = per_level[-2]
        if prev.kernel_rank != last.kernel_rank:
            stable = False
            warnings.append(TowerUnstable.__name__ + ": kernel rank differs on the last two levels")
        a = Fraction(last.torsion_dim - prev.torsion_dim, last.fprime - prev.fprime)
        b = last.torsion_dim - a * last.fprime
    else:
        a, b = Fraction(0), Fraction(last.torsion_dim)
    law = all(lv.torsion_dim == a * lv.fprime + b for lv in per_level if lv.level >= 1)
    if a < 0:
        warnings.append("negative growth coefficient")
    finite = last.stable_torsion if a == 0 else ()
    bound = max((e for lv in per_level for e in lv.stable_torsion), default=0)
    return FppfGroups(
        degree, p, N, tuple(per_level), last.kernel_rank, a, b, finite, bound, law, stable, (T, T + 1), model, X.label, tuple(warnings)
    )


_LEVEL_CACHE: dict = {}


def _cached_level(X: FCrystal, fprime: int, model: str) -> _LevelCore:
    key = (X.base, X.phi, fprime, model)
    core = _LEVEL_CACHE.get(key)
    if core is None:
        core = syntomic_level(X, fprime, model)
        if len(_LEVEL_CACHE) > 4096:
            _LEVEL_CACHE.clear()
        _LEVEL_CACHE[key] = core
    return core


def tower_cokernel(X: FCrystal, map_kind: str = "F-p", tower_levels: int = 3, model: str = "auto") -> list[CokernelDivisors]:
    """Cokernel divisors of F − p (or F − 1) at each level f·2^j."""
    p, N = X.p, X.N
    model = _pick_model(X, model)
    out = []
    for j in range(tower_levels + 1):
        fj = X.f * 2**j
        RF = _frobenius_matrix(X, fj, N, model)
        n = RF.shape[0]
        shift = p if map_kind == "F-p" else 1 if map_kind == "F-1" else None
        if shift is None:
            raise BadParameters(f"unknown map kind {map_kind!r}")
        M = (RF - shift * np.eye(n, dtype=object)) % p**N
        out.append(cokernel_divisors(_zm(p, N, M)))
    return out


# ---------------------------------------------------------------------------
# Newton polygons


@dataclass(frozen=True)
class NewtonPolygon:
    slopes: tuple[tuple[Fraction, int], ...]

    @property
    def rank(self) -> int:
        return sum(m for _, m in self.slopes)

    @property
    def total(self) -> Fraction:
        return sum((s * m for s, m in self.slopes), Fraction(0))

    def as_list(self) -> list[tuple[Fraction, int]]:
        return list(self.slopes)

    def to_dict(self) -> dict:
        return {"slopes": [[str(s), m] for s, m in self.slopes]}


def _lower_hull(points: list[tuple[int, int]]) -> list[tuple[int, int]]:
    hull: list[tuple[int, int]] = []
    for pt in sorted(points):
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (y2 - y1) * (pt[0] - x1) >= (pt[1] - y1) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append(pt)
    return hull


def newton_polygon(X: FCrystal) -> NewtonPolygon:
    """Slopes of F from the characteristic polynomial of the linear map F^f."""
    # Φ carries a guard digit, so valuations are read at precision N+1
    Y = X.at_prec(X.N + 1)
    R, r, N, f = Y.ring, Y.rank, Y.N, Y.f
    if r == 0:
        return NewtonPolygon(())
    cp = charpoly(R, Y.frobenius_power_matrix())
    vals = [R.val(c) for c in cp]
    if R.is_zero(cp[r]):
        raise PrecisionInsufficient("det F^f vanishes modulo p^N; raise the precision")
    known = [(k, v) for k, v in enumerate(vals) if not R.is_zero(cp[k])]
    hull = _lower_hull(known)
    for k, v in enumerate(vals):
        if R.is_zero(cp[k]):
            for (x1, y1), (x2, y2) in zip(hull, hull[1:]):
                if x1 <= k <= x2 and Fraction(y1) + Fraction(y2 - y1, x2 - x1) * (k - x1) > N:
                    raise PrecisionInsufficient(f"coefficient c_{k} vanishes modulo p^N below the hull")
    slopes: list[tuple[Fraction, int]] = []
    for (x1, y1), (x2, y2) in zip(hull, hull[1:]):
        s = Fraction(y2 - y1, (x2 - x1) * f)
        if slopes and slopes[-1][0] == s:
            slopes[-1] = (s, slopes[-1][1] + x2 - x1)
        else:
            slopes.append((s, x2 - x1))
    return NewtonPolygon(tuple(slopes))


# ---------------------------------------------------------------------------
# constructive preimages for F − p on pure crystals


@dataclass(frozen=True)
class CokerWitness:
    case: int
    target: tuple
    seed: tuple
    certificate: tuple
    terms: int
    verified: bool

    def to_dict(self) -> dict:
        return {
            "case": self.case,
            "terms": self.terms,
            "verified": self.verified,
            "target": [str(x) for x in self.target],
            "certificate": [str(x) for x in self.certificate],
        }


@dataclass(frozen=True)
class DivisorReport:
    divisors: CokernelDivisors
    reason: str

    def to_dict(self) -> dict:
        return {"divisors": list(self.divisors.divisors), "free": self.divisors.free, "reason": self.reason}


def _vec_val(R, v) -> int:
    return min((R.val(x) for x in v), default=R.N)


def _apply_F_minus_p(X: FCrystal, v):
    R = X.ring
    Fv = X.apply(v)
    return tuple(R.sub(a, R.smul(b, X.p)) for a, b in zip(Fv, v))


def coker_F_minus_p_witness(X: FCrystal, target: Sequence) -> CokerWitness | DivisorReport:
    """Solve (F − p)(x) = target on a crystal of a single slope λ ≠ 1.

    λ > 1: x = Σ_{i≥0} F^i(a)/p^i with a = −target/p, needs target ∈ p^r·M.
    λ < 1: x = Σ_{i≥1} F^{−i}(p^{i−1}·target), needs target ∈ p^s·M.
    Here λ = s/r in lowest terms.  Slope 1 or several slopes give the cokernel
    divisor report instead.
    """
    p, f, N = X.base
    R = X.ring
    t = tuple(_native(R, x) for x in target)
    if len(t) != X.rank:
        raise BadParameters("target length differs from the rank")
    npoly = newton_polygon(X)
    if len(npoly.slopes) != 1 or npoly.slopes[0][0] == 1:
        reason = "slope 1" if len(npoly.slopes) == 1 else "several slopes"
        return DivisorReport(cokernel_divisors(restrict_scalars(X, "F-p")), reason)
    lam = npoly.slopes[0][0]
    s, r = lam.numerator, lam.denominator
    if all(R.is_zero(x) for x in t):
        return CokerWitness(2 if lam > 1 else 3, t, t, t, 0, True)
    v = _vec_val(R, t)
    if lam > 1:
        if v < r:
            raise CaseInapplicable(f"target must lie in p^{r}·M")
        icap = math.ceil(Fraction(N + r, 1) / (lam - 1)) + r
        W = N + icap + 1
        Y = X.at_prec(W)
        RW = Y.ring
        a = tuple(RW.neg(RW.divp(RW.lift(x), 1)) for x in t)
        acc = a
        cur = a
        for i in range(1, icap + 1):
            cur = Y.apply(cur)
            acc = tuple(RW.add(x, RW.divp(y, i)) for x, y in zip(acc, cur))
        x = tuple(RW.reduce(c, R) for c in acc)
        seed = tuple(RW.reduce(c, R) for c in a)
        case = 2
    else:
        if v < s:
            raise CaseInapplicable(f"target must lie in p^{s}·M")
        icap = math.ceil(Fraction(N + r + 1, 1) / (1 - lam)) + r
        RF0 = _frobenius_matrix(X, f, N, "galois")
        emax = max((e for e in smith_form(_zm(p, N, RF0)).exponents if e < N), default=0)
        W = N + (icap + 1) * max(emax, 1) + 1
        Y = X.at_prec(W)
        RW = Y.ring
        RFW = _zm(p, W, _frobenius_matrix(Y, f, W, "galois"))

        def finv(y):
            coords = [c for z in y for c in RW.coords(z)]
            try:
                sol = preimage(RFW, coords)
            except NoSolution as exc:
                raise CaseInapplicable("F^{-1} left the lattice; target outside the applicable sublattice") from exc
            return tuple(RW.from_coords(sol[k * f : (k + 1) * f]) for k in range(X.rank))

        z = finv(tuple(RW.lift(x) for x in t))
        acc = z
        for _ in range(2, icap + 1):
            z = finv(tuple(RW.smul(c, p) for c in z))
            acc = tuple(RW.add(a_, b_) for a_, b_ in zip(acc, z))
        x = tuple(RW.reduce(c, R) for c in acc)
        seed = t
        case = 3
    ok = _apply_F_minus_p(X, x) == t
    return CokerWitness(case, t, seed, x, icap, ok)


# ---------------------------------------------------------------------------
# isogenies and the Brauer profile


@dataclass(frozen=True)
class IsogenyReport:
    n: int
    weight: int
    scalar: int
    fprime: int
    commutes: bool
    kernel_action_ok: bool
    coker_action_ok: bool
    kernel_rank: int
    torsion: tuple[int, ...]
    kernel_scalar: int | None
    annihilates_torsion: bool

    @property
    def ok(self) -> bool:
        return self.commutes and self.kernel_action_ok and self.coker_action_ok

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "weight": self.weight,
            "scalar": self.scalar,
            "fprime": self.fprime,
            "commutes": self.commutes,
            "kernel_action_ok": self.kernel_action_ok,
            "coker_action_ok": self.coker_action_ok,
            "kernel_rank": self.kernel_rank,
            "torsion": list(self.torsion),
            "kernel_scalar": self.kernel_scalar,
            "annihilates_torsion": self.annihilates_torsion,
        }


def isogeny_action_check(
    X: FCrystal, n: int, weight: int, fprime: int | None = None, endo: Sequence[Sequence[int]] | None = None, model: str = "auto"
) -> IsogenyReport:
    """Induced action of an endomorphism commuting with F on ker and coker of F/p − 1.

    ``endo`` defaults to [n] acting on H^i as n^i·I.  The check lifts the
    action to the Nygaard lattice (solving B·T_L = T_M·B at precision N+1),
    verifies A·T_L = T_M·A, and compares the induced maps on the kernel
    generators and on the Smith coordinates of the cokernel with n^i.
    """
    p, N = X.p, X.N
    q = p**N
    fprime = X.f if fprime is None else fprime
    model = _pick_model(X, model)
    core = syntomic_level(X, fprime, model)
    dim = X.rank * fprime
    scalar = pow(n, weight, q)
    if endo is None:
        TM_small = np.eye(X.rank, dtype=object) * n**weight
    else:
        TM_small = np.array(endo, dtype=object)
    TM = np.kron(TM_small, np.eye(fprime, dtype=object))
    # commutation with F at precision N+1
    RF = _frobenius_matrix(X, fprime, N + 1, model)
    q1 = p ** (N + 1)
    commutes = bool(np.all((np.dot(RF, TM) - np.dot(TM, RF)) % q1 == 0))
    if dim == 0:
        return IsogenyReport(n, weight, scalar, fprime, commutes, True, True, 0, (), None, True)
    Bm = _zm(p, N + 1, core.B)
    TB = np.dot(TM, core.B) % q1
    TL = np.zeros((dim, dim), dtype=object)
    for c in range(dim):
        TL[:, c] = preimage(Bm, [int(x) for x in TB[:, c]])
    A = core.A
    commutes = commutes and bool(np.all((np.dot(A, TL) - np.dot(TM, A)) % q == 0))
    # kernel: compare in M-coordinates (lattice coordinates are defined up to ker B)
    ker = kernel(_zm(p, N, A))
    K = np.array(ker.generators(), dtype=object).T if ker.generators() else np.zeros((dim, 0), dtype=object)
    BK = np.dot(core.B % q, K) % q
    kernel_ok = bool(np.all((np.dot(TM, BK) - scalar * BK) % q == 0))
    kernel_scalar = None
    free_cols = [k for k in range(len(core.exponents)) if core.exponents[k] >= N]
    if free_cols:
        v = core.V[:, free_cols[0]]
        w = np.dot(core.B % q, v) % q
        img = np.dot(TM, w) % q
        idx = next((i for i in range(dim) if w[i] % p), None)
        if idx is not None:
            kernel_scalar = int(img[idx] * pow(int(w[idx]), -1, q) % q)
    # cokernel: Q = U·T_M·U^{-1} acting on ⊕Z/p^{e_k}
    Q = np.dot(np.dot(core.U, TM), core.U_inv) % q
    exps = list(core.exponents) + [N] * (dim - len(core.exponents))
    coker_ok = True
    for k in range(dim):
        e = exps[k]
        if e == 0:
            continue
        for c in range(dim):
            if exps[c] == 0:
                continue
            want = scalar if k == c else 0
            if (int(Q[k, c]) - want) % p**e:
                coker_ok = False
    tors = _coker_torsion(core, N)
    annihilates = all((scalar * 1) % p**e == 0 for e in tors)
    return IsogenyReport(n, weight, scalar, fprime, commutes, kernel_ok, coker_ok, _kernel_rank(core, N), tors, kernel_scalar, annihilates)


@dataclass(frozen=True)
class BrauerProfile:
    a: int
    finite_exponent_bound: int
    h2_free_rank: int
    ns_rank: int

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "finite_exponent_bound": self.finite_exponent_bound,
            "h2_free_rank": self.h2_free_rank,
            "ns_rank": self.ns_rank,
        }


def brauer_profile(h2: FppfGroups, h3: FppfGroups, ns_rank: int) -> BrauerProfile:
    """Corank of the divisible part and the exponent bound of the finite part.

    ``h2`` carries the degree-2 free rank; ``h3`` is the report whose torsion
    is the degree-3 torsion (for a single H² crystal both are the same object).
    """
    if ns_rank < 0:
        raise BadParameters("Néron–Severi rank must be nonnegative")
    if ns_rank > h2.free_rank:
        raise NegativeDivisibleRank(f"ns_rank {ns_rank} exceeds the H² free rank {h2.free_rank}")
    return BrauerProfile(h2.free_rank - ns_rank, h3.exponent_bound, h2.free_rank, ns_rank)
