"""Cyclic truncations of the quantum az+b generators.

Each tensor leg is l2(Z_N) with exponent labels on the centered branch
[-N/2, N/2); s is the cyclic shift, m the branch modulus diag(q^r).  All
operators stay in factored form:

* weighted permutations (products of per-leg s- and m-powers),
* phase operators, diagonal after a DFT on their shift legs (chi and the
  twisting bicharacter),
* the quantum exponential of b-hat tensor b, which conserves five integer
  combinations of the seven legs it touches mod N and therefore block
  diagonalizes into N^2-dimensional sectors, each handled by dense
  functional calculus with eigenvalue snapping to the q-lattice.

Vectors are kept sparse as (index array, value array) pairs; wrap-around
contamination is controlled by measuring everything on interior-band
vectors only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.linalg

__all__ = [
    "SparseVec",
    "MonoOp",
    "SumOp",
    "PhaseOp",
    "TruncatedRep",
    "build_truncated",
    "qexp",
    "qexp_op",
    "chi_op",
    "omega_x_op",
    "build_W",
    "twisted_numeric_check",
    "element_matrix_oracle",
    "band_basis_vector",
    "unitarity_band_report",
    "delta_a_band_report",
    "pentagon_band_report",
    "BandReport",
]

SNAP_LOG_TOL = 0.1
POLE_TOL = 1e-6


def _wrap(r: np.ndarray, n: int) -> np.ndarray:
    return (r + n // 2) % n - n // 2


_SHEAR_CACHE: dict = {}


def _shear_map(n: int) -> np.ndarray:
    """Flat-position map (r1, r2) -> (y = r1 - r2 wrapped, r2) on the grid."""
    if n in _SHEAR_CACHE:
        return _SHEAR_CACHE[n]
    labels = np.arange(n) - n // 2
    r1 = np.repeat(labels, n)
    r2 = np.tile(labels, n)
    y = _wrap(r1 - r2, n)
    _SHEAR_CACHE[n] = (y + n // 2) * n + (r2 + n // 2)
    return _SHEAR_CACHE[n]


@dataclass
class SparseVec:
    """Sparse vector on a tensor power of l2(Z_N), branch-labeled indices."""

    n: int
    legs: int
    idx: np.ndarray  # (rows, legs) int16 branch labels
    val: np.ndarray  # (rows,) complex

    @staticmethod
    def basis(n: int, labels) -> "SparseVec":
        idx = np.asarray(labels, dtype=np.int16).reshape(1, -1)
        return SparseVec(n, idx.shape[1], idx, np.ones(1, dtype=complex))

    def compress(self, tol: float = 0.0) -> "SparseVec":
        if len(self.val) == 0:
            return self
        order = np.lexsort(self.idx.T[::-1])
        idx = self.idx[order]
        val = self.val[order]
        change = np.any(idx[1:] != idx[:-1], axis=1)
        starts = np.concatenate(([0], np.nonzero(change)[0] + 1))
        summed = np.add.reduceat(val, starts)
        keep_idx = idx[starts]
        if tol > 0:
            big = np.abs(summed) > tol
            keep_idx, summed = keep_idx[big], summed[big]
        else:
            nz = summed != 0
            keep_idx, summed = keep_idx[nz], summed[nz]
        return SparseVec(self.n, self.legs, keep_idx, summed)

    def __add__(self, other: "SparseVec") -> "SparseVec":
        return SparseVec(
            self.n,
            self.legs,
            np.vstack([self.idx, other.idx]),
            np.concatenate([self.val, other.val]),
        ).compress()

    def __sub__(self, other: "SparseVec") -> "SparseVec":
        return self + other.scale(-1.0)

    def scale(self, z: complex) -> "SparseVec":
        return SparseVec(self.n, self.legs, self.idx, z * self.val)

    def norm(self) -> float:
        return float(np.linalg.norm(self.val))

    def inner(self, other: "SparseVec") -> complex:
        """<self, other>, linear in the first argument."""
        a = self.compress()
        b = other.compress()
        ka = {tuple(row): v for row, v in zip(a.idx, a.val)}
        total = 0.0 + 0.0j
        for row, v in zip(b.idx, b.val):
            t = tuple(row)
            if t in ka:
                total += ka[t] * np.conj(v)
        return complex(total)


@dataclass
class MonoOp:
    """Weighted permutation: per leg, e_r -> c q^(p r) q^(p' r') e_r' with
    r' = r + sigma wrapped on the branch.

    ``powers`` are modulus exponents evaluated at the incoming label
    (s^sigma m^p order), ``powers_after`` at the wrapped outgoing label
    (m^p' s^sigma order); both are needed to represent the composite
    generators exactly, wrap rows included.
    """

    n: int
    q: float
    shifts: tuple
    powers: tuple
    coeff: complex = 1.0
    powers_after: tuple | None = None

    def _pa(self) -> tuple:
        return self.powers_after if self.powers_after is not None else (0,) * len(self.shifts)

    def apply(self, vec: SparseVec) -> SparseVec:
        idx = vec.idx
        lq = math.log(self.q)
        weight = np.full(len(vec.val), self.coeff, dtype=complex)
        new_idx = idx.copy()
        for leg, (sh, pw, pa) in enumerate(zip(self.shifts, self.powers, self._pa())):
            if pw != 0:
                weight = weight * np.exp(float(pw) * lq * idx[:, leg].astype(float))
            if sh:
                new_idx[:, leg] = _wrap(idx[:, leg].astype(np.int64) + sh, self.n).astype(np.int16)
            if pa != 0:
                weight = weight * np.exp(float(pa) * lq * new_idx[:, leg].astype(float))
        return SparseVec(vec.n, vec.legs, new_idx, vec.val * weight).compress()

    def adjoint(self) -> "MonoOp":
        # per leg: (m^pa s^sigma m^p)^H = m^p s^(-sigma) m^pa
        shifts = tuple(-s for s in self.shifts)
        return MonoOp(self.n, self.q, shifts, self._pa(), np.conj(self.coeff), self.powers)

    def embed(self, total_legs: int, offset: int) -> "MonoOp":
        shifts = [0] * total_legs
        powers = [0] * total_legs
        pafter = [0] * total_legs
        for i, (sh, pw, pa) in enumerate(zip(self.shifts, self.powers, self._pa())):
            shifts[offset + i] = sh
            powers[offset + i] = pw
            pafter[offset + i] = pa
        return MonoOp(self.n, self.q, tuple(shifts), tuple(powers), self.coeff, tuple(pafter))


@dataclass
class SumOp:
    """Finite sum of weighted permutations (b-hat needs two)."""

    terms: list

    def apply(self, vec: SparseVec) -> SparseVec:
        out = None
        for t in self.terms:
            piece = t.apply(vec)
            out = piece if out is None else out + piece
        return out

    def adjoint(self) -> "SumOp":
        return SumOp([t.adjoint() for t in self.terms])

    def embed(self, total_legs: int, offset: int) -> "SumOp":
        return SumOp([t.embed(total_legs, offset) for t in self.terms])


def _dft_leg(vec: SparseVec, leg: int, inverse: bool) -> SparseVec:
    """Exact N-point transform on one leg of a sparse vector.

    Convention: F[j, r] = omega^(-j r)/sqrt(N), so F^H s F = diag(omega^j);
    mode labels use the same centered branch as positions.
    """
    n = vec.n
    if len(vec.val) == 0:
        return vec
    others = [c for c in range(vec.legs) if c != leg]
    order = np.lexsort([vec.idx[:, c] for c in reversed(others)]) if others else np.arange(len(vec.val))
    idx = vec.idx[order]
    val = vec.val[order]
    if others:
        key = idx[:, others]
        change = np.any(key[1:] != key[:-1], axis=1)
        starts = np.concatenate(([0], np.nonzero(change)[0] + 1))
    else:
        starts = np.array([0])
    ends = np.concatenate((starts[1:], [len(val)]))
    labels = np.arange(n) - n // 2
    omega = np.exp(-2j * np.pi / n)
    fmat = omega ** np.outer(labels, labels) / np.sqrt(n)
    if inverse:
        fmat = fmat.conj().T
    out_idx = []
    out_val = []
    for s0, e0 in zip(starts, ends):
        rows = idx[s0:e0]
        dense = np.zeros(n, dtype=complex)
        dense[rows[:, leg].astype(np.int64) + n // 2] = val[s0:e0]
        trans = fmat @ dense
        nz = np.abs(trans) > 1e-300
        if not nz.any():
            continue
        base = np.repeat(rows[:1], int(nz.sum()), axis=0)
        base[:, leg] = labels[nz]
        out_idx.append(base)
        out_val.append(trans[nz])
    if not out_idx:
        return SparseVec(n, vec.legs, np.zeros((0, vec.legs), dtype=np.int16), np.zeros(0, complex))
    return SparseVec(n, vec.legs, np.vstack(out_idx).astype(np.int16), np.concatenate(out_val))


@dataclass
class PhaseOp:
    """Unitary that is diagonal after a DFT on its shift legs.

    ``diag_fn(mixed)`` receives the index array in the mixed basis
    (Fourier mode labels on ``fourier_legs``, positions elsewhere) and
    returns unimodular values.  (Used for the small dense chi forms; the W
    engine uses the exact controlled-shift realization below.)
    """

    n: int
    fourier_legs: tuple
    diag_fn: object
    conjugate: bool = False

    def apply(self, vec: SparseVec) -> SparseVec:
        out = vec
        for leg in self.fourier_legs:
            out = _dft_leg(out, leg, inverse=False)
        phase = self.diag_fn(out.idx)
        if self.conjugate:
            phase = np.conj(phase)
        out = SparseVec(out.n, out.legs, out.idx, out.val * phase)
        for leg in self.fourier_legs:
            out = _dft_leg(out, leg, inverse=True)
        return out.compress(tol=1e-300)

    def adjoint(self) -> "PhaseOp":
        return PhaseOp(self.n, self.fourier_legs, self.diag_fn, not self.conjugate)


@dataclass
class CtrlShiftOp:
    """exp(i K Theta) for integer modulus exponents K: a controlled shift.

    ``control`` reads the integer K = sum of coefficients times branch
    labels; each target leg is then cyclically shifted by shift-coefficient
    times K.  This realizes phase-operator powers like Ph(a)^K exactly as a
    lattice permutation -- the q-lattice form of the chi bicharacter --
    and, unlike a DFT-diagonal phase, satisfies the defining conjugation
    identities up to wrap rows only.  Control and target legs must be
    disjoint (they are, for chi and the twisting bicharacter).
    """

    n: int
    control: tuple
    shifts: tuple
    sign: int = 1

    def __post_init__(self):
        for leg, (c, s) in enumerate(zip(self.control, self.shifts)):
            if c != 0 and s != 0:
                raise ValueError("control legs must be distinct from shifted legs")

    def apply(self, vec: SparseVec) -> SparseVec:
        idx = vec.idx.astype(np.int64)
        k = len(self.control)
        ctrl = idx[:, :k] @ np.asarray(self.control, dtype=np.int64)
        new_idx = idx.copy()
        for leg, s in enumerate(self.shifts):
            if s:
                new_idx[:, leg] = _wrap(idx[:, leg] + self.sign * s * ctrl, self.n)
        return SparseVec(vec.n, vec.legs, new_idx.astype(np.int16), vec.val.copy())

    def adjoint(self) -> "CtrlShiftOp":
        return CtrlShiftOp(self.n, self.control, self.shifts, -self.sign)


@dataclass
class OpChain:
    """Composition of operators, rightmost applied first."""

    parts: list

    def apply(self, vec: SparseVec) -> SparseVec:
        out = vec
        for p in reversed(self.parts):
            out = p.apply(out)
        return out

    def adjoint(self) -> "OpChain":
        return OpChain([p.adjoint() for p in reversed(self.parts)])


# ---------------------------------------------------------------------------
# quantum exponential


def qexp(q: float, z: complex, terms: int | None = None) -> complex:
    """F_q(z) as a truncated product of (1 + q^(2k) conj z) / (1 + q^(2k) z).

    Near-poles |1 + q^(2k) z| < POLE_TOL are rejected; the factor count is
    chosen so the dropped tail has q^(2 terms) |z| < 1e-14.
    """
    z = complex(z)
    if terms is None:
        terms = 30
        if abs(z) > 1:
            terms += int(math.log(abs(z)) / (2 * math.log(1 / q))) + 1
        while (q ** (2 * terms)) * abs(z) >= 1e-14:
            terms += 10
    out = 1.0 + 0.0j
    for k in range(terms):
        den = 1 + (q ** (2 * k)) * z
        if abs(den) < POLE_TOL:
            raise ValueError(
                f"quantum exponential near a pole at factor {k} (|den|={abs(den):.2e})"
            )
        out *= (1 + (q ** (2 * k)) * np.conj(z)) / den
    return out


def _snap_to_lattice(q: float, lam: complex) -> tuple[complex, bool]:
    """Snap |lam| to the nearest q^k when within SNAP_LOG_TOL in log-q units."""
    if abs(lam) < 1e-13:
        return 0.0, True
    logmod = math.log(abs(lam)) / math.log(q)
    k = round(logmod)
    if abs(logmod - k) <= SNAP_LOG_TOL:
        return (q**k) * lam / abs(lam), True
    return lam, False


def qexp_op(q: float, x, tol: float = 1e-8, strict: bool = True):
    """Operator quantum exponential via dense functional calculus.

    The spectrum is snapped onto the q-lattice; off-lattice eigenvalues
    raise in strict mode, near-poles always raise.
    """
    from ..linalg import functional_calculus

    def f(lam: complex) -> complex:
        snapped, ok = _snap_to_lattice(q, lam)
        if not ok and strict:
            raise ValueError(f"eigenvalue {lam} is not near the q-lattice")
        return qexp(q, snapped)

    return functional_calculus(x, f, tol)


# ---------------------------------------------------------------------------
# the representation


@dataclass
class TruncatedRep:
    """Truncated az+b generators on (l2(Z_N))^4 in factored form."""

    n: int
    q: float
    band: int

    def __post_init__(self):
        if self.n % 2 or not (4 <= self.n <= 32):
            raise ValueError("truncation size must be even and in [4, 32]")
        n, q = self.n, self.q
        mono = lambda shifts, powers, c=1.0: MonoOp(n, q, tuple(shifts), tuple(powers), c)
        self.a = mono((0, -1, 0, 1), (1, 0, 0, 0))
        self.b = mono((1, 0, 1, 0), (0, 1, 0, 0))
        self.u = mono((0, -1, 0, 1), (0, 0, 0, 0))
        self.v = mono((1, 0, 1, 0), (0, 0, 0, 0))
        self.abs_a = mono((0, 0, 0, 0), (1, 0, 0, 0))
        self.abs_b = mono((0, 0, 0, 0), (0, 1, 0, 0))
        self.a_hat = mono((-1, 0, 0, 0), (0, 0, 0, 1))
        # b-hat = s* m (x) (-m^-1 (x) m^-1 s* + m^-1 s* (x) s*) (x) s;
        # the m^-1 s* legs evaluate the modulus after the shift.
        t1 = MonoOp(n, q, (-1, 0, -1, 1), (1, -1, 0, 0), -1.0, (0, 0, -1, 0))
        t2 = MonoOp(n, q, (-1, -1, -1, 1), (1, 0, 0, 0), 1.0, (0, -1, 0, 0))
        self.b_hat = SumOp([t1, t2])

    def interior(self, idx: np.ndarray, band: int | None = None) -> np.ndarray:
        d = self.band if band is None else band
        lo, hi = -self.n // 2 + d, self.n // 2 - d
        return np.all((idx >= lo) & (idx < hi), axis=1)

    def monomial_op(self, pa, pb, k: int, l: int, coeff: complex = 1.0) -> MonoOp:
        """|a|^pa |b|^pb v^k u^l as a weighted permutation on four legs.

        The shifts v^k u^l act first, then the diagonal at the shifted
        labels; exact on wrap rows too.
        """
        shifts = (k, -l, k, l)
        return MonoOp(self.n, self.q, shifts, (0, 0, 0, 0), coeff, (pa, pb, 0, 0))


def build_truncated(n: int, q: float = 0.5, band: int | None = None) -> TruncatedRep:
    return TruncatedRep(int(n), float(q), band if band is not None else int(n) // 4)


def chi_op(rep: TruncatedRep) -> OpChain:
    """chi(a-hat tensor 1, 1 tensor a) = exp(i K2 Theta1) exp(i K1 Theta2).

    K1 = r4 (modulus exponent of a-hat), K2 = r5 (of a); the exponentials
    of integer-K times phase-angle are exact controlled powers of the phase
    unitaries Ph(a-hat) = s*_1 and Ph(a) = s*_6 s_8.
    """
    n = rep.n
    zero = (0,) * 8
    c1 = list(zero)
    s1 = list(zero)
    c1[4] = 1  # K2 = r5
    s1[0] = -1  # Ph(a-hat)^(K2): r1 -> r1 - K2
    c2 = list(zero)
    s2 = list(zero)
    c2[3] = 1  # K1 = r4
    s2[5] = -1  # Ph(a)^(K1): r6 -> r6 - K1
    s2[7] = 1  # and r8 -> r8 + K1
    return OpChain([CtrlShiftOp(n, tuple(c1), tuple(s1)), CtrlShiftOp(n, tuple(c2), tuple(s2))])


def omega_x_op(rep: TruncatedRep, x: int) -> OpChain:
    """Omega_x = Psi_x(a tensor 1, 1 tensor a) as exact controlled shifts.

    Psi_x(z1, z2) = exp(i x (K1 Theta2 - K2 Theta1)) with K1 = r1, K2 = r5;
    Ph(a tensor 1) = s*_2 s_4 and Ph(1 tensor a) = s*_6 s_8.
    """
    n = rep.n
    zero = (0,) * 8
    c1 = list(zero)
    s1 = list(zero)
    c1[0] = 1  # K1 = r1
    s1[5] = -x  # Ph(1 x a)^(x K1)
    s1[7] = x
    c2 = list(zero)
    s2 = list(zero)
    c2[4] = 1  # K2 = r5
    s2[1] = x  # Ph(a x 1)^(-x K2): (s*_2 s_4)^(-x K2)
    s2[3] = -x
    return OpChain([CtrlShiftOp(n, tuple(c1), tuple(s1)), CtrlShiftOp(n, tuple(c2), tuple(s2))])


# ---------------------------------------------------------------------------
# sector functional calculus for F_q(b-hat tensor b)


class QExpSectorOp:
    """F_q(b-hat tensor b) in sector-block form.

    The two permutation summands share five conserved coordinates mod N on
    the seven legs they act on; each congruence class is an N^2 block with
    free coordinates (r1, r2).  In the sheared coordinates (y, r2) with
    y = r1 - r2 the two summands become

        A = -q^alpha diag(q^(-r2)) (x) S_y,   B = q^beta S_r2 (x) diag(q^y),

    a q^2-commuting pair of normal operators with separated legs, and the
    exponential law for the quantum exponential gives
    F_q(b-hat (x) b) = F_q(A) F_q(B).  Each factor is diagonal in a mixed
    position/Fourier basis with exactly unimodular values on the snapped
    q-lattice, so the truncated F is exactly unitary; phase-pi lattice
    points (the poles of F_q) are set to 1 and counted as excluded.
    """

    def __init__(self, rep: TruncatedRep, offset: int = 0, conjugate: bool = False,
                 cache: dict | None = None, stats: dict | None = None):
        self.rep = rep
        self.offset = offset
        self.conjugate = conjugate
        self.cache = cache if cache is not None else {}
        self.excluded: dict = {}
        self.off_lattice: dict = {}
        self.stats = stats if stats is not None else {"pole_mass": 0.0}

    @property
    def pole_mass(self) -> float:
        return self.stats["pole_mass"]

    @pole_mass.setter
    def pole_mass(self, value: float):
        self.stats["pole_mass"] = value

    def reset_pole_mass(self) -> None:
        self.stats["pole_mass"] = 0.0

    def _signature(self, idx: np.ndarray) -> np.ndarray:
        o = self.offset
        n = self.rep.n
        r = idx.astype(np.int64)
        return np.stack(
            [
                (r[:, o] - r[:, o + 2]) % n,
                (r[:, o] + r[:, o + 3]) % n,
                (r[:, o] + r[:, o + 4]) % n,
                (r[:, o + 4] - r[:, o + 6]) % n,
                r[:, o + 5] % n,
            ],
            axis=1,
        )

    def _sector_legs(self, c: tuple) -> np.ndarray:
        n = self.rep.n
        labels = np.arange(n) - n // 2
        r1 = np.repeat(labels, n)
        r2 = np.tile(labels, n)
        r3 = _wrap(r1 - c[0], n)
        r4 = _wrap(c[1] - r1, n)
        r5 = _wrap(c[2] - r1, n)
        r6 = _wrap(np.full_like(r1, c[4]), n)
        r7 = _wrap(r5 - c[3], n)
        return np.stack([r1, r2, r3, r4, r5, r6, r7], axis=1)

    def _sector_matrix(self, c: tuple) -> np.ndarray:
        n, q = self.rep.n, self.rep.q
        grid = self._sector_legs(c).astype(np.int64)
        size = n * n
        lq = math.log(q)

        def pos(r1, r2):
            return (r1 + n // 2) * n + (r2 + n // 2)

        mat = np.zeros((size, size), dtype=complex)
        for term in (0, 1):
            r = grid
            if term == 0:
                sign = -1.0
                shifts = np.array([-1, 0, -1, 1, 1, 0, 1])
            else:
                sign = 1.0
                shifts = np.array([-1, -1, -1, 1, 1, 0, 1])
            new = _wrap(r + shifts[None, :], n)
            w = np.ones(size, dtype=complex)
            w = w * np.exp(lq * r[:, 0].astype(float))  # s* m on leg 1
            if term == 0:
                w = w * np.exp(-lq * r[:, 1].astype(float))  # m^-1 on leg 2
                w = w * np.exp(-lq * new[:, 2].astype(float))  # m^-1 s* on leg 3
            else:
                w = w * np.exp(-lq * new[:, 1].astype(float))  # m^-1 s* on leg 2
            w = w * np.exp(lq * r[:, 5].astype(float))  # m of b on leg 6
            src = pos(r[:, 0], r[:, 1])
            dst = pos(new[:, 0], new[:, 1])
            np.add.at(mat, (dst, src), sign * w)
        return mat

    def _factor_diagonals(self, c: tuple) -> tuple[np.ndarray, np.ndarray, int]:
        """Diagonal value grids of F_q(A) and F_q(B) for one sector.

        F_q(A) is diagonal over (r2 position, y Fourier mode) with
        eigenvalue -q^(alpha - r2) exp(-i theta_y); F_q(B) over
        (r2 mode, y position) with eigenvalue q^(beta + y) exp(-i theta_r2).
        alpha and beta come from the sector constants on the branch.
        """
        n, q = self.rep.n, self.rep.q
        key = (c, n, round(q, 12))
        if key in self.cache:
            return self.cache[key]
        c1b = int(_wrap(np.array([c[0]]), n)[0])
        c5b = int(_wrap(np.array([c[4]]), n)[0])
        alpha = c1b + c5b + 1
        beta = c5b + 1
        labels = np.arange(n) - n // 2
        theta = 2 * np.pi * labels / n
        fa = np.empty((n, n), dtype=complex)  # (r2, j_y)
        fb = np.empty((n, n), dtype=complex)  # (j_r2, y)
        fa_pole = np.zeros((n, n), dtype=bool)
        fb_pole = np.zeros((n, n), dtype=bool)
        for i, r2 in enumerate(labels):
            for j in range(n):
                lam = -(q ** (alpha - r2)) * np.exp(-1j * theta[j])
                try:
                    fa[i, j] = qexp(q, lam)
                except ValueError:
                    fa[i, j] = 1.0
                    fa_pole[i, j] = True
        for i in range(n):
            for j, y in enumerate(labels):
                lam = (q ** (beta + y)) * np.exp(-1j * theta[i])
                try:
                    fb[i, j] = qexp(q, lam)
                except ValueError:
                    fb[i, j] = 1.0
                    fb_pole[i, j] = True
        excluded = int(fa_pole.sum() + fb_pole.sum())
        entry = (fa, fb, fa_pole, fb_pole, excluded)
        if len(self.cache) > 8192:
            self.cache.clear()
        self.cache[key] = entry
        self.excluded[c] = excluded
        return entry

    def _apply_block(self, c: tuple, dense: np.ndarray) -> np.ndarray:
        """Apply F (or F^H) to one sector block over the (r1, r2) grid.

        Mass passing through phase-pi (pole-excluded) lattice points is
        accumulated in ``pole_mass`` so band statistics can drop the
        affected probes, as the pole handling prescribes.
        """
        n = self.rep.n
        fa, fb, fa_pole, fb_pole, _ = self._factor_diagonals(c)
        shear = _shear_map(n)
        labels = np.arange(n) - n // 2
        fmat = (np.exp(-2j * np.pi / n) ** np.outer(labels, labels)) / np.sqrt(n)
        g = np.empty(n * n, dtype=complex)
        g[shear] = dense
        g = g.reshape(n, n)  # axes (y, r2)

        def apply_b(block, conj):
            hat = block @ fmat.conj()  # r2-axis to Fourier; axes (y, j_r2)
            self.pole_mass += float((np.abs(hat) ** 2)[fb_pole.T].sum())
            hat = hat * (fb.conj().T if conj else fb.T)
            return hat @ fmat.T

        def apply_a(block, conj):
            hat = fmat.conj().T @ block  # y-axis to Fourier; axes (j_y, r2)
            self.pole_mass += float((np.abs(hat) ** 2)[fa_pole.T].sum())
            hat = hat * (fa.conj().T if conj else fa.T)
            return fmat @ hat

        if self.conjugate:
            g = apply_b(apply_a(g, True), True)  # (F_A F_B)^H = F_B^H F_A^H
        else:
            g = apply_a(apply_b(g, False), False)
        out = g.reshape(-1)[shear]
        return out

    def apply(self, vec: SparseVec) -> SparseVec:
        n = self.rep.n
        o = self.offset
        if len(vec.val) == 0:
            return vec
        spectators = [c for c in range(vec.legs) if c < o or c >= o + 7]
        sig = self._signature(vec.idx)
        key = np.hstack([sig, vec.idx[:, spectators].astype(np.int64)]) if spectators else sig
        order = np.lexsort(key.T[::-1])
        idx = vec.idx[order]
        val = vec.val[order]
        key = key[order]
        change = np.any(key[1:] != key[:-1], axis=1)
        starts = np.concatenate(([0], np.nonzero(change)[0] + 1))
        ends = np.concatenate((starts[1:], [len(val)]))
        out_idx = []
        out_val = []
        for s0, e0 in zip(starts, ends):
            c = tuple(int(t) for t in key[s0, :5])
            rows = idx[s0:e0].astype(np.int64)
            dense = np.zeros(n * n, dtype=complex)
            p = (rows[:, o] + n // 2) * n + (rows[:, o + 1] + n // 2)
            np.add.at(dense, p, val[s0:e0])
            res = self._apply_block(c, dense)
            nz = np.nonzero(np.abs(res) > 1e-300)[0]
            if len(nz) == 0:
                continue
            grid = self._sector_legs(c)[nz]
            block = np.repeat(rows[:1], len(nz), axis=0)
            block[:, o : o + 7] = grid
            out_idx.append(block.astype(np.int16))
            out_val.append(res[nz])
        if not out_idx:
            return SparseVec(n, vec.legs, np.zeros((0, vec.legs), np.int16), np.zeros(0, complex))
        return SparseVec(n, vec.legs, np.vstack(out_idx), np.concatenate(out_val)).compress(1e-300)

    def adjoint(self) -> "QExpSectorOp":
        out = QExpSectorOp(self.rep, self.offset, not self.conjugate, self.cache, self.stats)
        out.excluded = self.excluded
        out.off_lattice = self.off_lattice
        return out


@dataclass
class WOp:
    """W = Sigma V^* with V = F_q(b-hat x b) chi(a-hat x 1, 1 x a) on H x H."""

    rep: TruncatedRep
    chi: PhaseOp
    fq: QExpSectorOp
    adjoint_flag: bool = False

    @staticmethod
    def build(rep: TruncatedRep, cache: dict | None = None) -> "WOp":
        return WOp(rep, chi_op(rep), QExpSectorOp(rep, 0, False, cache))

    def _swap(self, vec: SparseVec) -> SparseVec:
        idx = vec.idx.copy()
        idx[:, :4] = vec.idx[:, 4:8]
        idx[:, 4:8] = vec.idx[:, :4]
        return SparseVec(vec.n, vec.legs, idx, vec.val.copy())

    def apply(self, vec: SparseVec) -> SparseVec:
        if self.adjoint_flag:
            out = self._swap(vec)  # W^H = F chi Sigma
            out = self.chi.apply(out)
            return self.fq.apply(out)
        out = self.fq.adjoint().apply(vec)  # W = Sigma chi^H F^H
        out = self.chi.adjoint().apply(out)
        return self._swap(out)

    def adjoint(self) -> "WOp":
        return WOp(self.rep, self.chi, self.fq, not self.adjoint_flag)


def build_W(rep: TruncatedRep, cache: dict | None = None) -> WOp:
    return WOp.build(rep, cache)


def band_basis_vector(rep: TruncatedRep, labels) -> SparseVec:
    return SparseVec.basis(rep.n, labels)


# ---------------------------------------------------------------------------
# element oracle (symbolic products against matrix application)


def element_matrix_oracle(rep: TruncatedRep, element, vec: SparseVec) -> SparseVec:
    """Apply a finitely supported symbolic element to a vector on one H."""
    out = None
    q = rep.q
    for (k, l), fun in element.terms.items():
        shifted = MonoOp(rep.n, q, (k, -l, k, l), (0, 0, 0, 0)).apply(vec)
        vals = np.zeros(len(shifted.val), dtype=complex)
        for (i, j), fv in fun.items():
            hit = (shifted.idx[:, 0] == i) & (shifted.idx[:, 1] == j)
            vals[hit] += fv
        piece = SparseVec(shifted.n, shifted.legs, shifted.idx, shifted.val * vals).compress()
        out = piece if out is None else out + piece
    if out is None:
        return SparseVec(rep.n, vec.legs, np.zeros((0, vec.legs), np.int16), np.zeros(0, complex))
    return out


# ---------------------------------------------------------------------------
# band reports


@dataclass
class BandReport:
    relation: str
    scale: int
    band: int
    residual: float
    excluded_vectors: int = 0

    def as_dict(self) -> dict:
        return {
            "relation": self.relation,
            "scale": self.scale,
            "band": self.band,
            "residual": self.residual,
            "excluded_vectors": self.excluded_vectors,
        }


def _probe_stream(rep: TruncatedRep, legs: int, seed: int):
    rng = np.random.default_rng(seed)
    lo, hi = -rep.n // 2 + rep.band, rep.n // 2 - rep.band
    while True:
        yield SparseVec.basis(rep.n, rng.integers(lo, hi, size=legs))


def _collect_band_stat(rep: TruncatedRep, w: WOp, probes: int, seed: int, legs: int, fn):
    """Max of ``fn(probe)`` over interior probes whose W-applications stay
    clear of the pole-excluded lattice points; contaminated probes are
    dropped and counted."""
    stream = _probe_stream(rep, legs, seed)
    worst = 0.0
    dropped = 0
    kept = 0
    attempts = 0
    while kept < probes and attempts < 12 * probes:
        attempts += 1
        vec = next(stream)
        w.fq.reset_pole_mass()
        value = fn(vec)
        if w.fq.pole_mass > 1e-16:
            dropped += 1
            continue
        worst = max(worst, value)
        kept += 1
    return worst, dropped


def unitarity_band_report(rep: TruncatedRep, w: WOp, probes: int = 6, seed: int = 3) -> BandReport:
    def check(vec):
        return (w.adjoint().apply(w.apply(vec)) - vec).norm()

    worst, dropped = _collect_band_stat(rep, w, probes, seed, 8, check)
    return BandReport("W*W = 1", rep.n, rep.band, worst, dropped)


def delta_a_band_report(rep: TruncatedRep, w: WOp, probes: int = 4, seed: int = 5) -> BandReport:
    """|| (W^H (1 x a) W - a x a) xi || on interior probes.

    Expanded as sqrt(||W^H zeta||^2 + ||tau||^2 - 2 Re <zeta, W tau>) with
    zeta = (1 x a)(W xi) and tau = (a x a) xi, keeping supports bounded.
    """
    a_second = rep.a.embed(8, 4)

    def check(vec):
        wxi = w.apply(vec)
        zeta = a_second.apply(wxi)
        tau = rep.a.embed(8, 0).apply(a_second.apply(vec))
        wtau = w.apply(tau)
        n1 = w.adjoint().apply(zeta).norm()
        cross = zeta.inner(wtau)
        r2 = n1 * n1 + tau.norm() ** 2 - 2 * np.real(cross)
        return math.sqrt(max(r2, 0.0))

    worst, dropped = _collect_band_stat(rep, w, probes, seed, 8, check)
    return BandReport("W*(1 x a)W = a x a", rep.n, rep.band, worst, dropped)


def twisted_numeric_check(rep: TruncatedRep, x_param: int, probes: int = 6, seed: int = 7) -> dict:
    """Omega_x conjugation residuals and its 2-cocycle identity on the band."""
    om = omega_x_op(rep, x_param)
    b1 = rep.b.embed(8, 0)
    b2 = rep.b.embed(8, 4)
    t_right = rep.monomial_op(Fraction(-x_param), 0, 0, x_param).embed(8, 4)
    t_left = rep.monomial_op(Fraction(x_param), 0, 0, -x_param).embed(8, 0)
    worst1 = worst2 = 0.0
    for vec in _band_probes(rep, 8, probes, seed):
        lhs = om.apply(b1.apply(om.adjoint().apply(vec)))
        rhs = t_right.apply(b1.apply(vec))
        worst1 = max(worst1, (lhs - rhs).norm())
        lhs = om.apply(b2.apply(om.adjoint().apply(vec)))
        rhs = t_left.apply(b2.apply(vec))
        worst2 = max(worst2, (lhs - rhs).norm())
    return {
        "conj_b_tensor_1": worst1,
        "conj_1_tensor_b": worst2,
        "cocycle_identity": _omega_cocycle_residual(rep, x_param, seed=seed),
    }


def _omega_cocycle_residual(rep: TruncatedRep, x: int, samples: int = 200000, seed: int = 1) -> float:
    """(Omega x 1)(Delta x id)(Omega) = (1 x Omega)(id x Delta)(Omega).

    With Delta(a) = a x a all four factors are diagonal in one mixed basis,
    so the identity is a pointwise identity of phase functions on the
    twelve-leg grid, sampled here on interior points.
    """
    n = rep.n
    rng = np.random.default_rng(seed)
    lo, hi = -n // 2 + rep.band, n // 2 - rep.band
    pts = rng.integers(lo, hi, size=(samples, 12)).astype(float)
    two_pi = 2 * np.pi / n
    k = [pts[:, 0], pts[:, 4], pts[:, 8]]
    th = [
        two_pi * (pts[:, 3] - pts[:, 1]),
        two_pi * (pts[:, 7] - pts[:, 5]),
        two_pi * (pts[:, 11] - pts[:, 9]),
    ]

    def psi(ka, tha, kb, thb):
        return np.exp(1j * x * (ka * thb - kb * tha))

    lhs = psi(k[0], th[0], k[1], th[1]) * psi(k[0] + k[1], th[0] + th[1], k[2], th[2])
    rhs = psi(k[1], th[1], k[2], th[2]) * psi(k[0], th[0], k[1] + k[2], th[1] + th[2])
    return float(np.abs(lhs - rhs).max())


@dataclass
class _EmbeddedW:
    """A two-factor W relocated inside a larger tensor power."""

    base: WOp
    legs: int
    positions: tuple  # leg offsets of the two H factors

    def _cols(self):
        p1, p2 = self.positions
        cols = list(range(p1, p1 + 4)) + list(range(p2, p2 + 4))
        rest = [c for c in range(self.legs) if c not in cols]
        return cols, rest

    def apply(self, vec: SparseVec) -> SparseVec:
        cols, rest = self._cols()
        sub = SparseVec(
            vec.n,
            len(cols) + len(rest),
            np.hstack([vec.idx[:, cols], vec.idx[:, rest]]).astype(np.int16),
            vec.val.copy(),
        )
        out = self.base.apply(sub)
        idx = np.zeros((len(out.val), self.legs), dtype=np.int16)
        for i, c in enumerate(cols):
            idx[:, c] = out.idx[:, i]
        for i, c in enumerate(rest):
            idx[:, c] = out.idx[:, 8 + i]
        return SparseVec(out.n, self.legs, idx, out.val.copy())

    def adjoint(self) -> "_EmbeddedW":
        return _EmbeddedW(self.base.adjoint(), self.legs, self.positions)


def pentagon_band_report(
    rep: TruncatedRep, w: WOp, probes: int = 3, seed: int = 11, box: int = 2
) -> BandReport:
    """Pentagon residual through matrix elements of fixed interior states.

    Probes are seeded random superpositions supported on the fixed label
    box [-box, box) on every leg, so growing the truncation size pushes the
    branch edge away from the same physical states and the residual
    measures the truncation error directly (pole-point mass is part of
    that error here, so it is not excluded).  The first amplitude is
    evaluated as <W12^H eta, W13(W23 xi)>, needing one double application.
    """
    n = rep.n
    rng = np.random.default_rng(seed)
    w12 = _EmbeddedW(w, 12, (0, 4))
    w13 = _EmbeddedW(w, 12, (0, 8))
    w23 = _EmbeddedW(w, 12, (4, 8))

    def random_probe() -> SparseVec:
        pts = rng.integers(-box, box, size=(6, 12)).astype(np.int16)
        vals = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        vec = SparseVec(n, 12, pts, vals).compress()
        return vec.scale(1.0 / vec.norm())

    worst = 0.0
    for _ in range(probes):
        xi = random_probe()
        eta = random_probe()
        lhs_bra = w12.adjoint().apply(eta)
        lhs_mid = w13.apply(w23.apply(xi))
        t_p = lhs_mid.inner(lhs_bra)
        rhs_bra = w23.adjoint().apply(eta)
        rhs_ket = w12.apply(xi)
        t_q = rhs_ket.inner(rhs_bra)
        worst = max(worst, abs(t_p - t_q))
    return BandReport("pentagon", rep.n, rep.band, worst, 0)
