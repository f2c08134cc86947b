"""Dense complex linear algebra with tensor-leg bookkeeping.

Everything downstream (finite quantum groups, cocycle twists, crossed
products, the q-deformed lab) is built on the primitives here: operators on
tensor products of named finite-dimensional factors, leg embeddings such as
X_13, polar and spectral decompositions, discrete Fourier matrices, and
functional calculus for normal matrices.

Conventions
-----------
* Inner products are linear in the *first* argument: ``<x, y> = y^H x``.
* Leg positions are 1-based, matching the usual subscript notation X_12,
  X_13, X_23.
* Antiunitary maps are stored as a unitary ``U`` acting after entrywise
  conjugation: ``J(xi) = U @ conj(xi)``.  Composition: ``J1 J2`` is the
  linear map ``U1 conj(U2)``; conjugating a linear operator ``A`` gives
  ``J A J^{-1} = U conj(A) U^{-1}``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from math import prod
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse

__all__ = [
    "LegOperator",
    "PolarData",
    "QCommutingPair",
    "QCommutingReport",
    "AntiUnitary",
    "FactoredOperator",
    "tensor",
    "leg_embed",
    "leg_embed_sparse",
    "flip_operator",
    "leg_permutation",
    "polar",
    "functional_calculus",
    "check_q_commuting",
    "dft",
    "op_norm",
    "frobenius",
    "inner",
    "pentagon_residual",
    "dump_operator",
    "load_operator",
    "operator_to_json",
    "operator_from_json",
]

NORMALITY_TOL = 1e-8
POLAR_SINGULAR_TOL = 1e-10
DENSE_DIM_LIMIT = 4096


def inner(x: np.ndarray, y: np.ndarray) -> complex:
    """Inner product linear in the first argument."""
    return complex(np.vdot(y, x))


def _as_matrix(a) -> np.ndarray:
    m = np.asarray(a.data if isinstance(a, LegOperator) else a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


@dataclass(frozen=True)
class LegOperator:
    """A square complex matrix on a tensor product of finite factors.

    ``legs`` lists the factor dimensions; their product must equal the
    matrix dimension.  Instances are immutable (the array is marked
    read-only) and safe to share between threads.
    """

    data: np.ndarray
    legs: tuple[int, ...]
    label: str | None = None

    def __post_init__(self):
        m = np.ascontiguousarray(np.asarray(self.data, dtype=complex))
        legs = tuple(int(d) for d in self.legs)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"LegOperator needs a square matrix, got {m.shape}")
        if prod(legs) != m.shape[0]:
            raise ValueError(f"legs {legs} do not multiply to dimension {m.shape[0]}")
        m.setflags(write=False)
        object.__setattr__(self, "data", m)
        object.__setattr__(self, "legs", legs)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def with_legs(self, legs: Sequence[int]) -> "LegOperator":
        return LegOperator(self.data, tuple(legs), self.label)

    def adjoint(self) -> "LegOperator":
        return LegOperator(self.data.conj().T, self.legs, self.label)

    def __matmul__(self, other: "LegOperator") -> "LegOperator":
        if self.dim != other.dim:
            raise ValueError("dimension mismatch in product")
        return LegOperator(self.data @ other.data, self.legs)

    def permute_legs(self, perm: Sequence[int]) -> "LegOperator":
        """Relabel legs by the permutation ``perm`` (1-based target slots).

        Leg ``i`` of ``self`` is moved to slot ``perm[i-1]``.  Applying a
        permutation and then its inverse returns the original matrix
        bit-exactly.
        """
        k = len(self.legs)
        perm = tuple(int(p) for p in perm)
        if sorted(perm) != list(range(1, k + 1)):
            raise ValueError(f"not a permutation of 1..{k}: {perm}")
        t = self.data.reshape(self.legs + self.legs)
        out_axes = [0] * k
        for i, p in enumerate(perm):
            out_axes[p - 1] = i
        axes = out_axes + [a + k for a in out_axes]
        new_legs = tuple(self.legs[out_axes[j]] for j in range(k))
        m = t.transpose(axes).reshape(self.dim, self.dim)
        return LegOperator(np.ascontiguousarray(m), new_legs, self.label)


@dataclass(frozen=True)
class PolarData:
    """Polar decomposition ``x = phase @ modulus`` with unitary phase."""

    phase: LegOperator
    modulus: LegOperator

    def reconstruct(self) -> LegOperator:
        return self.phase @ self.modulus


@dataclass(frozen=True)
class QCommutingPair:
    """Two invertible operators whose polar parts q-commute."""

    first: PolarData
    second: PolarData
    q: float

    @staticmethod
    def from_operators(t, s, q: float, tol: float = POLAR_SINGULAR_TOL) -> "QCommutingPair":
        return QCommutingPair(polar(t, tol), polar(s, tol), float(q))


@dataclass(frozen=True)
class QCommutingReport:
    phase_phase: float
    modulus_modulus: float
    scale_first_on_second: float
    scale_second_on_first: float
    product_phase: float
    product_modulus: float

    def max_residual(self) -> float:
        return max(
            self.phase_phase,
            self.modulus_modulus,
            self.scale_first_on_second,
            self.scale_second_on_first,
            self.product_phase,
            self.product_modulus,
        )

    def as_dict(self) -> dict:
        return dict(self.__dict__)


class AntiUnitary:
    """Antiunitary map ``xi -> U @ conj(xi)``.

    ``sandwich`` conjugates a linear operator, ``star_conjugate`` computes
    the frequently needed ``J x^* J`` (for involutive J).
    """

    def __init__(self, matrix: np.ndarray, label: str | None = None):
        m = np.asarray(matrix, dtype=complex)
        if not np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=1e-12):
            raise ValueError("AntiUnitary needs a unitary matrix part")
        m = m.copy()
        m.setflags(write=False)
        self.matrix = m
        self.label = label

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, xi: np.ndarray) -> np.ndarray:
        return self.matrix @ np.conj(xi)

    def is_involutive(self, tol: float = 1e-12) -> bool:
        return bool(np.allclose(self.matrix @ self.matrix.conj(), np.eye(self.dim), atol=tol))

    def sandwich(self, a) -> np.ndarray:
        """Linear operator ``J A J^{-1} = U conj(A) U^H`` (unitary U)."""
        m = _as_matrix(a)
        return self.matrix @ m.conj() @ self.matrix.conj().T

    def star_conjugate(self, a) -> np.ndarray:
        """``J A^* J^{-1} = U A^T U^H``."""
        m = _as_matrix(a)
        return self.matrix @ m.T @ self.matrix.conj().T

    def compose(self, other: "AntiUnitary") -> np.ndarray:
        """Linear map ``self o other`` as a matrix."""
        return self.matrix @ other.matrix.conj()

    def tensor(self, other: "AntiUnitary") -> "AntiUnitary":
        return AntiUnitary(np.kron(self.matrix, other.matrix))


def tensor(a: LegOperator, b: LegOperator) -> LegOperator:
    """Kronecker product; legs concatenate."""
    return LegOperator(np.kron(a.data, b.data), a.legs + b.legs)


def _embed_axes(x_legs, target_legs, positions):
    k, m = len(x_legs), len(target_legs)
    pos = [int(p) for p in positions]
    if len(pos) != k or len(set(pos)) != k:
        raise ValueError(f"positions {positions} must name {k} distinct legs")
    if any(p < 1 or p > m for p in pos):
        raise ValueError(f"positions {positions} out of range for {m} legs")
    for i, p in enumerate(pos):
        if target_legs[p - 1] != x_legs[i]:
            raise ValueError(
                f"leg {i + 1} of operator (dim {x_legs[i]}) does not fit target "
                f"position {p} (dim {target_legs[p - 1]})"
            )
    rest = [p for p in range(1, m + 1) if p not in pos]
    return pos, rest


def leg_embed(x: LegOperator, target_legs: Sequence[int], positions: Sequence[int]) -> LegOperator:
    """Place ``x`` on the named 1-based positions, identity elsewhere.

    ``leg_embed(X, (n, n, n), (1, 3))`` realizes X_13 = (1 tensor S*)
    (X tensor 1)(1 tensor S).  Position lists may be permuted, e.g. (3, 1)
    puts the first leg of ``x`` on slot 3.
    """
    target_legs = tuple(int(d) for d in target_legs)
    pos, rest = _embed_axes(x.legs, target_legs, positions)
    k, m = len(x.legs), len(target_legs)
    rest_dims = tuple(target_legs[p - 1] for p in rest)
    t = x.data.reshape(x.legs + x.legs)
    if rest_dims:
        ident = np.eye(prod(rest_dims)).reshape(rest_dims + rest_dims)
        full = np.multiply.outer(t, ident)
    else:
        full = t
    # axes of ``full``: (x_out, x_in, rest_out, rest_in); route to target slots
    src_out, src_in = {}, {}
    for i, p in enumerate(pos):
        src_out[p] = i
        src_in[p] = k + i
    for j, p in enumerate(rest):
        src_out[p] = 2 * k + j
        src_in[p] = 2 * k + len(rest) + j
    axes = [src_out[p] for p in range(1, m + 1)] + [src_in[p] for p in range(1, m + 1)]
    dim = prod(target_legs)
    return LegOperator(np.ascontiguousarray(full.transpose(axes).reshape(dim, dim)), target_legs)


def leg_embed_sparse(
    x: LegOperator, target_legs: Sequence[int], positions: Sequence[int]
) -> scipy.sparse.csr_matrix:
    """Sparse version of :func:`leg_embed` for large products of small legs."""
    target_legs = tuple(int(d) for d in target_legs)
    pos, rest = _embed_axes(x.legs, target_legs, positions)
    m = len(target_legs)
    strides = np.ones(m, dtype=np.int64)
    for p in range(m - 1, 0, -1):
        strides[p - 1] = strides[p] * target_legs[p]
    coo = scipy.sparse.coo_matrix(x.data)
    # digits of the operator's own row/col indices over its legs
    def contributions(lin_idx):
        out = np.zeros(len(lin_idx), dtype=np.int64)
        rem = lin_idx.astype(np.int64)
        for i in range(len(x.legs) - 1, -1, -1):
            d = x.legs[i]
            out += (rem % d) * strides[pos[i] - 1]
            rem //= d
        return out

    row_c = contributions(coo.row)
    col_c = contributions(coo.col)
    rest_dims = [target_legs[p - 1] for p in rest]
    r_tot = prod(rest_dims) if rest_dims else 1
    r_lin = np.arange(r_tot, dtype=np.int64)
    r_contrib = np.zeros(r_tot, dtype=np.int64)
    rem = r_lin.copy()
    for j in range(len(rest) - 1, -1, -1):
        d = rest_dims[j]
        r_contrib += (rem % d) * strides[rest[j] - 1]
        rem //= d
    rows = (row_c[:, None] + r_contrib[None, :]).ravel()
    cols = (col_c[:, None] + r_contrib[None, :]).ravel()
    vals = np.repeat(coo.data, r_tot)
    dim = prod(target_legs)
    return scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(dim, dim)).tocsr()


def flip_operator(n: int, m: int | None = None) -> LegOperator:
    """The flip Sigma: H tensor K -> K tensor H on factors of dims n, m."""
    m = n if m is None else m
    s = np.zeros((n * m, n * m), dtype=complex)
    for i in range(n):
        for j in range(m):
            s[j * n + i, i * m + j] = 1.0
    return LegOperator(s, (m, n), label="flip")


def leg_permutation(legs: Sequence[int], perm: Sequence[int]) -> LegOperator:
    """Unitary permuting tensor factors: factor i is sent to slot perm[i-1]."""
    legs = tuple(int(d) for d in legs)
    k = len(legs)
    perm = tuple(int(p) for p in perm)
    if sorted(perm) != list(range(1, k + 1)):
        raise ValueError(f"not a permutation of 1..{k}: {perm}")
    dim = prod(legs)
    idx = np.arange(dim)
    digits = []
    rem = idx.copy()
    for d in reversed(legs):
        digits.append(rem % d)
        rem //= d
    digits.reverse()
    new_legs = [0] * k
    for i, p in enumerate(perm):
        new_legs[p - 1] = legs[i]
    strides = np.ones(k, dtype=np.int64)
    for p in range(k - 1, 0, -1):
        strides[p - 1] = strides[p] * new_legs[p]
    target = np.zeros(dim, dtype=np.int64)
    for i, p in enumerate(perm):
        target += digits[i] * strides[p - 1]
    mat = np.zeros((dim, dim), dtype=complex)
    mat[target, idx] = 1.0
    return LegOperator(mat, tuple(new_legs))


def polar(x, tol: float = POLAR_SINGULAR_TOL) -> PolarData:
    """Polar decomposition of an invertible operator.

    Raises ``ValueError`` ("kernel nonzero") when the smallest singular
    value is below ``tol``; the decomposition is only defined for trivial
    kernel.
    """
    xo = x if isinstance(x, LegOperator) else LegOperator(np.asarray(x), (np.asarray(x).shape[0],))
    u, s, vh = np.linalg.svd(xo.data)
    if s.min(initial=np.inf) <= tol * max(1.0, s.max(initial=0.0)):
        raise ValueError("kernel nonzero: polar decomposition needs an invertible operator")
    phase = u @ vh
    modulus = (vh.conj().T * s) @ vh
    modulus = 0.5 * (modulus + modulus.conj().T)
    return PolarData(LegOperator(phase, xo.legs), LegOperator(modulus, xo.legs))


def functional_calculus(
    x, f: Callable[[complex], complex], tol: float = NORMALITY_TOL
) -> LegOperator:
    """Apply a scalar function to a normal operator.

    Diagonalization is Schur-based; eigenvalues are ordered by
    (modulus, phase) lexicographically so repeated runs agree bit-for-bit.
    """
    xo = x if isinstance(x, LegOperator) else LegOperator(np.asarray(x), (np.asarray(x).shape[0],))
    m = xo.data
    scale = max(1.0, float(np.linalg.norm(m, 2)))
    defect = np.linalg.norm(m @ m.conj().T - m.conj().T @ m, 2)
    if defect > tol * scale * scale:
        raise ValueError(f"operator is not normal within tolerance ({defect:.3e})")
    t, z = scipy.linalg.schur(m, output="complex")
    eigs = np.diag(t).copy()
    order = np.lexsort((np.round(np.angle(eigs), 12), np.round(np.abs(eigs), 12)))
    eigs = eigs[order]
    z = z[:, order]
    vals = np.array([f(complex(lam)) for lam in eigs], dtype=complex)
    return LegOperator(z @ np.diag(vals) @ z.conj().T, xo.legs)


def _masked(mat: np.ndarray, rows: np.ndarray | None) -> np.ndarray:
    if rows is None:
        return mat
    rows = np.asarray(rows, dtype=bool)
    return mat[np.ix_(rows, rows)]


def check_q_commuting(
    pair: QCommutingPair,
    tol: float = 1e-10,
    rows: np.ndarray | None = None,
) -> QCommutingReport:
    """Residuals of the defining relations of a q-commuting pair.

    ``rows`` optionally restricts all defect matrices to a boolean row/column
    mask -- used for truncated models where wrap-around rows violate the
    relations by construction.
    """
    pt, ps, q = pair.first, pair.second, pair.q
    u, a = pt.phase.data, pt.modulus.data
    v, b = ps.phase.data, ps.modulus.data

    def nrm(d):
        return float(np.linalg.norm(_masked(d, rows), 2))

    r1 = nrm(u @ v - v @ u)
    r2 = nrm(a @ b - b @ a)
    r3 = nrm(u @ b @ u.conj().T - q * b)
    r4 = nrm(v @ a @ v.conj().T - q * a)
    ts = polar(pt.reconstruct().data @ ps.reconstruct().data)
    r5 = nrm(ts.phase.data - u @ v)
    r6 = nrm(ts.modulus.data - (a @ b) / q)
    return QCommutingReport(r1, r2, r3, r4, r5, r6)


def dft(n: int) -> LegOperator:
    """Unitary DFT matrix F with F^H s F = diag(exp(2 pi i k / n))."""
    if n < 1:
        raise ValueError("dimension must be >= 1")
    f = scipy.linalg.dft(n) / np.sqrt(n)
    return LegOperator(f, (n,), label=f"dft({n})")


def op_norm(x) -> float:
    """Largest singular value."""
    return float(np.linalg.norm(_as_matrix(x), 2))


def frobenius(x) -> float:
    return float(np.linalg.norm(_as_matrix(x)))


def sparse_chain(parts, nnz_cap: int = 80_000_000):
    """Product of sparse factors, rightmost applied first, with a density guard."""
    out = None
    for f in reversed(list(parts)):
        out = f.tocsr() if out is None else (f @ out).tocsr()
        if out.nnz > nnz_cap:
            raise MemoryError("sparse chain grew beyond the density guard")
    return out


def max_column_norm(d) -> float:
    """max_j ||D e_j|| for a sparse matrix D."""
    d = d.tocsc()
    if d.nnz == 0:
        return 0.0
    col = np.zeros(d.shape[1])
    np.add.at(col, np.repeat(np.arange(d.shape[1]), np.diff(d.indptr)), np.abs(d.data) ** 2)
    return float(np.sqrt(col.max()))


def pentagon_residual(
    w: LegOperator,
    dense_limit: int = DENSE_DIM_LIMIT,
    factors: Sequence[LegOperator] | None = None,
) -> float:
    """Residual of W_12 W_13 W_23 = W_23 W_12 on H tensor H tensor H.

    Dense operator norm when the three-fold space is small; above
    ``dense_limit`` the factors are embedded sparsely and the residual is
    the maximum euclidean norm of the defect over all basis vectors
    (max column norm), which avoids materializing the dense product.
    ``factors``, when given, is an ordered factorization of W (applied right
    to left) whose pieces are sparser than W itself; the sparse chain then
    works factor by factor.
    """
    if len(w.legs) != 2 or w.legs[0] != w.legs[1]:
        raise ValueError("pentagon check needs an operator on H tensor H")
    n = w.legs[0]
    triple = (n, n, n)
    if n**3 <= dense_limit:
        w12 = leg_embed(w, triple, (1, 2)).data
        w13 = leg_embed(w, triple, (1, 3)).data
        w23 = leg_embed(w, triple, (2, 3)).data
        return op_norm(w12 @ w13 @ w23 - w23 @ w12)
    parts = list(factors) if factors is not None else [w]
    emb = {
        pos: [leg_embed_sparse(f, triple, pos) for f in parts]
        for pos in ((1, 2), (1, 3), (2, 3))
    }
    lhs = sparse_chain(emb[(1, 2)] + emb[(1, 3)] + emb[(2, 3)])
    rhs = sparse_chain(emb[(2, 3)] + emb[(1, 2)])
    return max_column_norm(lhs - rhs)


@dataclass
class FactoredOperator:
    """Ordered product of single-leg factors, materialized on demand.

    ``factors`` apply right to left, like operator composition.  Each factor
    is a (position, matrix) pair acting on one leg of ``legs``.
    """

    legs: tuple[int, ...]
    factors: list[tuple[int, np.ndarray]] = field(default_factory=list)
    coefficient: complex = 1.0

    def materialize(self) -> LegOperator:
        dim = prod(self.legs)
        out = np.eye(dim, dtype=complex) * self.coefficient
        for position, mat in reversed(self.factors):
            emb = leg_embed(LegOperator(np.asarray(mat, dtype=complex), (self.legs[position - 1],)),
                            self.legs, (position,))
            out = emb.data @ out
        return LegOperator(out, self.legs)

    def apply(self, vec: np.ndarray) -> np.ndarray:
        v = np.asarray(vec, dtype=complex).reshape(self.legs)
        for position, mat in reversed(self.factors):
            v = np.moveaxis(np.tensordot(np.asarray(mat, dtype=complex), v, axes=([1], [position - 1])),
                            0, position - 1)
        return self.coefficient * v.reshape(-1)


# ---------------------------------------------------------------------------
# serialization: binary dump/load and a JSON debug form

_MAGIC = b"QGLO"
_DTYPE_COMPLEX128 = 0


def dump_operator(x: LegOperator, path) -> None:
    """Write the documented little-endian binary layout.

    Header: magic ``QGLO``, version u32, number of legs u32, legs u32 each,
    dtype tag u32 (0 = complex128), then the row-major matrix data.
    """
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", 1, len(x.legs)))
        fh.write(struct.pack(f"<{len(x.legs)}I", *x.legs))
        fh.write(struct.pack("<I", _DTYPE_COMPLEX128))
        fh.write(np.ascontiguousarray(x.data, dtype="<c16").tobytes())


def load_operator(path) -> LegOperator:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError("not a QGLO operator file")
        version, n_legs = struct.unpack("<II", fh.read(8))
        if version != 1:
            raise ValueError(f"unsupported version {version}")
        legs = struct.unpack(f"<{n_legs}I", fh.read(4 * n_legs))
        (tag,) = struct.unpack("<I", fh.read(4))
        if tag != _DTYPE_COMPLEX128:
            raise ValueError(f"unsupported dtype tag {tag}")
        dim = prod(legs)
        data = np.frombuffer(fh.read(), dtype="<c16").reshape(dim, dim)
    return LegOperator(data.astype(complex), legs)


def operator_to_json(x: LegOperator) -> str:
    payload = {
        "legs": list(x.legs),
        "label": x.label,
        "data": [[[float(v.real), float(v.imag)] for v in row] for row in x.data],
    }
    return json.dumps(payload, sort_keys=True)


def operator_from_json(text: str) -> LegOperator:
    payload = json.loads(text)
    data = np.array(
        [[complex(re, im) for re, im in row] for row in payload["data"]], dtype=complex
    )
    return LegOperator(data, tuple(payload["legs"]), payload.get("label"))
