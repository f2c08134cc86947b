"""Finite-dimensional quantum groups in standard form.

Two exact engines: the function algebra of a finite group G (diagonal
matrices on l2(G), comultiplication from the group law) and the group
algebra (left translations, group-like comultiplication).  Both carry their
multiplicative unitary, Haar functional with density matrix, modular
conjugations and modular element, and both dualize through slices of W and
the GNS pairing ``<xi(omega), Lambda(x)> = omega(x^*)``.

The scaling constant and scaling group have no nontrivial finite
realization; they are stored as the constants nu = 1, tau = id.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse

from .groups import FiniteGroupData, SubgroupEmbedding, subgroup_from_elements
from .linalg import (
    AntiUnitary,
    LegOperator,
    flip_operator,
    leg_embed,
    leg_embed_sparse,
    op_norm,
    pentagon_residual,
)

__all__ = [
    "QuantumGroupData",
    "CoSubgroup",
    "GnsStandardForm",
    "build_function_algebra",
    "build_group_algebra",
    "dual_qg",
    "gns_standard_form",
    "embed_cosubgroup",
    "left_right_unitaries",
    "coassociativity_residual",
    "invariance_residuals",
    "antipode_flip_residual",
    "qg_match_report",
]


@dataclass(frozen=True)
class QuantumGroupData:
    """A finite quantum group in standard form on H.

    ``basis`` spans the von Neumann algebra M inside B(H); ``w`` is the
    multiplicative unitary on H tensor H; ``xi0`` the GNS cyclic vector of
    the left Haar functional (Lambda(x) = x xi0); densities give
    phi(x) = Tr(rho x).  ``j`` and ``j_hat`` are the modular conjugations of
    the Haar weight and of the dual weight.  ``nu`` and the scaling group
    are trivial here.
    """

    hilbert_dim: int
    basis: np.ndarray  # shape (n, d, d)
    w: LegOperator
    xi0: np.ndarray
    haar_density: np.ndarray
    right_density: np.ndarray
    j: AntiUnitary
    j_hat: AntiUnitary
    delta_mod: np.ndarray
    kind: str = "generic"
    group: FiniteGroupData | None = None
    nu: float = 1.0

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=complex)
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @property
    def algebra_dim(self) -> int:
        return self.basis.shape[0]

    # -- GNS data -----------------------------------------------------------

    def lam(self, x: np.ndarray) -> np.ndarray:
        """GNS map Lambda(x) = x xi0."""
        return np.asarray(x, dtype=complex) @ self.xi0

    def gns_frame(self) -> np.ndarray:
        """Columns Lambda(x_i); invertible because Lambda is a bijection."""
        return np.column_stack([self.lam(x) for x in self.basis])

    def phi(self, x: np.ndarray) -> complex:
        return complex(np.trace(self.haar_density @ x))

    def psi(self, x: np.ndarray) -> complex:
        return complex(np.trace(self.right_density @ x))

    def r_map(self, x: np.ndarray) -> np.ndarray:
        """Unitary antipode R(x) = J_hat x^* J_hat."""
        return self.j_hat.star_conjugate(x)

    def delta(self, x: np.ndarray) -> np.ndarray:
        """Comultiplication Delta(x) = W^* (1 tensor x) W."""
        d = self.hilbert_dim
        wm = self.w.data
        return wm.conj().T @ np.kron(np.eye(d), x) @ wm

    def expand(self, x: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        """Coefficients of x in the algebra basis (via the GNS frame)."""
        coeffs = np.linalg.solve(self.gns_frame(), self.lam(x))
        recon = np.tensordot(coeffs, self.basis, axes=(0, 0))
        if np.abs(recon - x).max() > tol * max(1.0, np.abs(x).max()):
            raise ValueError("element is not in the algebra span")
        return coeffs

    def delta_coords(self, x: np.ndarray, tol: float = 1e-8) -> np.ndarray:
        """Delta(x) expanded in basis tensor basis, shape (n, n)."""
        frame = self.gns_frame()
        vec = self.delta(x) @ np.kron(self.xi0, self.xi0)
        d, n = self.hilbert_dim, self.algebra_dim
        coeffs = np.linalg.solve(np.kron(frame, frame), vec).reshape(n, n)
        recon = np.einsum("jk,jab,kcd->acbd", coeffs, self.basis, self.basis).reshape(d * d, d * d)
        if op_norm(recon - self.delta(x)) > tol:
            raise ValueError("Delta(x) is not in the double span")
        return coeffs


def _perm_unitary(dim: int, image: np.ndarray) -> np.ndarray:
    m = np.zeros((dim, dim), dtype=complex)
    m[image, np.arange(dim)] = 1.0
    return m


def _inversion_permutation(g: FiniteGroupData) -> np.ndarray:
    return _perm_unitary(g.order, np.asarray(g.inverse))


def _left_translations(g: FiniteGroupData) -> np.ndarray:
    n = g.order
    lam = np.zeros((n, n, n), dtype=complex)
    for a in range(n):
        lam[a][g.table[a], np.arange(n)] = 1.0
    return lam


def build_function_algebra(g: FiniteGroupData) -> QuantumGroupData:
    """The commutative engine: M = diagonal functions on G.

    W is the permutation (delta_a tensor delta_b) -> (delta_a tensor
    delta_{ab}); Haar is the normalized counting measure.
    """
    g.validate()
    n = g.order
    basis = np.zeros((n, n, n), dtype=complex)
    for a in range(n):
        basis[a, a, a] = 1.0
    # column (a, b) maps to row (a, a*b)
    cols = np.arange(n * n)
    rows = (cols // n) * n + g.table[cols // n, cols % n]
    wm = np.zeros((n * n, n * n), dtype=complex)
    wm[rows, cols] = 1.0
    xi0 = np.ones(n, dtype=complex) / np.sqrt(n)
    rho = np.eye(n, dtype=complex) / n
    return QuantumGroupData(
        hilbert_dim=n,
        basis=basis,
        w=LegOperator(wm, (n, n), label=f"W[{g.name}]"),
        xi0=xi0,
        haar_density=rho,
        right_density=rho.copy(),
        j=AntiUnitary(np.eye(n)),
        j_hat=AntiUnitary(_inversion_permutation(g)),
        delta_mod=np.eye(n, dtype=complex),
        kind="function",
        group=g,
    )


def build_group_algebra(g: FiniteGroupData) -> QuantumGroupData:
    """The cocommutative engine: M = span of left translations lambda_g.

    W here is the dual unitary Sigma W_G^* Sigma of the function algebra,
    so Delta(lambda_g) = lambda_g tensor lambda_g; Haar is the Plancherel
    trace Tr/|G|.
    """
    g.validate()
    n = g.order
    basis = _left_translations(g)
    fn = build_function_algebra(g)
    sig = flip_operator(n).data
    wm = sig @ fn.w.data.conj().T @ sig
    xi0 = np.zeros(n, dtype=complex)
    xi0[g.identity] = 1.0
    rho = np.eye(n, dtype=complex) / n
    return QuantumGroupData(
        hilbert_dim=n,
        basis=basis,
        w=LegOperator(wm, (n, n), label=f"W[L({g.name})]"),
        xi0=xi0,
        haar_density=rho,
        right_density=rho.copy(),
        j=AntiUnitary(_inversion_permutation(g)),
        j_hat=AntiUnitary(np.eye(n)),
        delta_mod=np.eye(n, dtype=complex),
        kind="group",
        group=g,
    )


# ---------------------------------------------------------------------------
# duality


def _matrix_unit_slices(w: LegOperator) -> np.ndarray:
    """All (omega_ab tensor id)(W) stacked, index (a*d + b, :, :)."""
    d = w.legs[0]
    w4 = w.data.reshape(d, d, d, d)
    return w4.transpose(0, 2, 1, 3).reshape(d * d, d, d)


def dual_qg(q: QuantumGroupData, tol: float = 1e-9) -> QuantumGroupData:
    """Dual quantum group from slices of W and the GNS pairing.

    The dual algebra is the span of (omega tensor id)(W) over matrix-unit
    functionals; its Haar functional is fixed by solving
    ``<xi(omega), Lambda(x)> = omega(x^*)`` for each slice.
    """
    d = q.hilbert_dim
    slices = _matrix_unit_slices(q.w)
    flat = slices.reshape(d * d, d * d)
    # pivoted QR on slice vectors picks an independent generating family
    _, _, piv = scipy.linalg.qr(flat.T, pivoting=True, mode="economic")
    svals = np.linalg.svd(flat, compute_uv=False)
    rank = int((svals > tol * svals[0]).sum())
    pivots = piv[:rank]
    basis = slices[pivots]

    # closure under multiplication (a corrupted W shows up here)
    span_q, _ = np.linalg.qr(flat[pivots].T)
    for j in range(rank):
        for k in range(rank):
            prod = (basis[j] @ basis[k]).reshape(-1)
            resid = prod - span_q @ (span_q.conj().T @ prod)
            if np.linalg.norm(resid) > 1e-8 * max(1.0, np.linalg.norm(prod)):
                raise ValueError("slice span does not close under multiplication")

    # GNS pairing: frame^H xi = [omega(x_i^*)]
    frame = q.gns_frame()
    rhs = np.empty((d, d * d), dtype=complex)
    for i, x in enumerate(q.basis):
        xs = x.conj().T
        rhs[i] = xs.reshape(-1)  # omega_ab(x^*) = x^*[a, b]
    xi_all = np.linalg.solve(frame.conj().T, rhs)  # columns: xi(omega_ab)
    xi_basis = xi_all[:, pivots]

    # cyclic vector xi0_hat = Lambda_hat(1): expand 1 in the slice basis
    coeff_one = np.linalg.lstsq(flat[pivots].T, np.eye(d).reshape(-1), rcond=None)[0]
    recon = np.tensordot(coeff_one, basis, axes=(0, 0))
    if np.abs(recon - np.eye(d)).max() > 1e-8:
        raise ValueError("identity is not in the dual slice span")
    xi0_hat = xi_basis @ coeff_one

    # left-module consistency: Lambda_hat(z) = z xi0_hat on the basis
    for k in range(rank):
        if np.linalg.norm(basis[k] @ xi0_hat - xi_basis[:, k]) > 1e-8:
            raise ValueError("dual GNS map is not implemented by a cyclic vector")

    # dual Haar density inside the dual algebra
    t_vals = np.array([np.vdot(xi0_hat, xi_basis[:, k]) for k in range(rank)])
    gram = np.array([[np.trace(basis[j] @ basis[k]) for j in range(rank)] for k in range(rank)])
    dens_coeff = np.linalg.solve(gram, t_vals)
    rho_hat = np.tensordot(dens_coeff, basis, axes=(0, 0))
    rho_hat = 0.5 * (rho_hat + rho_hat.conj().T)
    if np.linalg.eigvalsh(rho_hat).min() < -1e-10:
        raise ValueError("dual Haar density is not positive")

    # dual right density from psi_hat = phi_hat o R_hat, R_hat(y) = J y^* J
    psi_vals = np.array(
        [np.trace(rho_hat @ q.j.star_conjugate(basis[k])) for k in range(rank)]
    )
    rho_psi = np.tensordot(np.linalg.solve(gram, psi_vals), basis, axes=(0, 0))
    rho_psi = 0.5 * (rho_psi + rho_psi.conj().T)

    # modular theory of phi_hat: S Lambda_hat(y) = Lambda_hat(y^*)
    v = xi_basis
    v_star = np.empty_like(v)
    star_coeff = np.linalg.lstsq(
        flat[pivots].T, np.stack([b.conj().T.reshape(-1) for b in basis], axis=1), rcond=None
    )[0]
    v_star = xi_basis @ star_coeff
    s_mat = v_star @ np.linalg.inv(v.conj())
    nabla = s_mat.T @ s_mat.conj()
    nabla = 0.5 * (nabla + nabla.conj().T)
    evals, evecs = np.linalg.eigh(nabla)
    if evals.min() <= 0:
        raise ValueError("dual modular operator is not positive")
    inv_sqrt = evecs @ np.diag(evals**-0.5) @ evecs.conj().T
    j_mat = s_mat @ inv_sqrt.conj()

    # modular element from the two densities (they commute in the Kac case)
    delta_hat = _modular_element(rho_psi, rho_hat)

    sig = flip_operator(d).data
    w_hat = sig @ q.w.data.conj().T @ sig
    return QuantumGroupData(
        hilbert_dim=d,
        basis=basis,
        w=LegOperator(w_hat, (d, d), label="W-dual"),
        xi0=xi0_hat,
        haar_density=rho_hat,
        right_density=rho_psi,
        j=AntiUnitary(j_mat),
        j_hat=q.j,
        delta_mod=delta_hat,
        kind="dual:" + q.kind,
        group=q.group,
    )


def _modular_element(rho_psi: np.ndarray, rho_phi: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    d = rho_phi.shape[0]
    if op_norm(rho_psi - rho_phi) < tol:
        return np.eye(d, dtype=complex)
    if op_norm(rho_psi @ rho_phi - rho_phi @ rho_psi) > tol:
        raise ValueError("weight densities do not commute; no scalar modular element")
    lp = scipy.linalg.logm(rho_psi)
    lq = scipy.linalg.logm(rho_phi)
    return scipy.linalg.expm(lp - lq)


# ---------------------------------------------------------------------------
# standard form on the Hilbert-Schmidt space


@dataclass(frozen=True)
class GnsStandardForm:
    """GNS data of phi(x) = Tr(rho x) on the Hilbert-Schmidt space.

    Lambda(x) = x rho^(1/2); the modular operator conjugates by rho, the
    modular conjugation is the matrix adjoint.
    """

    rho: np.ndarray
    rho_sqrt: np.ndarray

    def lam(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=complex) @ self.rho_sqrt).reshape(-1)

    def nabla_apply(self, ximat: np.ndarray) -> np.ndarray:
        return self.rho @ ximat @ np.linalg.inv(self.rho)

    def nabla_power(self, ximat: np.ndarray, power: float) -> np.ndarray:
        evals, evecs = np.linalg.eigh(self.rho)
        rp = evecs @ np.diag(evals ** power) @ evecs.conj().T
        rm = evecs @ np.diag(evals ** (-power)) @ evecs.conj().T
        return rp @ ximat @ rm

    def j_apply(self, ximat: np.ndarray) -> np.ndarray:
        return np.asarray(ximat).conj().T

    def sigma(self, t: float, x: np.ndarray) -> np.ndarray:
        evals, evecs = np.linalg.eigh(self.rho)
        u = evecs @ np.diag(evals ** (1j * t)) @ evecs.conj().T
        return u @ x @ u.conj().T

    def tomita_residual(self, x: np.ndarray) -> float:
        """|| J Lambda(x) - Lambda(sigma_{-i/2}(x^*)) || on the HS space."""
        lhs = self.j_apply((x @ self.rho_sqrt))
        adjusted = self.nabla_power(x.conj().T, 0.5)
        rhs = adjusted @ self.rho_sqrt
        return float(np.linalg.norm(lhs - rhs))


def gns_standard_form(q: QuantumGroupData) -> GnsStandardForm:
    evals = np.linalg.eigvalsh(q.haar_density)
    if evals.min() <= 1e-14:
        raise ValueError("Haar density is not faithful")
    ev, evec = np.linalg.eigh(q.haar_density)
    rho_sqrt = evec @ np.diag(np.sqrt(ev)) @ evec.conj().T
    return GnsStandardForm(q.haar_density, rho_sqrt)


# ---------------------------------------------------------------------------
# co-subgroups


@dataclass(frozen=True)
class CoSubgroup:
    """Embedding of the function algebra of the dual of an abelian subgroup.

    ``alpha`` sends the character u_h (h in the subgroup H of G) to the
    translation lambda_h in the parent group algebra; delta functions on
    H-hat go to the spectral projections p_gamma.
    """

    parent: QuantumGroupData
    h_group: FiniteGroupData  # abelian, with dual pairing; indexes H-hat too
    parent_index: tuple[int, ...]
    char_unitaries: np.ndarray = field(repr=False)  # alpha(u_h), shape (|H|, d, d)
    projections: np.ndarray = field(repr=False)  # p_gamma, shape (|H|, d, d)

    @property
    def order(self) -> int:
        return self.h_group.order

    def alpha(self, values: Sequence[complex]) -> np.ndarray:
        """alpha(F) for F given by its values on H-hat (index = gamma)."""
        return np.tensordot(np.asarray(values, dtype=complex), self.projections, axes=(0, 0))

    def pairing(self, gamma: int, h: int) -> complex:
        return complex(self.h_group.pairing[gamma, h])

    def character_residual(self) -> float:
        """Defect of alpha being a *-homomorphism intertwining Delta."""
        worst = 0.0
        hg = self.h_group
        for a in range(self.order):
            for b in range(self.order):
                lhs = self.char_unitaries[a] @ self.char_unitaries[b]
                rhs = self.char_unitaries[hg.mul(a, b)]
                worst = max(worst, float(np.abs(lhs - rhs).max()))
        for a in range(self.order):
            u = self.char_unitaries[a]
            worst = max(worst, op_norm(self.parent.delta(u) - np.kron(u, u)))
        return worst


def embed_cosubgroup(q: QuantumGroupData, subgroup) -> CoSubgroup:
    """Co-subgroup of a group-algebra engine from an abelian subgroup of G.

    ``subgroup`` is either a SubgroupEmbedding or a sequence of parent
    element indices closed under the group law.
    """
    if q.kind != "group" or q.group is None:
        raise ValueError("co-subgroups are embedded into group-algebra engines")
    if not isinstance(subgroup, SubgroupEmbedding):
        subgroup = subgroup_from_elements(q.group, subgroup)
    h = subgroup.subgroup
    if not h.is_abelian():
        raise ValueError("co-subgroup needs an abelian subgroup")
    h = h.with_pairing()
    m = h.order
    chars = np.stack([q.basis[subgroup.parent_index[k]] for k in range(m)])
    projections = np.zeros_like(chars)
    for gamma in range(m):
        acc = np.zeros_like(chars[0])
        for k in range(m):
            acc += np.conj(h.pairing[gamma, k]) * chars[k]
        projections[gamma] = acc / m
    cs = CoSubgroup(q, h, subgroup.parent_index, chars, projections)
    resid = cs.character_residual()
    if resid > 1e-10:
        raise ValueError(f"co-subgroup relations fail ({resid:.3e})")
    return cs


@dataclass(frozen=True)
class LeftRightData:
    left: np.ndarray  # L_h = alpha(u_h), shape (|H|, d, d)
    right: np.ndarray  # R_h = J L_h J
    relation_residual: float


def left_right_unitaries(c: CoSubgroup, tol: float = 1e-10) -> LeftRightData:
    """The unitaries L_h, R_h = J L_h J and their intertwining relations.

    Verifies (1 x L)W(1 x L^*) = W(L x 1) and
    (1 x R)W(1 x R^*) = (L_{-h} x 1)W for every h.
    """
    q = c.parent
    d = q.hilbert_dim
    wm = q.w.data
    left = c.char_unitaries
    right = np.stack([q.j.sandwich(u) for u in left])
    eye = np.eye(d)
    worst = 0.0
    for k in range(c.order):
        l, r = left[k], right[k]
        l_inv = left[c.h_group.inv(k)]
        lhs1 = np.kron(eye, l) @ wm @ np.kron(eye, l.conj().T)
        rhs1 = wm @ np.kron(l, eye)
        lhs2 = np.kron(eye, r) @ wm @ np.kron(eye, r.conj().T)
        rhs2 = np.kron(l_inv, eye) @ wm
        worst = max(worst, op_norm(lhs1 - rhs1), op_norm(lhs2 - rhs2))
    if worst > tol:
        raise ValueError(f"left/right intertwining relations fail ({worst:.3e})")
    return LeftRightData(left, right, worst)


# ---------------------------------------------------------------------------
# residual checks


def _triple_residual_sparse(lhs_parts, rhs_parts, dim: int, step: int = 1024) -> float:
    """max_j || (L1 L2 ... - R1 R2 ...) e_j || for sparse factor lists.

    Whole-matrix sparse products when they stay sparse (they do for the
    coset-structured operators appearing here); chunked columns otherwise.
    """
    from .linalg import max_column_norm, sparse_chain

    try:
        l = sparse_chain(lhs_parts)
        r = sparse_chain(rhs_parts)
        return max_column_norm(l - r)
    except MemoryError:
        pass
    best = 0.0
    eye = scipy.sparse.identity(dim, format="csc", dtype=complex)
    for j0 in range(0, dim, step):
        cols = eye[:, j0 : min(j0 + step, dim)]
        l = cols
        for f in reversed(lhs_parts):
            l = f @ l
        r = cols
        for f in reversed(rhs_parts):
            r = f @ r
        best = max(best, max_column_norm(l - r))
    return best


def coassociativity_residual(
    q: QuantumGroupData,
    omega: LegOperator | None = None,
    dense_limit: int = 4096,
) -> float:
    """Residual of (Delta x id)Delta = (id x Delta)Delta over the basis.

    When ``omega`` is given, checks the twisted comultiplication
    Omega Delta(.) Omega^*.  The twisted sides factor exactly as
    M [(Delta x id)Delta(x)] M^H vs M' [(id x Delta)Delta(x)] M'^H with
    M = Omega_12 (Delta x id)(Omega), M' = Omega_23 (id x Delta)(Omega),
    which keeps the triple-space work sparse.
    """
    d = q.hilbert_dim
    triple = (d, d, d)
    wm = q.w
    dense = d**3 <= dense_limit
    from .linalg import max_column_norm, sparse_chain

    if dense:
        w12 = leg_embed(wm, triple, (1, 2)).data
        w23 = leg_embed(wm, triple, (2, 3)).data
        m_l = m_r = None
        if omega is not None:
            om12 = leg_embed(omega, triple, (1, 2)).data
            om23 = leg_embed(omega, triple, (2, 3)).data
            om13 = leg_embed(omega, triple, (1, 3)).data
            m_l = om12 @ (w12.conj().T @ om23 @ w12)
            m_r = om23 @ (w23.conj().T @ om13 @ w23)
        worst = 0.0
        for x in q.basis:
            y = LegOperator(q.delta(x), (d, d))
            lhs = w12.conj().T @ leg_embed(y, triple, (2, 3)).data @ w12
            rhs = w23.conj().T @ leg_embed(y, triple, (1, 3)).data @ w23
            if m_l is not None:
                lhs = m_l @ lhs @ m_l.conj().T
                rhs = m_r @ rhs @ m_r.conj().T
            worst = max(worst, op_norm(lhs - rhs))
        return worst

    from .linalg import sparse_chain

    w12 = leg_embed_sparse(wm, triple, (1, 2))
    w23 = leg_embed_sparse(wm, triple, (2, 3))
    kk = None
    if omega is not None:
        om12 = leg_embed_sparse(omega, triple, (1, 2))
        om23 = leg_embed_sparse(omega, triple, (2, 3))
        om13 = leg_embed_sparse(omega, triple, (1, 3))
        m_l = sparse_chain([om12, w12.conj().T.tocsr(), om23, w12])
        m_r = sparse_chain([om23, w23.conj().T.tocsr(), om13, w23])
        # both sandwich maps are unitary, so by Frobenius invariance
        # || M T M^H - M' T' M'^H ||_F = || T K - K T' ||_F with K = M^H M'
        kk = (m_l.conj().T.tocsr() @ m_r).tocsr()
    worst = 0.0
    for x in q.basis:
        y = LegOperator(q.delta(x), (d, d))
        y23 = leg_embed_sparse(y, triple, (2, 3))
        y13 = leg_embed_sparse(y, triple, (1, 3))
        t_l = sparse_chain([w12.conj().T.tocsr(), y23, w12])
        t_r = sparse_chain([w23.conj().T.tocsr(), y13, w23])
        if kk is None:
            worst = max(worst, _triple_residual_sparse([t_l], [t_r], d**3))
        else:
            diff = (t_l @ kk - kk @ t_r).tocsr()
            fro = float(np.sqrt((np.abs(diff.data) ** 2).sum())) if diff.nnz else 0.0
            worst = max(worst, fro)
    return worst


def invariance_residuals(
    q: QuantumGroupData,
    delta_fn: Callable[[np.ndarray], np.ndarray] | None = None,
    phi_density: np.ndarray | None = None,
    psi_density: np.ndarray | None = None,
) -> tuple[float, float]:
    """(left, right) invariance defects of the Haar functionals.

    Left: (omega x phi)Delta(x) = omega(1) phi(x) over matrix units omega
    and the whole basis; right invariance uses psi on the first leg.
    """
    d = q.hilbert_dim
    rho = q.haar_density if phi_density is None else phi_density
    rho_psi = q.right_density if psi_density is None else psi_density
    delta_fn = delta_fn or q.delta
    worst_l = worst_r = 0.0
    eye = np.eye(d)
    for x in q.basis:
        t4 = delta_fn(x).reshape(d, d, d, d)
        left = np.einsum("ij,ajbi->ab", rho, t4)
        worst_l = max(worst_l, float(np.abs(left - q.phi(x) * eye).max()))
        right = np.einsum("ij,jaib->ab", rho_psi, t4)
        target = complex(np.trace(rho_psi @ x)) * eye
        worst_r = max(worst_r, float(np.abs(right - target).max()))
    return worst_l, worst_r


def antipode_flip_residual(
    q: QuantumGroupData,
    conj_matrix: np.ndarray | None = None,
    delta_fn: Callable[[np.ndarray], np.ndarray] | None = None,
) -> float:
    """Residual of sigma (R x R) Delta = Delta R over the basis.

    ``conj_matrix`` is the V with R(x) = V x^T V^H; the default is the dual
    modular conjugation (untwisted antipode), a twisted antipode
    u R(.) u^* passes V = u @ J_hat.
    """
    d = q.hilbert_dim
    delta_fn = delta_fn or q.delta
    v = q.j_hat.matrix if conj_matrix is None else np.asarray(conj_matrix, dtype=complex)
    vv = np.kron(v, v)
    sig = flip_operator(d).data
    worst = 0.0
    for x in q.basis:
        y = delta_fn(x)
        rry = vv @ y.T @ vv.conj().T
        lhs = sig @ rry @ sig
        rhs = delta_fn(v @ x.T @ v.conj().T)
        worst = max(worst, op_norm(lhs - rhs))
    return worst


def qg_match_report(q1: QuantumGroupData, q2: QuantumGroupData) -> dict:
    """Span distance, W distance and weight match (after normalization).

    Used for duality statements: dual of the function algebra against the
    group algebra, and bidual against the original.
    """
    n1 = q1.basis.reshape(q1.algebra_dim, -1)
    n2 = q2.basis.reshape(q2.algebra_dim, -1)
    p1, _ = np.linalg.qr(n1.T)
    p2, _ = np.linalg.qr(n2.T)
    proj1 = p1 @ p1.conj().T
    proj2 = p2 @ p2.conj().T
    span = op_norm(proj1 - proj2)
    w_dist = op_norm(q1.w.data - q2.w.data)
    s1 = q1.haar_density / np.trace(q1.haar_density)
    s2 = q2.haar_density / np.trace(q2.haar_density)
    weight = op_norm(s1 - s2)
    worst_delta = 0.0
    for x in q2.basis:
        worst_delta = max(worst_delta, op_norm(q1.delta(x) - q2.delta(x)))
    return {
        "span": float(span),
        "w": float(w_dist),
        "weight_normalized": float(weight),
        "delta_on_basis": float(worst_delta),
    }


def pentagon(q: QuantumGroupData) -> float:
    return pentagon_residual(q.w)
