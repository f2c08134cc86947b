import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from qglab.linalg import (
    AntiUnitary,
    FactoredOperator,
    LegOperator,
    QCommutingPair,
    check_q_commuting,
    dft,
    dump_operator,
    flip_operator,
    frobenius,
    functional_calculus,
    leg_embed,
    leg_embed_sparse,
    load_operator,
    op_norm,
    operator_from_json,
    operator_to_json,
    pentagon_residual,
    polar,
    tensor,
)


def rand_op(rng, *legs):
    d = int(np.prod(legs))
    m = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return LegOperator(m, legs)


def test_tensor_identity_cases():
    i2 = LegOperator(np.eye(2), (2,))
    i3 = LegOperator(np.eye(3), (3,))
    out = tensor(i2, i3)
    assert out.legs == (2, 3)
    assert np.array_equal(out.data, np.eye(6))
    q = 0.5
    d1 = LegOperator(np.diag([1, q]), (2,))
    out = tensor(d1, d1)
    assert np.allclose(np.diag(out.data), [1, q, q, q * q])


def test_tensor_acts_on_product_vectors():
    rng = np.random.default_rng(0)
    a, b = rand_op(rng, 2), rand_op(rng, 2)
    ab = tensor(a, b)
    for _ in range(10):
        v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        w = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        lhs = ab.data @ np.kron(v, w)
        rhs = np.kron(a.data @ v, b.data @ w)
        assert np.linalg.norm(lhs - rhs) < 1e-12


def test_tensor_associative_bit_exact():
    rng = np.random.default_rng(1)
    a, b, c = rand_op(rng, 2), rand_op(rng, 3), rand_op(rng, 2)
    lhs = tensor(tensor(a, b), c)
    rhs = tensor(a, tensor(b, c))
    assert np.array_equal(lhs.data, rhs.data)


def test_leg_embed_first_two_is_kron_with_identity():
    rng = np.random.default_rng(2)
    x = rand_op(rng, 2, 2)
    out = leg_embed(x, (2, 2, 2), (1, 2))
    assert np.allclose(out.data, np.kron(x.data, np.eye(2)))
    out = leg_embed(x, (2, 2, 2), (2, 3))
    assert np.allclose(out.data, np.kron(np.eye(2), x.data))


def test_leg_embed_flip_on_1_3_permutes_basis():
    flip = flip_operator(2)
    out = leg_embed(flip, (2, 2, 2), (1, 3))
    # enumerate all 8 basis vectors: (i, j, k) -> (k, j, i)
    for i in range(2):
        for j in range(2):
            for k in range(2):
                v = np.zeros(8)
                v[(i * 2 + j) * 2 + k] = 1
                target = np.zeros(8)
                target[(k * 2 + j) * 2 + i] = 1
                assert np.allclose(out.data @ v, target)


def test_leg_embed_identity_and_sparse_agree():
    rng = np.random.default_rng(3)
    x = rand_op(rng, 2, 3)
    dense = leg_embed(x, (3, 2, 2, 3), (3, 1))
    sparse = leg_embed_sparse(x, (3, 2, 2, 3), (3, 1))
    assert np.allclose(sparse.toarray(), dense.data)
    ident = LegOperator(np.eye(6), (2, 3))
    out = leg_embed(ident, (2, 3, 2), (1, 2))
    assert np.allclose(out.data, np.eye(12))


def test_leg_permutation_involutive():
    rng = np.random.default_rng(4)
    x = rand_op(rng, 2, 3, 2)
    perm = (3, 1, 2)
    moved = x.permute_legs(perm)
    inverse = [0] * 3
    for i, p in enumerate(perm):
        inverse[p - 1] = i + 1
    back = moved.permute_legs(inverse)
    assert np.array_equal(back.data, x.data)
    assert back.legs == x.legs


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 3), st.integers(2, 3), st.integers(0, 10**6))
def test_disjoint_embeds_commute(da, db, seed):
    rng = np.random.default_rng(seed)
    x = rand_op(rng, da)
    y = rand_op(rng, db)
    legs = (da, 2, db)
    ex = leg_embed(x, legs, (1,))
    ey = leg_embed(y, legs, (3,))
    assert op_norm(ex.data @ ey.data - ey.data @ ex.data) < 1e-12


def test_polar_unitary_and_positive_cases():
    rng = np.random.default_rng(5)
    u = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))[0]
    pd = polar(LegOperator(u, (4,)))
    assert op_norm(pd.phase.data - u) < 1e-12
    assert op_norm(pd.modulus.data - np.eye(4)) < 1e-12
    pd = polar(LegOperator(np.diag([2.0, 3.0]), (2,)))
    assert op_norm(pd.phase.data - np.eye(2)) < 1e-12
    assert op_norm(pd.modulus.data - np.diag([2.0, 3.0])) < 1e-12


def test_polar_shift_times_modulus_oracle():
    # cyclic shift times positive diagonal on l2(Z_8); independent oracle:
    # modulus = sqrtm(x^H x) via Hermitian eigendecomposition
    n = 8
    s = np.zeros((n, n))
    for k in range(n):
        s[(k + 1) % n, k] = 1.0
    m = np.diag(0.5 ** np.arange(-n // 2, n // 2))
    x = s @ m
    pd = polar(LegOperator(x, (n,)))
    evals, evecs = np.linalg.eigh(x.conj().T @ x)
    modulus_oracle = evecs @ np.diag(np.sqrt(evals)) @ evecs.conj().T
    assert op_norm(pd.modulus.data - modulus_oracle) < 1e-10
    assert op_norm(pd.phase.data - s) < 1e-10
    assert op_norm(pd.phase.data.conj().T @ pd.phase.data - np.eye(n)) < 1e-10
    assert op_norm(pd.reconstruct().data - x) < 1e-10


def test_polar_rejects_singular():
    with pytest.raises(ValueError, match="kernel"):
        polar(LegOperator(np.diag([1.0, 0.0]), (2,)))


def test_functional_calculus_identity_and_diagonal():
    rng = np.random.default_rng(6)
    u = np.linalg.qr(rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5)))[0]
    x = LegOperator(u @ np.diag(rng.standard_normal(5)) @ u.conj().T, (5,))
    out = functional_calculus(x, lambda z: z)
    assert op_norm(out.data - x.data) < 1e-10
    q = 0.5
    d = LegOperator(np.diag([1, q, q * q]), (3,))
    out = functional_calculus(d, lambda z: z * z)
    assert op_norm(out.data - np.diag([1, q**2, q**4])) < 1e-12


def test_functional_calculus_exp_oracle():
    rng = np.random.default_rng(7)
    h = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    h = 0.5 * (h + h.conj().T)
    out = functional_calculus(LegOperator(h, (6,)), np.exp)
    oracle = scipy.linalg.expm(h)  # scaling-and-squaring reference
    assert op_norm(out.data - oracle) < 1e-9


def test_functional_calculus_rejects_non_normal():
    bad = LegOperator(np.array([[0.0, 1.0], [0.0, 0.0]]), (2,))
    with pytest.raises(ValueError, match="normal"):
        functional_calculus(bad, lambda z: z)


def test_check_q_commuting_identity_case():
    pair = QCommutingPair.from_operators(np.eye(3), np.eye(3), 1.0)
    rep = check_q_commuting(pair)
    assert rep.max_residual() < 1e-12


def test_check_q_commuting_shift_modulus_band():
    # (s, m) on l2(Z_8): s m s^H = q^{-1} m except at the wrap, so the pair
    # is (1/q)-commuting on the interior band
    n, q = 8, 0.5
    s = np.zeros((n, n))
    for k in range(n):
        s[(k + 1) % n, k] = 1.0
    m = np.diag(q ** np.arange(-n // 2, n // 2, dtype=float))
    pair = QCommutingPair.from_operators(s, m, 1.0 / q)
    rows = np.zeros(n, dtype=bool)
    rows[2 : n - 2] = True
    rep = check_q_commuting(pair, rows=rows)
    assert rep.phase_phase < 1e-12
    assert rep.scale_first_on_second < 1e-10
    full = check_q_commuting(pair)
    assert full.scale_first_on_second > 1.0  # wrap rows violate the relation


def test_dft_diagonalizes_shift():
    assert np.allclose(dft(1).data, [[1.0]])
    assert np.allclose(dft(2).data, np.array([[1, 1], [1, -1]]) / np.sqrt(2))
    n = 8
    f = dft(n).data
    s = np.zeros((n, n))
    for k in range(n):
        s[(k + 1) % n, k] = 1.0
    diag = f.conj().T @ s @ f
    target = np.diag(np.exp(2j * np.pi * np.arange(n) / n))
    assert op_norm(diag - target) < 1e-12
    for nn in (3, 16, 64):
        fm = dft(nn).data
        assert op_norm(fm.conj().T @ fm - np.eye(nn)) < 1e-12


def test_norms():
    assert op_norm(np.eye(4)) == pytest.approx(1.0)
    assert frobenius(np.eye(4)) == pytest.approx(2.0)
    assert op_norm(np.zeros((3, 3))) == 0.0
    v = np.array([3.0, 0.0, 0.0])
    vv = np.outer(v, v)
    assert op_norm(vv) == pytest.approx(9.0)
    assert frobenius(vv) == pytest.approx(9.0)


def test_antiunitary_involution_and_sandwich():
    rng = np.random.default_rng(8)
    perm = np.eye(4)[rng.permutation(4)]
    j = AntiUnitary(perm @ perm.T @ perm)  # a real symmetric permutation part
    x = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    xi = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    lhs = j.apply(x @ j.apply(xi))
    rhs = j.sandwich(x) @ xi
    assert np.linalg.norm(lhs - rhs) < 1e-12


def test_pentagon_residual_dense_and_sparse_paths():
    # the function-algebra W of Z_2 passes the pentagon exactly
    from qglab.finiteqg import build_function_algebra
    from qglab.groups import cyclic_group

    w = build_function_algebra(cyclic_group(2)).w
    assert pentagon_residual(w) < 1e-14
    assert pentagon_residual(w, dense_limit=1) < 1e-12  # force sparse path


def test_dump_load_roundtrip(tmp_path):
    rng = np.random.default_rng(9)
    x = rand_op(rng, 2, 3)
    path = tmp_path / "op.qglo"
    dump_operator(x, path)
    back = load_operator(path)
    assert back.legs == x.legs
    assert np.array_equal(back.data, x.data)
    again = operator_from_json(operator_to_json(x))
    assert again.legs == x.legs
    assert np.allclose(again.data, x.data)


def test_factored_operator_materializes_and_applies():
    rng = np.random.default_rng(10)
    m1 = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    m2 = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    op = FactoredOperator((2, 3), [(1, m1), (2, m2)], coefficient=2.0)
    dense = op.materialize()
    oracle = 2.0 * np.kron(m1, np.eye(3)) @ np.kron(np.eye(2), m2)
    assert np.allclose(dense.data, oracle)
    v = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    assert np.allclose(op.apply(v), oracle @ v)
