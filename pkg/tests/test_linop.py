import numpy as np
import scipy.sparse as sp

from projpost.linop import (
    DenseOperator,
    MatrixFreeOperator,
    SparseOperator,
    adjoint_mismatch,
    as_operator,
    min_eig_pair,
)


def test_adjoint_consistency_all_backings(rng):
    mat = rng.standard_normal((7, 5))
    ops = [
        DenseOperator(mat),
        SparseOperator(sp.csr_matrix(mat)),
        MatrixFreeOperator(lambda x: mat @ x, lambda y: mat.T @ y, mat.shape),
    ]
    for op in ops:
        assert adjoint_mismatch(op, rng) < 1e-10


def test_opnorm_bound_brackets_truth(rng):
    for trial in range(10):
        mat = rng.standard_normal((6 + trial, 4 + trial % 3))
        truth = np.linalg.svd(mat, compute_uv=False)[0] ** 2
        est = DenseOperator(mat).opnorm_sq()
        assert est >= truth * (1 - 1e-9)
        assert est <= truth * 1.02


def test_opnorm_zero_operator():
    assert DenseOperator(np.zeros((3, 4))).opnorm_sq() == 0.0


def test_opnorm_cached():
    op = DenseOperator(np.eye(3))
    first = op.opnorm_sq()
    assert op._opnorm_sq == first
    assert op.opnorm_sq() == first


def test_to_dense_matrixfree(rng):
    mat = rng.standard_normal((4, 6))
    op = MatrixFreeOperator(lambda x: mat @ x, lambda y: mat.T @ y, mat.shape)
    assert np.allclose(op.to_dense(), mat)


def test_min_eig_pair_matches_dense_oracle(rng):
    a = rng.standard_normal((6, 4))
    b = rng.standard_normal((5, 4))
    truth = np.linalg.eigvalsh(a.T @ a + b.T @ b)[0]
    a_op, b_op = DenseOperator(a), DenseOperator(b)
    est = min_eig_pair(a_op, b_op)
    assert abs(est - truth) <= 1e-6 * max(truth, 1.0)
    # cached on the pair
    assert min_eig_pair(a_op, b_op) == est


def test_as_operator_passthrough(rng):
    mat = rng.standard_normal((3, 3))
    op = DenseOperator(mat)
    assert as_operator(op) is op
    assert isinstance(as_operator(sp.csr_matrix(mat)), SparseOperator)
    assert isinstance(as_operator(mat), DenseOperator)
