"""Linear forward maps with transpose application and operator-norm bounds.

Operators are thin wrappers around a dense array, a CSR matrix or a pair of
callables.  They expose the two products the solvers need (``A @ x`` and
``A.T @ y``) plus a cached upper bound on ``||A^T A||_2`` used to set fixed
gradient stepsizes.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

# Fixed-seed stream for power iterations so norm estimates are reproducible
# and independent of user-facing sampling streams.
_POWER_SEED = 0x5EED


def _power_opnorm_sq(apply_fn, apply_t_fn, n, max_iter=500, rtol=1e-12):
    """Largest eigenvalue of A^T A by power iteration (0 for the zero map)."""
    rng = np.random.default_rng(_POWER_SEED)
    v = rng.standard_normal(n)
    nv = np.sqrt(v @ v)
    if nv == 0.0 or n == 0:
        return 0.0
    v /= nv
    lam = 0.0
    for _ in range(max_iter):
        w = apply_t_fn(apply_fn(v))
        lam_new = float(v @ w)
        nw = np.sqrt(w @ w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if lam > 0.0 and abs(lam_new - lam) <= rtol * lam:
            lam = lam_new
            break
        lam = lam_new
    return lam


class LinearOperator:
    """Base class: subclasses set ``shape`` and implement apply/apply_t."""

    shape: tuple[int, int]

    def __init__(self):
        self._opnorm_sq = None
        # positive-definiteness checks for (self, other) operator pairs,
        # keyed by id(other); the value keeps `other` alive so ids stay valid
        self._pd_pairs = {}

    @property
    def rows(self):
        return self.shape[0]

    @property
    def cols(self):
        return self.shape[1]

    def apply(self, x):
        raise NotImplementedError

    def apply_t(self, y):
        raise NotImplementedError

    def __matmul__(self, x):
        return self.apply(x)

    def opnorm_sq(self):
        """Cached upper bound on ``||A^T A||_2`` (power iteration * 1.01)."""
        if self._opnorm_sq is None:
            lam = _power_opnorm_sq(self.apply, self.apply_t, self.cols)
            self._opnorm_sq = 1.01 * lam
        return self._opnorm_sq

    # Backing storage hooks for the compiled solver kernels.
    @property
    def dense(self):
        return None

    @property
    def csr(self):
        return None

    def to_dense(self):
        """Materialize the operator as a dense array (column by column)."""
        m, n = self.shape
        out = np.empty((m, n))
        e = np.zeros(n)
        for j in range(n):
            e[j] = 1.0
            out[:, j] = self.apply(e)
            e[j] = 0.0
        return out


class DenseOperator(LinearOperator):
    """Operator backed by a dense 2-D array."""

    def __init__(self, mat):
        super().__init__()
        mat = np.asarray(mat, dtype=float)
        if mat.ndim != 2:
            raise ValueError("expected a 2-D array")
        self.mat = mat
        self._mat_t = np.ascontiguousarray(mat.T)
        self.shape = mat.shape

    def apply(self, x):
        return self.mat @ x

    def apply_t(self, y):
        return self._mat_t @ y

    @property
    def dense(self):
        return self.mat

    @property
    def dense_t(self):
        return self._mat_t

    def to_dense(self):
        return self.mat


class SparseOperator(LinearOperator):
    """Operator backed by a scipy CSR matrix (transpose precomputed)."""

    def __init__(self, mat):
        super().__init__()
        self.mat = sp.csr_matrix(mat).astype(float)
        self.mat.sort_indices()
        self._mat_t = sp.csr_matrix(self.mat.T)
        self._mat_t.sort_indices()
        self.shape = self.mat.shape

    def apply(self, x):
        return self.mat @ x

    def apply_t(self, y):
        return self._mat_t @ y

    @property
    def csr(self):
        return self.mat

    @property
    def csr_t(self):
        return self._mat_t

    def to_dense(self):
        return self.mat.toarray()


class MatrixFreeOperator(LinearOperator):
    """Operator defined by callables for the forward and transpose products."""

    def __init__(self, apply_fn, apply_t_fn, shape):
        super().__init__()
        self._apply = apply_fn
        self._apply_t = apply_t_fn
        self.shape = (int(shape[0]), int(shape[1]))

    def apply(self, x):
        return self._apply(x)

    def apply_t(self, y):
        return self._apply_t(y)


def as_operator(a):
    """Wrap an ndarray / sparse matrix as an operator; pass operators through."""
    if isinstance(a, LinearOperator):
        return a
    if sp.issparse(a):
        return SparseOperator(a)
    return DenseOperator(np.asarray(a, dtype=float))


def adjoint_mismatch(op, rng, n_trials=5):
    """Max relative defect of <Au, v> = <u, A^T v> over random probes."""
    m, n = op.shape
    worst = 0.0
    for _ in range(n_trials):
        u = rng.standard_normal(n)
        v = rng.standard_normal(m)
        lhs = float(op.apply(u) @ v)
        rhs = float(u @ op.apply_t(v))
        scale = max(abs(lhs), abs(rhs), 1e-30)
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst


def min_eig_pair(a_op, b_op):
    """Smallest eigenvalue of A^T A + B^T B, cached per operator pair.

    Uses power iteration twice: once for the largest eigenvalue mu of
    M = A^T A + B^T B, once for the largest eigenvalue of mu*I - M.
    """
    key = id(b_op)
    hit = a_op._pd_pairs.get(key)
    if hit is not None and hit[0] is b_op:
        return hit[1]

    def m_apply(v):
        return a_op.apply_t(a_op.apply(v)) + b_op.apply_t(b_op.apply(v))

    n = a_op.cols
    mu_max = _power_opnorm_sq(m_apply, lambda v: v, n)

    def shifted(v):
        return mu_max * v - m_apply(v)

    sigma = _power_opnorm_sq(shifted, lambda v: v, n)
    mu_min = mu_max - sigma
    a_op._pd_pairs[key] = (b_op, mu_min)
    return mu_min
