"""Multivariate Gaussians with cached covariance/precision factorizations.

A ``Gaussian`` is held either with a dense covariance (factorized on
construction, so positive definiteness is checked up front) or implicitly
through a factor ``P`` of the precision ``P^T P``.  The implicit form
materializes the dense covariance when the dimension is at most
``dense_threshold``; above that only the operations needed by the projection
solver (mean, precision products) are available.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from projpost.linop import DenseOperator, LinearOperator, as_operator

_SYM_RTOL = 1e-12
DENSE_THRESHOLD = 4096


class Gaussian:
    """N(mean, cov) with lower-triangular factors of cov and precision."""

    def __init__(self, mean, cov):
        mean = np.asarray(mean, dtype=float).reshape(-1)
        cov = np.asarray(cov, dtype=float)
        n = mean.size
        if cov.shape != (n, n):
            raise ValueError(f"covariance must be {n}x{n}, got {cov.shape}")
        asym = np.linalg.norm(cov - cov.T)
        if asym > _SYM_RTOL * max(np.linalg.norm(cov), 1e-300):
            raise ValueError("covariance is not symmetric")
        cov = 0.5 * (cov + cov.T)
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError("covariance is not positive definite") from exc
        self.mean = mean
        self.cov = cov
        self.chol = chol
        self._prec = None
        self._prec_chol = None
        self._prec_factor = None
        self._prec_factor_op = None

    @classmethod
    def from_precision(cls, mean, prec):
        """Construct from a dense precision matrix."""
        prec = np.asarray(prec, dtype=float)
        mch = np.linalg.cholesky(0.5 * (prec + prec.T))
        cov = sla.cho_solve((mch, True), np.eye(prec.shape[0]))
        g = cls(mean, 0.5 * (cov + cov.T))
        g._prec = 0.5 * (prec + prec.T)
        g._prec_chol = mch
        return g

    @classmethod
    def from_precision_factor(cls, mean, factor, dense_threshold=DENSE_THRESHOLD):
        """Gaussian with precision ``P^T P`` given the factor ``P``.

        Below the dense threshold the covariance is materialized and the full
        interface is available; above it only mean/precision products work.
        """
        mean = np.asarray(mean, dtype=float).reshape(-1)
        op = as_operator(factor)
        n = mean.size
        if op.cols != n:
            raise ValueError("factor column count does not match mean length")
        if n <= dense_threshold:
            p = op.to_dense()
            g = cls.from_precision(mean, p.T @ p)
            g._prec_factor = op
            return g
        g = cls.__new__(cls)
        g.mean = mean
        g.cov = None
        g.chol = None
        g._prec = None
        g._prec_chol = None
        g._prec_factor = op
        g._prec_factor_op = None
        return g

    @property
    def dim(self):
        return self.mean.size

    def _require_dense(self, what):
        if self.cov is None:
            raise NotImplementedError(
                f"{what} requires a materialized covariance "
                "(dimension above the dense threshold)"
            )

    @property
    def precision(self):
        """Dense precision matrix (cached)."""
        self._require_dense("precision")
        if self._prec is None:
            linv = sla.solve_triangular(self.chol, np.eye(self.dim), lower=True)
            prec = linv.T @ linv
            self._prec = 0.5 * (prec + prec.T)
        return self._prec

    @property
    def prec_chol(self):
        """Lower-triangular factor M with M M^T equal to the precision."""
        self._require_dense("prec_chol")
        if self._prec_chol is None:
            self._prec_chol = np.linalg.cholesky(self.precision)
        return self._prec_chol

    def precision_factor_operator(self) -> LinearOperator:
        """Operator P with P^T P equal to the precision (cached)."""
        if self._prec_factor is not None:
            return self._prec_factor
        if self._prec_factor_op is None:
            self._prec_factor_op = DenseOperator(self.prec_chol.T)
        return self._prec_factor_op

    def precision_apply(self, v):
        """Product of the precision matrix with ``v``."""
        if self.cov is not None:
            return sla.cho_solve((self.chol, True), v)
        op = self._prec_factor
        return op.apply_t(op.apply(v))

    def cov_apply(self, v):
        self._require_dense("cov_apply")
        return self.cov @ v

    def sample(self, rng, size=None):
        """Draw from N(mean, cov); shape (n,) or (size, n)."""
        self._require_dense("sampling")
        if size is None:
            return self.mean + self.chol @ rng.standard_normal(self.dim)
        z = rng.standard_normal((int(size), self.dim))
        return self.mean + z @ self.chol.T

    def sample_precision_noise(self, rng, size=None):
        """Draw from N(0, cov^{-1}) via the precision factor."""
        self._require_dense("precision sampling")
        if size is None:
            return self.prec_chol @ rng.standard_normal(self.dim)
        z = rng.standard_normal((int(size), self.dim))
        return z @ self.prec_chol.T

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError("point dimension mismatch")
        self._require_dense("log_density")
        r = np.atleast_2d(x) - self.mean
        u = sla.solve_triangular(self.chol, r.T, lower=True)
        quad = np.sum(u * u, axis=0)
        logdet = self.dim * np.log(2.0 * np.pi) \
            + 2.0 * np.sum(np.log(np.diag(self.chol)))
        out = -0.5 * (quad + logdet)
        return float(out[0]) if x.ndim == 1 else out

    def density(self, x):
        return np.exp(self.log_density(x))

    def __repr__(self):
        return f"Gaussian(dim={self.dim})"


def sample_gaussian(g, rng, size=None):
    return g.sample(rng, size=size)


def sample_precision_noise(g, rng, size=None):
    return g.sample_precision_noise(rng, size=size)


def log_density(g, x):
    return g.log_density(x)


def mixed_basis_full_rank(u1, u2, sigma, rel_tol=1e-10):
    """Whether the columns of [U1, Sigma @ U2] have numerical rank n."""
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    if u1.ndim == 1:
        u1 = u1[:, None]
    if u2.ndim == 1:
        u2 = u2[:, None]
    sigma = np.asarray(sigma, dtype=float)
    if u1.shape[0] != u2.shape[0] or sigma.shape != (u1.shape[0],) * 2:
        raise ValueError("dimension mismatch")
    m = np.hstack([u1, sigma @ u2])
    if m.shape[1] != m.shape[0]:
        return False
    s = np.linalg.svd(m, compute_uv=False)
    return bool(s[-1] > rel_tol * s[0])
