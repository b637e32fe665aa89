import numpy as np
import pytest


def random_spd(rng, n, cond=10.0):
    """Random SPD matrix with eigenvalues in [1, cond]."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eigs = rng.uniform(1.0, cond, size=n)
    return (q * eigs) @ q.T


def random_orthonormal(rng, n, k):
    q, _ = np.linalg.qr(rng.standard_normal((n, max(k, 1))))
    return q[:, :k]


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
