"""Test-problem builders: blur and tomography operators, phantoms, noisy data.

Conventions: 1-D signals live on a grid of spacing ``1/n``; 2-D images are
``(side, side)`` arrays flattened in C order (row index = y, column = x) on a
square of unit pixels centered at the origin, so ray/pixel intersection
lengths are in pixel units.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from projpost import kernels
from projpost.linop import DenseOperator, LinearOperator, SparseOperator, min_eig_pair

_PD_RTOL = 1e-10


def build_blur_operator(n, gamma):
    """Toeplitz operator of a sampled Gaussian kernel, grid spacing 1/n."""
    if n < 2 or gamma <= 0:
        raise ValueError("need n >= 2 and gamma > 0")
    h = 1.0 / n
    idx = np.arange(n)
    col = h / (gamma * np.sqrt(2.0 * np.pi)) * np.exp(-0.5 * (h * idx / gamma) ** 2)
    return DenseOperator(sla.toeplitz(col))


def build_periodic_diff(n):
    """Circulant forward difference, (Lx)_i = x_{i+1 mod n} - x_i.

    Singular on constants; pair it with a full-rank data operator.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    mat = -np.eye(n) + np.eye(n, k=1)
    mat[n - 1, 0] = 1.0
    return DenseOperator(mat)


def build_diff_2d(rows, cols):
    """Stacked horizontal and vertical first differences of an image.

    Output rows: first all horizontal differences (y, x+1)-(y, x), then all
    vertical differences (y+1, x)-(y, x); input is the C-order flattening of
    a (rows, cols) image.  Singular on constants.
    """
    if rows < 2 or cols < 2:
        raise ValueError("need rows, cols >= 2")
    n = rows * cols

    def flat(y, x):
        return y * cols + x

    data, ri, ci = [], [], []
    r = 0
    for y in range(rows):
        for x in range(cols - 1):
            ri += [r, r]
            ci += [flat(y, x + 1), flat(y, x)]
            data += [1.0, -1.0]
            r += 1
    for y in range(rows - 1):
        for x in range(cols):
            ri += [r, r]
            ci += [flat(y + 1, x), flat(y, x)]
            data += [1.0, -1.0]
            r += 1
    mat = sp.coo_matrix((data, (ri, ci)), shape=(r, n)).tocsr()
    return SparseOperator(mat)


def radon_angles(n_angles):
    """Projection angles, uniform over [0, 180) degrees, in radians."""
    return np.arange(n_angles) * (np.pi / n_angles)


def radon_offsets(n_rays):
    """Detector offsets in pixel units, unit spacing, centered on the axis."""
    return (np.arange(n_rays) - 0.5 * (n_rays - 1)) * 1.0


def build_radon(img_side, n_angles, n_rays):
    """Sparse parallel-beam transform; entries are ray/pixel chord lengths."""
    if img_side < 1 or n_angles < 1 or n_rays < 1:
        raise ValueError("all sizes must be >= 1")
    rows, cols, vals = kernels.radon_entries(
        img_side, radon_angles(n_angles), radon_offsets(n_rays))
    mat = sp.coo_matrix(
        (vals, (rows, cols)),
        shape=(n_angles * n_rays, img_side * img_side)).tocsr()
    return SparseOperator(mat)


# Ellipses of the head phantom (high-contrast variant): intensity,
# semi-axes (a, b), center (x0, y0), rotation in degrees.
SHEPP_LOGAN_ELLIPSES = (
    (1.00, 0.6900, 0.9200, 0.00, 0.0000, 0.0),
    (-0.80, 0.6624, 0.8740, 0.00, -0.0184, 0.0),
    (-0.20, 0.1100, 0.3100, 0.22, 0.0000, -18.0),
    (-0.20, 0.1600, 0.4100, -0.22, 0.0000, 18.0),
    (0.10, 0.2100, 0.2500, 0.00, 0.3500, 0.0),
    (0.10, 0.0460, 0.0460, 0.00, 0.1000, 0.0),
    (0.10, 0.0460, 0.0460, 0.00, -0.1000, 0.0),
    (0.10, 0.0460, 0.0230, -0.08, -0.6050, 0.0),
    (0.10, 0.0230, 0.0230, 0.00, -0.6050, 0.0),
    (0.10, 0.0230, 0.0460, 0.06, -0.6050, 0.0),
)


def shepp_logan(side):
    """Head phantom on [-1, 1]^2, additively rendered, clamped to >= 0.

    Returns the C-order flattened (side, side) image; values lie in [0, 1].
    """
    if side < 16:
        raise ValueError("need side >= 16")
    coords = -1.0 + (np.arange(side) + 0.5) * (2.0 / side)
    xg, yg = np.meshgrid(coords, coords)
    img = np.zeros((side, side))
    for inten, a, b, x0, y0, phi_deg in SHEPP_LOGAN_ELLIPSES:
        phi = np.deg2rad(phi_deg)
        xs = xg - x0
        ys = yg - y0
        xr = np.cos(phi) * xs + np.sin(phi) * ys
        yr = -np.sin(phi) * xs + np.cos(phi) * ys
        img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += inten
    return np.maximum(img, 0.0).ravel()


# Breakpoints of the piecewise test signal, as fractions of the length:
# a 0->1->0 step block, a plateau at 1 carrying a small dip, a raised-cosine
# bump 0->1->0, flat zero elsewhere.
SIGNAL_BREAKPOINTS = {
    "step_block": (0.10, 0.25),
    "plateau": (0.35, 0.55),
    "dip": (0.42, 0.47),
    "dip_value": 0.85,
    "smooth_bump": (0.65, 0.90),
}


def make_test_signal(n):
    """Piecewise signal in [0, 1] mixing jumps, a near-extreme dip and a ramp."""
    if n < 16:
        raise ValueError("need n >= 16")
    t = np.arange(n) / n
    x = np.zeros(n)
    b0, b1 = SIGNAL_BREAKPOINTS["step_block"]
    x[(t >= b0) & (t < b1)] = 1.0
    p0, p1 = SIGNAL_BREAKPOINTS["plateau"]
    x[(t >= p0) & (t < p1)] = 1.0
    d0, d1 = SIGNAL_BREAKPOINTS["dip"]
    x[(t >= d0) & (t < d1)] = SIGNAL_BREAKPOINTS["dip_value"]
    s0, s1 = SIGNAL_BREAKPOINTS["smooth_bump"]
    bump = (t >= s0) & (t < s1)
    x[bump] = 0.5 * (1.0 - np.cos(2.0 * np.pi * (t[bump] - s0) / (s1 - s0)))
    return x


@dataclass
class ProblemInstance:
    """Forward model plus synthetic noisy data, reproducible from the seed."""

    a_op: LinearOperator
    l_op: LinearOperator
    x_true: np.ndarray
    b: np.ndarray
    lambda_true: float
    noise_seed: int
    relative_noise: float
    meta: dict = field(default_factory=dict)


def make_instance(a_op, l_op, x_true, lambda_true, seed, meta=None):
    """Attach data b = A x + e, e ~ N(0, (lambda I)^{-1}), to a model."""
    x_true = np.asarray(x_true, dtype=float).reshape(-1)
    if a_op.cols != x_true.size or l_op.cols != x_true.size:
        raise ValueError("operator/signal dimension mismatch")
    mu_min = min_eig_pair(a_op, l_op)
    mu_max = a_op.opnorm_sq() + l_op.opnorm_sq()
    if not mu_min > _PD_RTOL * mu_max:
        raise ValueError("A^T A + L^T L is singular; posterior is improper")
    rng = np.random.default_rng(seed)
    ax = a_op.apply(x_true)
    e = rng.standard_normal(a_op.rows) / np.sqrt(lambda_true)
    b = ax + e
    rel = float(np.linalg.norm(e) / np.linalg.norm(ax))
    return ProblemInstance(a_op=a_op, l_op=l_op, x_true=x_true, b=b,
                           lambda_true=float(lambda_true),
                           noise_seed=int(seed), relative_noise=rel,
                           meta=dict(meta or {}))


def deblur_instance(n=128, gamma=0.02, lambda_true=1000.0, seed=0):
    """1-D Gaussian deblurring problem with a periodic-difference prior."""
    a_op = build_blur_operator(n, gamma)
    l_op = build_periodic_diff(n)
    x_true = make_test_signal(n)
    meta = {"kind": "deblur", "n": n, "gamma": gamma}
    return make_instance(a_op, l_op, x_true, lambda_true, seed, meta)


def ct_instance(side=32, n_angles=45, n_rays=45, lambda_true=5.0, seed=0):
    """Parallel-beam CT of the head phantom with a 2-D difference prior."""
    a_op = build_radon(side, n_angles, n_rays)
    l_op = build_diff_2d(side, side)
    x_true = shepp_logan(side)
    meta = {"kind": "ct", "side": side, "n_angles": n_angles, "n_rays": n_rays}
    return make_instance(a_op, l_op, x_true, lambda_true, seed, meta)
