"""Closed-form boundary densities for halfspace and disc constraints.

Projecting a Gaussian onto a convex set piles mass onto the boundary; when
the normal cone along a boundary piece is one-dimensional the resulting
surface density has a closed form built from two Gaussian integrals:

    int_0^inf exp(a t^2 + b t + c) dt                      (a < 0)
    int_0^inf (d + f t) exp(-(a t^2 + b t + c)/2) dt       (a > 0)

Both are evaluated through the scaled complementary error function
``erfcx(s) = exp(s^2) erfc(s)`` so the exploding exponential and vanishing
erfc factors never meet in floating point.  ``quad_*`` versions integrate
numerically and serve as independent cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.special import erfc, erfcx

from projpost.gaussian import Gaussian

_SQRT_PI = np.sqrt(np.pi)
_SQRT_2PI = np.sqrt(2.0 * np.pi)


def gauss_integral_linear(a, b, c):
    """int_0^inf exp(a t^2 + b t + c) dt for a < 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    if np.any(a >= 0):
        raise ValueError("requires a < 0")
    s = -b / (2.0 * np.sqrt(-a))
    out = 0.5 * _SQRT_PI / np.sqrt(-a) * np.exp(c) * erfcx(s)
    return float(out) if out.ndim == 0 else out


def gauss_integral_affine(a, b, c, d, f):
    """int_0^inf (d + f t) exp(-(a t^2 + b t + c)/2) dt for a > 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    d = np.asarray(d, dtype=float)
    f = np.asarray(f, dtype=float)
    if np.any(a <= 0):
        raise ValueError("requires a > 0")
    s = b / np.sqrt(8.0 * a)
    out = np.exp(-0.5 * c) / (4.0 * a**1.5) * (
        4.0 * f * np.sqrt(a) + _SQRT_2PI * (2.0 * a * d - b * f) * erfcx(s)
    )
    return float(out) if out.ndim == 0 else out


def quad_gauss_linear(a, b, c, tail=1e-14):
    """Adaptive-quadrature value of the same integral (cross-check path)."""
    if a >= 0:
        raise ValueError("requires a < 0")

    def integrand(t):
        return np.exp(a * t * t + b * t + c)

    # grow the window until the integrand tail is negligible
    upper = 1.0
    for _ in range(60):
        if integrand(upper) < tail:
            break
        upper *= 2.0
    val = 0.0
    lo = 0.0
    # piecewise panels keep quad happy when the mass sits far from 0
    while lo < upper:
        hi = min(lo + max(upper / 8.0, 1.0), upper)
        part, _ = quad(integrand, lo, hi, epsabs=1e-14, epsrel=1e-12, limit=200)
        val += part
        lo = hi
    return val


def quad_gauss_affine(a, b, c, d, f, tail=1e-14):
    if a <= 0:
        raise ValueError("requires a > 0")

    def integrand(t):
        return (d + f * t) * np.exp(-0.5 * (a * t * t + b * t + c))

    upper = 1.0
    for _ in range(60):
        if abs(integrand(upper)) < tail:
            break
        upper *= 2.0
    val = 0.0
    lo = 0.0
    while lo < upper:
        hi = min(lo + max(upper / 8.0, 1.0), upper)
        part, _ = quad(integrand, lo, hi, epsabs=1e-14, epsrel=1e-12, limit=200)
        val += part
        lo = hi
    return val


@dataclass
class BoundaryDensity:
    """Density over surface coordinates; a dim-0 surface is a point mass."""

    eval: Callable[[np.ndarray], np.ndarray]
    surface_dim: int

    def point_mass(self):
        if self.surface_dim != 0:
            raise ValueError("not a zero-dimensional surface")
        return float(self.eval(np.zeros((1, 0)))[0])


def halfspace_boundary_density(g: Gaussian, a, b, x0, basis) -> BoundaryDensity:
    """Boundary density of the projection onto {x : a @ x <= b}.

    The hyperplane is parameterized as ``x0 + basis @ u``; ``basis`` has
    orthonormal columns spanning the nullspace of ``a``.  The density is the
    Gaussian density on the hyperplane times the mass factor

        sqrt(a' S a / a'a) * sqrt(pi/2) * erfcx(gamma),
        gamma = 2 (b - a' mu) / sqrt(8 a' S a).
    """
    a = np.asarray(a, dtype=float).reshape(-1)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    basis = np.asarray(basis, dtype=float)
    n = g.dim
    if basis.ndim == 1:
        basis = basis[:, None]
    if basis.shape != (n, n - 1):
        raise ValueError(f"basis must be {n}x{n - 1}")
    scale = 1.0 + abs(b)
    if abs(float(a @ x0) - b) > 1e-10 * scale:
        raise ValueError("x0 does not lie on the boundary hyperplane")
    if n > 1:
        gram = basis.T @ basis
        if np.max(np.abs(gram - np.eye(n - 1))) > 1e-8:
            raise ValueError("basis columns are not orthonormal")
        if np.max(np.abs(a @ basis)) > 1e-10 * np.linalg.norm(a):
            raise ValueError("basis is not orthogonal to the normal")
    asa = float(a @ g.cov_apply(a))
    gamma = 2.0 * (b - float(a @ g.mean)) / np.sqrt(8.0 * asa)
    factor = np.sqrt(asa / float(a @ a)) * np.sqrt(np.pi / 2.0) * erfcx(gamma)

    def density(u):
        # 1-D input: batch of scalar coordinates when the surface is a line
        # (n == 2), a single point otherwise; 2-D input: batch of points.
        u = np.asarray(u, dtype=float)
        if n == 1:
            rows = u.shape[0] if u.ndim >= 1 else 1
            pts = np.tile(x0, (rows, 1))
        else:
            if u.ndim == 1:
                u = u.reshape(-1, 1) if n == 2 else u[None, :]
            pts = x0 + u.reshape(-1, n - 1) @ basis.T
        return np.exp(g.log_density(pts)) * factor

    return BoundaryDensity(eval=density, surface_dim=n - 1)


def _disc_geometry(g: Gaussian, u):
    u = np.asarray(u, dtype=float).reshape(-1)
    nu = np.stack([np.cos(u), np.sin(u)], axis=1)
    rn = np.stack([-np.sin(u), np.cos(u)], axis=1)
    sn = nu @ g.cov.T
    alpha = np.einsum("ij,ij->i", nu, sn)
    beta = 2.0 * np.einsum("ij,ij->i", nu, nu - g.mean)
    kdet = sn[:, 0] * rn[:, 1] - sn[:, 1] * rn[:, 0]
    det_sigma = float(np.linalg.det(g.cov))
    return nu, alpha, beta, kdet, det_sigma


def disc_boundary_density(g: Gaussian) -> BoundaryDensity:
    """Angular density on the unit circle for the projected planar Gaussian.

    Computed by integrating the Gaussian along the bent normal ray
    ``n(u) + t Sigma n(u)`` with the ray Jacobian ``K(u) + t det(Sigma)``:

        pi_bd(u) = pi(n(u)) * int_0^inf (K(u) + t det S)
                   exp(-(alpha t^2 + beta t)/2) dt,

    with alpha = n' S n, beta = 2 n'(n - mu), K = det[S n | R n].
    """
    if g.dim != 2:
        raise ValueError("disc boundary density is planar only")

    def density(u):
        nu, alpha, beta, kdet, det_sigma = _disc_geometry(g, u)
        integral = gauss_integral_affine(alpha, beta, 0.0, kdet, det_sigma)
        return np.exp(g.log_density(nu)) * integral

    return BoundaryDensity(eval=density, surface_dim=1)


def disc_boundary_density_display(g: Gaussian) -> BoundaryDensity:
    """Literal transcription of the displayed disc formula (cross-check).

    Same algebra as :func:`disc_boundary_density` once the prefactor exponent
    is read as alpha**(3/2); uses the plain exp * erfc product, so it is only
    valid away from extreme arguments.
    """
    if g.dim != 2:
        raise ValueError("disc boundary density is planar only")

    def density(u):
        nu, alpha, beta, kdet, det_sigma = _disc_geometry(g, u)
        expo = np.exp(beta**2 / (8.0 * alpha))
        tailp = erfc(beta / np.sqrt(8.0 * alpha))
        bracket = det_sigma / alpha + _SQRT_PI / np.sqrt(8.0) / alpha**1.5 \
            * (2.0 * alpha * kdet - beta * det_sigma) * expo * tailp
        return np.exp(g.log_density(nu)) * bracket

    return BoundaryDensity(eval=density, surface_dim=1)


def halfspace_boundary_mass(g: Gaussian, a, b):
    """Total projected mass on the boundary hyperplane of {a @ x <= b}.

    Equals the Gaussian tail probability beyond the halfspace; handy for
    normalization checks without integrating the surface density.
    """
    a = np.asarray(a, dtype=float).reshape(-1)
    asa = float(a @ g.cov_apply(a))
    gamma = (b - float(a @ g.mean)) / np.sqrt(asa)
    return 0.5 * erfc(gamma / np.sqrt(2.0))
