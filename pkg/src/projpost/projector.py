"""Monte Carlo harness for projected Gaussians and executable theory checks.

``mc_project`` draws from a Gaussian, obliquely projects every draw onto a
constraint set and labels the face each projection lands on.  The check
functions turn the structural facts about the projected distribution into
concrete statistics:

* boundary and relative interior both carry positive mass;
* the mean lies in the relative interior;
* on the relative interior of each face of a polyhedral set the sample
  distribution matches the (renormalized) restriction of the original
  Gaussian density to the face's affine hull;
* in one dimension, the boundary mass equals the Gaussian mass of the
  inverse image ``z + Sigma * N_C(z)``.

``run_verification`` bundles these into named pass/fail suites for the CLI.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import kstest, norm

from projpost.densities import (
    gauss_integral_affine,
    gauss_integral_linear,
    quad_gauss_affine,
    quad_gauss_linear,
)
from projpost.gaussian import Gaussian
from projpost.sets import (
    Ball2D,
    Box,
    ConstraintSet,
    FaceId,
    Halfspace,
    NonnegativeOrthant,
    PolyhedralCone,
    QuarterDisc,
    WholeSpace,
    activity_tol,
    pack_active_codes,
    unpack_active_code,
)
from projpost.solver import oblique_project_batch


@dataclass
class ProjectedSampleSet:
    """Projected draws with per-sample face labels and generation metadata."""

    samples: np.ndarray
    face_codes: np.ndarray
    code_faces: dict[int, FaceId]
    cset: ConstraintSet
    source: dict = field(default_factory=dict)

    @property
    def n_samples(self):
        return self.samples.shape[0]

    @property
    def face_dims(self):
        dims = {c: f.face_dim for c, f in self.code_faces.items()}
        return np.vectorize(dims.get)(self.face_codes)

    @property
    def face_labels(self):
        return [self.code_faces[int(c)] for c in self.face_codes]

    def samples_on_face(self, face: FaceId):
        code = int(pack_active_codes(np.asarray([face.active], dtype=bool))[0])
        return self.samples[self.face_codes == code]

    def face_fractions(self):
        """Mapping FaceId -> fraction of samples on that face."""
        out = {}
        for code, face in self.code_faces.items():
            out[face] = float(np.mean(self.face_codes == code))
        return out

    def intrinsic_dim(self):
        k = len(next(iter(self.code_faces.values())).active) \
            if self.code_faces else 0
        none_active = tuple([False] * k)
        return self.cset.face_from_active(none_active).face_dim


def mc_project(g: Gaussian, cset: ConstraintSet, n_samples, rng,
               max_iter=2000, tol=1e-10) -> ProjectedSampleSet:
    """Draw, project obliquely, and label faces (batched)."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    xs = g.sample(rng, size=n_samples)
    if isinstance(cset, WholeSpace):
        zs = xs
    else:
        zs = oblique_project_batch(g, cset, xs, max_iter=max_iter, tol=tol)
    label_tol = activity_tol(zs)
    act = cset.active_matrix(zs, label_tol)
    codes = pack_active_codes(act)
    code_faces = {}
    for code in np.unique(codes):
        active = unpack_active_code(int(code), act.shape[1])
        code_faces[int(code)] = cset.face_from_active(active)
    return ProjectedSampleSet(
        samples=zs, face_codes=codes, code_faces=code_faces, cset=cset,
        source={"n_samples": int(n_samples), "set": repr(cset),
                "mean": g.mean.copy(), "cov": None if g.cov is None else g.cov.copy()},
    )


def check_positive_mass(pss: ProjectedSampleSet):
    """(boundary fraction, interior fraction) of the projected samples."""
    if isinstance(pss.cset, WholeSpace):
        raise ValueError("positive-mass check needs a proper subset")
    interior = pss.face_dims == pss.intrinsic_dim()
    return float(np.mean(~interior)), float(np.mean(interior))


def check_mean_in_relint(pss: ProjectedSampleSet):
    """Whether the sample mean lies strictly in the relative interior."""
    if pss.n_samples < 10_000:
        raise ValueError("needs at least 1e4 samples")
    return bool(pss.cset.strictly_inside(pss.samples.mean(axis=0)))


# ---------------------------------------------------------------------------
# Face geometry helpers
# ---------------------------------------------------------------------------


def _face_line(cset, face):
    """(x0, direction, tmin, tmax) for a one-dimensional face."""
    if face.face_dim != 1:
        raise ValueError("not a one-dimensional face")
    n = cset.dim
    if isinstance(cset, NonnegativeOrthant):
        free = [i for i, a in enumerate(face.active) if not a]
        v = np.zeros(n)
        v[free[0]] = 1.0
        return np.zeros(n), v, 0.0, np.inf
    if isinstance(cset, Box):
        lo_act = face.active[:n]
        hi_act = face.active[n:]
        x0 = np.zeros(n)
        free = None
        for i in range(n):
            if lo_act[i]:
                x0[i] = cset.lo[i]
            elif hi_act[i]:
                x0[i] = cset.hi[i]
            else:
                free = i
        v = np.zeros(n)
        v[free] = 1.0
        return x0, v, float(cset.lo[free]), float(cset.hi[free])
    if isinstance(cset, Halfspace):
        a = cset.a
        x0 = cset.b * a / float(a @ a)
        basis = _null_basis(a[None, :])
        return x0, basis[:, 0], -np.inf, np.inf
    if isinstance(cset, PolyhedralCone):
        mask = np.asarray(face.active, dtype=bool)
        basis = _null_basis(cset.normals[mask])
        if basis.shape[1] != 1:
            raise ValueError("active normals do not cut a line")
        v = basis[:, 0]
        if np.max(cset.normals @ v) > 1e-12:
            v = -v
        if np.max(cset.normals @ v) > 1e-12:
            raise ValueError("face direction infeasible for the cone")
        return np.zeros(cset.dim), v, 0.0, np.inf
    raise ValueError(f"line faces unsupported for {type(cset).__name__}")


def _face_plane(cset, face):
    """(x0, basis (n x 2)) for a two-dimensional face."""
    if face.face_dim != 2:
        raise ValueError("not a two-dimensional face")
    n = cset.dim
    if isinstance(cset, WholeSpace) and n == 2:
        return np.zeros(2), np.eye(2)
    if isinstance(cset, NonnegativeOrthant):
        free = [i for i, a in enumerate(face.active) if not a]
        basis = np.zeros((n, 2))
        basis[free[0], 0] = 1.0
        basis[free[1], 1] = 1.0
        return np.zeros(n), basis
    if isinstance(cset, Box):
        lo_act = face.active[:n]
        hi_act = face.active[n:]
        x0 = np.zeros(n)
        free = []
        for i in range(n):
            if lo_act[i]:
                x0[i] = cset.lo[i]
            elif hi_act[i]:
                x0[i] = cset.hi[i]
            else:
                free.append(i)
        basis = np.zeros((n, 2))
        basis[free[0], 0] = 1.0
        basis[free[1], 1] = 1.0
        return x0, basis
    raise ValueError(f"plane faces unsupported for {type(cset).__name__}")


def _null_basis(rows):
    _, s, vt = np.linalg.svd(rows)
    rank = int(np.sum(s > 1e-10 * s[0])) if s.size else 0
    return vt[rank:].T


def _line_cdf(g, x0, v, tmin, tmax):
    """Quadrature CDF of the restriction of g's density to a line segment."""
    p = g.precision
    vpv = float(v @ p @ v)
    t_star = float(v @ p @ (g.mean - x0)) / vpv
    sd = 1.0 / np.sqrt(vpv)
    lo = max(tmin, t_star - 12.0 * sd)
    hi = min(tmax, t_star + 12.0 * sd)
    ts = np.linspace(lo, hi, 4001)
    pts = x0 + np.outer(ts, v)
    logf = g.log_density(pts)
    f = np.exp(logf - np.max(logf))
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(ts))])
    cdf /= cdf[-1]

    def cdf_fn(t):
        return np.interp(t, ts, cdf, left=0.0, right=1.0)

    return cdf_fn


def energy_two_sample(xs, ys, rng, n_perm=500, max_per_group=600):
    """Permutation p-value of the two-sample energy statistic."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape[0] > max_per_group:
        xs = xs[rng.choice(xs.shape[0], max_per_group, replace=False)]
    if ys.shape[0] > max_per_group:
        ys = ys[rng.choice(ys.shape[0], max_per_group, replace=False)]
    pooled = np.vstack([xs, ys])
    nn = pooled.shape[0]
    diff = pooled[:, None, :] - pooled[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    n_x = xs.shape[0]

    def stat(idx_x):
        in_x = np.zeros(nn, dtype=bool)
        in_x[idx_x] = True
        n1 = int(in_x.sum())
        n2 = nn - n1
        cross = dist[in_x][:, ~in_x].mean()
        within_x = dist[in_x][:, in_x].sum() / (n1 * n1)
        within_y = dist[~in_x][:, ~in_x].sum() / (n2 * n2)
        return 2.0 * cross - within_x - within_y

    obs = stat(np.arange(n_x))
    hits = 0
    for _ in range(n_perm):
        perm = rng.permutation(nn)[:n_x]
        if stat(perm) >= obs:
            hits += 1
    pvalue = (1.0 + hits) / (n_perm + 1.0)
    return obs, pvalue


@dataclass
class FaceTestReport:
    face: FaceId
    n_samples: int
    method: str
    statistic: float
    pvalue: float
    passed: bool


def check_face_proportionality(pss: ProjectedSampleSet, face: FaceId,
                               level=0.01, rng=None,
                               min_samples=500) -> FaceTestReport:
    """Goodness of fit of the samples on relint(face) against the restricted
    Gaussian density (KS on line faces, energy test on plane faces)."""
    g = Gaussian(pss.source["mean"], pss.source["cov"])
    on_face = pss.samples_on_face(face)
    if on_face.shape[0] < min_samples:
        raise ValueError(
            f"only {on_face.shape[0]} samples on face, need {min_samples}")
    rng = rng or np.random.default_rng(0)
    if face.face_dim == 1:
        x0, v, tmin, tmax = _face_line(pss.cset, face)
        ts = (on_face - x0) @ v
        cdf_fn = _line_cdf(g, x0, v, tmin, tmax)
        res = kstest(ts, cdf_fn)
        return FaceTestReport(face, on_face.shape[0], "ks",
                              float(res.statistic), float(res.pvalue),
                              bool(res.pvalue > level))
    if face.face_dim == 2:
        x0, basis = _face_plane(pss.cset, face)
        us = (on_face - x0) @ basis
        ref = _sample_restricted_plane(g, pss.cset, x0, basis,
                                       min(2000, 4 * on_face.shape[0]), rng)
        stat, pvalue = energy_two_sample(us, ref, rng)
        return FaceTestReport(face, on_face.shape[0], "energy",
                              float(stat), float(pvalue),
                              bool(pvalue > level))
    raise ValueError("only line and plane faces are testable")


def _sample_restricted_plane(g, cset, x0, basis, n_out, rng, max_tries=400):
    """Rejection-sample the restriction of g's density to a feasible plane."""
    p = g.precision
    m = basis.T @ p @ basis
    rhs = basis.T @ p @ (g.mean - x0)
    mean_u = np.linalg.solve(m, rhs)
    cov_u = np.linalg.inv(m)
    chol = np.linalg.cholesky(0.5 * (cov_u + cov_u.T))
    out = []
    got = 0
    for _ in range(max_tries):
        z = rng.standard_normal((max(n_out, 200), 2))
        us = mean_u + z @ chol.T
        pts = x0 + us @ basis.T
        viol = np.array([cset.violation(pt) for pt in pts])
        keep = us[viol < 0]
        out.append(keep)
        got += keep.shape[0]
        if got >= n_out:
            break
    us = np.vstack(out)
    if us.shape[0] < n_out:
        raise ValueError("rejection sampling on the face plane stalled")
    return us[:n_out]


def boundary_mass_identity_1d(mu, sigma_sq, bound, n_samples, rng):
    """MC boundary mass vs Gaussian mass of the inverse image, 1-D halfspace.

    For C = {x <= bound} the inverse image of the boundary point is
    [bound, inf); returns (mc_fraction, exact_mass, binomial 3-sigma).
    """
    g = Gaussian([mu], [[sigma_sq]])
    cset = Halfspace(np.array([1.0]), float(bound))
    pss = mc_project(g, cset, n_samples, rng)
    boundary_frac, _ = check_positive_mass(pss)
    exact = float(norm.sf(bound, loc=mu, scale=np.sqrt(sigma_sq)))
    sigma3 = 3.0 * np.sqrt(exact * (1.0 - exact) / n_samples)
    return boundary_frac, exact, sigma3


# ---------------------------------------------------------------------------
# Verification suites (surfaced through the `verify` CLI subcommand)
# ---------------------------------------------------------------------------


@dataclass
class VerifyResult:
    name: str
    passed: bool
    detail: str


def _random_spd(rng, n, cond_max=20.0):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eigs = rng.uniform(1.0, cond_max, size=n)
    return (q * eigs) @ q.T


def run_verification(seed=20260810, n_samples=50_000, tamper=False):
    """Run the theory suites; returns a list of VerifyResult."""
    rng = np.random.default_rng(seed)
    results = []
    # tampering shrinks tolerances to provoke failures (test hook)
    shrink = 1e-9 if tamper else 1.0

    worst = 0.0
    for _ in range(1000):
        a = rng.uniform(-4.0, -0.5)
        b = rng.uniform(-5.0, 5.0)
        c = rng.uniform(-2.0, 2.0)
        v1 = gauss_integral_linear(a, b, c)
        v2 = quad_gauss_linear(a, b, c)
        worst = max(worst, abs(v1 - v2) / max(abs(v2), 1e-300))
    results.append(VerifyResult(
        "half-line gaussian integral identity vs quadrature",
        worst < 1e-9 * shrink, f"max rel err {worst:.3e}"))

    worst = 0.0
    for _ in range(1000):
        a = rng.uniform(0.5, 4.0)
        b = rng.uniform(-5.0, 5.0)
        c = rng.uniform(-2.0, 2.0)
        d = rng.uniform(-3.0, 3.0)
        f = rng.uniform(-3.0, 3.0)
        v1 = gauss_integral_affine(a, b, c, d, f)
        v2 = quad_gauss_affine(a, b, c, d, f)
        worst = max(worst, abs(v1 - v2) / max(abs(v2), 1e-12))
    results.append(VerifyResult(
        "affine-weight gaussian integral identity vs quadrature",
        worst < 1e-9 * shrink, f"max rel err {worst:.3e}"))

    n_mass = max(2000, n_samples // 5)
    instances = [
        (Gaussian([0.3], [[1.0]]), Halfspace(np.array([1.0]), 0.0)),
        (Gaussian([0.5, 0.5], _random_spd(rng, 2)), Box.unit(2)),
        (Gaussian([-0.5, 0.8], _random_spd(rng, 2)), NonnegativeOrthant(2)),
        (Gaussian([0.2, -0.4, 0.1], _random_spd(rng, 3)), NonnegativeOrthant(3)),
        (Gaussian([0.4, 0.2], _random_spd(rng, 2)), Ball2D()),
        (Gaussian([0.1, 0.3], _random_spd(rng, 2)), QuarterDisc()),
    ]
    ok = True
    details = []
    for g, cset in instances:
        pss = mc_project(g, cset, n_mass, rng)
        bf, inf_ = check_positive_mass(pss)
        floor = 1e-4 if not tamper else 0.9
        ok = ok and bf > floor and inf_ > floor
        details.append(f"{type(cset).__name__}: bd {bf:.3f} int {inf_:.3f}")
    results.append(VerifyResult(
        "positive probability on boundary and relative interior",
        ok, "; ".join(details)))

    g = Gaussian([-5.0, -5.0], 9.0 * np.eye(2))
    pss = mc_project(g, NonnegativeOrthant(2), max(10_000, n_samples // 5), rng)
    mean = pss.samples.mean(axis=0)
    ok_orthant = check_mean_in_relint(pss)
    g2 = Gaussian([0.2, 0.7], _random_spd(rng, 2))
    pss2 = mc_project(g2, Box.unit(2), max(10_000, n_samples // 5), rng)
    ok_box = check_mean_in_relint(pss2)
    results.append(VerifyResult(
        "projected mean lies in the relative interior",
        ok_orthant and ok_box,
        f"orthant mean {mean}, box mean {pss2.samples.mean(axis=0)}"))

    ok = True
    details = []
    level = 0.01 if not tamper else 0.999999
    for rep in range(2):
        g = Gaussian(rng.uniform(-1.5, -0.5, size=2), _random_spd(rng, 2, 10.0))
        pss = mc_project(g, NonnegativeOrthant(2), n_samples, rng)
        for face in pss.code_faces.values():
            if face.face_dim != 1:
                continue
            rep_face = check_face_proportionality(pss, face, level=level, rng=rng)
            ok = ok and rep_face.passed
            details.append(f"p={rep_face.pvalue:.3f}")
    results.append(VerifyResult(
        "face densities proportional to the unprojected density",
        ok, "KS " + ", ".join(details)))

    frac, exact, sig3 = boundary_mass_identity_1d(
        0.4, 1.3, 0.0, n_samples, rng)
    tol = sig3 if not tamper else sig3 * 1e-9
    results.append(VerifyResult(
        "one-dimensional inverse-image boundary mass",
        abs(frac - exact) <= tol,
        f"mc {frac:.5f} vs exact {exact:.5f} (3 sigma {sig3:.5f})"))

    return results
