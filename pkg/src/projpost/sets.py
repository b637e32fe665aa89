"""Closed convex constraint sets: projections, faces and normal cones.

Every set knows its Euclidean projection (used inside the projected-gradient
solver), which of its defining constraints are active at a point, and the
outward normals generating the normal cone on a face.  Faces are identified
by the activity pattern of the defining constraints.

Activity tolerances: points produced by clamping have exactly active
constraints, so ``tol=0`` is safe for box-type sets.  Points produced by an
iterative solver should be labelled with ``activity_tol(x)``.  Containment
checks always allow a small absolute slack for round-off (curved boundaries
land within a few ulps of the constraint surface).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_FP_SLACK = 1e-12


def activity_tol(x):
    """Default activity tolerance for iterative-solver output."""
    x = np.asarray(x)
    scale = float(np.max(np.abs(x))) if x.size else 0.0
    return 1e-9 * (1.0 + scale)


@dataclass(frozen=True)
class FaceId:
    """Activity pattern of the defining constraints plus the face dimension."""

    active: tuple[bool, ...]
    face_dim: int


class ConstraintSet:
    """Base class; subclasses are immutable and shareable."""

    dim: int

    # -- projection ---------------------------------------------------------
    def project(self, x):
        return self.project_batch(np.asarray(x, dtype=float)[None, :])[0]

    def project_batch(self, xs):
        raise NotImplementedError

    # -- membership ---------------------------------------------------------
    def violation(self, x):
        """Max constraint residual (<= 0 inside)."""
        raise NotImplementedError

    def contains(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        scale = float(np.max(np.abs(x))) if x.size else 0.0
        return self.violation(x) <= tol + _FP_SLACK * (1.0 + scale)

    def strictly_inside(self, x):
        """Whether x lies in the relative interior."""
        return self.violation(np.asarray(x, dtype=float)) < 0

    # -- faces ---------------------------------------------------------------
    def active_matrix(self, xs, tol=0.0):
        """Boolean (N, k) activity pattern of the k defining constraints."""
        raise NotImplementedError

    def face_from_active(self, active):
        """FaceId for an activity pattern (tuple of k bools)."""
        raise NotImplementedError

    def face_of(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError("point dimension mismatch")
        if not self.contains(x, tol):
            raise ValueError("point lies outside the set beyond tolerance")
        act = self.active_matrix(x[None, :], tol)[0]
        return self.face_from_active(tuple(bool(a) for a in act))

    def normal_cone_generators(self, face, x=None):
        """Outward normals generating the normal cone on relint(face)."""
        raise NotImplementedError

    # -- solver hooks ---------------------------------------------------------
    def clip_bounds(self):
        """(lo, hi) arrays when projection is a componentwise clip, else None."""
        return None


class WholeSpace(ConstraintSet):
    def __init__(self, dim):
        self.dim = int(dim)

    def project_batch(self, xs):
        return np.array(xs, dtype=float)

    def violation(self, x):
        return -np.inf

    def strictly_inside(self, x):
        return True

    def active_matrix(self, xs, tol=0.0):
        return np.zeros((xs.shape[0], 0), dtype=bool)

    def face_from_active(self, active):
        return FaceId((), self.dim)

    def normal_cone_generators(self, face, x=None):
        return []

    def clip_bounds(self):
        lo = np.full(self.dim, -np.inf)
        hi = np.full(self.dim, np.inf)
        return lo, hi

    def __repr__(self):
        return f"WholeSpace(dim={self.dim})"


class Halfspace(ConstraintSet):
    """{x : a @ x <= b} with a nonzero normal a."""

    def __init__(self, a, b):
        a = np.asarray(a, dtype=float).reshape(-1)
        if not np.any(a != 0.0):
            raise ValueError("halfspace normal must be nonzero")
        self.a = a
        self.b = float(b)
        self.dim = a.size
        self._aa = float(a @ a)

    def project_batch(self, xs):
        xs = np.asarray(xs, dtype=float)
        excess = np.maximum(xs @ self.a - self.b, 0.0)
        return xs - np.outer(excess / self._aa, self.a)

    def violation(self, x):
        return float(self.a @ x - self.b)

    def active_matrix(self, xs, tol=0.0):
        res = np.abs(np.asarray(xs, dtype=float) @ self.a - self.b)
        return (res <= tol + _FP_SLACK * (1.0 + np.abs(self.b)))[:, None]

    def face_from_active(self, active):
        return FaceId(tuple(active), self.dim - 1 if active[0] else self.dim)

    def normal_cone_generators(self, face, x=None):
        return [self.a.copy()] if face.active[0] else []

    def __repr__(self):
        return f"Halfspace(a={self.a}, b={self.b})"


class Box(ConstraintSet):
    """{x : lo <= x <= hi}; equal bounds pin a coordinate."""

    def __init__(self, lo, hi):
        lo = np.asarray(lo, dtype=float).reshape(-1)
        hi = np.asarray(hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError("bound shapes differ")
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        self.lo = lo
        self.hi = hi
        self.dim = lo.size

    @classmethod
    def unit(cls, dim):
        return cls(np.zeros(dim), np.ones(dim))

    def project_batch(self, xs):
        return np.clip(np.asarray(xs, dtype=float), self.lo, self.hi)

    def violation(self, x):
        return float(np.max(np.maximum(self.lo - x, x - self.hi)))

    def strictly_inside(self, x):
        free = self.lo < self.hi
        pinned_ok = np.all(np.abs(x[~free] - self.lo[~free]) == 0.0)
        return bool(pinned_ok and np.all(x[free] > self.lo[free])
                    and np.all(x[free] < self.hi[free]))

    def active_matrix(self, xs, tol=0.0):
        xs = np.asarray(xs, dtype=float)
        lo_act = xs - self.lo <= tol
        hi_act = self.hi - xs <= tol
        return np.concatenate([lo_act, hi_act], axis=1)

    def face_from_active(self, active):
        n = self.dim
        lo_act = np.asarray(active[:n], dtype=bool)
        hi_act = np.asarray(active[n:], dtype=bool)
        return FaceId(tuple(active), int(n - np.sum(lo_act | hi_act)))

    def normal_cone_generators(self, face, x=None):
        gens = []
        for i in range(self.dim):
            if face.active[i]:
                e = np.zeros(self.dim)
                e[i] = -1.0
                gens.append(e)
            if face.active[self.dim + i]:
                e = np.zeros(self.dim)
                e[i] = 1.0
                gens.append(e)
        return gens

    def clip_bounds(self):
        return self.lo.copy(), self.hi.copy()

    def __repr__(self):
        return f"Box(dim={self.dim})"


class NonnegativeOrthant(ConstraintSet):
    def __init__(self, dim):
        self.dim = int(dim)

    def project_batch(self, xs):
        return np.maximum(np.asarray(xs, dtype=float), 0.0)

    def violation(self, x):
        return float(np.max(-x))

    def active_matrix(self, xs, tol=0.0):
        return np.asarray(xs, dtype=float) <= tol

    def face_from_active(self, active):
        return FaceId(tuple(active), int(self.dim - sum(active)))

    def normal_cone_generators(self, face, x=None):
        gens = []
        for i, act in enumerate(face.active):
            if act:
                e = np.zeros(self.dim)
                e[i] = -1.0
                gens.append(e)
        return gens

    def clip_bounds(self):
        return np.zeros(self.dim), np.full(self.dim, np.inf)

    def __repr__(self):
        return f"NonnegativeOrthant(dim={self.dim})"


class PolyhedralCone(ConstraintSet):
    """{x : normals @ x <= 0} in halfspace form.

    Euclidean projection uses Dykstra's alternating scheme over the
    halfspaces; face dimension is the ambient dimension minus the rank of
    the active normals (rank threshold 1e-10 of the top singular value).
    """

    def __init__(self, normals, max_sweeps=5000, sweep_tol=1e-12):
        normals = np.asarray(normals, dtype=float)
        if normals.ndim != 2 or normals.shape[0] == 0:
            raise ValueError("normals must be a nonempty (k, n) array")
        norms = np.linalg.norm(normals, axis=1)
        if np.any(norms == 0.0):
            raise ValueError("zero normal row")
        self.normals = normals
        self._row_sq = norms**2
        self.dim = normals.shape[1]
        self.max_sweeps = int(max_sweeps)
        self.sweep_tol = float(sweep_tol)

    def project_batch(self, xs):
        return np.stack([self._project_one(x) for x in np.asarray(xs, float)])

    def _project_one(self, x):
        k = self.normals.shape[0]
        z = np.array(x, dtype=float)
        corr = np.zeros((k, self.dim))
        scale = 1.0 + float(np.max(np.abs(x)))
        for _ in range(self.max_sweeps):
            moved = 0.0
            for i in range(k):
                w = z + corr[i]
                excess = max(float(self.normals[i] @ w), 0.0) / self._row_sq[i]
                znew = w - excess * self.normals[i]
                corr[i] = w - znew
                moved = max(moved, float(np.max(np.abs(znew - z))))
                z = znew
            if moved <= self.sweep_tol * scale:
                break
        return z

    def violation(self, x):
        return float(np.max(self.normals @ x))

    def active_matrix(self, xs, tol=0.0):
        vals = np.asarray(xs, dtype=float) @ self.normals.T
        return np.abs(vals) <= tol + _FP_SLACK

    def face_from_active(self, active):
        mask = np.asarray(active, dtype=bool)
        if not np.any(mask):
            return FaceId(tuple(active), self.dim)
        sub = self.normals[mask]
        s = np.linalg.svd(sub, compute_uv=False)
        rank = int(np.sum(s > 1e-10 * s[0]))
        return FaceId(tuple(active), self.dim - rank)

    def normal_cone_generators(self, face, x=None):
        return [self.normals[i].copy() for i, a in enumerate(face.active) if a]

    def __repr__(self):
        return f"PolyhedralCone(k={self.normals.shape[0]}, dim={self.dim})"


class Ball2D(ConstraintSet):
    """Planar disc of given radius and center."""

    def __init__(self, radius=1.0, center=(0.0, 0.0)):
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.radius = float(radius)
        self.center = np.asarray(center, dtype=float).reshape(-1)
        if self.center.size != 2:
            raise ValueError("Ball2D lives in the plane")
        self.dim = 2

    def project_batch(self, xs):
        xs = np.asarray(xs, dtype=float)
        d = xs - self.center
        r = np.linalg.norm(d, axis=1)
        shrink = np.where(r > self.radius, self.radius / np.maximum(r, 1e-300), 1.0)
        return self.center + d * shrink[:, None]

    def violation(self, x):
        return float(np.linalg.norm(x - self.center) - self.radius)

    def active_matrix(self, xs, tol=0.0):
        r = np.linalg.norm(np.asarray(xs, dtype=float) - self.center, axis=1)
        return (np.abs(r - self.radius) <= tol + _FP_SLACK * (1.0 + self.radius))[:, None]

    def face_from_active(self, active):
        return FaceId(tuple(active), 1 if active[0] else 2)

    def normal_cone_generators(self, face, x=None):
        if not face.active[0]:
            return []
        if x is None:
            raise ValueError("boundary normal of a disc needs the point")
        d = np.asarray(x, dtype=float) - self.center
        return [d / np.linalg.norm(d)]

    def __repr__(self):
        return f"Ball2D(radius={self.radius}, center={tuple(self.center)})"


class QuarterDisc(ConstraintSet):
    """Unit quarter disc {x >= 0, ||x|| <= 1}; used by the density workflow.

    Euclidean projection composes exactly: clamp to the orthant, then shrink
    radially (both sets are 'centered' at the origin, so the KKT conditions
    of the composition match those of the intersection).
    Constraint order for faces: (x1 >= 0, x2 >= 0, ||x|| <= 1).
    """

    def __init__(self):
        self.dim = 2

    def project_batch(self, xs):
        z = np.maximum(np.asarray(xs, dtype=float), 0.0)
        r = np.linalg.norm(z, axis=1)
        shrink = np.where(r > 1.0, 1.0 / np.maximum(r, 1e-300), 1.0)
        return z * shrink[:, None]

    def violation(self, x):
        return float(max(np.max(-x), np.linalg.norm(x) - 1.0))

    def active_matrix(self, xs, tol=0.0):
        xs = np.asarray(xs, dtype=float)
        act_axes = xs <= tol
        r = np.linalg.norm(xs, axis=1)
        act_arc = (np.abs(r - 1.0) <= tol + _FP_SLACK)[:, None]
        return np.concatenate([act_axes, act_arc], axis=1)

    def face_from_active(self, active):
        return FaceId(tuple(active), max(2 - sum(active), 0))

    def normal_cone_generators(self, face, x=None):
        gens = []
        if face.active[0]:
            gens.append(np.array([-1.0, 0.0]))
        if face.active[1]:
            gens.append(np.array([0.0, -1.0]))
        if face.active[2]:
            if x is None:
                raise ValueError("arc normal needs the point")
            x = np.asarray(x, dtype=float)
            gens.append(x / np.linalg.norm(x))
        return gens

    def __repr__(self):
        return "QuarterDisc()"


def pack_active_codes(active):
    """Pack (N, k) activity booleans into integer codes (k <= 63)."""
    active = np.asarray(active, dtype=bool)
    n, k = active.shape
    if k == 0:
        return np.zeros(n, dtype=np.int64)
    if k > 63:
        raise ValueError("too many constraints for bit packing")
    weights = (1 << np.arange(k, dtype=np.int64))
    return active.astype(np.int64) @ weights


def unpack_active_code(code, k):
    return tuple(bool((int(code) >> i) & 1) for i in range(k))


def euclid_project(cset, x):
    return cset.project(x)


def face_of(cset, x, tol=0.0):
    return cset.face_of(x, tol)


def normal_cone_generators(cset, face, x=None):
    return cset.normal_cone_generators(face, x=x)


def set_from_config(spec, dim):
    """Build a constraint set from a tagged config record."""
    if isinstance(spec, str):
        spec = {"kind": spec}
    kind = spec.get("kind")
    if kind in ("wholespace", "unconstrained"):
        return WholeSpace(dim)
    if kind == "nonnegative":
        return NonnegativeOrthant(dim)
    if kind == "box":
        lo = spec.get("lo", 0.0)
        hi = spec.get("hi", 1.0)
        lo = np.full(dim, lo, dtype=float) if np.isscalar(lo) else np.asarray(lo, float)
        hi = np.full(dim, hi, dtype=float) if np.isscalar(hi) else np.asarray(hi, float)
        return Box(lo, hi)
    if kind == "halfspace":
        return Halfspace(np.asarray(spec["a"], float), float(spec["b"]))
    if kind == "cone":
        return PolyhedralCone(np.asarray(spec["normals"], float))
    if kind == "ball2d":
        return Ball2D(spec.get("radius", 1.0), spec.get("center", (0.0, 0.0)))
    if kind == "quarter_disc":
        return QuarterDisc()
    raise ValueError(f"unknown constraint kind: {kind!r}")
