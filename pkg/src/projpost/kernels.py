"""Hot numeric kernels with numba-compiled and pure-numpy implementations.

The compiled path is used when numba imports successfully; set
``PROJPOST_NUMBA=0`` in the environment to force the numpy fallback (any of
``0/off/false/no/numpy`` works, ``1/on/true/yes/numba`` forces numba).
``benchmarks/bench_kernels.py`` times the two paths against each other.

Kernels:

* ``fista_box_dense`` / ``fista_box_csr`` -- full fixed-budget FISTA loop for
  box-constrained quadratics ``lam/2 ||Ax-b||^2 + delta/2 ||Lx-c||^2``.  The
  projection is a componentwise clip, so whole-space, nonnegativity and box
  constraints are all covered; infinite bounds disable a side.  The CSR
  dispatcher always uses scipy's matvec, which benchmarks faster than the
  compiled gather loop; the compiled variant stays available for comparison.
* ``radon_entries`` -- ray/pixel intersection lengths for a parallel-beam
  geometry, returned as COO triplets.

Both implementations of each kernel execute the same statements in the same
order; they may still differ in the last bits because compiled reductions
are free to reassociate.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def _env_wants_numba():
    flag = os.environ.get("PROJPOST_NUMBA", "auto").strip().lower()
    if flag in ("0", "off", "false", "no", "numpy"):
        return False
    if flag in ("1", "on", "true", "yes", "numba"):
        return True
    return HAVE_NUMBA


NUMBA_ENABLED = HAVE_NUMBA and _env_wants_numba()


def backend():
    """Name of the kernel backend selected at import time."""
    return "numba" if NUMBA_ENABLED else "numpy"


# ---------------------------------------------------------------------------
# FISTA for box-projected quadratics, dense operators.
#
# Momentum follows the standard t-sequence with an adaptive restart on
# objective increase; the last `tail` iterations drop momentum entirely so
# the trailing steps are plain projected gradient (monotone in the
# objective).  A@y is tracked by linearity of the extrapolation instead of
# an extra product.  The returned iterate is always the output of a clip,
# so box membership is exact.
# ---------------------------------------------------------------------------


def _fista_box_dense_impl(
    a, at, bhat, l, lt, chat, lam, delta, lo, hi, x0, step,
    max_iter, grad_tol, restart, tail,
):
    x = np.minimum(np.maximum(x0, lo), hi)
    ax = np.dot(a, x)
    lx = np.dot(l, x)
    ra = ax - bhat
    rl = lx - chat
    fx = 0.5 * lam * np.sum(ra * ra) + 0.5 * delta * np.sum(rl * rl)
    y = x.copy()
    ya = ax.copy()
    yl = lx.copy()
    t = 1.0
    iters = 0
    for k in range(1, max_iter + 1):
        g = lam * np.dot(at, ya - bhat) + delta * np.dot(lt, yl - chat)
        xn = np.minimum(np.maximum(y - step * g, lo), hi)
        axn = np.dot(a, xn)
        lxn = np.dot(l, xn)
        ra = axn - bhat
        rl = lxn - chat
        fn = 0.5 * lam * np.sum(ra * ra) + 0.5 * delta * np.sum(rl * rl)
        if k >= max_iter - tail or (restart and fn > fx):
            t = 1.0
            y = xn.copy()
            ya = axn.copy()
            yl = lxn.copy()
        else:
            tn = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            c = (t - 1.0) / tn
            y = xn + c * (xn - x)
            ya = axn + c * (axn - ax)
            yl = lxn + c * (lxn - lx)
            t = tn
        x = xn
        ax = axn
        lx = lxn
        fx = fn
        iters = k
        if grad_tol > 0.0:
            g2 = lam * np.dot(at, ax - bhat) + delta * np.dot(lt, lx - chat)
            xp = np.minimum(np.maximum(x - step * g2, lo), hi)
            d = (x - xp) / step
            if np.sqrt(np.sum(d * d)) <= grad_tol:
                break
    g2 = lam * np.dot(at, ax - bhat) + delta * np.dot(lt, lx - chat)
    xp = np.minimum(np.maximum(x - step * g2, lo), hi)
    d = (x - xp) / step
    gm = np.sqrt(np.sum(d * d))
    return x, iters, gm, fx


fista_box_dense_numpy = _fista_box_dense_impl
fista_box_dense_numba = (
    numba.njit(cache=True)(_fista_box_dense_impl) if HAVE_NUMBA else None
)


def fista_box_dense(a, at, bhat, l, lt, chat, lam, delta, lo, hi, x0, step,
                    max_iter, grad_tol, restart, tail):
    impl = fista_box_dense_numba if NUMBA_ENABLED else fista_box_dense_numpy
    return impl(a, at, bhat, l, lt, chat, float(lam), float(delta), lo, hi,
                x0, float(step), int(max_iter), float(grad_tol),
                bool(restart), int(tail))


# ---------------------------------------------------------------------------
# FISTA for box-projected quadratics, CSR operators.
#
# The numba path works on raw CSR arrays (with precomputed transposes); the
# numpy path runs the identical iteration with scipy sparse products.
# ---------------------------------------------------------------------------


def _csr_mv_into_impl(data, indices, indptr, x, out):
    for i in range(out.size):
        s = 0.0
        for j in range(indptr[i], indptr[i + 1]):
            s += data[j] * x[indices[j]]
        out[i] = s


# fastmath lets the row reduction vectorize; the summation order is fixed
# per build, so runs stay reproducible on a given backend
_csr_mv_into = (
    numba.njit(cache=True, fastmath=True)(_csr_mv_into_impl)
    if HAVE_NUMBA else None
)

if HAVE_NUMBA:

    @numba.njit(cache=True)
    def _csr_grad(atd, ati, atp, ltd, lti, ltp, ya, bhat, yl, chat,
                  lam, delta, ra, rl, ga, gl):
        for i in range(ra.size):
            ra[i] = ya[i] - bhat[i]
        for i in range(rl.size):
            rl[i] = yl[i] - chat[i]
        _csr_mv_into(atd, ati, atp, ra, ga)
        _csr_mv_into(ltd, lti, ltp, rl, gl)
        return lam * ga + delta * gl

    @numba.njit(cache=True)
    def _fista_box_csr_numba(
        ad, ai, ap, atd, ati, atp, m, bhat,
        ld, li, lp, ltd, lti, ltp, p, chat,
        lam, delta, lo, hi, x0, step, max_iter, grad_tol, restart, tail,
    ):
        n = x0.size
        ra = np.empty(m)
        rl = np.empty(p)
        ga = np.empty(n)
        gl = np.empty(n)
        x = np.minimum(np.maximum(x0, lo), hi)
        ax = np.empty(m)
        lx = np.empty(p)
        _csr_mv_into(ad, ai, ap, x, ax)
        _csr_mv_into(ld, li, lp, x, lx)
        fx = 0.5 * lam * np.sum((ax - bhat) ** 2) \
            + 0.5 * delta * np.sum((lx - chat) ** 2)
        y = x.copy()
        ya = ax.copy()
        yl = lx.copy()
        t = 1.0
        iters = 0
        for k in range(1, max_iter + 1):
            g = _csr_grad(atd, ati, atp, ltd, lti, ltp, ya, bhat, yl, chat,
                          lam, delta, ra, rl, ga, gl)
            xn = np.minimum(np.maximum(y - step * g, lo), hi)
            axn = np.empty(m)
            lxn = np.empty(p)
            _csr_mv_into(ad, ai, ap, xn, axn)
            _csr_mv_into(ld, li, lp, xn, lxn)
            fn = 0.5 * lam * np.sum((axn - bhat) ** 2) \
                + 0.5 * delta * np.sum((lxn - chat) ** 2)
            if k >= max_iter - tail or (restart and fn > fx):
                t = 1.0
                y = xn.copy()
                ya = axn.copy()
                yl = lxn.copy()
            else:
                tn = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
                c = (t - 1.0) / tn
                y = xn + c * (xn - x)
                ya = axn + c * (axn - ax)
                yl = lxn + c * (lxn - lx)
                t = tn
            x = xn
            ax = axn
            lx = lxn
            fx = fn
            iters = k
            if grad_tol > 0.0:
                g2 = _csr_grad(atd, ati, atp, ltd, lti, ltp, ax, bhat,
                               lx, chat, lam, delta, ra, rl, ga, gl)
                xp = np.minimum(np.maximum(x - step * g2, lo), hi)
                d = (x - xp) / step
                if np.sqrt(np.sum(d * d)) <= grad_tol:
                    break
        g2 = _csr_grad(atd, ati, atp, ltd, lti, ltp, ax, bhat, lx, chat,
                       lam, delta, ra, rl, ga, gl)
        xp = np.minimum(np.maximum(x - step * g2, lo), hi)
        d = (x - xp) / step
        gm = np.sqrt(np.sum(d * d))
        return x, iters, gm, fx

else:  # pragma: no cover - numba is a declared dependency
    _fista_box_csr_numba = None


def _fista_box_csr_numpy(a_csr, at_csr, bhat, l_csr, lt_csr, chat,
                         lam, delta, lo, hi, x0, step,
                         max_iter, grad_tol, restart, tail):
    x = np.minimum(np.maximum(x0, lo), hi)
    ax = a_csr @ x
    lx = l_csr @ x
    ra = ax - bhat
    rl = lx - chat
    fx = 0.5 * lam * np.sum(ra * ra) + 0.5 * delta * np.sum(rl * rl)
    y = x.copy()
    ya = ax.copy()
    yl = lx.copy()
    t = 1.0
    iters = 0
    for k in range(1, max_iter + 1):
        g = lam * (at_csr @ (ya - bhat)) + delta * (lt_csr @ (yl - chat))
        xn = np.minimum(np.maximum(y - step * g, lo), hi)
        axn = a_csr @ xn
        lxn = l_csr @ xn
        ra = axn - bhat
        rl = lxn - chat
        fn = 0.5 * lam * np.sum(ra * ra) + 0.5 * delta * np.sum(rl * rl)
        if k >= max_iter - tail or (restart and fn > fx):
            t = 1.0
            y = xn.copy()
            ya = axn.copy()
            yl = lxn.copy()
        else:
            tn = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            c = (t - 1.0) / tn
            y = xn + c * (xn - x)
            ya = axn + c * (axn - ax)
            yl = lxn + c * (lxn - lx)
            t = tn
        x = xn
        ax = axn
        lx = lxn
        fx = fn
        iters = k
        if grad_tol > 0.0:
            g2 = lam * (at_csr @ (ax - bhat)) + delta * (lt_csr @ (lx - chat))
            xp = np.minimum(np.maximum(x - step * g2, lo), hi)
            d = (x - xp) / step
            if np.sqrt(np.sum(d * d)) <= grad_tol:
                break
    g2 = lam * (at_csr @ (ax - bhat)) + delta * (lt_csr @ (lx - chat))
    xp = np.minimum(np.maximum(x - step * g2, lo), hi)
    d = (x - xp) / step
    gm = np.sqrt(np.sum(d * d))
    return x, iters, gm, fx


def fista_box_csr(a_csr, at_csr, bhat, l_csr, lt_csr, chat, lam, delta,
                  lo, hi, x0, step, max_iter, grad_tol, restart, tail):
    # scipy's C matvec beats the compiled gather loop on CSR matrices
    # (see benchmarks/bench_kernels.py), so the sparse path always uses it;
    # the numba variant is kept for the benchmark and cross-checks.
    return _fista_box_csr_numpy(a_csr, at_csr, bhat, l_csr, lt_csr, chat,
                                float(lam), float(delta), lo, hi, x0,
                                float(step), int(max_iter), float(grad_tol),
                                bool(restart), int(tail))


def fista_box_csr_numba_raw(a_csr, at_csr, bhat, l_csr, lt_csr, chat, lam,
                            delta, lo, hi, x0, step, max_iter, grad_tol,
                            restart, tail):
    """Compiled CSR path (benchmark/testing handle)."""
    if _fista_box_csr_numba is None:  # pragma: no cover
        raise RuntimeError("numba is not available")
    m, _ = a_csr.shape
    p, _ = l_csr.shape
    return _fista_box_csr_numba(
        a_csr.data, a_csr.indices, a_csr.indptr,
        at_csr.data, at_csr.indices, at_csr.indptr, m, bhat,
        l_csr.data, l_csr.indices, l_csr.indptr,
        lt_csr.data, lt_csr.indices, lt_csr.indptr, p, chat,
        float(lam), float(delta), lo, hi, x0, float(step), int(max_iter),
        float(grad_tol), bool(restart), int(tail),
    )


# ---------------------------------------------------------------------------
# Parallel-beam ray tracing.
#
# Image square [-side/2, side/2]^2 with unit pixels, pixel (ix, iy) flattened
# to column iy*side + ix.  A ray for angle theta and detector offset s is
# p(t) = s*(cos t, sin t) + t*(-sin t, cos t); entries are the lengths of the
# ray segments inside each pixel, found by walking the sorted grid crossings.
# ---------------------------------------------------------------------------


def _radon_entries_impl(side, thetas, offsets, rows, cols, vals):
    half = 0.5 * side
    n_rays = offsets.size
    count = 0
    for ia in range(thetas.size):
        ct = np.cos(thetas[ia])
        st = np.sin(thetas[ia])
        dx = -st
        dy = ct
        for ir in range(n_rays):
            s = offsets[ir]
            px = s * ct
            py = s * st
            tmin = -1.0e300
            tmax = 1.0e300
            ok = True
            if abs(dx) > 1e-14:
                t1 = (-half - px) / dx
                t2 = (half - px) / dx
                if t1 > t2:
                    tswap = t1
                    t1 = t2
                    t2 = tswap
                if t1 > tmin:
                    tmin = t1
                if t2 < tmax:
                    tmax = t2
            else:
                if px <= -half or px >= half:
                    ok = False
            if abs(dy) > 1e-14:
                t1 = (-half - py) / dy
                t2 = (half - py) / dy
                if t1 > t2:
                    tswap = t1
                    t1 = t2
                    t2 = tswap
                if t1 > tmin:
                    tmin = t1
                if t2 < tmax:
                    tmax = t2
            else:
                if py <= -half or py >= half:
                    ok = False
            if not ok or tmax - tmin <= 1e-12:
                continue
            ts = np.empty(2 * (side + 1) + 2)
            cnt = 0
            ts[cnt] = tmin
            cnt += 1
            ts[cnt] = tmax
            cnt += 1
            if abs(dx) > 1e-14:
                for i in range(side + 1):
                    t = (-half + i - px) / dx
                    if t > tmin and t < tmax:
                        ts[cnt] = t
                        cnt += 1
            if abs(dy) > 1e-14:
                for i in range(side + 1):
                    t = (-half + i - py) / dy
                    if t > tmin and t < tmax:
                        ts[cnt] = t
                        cnt += 1
            tsv = np.sort(ts[:cnt])
            row = ia * n_rays + ir
            for j in range(tsv.size - 1):
                dt = tsv[j + 1] - tsv[j]
                if dt <= 1e-14:
                    continue
                tm = 0.5 * (tsv[j] + tsv[j + 1])
                qx = px + tm * dx
                qy = py + tm * dy
                ix = int(np.floor(qx + half))
                iy = int(np.floor(qy + half))
                if ix >= 0 and ix < side and iy >= 0 and iy < side:
                    rows[count] = row
                    cols[count] = iy * side + ix
                    vals[count] = dt
                    count += 1
    return count


radon_entries_numpy = _radon_entries_impl
radon_entries_numba = (
    numba.njit(cache=True)(_radon_entries_impl) if HAVE_NUMBA else None
)


def radon_entries(side, thetas, offsets):
    """COO triplets (rows, cols, vals) of the parallel-beam system matrix."""
    side = int(side)
    thetas = np.ascontiguousarray(thetas, dtype=float)
    offsets = np.ascontiguousarray(offsets, dtype=float)
    cap = thetas.size * offsets.size * (2 * side + 3)
    rows = np.empty(cap, dtype=np.int64)
    cols = np.empty(cap, dtype=np.int64)
    vals = np.empty(cap, dtype=np.float64)
    impl = radon_entries_numba if NUMBA_ENABLED else radon_entries_numpy
    count = impl(side, thetas, offsets, rows, cols, vals)
    return rows[:count], cols[:count], vals[:count]
