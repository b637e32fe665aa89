"""Hierarchical Gibbs sampler for polyhedral-cone constrained posteriors.

Gamma hyperpriors on the noise precision ``lam`` and prior precision
``delta`` are conjugate, so each sweep draws

    lam   ~ Gamma(m/2 + alpha_lam,          ||A x - b||^2 / 2 + beta_lam)
    delta ~ Gamma(dim(F(x))/2 + alpha_del,  ||L x||^2 / 2     + beta_del)

(shape-rate parameterization) given the previous signal iterate, then draws
the signal from the projected posterior at the new hyperparameters by
solving a randomized constrained least squares problem warm-started at the
previous iterate.  ``dim(F(x))`` is the dimension of the smallest face of
the cone containing ``x``; with no constraints it equals n and the sweep is
the ordinary hierarchical sampler.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from projpost.linop import as_operator
from projpost.sets import (
    ConstraintSet,
    NonnegativeOrthant,
    PolyhedralCone,
    WholeSpace,
    activity_tol,
)
from projpost.solver import SolverConfig, SolverError, sample_projected_posterior

_CONE_SETS = (WholeSpace, NonnegativeOrthant, PolyhedralCone)


@dataclass(frozen=True)
class HyperPrior:
    """Gamma shape/rate pairs for the two precision hyperparameters."""

    alpha_lambda: float = 1.0
    beta_lambda: float = 1e-4
    alpha_delta: float = 1.0
    beta_delta: float = 1e-4

    def __post_init__(self):
        for name in ("alpha_lambda", "beta_lambda", "alpha_delta", "beta_delta"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class HierarchicalModel:
    a_op: object
    b: np.ndarray
    l_op: object
    cset: ConstraintSet
    hyper: HyperPrior = field(default_factory=HyperPrior)

    def __post_init__(self):
        self.a_op = as_operator(self.a_op)
        self.l_op = as_operator(self.l_op)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        if not isinstance(self.cset, _CONE_SETS):
            raise ValueError("constraint set must be a polyhedral cone "
                             "(or the whole space)")
        if self.a_op.cols != self.cset.dim or self.l_op.cols != self.cset.dim:
            raise ValueError("operator/set dimension mismatch")
        if self.b.size != self.a_op.rows:
            raise ValueError("data length mismatch")

    @property
    def m(self):
        return self.a_op.rows

    @property
    def n(self):
        return self.a_op.cols


@dataclass
class Chain:
    """Gibbs output: one (x, lam, delta, face_dim) record per sweep."""

    x_samples: np.ndarray
    lambda_samples: np.ndarray
    delta_samples: np.ndarray
    face_dims: np.ndarray
    seed: object = None
    burn_in: int = 0
    aborted: bool = False

    def __len__(self):
        return self.lambda_samples.shape[0]

    def post_burn(self):
        """Views of the per-sweep arrays with the burn-in removed."""
        k = self.burn_in
        return (self.x_samples[k:], self.lambda_samples[k:],
                self.delta_samples[k:], self.face_dims[k:])


def _face_dim_of(model, x):
    tol = 0.0 if model.cset.clip_bounds() is not None else activity_tol(x)
    return model.cset.face_of(x, tol).face_dim


def sample_lambda(model, x, rng):
    """Noise-precision conditional: Gamma(m/2 + a, ||Ax-b||^2/2 + b_rate)."""
    r = model.a_op.apply(x) - model.b
    shape = 0.5 * model.m + model.hyper.alpha_lambda
    rate = 0.5 * float(r @ r) + model.hyper.beta_lambda
    return float(rng.gamma(shape, 1.0 / rate))


def sample_delta(model, x, rng, face_dim=None):
    """Prior-precision conditional with the face-dimension shape term."""
    if face_dim is None:
        face_dim = _face_dim_of(model, x)
    r = model.l_op.apply(x)
    shape = 0.5 * face_dim + model.hyper.alpha_delta
    rate = 0.5 * float(r @ r) + model.hyper.beta_delta
    return float(rng.gamma(shape, 1.0 / rate))


def run_pchgs(model, x0, k_max, rng, solver_cfg=None, burn_in=0, seed=None):
    """Run the constrained hierarchical Gibbs sweep for ``k_max`` iterations.

    ``x0`` must be feasible (project first); a solver failure mid-chain
    returns the prefix collected so far with ``aborted`` set.
    """
    solver_cfg = solver_cfg or SolverConfig()
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.size != model.n:
        raise ValueError("x0 dimension mismatch")
    if not model.cset.contains(x, 0.0):
        raise ValueError("x0 is not feasible")
    fd = _face_dim_of(model, x)

    xs = np.empty((k_max, model.n))
    lams = np.empty(k_max)
    dels = np.empty(k_max)
    fds = np.empty(k_max, dtype=np.int64)
    aborted = False
    k_done = 0
    for k in range(k_max):
        lam = sample_lambda(model, x, rng)
        dlt = sample_delta(model, x, rng, face_dim=fd)
        try:
            x = sample_projected_posterior(
                model.a_op, model.b, model.l_op, lam, dlt, model.cset, rng,
                cfg=solver_cfg,
                warm_start=x if solver_cfg.warm_start else None)
        except SolverError:
            aborted = True
            break
        fd = _face_dim_of(model, x)
        xs[k] = x
        lams[k] = lam
        dels[k] = dlt
        fds[k] = fd
        k_done = k + 1
    return Chain(x_samples=xs[:k_done], lambda_samples=lams[:k_done],
                 delta_samples=dels[:k_done], face_dims=fds[:k_done],
                 seed=seed, burn_in=min(burn_in, k_done), aborted=aborted)


def reduce_to_unconstrained(model):
    """Same model on the whole space; the sweep is then the ordinary one."""
    return dataclasses.replace(model, cset=WholeSpace(model.n))
