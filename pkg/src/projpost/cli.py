"""Command-line experiment runner.

Subcommands: ``deblur`` (fixed-hyperparameter sampling under different
constraints), ``ct`` (hierarchical Gibbs on a tomography problem),
``density`` (quarter-disc boundary density tables plus Monte Carlo
cross-checks) and ``verify`` (theory suites).  Every run writes a manifest
embedding its resolved configuration; re-running with ``--config`` pointed
at the manifest reproduces the run byte for byte.

Exit codes: 0 success, 2 config error, 3 numerical failure,
4 verification failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
from scipy.integrate import quad

import projpost
from projpost import kernels
from projpost.artifacts import (
    write_chain,
    write_hyper_chain,
    write_manifest,
    write_matrix,
    write_pgm16,
    write_table,
)
from projpost.config import (
    ConfigError,
    apply_full_scale,
    default_config,
    load_config,
)
from projpost.densities import disc_boundary_density, halfspace_boundary_density
from projpost.diagnostics import summarize
from projpost.gaussian import Gaussian
from projpost.gibbs import HierarchicalModel, HyperPrior, run_pchgs
from projpost.models import ct_instance, deblur_instance
from projpost.projector import mc_project, run_verification
from projpost.sets import Box, NonnegativeOrthant, QuarterDisc, WholeSpace
from projpost.solver import SolverConfig, SolverError, sample_projected_posterior


def _solver_config(section):
    return SolverConfig(max_iter=section["max_iter"],
                        grad_tol=section["grad_tol"],
                        restart=section["restart"],
                        warm_start=section["warm_start"])


def _meta():
    return {
        "package": "projpost",
        "version": projpost.__version__,
        "kernel_backend": kernels.backend(),
        "numpy": np.__version__,
    }


def _deblur_set(mode, n):
    if mode in ("unconstrained", "box_euclidean"):
        return WholeSpace(n)
    if mode == "nonnegative":
        return NonnegativeOrthant(n)
    if mode == "box":
        return Box.unit(n)
    raise ConfigError(f"unknown mode {mode!r}")


def sample_fixed_hyper(inst, cset, n_samples, lam, delta, solver_cfg, rng):
    """Draw i.i.d.-targeted projected-posterior samples at fixed (lam, delta)."""
    n = cset.dim
    samples = np.empty((n_samples, n))
    warm = cset.project(np.zeros(n))
    for i in range(n_samples):
        x = sample_projected_posterior(
            inst.a_op, inst.b, inst.l_op, lam, delta, cset, rng,
            cfg=solver_cfg, warm_start=warm if solver_cfg.warm_start else None)
        samples[i] = x
        warm = x
    return samples


def run_deblur(cfg):
    pr, sa = cfg["problem"], cfg["sampler"]
    solver_cfg = _solver_config(cfg["solver"])
    inst = deblur_instance(pr["n"], pr["gamma"], pr["lambda_true"],
                           pr["noise_seed"])
    n = pr["n"]
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    extreme = (inst.x_true == 0.0) | (inst.x_true == 1.0)

    children = np.random.SeedSequence(cfg["seed"]).spawn(len(cfg["modes"]))
    idx = np.arange(n, dtype=np.int64)
    widths = {}
    results = {"relative_noise": inst.relative_noise}
    for mode, child in zip(cfg["modes"], children):
        rng = np.random.default_rng(child)
        cset = _deblur_set(mode, n)
        samples = sample_fixed_hyper(inst, cset, sa["n_samples"], sa["lam"],
                                     sa["delta"], solver_cfg, rng)
        if mode == "box_euclidean":
            samples = np.clip(samples, 0.0, 1.0)
        summary = summarize(samples, sa["level"])
        widths[mode] = summary.width
        mdir = out / mode
        mdir.mkdir(exist_ok=True)
        write_table(mdir / "summary.tsv",
                    ["index", "true", "median", "lo", "hi", "width"],
                    [idx, inst.x_true, summary.median, summary.lo,
                     summary.hi, summary.width])
        keep = np.arange(0, sa["n_samples"], max(sa["thin"], 1))
        write_matrix(mdir / "samples.tsv", samples[keep])
        results[f"{mode}_mean_width_extreme"] = \
            float(np.mean(summary.width[extreme]))
        results[f"{mode}_mean_width"] = float(np.mean(summary.width))
        print(f"[deblur] {mode}: mean CI width {results[f'{mode}_mean_width']:.5f} "
              f"(extreme components {results[f'{mode}_mean_width_extreme']:.5f})")

    write_table(out / "data.tsv", ["index", "true", "blurred", "noisy"],
                [idx, inst.x_true, inst.a_op.apply(inst.x_true), inst.b])
    write_table(out / "widths.tsv",
                ["index", "true"] + list(widths),
                [idx, inst.x_true] + [widths[m] for m in widths])
    write_manifest(out / "manifest.yaml",
                   {"config": cfg, "meta": _meta(), "results": results})
    print(f"[deblur] noise level {inst.relative_noise:.4f}; artifacts in {out}")
    return 0


def run_ct(cfg):
    pr, sa = cfg["problem"], cfg["sampler"]
    solver_cfg = _solver_config(cfg["solver"])
    inst = ct_instance(pr["side"], pr["n_angles"], pr["n_rays"],
                       pr["lambda_true"], pr["noise_seed"])
    side = pr["side"]
    n = side * side
    hyper = HyperPrior(alpha_lambda=sa["alpha_lambda"],
                       beta_lambda=sa["beta_lambda"],
                       alpha_delta=sa["alpha_delta"],
                       beta_delta=sa["beta_delta"])
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    images = {}
    vmin, vmax = write_pgm16(out / "truth.pgm", inst.x_true.reshape(side, side))
    images["truth.pgm"] = {"vmin": vmin, "vmax": vmax}
    write_matrix(out / "sinogram.tsv",
                 inst.b.reshape(pr["n_angles"], pr["n_rays"]))

    children = np.random.SeedSequence(cfg["seed"]).spawn(len(cfg["modes"]))
    results = {"relative_noise": inst.relative_noise}
    width_maps = {}
    aborted = False
    for mode, child in zip(cfg["modes"], children):
        rng = np.random.default_rng(child)
        cset = WholeSpace(n) if mode == "unconstrained" else NonnegativeOrthant(n)
        model = HierarchicalModel(inst.a_op, inst.b, inst.l_op, cset, hyper)
        chain = run_pchgs(model, cset.project(np.zeros(n)), sa["n_samples"],
                          rng, solver_cfg=solver_cfg, burn_in=sa["burn_in"],
                          seed=cfg["seed"])
        mdir = out / mode
        mdir.mkdir(exist_ok=True)
        write_hyper_chain(mdir / "hyper_chain.tsv", chain)
        write_chain(mdir / "chain.tsv", chain, thin=sa["thin"])
        if chain.aborted:
            aborted = True
            print(f"[ct] {mode}: solver aborted after {len(chain)} sweeps; "
                  "prefix written")
            continue
        xs_post, lam_post, del_post, _ = chain.post_burn()
        summary = summarize(xs_post, sa["level"],
                            hyper_chains={"lambda": lam_post,
                                          "delta": del_post})
        width_maps[mode] = summary.width.reshape(side, side)
        idx = np.arange(n, dtype=np.int64)
        write_table(mdir / "summary.tsv",
                    ["index", "true", "median", "lo", "hi", "width"],
                    [idx, inst.x_true, summary.median, summary.lo,
                     summary.hi, summary.width])
        lags = np.arange(summary.hyper_acf["lambda"].size, dtype=np.int64)
        write_table(mdir / "acf.tsv", ["lag", "acf_lambda", "acf_delta"],
                    [lags, summary.hyper_acf["lambda"],
                     summary.hyper_acf["delta"]])
        for name, img in (("median.pgm", summary.median.reshape(side, side)),
                          ("ci_width.pgm", width_maps[mode])):
            vmin, vmax = write_pgm16(mdir / name, img)
            images[f"{mode}/{name}"] = {"vmin": vmin, "vmax": vmax}
        results[f"{mode}_lambda_mean"] = float(np.mean(lam_post))
        results[f"{mode}_delta_mean"] = float(np.mean(del_post))
        results[f"{mode}_lambda_ess"] = summary.hyper_ess["lambda"]
        results[f"{mode}_delta_ess"] = summary.hyper_ess["delta"]
        bg = inst.x_true == 0.0
        results[f"{mode}_bg_median_width"] = \
            float(np.median(summary.width[bg]))
        print(f"[ct] {mode}: lambda mean {results[f'{mode}_lambda_mean']:.4f} "
              f"(ESS {results[f'{mode}_lambda_ess']:.0f}), delta mean "
              f"{results[f'{mode}_delta_mean']:.4f}, background median CI "
              f"width {results[f'{mode}_bg_median_width']:.4f}")

    if len(width_maps) == 2:
        diff = width_maps["unconstrained"] - width_maps["nonnegative"]
        vmin, vmax = write_pgm16(out / "ci_width_difference.pgm", diff)
        images["ci_width_difference.pgm"] = {"vmin": vmin, "vmax": vmax}
    write_manifest(out / "manifest.yaml",
                   {"config": cfg, "meta": _meta(), "results": results,
                    "images": images})
    print(f"[ct] noise level {inst.relative_noise:.4f}; artifacts in {out}")
    if aborted:
        raise SolverError("a chain aborted; see the written prefix")
    return 0


def run_density(cfg):
    mean = np.asarray(cfg["gaussian"]["mean"], dtype=float)
    cov = np.asarray(cfg["gaussian"]["cov"], dtype=float)
    g = Gaussian(mean, cov)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    n_pts = cfg["tables"]["n_points"]

    # straight edges: halfspace formula restricted to the edge
    edge_specs = {
        "edge_x.tsv": (np.array([0.0, -1.0]), np.array([[1.0], [0.0]])),
        "edge_y.tsv": (np.array([-1.0, 0.0]), np.array([[0.0], [1.0]])),
    }
    ts = (np.arange(n_pts) + 0.5) / n_pts
    edge_quads = {}
    for name, (a, basis) in edge_specs.items():
        dens = halfspace_boundary_density(g, a, 0.0, np.zeros(2), basis)
        write_table(out / name, ["t", "density"], [ts, dens.eval(ts)])
        edge_quads[name] = quad(lambda t: dens.eval(np.array([t]))[0],
                                0.0, 1.0, limit=200)[0]

    arc = disc_boundary_density(g)
    us = (np.arange(n_pts) + 0.5) * (0.5 * np.pi / n_pts)
    write_table(out / "arc.tsv", ["angle", "density"], [us, arc.eval(us)])
    arc_quad = quad(lambda u: arc.eval(np.array([u]))[0],
                    0.0, 0.5 * np.pi, limit=200)[0]

    # interior: the projection leaves the density untouched inside the set
    grid = (np.arange(n_pts) + 0.5) / n_pts
    xg, yg = np.meshgrid(grid, grid)
    pts = np.column_stack([xg.ravel(), yg.ravel()])
    inside = np.linalg.norm(pts, axis=1) < 1.0
    dens_grid = np.where(inside, np.exp(g.log_density(pts)), 0.0)
    write_table(out / "interior.tsv", ["x", "y", "density"],
                [pts[:, 0], pts[:, 1], dens_grid])

    rng = np.random.default_rng(cfg["seed"])
    pss = mc_project(g, QuarterDisc(), cfg["mc"]["n_samples"], rng)
    fracs = {f: v for f, v in pss.face_fractions().items()}
    def frac_of(active):
        for face, v in fracs.items():
            if face.active == active:
                return v
        return 0.0
    mc = {
        "interior": frac_of((False, False, False)),
        "edge_x": frac_of((False, True, False)),
        "edge_y": frac_of((True, False, False)),
        "arc": frac_of((False, False, True)),
        "corner_origin": frac_of((True, True, False)),
        "corner_x": frac_of((False, True, True)),
        "corner_y": frac_of((True, False, True)),
    }
    n_mc = cfg["mc"]["n_samples"]
    analytic_boundary = edge_quads["edge_x.tsv"] + edge_quads["edge_y.tsv"] + arc_quad
    corner_mass = mc["corner_origin"] + mc["corner_x"] + mc["corner_y"]
    total = analytic_boundary + corner_mass + mc["interior"]
    sigma3 = 3.0 * 0.5 / np.sqrt(n_mc)
    results = {
        "edge_x_mass": edge_quads["edge_x.tsv"],
        "edge_y_mass": edge_quads["edge_y.tsv"],
        "arc_mass": arc_quad,
        "mc_fractions": {k: float(v) for k, v in mc.items()},
        "total_mass": float(total),
        "total_mass_tolerance_3sigma": float(sigma3),
        "mass_check_passed": bool(abs(total - 1.0) <= sigma3),
    }
    with open(out / "mc_fractions.tsv", "w") as fh:
        fh.write("piece\tfraction\n")
        for k, v in mc.items():
            fh.write(f"{k}\t%.17g\n" % v)
    write_manifest(out / "manifest.yaml",
                   {"config": cfg, "meta": _meta(), "results": results})
    status = "ok" if results["mass_check_passed"] else "MISMATCH"
    print(f"[density] boundary {analytic_boundary:.5f} + corners "
          f"{corner_mass:.5f} + interior {mc['interior']:.5f} = {total:.5f} "
          f"({status}); artifacts in {out}")
    return 0


def run_verify(cfg):
    results = run_verification(seed=cfg["seed"], n_samples=cfg["n_samples"],
                               tamper=cfg["tamper"])
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    payload = {"config": cfg, "meta": _meta(),
               "results": [{"name": r.name, "passed": bool(r.passed),
                            "detail": r.detail} for r in results]}
    write_manifest(out / "manifest.yaml", payload)
    all_ok = True
    for r in results:
        tag = "PASS" if r.passed else "FAIL"
        print(f"[{tag}] {r.name} | {r.detail}")
        all_ok = all_ok and r.passed
    return 0 if all_ok else 4


def build_parser():
    parser = argparse.ArgumentParser(
        prog="projpost",
        description="Constrained posterior sampling experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("deblur", "ct", "density", "verify"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML config or manifest path")
        p.add_argument("--seed", type=int, help="override the seed")
        p.add_argument("--out", help="override the output directory")
        if name == "ct":
            p.add_argument("--full-scale", action="store_true",
                           help="run the full-size tomography setup")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            cfg = load_config(args.config)
            if cfg["experiment"] != args.command:
                raise ConfigError(
                    f"config is for {cfg['experiment']!r}, not {args.command!r}")
        else:
            cfg = default_config(args.command)
        if getattr(args, "full_scale", False):
            cfg = apply_full_scale(cfg)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.out is not None:
            cfg["out"] = args.out
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    runner = {"deblur": run_deblur, "ct": run_ct,
              "density": run_density, "verify": run_verify}[args.command]
    try:
        return runner(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
