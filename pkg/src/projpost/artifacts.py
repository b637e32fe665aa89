"""Run artifacts: delimited numeric tables, 16-bit graymaps, YAML manifests.

Floats are written with %.17g so files round-trip float64 exactly and a
rerun with the same seeds produces byte-identical artifacts.
"""

from __future__ import annotations

import numpy as np
import yaml


def write_table(path, header, columns):
    """Tab-delimited table; ``columns`` is a list of equal-length 1-D arrays."""
    columns = [np.asarray(c) for c in columns]
    if len(header) != len(columns):
        raise ValueError("header/column count mismatch")
    n = columns[0].shape[0]
    if any(c.shape[0] != n for c in columns):
        raise ValueError("column lengths differ")
    with open(path, "w") as fh:
        fh.write("\t".join(header) + "\n")
        for i in range(n):
            cells = []
            for c in columns:
                v = c[i]
                if np.issubdtype(c.dtype, np.integer):
                    cells.append(str(int(v)))
                else:
                    cells.append("%.17g" % float(v))
            fh.write("\t".join(cells) + "\n")


def read_table(path):
    """Returns (header, dict of column name -> float array)."""
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split("\t")
        data = np.loadtxt(fh, delimiter="\t", ndmin=2)
    if data.size == 0:
        data = data.reshape(0, len(header))
    return header, {name: data[:, j] for j, name in enumerate(header)}


def write_matrix(path, mat):
    """Headerless tab-delimited 2-D array."""
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    with open(path, "w") as fh:
        for row in mat:
            fh.write("\t".join("%.17g" % v for v in row) + "\n")


def read_matrix(path):
    return np.loadtxt(path, delimiter="\t", ndmin=2)


def write_pgm16(path, img, vmin=None, vmax=None):
    """Binary 16-bit PGM (big-endian, maxval 65535), linear quantization.

    Returns the (vmin, vmax) actually used; record them next to the file to
    undo the scaling.  Equal limits map everything to 0.
    """
    img = np.asarray(img, dtype=float)
    if img.ndim != 2:
        raise ValueError("expected a 2-D image")
    vmin = float(np.min(img)) if vmin is None else float(vmin)
    vmax = float(np.max(img)) if vmax is None else float(vmax)
    span = vmax - vmin
    if span <= 0:
        quant = np.zeros_like(img)
    else:
        quant = np.clip((img - vmin) / span, 0.0, 1.0) * 65535.0
    data = np.round(quant).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n65535\n".encode())
        fh.write(data.tobytes())
    return vmin, vmax


def read_pgm16(path):
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"P5":
            raise ValueError("not a binary PGM")
        dims = fh.readline().split()
        maxval = int(fh.readline())
        w, h = int(dims[0]), int(dims[1])
        if maxval != 65535:
            raise ValueError("expected 16-bit maxval")
        data = np.frombuffer(fh.read(w * h * 2), dtype=">u2")
    return data.reshape(h, w).astype(np.int64)


def write_manifest(path, payload):
    with open(path, "w") as fh:
        yaml.safe_dump(payload, fh, sort_keys=True, default_flow_style=False)


def read_manifest(path):
    with open(path) as fh:
        return yaml.safe_load(fh)


def write_chain(path, chain, thin=1):
    """Chain rows (iter, lambda, delta, face_dim, x...) every ``thin`` sweeps."""
    idx = np.arange(0, len(chain), max(int(thin), 1))
    n = chain.x_samples.shape[1]
    header = ["iter", "lambda", "delta", "face_dim"] + [f"x{i}" for i in range(n)]
    cols = [idx.astype(np.int64),
            chain.lambda_samples[idx],
            chain.delta_samples[idx],
            chain.face_dims[idx].astype(np.int64)]
    cols += [chain.x_samples[idx, i] for i in range(n)]
    write_table(path, header, cols)


def write_hyper_chain(path, chain):
    """Full-resolution hyperparameter trace (iter, lambda, delta, face_dim)."""
    idx = np.arange(len(chain), dtype=np.int64)
    write_table(path, ["iter", "lambda", "delta", "face_dim"],
                [idx, chain.lambda_samples, chain.delta_samples,
                 chain.face_dims.astype(np.int64)])
