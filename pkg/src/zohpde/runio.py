"""Artifact emission: CSV/JSON writers, run manifests, atomic file writes.

Floats are printed with 17 significant digits so re-running a config
reproduces every artifact byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile

import numpy as np

from .modal_sim import Trace

__all__ = [
    "fmt",
    "atomic_write_text",
    "write_csv",
    "write_trace",
    "write_eigen",
    "write_manifest",
    "write_json",
]


def fmt(x) -> str:
    """17-significant-digit float formatting (empty for None/NaN cells)."""
    if x is None:
        return ""
    xf = float(x)
    if np.isnan(xf):
        return "nan"
    return f"{xf:.17g}"


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temporary file and rename, so readers never see partials."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(cell if isinstance(cell, str) else fmt(cell) for cell in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_json(path: str, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def write_trace(out_dir: str, name: str, trace: Trace) -> list[str]:
    """Trace CSV (t,norm_r,u,v,w), snapshot CSVs, optional transformed norms."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    n = len(trace.t)
    v = trace.v if trace.v is not None else [None] * n
    w = trace.w if trace.w is not None else [None] * n
    path = os.path.join(out_dir, f"{name}.csv")
    write_csv(
        path,
        ["t", "norm_r", "u", "v", "w"],
        ((trace.t[i], trace.norm_r[i], trace.u[i], v[i], w[i]) for i in range(n)),
    )
    written.append(path)
    if trace.y_norm is not None:
        path = os.path.join(out_dir, f"{name}_transformed.csv")
        write_csv(path, ["t", "y_norm"], zip(trace.t, trace.y_norm))
        written.append(path)
    for idx, t in enumerate(sorted(trace.snapshots)):
        path = os.path.join(out_dir, f"{name}_snapshot_{idx:04d}.csv")
        prof = trace.snapshots[t]
        write_csv(path, ["z", "x"], zip(trace.grid, prof))
        written.append(path)
    if trace.snapshots:
        path = os.path.join(out_dir, f"{name}_snapshot_index.csv")
        write_csv(path, ["index", "t"], ((i, t) for i, t in enumerate(sorted(trace.snapshots))))
        written.append(path)
    return written


def write_eigen(out_dir: str, eigsys, gains: np.ndarray) -> list[str]:
    """Summary CSV (n,lambda,phi1,dphi1,g_n) plus one file per eigenfunction."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    path = os.path.join(out_dir, "eigen.csv")
    write_csv(
        path,
        ["n", "lambda", "phi1", "dphi1", "g_n"],
        (
            (str(pr.n), pr.lam, pr.phi1, pr.dphi1, gains[i])
            for i, pr in enumerate(eigsys.pairs)
        ),
    )
    written.append(path)
    for pr in eigsys.pairs:
        path = os.path.join(out_dir, f"eigenfunction_{pr.n:03d}.csv")
        write_csv(path, ["z", "phi"], zip(eigsys.grid, pr.phi))
        written.append(path)
    return written


def write_manifest(out_dir: str, config_text: str, seed, extras: dict) -> str:
    """Reproducibility manifest: config hash, versions, backend, seeds."""
    import scipy

    from . import __version__
    from ._backend import BACKEND

    manifest = {
        "config_sha256": hashlib.sha256(config_text.encode("utf-8")).hexdigest(),
        "config_text": config_text,
        "zohpde_version": __version__,
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
        "kernel_backend": BACKEND,
        "seed": seed,
    }
    manifest.update(extras)
    path = os.path.join(out_dir, "manifest.json")
    write_json(path, manifest)
    return path
