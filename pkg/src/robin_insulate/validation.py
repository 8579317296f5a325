"""Input checks shared by the estimators and the CLI."""

from __future__ import annotations

import numbers

import numpy as np
from scipy.spatial import cKDTree

from .mesh import TriangleMesh


def check_mesh(mesh, allow_layer: bool = False) -> TriangleMesh:
    if not isinstance(mesh, TriangleMesh):
        raise TypeError(f"expected a TriangleMesh, got {type(mesh).__name__}")
    if mesh.has_layer and not allow_layer:
        raise ValueError("expected a body-only mesh (no layer triangles)")
    return mesh


def check_positive(name: str, value, allow_zero: bool = False) -> float:
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise TypeError(f"{name} must be a real number")
    value = float(value)
    ok = value >= 0 if allow_zero else value > 0
    if not (ok and np.isfinite(value)):
        raise ValueError(f"{name} must be {'non-negative' if allow_zero else 'positive'} and finite")
    return value


def check_points(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1 and X.shape[0] == 2:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != 2:
        raise ValueError(f"points must have shape (n_points, 2), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("points must be finite")
    return X


def check_traces(X, n_nodes: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != n_nodes:
        raise ValueError(f"traces must have shape (n_samples, {n_nodes}), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("traces must be finite")
    return X


def interpolate(mesh: TriangleMesh, values, points, k: int = 16) -> np.ndarray:
    """Evaluate a P1 field at points; NaN outside the mesh."""
    values = np.asarray(values, dtype=float)
    points = check_points(points)
    tri = mesh.triangles
    p = mesh.vertices[tri]
    centroids = p.mean(axis=1)
    k = min(k, len(tri))
    _, cand = cKDTree(centroids).query(points, k=k)
    cand = np.asarray(cand).reshape(len(points), k)
    out = np.full(len(points), np.nan)
    for i, x in enumerate(points):
        lam = _barycentric(p[cand[i]], x)
        hit = np.nonzero(lam.min(axis=1) >= -1e-12)[0]
        if not len(hit):
            lam = _barycentric(p, x)
            hit = np.nonzero(lam.min(axis=1) >= -1e-12)[0]
            if not len(hit):
                continue
            out[i] = lam[hit[0]] @ values[tri[hit[0]]]
        else:
            j = cand[i, hit[0]]
            out[i] = lam[hit[0]] @ values[tri[j]]
    return out


def _barycentric(p, x):
    a, b, c = p[:, 0], p[:, 1], p[:, 2]
    det = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1])
    l1 = ((x[0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (c[:, 0] - a[:, 0]) * (x[1] - a[:, 1])) / det
    l2 = ((b[:, 0] - a[:, 0]) * (x[1] - a[:, 1]) - (x[0] - a[:, 0]) * (b[:, 1] - a[:, 1])) / det
    return np.column_stack([1.0 - l1 - l2, l1, l2])
