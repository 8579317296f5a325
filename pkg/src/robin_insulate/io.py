"""Plain-text mesh files and CSV exports.

Mesh file grammar (whitespace separated, ``#`` starts a comment line)::

    V T E
    x y                 V vertex lines
    a b c tag           T triangle lines, CCW vertex ids, tag 0=body 1=layer
    a b nx ny           E boundary edge lines, oriented, outward unit normal

Vertex ids are 0-based. Floats are written with 17 significant digits so a
round trip is exact.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .mesh import MeshError, TriangleMesh


def write_mesh(mesh: TriangleMesh, path) -> None:
    lines = [f"{mesh.n_vertices} {mesh.n_triangles} {len(mesh.boundary_edges)}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines += [f"{a} {b} {c} {t}" for (a, b, c), t in zip(mesh.triangles, mesh.tags)]
    lines += [f"{a} {b} {nx:.17g} {ny:.17g}" for (a, b), (nx, ny) in zip(mesh.boundary_edges, mesh.normals)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> TriangleMesh:
    rows = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        text = raw.split("#", 1)[0].strip()
        if text:
            rows.append((lineno, text.split()))
    if not rows:
        raise MeshError(f"{path}: empty mesh file")
    try:
        nv, nt, ne = (int(x) for x in rows[0][1])
    except ValueError as exc:
        raise MeshError(f"{path}:{rows[0][0]}: header must be 'V T E'") from exc
    if len(rows) != 1 + nv + nt + ne:
        raise MeshError(f"{path}: expected {1 + nv + nt + ne} data lines, found {len(rows)}")

    def block(start, count, width, kind):
        out = []
        for lineno, fields in rows[start : start + count]:
            if len(fields) != width:
                raise MeshError(f"{path}:{lineno}: {kind} line needs {width} fields")
            out.append(fields)
        return out

    try:
        verts = np.array(block(1, nv, 2, "vertex"), dtype=float).reshape(nv, 2)
        tri_rows = np.array(block(1 + nv, nt, 4, "triangle"), dtype=np.int64).reshape(nt, 4)
        edge_rows = block(1 + nv + nt, ne, 4, "boundary edge")
    except ValueError as exc:
        raise MeshError(f"{path}: malformed number ({exc})") from exc
    mesh = TriangleMesh.from_arrays(verts, tri_rows[:, :3], tri_rows[:, 3])
    listed = {(int(a), int(b)) for a, b, _, _ in edge_rows}
    derived = {tuple(e) for e in mesh.boundary_edges.tolist()}
    if listed != derived:
        raise MeshError(f"{path}: boundary edges do not match the triangulation")
    return mesh


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_field_csv(field, path) -> None:
    """``vertex_id,x,y,value``."""
    m = field.mesh
    _write_rows(
        path,
        ["vertex_id", "x", "y", "value"],
        ((i, x, y, v) for i, ((x, y), v) in enumerate(zip(m.vertices, field.values))),
    )


def write_insulation_csv(h, path) -> None:
    """``boundary_node_id,arc_position,h_value`` (node ids are mesh vertex ids)."""
    b = h.boundary
    _write_rows(
        path,
        ["boundary_node_id", "arc_position", "h_value"],
        zip(b.node_ids.tolist(), b.arc_positions, h.values),
    )


def write_dict_rows(rows, path) -> None:
    rows = list(rows)
    header = list(rows[0]) if rows else []
    _write_rows(path, header, ([r[k] for k in header] for r in rows))


def write_profile_csv(profile, path) -> None:
    """``t,mu,per,lhs_psquare,rhs_psquare,lhs_master,rhs_master``."""
    write_dict_rows(profile.rows(), path)


def write_json(data, path) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")
