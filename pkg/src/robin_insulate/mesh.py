"""Triangular meshes of planar bodies and of their insulating layers.

A :class:`TriangleMesh` is immutable. Triangles are stored counter-clockwise,
each carries a region tag (``BODY`` or ``LAYER``), and the boundary edges are
oriented so that the meshed region lies on their left; the outward unit
normal of an edge is therefore its tangent rotated clockwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import shapely.geometry
import triangle

BODY = 0
LAYER = 1

#: Smallest interior triangle angle (degrees) accepted from the generators.
MIN_ANGLE_DEG = 20.0


class MeshError(ValueError):
    """Raised for invalid geometry or a mesh that violates its invariants."""


def _frozen(array, dtype):
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class BoundaryMap:
    """Discrete boundary measure: ordered boundary nodes and edge lengths.

    ``edges`` indexes into ``node_ids`` (local numbering), so a trace is a
    plain array aligned with ``node_ids``.
    """

    node_ids: np.ndarray
    edges: np.ndarray
    edge_lengths: np.ndarray
    points: np.ndarray

    @classmethod
    def from_loop(cls, points, node_ids=None, edge_lengths=None) -> "BoundaryMap":
        """Single closed loop through ``points`` in order.

        ``edge_lengths`` defaults to the chord lengths; passing arc lengths
        gives the exact measure of a curved boundary.
        """
        points = np.asarray(points, dtype=float)
        k = len(points)
        edges = np.column_stack([np.arange(k), (np.arange(k) + 1) % k])
        if edge_lengths is None:
            edge_lengths = np.linalg.norm(points[edges[:, 1]] - points[edges[:, 0]], axis=1)
        edge_lengths = np.broadcast_to(np.asarray(edge_lengths, dtype=float), (k,))
        if node_ids is None:
            node_ids = np.arange(k)
        return cls(
            _frozen(node_ids, np.int64),
            _frozen(edges, np.int64),
            _frozen(edge_lengths, float),
            _frozen(points, float),
        )

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def perimeter(self) -> float:
        return float(self.edge_lengths.sum())

    @cached_property
    def node_weights(self) -> np.ndarray:
        """Trapezoidal (lumped) quadrature weight of each boundary node."""
        w = np.zeros(self.n_nodes)
        np.add.at(w, self.edges[:, 0], 0.5 * self.edge_lengths)
        np.add.at(w, self.edges[:, 1], 0.5 * self.edge_lengths)
        w.setflags(write=False)
        return w

    def integrate(self, values) -> float:
        """Trapezoidal integral of nodal values (exact for linear interpolants)."""
        return float(np.dot(self.node_weights, np.asarray(values, dtype=float)))

    @cached_property
    def arc_positions(self) -> np.ndarray:
        """Cumulative arc length of each node along its loop, starting at 0."""
        pos = np.zeros(self.n_nodes)
        for loop in _walk_loops(self.edges):
            acc = 0.0
            for a, b, e in loop:
                pos[a] = acc
                acc += self.edge_lengths[e]
        pos.setflags(write=False)
        return pos


def _walk_loops(edges):
    """Group oriented edges ``a -> b`` into closed loops of (a, b, edge_index)."""
    nxt = {int(a): i for i, (a, _) in enumerate(edges)}
    seen = np.zeros(len(edges), dtype=bool)
    loops = []
    for start in range(len(edges)):
        if seen[start]:
            continue
        loop = []
        e = start
        while not seen[e]:
            seen[e] = True
            a, b = int(edges[e, 0]), int(edges[e, 1])
            loop.append((a, b, e))
            if b not in nxt:
                raise MeshError("boundary edges do not form closed loops")
            e = nxt[b]
        if e != start:
            raise MeshError("boundary edges do not form closed loops")
        loops.append(loop)
    return loops


def boundary_edges_of(triangles: np.ndarray) -> np.ndarray:
    """Oriented boundary edges of a CCW triangulation, ordered loop by loop."""
    tris = np.asarray(triangles, dtype=np.int64)
    if len(tris) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    half = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    key = np.sort(half, axis=1)
    _, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    if np.any(counts > 2):
        raise MeshError("non-manifold edge shared by more than two triangles")
    edges = half[counts[inverse] == 1]
    if len(edges) == 0:
        return edges
    loops = _walk_loops(edges)
    return np.array([[a, b] for loop in loops for a, b, _ in loop], dtype=np.int64)


def _signed_areas(vertices, triangles):
    p = vertices[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _edge_normals(vertices, edges):
    t = vertices[edges[:, 1]] - vertices[edges[:, 0]]
    t /= np.linalg.norm(t, axis=1)[:, None]
    return np.column_stack([t[:, 1], -t[:, 0]])


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Conforming P1 triangulation with region tags and oriented boundary."""

    vertices: np.ndarray
    triangles: np.ndarray
    tags: np.ndarray
    boundary_edges: np.ndarray
    normals: np.ndarray
    #: layer meshes only: vertex id of boundary node i at extrusion level k
    layer_columns: np.ndarray | None = None

    @classmethod
    def from_arrays(cls, vertices, triangles, tags=None) -> "TriangleMesh":
        """Build a mesh, orienting triangles CCW and deriving the boundary."""
        vertices = np.asarray(vertices, dtype=float)
        triangles = np.array(triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshError("vertices must have shape (V, 2)")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise MeshError("triangles must have shape (T, 3)")
        if tags is None:
            tags = np.full(len(triangles), BODY, dtype=np.int8)
        area = _signed_areas(vertices, triangles)
        flip = area < 0
        triangles[flip] = triangles[flip][:, [0, 2, 1]]
        edges = boundary_edges_of(triangles)
        mesh = cls(
            _frozen(vertices, float),
            _frozen(triangles, np.int64),
            _frozen(tags, np.int8),
            _frozen(edges, np.int64),
            _frozen(_edge_normals(vertices, edges), float),
        )
        mesh.validate()
        return mesh

    def validate(self) -> None:
        """Check the structural invariants; raise :class:`MeshError` if broken."""
        if len(self.tags) != len(self.triangles):
            raise MeshError("one region tag per triangle is required")
        if not np.isin(self.tags, (BODY, LAYER)).all():
            raise MeshError("unknown region tag")
        if self.triangles.size and (self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)):
            raise MeshError("triangle references a missing vertex")
        if np.any(self.areas <= 0):
            raise MeshError("degenerate or inverted triangle")
        norms = np.linalg.norm(self.normals, axis=1)
        if self.normals.size and np.max(np.abs(norms - 1.0)) > 1e-12:
            raise MeshError("boundary normals are not unit vectors")

    # -- sizes -------------------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def areas(self) -> np.ndarray:
        a = _signed_areas(self.vertices, self.triangles)
        a.setflags(write=False)
        return a

    @property
    def area(self) -> float:
        return float(self.areas.sum())

    def region_area(self, tag: int) -> float:
        return float(self.areas[self.tags == tag].sum())

    @property
    def has_layer(self) -> bool:
        return bool(np.any(self.tags == LAYER))

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        """Lengths of the outer boundary edges."""
        e = self.boundary_edges
        out = np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1)
        out.setflags(write=False)
        return out

    @property
    def perimeter(self) -> float:
        return float(self.edge_lengths.sum())

    @cached_property
    def max_edge_length(self) -> float:
        p = self.vertices[self.triangles]
        lengths = np.linalg.norm(p[:, [1, 2, 0]] - p, axis=2)
        return float(lengths.max())

    @cached_property
    def min_angle(self) -> float:
        """Smallest interior angle over all triangles, in degrees."""
        p = self.vertices[self.triangles]
        angles = []
        for k in range(3):
            u = p[:, (k + 1) % 3] - p[:, k]
            v = p[:, (k + 2) % 3] - p[:, k]
            cos = np.sum(u * v, axis=1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
            angles.append(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))
        return float(np.min(angles))

    # -- boundary ----------------------------------------------------------
    @cached_property
    def boundary(self) -> BoundaryMap:
        """Boundary map of the outer boundary of the whole mesh."""
        return self._boundary_map(self.boundary_edges)

    @cached_property
    def body_boundary_edges(self) -> np.ndarray:
        """Oriented boundary edges of the body region, i.e. the discrete dOmega."""
        if not self.has_layer:
            return self.boundary_edges
        return boundary_edges_of(self.triangles[self.tags == BODY])

    @cached_property
    def body_boundary(self) -> BoundaryMap:
        """Boundary map of dOmega (the interface when a layer is present)."""
        return self._boundary_map(self.body_boundary_edges)

    def _boundary_map(self, edges) -> BoundaryMap:
        # number nodes in loop order (first appearance as an edge start)
        order = []
        seen = set()
        for a in edges[:, 0]:
            if a not in seen:
                seen.add(int(a))
                order.append(int(a))
        node_ids = np.array(order, dtype=np.int64)
        position = {v: i for i, v in enumerate(order)}
        local = np.vectorize(position.__getitem__, otypes=[np.int64])(edges) if len(edges) else edges
        lengths = np.linalg.norm(self.vertices[edges[:, 1]] - self.vertices[edges[:, 0]], axis=1)
        return BoundaryMap(
            _frozen(node_ids, np.int64),
            _frozen(local, np.int64),
            _frozen(lengths, float),
            _frozen(self.vertices[node_ids], float),
        )

    def body_mesh(self) -> "TriangleMesh":
        """Sub-mesh of body triangles on the same vertex array."""
        if not self.has_layer:
            return self
        mask = self.tags == BODY
        used = np.unique(self.triangles[mask])
        n_body = int(used.max()) + 1
        return TriangleMesh.from_arrays(self.vertices[:n_body], self.triangles[mask])

    def n_components(self) -> int:
        """Number of edge-connected components of the triangulation."""
        from scipy.sparse import coo_matrix
        from scipy.sparse.csgraph import connected_components

        t = self.triangles
        rows = np.concatenate([t[:, 0], t[:, 1], t[:, 2]])
        cols = np.concatenate([t[:, 1], t[:, 2], t[:, 0]])
        graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(self.n_vertices,) * 2)
        used = np.zeros(self.n_vertices, dtype=bool)
        used[t.ravel()] = True
        _, labels = connected_components(graph, directed=False)
        return len(np.unique(labels[used]))


# ---------------------------------------------------------------------------
# generators


def make_disk_mesh(radius: float, refinement_level: int, center=(0.0, 0.0)) -> TriangleMesh:
    """Quasi-uniform disk mesh built from concentric rings.

    Level ``L`` uses ``N = 2**(L+1)`` rings; ring ``i`` carries ``6 i`` nodes
    so that every hexagonal sector is refined uniformly. Boundary nodes lie on
    the circle and the maximal edge length halves from one level to the next.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    if int(refinement_level) != refinement_level or refinement_level < 0:
        raise ValueError("refinement_level must be a non-negative integer")
    n_rings = 2 ** (int(refinement_level) + 1)
    pts = [np.zeros((1, 2))]
    start = [0]
    for i in range(1, n_rings + 1):
        k = 6 * i
        theta = 2.0 * np.pi * np.arange(k) / k
        r = radius * i / n_rings
        start.append(start[-1] + len(pts[-1]))
        pts.append(np.column_stack([r * np.cos(theta), r * np.sin(theta)]))
    vertices = np.concatenate(pts) + np.asarray(center, dtype=float)

    tris = [(0, 1 + j, 1 + (j + 1) % 6) for j in range(6)]
    for i in range(1, n_rings):
        a, b = 6 * i, 6 * (i + 1)
        si, so = start[i], start[i + 1]
        p = q = 0
        # merge the two rings by angle; ties advance the outer ring
        while p < a or q < b:
            if q < b and (p >= a or (q + 1) * a <= (p + 1) * b):
                tris.append((si + p % a, so + q % b, so + (q + 1) % b))
                q += 1
            else:
                tris.append((si + p % a, so + q % b, si + (p + 1) % a))
                p += 1
    return TriangleMesh.from_arrays(vertices, np.array(tris))


def _check_simple_polygon(vertices: np.ndarray) -> np.ndarray:
    if vertices.ndim != 2 or vertices.shape[1] != 2 or len(vertices) < 3:
        raise MeshError("self-intersecting boundary: need at least three 2D vertices")
    ring = shapely.geometry.LinearRing(vertices)
    area = 0.5 * np.sum(vertices[:, 0] * np.roll(vertices[:, 1], -1) - np.roll(vertices[:, 0], -1) * vertices[:, 1])
    dup = len(np.unique(np.round(vertices, 14), axis=0)) < len(vertices)
    if dup or abs(area) <= 1e-14 or not ring.is_simple:
        raise MeshError("self-intersecting boundary")
    if area < 0:
        vertices = vertices[::-1].copy()
    return vertices


def make_polygon_mesh(vertices, target_edge_length: float) -> TriangleMesh:
    """Quality triangulation of a simple polygon (min angle 20 degrees).

    Polygon sides are split uniformly so no boundary segment exceeds
    ``target_edge_length``; interior triangles are limited to the area of an
    equilateral triangle of that side. Clockwise input is reoriented.
    """
    if not target_edge_length > 0:
        raise ValueError("target_edge_length must be positive")
    poly = _check_simple_polygon(np.asarray(vertices, dtype=float))
    pts = []
    for a, b in zip(poly, np.roll(poly, -1, axis=0)):
        k = max(1, math.ceil(np.linalg.norm(b - a) / target_edge_length - 1e-9))
        s = np.arange(k)[:, None] / k
        pts.append(a + s * (b - a))
    pts = np.concatenate(pts)
    n = len(pts)
    segments = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])
    max_area = math.sqrt(3.0) / 4.0 * target_edge_length**2
    out = triangle.triangulate(
        {"vertices": pts, "segments": segments}, f"pq{MIN_ANGLE_DEG:g}a{max_area:.17g}Q"
    )
    mesh = TriangleMesh.from_arrays(out["vertices"], out["triangles"])
    if mesh.min_angle < MIN_ANGLE_DEG - 1e-6:
        raise MeshError(f"mesh quality below {MIN_ANGLE_DEG} degrees ({mesh.min_angle:.3f})")
    return mesh


def ellipse_polygon(a: float, b: float, n_sides: int) -> np.ndarray:
    """Vertices of an ``n_sides``-gon inscribed in the ellipse with semi-axes a, b."""
    theta = 2.0 * np.pi * np.arange(n_sides) / n_sides
    return np.column_stack([a * np.cos(theta), b * np.sin(theta)])


def l_shape_polygon(size: float = 2.0) -> np.ndarray:
    s, t = float(size), float(size) / 2.0
    return np.array([[0, 0], [s, 0], [s, t], [t, t], [t, s], [0, s]], dtype=float)


def unit_square_polygon() -> np.ndarray:
    return np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)


# ---------------------------------------------------------------------------
# insulating layer


def vertex_normals(mesh: TriangleMesh, miter_limit: float = 2.0):
    """Unit vertex normals on dOmega and the miter factor of each node.

    The miter factor ``1/cos(half turning angle)`` keeps the offset curve at
    normal distance ``t`` from both adjacent edges; it is capped at
    ``miter_limit`` for sharp corners.
    """
    edges = mesh.body_boundary_edges
    bmap = mesh.body_boundary
    en = _edge_normals(mesh.vertices, edges)
    acc = np.zeros((bmap.n_nodes, 2))
    np.add.at(acc, bmap.edges[:, 0], en)
    np.add.at(acc, bmap.edges[:, 1], en)
    nrm = np.linalg.norm(acc, axis=1)
    if np.any(nrm < 1e-12):
        raise MeshError("cusp in boundary: vertex normal undefined")
    normals = acc / nrm[:, None]
    # cos of the half turning angle = n_vertex . n_edge for either adjacent edge
    cos_half = np.ones(bmap.n_nodes)
    np.minimum.at(cos_half, bmap.edges[:, 0], np.sum(normals[bmap.edges[:, 0]] * en, axis=1))
    miter = np.minimum(1.0 / np.maximum(cos_half, 1e-12), miter_limit)
    return normals, miter


def min_layers(eps: float) -> int:
    """Minimum number of element layers across the thickness."""
    return max(1, math.ceil(2.0 / math.sqrt(eps) - 1e-12))


def extrude_layer(mesh: TriangleMesh, h, eps: float, n_layers: int | None = None) -> TriangleMesh:
    """Mesh of Omega_eps: the body plus a layer of thickness ``eps * h``.

    ``h`` holds one value per node of ``mesh.boundary`` (an
    :class:`~robin_insulate.insulation.InsulationDistribution` or an array) or
    is a scalar. Each boundary edge is extruded along the vertex normals into
    ``n_layers`` quads, each split in two triangles tagged ``LAYER``. Nodes
    with ``h == 0`` do not move, so edges with zero thickness at both ends
    get no layer elements. Body vertices and triangles are kept verbatim and
    come first.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if mesh.has_layer:
        raise MeshError("mesh already carries a layer")
    bmap = mesh.boundary
    h = np.asarray(getattr(h, "values", h), dtype=float)
    h = np.broadcast_to(h, (bmap.n_nodes,)) if h.ndim == 0 else h
    if h.shape != (bmap.n_nodes,):
        raise ValueError(f"h must have one value per boundary node ({bmap.n_nodes})")
    if np.any(h < 0) or not np.all(np.isfinite(h)):
        raise ValueError("negative insulation")
    n_min = min_layers(eps)
    n_layers = n_min if n_layers is None else int(n_layers)
    if n_layers < n_min:
        raise ValueError(f"at least {n_min} layers are required for eps={eps}")

    normals, miter = vertex_normals(mesh)
    thick = eps * h * miter
    base = mesh.vertices[bmap.node_ids]
    s = np.arange(1, n_layers + 1) / n_layers

    # column[i, k] = vertex id of boundary node i at level k (k = 0 is dOmega)
    column = np.empty((bmap.n_nodes, n_layers + 1), dtype=np.int64)
    column[:, 0] = bmap.node_ids
    moving = h > 0
    n_new = int(moving.sum()) * n_layers
    new_ids = mesh.n_vertices + np.arange(n_new).reshape(-1, n_layers)
    column[moving, 1:] = new_ids
    column[~moving, 1:] = bmap.node_ids[~moving, None]
    offsets = base[moving, None, :] + (thick[moving, None] * s[None, :])[:, :, None] * normals[moving, None, :]
    vertices = np.concatenate([mesh.vertices, offsets.reshape(-1, 2)])

    tris = []
    for a, b in bmap.edges:
        if not (moving[a] or moving[b]):
            continue
        ca, cb = column[a], column[b]
        for k in range(n_layers):
            # dOmega runs a -> b with the body on the left; the layer is on the right
            if ca[k] != ca[k + 1]:
                tris.append((ca[k], ca[k + 1], cb[k + 1]))
            if cb[k] != cb[k + 1]:
                tris.append((ca[k], cb[k + 1], cb[k]))
    tris = np.array(tris, dtype=np.int64).reshape(-1, 3)
    if len(tris) and np.any(_signed_areas(vertices, tris) <= 0):
        raise MeshError("layer fold-over; reduce eps")
    all_tris = np.concatenate([mesh.triangles, tris])
    tags = np.concatenate([mesh.tags, np.full(len(tris), LAYER, dtype=np.int8)])
    out = TriangleMesh(
        _frozen(vertices, float),
        _frozen(all_tris, np.int64),
        _frozen(tags, np.int8),
        *_outer_boundary(vertices, all_tris),
        _frozen(column, np.int64),
    )
    out.validate()
    for loop in _walk_loops(out.boundary_edges):
        ring = shapely.geometry.LinearRing(vertices[[a for a, _, _ in loop]])
        if not ring.is_simple:
            raise MeshError("layer fold-over; reduce eps")
    return out


def _outer_boundary(vertices, triangles):
    try:
        edges = boundary_edges_of(triangles)
    except MeshError as exc:
        raise MeshError("layer fold-over; reduce eps") from exc
    return _frozen(edges, np.int64), _frozen(_edge_normals(vertices, edges), float)


def polygon_area(points) -> float:
    p = np.asarray(points, dtype=float)
    return float(0.5 * np.sum(p[:, 0] * np.roll(p[:, 1], -1) - np.roll(p[:, 0], -1) * p[:, 1]))
