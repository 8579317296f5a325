"""P1 finite elements for the insulated Robin energies.

Both energies are quadratic, ``E(x) = 1/2 x.A x - b.x`` on nodal vectors:

* limit energy on Omega:
  ``1/2 int |grad v|^2 + 1/2 int_dOmega beta/(1+beta h) v^2 - int f v``
* layer energy on Omega_eps:
  ``1/2 int_Omega |grad v|^2 + eps/2 int_layer |grad v|^2
  + beta/2 int_dOmega_eps v^2 - int_Omega f v``

Boundary terms use the lumped (nodal trapezoidal) rule; stiffness and load
are exact on the P1 space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .mesh import BODY, LAYER, BoundaryMap, TriangleMesh


class ConvergenceError(RuntimeError):
    """Iterative solve stopped before reaching its tolerance."""

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class ProblemParams:
    beta: float
    mass: float = 1.0
    dim: int = 2

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError("dim must be an integer >= 2")


@dataclass(frozen=True, eq=False)
class SourceField:
    """Heat source: a constant, or nodal values on the body vertices."""

    value: float | np.ndarray = 1.0

    def __post_init__(self):
        v = np.asarray(self.value, dtype=float)
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("source must be finite and non-negative")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "value", float(v) if v.ndim == 0 else v)

    @classmethod
    def coerce(cls, f) -> "SourceField":
        return f if isinstance(f, SourceField) else cls(f)

    @property
    def is_constant(self) -> bool:
        return np.ndim(self.value) == 0

    def is_zero(self) -> bool:
        return not np.any(np.asarray(self.value))


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Nodal values of a P1 function on ``mesh``."""

    mesh: TriangleMesh
    values: np.ndarray
    iterations: int = 0
    residual: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.mesh.n_vertices,):
            raise ValueError(f"field needs {self.mesh.n_vertices} nodal values, got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def trace(self, boundary: BoundaryMap | None = None) -> np.ndarray:
        """Values on the boundary nodes (dOmega by default)."""
        boundary = self.mesh.body_boundary if boundary is None else boundary
        return self.values[boundary.node_ids]

    def __mul__(self, other):
        return ScalarField(self.mesh, self.values * other)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """``A x = b`` with ``A`` symmetric (CSR) for the energy ``1/2 x.A x - b.x``."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    mesh: TriangleMesh
    kind: str = "limit"
    info: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


# ---------------------------------------------------------------------------
# element kernels


def _gradients(mesh: TriangleMesh):
    """Constant gradients of the three hat functions on each triangle."""
    p = mesh.vertices[mesh.triangles]
    area = mesh.areas
    # grad phi_k = rot90(p_{k+2} - p_{k+1}) / (2 area)
    d = p[:, [2, 0, 1]] - p[:, [1, 2, 0]]
    grads = np.stack([-d[:, :, 1], d[:, :, 0]], axis=2) / (2.0 * area[:, None, None])
    return grads


def stiffness_matrix(mesh: TriangleMesh, conductivity=1.0) -> sp.csr_matrix:
    """``K_ij = sum_T k_T |T| grad phi_i . grad phi_j``."""
    k = np.broadcast_to(np.asarray(conductivity, dtype=float), (mesh.n_triangles,))
    g = _gradients(mesh)
    local = np.einsum("tid,tjd->tij", g, g) * (k * mesh.areas)[:, None, None]
    return _scatter(mesh, local)


def mass_matrix(mesh: TriangleMesh, mask=None) -> sp.csr_matrix:
    """Consistent P1 mass matrix, optionally restricted to ``mask`` triangles."""
    base = (np.ones((3, 3)) + np.eye(3)) / 12.0
    w = mesh.areas if mask is None else mesh.areas * mask
    return _scatter(mesh, base[None] * w[:, None, None])


def _scatter(mesh, local):
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_vertices
    a = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    a.sum_duplicates()
    # exact symmetry regardless of summation order
    return ((a + a.T) * 0.5).tocsr()


def boundary_mass(n: int, boundary: BoundaryMap, coefficient) -> sp.csr_matrix:
    """Lumped ``int kappa v^2`` on a boundary: diagonal ``kappa_i w_i``."""
    kappa = np.broadcast_to(np.asarray(coefficient, dtype=float), (boundary.n_nodes,))
    d = np.zeros(n)
    np.add.at(d, boundary.node_ids, kappa * boundary.node_weights)
    return sp.diags(d, format="csr")


def load_vector(mesh: TriangleMesh, f, region=BODY) -> np.ndarray:
    """``b_i = int_region f phi_i`` for constant or nodal (P1) ``f``."""
    f = SourceField.coerce(f)
    mask = (mesh.tags == region).astype(float)
    if f.is_constant:
        b = np.zeros(mesh.n_vertices)
        np.add.at(b, mesh.triangles.ravel(), np.repeat(f.value * mesh.areas * mask / 3.0, 3))
        return b
    vals = np.zeros(mesh.n_vertices)
    nodal = np.asarray(f.value)
    if len(nodal) > mesh.n_vertices:
        raise ValueError("source has more values than the mesh has vertices")
    vals[: len(nodal)] = nodal
    return mass_matrix(mesh, mask) @ vals


# ---------------------------------------------------------------------------
# assembly


def insulation_values(h, boundary: BoundaryMap) -> np.ndarray:
    """Nodal h on ``boundary`` from a distribution, array, or scalar."""
    arr = np.asarray(getattr(h, "values", h), dtype=float)
    if arr.ndim == 0:
        arr = np.full(boundary.n_nodes, float(arr))
    if arr.shape != (boundary.n_nodes,):
        raise ValueError(f"h needs one value per boundary node ({boundary.n_nodes}), got {arr.shape}")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError("negative insulation")
    return arr


def assemble_robin(mesh: TriangleMesh, coefficient, f=1.0) -> LinearSystem:
    """Energy ``1/2 int |grad v|^2 + 1/2 int_dOmega kappa v^2 - int f v``.

    ``coefficient`` is the nodal Robin weight ``kappa`` on ``mesh.boundary``.
    """
    if mesh.has_layer:
        raise ValueError("Robin assembly expects a body-only mesh")
    a = stiffness_matrix(mesh) + boundary_mass(mesh.n_vertices, mesh.boundary, coefficient)
    return LinearSystem(a.tocsr(), load_vector(mesh, f), mesh, "robin", {"coefficient": coefficient})


def assemble_limit_energy(mesh: TriangleMesh, h, params: ProblemParams, f=1.0) -> LinearSystem:
    """Discrete limit energy for insulation ``h`` (nodal on the boundary)."""
    if mesh.has_layer:
        raise ValueError("limit energy is assembled on the body mesh only")
    hv = insulation_values(h, mesh.boundary)
    kappa = params.beta / (1.0 + params.beta * hv)
    system = assemble_robin(mesh, kappa, f)
    return LinearSystem(system.matrix, system.rhs, mesh, "limit", {"h": hv, "beta": params.beta})


def assemble_layer_energy(mesh_eps: TriangleMesh, eps: float, params: ProblemParams, f=1.0) -> LinearSystem:
    """Discrete thin-layer energy on a mesh from :func:`~robin_insulate.mesh.extrude_layer`.

    Conductivity is 1 on body triangles and ``eps`` on layer triangles; the
    Robin term acts on the outer boundary of Omega_eps; the source acts on
    the body only. Flux transmission across dOmega is natural in this form.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if len(mesh_eps.boundary_edges) == 0:
        raise ValueError("mesh has no outer boundary")
    k = np.where(mesh_eps.tags == LAYER, eps, 1.0)
    a = stiffness_matrix(mesh_eps, k) + boundary_mass(mesh_eps.n_vertices, mesh_eps.boundary, params.beta)
    b = load_vector(mesh_eps, f, BODY)
    return LinearSystem(a.tocsr(), b, mesh_eps, "layer", {"eps": eps, "beta": params.beta})


# ---------------------------------------------------------------------------
# solve and evaluate


def solve(system: LinearSystem, tol: float = 1e-10, max_iter: int | None = None, x0=None) -> ScalarField:
    """Jacobi-preconditioned conjugate gradients.

    Stops when ``||b - A x|| <= tol ||b||``. A zero right-hand side returns
    the zero field. Raises :class:`ConvergenceError` with the final relative
    residual otherwise.
    """
    if not 0 < tol < 1:
        raise ValueError("tol must lie in (0, 1)")
    a, b = system.matrix, system.rhs
    n = len(b)
    max_iter = 10 * n + 100 if max_iter is None else int(max_iter)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return ScalarField(system.mesh, np.zeros(n), 0, 0.0)
    diag = a.diagonal()
    if np.any(diag <= 0):
        raise ConvergenceError("matrix has a non-positive diagonal entry", float("nan"), 0)
    inv_d = 1.0 / diag
    x = np.zeros(n) if x0 is None else np.array(getattr(x0, "values", x0), dtype=float)
    r = b - a @ x
    rel = np.linalg.norm(r) / bnorm
    if rel <= tol:
        return ScalarField(system.mesh, x, 0, rel)
    z = inv_d * r
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        ap = a @ p
        pap = p @ ap
        if not pap > 0:
            raise ConvergenceError(f"CG breakdown (p.Ap = {pap:.3e}); relative residual {rel:.3e}", rel, it)
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        rel = np.linalg.norm(r) / bnorm
        if rel <= tol:
            # confirm with the true residual to guard against drift
            rel_true = np.linalg.norm(b - a @ x) / bnorm
            if rel_true <= tol:
                return ScalarField(system.mesh, x, it, rel_true)
            r = b - a @ x
        z = inv_d * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(
        f"CG did not converge in {max_iter} iterations; relative residual {rel:.3e}", rel, max_iter
    )


def _check_field(field: ScalarField, system: LinearSystem):
    if field.mesh is not system.mesh and field.mesh.n_vertices != system.size:
        raise ValueError("field and system live on different meshes")
    if len(field.values) != system.size:
        raise ValueError("field and system live on different meshes")


def energy_value(field: ScalarField, system: LinearSystem) -> float:
    """Energy ``1/2 x.A x - b.x`` of the system's functional at ``field``."""
    _check_field(field, system)
    x = field.values
    return float(0.5 * x @ (system.matrix @ x) - system.rhs @ x)


def energy_terms(field: ScalarField, system: LinearSystem) -> dict:
    """Split of the energy into gradient, boundary and source parts."""
    _check_field(field, system)
    mesh, x = system.mesh, field.values
    if system.kind == "layer":
        k = np.where(mesh.tags == LAYER, system.info["eps"], 1.0)
    else:
        k = 1.0
    grad = 0.5 * float(x @ (stiffness_matrix(mesh, k) @ x))
    quad = 0.5 * float(x @ (system.matrix @ x))
    source = float(system.rhs @ x)
    return {"gradient": grad, "boundary": quad - grad, "source": -source, "total": quad - source}


def heat_content(field: ScalarField) -> float:
    """``int_Omega u`` over body triangles (exact for P1)."""
    mesh = field.mesh
    mask = mesh.tags == BODY
    vals = field.values[mesh.triangles[mask]]
    return float(np.sum(mesh.areas[mask] * vals.sum(axis=1)) / 3.0)


def l2_norm(field: ScalarField) -> float:
    x = field.values
    return float(np.sqrt(x @ (mass_matrix(field.mesh) @ x)))


def h1_norm(field: ScalarField) -> float:
    x = field.values
    m = mass_matrix(field.mesh) + stiffness_matrix(field.mesh)
    return float(np.sqrt(x @ (m @ x)))


def solve_limit(mesh: TriangleMesh, h, params: ProblemParams, f=1.0, tol=1e-10, x0=None):
    """Assemble and solve the limit problem; returns ``(field, system)``."""
    system = assemble_limit_energy(mesh, h, params, f)
    return solve(system, tol, x0=x0), system


def solve_layer(mesh_eps: TriangleMesh, eps: float, params: ProblemParams, f=1.0, tol=1e-10):
    system = assemble_layer_energy(mesh_eps, eps, params, f)
    return solve(system, tol), system
