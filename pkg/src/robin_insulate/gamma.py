"""Thin-layer energies against the limit energy as the layer thins out."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fem
from .fem import ProblemParams, ScalarField
from .mesh import TriangleMesh, extrude_layer


@dataclass
class GammaSweep:
    eps: list
    layer_energies: list
    limit_energy: float
    recovery_energies: list = field(default_factory=list)

    @property
    def gaps(self) -> np.ndarray:
        return np.abs(np.asarray(self.layer_energies) - self.limit_energy)

    @property
    def recovery_defects(self) -> np.ndarray:
        """``F_eps(v phi_eps) - F(v)`` for the limit minimizer ``v``."""
        return np.asarray(self.recovery_energies) - self.limit_energy

    def order(self) -> float:
        """Least-squares slope of log gap against log eps."""
        return fitted_order(self.eps, self.gaps)

    def rows(self):
        out = []
        for k, e in enumerate(self.eps):
            row = {
                "eps": e,
                "min_F_eps": self.layer_energies[k],
                "min_F": self.limit_energy,
                "gap": float(self.gaps[k]),
            }
            if self.recovery_energies:
                row["F_eps_recovery"] = self.recovery_energies[k]
            out.append(row)
        return out


def fitted_order(x, y) -> float:
    x, y = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def recovery_field(v: ScalarField, mesh_eps: TriangleMesh, h, eps: float, params: ProblemParams) -> ScalarField:
    """Extend ``v`` into the layer as ``v(sigma) * phi_eps``.

    ``v`` is constant along each extrusion column and
    ``phi_eps = 1 - beta d / (eps (1 + beta h))`` with ``d = s eps h`` the
    distance to dOmega at level fraction ``s``.
    """
    cols = mesh_eps.layer_columns
    if cols is None:
        raise ValueError("mesh_eps must come from extrude_layer")
    body = v.mesh
    bmap = body.boundary
    hv = fem.insulation_values(h, bmap)
    n_layers = cols.shape[1] - 1
    s = np.arange(n_layers + 1) / n_layers
    phi = 1.0 - params.beta * s[None, :] * hv[:, None] / (1.0 + params.beta * hv[:, None])
    values = np.zeros(mesh_eps.n_vertices)
    values[: body.n_vertices] = v.values
    trace = v.values[bmap.node_ids]
    moving = hv > 0
    values[cols[moving, 1:]] = (trace[:, None] * phi)[moving, 1:]
    return ScalarField(mesh_eps, values)


def gamma_sweep(
    mesh: TriangleMesh,
    h,
    params: ProblemParams,
    eps_values,
    f=1.0,
    tol: float = 1e-10,
    recovery: bool = True,
) -> GammaSweep:
    """Minimum layer energies for each eps next to the minimum limit energy.

    With ``recovery`` the layer energy of the recovery sequence built on the
    limit minimizer is evaluated as well.
    """
    u, system = fem.solve_limit(mesh, h, params, f, tol)
    limit = fem.energy_value(u, system)
    sweep = GammaSweep([float(e) for e in eps_values], [], limit)
    for eps in sweep.eps:
        mesh_eps = extrude_layer(mesh, h, eps)
        ue, se = fem.solve_layer(mesh_eps, eps, params, f, tol)
        sweep.layer_energies.append(fem.energy_value(ue, se))
        if recovery:
            sweep.recovery_energies.append(fem.energy_value(recovery_field(u, mesh_eps, h, eps, params), se))
    return sweep
