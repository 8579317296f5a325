"""Estimator-style wrappers (``fit`` / ``predict`` / ``transform``).

``fit`` takes a :class:`~robin_insulate.mesh.TriangleMesh` as ``X``;
``predict`` evaluates the fitted temperature at query points. Parameters
follow the scikit-learn conventions, so ``get_params``, ``set_params`` and
``clone`` work as usual.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import fem
from .bounds import isoperimetric_bound
from .insulation import BoundaryTrace, alternating_minimize, optimal_h
from .mesh import extrude_layer
from .validation import check_mesh, check_positive, check_traces, interpolate


class _FieldPredictor:
    def predict(self, X):
        """Temperature at points ``X`` of shape (n_points, 2); NaN outside."""
        check_is_fitted(self, "u_")
        return interpolate(self.u_.mesh, self.u_.values, X)


class RobinSolver(_FieldPredictor, BaseEstimator):
    """Minimizer of the limit energy for a fixed insulation ``h``.

    ``insulation`` is a scalar or one value per boundary node.
    """

    def __init__(self, beta=1.0, insulation=0.0, source=1.0, tol=1e-10, max_iter=None):
        self.beta = beta
        self.insulation = insulation
        self.source = source
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y=None):
        mesh = check_mesh(X)
        beta = check_positive("beta", self.beta)
        h = fem.insulation_values(self.insulation, mesh.boundary)
        params = fem.ProblemParams(beta, max(mesh.boundary.integrate(h), 1e-300))
        self.system_ = fem.assemble_limit_energy(mesh, h, params, self.source)
        self.u_ = fem.solve(self.system_, self.tol, self.max_iter)
        self.energy_ = fem.energy_value(self.u_, self.system_)
        self.heat_content_ = fem.heat_content(self.u_)
        self.n_iter_ = self.u_.iterations
        return self


class ThinLayerSolver(_FieldPredictor, BaseEstimator):
    """Minimizer of the layer energy on Omega_eps."""

    def __init__(self, beta=1.0, eps=0.1, insulation=1.0, source=1.0, n_layers=None, tol=1e-10):
        self.beta = beta
        self.eps = eps
        self.insulation = insulation
        self.source = source
        self.n_layers = n_layers
        self.tol = tol

    def fit(self, X, y=None):
        mesh = check_mesh(X)
        beta = check_positive("beta", self.beta)
        eps = check_positive("eps", self.eps)
        h = fem.insulation_values(self.insulation, mesh.boundary)
        self.mesh_eps_ = extrude_layer(mesh, h, eps, self.n_layers)
        params = fem.ProblemParams(beta, max(mesh.boundary.integrate(h), 1e-300))
        self.system_ = fem.assemble_layer_energy(self.mesh_eps_, eps, params, self.source)
        self.u_ = fem.solve(self.system_, self.tol)
        self.energy_ = fem.energy_value(self.u_, self.system_)
        self.heat_content_ = fem.heat_content(self.u_)
        return self


class InsulationOptimizer(_FieldPredictor, BaseEstimator):
    """Optimal couple (u, h) for a fixed insulation mass.

    After ``fit``, ``transform`` maps boundary traces (rows aligned with
    ``boundary_.node_ids``) to their optimal insulation of the same mass.
    """

    def __init__(self, beta=1.0, mass=1.0, source=1.0, tol_energy=1e-12, max_outer=500, h0=None, quadrature="nodal"):
        self.beta = beta
        self.mass = mass
        self.source = source
        self.tol_energy = tol_energy
        self.max_outer = max_outer
        self.h0 = h0
        self.quadrature = quadrature

    def _params(self):
        return fem.ProblemParams(check_positive("beta", self.beta), check_positive("mass", self.mass))

    def fit(self, X, y=None):
        mesh = check_mesh(X)
        params = self._params()
        check_positive("tol_energy", self.tol_energy)
        report = alternating_minimize(
            mesh, params, self.source, self.tol_energy, self.max_outer, self.h0, quadrature=self.quadrature
        )
        self.report_ = report
        self.u_ = report.u
        self.h_ = report.h
        self.c_ = report.c
        self.boundary_ = mesh.boundary
        self.energy_ = report.energy
        self.heat_content_ = fem.heat_content(report.u)
        self.bound_ = isoperimetric_bound(mesh.area, mesh.perimeter, params)
        self.n_iter_ = report.iterations
        return self

    def transform(self, X):
        check_is_fitted(self, "boundary_")
        X = check_traces(X, self.boundary_.n_nodes)
        params = self._params()
        return np.vstack([optimal_h(BoundaryTrace(self.boundary_, row), params, self.quadrature).values for row in X])
