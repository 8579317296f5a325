"""Optimal distribution of a fixed mass of insulation on the boundary.

For a boundary trace ``v`` the best ``h`` of mass ``m`` is explicit once the
threshold ``c`` is known: ``h = (|v|/c - 1)/beta`` where ``|v| >= c`` and 0
elsewhere, with ``c`` the unique root of

    g1(c) = int (|v| - c)_+  =  m beta c = g2(c).

Alternating the trace-to-h map with the limit solve decreases the energy
monotonically and converges to the optimal couple (u, h).
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import fem
from .fem import ProblemParams, ScalarField
from .mesh import BoundaryMap, TriangleMesh

log = logging.getLogger(__name__)

QUADRATURES = ("nodal", "linear")


class AlternatingMinimizationError(RuntimeError):
    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True, eq=False)
class BoundaryTrace:
    """Nodal values on the nodes of a boundary map."""

    boundary: BoundaryMap
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.boundary.n_nodes,):
            raise ValueError(f"trace needs {self.boundary.n_nodes} values, got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_field(cls, u: ScalarField) -> "BoundaryTrace":
        bmap = u.mesh.body_boundary
        return cls(bmap, u.values[bmap.node_ids])


@dataclass(frozen=True, eq=False)
class InsulationDistribution:
    """Non-negative nodal thickness ``h`` on a boundary map."""

    boundary: BoundaryMap
    values: np.ndarray
    renormalization: float = 1.0
    threshold: float | None = None

    def __post_init__(self):
        v = np.array(np.broadcast_to(np.asarray(self.values, dtype=float), (self.boundary.n_nodes,)))
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("negative insulation")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def uniform(cls, boundary: BoundaryMap, mass: float) -> "InsulationDistribution":
        return cls(boundary, np.full(boundary.n_nodes, mass / boundary.perimeter))

    @classmethod
    def random(cls, boundary: BoundaryMap, mass: float, rng, sparsity: float = 0.0) -> "InsulationDistribution":
        """Random feasible distribution; ``sparsity`` zeroes that fraction of nodes."""
        h = rng.random(boundary.n_nodes) + 1e-3
        if sparsity > 0:
            h[rng.random(boundary.n_nodes) < sparsity] = 0.0
            if not h.any():
                h[0] = 1.0
        return cls(boundary, h * mass / boundary.integrate(h))

    @property
    def mass(self) -> float:
        return self.boundary.integrate(self.values)

    def check_mass(self, mass: float, rtol: float = 1e-8) -> None:
        if abs(self.mass - mass) > rtol * abs(mass):
            raise ValueError(f"insulation mass {self.mass!r} differs from {mass!r}")


@dataclass(frozen=True)
class FixedPointResult:
    c: float
    active_set_measure: float
    iterations: int
    residual: float
    scale: float

    @property
    def relative_residual(self) -> float:
        return self.residual / self.scale if self.scale else 0.0


# ---------------------------------------------------------------------------
# threshold constant


def _g1_nodal(a, w, c):
    return float(np.dot(w, np.maximum(a - c, 0.0)))


def _g1_linear(a, bmap, c):
    lo = np.minimum(a[bmap.edges[:, 0]], a[bmap.edges[:, 1]])
    hi = np.maximum(a[bmap.edges[:, 0]], a[bmap.edges[:, 1]])
    L = bmap.edge_lengths
    full = lo >= c
    cross = (~full) & (hi > c)
    total = np.sum(L[full] * (0.5 * (lo[full] + hi[full]) - c))
    d = hi[cross] - lo[cross]
    total += np.sum(0.5 * L[cross] * (hi[cross] - c) ** 2 / d)
    return float(total)


def g1(trace: BoundaryTrace, c: float, quadrature: str = "nodal") -> float:
    """``int (|v| - c)_+`` under the chosen boundary quadrature."""
    a = np.abs(trace.values)
    if quadrature == "nodal":
        return _g1_nodal(a, trace.boundary.node_weights, c)
    if quadrature == "linear":
        return _g1_linear(a, trace.boundary, c)
    raise ValueError(f"quadrature must be one of {QUADRATURES}")


def threshold_constant(trace: BoundaryTrace, params: ProblemParams, quadrature: str = "nodal") -> FixedPointResult:
    """Unique ``c >= 0`` with ``g1(c) = m beta c``.

    ``g1 - g2`` is strictly decreasing and piecewise polynomial between the
    sorted nodal values of ``|v|`` (linear for the ``nodal`` quadrature,
    quadratic for ``linear`` interpolation of ``|v|`` along edges). Bisection
    over these breakpoints isolates the piece holding the root, which is
    then solved in closed form.
    """
    if quadrature not in QUADRATURES:
        raise ValueError(f"quadrature must be one of {QUADRATURES}")
    bmap = trace.boundary
    a = np.abs(trace.values)
    mb = params.mass * params.beta
    amax = float(a.max()) if a.size else 0.0
    scale = (bmap.perimeter + mb) * amax
    if amax == 0.0:
        return FixedPointResult(0.0, 0.0, 0, 0.0, 0.0)

    def phi(c):
        return g1(trace, c, quadrature) - mb * c

    knots = np.unique(a)[::-1]
    if knots[-1] > 0:
        knots = np.append(knots, 0.0)
    lo, hi = 0, len(knots) - 1  # phi(knots[lo]) < 0 <= phi(knots[hi])
    steps = 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if phi(knots[mid]) >= 0:
            hi = mid
        else:
            lo = mid
        steps += 1
    c_left, c_right = knots[hi], knots[lo]

    if quadrature == "nodal":
        act = a >= c_right
        w = bmap.node_weights
        c = float(np.dot(w[act], a[act]) / (w[act].sum() + mb))
        measure = float(w[act].sum())
    else:
        e0, e1 = a[bmap.edges[:, 0]], a[bmap.edges[:, 1]]
        elo, ehi = np.minimum(e0, e1), np.maximum(e0, e1)
        L = bmap.edge_lengths
        full = elo >= c_right
        cross = (~full) & (ehi >= c_right) & (ehi > elo)
        d = ehi[cross] - elo[cross]
        qa = np.sum(0.5 * L[cross] / d)
        qb = -np.sum(L[full]) - np.sum(L[cross] * ehi[cross] / d) - mb
        qc = np.sum(L[full] * 0.5 * (elo[full] + ehi[full])) + np.sum(0.5 * L[cross] * ehi[cross] ** 2 / d)
        if qa == 0.0:
            c = -qc / qb
        else:
            disc = max(qb * qb - 4.0 * qa * qc, 0.0)
            c = 2.0 * qc / (-qb + np.sqrt(disc))
        c = float(min(max(c, c_left), c_right))
        measure = float(np.sum(L[full]) + np.sum(L[cross] * np.clip((ehi[cross] - c) / d, 0.0, 1.0)))
    residual = abs(phi(c))
    return FixedPointResult(c, measure, steps, residual, scale)


def optimal_h(trace: BoundaryTrace, params: ProblemParams, quadrature: str = "nodal") -> InsulationDistribution:
    """Mass-``m`` insulation minimizing ``int beta v^2 / (1 + beta h)`` for this trace.

    With the ``nodal`` quadrature (the one used by the discrete energy) the
    formula conserves the discrete mass exactly. With ``linear`` it is
    rescaled once to mass ``m``; the factor is kept in ``renormalization``.
    """
    fp = threshold_constant(trace, params, quadrature)
    if fp.c == 0.0:
        raise ValueError("optimal h undefined for zero trace")
    a = np.abs(trace.values)
    h = np.where(a >= fp.c, (a / fp.c - 1.0) / params.beta, 0.0)
    factor = 1.0
    if quadrature == "linear":
        factor = params.mass / trace.boundary.integrate(h)
        h = h * factor
    return InsulationDistribution(trace.boundary, h, factor, fp.c)


def boundary_term(trace: BoundaryTrace, h, params: ProblemParams) -> float:
    """``1/2 int beta v^2 / (1 + beta h)`` with the lumped quadrature."""
    hv = np.asarray(getattr(h, "values", h), dtype=float)
    v = trace.values
    return 0.5 * trace.boundary.integrate(params.beta * v**2 / (1.0 + params.beta * hv))


@dataclass(frozen=True)
class RobinCheck:
    deviation: float
    active_deviation: float
    inactive_excess: float
    n_active: int


def robin_value_check(h, trace: BoundaryTrace, c: float, params: ProblemParams) -> RobinCheck:
    """Deviation from ``|v|/(1+beta h) = c`` where ``h > 0`` and ``|v| <= c`` where ``h = 0``."""
    hv = np.asarray(getattr(h, "values", h), dtype=float)
    a = np.abs(trace.values)
    on = hv > 0
    active = np.abs(a[on] / (1.0 + params.beta * hv[on]) - c)
    inactive = np.maximum(a[~on] - c, 0.0)
    dev_a = float(active.max()) if active.size else 0.0
    dev_i = float(inactive.max()) if inactive.size else 0.0
    return RobinCheck(max(dev_a, dev_i), dev_a, dev_i, int(on.sum()))


# ---------------------------------------------------------------------------
# alternating minimization


@dataclass
class AlternatingReport:
    """History of the alternating scheme and its final couple."""

    energies: list = field(default_factory=list)
    half_energies: list = field(default_factory=list)
    h_change_l1: list = field(default_factory=list)
    h_change_l2: list = field(default_factory=list)
    h1_norms: list = field(default_factory=list)
    min_values: list = field(default_factory=list)
    thresholds: list = field(default_factory=list)
    u: ScalarField | None = None
    h: InsulationDistribution | None = None
    reason: str = ""

    @property
    def iterations(self) -> int:
        return len(self.half_energies)

    @property
    def energy(self) -> float:
        return self.energies[-1]

    @property
    def c(self) -> float:
        return self.thresholds[-1] if self.thresholds else float("nan")

    def descent_steps(self):
        """Sequence F(u0,h0), F(u0,h1), F(u1,h1), F(u1,h2), ... ."""
        seq = [self.energies[0]]
        for half, full in zip(self.half_energies, self.energies[1:]):
            seq += [half, full]
        return seq

    def trace_rows(self):
        rows = []
        for n, e in enumerate(self.energies):
            rows.append(
                {
                    "iteration": n,
                    "energy": e,
                    "half_step_energy": self.half_energies[n] if n < len(self.half_energies) else "",
                    "h_change_l1": self.h_change_l1[n - 1] if n > 0 else "",
                    "h_change_l2": self.h_change_l2[n - 1] if n > 0 else "",
                    "h1_norm": self.h1_norms[n],
                    "min_u": self.min_values[n],
                }
            )
        return rows


def alternating_minimize(
    mesh: TriangleMesh,
    params: ProblemParams,
    f=1.0,
    tol_energy: float = 1e-12,
    max_outer: int = 500,
    h0=None,
    solver_tol: float = 1e-11,
    quadrature: str = "nodal",
) -> AlternatingReport:
    """Minimize the limit energy jointly in (u, h) by exact alternating steps.

    Starts from ``h0`` (uniform ``m / Per`` by default). Each outer step
    replaces ``h`` by :func:`optimal_h` of the current trace and re-solves for
    ``u``. Stops when successive energies differ by at most
    ``tol_energy * (1 + |F|)``; raises :class:`AlternatingMinimizationError`
    carrying the report if ``max_outer`` steps do not suffice.
    """
    f = fem.SourceField.coerce(f)
    if f.is_zero():
        raise ValueError("source vanishes identically; the optimal h is undefined")
    if mesh.n_components() > 1:
        warnings.warn("domain is disconnected; the optimal couple need not be unique", stacklevel=2)
    bmap = mesh.boundary
    h = InsulationDistribution.uniform(bmap, params.mass) if h0 is None else InsulationDistribution(bmap, getattr(h0, "values", h0))

    report = AlternatingReport()
    u, system = fem.solve_limit(mesh, h, params, f, solver_tol)
    report.energies.append(fem.energy_value(u, system))
    report.h1_norms.append(fem.h1_norm(u))
    report.min_values.append(float(u.values.min()))

    for n in range(int(max_outer)):
        trace = BoundaryTrace(bmap, u.values[bmap.node_ids])
        h_new = optimal_h(trace, params, quadrature)
        system = fem.assemble_limit_energy(mesh, h_new, params, f)
        report.half_energies.append(fem.energy_value(u, system))
        report.thresholds.append(h_new.threshold)
        dh = h_new.values - h.values
        report.h_change_l1.append(bmap.integrate(np.abs(dh)))
        report.h_change_l2.append(float(np.sqrt(bmap.integrate(dh**2))))
        u = fem.solve(system, solver_tol, x0=u)
        h = h_new
        report.energies.append(fem.energy_value(u, system))
        report.h1_norms.append(fem.h1_norm(u))
        report.min_values.append(float(u.values.min()))
        prev, cur = report.energies[-2], report.energies[-1]
        log.debug("outer %d: F=%.16g dF=%.3e", n + 1, cur, prev - cur)
        if abs(prev - cur) <= tol_energy * (1.0 + abs(cur)):
            report.reason = "energy tolerance reached"
            break
    else:
        report.u, report.h, report.reason = u, h, "max_outer exceeded"
        raise AlternatingMinimizationError(
            f"alternating minimization did not converge in {max_outer} steps", report
        )
    report.u, report.h = u, h
    return report


def limit_energy(u: ScalarField, h, params: ProblemParams, f=1.0) -> float:
    """F(u, h) for an arbitrary field and insulation."""
    return fem.energy_value(u, fem.assemble_limit_energy(u.mesh, h, params, f))
