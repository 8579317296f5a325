"""Sharp heat-content bound and its level-set ingredients.

For ``f = 1`` and the optimal couple (u, h),

    int u <= (n |Omega|^(1+2/n) / (n+2) + |Omega|^(2/n) (Per/beta + m))
             / (omega_n^(2/n) n^2),

with equality for a ball carrying uniform insulation. The level-set profile
evaluates the two pointwise inequalities behind it on the superlevel sets of
a P1 field:

    P(t)^2 <= mu(t) (-mu'(t) + I(t))                                (square)
    mu(t) <= (-mu'(t) mu(t)^(2/n) + |Omega|^(2/n) I(t)) / (omega_n^(2/n) n^2)   (master)

where ``I(t) = int_{dOmega, u>t} (1 + beta h)/(beta u)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fem
from .fem import ProblemParams, ScalarField
from .mesh import BODY
from .radial import unit_ball_volume


def isoperimetric_bound(area: float, perimeter: float, params: ProblemParams, n: int | None = None) -> float:
    """Upper bound on the heat content of the optimally insulated body."""
    if not (area > 0 and perimeter > 0):
        raise ValueError("area and perimeter must be positive")
    n = params.dim if n is None else int(n)
    w = unit_ball_volume(n)
    inner = n * area ** (1.0 + 2.0 / n) / (n + 2) + area ** (2.0 / n) * (perimeter / params.beta + params.mass)
    return inner / (w ** (2.0 / n) * n**2)


def dirichlet_bound(area: float, mass: float, n: int = 2) -> float:
    """Bound on ``int v`` for the reinforcement problem ``h dv/dnu + v = 0``."""
    if not (area > 0 and mass > 0):
        raise ValueError("area and mass must be positive")
    w = unit_ball_volume(n)
    return (n * area ** (1.0 + 2.0 / n) / (n + 2) + area ** (2.0 / n) * mass) / (w ** (2.0 / n) * n**2)


# ---------------------------------------------------------------------------
# superlevel sets of P1 fields


def _triangle_superlevel(vals, areas, t):
    """Area of {u > t} inside each triangle (exact for linear u)."""
    s = np.sort(vals, axis=1)
    a, b, c = s[:, 0], s[:, 1], s[:, 2]
    out = np.zeros(len(vals))
    full = t <= a
    out[full] = areas[full]
    upper = (t >= b) & (t < c)
    out[upper] = areas[upper] * (c[upper] - t) ** 2 / ((c[upper] - a[upper]) * (c[upper] - b[upper]))
    lower = (t > a) & (t < b)
    out[lower] = areas[lower] * (1.0 - (t - a[lower]) ** 2 / ((b[lower] - a[lower]) * (c[lower] - a[lower])))
    return out


def _level_segments(points, vals, t):
    """Segments of {u = t} in each triangle crossed by the level ``t``."""
    above = vals > t
    mixed = above.any(axis=1) & ~above.all(axis=1)
    p, v, ab = points[mixed], vals[mixed], above[mixed]
    ends = []
    for i, j in ((0, 1), (1, 2), (2, 0)):
        cross = ab[:, i] != ab[:, j]
        s = np.where(cross, (t - v[:, i]) / np.where(cross, v[:, j] - v[:, i], 1.0), np.nan)
        ends.append(p[:, i] + s[:, None] * (p[:, j] - p[:, i]))
    ends = np.stack(ends, axis=1)  # (k, 3, 2), exactly two finite rows per triangle
    ok = np.isfinite(ends[:, :, 0])
    pairs = ends[ok].reshape(-1, 2, 2)
    return pairs, mixed


@dataclass(frozen=True, eq=False)
class LevelSetProfile:
    t: np.ndarray
    mu: np.ndarray
    per: np.ndarray
    interior_per: np.ndarray
    boundary_per: np.ndarray
    dmu: np.ndarray
    boundary_integral: np.ndarray
    flux: np.ndarray
    lhs_psquare: np.ndarray
    rhs_psquare: np.ndarray
    lhs_master: np.ndarray
    rhs_master: np.ndarray
    area: float
    perimeter: float

    @property
    def psquare_violation(self) -> np.ndarray:
        """Relative excess ``(lhs - rhs)/lhs`` of the squared-perimeter inequality."""
        return _rel_excess(self.lhs_psquare, self.rhs_psquare)

    @property
    def master_violation(self) -> np.ndarray:
        return _rel_excess(self.lhs_master, self.rhs_master)

    @property
    def worst_violation(self) -> float:
        return float(max(self.psquare_violation.max(initial=0.0), self.master_violation.max(initial=0.0)))

    @property
    def flux_defect(self) -> np.ndarray:
        """Relative defect of ``mu(t) = int_{u=t} |Du| + int beta u/(1+beta h)``."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.mu > 0, (self.flux - self.mu) / self.mu, 0.0)

    def rows(self):
        keys = ("t", "mu", "per", "lhs_psquare", "rhs_psquare", "lhs_master", "rhs_master")
        return [dict(zip(keys, vals)) for vals in zip(*(getattr(self, k) for k in keys))]


def _rel_excess(lhs, rhs):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(lhs > 0, (lhs - rhs) / lhs, 0.0)


def level_set_diagnostic(
    u: ScalarField,
    h,
    params: ProblemParams,
    n_levels: int = 64,
    thresholds=None,
    derivative: str = "coarea",
) -> LevelSetProfile:
    """Evaluate both level-set inequalities at ``n_levels`` uniform thresholds in (0, max u).

    ``mu`` and the interior perimeter come from exact clipping of the P1
    field (marching triangles). ``-mu'`` is the exact coarea integral
    ``int_{u=t} 1/|grad u|`` by default; ``derivative="central"`` uses
    central differences of the sampled ``mu`` instead.
    """
    mesh = u.mesh
    if mesh.has_layer:
        raise ValueError("level sets are taken on the body mesh")
    vals = u.values
    if not np.all(np.isfinite(vals)):
        raise ValueError("field is not finite")
    if vals.min() < -1e-8 * np.abs(vals).max() or vals.max() <= 0:
        raise ValueError("field must be non-negative and not identically zero")
    bmap = mesh.boundary
    hv = fem.insulation_values(h, bmap)
    n = params.dim
    beta = params.beta
    umax = float(vals.max())
    if thresholds is None:
        t = umax * np.arange(1, n_levels + 1) / (n_levels + 1)
    else:
        t = np.asarray(thresholds, dtype=float)

    body = mesh.tags == BODY
    tri = mesh.triangles[body]
    areas = mesh.areas[body]
    tv = vals[tri]
    tp = mesh.vertices[tri]
    grads = fem._gradients(mesh)[body]
    gnorm = np.einsum("tij,ti->tj", grads, tv)
    gnorm = np.linalg.norm(gnorm, axis=1)

    ub = vals[bmap.node_ids]
    e0, e1 = bmap.edges[:, 0], bmap.edges[:, 1]
    L = bmap.edge_lengths
    area = float(areas.sum())
    perimeter = bmap.perimeter

    mu = np.empty(len(t))
    interior = np.empty(len(t))
    bper = np.empty(len(t))
    coarea = np.empty(len(t))
    integral = np.empty(len(t))
    flux = np.empty(len(t))
    for k, tk in enumerate(t):
        mu[k] = _triangle_superlevel(tv, areas, tk).sum()
        pairs, mixed = _level_segments(tp, tv, tk)
        seg = np.linalg.norm(pairs[:, 1] - pairs[:, 0], axis=1)
        interior[k] = seg.sum()
        g = gnorm[mixed]
        coarea[k] = np.sum(seg / np.where(g > 0, g, np.inf))
        flux_int = np.sum(seg * g)
        # boundary part: sub-segments of dOmega where u > t, trapezoid on each
        ua, ubb = ub[e0], ub[e1]
        ha, hb = hv[e0], hv[e1]
        on_a, on_b = ua > tk, ubb > tk
        frac = np.where(on_a == on_b, on_a.astype(float), 0.0)
        s = np.where(on_a != on_b, (tk - ua) / np.where(on_a != on_b, ubb - ua, 1.0), 0.0)
        h_cross = ha + s * (hb - ha)
        part = on_a != on_b
        frac[part] = np.where(on_a[part], s[part], 1.0 - s[part])
        seg_len = L * frac

        def weight(uu, hh):
            return (1.0 + beta * hh) / (beta * uu)

        def flux_weight(uu, hh):
            return beta * uu / (1.0 + beta * hh)

        both = on_a & on_b
        ib = np.zeros(len(L))
        fb = np.zeros(len(L))
        ib[both] = 0.5 * (weight(ua[both], ha[both]) + weight(ubb[both], hb[both]))
        fb[both] = 0.5 * (flux_weight(ua[both], ha[both]) + flux_weight(ubb[both], hb[both]))
        u_hi = np.where(on_a, ua, ubb)
        h_hi = np.where(on_a, ha, hb)
        ib[part] = 0.5 * (weight(u_hi[part], h_hi[part]) + weight(tk, h_cross[part]))
        fb[part] = 0.5 * (flux_weight(u_hi[part], h_hi[part]) + flux_weight(tk, h_cross[part]))
        bper[k] = seg_len.sum()
        integral[k] = np.sum(seg_len * ib)
        flux[k] = flux_int + np.sum(seg_len * fb)

    if derivative == "coarea":
        dmu = -coarea
    elif derivative == "central":
        dmu = np.gradient(mu, t) if len(t) > 1 else np.zeros(1)
    else:
        raise ValueError("derivative must be 'coarea' or 'central'")
    per = interior + bper
    w = unit_ball_volume(n)
    lhs_sq = per**2
    rhs_sq = mu * (-dmu + integral)
    lhs_master = mu
    rhs_master = (-dmu * mu ** (2.0 / n) + area ** (2.0 / n) * integral) / (w ** (2.0 / n) * n**2)
    return LevelSetProfile(
        t, mu, per, interior, bper, dmu, integral, flux, lhs_sq, rhs_sq, lhs_master, rhs_master, area, perimeter
    )


# ---------------------------------------------------------------------------
# beta -> infinity


@dataclass
class DirichletLimitReport:
    betas: list
    gaps: list
    orders: list
    heat_contents: list
    dirichlet_heat_content: float
    dirichlet_bound: float
    v: ScalarField | None = None

    @property
    def monotone(self) -> bool:
        return all(b < a for a, b in zip(self.gaps, self.gaps[1:]))

    def rows(self):
        return [
            {"beta": b, "l2_gap": g, "heat_content": q, "order": o}
            for b, g, q, o in zip(self.betas, self.gaps, self.heat_contents, [""] + list(self.orders))
        ]


def dirichlet_limit_check(mesh, h, f=1.0, beta_schedule=(1.0, 10.0, 100.0), tol: float = 1e-10) -> DirichletLimitReport:
    """Compare limit solutions for growing beta with the ``h dv/dnu + v = 0`` solution.

    The reference problem uses the Robin weight ``1/h``, so every node of
    dOmega needs ``h > 0``.
    """
    bmap = mesh.boundary
    hv = fem.insulation_values(h, bmap)
    if np.any(hv <= 0):
        raise ValueError("Dirichlet limit requires h > 0")
    betas = [float(b) for b in beta_schedule]
    if any(b <= 0 for b in betas) or any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
        raise ValueError("beta_schedule must be positive and increasing")
    v = fem.solve(fem.assemble_robin(mesh, 1.0 / hv, f), tol)
    mass = bmap.integrate(hv)
    gaps, contents = [], []
    for b in betas:
        u, _ = fem.solve_limit(mesh, hv, ProblemParams(b, mass), f, tol)
        gaps.append(fem.l2_norm(ScalarField(mesh, u.values - v.values)))
        contents.append(fem.heat_content(u))
    orders = [
        float(np.log(g1 / g2) / np.log(b2 / b1)) for (b1, g1), (b2, g2) in zip(zip(betas, gaps), zip(betas[1:], gaps[1:]))
    ]
    return DirichletLimitReport(
        betas, gaps, orders, contents, fem.heat_content(v), dirichlet_bound(mesh.area, mass), v
    )
