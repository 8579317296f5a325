"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they
are also repeated in the terminal summary.
"""

import math
import time

import numpy as np

from robin_insulate import fem
from robin_insulate.bounds import dirichlet_limit_check, isoperimetric_bound, level_set_diagnostic
from robin_insulate.fem import ProblemParams, ScalarField
from robin_insulate.gamma import fitted_order, gamma_sweep
from robin_insulate.insulation import (
    BoundaryTrace,
    InsulationDistribution,
    alternating_minimize,
    boundary_term,
    limit_energy,
    optimal_h,
    robin_value_check,
    threshold_constant,
)
from robin_insulate.mesh import (
    BoundaryMap,
    ellipse_polygon,
    l_shape_polygon,
    make_disk_mesh,
    make_polygon_mesh,
    unit_square_polygon,
)
from robin_insulate.radial import dirichlet_ball_solution, layer_ball_solution, limit_ball_solution

EPS_SCHEDULE = [0.1, 0.05, 0.025, 0.0125]


def _descent_ok(report):
    steps = np.array(report.descent_steps())
    return bool(np.all(np.diff(steps) <= 1e-12 * (1 + np.abs(steps[1:]))))


def test_criterion_1_radial_oracle(report_criterion):
    t0 = time.perf_counter()
    params = ProblemParams(1.0, 2 * math.pi)
    oracle = limit_ball_solution(1.0, 2, 1.0, 1.0)
    mesh = make_disk_mesh(1.0, 4)
    u, _ = fem.solve_limit(mesh, 1.0, params)
    bv_err = float(np.max(np.abs(u.trace() - oracle.boundary_value)) / oracle.boundary_value)
    q_err = abs(fem.heat_content(u) - (math.pi / 8 + math.pi)) / (math.pi / 8 + math.pi)
    elapsed = time.perf_counter() - t0
    sizes, errs = [], []
    for level in (2, 3, 4, 5):
        m = make_disk_mesh(1.0, level)
        v, _ = fem.solve_limit(m, 1.0, params)
        sizes.append(m.max_edge_length)
        errs.append(abs(fem.heat_content(v) - oracle.heat_content))
    order = fitted_order(sizes, errs)
    ok = bv_err <= 2e-3 and q_err <= 2e-3 and order >= 1.8 and elapsed < 10
    report_criterion(
        1, ok, f"boundary rel err {bv_err:.2e}, heat content rel err {q_err:.2e} (<=2e-3), order {order:.3f} (>=1.8), {elapsed:.2f}s"
    )
    assert ok


def test_criterion_2_gamma_convergence(report_criterion):
    t0 = time.perf_counter()
    params = ProblemParams(1.0, 2 * math.pi)
    mesh = make_disk_mesh(1.0, 5)
    sweep = gamma_sweep(mesh, 1.0, params, EPS_SCHEDULE, recovery=False)
    lim = limit_ball_solution(1.0, 2, 1.0, 1.0)
    exact = np.array([layer_ball_solution(1.0, 2, 1.0, 1.0, e).energy - lim.energy for e in EPS_SCHEDULE])
    disc = float(np.max(np.abs(sweep.gaps - exact)))
    monotone = bool(np.all(np.diff(sweep.gaps) < 0))
    order = sweep.order()
    elapsed = time.perf_counter() - t0
    ok = monotone and abs(order - 1) <= 0.3 and disc <= 0.1 * exact.min() and elapsed < 120
    report_criterion(
        2,
        ok,
        f"gaps {np.array2string(sweep.gaps, precision=5)} monotone={monotone}, order {order:.3f} (1+-0.3), "
        f"discretization err {disc:.2e} <= {0.1 * exact.min():.2e}, {elapsed:.1f}s",
    )
    assert ok


def test_criterion_3_recovery_sequence(report_criterion):
    params = ProblemParams(1.0, 2 * math.pi)
    mesh = make_disk_mesh(1.0, 4)
    sweep = gamma_sweep(mesh, 1.0, params, EPS_SCHEDULE)
    delta = np.maximum(sweep.recovery_defects, 0.0)
    decreasing = bool(np.all(np.diff(delta) < 0))
    order = fitted_order(EPS_SCHEDULE, delta)
    ok = decreasing and delta[-1] < 0.25 * delta[0] and order > 0.5
    report_criterion(
        3, ok, f"delta(eps) {np.array2string(delta, precision=5)} decreasing={decreasing}, fitted order {order:.3f}"
    )
    assert ok


def test_criterion_4_fixed_point(report_criterion):
    k = 100
    theta = 2 * np.pi * np.arange(k) / k
    circle = BoundaryMap.from_loop(np.column_stack([np.cos(theta), np.sin(theta)]), edge_lengths=np.full(k, 2 * np.pi / k))
    params = ProblemParams(1.0, 2 * math.pi)
    c_err = max(
        abs(threshold_constant(BoundaryTrace(circle, np.ones(k)), params, q).c - 0.5) for q in ("nodal", "linear")
    )
    c_zero = threshold_constant(BoundaryTrace(circle, np.zeros(k)), params).c
    rng = np.random.default_rng(2024)
    bmap = make_disk_mesh(1.0, 3).boundary
    worst = 0.0
    for _ in range(1000):
        p = ProblemParams(10 ** rng.uniform(-1, 1), 10 ** rng.uniform(-1, 1))
        v = rng.standard_normal(bmap.n_nodes) * 10 ** rng.uniform(-2, 2)
        for q in ("nodal", "linear"):
            fp = threshold_constant(BoundaryTrace(bmap, v), p, q)
            worst = max(worst, fp.relative_residual)
    ok = c_err <= 1e-12 and c_zero == 0.0 and worst <= 1e-12
    report_criterion(4, ok, f"|c - 1/2| {c_err:.1e}, zero trace c = {c_zero}, worst residual/scale {worst:.1e} over 1000 traces")
    assert ok


def test_criterion_5_optimal_h(report_criterion):
    rng = np.random.default_rng(77)
    bmap = make_disk_mesh(1.0, 3).boundary
    worst_gap = np.inf
    worst_eq = 0.0
    for _ in range(100):
        p = ProblemParams(10 ** rng.uniform(-1, 1), 10 ** rng.uniform(-1, 1))
        # smooth part plus noise, sometimes with sign changes
        s = bmap.arc_positions / bmap.perimeter
        v = 1 + rng.uniform(-1.5, 1.5) * np.sin(2 * np.pi * rng.integers(1, 5) * s) + 0.2 * rng.standard_normal(bmap.n_nodes)
        tr = BoundaryTrace(bmap, v)
        h = optimal_h(tr, p)
        best = boundary_term(tr, h, p)
        chk = robin_value_check(h, tr, h.threshold, p)
        worst_eq = max(worst_eq, chk.active_deviation, chk.inactive_excess)
        for j in range(50):
            comp = InsulationDistribution.random(bmap, p.mass, rng, sparsity=rng.choice([0.0, 0.3]))
            if j % 2:
                # feasible points close to the optimum probe the inequality near equality
                t = 10 ** rng.uniform(-6, 0)
                comp = InsulationDistribution(bmap, (1 - t) * h.values + t * comp.values)
            worst_gap = min(worst_gap, boundary_term(tr, comp, p) - best)
    ok = worst_gap >= -1e-13 and worst_eq <= 1e-9
    report_criterion(
        5, ok, f"min (competitor - optimal) boundary term {worst_gap:.3e} (>=0), equality deviation {worst_eq:.1e} (<=1e-9)"
    )
    assert ok


def test_criterion_6_alternating(report_criterion):
    disk = make_disk_mesh(1.0, 4)
    square = make_polygon_mesh(unit_square_polygon(), 0.05)
    pd = ProblemParams(1.0, 2 * math.pi)
    rep_d = alternating_minimize(disk, pd)
    rep_s = alternating_minimize(square, ProblemParams(1.0, 1.0))
    descent = _descent_ok(rep_d) and _descent_ok(rep_s)
    uniform = float(np.max(np.abs(rep_d.h.values - rep_d.h.values.mean())))
    rng = np.random.default_rng(11)
    energies = []
    for k in range(5):
        h0 = InsulationDistribution.random(disk.boundary, pd.mass, rng, sparsity=0.2 * k)
        rep = alternating_minimize(disk, pd, h0=h0)
        descent = descent and _descent_ok(rep)
        energies.append(rep.energy)
    spread = float(np.ptp(np.append(energies, rep_d.energy)))
    ok = descent and uniform <= 1e-3 and spread <= 1e-6
    report_criterion(
        6, ok, f"monotone half-steps={descent}, disk h sup-deviation {uniform:.2e} (<=1e-3), energy spread over 5 random h0 {spread:.1e} (<=1e-6)"
    )
    assert ok


def test_criterion_7_convexity(report_criterion):
    rng = np.random.default_rng(5)
    mesh = make_disk_mesh(1.0, 3)
    x, y = mesh.vertices.T
    worst = np.inf
    for k in range(100):
        p = ProblemParams(10 ** rng.uniform(-1, 1), 10 ** rng.uniform(-1, 1))
        f = rng.uniform(0, 2)

        def field():
            a = rng.standard_normal(4)
            vals = a[0] + a[1] * x + a[2] * y + a[3] * (x**2 - y**2) + 0.3 * rng.standard_normal(mesh.n_vertices)
            return ScalarField(mesh, vals)

        v1, v2 = field(), field()
        h1 = InsulationDistribution.random(mesh.boundary, p.mass, rng, sparsity=rng.choice([0.0, 0.5]))
        h2 = InsulationDistribution.random(mesh.boundary, p.mass, rng)
        if k % 2:
            # nearby pairs: the convexity gap is tiny and rounding matters
            t = 10 ** rng.uniform(-6, -1)
            v2 = ScalarField(mesh, v1.values + t * (v2.values - v1.values))
            h2 = InsulationDistribution(mesh.boundary, h1.values + t * (h2.values - h1.values))
        mid_v = ScalarField(mesh, 0.5 * (v1.values + v2.values))
        mid_h = 0.5 * (h1.values + h2.values)
        lhs = 0.5 * (limit_energy(v1, h1, p, f) + limit_energy(v2, h2, p, f))
        worst = min(worst, lhs - limit_energy(mid_v, mid_h, p, f))
    ok = worst >= -1e-10
    report_criterion(7, ok, f"min over 100 pairs of mean(F) - F(midpoint) = {worst:.3e} (>= -1e-10)")
    assert ok


def test_criterion_8_sharp_bound(report_criterion):
    value = isoperimetric_bound(math.pi, 2 * math.pi, ProblemParams(1.0, 1.0))
    value_err = abs(value - (math.pi / 8 + math.pi / 2 + 0.25))
    shapes = {
        "disk": make_disk_mesh(1.0, 4),
        "square": make_polygon_mesh(unit_square_polygon(), 0.05),
        "ellipse": make_polygon_mesh(ellipse_polygon(2.0, 1.0, 128), 0.1),
        "L-shape": make_polygon_mesh(l_shape_polygon(), 0.1),
    }
    ratios = {}
    for name, mesh in shapes.items():
        p = ProblemParams(1.0, 1.0)
        rep = alternating_minimize(mesh, p)
        ratios[name] = fem.heat_content(rep.u) / isoperimetric_bound(mesh.area, mesh.perimeter, p)
    disk = shapes["disk"]
    p2 = ProblemParams(1.0, 2 * math.pi)
    rep = alternating_minimize(disk, p2)
    ratios["disk m=2pi"] = fem.heat_content(rep.u) / isoperimetric_bound(disk.area, disk.perimeter, p2)
    ok = value_err <= 1e-12 and all(r <= 1.0 for r in ratios.values()) and min(ratios["disk"], ratios["disk m=2pi"]) >= 0.995
    detail = ", ".join(f"{k} {v:.5f}" for k, v in ratios.items())
    report_criterion(8, ok, f"heat/bound ratios: {detail}; unit-disk bound err {value_err:.1e}")
    assert ok


def test_criterion_9_level_sets(report_criterion):
    cases = {
        "disk m=2pi L4": (make_disk_mesh(1.0, 4), ProblemParams(1.0, 2 * math.pi)),
        "disk m=1 L5": (make_disk_mesh(1.0, 5), ProblemParams(1.0, 1.0)),
        "square m=1": (make_polygon_mesh(unit_square_polygon(), 0.05), ProblemParams(1.0, 1.0)),
    }
    worst = {}
    for name, (mesh, p) in cases.items():
        rep = alternating_minimize(mesh, p)
        prof = level_set_diagnostic(rep.u, rep.h, p, n_levels=64)
        assert len(prof.t) == 64
        worst[name] = prof.worst_violation
    ok = all(w <= 0.02 for w in worst.values())
    detail = ", ".join(f"{k} {v:.2%}" for k, v in worst.items())
    report_criterion(9, ok, f"worst relative violation over 64 thresholds (<=2%): {detail}")
    assert ok


def test_criterion_10_dirichlet_limit(report_criterion):
    mesh = make_disk_mesh(1.0, 4)
    rep = dirichlet_limit_check(mesh, 1.0, beta_schedule=(1.0, 10.0, 100.0))
    ref = dirichlet_ball_solution(1.0, 2, 1.0)
    v_err = float(np.max(np.abs(rep.v.trace() - ref.boundary_value)))
    # closed-form gap: u_beta - v = R/(n beta) on the whole ball
    exact = np.array([math.sqrt(math.pi) / (2 * b) for b in rep.betas])
    gap_err = float(np.max(np.abs(np.array(rep.gaps) - exact) / exact))
    ok = rep.monotone and all(abs(o - 1) <= 0.1 for o in rep.orders) and v_err <= 1e-3 and gap_err <= 1e-2
    report_criterion(
        10,
        ok,
        f"L2 gaps {np.array2string(np.array(rep.gaps), precision=5)}, orders {np.round(rep.orders, 4).tolist()} (1+-0.1), "
        f"v boundary err {v_err:.1e}, gap vs closed form {gap_err:.1e}",
    )
    assert ok
