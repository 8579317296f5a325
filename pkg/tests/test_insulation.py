import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from oracles import brute_force_boundary_minimum
from robin_insulate import fem
from robin_insulate.fem import ProblemParams
from robin_insulate.insulation import (
    AlternatingMinimizationError,
    BoundaryTrace,
    InsulationDistribution,
    alternating_minimize,
    boundary_term,
    g1,
    limit_energy,
    optimal_h,
    robin_value_check,
    threshold_constant,
)
from robin_insulate.mesh import BoundaryMap, TriangleMesh, make_disk_mesh


def circle_map(k=100):
    theta = 2 * np.pi * np.arange(k) / k
    pts = np.column_stack([np.cos(theta), np.sin(theta)])
    return BoundaryMap.from_loop(pts, edge_lengths=np.full(k, 2 * np.pi / k))


def linear_g1_by_sampling(trace, c, samples=4001):
    """int (|v| - c)_+ with |v| linear on edges, by dense composite Simpson sampling."""
    b = trace.boundary
    s = np.linspace(0, 1, samples)
    total = 0.0
    for (i, j), L in zip(b.edges, b.edge_lengths):
        a = (1 - s) * abs(trace.values[i]) + s * abs(trace.values[j])
        y = np.maximum(a - c, 0.0)
        total += L * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum()) / (3 * (samples - 1))
    return total


@pytest.mark.parametrize("quadrature", ["nodal", "linear"])
def test_constant_trace_threshold(quadrature):
    b = circle_map()
    tr = BoundaryTrace(b, np.ones(b.n_nodes))
    fp = threshold_constant(tr, ProblemParams(1.0, 2 * np.pi), quadrature)
    assert abs(fp.c - 0.5) < 1e-12
    assert fp.active_set_measure == pytest.approx(2 * np.pi, rel=1e-14)
    for a, m, beta in [(2.0, 1.0, 1.0), (0.3, 5.0, 2.0), (1.0, 0.1, 10.0)]:
        tr = BoundaryTrace(b, np.full(b.n_nodes, a))
        c = threshold_constant(tr, ProblemParams(beta, m), quadrature).c
        P = b.perimeter
        assert c == pytest.approx(a * P / (P + m * beta), rel=1e-13)


def test_zero_trace_threshold():
    b = circle_map()
    fp = threshold_constant(BoundaryTrace(b, np.zeros(b.n_nodes)), ProblemParams(1.0, 1.0))
    assert fp.c == 0.0
    with pytest.raises(ValueError, match="zero trace"):
        optimal_h(BoundaryTrace(b, np.zeros(b.n_nodes)), ProblemParams(1.0, 1.0))


def test_sign_of_trace_is_irrelevant(rng):
    b = circle_map(40)
    v = rng.standard_normal(b.n_nodes)
    p = ProblemParams(1.3, 0.7)
    assert threshold_constant(BoundaryTrace(b, v), p).c == threshold_constant(BoundaryTrace(b, np.abs(v)), p).c


@settings(max_examples=60, deadline=None)
@given(
    values=st.lists(st.floats(-3, 3, allow_nan=False), min_size=3, max_size=30),
    beta=st.floats(0.1, 10),
    mass=st.floats(0.01, 10),
)
def test_threshold_matches_brentq_nodal(values, beta, mass):
    v = np.array(values)
    if not np.any(np.abs(v) > 1e-6):
        return
    theta = 2 * np.pi * np.arange(len(v)) / len(v)
    b = BoundaryMap.from_loop(np.column_stack([np.cos(theta), np.sin(theta)]))
    w = b.node_weights
    a = np.abs(v)
    ref = brentq(lambda c: np.dot(w, np.maximum(a - c, 0)) - mass * beta * c, 0, a.max(), xtol=1e-15)
    fp = threshold_constant(BoundaryTrace(b, v), ProblemParams(beta, mass))
    assert fp.c == pytest.approx(ref, rel=1e-10, abs=1e-14)
    assert 0 < fp.c < a.max()
    assert fp.residual <= 1e-12 * fp.scale


def test_linear_g1_against_sampling(rng):
    b = circle_map(12)
    tr = BoundaryTrace(b, rng.random(b.n_nodes) * 2 - 0.5)
    for c in (0.0, 0.1, 0.4, 0.9, 1.4):
        assert g1(tr, c, "linear") == pytest.approx(linear_g1_by_sampling(tr, c), rel=1e-7, abs=1e-12)


def test_linear_threshold_matches_brentq(rng):
    b = circle_map(12)
    for _ in range(20):
        tr = BoundaryTrace(b, rng.random(b.n_nodes))
        p = ProblemParams(1.0 + rng.random(), 0.5 + rng.random())
        ref = brentq(lambda c: g1(tr, c, "linear") - p.mass * p.beta * c, 0, 1, xtol=1e-15)
        fp = threshold_constant(tr, p, "linear")
        assert fp.c == pytest.approx(ref, rel=1e-10)
        assert fp.residual <= 1e-12 * fp.scale


def test_g1_monotone(rng):
    b = circle_map(30)
    tr = BoundaryTrace(b, rng.random(b.n_nodes))
    cs = np.linspace(0, 1.1, 50)
    for q in ("nodal", "linear"):
        vals = np.array([g1(tr, c, q) for c in cs])
        assert np.all(np.diff(vals) <= 1e-15)
    with pytest.raises(ValueError):
        g1(tr, 0.1, "simpson")


def test_optimal_h_structure(rng):
    b = circle_map(60)
    p = ProblemParams(2.0, 0.5)
    v = 1.0 + np.sin(3 * np.linspace(0, 2 * np.pi, b.n_nodes, endpoint=False)) + 0.1 * rng.random(b.n_nodes)
    tr = BoundaryTrace(b, v)
    h = optimal_h(tr, p)
    assert h.mass == pytest.approx(p.mass, rel=1e-12)
    assert np.all(h.values >= 0)
    assert np.array_equal(h.values > 0, np.abs(v) > h.threshold)
    chk = robin_value_check(h, tr, h.threshold, p)
    assert chk.deviation <= 1e-12 and chk.n_active == int((h.values > 0).sum())
    assert 0 < chk.n_active < b.n_nodes


def test_robin_check_detects_perturbation(rng):
    b = circle_map(60)
    p = ProblemParams(1.0, 1.0)
    tr = BoundaryTrace(b, 1 + rng.random(b.n_nodes))
    h = optimal_h(tr, p)
    bad = h.values.copy()
    bad[np.argmax(bad)] *= 1.1
    assert robin_value_check(bad, tr, h.threshold, p).deviation > 1e-6
    zero = np.zeros(b.n_nodes)
    low = BoundaryTrace(b, np.full(b.n_nodes, 0.2))
    assert robin_value_check(zero, low, 0.5, p).deviation == 0.0


def test_optimal_h_matches_brute_force(rng):
    b = circle_map(16)
    for _ in range(5):
        p = ProblemParams(0.5 + 2 * rng.random(), 0.2 + rng.random())
        tr = BoundaryTrace(b, rng.random(b.n_nodes) + 0.05)
        h = optimal_h(tr, p)
        ref, _ = brute_force_boundary_minimum(np.abs(tr.values), b.node_weights, p.mass, p.beta)
        assert boundary_term(tr, h, p) == pytest.approx(ref, rel=1e-7)
        assert boundary_term(tr, h, p) <= ref + 1e-12


def test_linear_quadrature_renormalizes(rng):
    b = circle_map(30)
    p = ProblemParams(1.0, 1.0)
    tr = BoundaryTrace(b, rng.random(b.n_nodes) + 0.5)
    h = optimal_h(tr, p, "linear")
    assert h.mass == pytest.approx(p.mass, rel=1e-12)
    assert h.renormalization > 0
    assert boundary_term(tr, h, p) >= boundary_term(tr, optimal_h(tr, p), p) - 1e-14


def test_distribution_constructors(disk3, rng):
    b = disk3.boundary
    u = InsulationDistribution.uniform(b, 3.0)
    assert u.mass == pytest.approx(3.0, rel=1e-14)
    r = InsulationDistribution.random(b, 3.0, rng, sparsity=0.5)
    assert r.mass == pytest.approx(3.0, rel=1e-13) and np.any(r.values == 0)
    r.check_mass(3.0)
    with pytest.raises(ValueError):
        r.check_mass(3.1)
    with pytest.raises(ValueError, match="negative insulation"):
        InsulationDistribution(b, -np.ones(b.n_nodes))
    with pytest.raises(ValueError):
        BoundaryTrace(b, np.ones(b.n_nodes + 1))


# ---------------------------------------------------------------------------
# alternating minimization


def test_alternating_on_disk(disk3):
    p = ProblemParams(1.0, 2 * math.pi)
    rep = alternating_minimize(disk3, p)
    steps = np.array(rep.descent_steps())
    assert np.all(np.diff(steps) <= 1e-12 * (1 + np.abs(steps[1:])))
    assert rep.h.mass == pytest.approx(p.mass, rel=1e-12)
    assert np.ptp(rep.h.values) < 2e-3
    assert max(rep.h1_norms) <= 10 * rep.h1_norms[0]
    assert min(rep.min_values) >= -1e-8 * np.abs(rep.u.values).max()
    assert rep.reason == "energy tolerance reached"
    assert rep.energy == pytest.approx(limit_energy(rep.u, rep.h, p), rel=1e-12)
    rows = rep.trace_rows()
    assert len(rows) == rep.iterations + 1 and rows[0]["iteration"] == 0


def test_alternating_is_stationary(square):
    p = ProblemParams(1.0, 1.0)
    rep = alternating_minimize(square, p)
    tr = BoundaryTrace(square.boundary, rep.u.trace())
    h_next = optimal_h(tr, p)
    # energy stalls quadratically before h does
    assert rep.h_change_l1[-1] < 1e-4
    assert np.max(np.abs(h_next.values - rep.h.values)) < 1e-3
    # the final couple beats random feasible couples
    rng = np.random.default_rng(3)
    for _ in range(10):
        h = InsulationDistribution.random(square.boundary, p.mass, rng)
        u, s = fem.solve_limit(square, h, p)
        assert fem.energy_value(u, s) >= rep.energy - 1e-10


def test_alternating_errors(disk3):
    p = ProblemParams(1.0, 1.0)
    with pytest.raises(AlternatingMinimizationError) as exc:
        alternating_minimize(make_disk_mesh(1.0, 2), ProblemParams(1.0, 1.0), tol_energy=1e-300, max_outer=1)
    assert exc.value.report.reason == "max_outer exceeded"
    assert exc.value.report.u is not None
    with pytest.raises(ValueError):
        alternating_minimize(disk3, p, f=0.0)


def test_disconnected_domain_warns():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    v = np.vstack([sq, sq + [3, 0]])
    t = np.array([[0, 1, 2], [0, 2, 3], [4, 5, 6], [4, 6, 7]])
    mesh = TriangleMesh.from_arrays(v, t)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        rep = alternating_minimize(mesh, ProblemParams(1.0, 1.0), max_outer=50)
    assert any("disconnected" in str(x.message) for x in w)
    assert rep.h.mass == pytest.approx(1.0, rel=1e-12)
