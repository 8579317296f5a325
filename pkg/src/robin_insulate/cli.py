"""Command line driver.

    robin-insulate run CONFIG [--output-dir DIR]
    robin-insulate oracle --R 1 --n 2 --beta 1 --h 1 [--eps 0.1]

Exit codes: 0 success, 2 bad configuration or arguments, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import datetime
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, fem
from . import io as rio
from .bounds import dirichlet_limit_check, isoperimetric_bound, level_set_diagnostic
from .config import ConfigError, ExperimentConfig, load_config
from .fem import ConvergenceError, ProblemParams
from .gamma import gamma_sweep
from .insulation import AlternatingMinimizationError, BoundaryTrace, alternating_minimize, robin_value_check
from .mesh import MeshError, extrude_layer, make_disk_mesh, make_polygon_mesh
from .radial import layer_ball_solution, limit_ball_solution, unit_ball_volume

NUMERICAL_ERRORS = (ConvergenceError, AlternatingMinimizationError, MeshError, ArithmeticError)


def build_mesh(cfg: ExperimentConfig):
    geo = cfg.sections["geometry"]
    if "disk_radius" in geo:
        return make_disk_mesh(float(geo["disk_radius"]), int(cfg.get("geometry", "refinement_level")))
    if "polygon" in geo:
        return make_polygon_mesh(np.asarray(geo["polygon"], dtype=float), float(geo["edge_length"]))
    return rio.read_mesh(cfg.path(geo["mesh_file"]))


def build_source(cfg: ExperimentConfig, mesh):
    src_file = cfg.get("params", "source_file")
    if src_file is None:
        return fem.SourceField(float(cfg.get("params", "source")))
    values = np.loadtxt(cfg.path(src_file), dtype=float, ndmin=1)
    if values.shape != (mesh.n_vertices,):
        raise ConfigError(f"[params] source_file: needs {mesh.n_vertices} values, found {values.size}")
    return fem.SourceField(values)


def _oracle_results(R, n, beta, h, eps=None):
    lim = limit_ball_solution(R, n, beta, h)
    per = n * unit_ball_volume(n) * R ** (n - 1)
    area = unit_ball_volume(n) * R**n
    out = {
        "boundary_value": lim.boundary_value,
        "heat_content": lim.heat_content,
        "energy": lim.energy,
        "center_value": float(lim(0.0)),
        "area": area,
        "perimeter": per,
        "mass": h * per,
    }
    if h > 0:
        out["bound"] = isoperimetric_bound(area, per, ProblemParams(beta, h * per, n))
    if eps is not None:
        lay = layer_ball_solution(R, n, beta, h, eps)
        out["layer"] = {
            "eps": eps,
            "boundary_value": lay.boundary_value,
            "outer_value": lay.outer_value,
            "heat_content": lay.heat_content,
            "energy": lay.energy,
            "energy_gap": lay.energy - lim.energy,
        }
    return out


def _write_common(cfg, out: Path, mesh, u=None, h=None):
    if cfg.get("output", "dump_mesh"):
        rio.write_mesh(mesh if u is None else u.mesh, out / "mesh.txt")
    if cfg.get("output", "write_fields"):
        if u is not None:
            rio.write_field_csv(u, out / "field.csv")
        if h is not None:
            rio.write_insulation_csv(h, out / "insulation.csv")


def run_experiment(cfg: ExperimentConfig, out: Path) -> dict:
    """Run one experiment, write its CSV artifacts, return the summary scalars."""
    exp = cfg.experiment
    tol = float(cfg.get("solver", "tol"))
    if exp == "oracle":
        o = cfg.sections.get("oracle", {})
        get = lambda k: o.get(k, cfg.get("oracle", k))  # noqa: E731
        return _oracle_results(float(get("R")), int(get("n")), float(get("beta")), float(get("h")), get("eps"))

    mesh = build_mesh(cfg)
    f = build_source(cfg, mesh)
    beta = float(cfg.get("params", "beta"))
    h_const = float(cfg.get("params", "insulation"))
    res = {"n_vertices": mesh.n_vertices, "n_triangles": mesh.n_triangles, "area": mesh.area, "perimeter": mesh.perimeter}

    if exp in ("solve_limit", "solve_layer", "gamma_sweep", "dirichlet_limit"):
        from .insulation import InsulationDistribution

        h = InsulationDistribution(mesh.boundary, h_const)
        mass = h.mass
        params = ProblemParams(beta, mass if mass > 0 else 1.0)
        res["insulation"] = h_const
        res["mass"] = mass

    if exp == "solve_limit":
        system = fem.assemble_limit_energy(mesh, h, params, f)
        u = fem.solve(system, tol, cfg.get("solver", "max_iter"))
        tr = u.trace()
        res.update(
            energy=fem.energy_value(u, system),
            heat_content=fem.heat_content(u),
            boundary_min=float(tr.min()),
            boundary_max=float(tr.max()),
            cg_iterations=u.iterations,
        )
        if mass > 0:
            res["bound"] = isoperimetric_bound(mesh.area, mesh.perimeter, params)
        _write_common(cfg, out, mesh, u, h)
    elif exp == "solve_layer":
        eps = float(cfg.get("solve_layer", "eps"))
        mesh_eps = extrude_layer(mesh, h, eps, cfg.get("solve_layer", "n_layers"))
        system = fem.assemble_layer_energy(mesh_eps, eps, params, f)
        u = fem.solve(system, tol, cfg.get("solver", "max_iter"))
        res.update(
            eps=eps,
            energy=fem.energy_value(u, system),
            heat_content=fem.heat_content(u),
            layer_area=mesh_eps.region_area(1),
            boundary_mean=float(u.trace().mean()),
            cg_iterations=u.iterations,
        )
        _write_common(cfg, out, mesh, u, h)
    elif exp == "gamma_sweep":
        sweep = gamma_sweep(mesh, h, params, cfg.get("gamma_sweep", "eps"), f, tol)
        rio.write_dict_rows(sweep.rows(), out / "gamma_sweep.csv")
        res.update(
            limit_energy=sweep.limit_energy,
            gaps=sweep.gaps.tolist(),
            order=sweep.order(),
            recovery_defects=sweep.recovery_defects.tolist(),
            gaps_decreasing=bool(np.all(np.diff(sweep.gaps) < 0)),
        )
    elif exp in ("optimize", "bound_check"):
        params = ProblemParams(beta, float(cfg.get("params", "mass")))
        rep = alternating_minimize(
            mesh, params, f, float(cfg.get(exp, "tol_energy")), int(cfg.get(exp, "max_outer"))
        )
        rio.write_dict_rows(rep.trace_rows(), out / "energy_trace.csv")
        trace = BoundaryTrace(mesh.boundary, rep.u.trace(mesh.boundary))
        q = fem.heat_content(rep.u)
        bound = isoperimetric_bound(mesh.area, mesh.perimeter, params)
        res.update(
            iterations=rep.iterations,
            termination=rep.reason,
            energy=rep.energy,
            heat_content=q,
            c=rep.c,
            bound=bound,
            ratio=q / bound,
            h_min=float(rep.h.values.min()),
            h_max=float(rep.h.values.max()),
            h_uniformity=float(np.max(np.abs(rep.h.values - params.mass / mesh.perimeter))),
            robin_deviation=robin_value_check(rep.h, trace, rep.c, params).deviation,
            mass=rep.h.mass,
        )
        rio.write_json(
            {k: res[k] for k in ("iterations", "energy", "heat_content", "c", "termination")},
            out / "alternating.json",
        )
        _write_common(cfg, out, mesh, rep.u, rep.h)
        if exp == "bound_check":
            prof = level_set_diagnostic(rep.u, rep.h, params, int(cfg.get("bound_check", "n_levels")))
            rio.write_profile_csv(prof, out / "level_sets.csv")
            res.update(
                bound_holds=bool(q <= bound * (1 + 1e-6)),
                psquare_worst_violation=float(prof.psquare_violation.max()),
                master_worst_violation=float(prof.master_violation.max()),
                flux_defect_max=float(np.abs(prof.flux_defect).max()),
            )
    elif exp == "dirichlet_limit":
        rep = dirichlet_limit_check(mesh, h, f, cfg.get("dirichlet_limit", "betas"), tol)
        rio.write_dict_rows(rep.rows(), out / "dirichlet_limit.csv")
        res.update(
            l2_gaps=rep.gaps,
            orders=rep.orders,
            monotone=rep.monotone,
            dirichlet_heat_content=rep.dirichlet_heat_content,
            dirichlet_bound=rep.dirichlet_bound,
        )
    return res


def _finite(obj):
    """Replace non-finite floats so the summary stays valid JSON."""
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        out = Path(args.output_dir) if args.output_dir else cfg.path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        results = run_experiment(cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    summary = {
        "version": __version__,
        "inputs": cfg.echo(),
        "results": _finite(results),
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    rio.write_json(summary, out / "summary.json")
    print(json.dumps(_finite(results), indent=2, sort_keys=True, default=rio._json_default))
    return 0


def cmd_oracle(args) -> int:
    try:
        for name in ("R", "beta"):
            if not getattr(args, name) > 0:
                raise ValueError(f"--{name} must be positive")
        if args.n < 2:
            raise ValueError("--n must be at least 2")
        if args.h < 0 or (args.eps is not None and not args.eps > 0):
            raise ValueError("--h must be non-negative and --eps positive")
        if args.eps is not None and args.h == 0:
            raise ValueError("--h must be positive when --eps is given")
        res = _oracle_results(args.R, args.n, args.beta, args.h, args.eps)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(res, indent=2, sort_keys=True))
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robin-insulate", description=__doc__.splitlines()[0] if __doc__ else None)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment described by a TOML config")
    run.add_argument("config")
    run.add_argument("--output-dir", default=None)
    run.set_defaults(func=cmd_run)
    orc = sub.add_parser("oracle", help="closed-form ball solution")
    orc.add_argument("--R", type=float, required=True)
    orc.add_argument("--n", type=int, required=True)
    orc.add_argument("--beta", type=float, required=True)
    orc.add_argument("--h", type=float, required=True)
    orc.add_argument("--eps", type=float, default=None)
    orc.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
