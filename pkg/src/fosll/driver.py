"""Experiment driver: config parsing, convergence and adaptive runs, reports.

Emitted files (in the output directory):

* convergence.csv: h, dofs, err_sigma, rate_sigma, err_u, rate_u,
  err_combined, rate_combined, eta
* adaptive.csv: iter, elements, dofs, eta, osc, err_combined, slope_running
* dof_error.dat / dof_eta.dat: two-column log-log plot data
* run_summary.json: config echo, backend, wall times, solver statistics

The rate columns are error reduction factors per mesh halving (values near
2 mean first-order convergence); slopes are least-squares fits of
log10(error) against log10(dofs) over the last half of the recorded rows.
CSV and .dat files are byte-deterministic for a fixed config and build;
timing lives only in run_summary.json.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .assembly import assemble_factored, build_dof_map
from .errors import ConfigError, SolverFailureError
from .estimator import dorfler_mark, indicators
from .linalg import solve_spd
from .mesh import bisect_refine, geometry, l_shape_mesh, unit_square_mesh, write_vtk
from .model import BUILTIN_PROBLEMS, manufactured_from_expressions
from .postprocess import l2_errors, recover_fields, reduction_factors

_CONFIG_KEYS = {
    "problem", "mode", "mesh_sizes", "theta", "max_dofs", "max_iterations",
    "initial_n", "solver_rel_tol", "solver_max_iter", "output_dir", "export_vtk",
}


@dataclass
class RunConfig:
    problem: object
    mode: str
    mesh_sizes: list = field(default_factory=list)
    theta: float = 0.5
    max_dofs: int = 20000
    max_iterations: int = 100
    initial_n: int = 4
    solver_rel_tol: float = 1e-10
    solver_max_iter: int | None = None
    output_dir: str | None = None
    export_vtk: bool = False

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(data) - _CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            cfg = cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc))
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}")
        return cls.from_dict(data)

    def validate(self):
        if self.mode not in ("convergence", "adaptive"):
            raise ConfigError(f"mode must be convergence or adaptive, got {self.mode!r}")
        if isinstance(self.problem, str):
            if self.problem not in BUILTIN_PROBLEMS:
                raise ConfigError(f"unknown problem {self.problem!r}; "
                                  f"available: {sorted(BUILTIN_PROBLEMS)}")
        elif isinstance(self.problem, dict):
            if self.problem.get("name") != "manufactured" or "u" not in self.problem:
                raise ConfigError(
                    'inline problems need {"name": "manufactured", "u": "<expr>", ...}')
        else:
            raise ConfigError("problem must be a name or an inline object")
        if self.mode == "convergence":
            ns = self.mesh_sizes
            if not ns or any(int(n) != n or n < 1 for n in ns):
                raise ConfigError("mesh_sizes must be positive integers")
            if any(b <= a for a, b in zip(ns, ns[1:])):
                raise ConfigError("mesh_sizes must be strictly increasing")
        else:
            if not 0.0 < self.theta < 1.0:
                raise ConfigError("theta must lie in (0, 1)")
            if self.max_dofs < 1 or self.max_iterations < 1:
                raise ConfigError("max_dofs and max_iterations must be positive")
        if not 0.0 < self.solver_rel_tol < 1.0:
            raise ConfigError("solver_rel_tol must lie in (0, 1)")
        if self.initial_n < 1:
            raise ConfigError("initial_n must be a positive integer")

    def make_problem(self):
        if isinstance(self.problem, str):
            return BUILTIN_PROBLEMS[self.problem]()
        spec = dict(self.problem)
        spec.pop("name")
        try:
            return manufactured_from_expressions(**spec)
        except TypeError as exc:
            raise ConfigError(f"bad inline problem: {exc}")


@dataclass
class RunReport:
    mode: str
    rows: list
    slope: float
    output_dir: str
    backend: str = _kernels.BACKEND
    final_mesh: object = None

    @property
    def final(self):
        return self.rows[-1] if self.rows else None


# ----------------------------------------------------------------------
# helpers


def _fmt(value, spec="%.6e"):
    if value is None or (isinstance(value, float) and not np.isfinite(value)):
        return ""
    return spec % value


def _fit_slope(dofs, errors):
    dofs = np.asarray(dofs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    ok = np.isfinite(errors) & (errors > 0) & (dofs > 0)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log10(dofs[ok]), np.log10(errors[ok]), 1)[0])


def _write_lines(path, lines):
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _solve_level(mesh, problem, config):
    geo = geometry(mesh)
    dofmap = build_dof_map(mesh)
    system = assemble_factored(mesh, dofmap, problem, geo=geo)
    t0 = time.perf_counter()
    x, report = solve_spd(system.matrix, system.rhs,
                          rel_tol=config.solver_rel_tol,
                          max_iter=config.solver_max_iter)
    wall = time.perf_counter() - t0
    solution = recover_fields(mesh, dofmap, problem, x, geo=geo)
    return dofmap, system, x, report, solution, wall


def _export_vtk(out_dir, tag, mesh, solution, ind):
    centroids = mesh.vertices[mesh.triangles].mean(axis=1)[:, None, :]
    u_mid = solution.u_at(np.arange(mesh.n_triangles), centroids)[:, 0]
    write_vtk(mesh, Path(out_dir) / f"mesh_{tag}.vtk",
              cell_data={"u_h": u_mid, "eta_K": ind.eta_K if ind is not None
                         else np.zeros(mesh.n_triangles)})


# ----------------------------------------------------------------------
# runs


def run_convergence(config: RunConfig, out_dir=None) -> RunReport:
    """Uniform-refinement study with error rates on a sequence of meshes."""
    out_dir = Path(out_dir or config.output_dir or "fosll_out")
    out_dir.mkdir(parents=True, exist_ok=True)
    problem, exact = config.make_problem()
    rows = []
    failed = False

    for n in config.mesh_sizes:
        if problem.name == "lshape":
            # mesh_sizes counts uniform bisection rounds on the coarse L-mesh
            mesh = l_shape_mesh()
            for _ in range(int(n)):
                mesh = bisect_refine(mesh, range(mesh.n_triangles))
            h = float(geometry(mesh).h_T.max())
        else:
            mesh = unit_square_mesh(int(n))
            h = 1.0 / float(n)
        dofmap, system, x, sreport, solution, wall = _solve_level(mesh, problem, config)
        if not sreport.converged:
            rows.append({"h": h, "dofs": dofmap.n_free, "err_sigma": float("nan"),
                         "err_u": float("nan"), "err_combined": float("nan"),
                         "eta": float("nan"), "wall": wall,
                         "solver_iterations": sreport.iterations})
            failed = True
            break
        ind = indicators(solution)
        err = l2_errors(solution, exact, h=h)
        rows.append({"h": h, "dofs": dofmap.n_free,
                     "err_sigma": err.err_sigma, "err_u": err.err_u,
                     "err_combined": err.err_combined, "eta": ind.eta,
                     "osc": ind.osc, "wall": wall,
                     "solver_iterations": sreport.iterations,
                     "err_sigma_weighted": err.err_sigma_weighted,
                     "err_sigma_inv_weighted": err.err_sigma_inv_weighted,
                     "err_u_weighted": err.err_u_weighted})
        if config.export_vtk:
            _export_vtk(out_dir, f"n{int(n):04d}", mesh, solution, ind)

    _write_convergence_csv(out_dir, rows)
    good = [r for r in rows if np.isfinite(r["err_combined"])]
    _write_lines(out_dir / "dof_error.dat",
                 [f"{r['dofs']} {r['err_combined']:.8e}" for r in good] or [""])
    _write_lines(out_dir / "dof_eta.dat",
                 [f"{r['dofs']} {r['eta']:.8e}" for r in good] or [""])
    slope = _fit_slope([r["dofs"] for r in good][len(good) // 2:],
                       [r["err_combined"] for r in good][len(good) // 2:])
    report = RunReport(mode="convergence", rows=rows, slope=slope,
                       output_dir=str(out_dir))
    _write_summary(out_dir, config, report)
    if failed:
        raise SolverFailureError(
            f"solver did not converge on mesh n={config.mesh_sizes[len(rows) - 1]}")
    return report


def _write_convergence_csv(out_dir, rows):
    hs = [r["h"] for r in rows]
    lines = ["h,dofs,err_sigma,rate_sigma,err_u,rate_u,err_combined,rate_combined,eta"]
    rates = {}
    for key in ("err_sigma", "err_u", "err_combined"):
        vals = np.array([r[key] for r in rows], dtype=float)
        if len(rows) >= 2 and np.all(np.isfinite(vals)) and np.all(vals > 0):
            rates[key] = np.concatenate([[np.nan], reduction_factors(vals, hs)])
        else:
            rates[key] = np.full(len(rows), np.nan)
    for i, r in enumerate(rows):
        lines.append(",".join([
            "%.10g" % r["h"], str(r["dofs"]),
            _fmt(r["err_sigma"]), _fmt(rates["err_sigma"][i], "%.3f"),
            _fmt(r["err_u"]), _fmt(rates["err_u"][i], "%.3f"),
            _fmt(r["err_combined"]), _fmt(rates["err_combined"][i], "%.3f"),
            _fmt(r["eta"]),
        ]))
    _write_lines(out_dir / "convergence.csv", lines)


def run_adaptive(config: RunConfig, out_dir=None) -> RunReport:
    """Solve-estimate-mark-bisect loop driven by the residual indicator."""
    out_dir = Path(out_dir or config.output_dir or "fosll_out")
    out_dir.mkdir(parents=True, exist_ok=True)
    problem, exact = config.make_problem()
    mesh = l_shape_mesh() if problem.name == "lshape" \
        else unit_square_mesh(config.initial_n)

    rows = []
    failed = False
    final_mesh = mesh
    for it in range(config.max_iterations):
        dofmap, system, x, sreport, solution, wall = _solve_level(mesh, problem, config)
        if it == 0 and dofmap.n_free > config.max_dofs:
            raise ConfigError("max_dofs is smaller than the initial DOF count")
        if not sreport.converged:
            rows.append({"iter": it, "elements": mesh.n_triangles,
                         "dofs": dofmap.n_free, "eta": float("nan"),
                         "osc": float("nan"), "err_combined": float("nan"),
                         "slope_running": float("nan"), "wall": wall,
                         "solver_iterations": sreport.iterations})
            failed = True
            break
        ind = indicators(solution)
        err = l2_errors(solution, exact, h=float(geometry(mesh).h_T.max())) \
            if exact is not None else None
        row = {"iter": it, "elements": mesh.n_triangles, "dofs": dofmap.n_free,
               "eta": ind.eta, "osc": ind.osc,
               "err_combined": err.err_combined if err else float("nan"),
               "wall": wall, "solver_iterations": sreport.iterations,
               "max_h": float(solution.geo.h_T.max()),
               "min_h": float(solution.geo.h_T.min())}
        rows.append(row)
        tail = rows[len(rows) // 2:]
        row["slope_running"] = _fit_slope([t["dofs"] for t in tail],
                                          [t["err_combined"] for t in tail])
        if config.export_vtk:
            _export_vtk(out_dir, f"iter{it:04d}", mesh, solution, ind)
        final_mesh = mesh
        if dofmap.n_free >= config.max_dofs or ind.eta == 0.0:
            break
        marked = dorfler_mark(ind, config.theta)
        if marked.size == 0:
            break
        mesh = bisect_refine(mesh, marked)

    lines = ["iter,elements,dofs,eta,osc,err_combined,slope_running"]
    for r in rows:
        lines.append(",".join([
            str(r["iter"]), str(r["elements"]), str(r["dofs"]),
            _fmt(r["eta"]), _fmt(r["osc"]), _fmt(r["err_combined"]),
            _fmt(r.get("slope_running"), "%.4f"),
        ]))
    _write_lines(out_dir / "adaptive.csv", lines)
    good = [r for r in rows if np.isfinite(r["err_combined"])]
    _write_lines(out_dir / "dof_error.dat",
                 [f"{r['dofs']} {r['err_combined']:.8e}" for r in good] or [""])
    _write_lines(out_dir / "dof_eta.dat",
                 [f"{r['dofs']} {r['eta']:.8e}" for r in good] or [""])

    tail = good[len(good) // 2:]
    slope = _fit_slope([r["dofs"] for r in tail], [r["err_combined"] for r in tail])
    report = RunReport(mode="adaptive", rows=rows, slope=slope,
                       output_dir=str(out_dir), final_mesh=final_mesh)
    _write_summary(out_dir, config, report)
    if failed:
        raise SolverFailureError(f"solver did not converge at iteration {rows[-1]['iter']}")
    return report


def run(config: RunConfig, out_dir=None) -> RunReport:
    if config.mode == "convergence":
        return run_convergence(config, out_dir)
    return run_adaptive(config, out_dir)


def _write_summary(out_dir, config, report):
    cfg = asdict(config)
    summary = {
        "config": cfg,
        "mode": report.mode,
        "backend": report.backend,
        "slope": None if not np.isfinite(report.slope) else report.slope,
        "wall_times": [r.get("wall") for r in report.rows],
        "solver_iterations": [r.get("solver_iterations") for r in report.rows],
        "rows": len(report.rows),
    }
    with open(Path(out_dir) / "run_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
