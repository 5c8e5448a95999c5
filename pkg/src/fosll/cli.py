"""Command-line interface: `fosll run <config.json> [--out DIR] [--export-vtk]`.

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import sys

from .driver import RunConfig, run
from .errors import ConfigError, SolverFailureError


def build_parser():
    parser = argparse.ArgumentParser(prog="fosll",
                                     description="Adaptive LL* elliptic solver")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a convergence or adaptive run")
    p_run.add_argument("config", help="path to the JSON run configuration")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--export-vtk", action="store_true",
                       help="write per-level VTK meshes with u_h and eta_K")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = RunConfig.from_json(args.config)
        if args.export_vtk:
            config.export_vtk = True
        report = run(config, out_dir=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SolverFailureError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    final = report.final
    print(f"{report.mode} run finished: {len(report.rows)} rows "
          f"-> {report.output_dir} (kernels: {report.backend})")
    if final is not None and report.mode == "convergence":
        print(f"final level: h={final['h']:.6g} dofs={final['dofs']} "
              f"err={final['err_combined']:.6e} eta={final['eta']:.6e}")
    elif final is not None:
        print(f"final iteration: dofs={final['dofs']} eta={final['eta']:.6e} "
              f"err={final['err_combined']:.6e} slope={report.slope:.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
