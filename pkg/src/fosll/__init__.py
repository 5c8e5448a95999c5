"""Adaptive RT0/P1 finite element solver for second-order elliptic problems
based on the div first-order-system LL* (least-squares adjoint) formulation,
with an explicit residual a posteriori estimator and bisection refinement."""

from . import _kernels
from .assembly import (DofMap, LinearSystem, assemble_factored, assemble_gram,
                       assemble_rhs, assemble_system, build_dof_map,
                       write_matrix_market)
from .driver import RunConfig, RunReport, run, run_adaptive, run_convergence
from .elements import (LocalBasisP1, LocalBasisRT0, QuadratureRule,
                       edge_quadrature, p1_local_basis, rt0_local_basis,
                       triangle_quadrature)
from .errors import (ConfigError, DegenerateElementError,
                     InconsistentExactSolutionError, SingularSystemError,
                     SolverFailureError, UnsupportedDegreeError)
from .estimator import (EdgeJumps, ElementResiduals, IndicatorField,
                        dorfler_mark, edge_jumps, element_residuals,
                        estimator_edge_sum, indicators)
from .linalg import SolveReport, solve_spd, validate_spd_operator
from .mesh import (DIRICHLET, INTERIOR, NEUMANN, GeometryCache, Mesh,
                   bisect_refine, geometry, l_shape_mesh, unit_square_mesh,
                   write_vtk)
from .model import (BUILTIN_PROBLEMS, ExactSolution, Problem, const_matrix,
                    const_scalar, const_vector, make_lshape_problem,
                    make_table61_problem, manufactured_from_expressions,
                    manufactured_problem, validate_problem)
from .postprocess import (ErrorReport, Solution, convergence_rates, l2_errors,
                          recover_fields, reduction_factors, triple_norms)

__version__ = "0.1.0"

kernel_backend = _kernels.BACKEND
