"""Problem definitions: coefficients, boundary data and exact solutions.

All coefficient and data closures are vectorized over an array of points of
shape (..., 2):

    A(pts) -> (..., 2, 2)    symmetric positive definite diffusion
    b(pts) -> (..., 2)       convection
    a(pts), f(pts), g_D(pts) -> (...)
    g_D_grad(pts) -> (..., 2)
    g_N(pts, normals) -> (...)   (normals are outward units on Gamma_N)

Dirichlet/Neumann membership of boundary edges is decided by the
`dirichlet` closure on edge midpoints (None = everything Dirichlet).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InconsistentExactSolutionError

REACTIVE = "reactive"
REACTIONLESS = "reactionless"


def const_scalar(c):
    c = float(c)

    def fn(pts):
        pts = np.asarray(pts, dtype=float)
        return np.full(pts.shape[:-1], c)

    return fn


def const_vector(v):
    v = np.asarray(v, dtype=float).reshape(2)

    def fn(pts):
        pts = np.asarray(pts, dtype=float)
        return np.broadcast_to(v, pts.shape[:-1] + (2,)).copy()

    return fn


def const_matrix(M):
    M = np.asarray(M, dtype=float).reshape(2, 2)

    def fn(pts):
        pts = np.asarray(pts, dtype=float)
        return np.broadcast_to(M, pts.shape[:-1] + (2, 2)).copy()

    return fn


def _zero_boundary(pts, normals=None):
    pts = np.asarray(pts, dtype=float)
    return np.zeros(pts.shape[:-1])


@dataclass(frozen=True)
class ExactSolution:
    """Closed-form solution used for verification.

    sigma must satisfy sigma = -A grad(u); this is checked when the owning
    problem is validated.
    """

    u: Callable
    grad_u: Callable
    sigma: Callable


@dataclass(frozen=True)
class Problem:
    name: str
    A: Callable
    b: Callable
    a: Callable
    f: Callable
    g_D: Callable = _zero_boundary
    g_D_grad: Callable = None
    g_N: Callable = _zero_boundary
    dirichlet: Optional[Callable] = None  # None: all boundary edges Dirichlet
    reaction_mode: str = REACTIVE
    exact: Optional[ExactSolution] = None
    constant_coefficients: bool = False
    ellipticity: tuple = (1.0, 1.0)
    a_min: float = 0.0

    def __post_init__(self):
        if self.reaction_mode not in (REACTIVE, REACTIONLESS):
            raise ValueError(f"unknown reaction mode {self.reaction_mode!r}")
        if self.g_D_grad is None:
            object.__setattr__(self, "g_D_grad",
                               lambda pts: np.zeros(np.asarray(pts).shape[:-1] + (2,)))

    @property
    def reactive(self):
        return self.reaction_mode == REACTIVE


def validate_problem(problem: Problem, points, tol=1e-10):
    """Spot-check the declared problem invariants at sample points.

    Raises ValueError on ellipticity/reaction-mode violations and
    InconsistentExactSolutionError when sigma != -A grad(u).
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    A = problem.A(pts)
    if np.max(np.abs(A - np.swapaxes(A, -1, -2))) > tol:
        raise ValueError("A is not symmetric at sample points")
    mean = 0.5 * (A[..., 0, 0] + A[..., 1, 1])
    rad = np.sqrt((0.5 * (A[..., 0, 0] - A[..., 1, 1])) ** 2 + A[..., 0, 1] ** 2)
    lam_min, lam_max = mean - rad, mean + rad
    lo, hi = problem.ellipticity
    if np.any(lam_min < lo - tol) or np.any(lam_max > hi + tol):
        raise ValueError("eigenvalues of A leave the declared ellipticity interval")
    a = problem.a(pts)
    if problem.reactive:
        if problem.a_min <= 0 or np.any(a < problem.a_min - tol):
            raise ValueError("reactive mode requires a(x) >= a_min > 0")
    else:
        if np.any(np.abs(a) > tol):
            raise ValueError("reactionless mode requires a == 0")
    if problem.exact is not None:
        sigma = problem.exact.sigma(pts)
        residual = sigma + np.einsum("...ij,...j->...i", A, problem.exact.grad_u(pts))
        if np.max(np.abs(residual)) > tol:
            raise InconsistentExactSolutionError(
                f"sigma + A grad(u) deviates by {np.max(np.abs(residual)):.3e}")


# ----------------------------------------------------------------------
# built-in problems


def make_table61_problem():
    """Convection-diffusion-reaction benchmark on the unit square.

    A = I, b = (3, 2), a = 2, exact u = sin(pi x) sin(pi y), homogeneous
    Dirichlet data on the whole boundary.
    """

    def u(pts):
        pts = np.asarray(pts, dtype=float)
        return np.sin(np.pi * pts[..., 0]) * np.sin(np.pi * pts[..., 1])

    def grad_u(pts):
        pts = np.asarray(pts, dtype=float)
        sx, cx = np.sin(np.pi * pts[..., 0]), np.cos(np.pi * pts[..., 0])
        sy, cy = np.sin(np.pi * pts[..., 1]), np.cos(np.pi * pts[..., 1])
        return np.pi * np.stack([cx * sy, sx * cy], axis=-1)

    def sigma(pts):
        return -grad_u(pts)

    def f(pts):
        pts = np.asarray(pts, dtype=float)
        g = grad_u(pts)
        return (2.0 * np.pi ** 2 + 2.0) * u(pts) + 3.0 * g[..., 0] + 2.0 * g[..., 1]

    exact = ExactSolution(u=u, grad_u=grad_u, sigma=sigma)
    problem = Problem(
        name="table61",
        A=const_matrix(np.eye(2)),
        b=const_vector([3.0, 2.0]),
        a=const_scalar(2.0),
        f=f,
        reaction_mode=REACTIVE,
        exact=exact,
        constant_coefficients=True,
        ellipticity=(1.0, 1.0),
        a_min=2.0,
    )
    xs = np.linspace(0.05, 0.95, 7)
    grid = np.array([(x, y) for x in xs for y in xs])
    validate_problem(problem, grid)
    return problem, exact


def _lshape_polar(pts):
    pts = np.asarray(pts, dtype=float)
    x, y = pts[..., 0], pts[..., 1]
    r = np.hypot(x, y)
    theta = np.arctan2(y, x)
    theta = np.where(theta < 0.0, theta + 2.0 * np.pi, theta)
    return r, theta


def make_lshape_problem():
    """Laplace problem on the L-shaped domain with the corner singularity.

    Exact solution u = r^(2/3) sin(2 theta / 3) with theta measured
    counterclockwise from the positive x axis (theta in [0, 3 pi / 2]); the
    trace of u supplies the Dirichlet data on the whole boundary.
    """

    def u(pts):
        r, theta = _lshape_polar(pts)
        return np.cbrt(r) ** 2 * np.sin(2.0 * theta / 3.0)

    def grad_u(pts):
        r, theta = _lshape_polar(pts)
        scale = (2.0 / 3.0) / np.cbrt(r)  # singular at the origin
        return np.stack([-scale * np.sin(theta / 3.0),
                         scale * np.cos(theta / 3.0)], axis=-1)

    def sigma(pts):
        return -grad_u(pts)

    exact = ExactSolution(u=u, grad_u=grad_u, sigma=sigma)
    problem = Problem(
        name="lshape",
        A=const_matrix(np.eye(2)),
        b=const_vector([0.0, 0.0]),
        a=const_scalar(0.0),
        f=const_scalar(0.0),
        g_D=u,
        g_D_grad=grad_u,
        reaction_mode=REACTIONLESS,
        exact=exact,
        constant_coefficients=True,
        ellipticity=(1.0, 1.0),
    )
    ang = np.linspace(0.05, 1.45 * np.pi, 23)
    rad = np.linspace(0.1, 0.9, 5)
    grid = np.array([(r * np.cos(t), r * np.sin(t)) for t in ang for r in rad])
    validate_problem(problem, grid)
    return problem, exact


# ----------------------------------------------------------------------
# manufactured problems


def _fd_div_sigma(sigma, pts, h=1e-5):
    pts = np.asarray(pts, dtype=float)
    ex = np.zeros(pts.shape)
    ey = np.zeros(pts.shape)
    ex[..., 0] = h
    ey[..., 1] = h
    d1 = (sigma(pts + ex)[..., 0] - sigma(pts - ex)[..., 0]) / (2 * h)
    d2 = (sigma(pts + ey)[..., 1] - sigma(pts - ey)[..., 1]) / (2 * h)
    return d1 + d2


def manufactured_problem(u, grad_u, *, A=None, b=None, a=None, f=None, sigma=None,
                         dirichlet=None, name="manufactured", sample_points=None,
                         constant_coefficients=False, ellipticity=None, a_min=None):
    """Build a problem with a known solution from closures.

    The load f is derived from the strong form f = div(sigma) + b.grad(u)
    + a*u; when no f closure is given, div(sigma) is approximated by central
    differences (exact for polynomial fluxes up to degree 2). sigma defaults
    to -A grad(u); a supplied sigma is checked for consistency.
    """
    A = A if A is not None else const_matrix(np.eye(2))
    b = b if b is not None else const_vector([0.0, 0.0])
    a = a if a is not None else const_scalar(0.0)

    if sample_points is None:
        xs = np.linspace(0.07, 0.93, 5)
        sample_points = np.array([(x, y) for x in xs for y in xs])
    sample_points = np.asarray(sample_points, dtype=float).reshape(-1, 2)

    if sigma is None:
        def sigma(pts, _A=A, _g=grad_u):
            return -np.einsum("...ij,...j->...i", _A(pts), _g(pts))

    a_vals = a(sample_points)
    if np.all(np.abs(a_vals) == 0.0):
        reaction_mode = REACTIONLESS
    elif np.all(a_vals > 0.0):
        reaction_mode = REACTIVE
    else:
        raise ValueError("a must be identically zero or strictly positive")

    if f is None:
        def f(pts, _s=sigma, _b=b, _a=a, _g=grad_u, _u=u):
            conv = np.einsum("...i,...i->...", _b(pts), _g(pts))
            return _fd_div_sigma(_s, pts) + conv + _a(pts) * _u(pts)

    if ellipticity is None:
        Avals = A(sample_points)
        mean = 0.5 * (Avals[..., 0, 0] + Avals[..., 1, 1])
        rad = np.sqrt((0.5 * (Avals[..., 0, 0] - Avals[..., 1, 1])) ** 2
                      + Avals[..., 0, 1] ** 2)
        ellipticity = (float((mean - rad).min()), float((mean + rad).max()))

    exact = ExactSolution(u=u, grad_u=grad_u, sigma=sigma)
    problem = Problem(
        name=name, A=A, b=b, a=a, f=f,
        g_D=u, g_D_grad=grad_u,
        g_N=lambda pts, normals, _s=sigma: np.einsum("...i,...i->...",
                                                     _s(pts), np.asarray(normals)),
        dirichlet=dirichlet,
        reaction_mode=reaction_mode,
        exact=exact,
        constant_coefficients=constant_coefficients,
        ellipticity=ellipticity,
        a_min=float(a_vals.min()) if a_min is None and reaction_mode == REACTIVE
        else (a_min or 0.0),
    )
    validate_problem(problem, sample_points)
    return problem, exact


def manufactured_from_expressions(u, *, A=((1, 0), (0, 1)), b=(0, 0), a=0,
                                  dirichlet=None, name="manufactured"):
    """Build a manufactured problem from sympy expression strings in x, y.

    A entries, b entries and a may be numbers or expression strings; f,
    sigma and the boundary data are derived symbolically.
    """
    import sympy as sp

    x, y = sp.symbols("x y")
    loc = {"x": x, "y": y}
    u_expr = sp.sympify(u, locals=loc)
    A_expr = sp.Matrix([[sp.sympify(A[i][j], locals=loc) for j in range(2)]
                        for i in range(2)])
    b_expr = sp.Matrix([sp.sympify(b[0], locals=loc), sp.sympify(b[1], locals=loc)])
    a_expr = sp.sympify(a, locals=loc)

    grad_expr = sp.Matrix([sp.diff(u_expr, x), sp.diff(u_expr, y)])
    sigma_expr = -A_expr * grad_expr
    f_expr = (sp.diff(sigma_expr[0], x) + sp.diff(sigma_expr[1], y)
              + (b_expr.T * grad_expr)[0, 0] + a_expr * u_expr)

    def lamb_scalar(expr):
        fn = sp.lambdify((x, y), expr, modules="numpy")

        def wrapped(pts):
            pts = np.asarray(pts, dtype=float)
            val = fn(pts[..., 0], pts[..., 1])
            return np.broadcast_to(np.asarray(val, dtype=float),
                                   pts.shape[:-1]).copy()

        return wrapped

    def lamb_vector(exprs):
        comps = [lamb_scalar(e) for e in exprs]

        def wrapped(pts):
            return np.stack([c(pts) for c in comps], axis=-1)

        return wrapped

    def lamb_matrix(mat):
        comps = [[lamb_scalar(mat[i, j]) for j in range(2)] for i in range(2)]

        def wrapped(pts):
            rows = [np.stack([comps[i][j](pts) for j in range(2)], axis=-1)
                    for i in range(2)]
            return np.stack(rows, axis=-2)

        return wrapped

    constant = all(len(e.free_symbols) == 0
                   for e in list(A_expr) + list(b_expr) + [a_expr])
    return manufactured_problem(
        lamb_scalar(u_expr), lamb_vector(list(grad_expr)),
        A=lamb_matrix(A_expr), b=lamb_vector(list(b_expr)),
        a=lamb_scalar(a_expr), f=lamb_scalar(f_expr),
        sigma=lamb_vector(list(sigma_expr)),
        dirichlet=dirichlet, name=name, constant_coefficients=constant)


BUILTIN_PROBLEMS = {
    "table61": make_table61_problem,
    "lshape": make_lshape_problem,
}
