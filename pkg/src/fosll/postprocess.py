"""Recovery of the physical fields and error/rate reporting.

The auxiliary pair (eta_h, w_h) in RT0 x P1 determines the approximations

    sigma_h = eta_h - A grad(w_h) - b w_h
    u_h     = -(1/a) div(eta_h) + w_h      (reactive)
    u_h     = -div(eta_h)                  (reactionless)

elementwise; sigma_h and u_h are generally discontinuous across edges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elements import triangle_quadrature
from .mesh import GeometryCache, Mesh, geometry

ERROR_QUAD_DEGREE = 6


class Solution:
    """Recovered discrete solution with per-element evaluators.

    Every evaluator takes an array of element indices `t` of shape (m,) and
    points of shape (m, k, 2) lying in the respective elements, and returns
    values of shape (m, k) or (m, k, 2).
    """

    def __init__(self, mesh: Mesh, dofmap, problem, eta_coeffs, w_coeffs,
                 geo: GeometryCache | None = None):
        geo = geo or geometry(mesh)
        self.mesh = mesh
        self.dofmap = dofmap
        self.problem = problem
        self.geo = geo
        self.eta_coeffs = np.asarray(eta_coeffs, dtype=float)
        self.w_coeffs = np.asarray(w_coeffs, dtype=float)
        if self.eta_coeffs.shape != (mesh.n_edges,):
            raise ValueError("eta coefficient vector has wrong length")
        if self.w_coeffs.shape != (mesh.n_vertices,):
            raise ValueError("w coefficient vector has wrong length")

        coords = geo.tri_coords
        area = geo.area
        # eta|_K(x) = gamma x + const (RT0 structure, Kronecker-normalized)
        scale = mesh.tri_edge_sign / (2.0 * area[:, None])  # (nt, 3)
        ce = self.eta_coeffs[mesh.tri_edges] * scale    # (nt, 3)
        self.gamma = ce.sum(axis=1)
        self.const = -(ce[:, :, None] * coords).sum(axis=1)
        self.div_eta = 2.0 * self.gamma

        edge_vec = coords[:, [2, 0, 1], :] - coords[:, [1, 2, 0], :]
        gradlam = np.stack([-edge_vec[..., 1], edge_vec[..., 0]], axis=-1)
        gradlam /= (2.0 * area)[:, None, None]          # (nt, 3, 2)
        self.w_vert = self.w_coeffs[mesh.triangles]     # (nt, 3)
        self.grad_w = np.einsum("ti,tik->tk", self.w_vert, gradlam)

        # affine map inverse for barycentric evaluation at arbitrary points
        M = np.stack([coords[:, 1] - coords[:, 0], coords[:, 2] - coords[:, 0]],
                     axis=-1)                           # columns p1-p0, p2-p0
        self.bary_inv = np.linalg.inv(M)
        self._fd_step = 1e-6 * geo.h_T

    # -- basic fields --------------------------------------------------

    def barycentric(self, t, pts):
        d = pts - self.geo.tri_coords[t, 0][:, None, :]
        lam12 = np.einsum("mij,mkj->mki", self.bary_inv[t], d)
        lam0 = 1.0 - lam12.sum(axis=-1)
        return np.concatenate([lam0[..., None], lam12], axis=-1)

    def eta_at(self, t, pts):
        return self.gamma[t][:, None, None] * pts + self.const[t][:, None, :]

    def w_at(self, t, pts):
        return np.einsum("mki,mi->mk", self.barycentric(t, pts), self.w_vert[t])

    def sigma_at(self, t, pts):
        A = self.problem.A(pts)
        b = self.problem.b(pts)
        Agw = np.einsum("mkij,mj->mki", A, self.grad_w[t])
        return self.eta_at(t, pts) - Agw - b * self.w_at(t, pts)[..., None]

    def u_at(self, t, pts):
        div = self.div_eta[t][:, None]
        if self.problem.reactive:
            return -div / self.problem.a(pts) + self.w_at(t, pts)
        return -div * np.ones(pts.shape[:-1])

    # -- derivatives of the recovered fields ---------------------------

    def grad_u_at(self, t, pts):
        if not self.problem.reactive:
            return np.zeros(pts.shape)
        if self.problem.constant_coefficients:
            return np.broadcast_to(self.grad_w[t][:, None, :], pts.shape).copy()
        return self._fd_grad(self.u_at, t, pts)

    def div_sigma_at(self, t, pts):
        if self.problem.constant_coefficients:
            bdotgw = np.einsum("mki,mi->mk", self.problem.b(pts), self.grad_w[t])
            return self.div_eta[t][:, None] - bdotgw
        eps = self._fd_step[t][:, None]
        dx = self._shift(pts, 0, eps)
        dy = self._shift(pts, 1, eps)
        d1 = (self.sigma_at(t, dx[0])[..., 0] - self.sigma_at(t, dx[1])[..., 0])
        d2 = (self.sigma_at(t, dy[0])[..., 1] - self.sigma_at(t, dy[1])[..., 1])
        return (d1 + d2) / (2.0 * eps)

    def curl_ainv_sigma_at(self, t, pts):
        """curl of A^-1 sigma_h = d/dx (A^-1 sigma)_2 - d/dy (A^-1 sigma)_1."""
        if self.problem.constant_coefficients:
            Ainv = np.linalg.inv(self.problem.A(pts))
            bv = np.einsum("mkij,mkj->mki", Ainv, self.problem.b(pts))
            gw = self.grad_w[t]
            return -(bv[..., 1] * gw[:, None, 0] - bv[..., 0] * gw[:, None, 1])
        eps = self._fd_step[t][:, None]
        dx = self._shift(pts, 0, eps)
        dy = self._shift(pts, 1, eps)

        def ainv_sigma(points):
            Ainv = np.linalg.inv(self.problem.A(points))
            return np.einsum("mkij,mkj->mki", Ainv, self.sigma_at(t, points))

        d1 = ainv_sigma(dx[0])[..., 1] - ainv_sigma(dx[1])[..., 1]
        d2 = ainv_sigma(dy[0])[..., 0] - ainv_sigma(dy[1])[..., 0]
        return (d1 - d2) / (2.0 * eps)

    @staticmethod
    def _shift(pts, axis, eps):
        plus = pts.copy()
        minus = pts.copy()
        plus[..., axis] += eps
        minus[..., axis] -= eps
        return plus, minus

    def _fd_grad(self, fn, t, pts):
        eps = self._fd_step[t][:, None]
        dx = self._shift(pts, 0, eps)
        dy = self._shift(pts, 1, eps)
        gx = (fn(t, dx[0]) - fn(t, dx[1])) / (2.0 * eps)
        gy = (fn(t, dy[0]) - fn(t, dy[1])) / (2.0 * eps)
        return np.stack([gx, gy], axis=-1)


def recover_fields(mesh: Mesh, dofmap, problem, coeffs,
                   geo: GeometryCache | None = None) -> Solution:
    """Build the recovered solution from the free-DOF coefficient vector."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (dofmap.n_free,):
        raise ValueError(
            f"coefficient vector has length {coeffs.shape}, expected {dofmap.n_free}")
    eta, w = dofmap.expand(coeffs)
    return Solution(mesh, dofmap, problem, eta, w, geo=geo)


# ----------------------------------------------------------------------
# errors and norms


@dataclass(frozen=True)
class ErrorReport:
    """L2-type errors of the recovered fields plus solution norms.

    err_sigma / err_u are the unweighted L2 errors; the weighted variants
    carry the coefficient weights A^{1/2}, A^{-1/2} and a^{1/2}. The triple
    norms are those of the computed auxiliary pair (eta_h, w_h).
    """

    err_sigma: float
    err_u: float
    err_sigma_weighted: float      # ||A^{1/2}(sigma - sigma_h)||
    err_sigma_inv_weighted: float  # ||A^{-1/2}(sigma - sigma_h)||
    err_u_weighted: float          # ||a^{1/2}(u - u_h)||
    triple_v: float
    triple_tau: float
    triple_pair: float
    h: float
    n_dofs: int
    n_triangles: int

    @property
    def err_combined(self):
        return self.err_sigma + self.err_u


def triple_norms(solution: Solution, quad_degree: int = ERROR_QUAD_DEGREE):
    """Weighted H1 / H(div) / product norms of the auxiliary pair (eta_h, w_h)."""
    mesh, geo, problem = solution.mesh, solution.geo, solution.problem
    rule = triangle_quadrature(quad_degree)
    pts = np.einsum("qi,tik->tqk", rule.points, geo.tri_coords)
    w = 2.0 * geo.area[:, None] * rule.weights[None, :]
    t = np.arange(mesh.n_triangles)

    A = problem.A(pts)
    Ainv = np.linalg.inv(A)
    eta = solution.eta_at(t, pts)
    wh = solution.w_at(t, pts)
    gw = np.broadcast_to(solution.grad_w[:, None, :], pts.shape)
    div = np.broadcast_to(solution.div_eta[:, None], wh.shape)

    tau2 = np.einsum("tqi,tqij,tqj,tq->", eta, Ainv, eta, w)
    v2 = np.einsum("tqi,tqij,tqj,tq->", gw, A, gw, w)
    if problem.reactive:
        a = problem.a(pts)
        tau2 += float(((div ** 2 / a) * w).sum())
        v2 += float(((a * wh ** 2) * w).sum())
    else:
        tau2 += float(((div ** 2) * w).sum())
    triple_tau = float(np.sqrt(tau2))
    triple_v = float(np.sqrt(v2))
    return triple_v, triple_tau, float(np.sqrt(v2 + tau2))


def l2_errors(solution: Solution, exact, quad_degree: int = ERROR_QUAD_DEGREE,
              h: float = float("nan")) -> ErrorReport:
    """Elementwise-quadrature L2 errors of (sigma_h, u_h) against the exact pair."""
    mesh, geo, problem = solution.mesh, solution.geo, solution.problem
    rule = triangle_quadrature(quad_degree)
    pts = np.einsum("qi,tik->tqk", rule.points, geo.tri_coords)
    w = 2.0 * geo.area[:, None] * rule.weights[None, :]
    t = np.arange(mesh.n_triangles)

    dsig = exact.sigma(pts) - solution.sigma_at(t, pts)
    du = exact.u(pts) - solution.u_at(t, pts)
    A = problem.A(pts)
    Ainv = np.linalg.inv(A)
    a = problem.a(pts)

    err_sigma = np.sqrt(np.einsum("tqi,tqi,tq->", dsig, dsig, w))
    err_u = np.sqrt(float((du ** 2 * w).sum()))
    err_sigma_w = np.sqrt(np.einsum("tqi,tqij,tqj,tq->", dsig, A, dsig, w))
    err_sigma_iw = np.sqrt(np.einsum("tqi,tqij,tqj,tq->", dsig, Ainv, dsig, w))
    err_u_w = np.sqrt(float((a * du ** 2 * w).sum()))

    tv, tt, tp = triple_norms(solution, quad_degree)
    return ErrorReport(
        err_sigma=float(err_sigma), err_u=float(err_u),
        err_sigma_weighted=float(err_sigma_w),
        err_sigma_inv_weighted=float(err_sigma_iw),
        err_u_weighted=float(err_u_w),
        triple_v=tv, triple_tau=tt, triple_pair=tp,
        h=h, n_dofs=solution.dofmap.n_free, n_triangles=mesh.n_triangles)


# ----------------------------------------------------------------------
# convergence rates


def convergence_rates(errors, hs):
    """Observed orders log(e_i/e_{i+1}) / log(h_i/h_{i+1}).

    A nonpositive error yields NaN (undefined rate) in the affected slots.
    """
    errors = np.asarray(errors, dtype=float)
    hs = np.asarray(hs, dtype=float)
    if errors.shape != hs.shape or errors.size < 2:
        raise ValueError("need matching error/h sequences of length >= 2")
    if np.any(np.diff(hs) >= 0):
        raise ValueError("hs must be strictly decreasing")
    rates = np.full(errors.size - 1, np.nan)
    ok = (errors[:-1] > 0) & (errors[1:] > 0)
    rates[ok] = (np.log(errors[:-1][ok] / errors[1:][ok])
                 / np.log(hs[:-1][ok] / hs[1:][ok]))
    return rates


def reduction_factors(errors, hs):
    """Error reduction factor normalized to one mesh halving.

    For consecutive uniform halvings this is the plain ratio e_i / e_{i+1},
    the quantity tabulated as "rate" next to first-order errors (values
    near 2 mean first order). Nonpositive errors yield NaN.
    """
    errors = np.asarray(errors, dtype=float)
    hs = np.asarray(hs, dtype=float)
    if errors.shape != hs.shape or errors.size < 2:
        raise ValueError("need matching error/h sequences of length >= 2")
    if np.any(np.diff(hs) >= 0):
        raise ValueError("hs must be strictly decreasing")
    out = np.full(errors.size - 1, np.nan)
    ok = (errors[:-1] > 0) & (errors[1:] > 0)
    halvings = np.log2(hs[:-1] / hs[1:])
    out[ok] = (errors[:-1][ok] / errors[1:][ok]) ** (1.0 / halvings[ok])
    return out
