"""Explicit residual error estimator and bulk marking.

Element residuals of the recovered pair (sigma_h, u_h):

    r1 = f - div(sigma_h) + b . A^-1 sigma_h - a u_h
    r2 = A^-1 sigma_h + grad(u_h)
    r3 = curl(A^-1 sigma_h)

Edge jumps (K- is the side whose outward normal is the edge normal; on the
boundary the outward normal/tangent of the domain is used):

    interior:  J1 = [sigma_h . n],  J2 = [u_h],  J3 = [A^-1 sigma_h . t]
    Dirichlet: J1 = 0, J2 = u_h - g_D, J3 = grad(g_D) . t + A^-1 sigma_h . t
    Neumann:   J1 = sigma_h . n - g_N, J2 = 0, J3 = 0

All projections onto elementwise/edgewise constants are entity means. The
local indicator weights are h_K on element terms and h_e^(1/2) on edge
terms, interior edge terms carrying 1/2 on each adjacent element; J2 enters
only the oscillation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elements import edge_quadrature, triangle_quadrature
from .mesh import DIRICHLET, INTERIOR, NEUMANN
from .postprocess import Solution

TRI_QUAD_DEGREE = 4
EDGE_QUAD_DEGREE = 3


@dataclass(frozen=True)
class IndicatorField:
    """Per-entity estimator data and global aggregates."""

    eta_sq_K: np.ndarray   # (nt,) local indicator squared
    osc_sq_K: np.ndarray   # (nt,) local oscillation squared
    rbar1: np.ndarray      # (nt,)
    rbar2: np.ndarray      # (nt, 2)
    rbar3: np.ndarray      # (nt,)
    jbar1: np.ndarray      # (ne,)
    jbar2: np.ndarray      # (ne,)
    jbar3: np.ndarray      # (ne,)

    @property
    def eta_K(self):
        return np.sqrt(self.eta_sq_K)

    @property
    def osc_K(self):
        return np.sqrt(self.osc_sq_K)

    @property
    def eta(self):
        return float(np.sqrt(self.eta_sq_K.sum()))

    @property
    def osc(self):
        return float(np.sqrt(self.osc_sq_K.sum()))


# ----------------------------------------------------------------------
# raw residual/jump evaluation


def _element_residual_values(solution: Solution, t, pts):
    """Raw (r1, r2, r3) at points inside elements t; shapes (m,k)/(m,k,2)."""
    problem = solution.problem
    sig = solution.sigma_at(t, pts)
    Ainv = np.linalg.inv(problem.A(pts))
    ainv_sig = np.einsum("mkij,mkj->mki", Ainv, sig)
    r1 = (problem.f(pts) - solution.div_sigma_at(t, pts)
          + np.einsum("mki,mki->mk", problem.b(pts), ainv_sig)
          - problem.a(pts) * solution.u_at(t, pts))
    r2 = ainv_sig + solution.grad_u_at(t, pts)
    r3 = solution.curl_ainv_sigma_at(t, pts)
    return r1, r2, r3


def _element_stats(solution: Solution, tri_idx, degree):
    """Means and squared L2 norms of r1, r2, r3 on the given elements."""
    geo = solution.geo
    rule = triangle_quadrature(degree)
    pts = np.einsum("qi,mik->mqk", rule.points, geo.tri_coords[tri_idx])
    w = 2.0 * geo.area[tri_idx, None] * rule.weights[None, :]
    area = geo.area[tri_idx]
    r1, r2, r3 = _element_residual_values(solution, tri_idx, pts)
    rbar1 = (r1 * w).sum(axis=1) / area
    rbar2 = (r2 * w[..., None]).sum(axis=1) / area[:, None]
    rbar3 = (r3 * w).sum(axis=1) / area
    sq1 = (r1 ** 2 * w).sum(axis=1)
    sq2 = ((r2 ** 2).sum(axis=-1) * w).sum(axis=1)
    sq3 = (r3 ** 2 * w).sum(axis=1)
    return rbar1, rbar2, rbar3, sq1, sq2, sq3


def _edge_stats(solution: Solution, edge_idx, degree):
    """Means and squared L2 norms of J1, J2, J3 on the given edges."""
    mesh, geo, problem = solution.mesh, solution.geo, solution.problem
    rule = edge_quadrature(degree)
    s = rule.points
    ew = rule.weights

    p0 = mesh.vertices[mesh.edges[edge_idx, 0]]
    p1 = mesh.vertices[mesh.edges[edge_idx, 1]]
    pts = p0[:, None, :] + s[None, :, None] * (p1 - p0)[:, None, :]

    tri_minus = mesh.edge_tris[edge_idx, 0]
    tri_plus = mesh.edge_tris[edge_idx, 1]
    boundary = mesh.edge_tag[edge_idx] != INTERIOR
    out_sign = np.where(tri_minus >= 0, 1.0, -1.0)
    t_minus = np.where(tri_minus >= 0, tri_minus, tri_plus)

    normal = geo.edge_normal[edge_idx]
    tangent = geo.edge_tangent[edge_idx]
    normal = np.where(boundary[:, None], out_sign[:, None] * normal, normal)
    tangent = np.where(boundary[:, None], out_sign[:, None] * tangent, tangent)

    Ainv = np.linalg.inv(problem.A(pts))
    sig_m = solution.sigma_at(t_minus, pts)
    ainv_sig_m = np.einsum("mkij,mkj->mki", Ainv, sig_m)
    u_m = solution.u_at(t_minus, pts)

    nk = len(s)
    J1 = np.zeros((len(edge_idx), nk))
    J2 = np.zeros_like(J1)
    J3 = np.zeros_like(J1)

    interior = ~boundary
    if interior.any():
        ii = np.flatnonzero(interior)
        sig_p = solution.sigma_at(tri_plus[ii], pts[ii])
        ainv_sig_p = np.einsum("mkij,mkj->mki", Ainv[ii], sig_p)
        u_p = solution.u_at(tri_plus[ii], pts[ii])
        J1[ii] = np.einsum("mki,mi->mk", sig_m[ii] - sig_p, normal[ii])
        J2[ii] = u_m[ii] - u_p
        J3[ii] = np.einsum("mki,mi->mk", ainv_sig_m[ii] - ainv_sig_p, tangent[ii])

    dmask = mesh.edge_tag[edge_idx] == DIRICHLET
    if dmask.any():
        dd = np.flatnonzero(dmask)
        J2[dd] = u_m[dd] - problem.g_D(pts[dd])
        J3[dd] = (np.einsum("mki,mi->mk", problem.g_D_grad(pts[dd]), tangent[dd])
                  + np.einsum("mki,mi->mk", ainv_sig_m[dd], tangent[dd]))

    nmask = mesh.edge_tag[edge_idx] == NEUMANN
    if nmask.any():
        nn = np.flatnonzero(nmask)
        nrm = np.broadcast_to(normal[nn][:, None, :], pts[nn].shape)
        J1[nn] = (np.einsum("mki,mi->mk", sig_m[nn], normal[nn])
                  - problem.g_N(pts[nn].reshape(-1, 2),
                                nrm.reshape(-1, 2)).reshape(len(nn), nk))

    jbar1, jbar2, jbar3 = J1 @ ew, J2 @ ew, J3 @ ew
    msq1, msq2, msq3 = (J1 ** 2) @ ew, (J2 ** 2) @ ew, (J3 ** 2) @ ew
    return jbar1, jbar2, jbar3, msq1, msq2, msq3


# ----------------------------------------------------------------------
# public per-entity operations


@dataclass(frozen=True)
class ElementResiduals:
    rbar1: float
    rbar2: np.ndarray
    rbar3: float
    raw: callable  # pts (k, 2) -> (r1 (k,), r2 (k, 2), r3 (k,))


def element_residuals(solution: Solution, K: int,
                      degree: int = TRI_QUAD_DEGREE) -> ElementResiduals:
    """Mean residuals on element K plus a raw pointwise evaluator."""
    idx = np.array([K], dtype=np.int64)
    rbar1, rbar2, rbar3, *_ = _element_stats(solution, idx, degree)

    def raw(pts):
        pts = np.asarray(pts, dtype=float).reshape(1, -1, 2)
        r1, r2, r3 = _element_residual_values(solution, idx, pts)
        return r1[0], r2[0], r3[0]

    return ElementResiduals(rbar1=float(rbar1[0]), rbar2=rbar2[0],
                            rbar3=float(rbar3[0]), raw=raw)


@dataclass(frozen=True)
class EdgeJumps:
    jbar1: float
    jbar2: float
    jbar3: float


def edge_jumps(solution: Solution, e: int,
               degree: int = EDGE_QUAD_DEGREE) -> EdgeJumps:
    """Mean jumps on edge e (sides resolved by the edge-normal convention)."""
    idx = np.array([e], dtype=np.int64)
    jbar1, jbar2, jbar3, *_ = _edge_stats(solution, idx, degree)
    return EdgeJumps(jbar1=float(jbar1[0]), jbar2=float(jbar2[0]),
                     jbar3=float(jbar3[0]))


# ----------------------------------------------------------------------
# indicator field


def indicators(solution: Solution, tri_degree: int = TRI_QUAD_DEGREE,
               edge_degree: int = EDGE_QUAD_DEGREE) -> IndicatorField:
    """Local indicators, oscillations and their global aggregates."""
    mesh, geo = solution.mesh, solution.geo
    nt, ne = mesh.n_triangles, mesh.n_edges
    all_t = np.arange(nt)
    all_e = np.arange(ne)

    rbar1, rbar2, rbar3, sq1, sq2, sq3 = _element_stats(solution, all_t, tri_degree)
    jbar1, jbar2, jbar3, msq1, msq2, msq3 = _edge_stats(solution, all_e, edge_degree)

    hK2 = geo.h_T ** 2
    area = geo.area
    mean2 = rbar1 ** 2 + (rbar2 ** 2).sum(axis=1) + rbar3 ** 2
    eta_sq = hK2 * area * mean2
    osc_sq = hK2 * (np.maximum(sq1 - area * rbar1 ** 2, 0.0)
                    + np.maximum(sq2 - area * (rbar2 ** 2).sum(axis=1), 0.0)
                    + np.maximum(sq3 - area * rbar3 ** 2, 0.0))

    he2 = geo.edge_length ** 2
    edge_eta1 = he2 * jbar1 ** 2         # ||h^{1/2} Jbar1||_e^2
    edge_eta3 = he2 * jbar3 ** 2
    edge_osc = he2 * (np.maximum(msq1 - jbar1 ** 2, 0.0)
                      + np.maximum(msq2 - jbar2 ** 2, 0.0)
                      + np.maximum(msq3 - jbar3 ** 2, 0.0))

    interior = mesh.edge_tag == INTERIOR
    dmask = mesh.edge_tag == DIRICHLET
    nmask = mesh.edge_tag == NEUMANN
    edge_contrib = np.where(interior, 0.5 * (edge_eta1 + edge_eta3),
                            np.where(dmask, edge_eta3, edge_eta1))

    for col in (0, 1):
        tri = mesh.edge_tris[:, col]
        valid = tri >= 0
        np.add.at(eta_sq, tri[valid], edge_contrib[valid])
        np.add.at(osc_sq, tri[valid], edge_osc[valid])

    return IndicatorField(eta_sq_K=eta_sq, osc_sq_K=osc_sq,
                          rbar1=rbar1, rbar2=rbar2, rbar3=rbar3,
                          jbar1=jbar1, jbar2=jbar2, jbar3=jbar3)


def estimator_edge_sum(field: IndicatorField, mesh, geo):
    """Global eta^2 recomputed in the edge-sum form (each edge counted once)."""
    hK2 = geo.h_T ** 2
    mean2 = field.rbar1 ** 2 + (field.rbar2 ** 2).sum(axis=1) + field.rbar3 ** 2
    total = float((hK2 * geo.area * mean2).sum())
    he2 = geo.edge_length ** 2
    total += float((he2 * (field.jbar1 ** 2 + field.jbar3 ** 2)).sum())
    return total


def dorfler_mark(field, theta: float):
    """Minimal greedy bulk marking on the squared indicators.

    Returns the sorted indices of a minimal set M (largest eta_K first,
    ties by lower element index) with sum_M eta_K^2 >= theta * sum eta_K^2.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    eta_sq = field.eta_sq_K if isinstance(field, IndicatorField) \
        else np.asarray(field, dtype=float)
    if eta_sq.size == 0:
        raise ValueError("empty indicator field")
    total = eta_sq.sum()
    if total <= 0.0:
        return np.empty(0, dtype=np.int64)
    order = np.argsort(-eta_sq, kind="stable")
    csum = np.cumsum(eta_sq[order])
    k = int(np.searchsorted(csum, theta * total - 1e-14 * total) + 1)
    return np.sort(order[:k])
