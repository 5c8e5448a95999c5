"""Independent brute-force oracles used by several test modules.

Everything here deliberately avoids the production code paths it checks:
derivatives come from central differences, side resolution from centroid
geometry, and assembly loops are written out longhand.
"""

import numpy as np

from fosll.elements import edge_quadrature, p1_local_basis, rt0_local_basis, \
    triangle_quadrature
from fosll.mesh import DIRICHLET, INTERIOR

# Central differences are exact (zero truncation error) on the elementwise
# polynomial fields they are applied to here, so a largish step just reduces
# floating-point cancellation (~eps |f| / (2 h)).
FD_STEP = 1e-4


class LocalFields:
    """Pointwise recovered fields on one element, built from local bases."""

    def __init__(self, mesh, geo, problem, eta_full, w_full, K):
        coords = geo.tri_coords[K]
        self.problem = problem
        self.rt0 = rt0_local_basis(coords, mesh.tri_edge_sign[K])
        self.p1 = p1_local_basis(coords)
        self.ec = eta_full[mesh.tri_edges[K]]
        self.wv = w_full[mesh.triangles[K]]
        self.div_eta = float(self.rt0.divs @ self.ec)

    def eta(self, pts):
        return np.einsum("...je,j->...e", self.rt0(pts), self.ec)

    def w(self, pts):
        return self.p1(pts) @ self.wv

    def sigma(self, pts):
        pts = np.asarray(pts, dtype=float)
        A = self.problem.A(pts)
        gw = self.p1.grads.T @ self.wv
        return (self.eta(pts) - np.einsum("...ij,j->...i", A, gw)
                - self.problem.b(pts) * self.w(pts)[..., None])

    def u(self, pts):
        pts = np.asarray(pts, dtype=float)
        if self.problem.reactive:
            return -self.div_eta / self.problem.a(pts) + self.w(pts)
        return np.full(pts.shape[:-1], -self.div_eta)

    def ainv_sigma(self, pts):
        Ainv = np.linalg.inv(self.problem.A(pts))
        return np.einsum("...ij,...j->...i", Ainv, self.sigma(pts))

    # central differences (exact on the elementwise-polynomial fields)

    def div_sigma(self, pts):
        return (_fd_partial(self.sigma, pts, 0, 0)
                + _fd_partial(self.sigma, pts, 1, 1))

    def curl_ainv_sigma(self, pts):
        return (_fd_partial(self.ainv_sigma, pts, 1, 0)
                - _fd_partial(self.ainv_sigma, pts, 0, 1))

    def grad_u(self, pts):
        gx = _fd_partial(self.u, pts, None, 0)
        gy = _fd_partial(self.u, pts, None, 1)
        return np.stack([gx, gy], axis=-1)


def _fd_partial(fn, pts, comp, axis):
    plus = np.array(pts, dtype=float)
    minus = np.array(pts, dtype=float)
    plus[..., axis] += FD_STEP
    minus[..., axis] -= FD_STEP
    hi, lo = fn(plus), fn(minus)
    if comp is not None:
        hi, lo = hi[..., comp], lo[..., comp]
    return (hi - lo) / (2.0 * FD_STEP)


def residual_means(mesh, geo, problem, eta_full, w_full, K, degree=4):
    """Brute-force element means of (r1, r2, r3) on element K."""
    rule = triangle_quadrature(degree)
    pts = rule.points @ geo.tri_coords[K]
    w = 2.0 * geo.area[K] * rule.weights
    f = LocalFields(mesh, geo, problem, eta_full, w_full, K)
    r1 = (problem.f(pts) - f.div_sigma(pts)
          + np.einsum("ki,ki->k", problem.b(pts), f.ainv_sigma(pts))
          - problem.a(pts) * f.u(pts))
    r2 = f.ainv_sigma(pts) + f.grad_u(pts)
    r3 = f.curl_ainv_sigma(pts)
    area = geo.area[K]
    return (float(r1 @ w) / area, (r2 * w[:, None]).sum(axis=0) / area,
            float(r3 @ w) / area)


def edge_side_triangles(mesh, geo, e):
    """(K_minus, K_plus, n, t) resolved from centroid geometry only."""
    tris = [t for t in mesh.edge_tris[e] if t >= 0]
    n = geo.edge_normal[e].copy()
    t = geo.edge_tangent[e].copy()
    mid = 0.5 * mesh.vertices[mesh.edges[e]].sum(axis=0)
    k_minus = None
    k_plus = None
    for tri in tris:
        centroid = mesh.vertices[mesh.triangles[tri]].mean(axis=0)
        if (centroid - mid) @ n < 0.0:
            k_minus = tri
        else:
            k_plus = tri
    if k_minus is None:  # boundary edge whose convention normal points inward
        k_minus, k_plus = k_plus, None
        n, t = -n, -t
    return k_minus, k_plus, n, t


def jump_means(mesh, geo, problem, eta_full, w_full, e, degree=3):
    """Brute-force edge means of (J1, J2, J3) on edge e."""
    rule = edge_quadrature(degree)
    a, b = mesh.edges[e]
    pts = mesh.vertices[a] + rule.points[:, None] * (mesh.vertices[b] - mesh.vertices[a])
    ew = rule.weights
    k_minus, k_plus, n, t = edge_side_triangles(mesh, geo, e)
    fm = LocalFields(mesh, geo, problem, eta_full, w_full, k_minus)
    tag = mesh.edge_tag[e]
    if tag == INTERIOR:
        fp = LocalFields(mesh, geo, problem, eta_full, w_full, k_plus)
        J1 = (fm.sigma(pts) - fp.sigma(pts)) @ n
        J2 = fm.u(pts) - fp.u(pts)
        J3 = (fm.ainv_sigma(pts) - fp.ainv_sigma(pts)) @ t
    elif tag == DIRICHLET:
        J1 = np.zeros(len(pts))
        J2 = fm.u(pts) - problem.g_D(pts)
        J3 = problem.g_D_grad(pts) @ t + fm.ainv_sigma(pts) @ t
    else:
        normals = np.broadcast_to(n, pts.shape)
        J1 = fm.sigma(pts) @ n - problem.g_N(pts, normals)
        J2 = np.zeros(len(pts))
        J3 = np.zeros(len(pts))
    return float(J1 @ ew), float(J2 @ ew), float(J3 @ ew)


def p1_stiffness_mass(mesh):
    """Textbook P1 assembly of stiffness and mass matrices (dense).

    Gradients come from solving the 3x3 Vandermonde system per element, a
    route independent of the closed-form used in the package.
    """
    nv = mesh.n_vertices
    K = np.zeros((nv, nv))
    M = np.zeros((nv, nv))
    mass_ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    for tri in mesh.triangles:
        p = mesh.vertices[tri]
        V = np.column_stack([np.ones(3), p])
        C = np.linalg.inv(V)  # row i of C: coefficients (c, gx, gy) of lambda_i
        grads = C[1:, :].T
        area = 0.5 * abs(np.linalg.det(V))
        for i in range(3):
            for j in range(3):
                K[tri[i], tri[j]] += area * (grads[i] @ grads[j])
                M[tri[i], tri[j]] += area * mass_ref[i, j]
    return K, M


def hanging_nodes(mesh, tol=1e-12):
    """All (vertex, edge) pairs where a vertex lies strictly inside an edge."""
    bad = []
    verts = mesh.vertices
    for e, (a, b) in enumerate(mesh.edges):
        d = verts[b] - verts[a]
        L2 = float(d @ d)
        r = verts - verts[a]
        cross = np.abs(d[0] * r[:, 1] - d[1] * r[:, 0])
        s = (r @ d) / L2
        inside = (cross < tol * L2) & (s > tol) & (s < 1.0 - tol)
        inside[[a, b]] = False
        for v in np.flatnonzero(inside):
            bad.append((int(v), int(e)))
    return bad


def min_interior_angle(mesh):
    p = mesh.vertices[mesh.triangles]
    angles = []
    for i in range(3):
        u = p[:, (i + 1) % 3] - p[:, i]
        v = p[:, (i + 2) % 3] - p[:, i]
        cosang = np.einsum("ti,ti->t", u, v) / (
            np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        angles.append(np.arccos(np.clip(cosang, -1.0, 1.0)))
    return float(np.min(angles))
