"""Global DOF numbering and assembly of the LL* system.

Trial and test spaces are the homogeneous constrained spaces: flux DOFs on
Neumann edges and scalar DOFs on vertices of the Dirichlet closure are
eliminated, and all boundary data enters through the load functional

    f(tau, v) = (f, v) - int_{Gamma_N} g_N v ds - int_{Gamma_D} g_D (tau.n) ds.

Free DOFs are ordered flux-first: [free edges ascending, free vertices
ascending].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .elements import edge_quadrature, triangle_quadrature
from .errors import SingularSystemError
from .mesh import DIRICHLET, NEUMANN, GeometryCache, Mesh, geometry

TRI_QUAD_DEGREE = 4
EDGE_QUAD_DEGREE = 3


@dataclass(frozen=True)
class DofMap:
    """Global numbering: one flux DOF per edge, one scalar DOF per vertex."""

    n_edges: int
    n_vertices: int
    flux_constrained: np.ndarray   # (ne,) bool, True on Gamma_N edges
    scalar_constrained: np.ndarray  # (nv,) bool, True on Dirichlet-closure vertices
    flux_free_index: np.ndarray    # (ne,) position among free DOFs, -1 if constrained
    scalar_free_index: np.ndarray  # (nv,) likewise (offset by n_flux_free)
    n_flux_free: int
    n_scalar_free: int

    @property
    def n_free(self):
        return self.n_flux_free + self.n_scalar_free

    @property
    def n_total(self):
        return self.n_edges + self.n_vertices

    def free_to_full(self):
        """Indices of the free DOFs inside the full [edges | vertices] vector."""
        flux = np.flatnonzero(~self.flux_constrained)
        scal = self.n_edges + np.flatnonzero(~self.scalar_constrained)
        return np.concatenate([flux, scal])

    def expand(self, free_values):
        """Scatter a free-DOF vector into (eta_coeffs, w_coeffs) with zeros
        on the constrained entries."""
        eta = np.zeros(self.n_edges)
        w = np.zeros(self.n_vertices)
        eta[~self.flux_constrained] = free_values[:self.n_flux_free]
        w[~self.scalar_constrained] = free_values[self.n_flux_free:]
        return eta, w


def build_dof_map(mesh: Mesh) -> DofMap:
    """Number the RT0 edge DOFs and P1 vertex DOFs with essential constraints."""
    flux_constrained = mesh.edge_tag == NEUMANN
    scalar_constrained = np.zeros(mesh.n_vertices, dtype=bool)
    dir_edges = mesh.edge_tag == DIRICHLET
    scalar_constrained[mesh.edges[dir_edges].ravel()] = True

    flux_free_index = np.full(mesh.n_edges, -1, dtype=np.int64)
    free_f = np.flatnonzero(~flux_constrained)
    flux_free_index[free_f] = np.arange(len(free_f))
    scalar_free_index = np.full(mesh.n_vertices, -1, dtype=np.int64)
    free_s = np.flatnonzero(~scalar_constrained)
    scalar_free_index[free_s] = len(free_f) + np.arange(len(free_s))

    for arr in (flux_constrained, scalar_constrained, flux_free_index,
                scalar_free_index):
        arr.setflags(write=False)
    return DofMap(
        n_edges=mesh.n_edges,
        n_vertices=mesh.n_vertices,
        flux_constrained=flux_constrained,
        scalar_constrained=scalar_constrained,
        flux_free_index=flux_free_index,
        scalar_free_index=scalar_free_index,
        n_flux_free=len(free_f),
        n_scalar_free=len(free_s),
    )


@dataclass(frozen=True)
class LinearSystem:
    """Reduced SPD system on the free DOFs."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    dofmap: DofMap

    @property
    def n(self):
        return self.rhs.shape[0]


def _coefficient_arrays(problem, pts):
    flat = pts.reshape(-1, 2)
    shape = pts.shape[:-1]
    A = np.ascontiguousarray(problem.A(flat).reshape(shape + (2, 2)))
    Ainv = np.ascontiguousarray(np.linalg.inv(A))
    b = np.ascontiguousarray(problem.b(flat).reshape(shape + (2,)))
    a = np.ascontiguousarray(problem.a(flat).reshape(shape))
    return A, Ainv, b, a


def _element_blocks(mesh, geo, problem, form, tri_degree):
    rule = triangle_quadrature(tri_degree)
    bary = np.ascontiguousarray(rule.points)
    wref = np.ascontiguousarray(rule.weights)
    pts = np.einsum("qi,tik->tqk", bary, geo.tri_coords)
    A, Ainv, b, a = _coefficient_arrays(problem, pts)
    if not problem.reactive:
        a = np.ones_like(a)  # never used as 1/a, but keep it finite
    return _kernels.element_blocks(
        np.ascontiguousarray(geo.tri_coords),
        np.ascontiguousarray(geo.area),
        np.ascontiguousarray(mesh.tri_edge_sign, dtype=np.float64),
        np.ascontiguousarray(geo.tri_edge_length),
        bary, wref, A, Ainv, b, a, problem.reactive, form)


def _scatter(mesh, dofmap, blocks):
    """Accumulate (nt, 6, 6) blocks into the reduced sparse matrix."""
    nt = mesh.n_triangles
    ldof = np.empty((nt, 6), dtype=np.int64)
    ldof[:, :3] = dofmap.flux_free_index[mesh.tri_edges]
    ldof[:, 3:] = dofmap.scalar_free_index[mesh.triangles]
    rows = np.repeat(ldof, 6, axis=1).ravel()
    cols = np.tile(ldof, (1, 6)).ravel()
    vals = blocks.ravel()
    keep = (rows >= 0) & (cols >= 0)
    K = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])),
                      shape=(dofmap.n_free, dofmap.n_free)).tocsr()
    K.sum_duplicates()
    K = 0.5 * (K + K.T)  # exact symmetry regardless of accumulation order
    return K.tocsr()


def _edge_outward_sign(mesh):
    """+1 where the global edge normal points out of the boundary triangle."""
    return np.where(mesh.edge_tris[:, 0] >= 0, 1.0, -1.0)


def assemble_rhs(mesh: Mesh, dofmap: DofMap, problem, geo: GeometryCache | None = None,
                 tri_degree: int = TRI_QUAD_DEGREE,
                 edge_degree: int = EDGE_QUAD_DEGREE) -> np.ndarray:
    """Load vector on the free DOFs."""
    geo = geo or geometry(mesh)
    rhs_full = np.zeros(dofmap.n_total)

    # (f, v) over elements
    rule = triangle_quadrature(tri_degree)
    pts = np.einsum("qi,tik->tqk", rule.points, geo.tri_coords)
    fvals = problem.f(pts.reshape(-1, 2)).reshape(pts.shape[:-1])
    w = 2.0 * geo.area[:, None] * rule.weights[None, :]
    contrib = np.einsum("tq,qi,tq->ti", fvals, rule.points, w)
    np.add.at(rhs_full, dofmap.n_edges + mesh.triangles, contrib)

    erule = edge_quadrature(edge_degree)
    s = erule.points
    ew = erule.weights
    out_sign = _edge_outward_sign(mesh)

    # -int_{Gamma_D} g_D (tau . n) ds : phi_e . n_out = out_sign / h_e on edge e
    dir_edges = np.flatnonzero(mesh.edge_tag == DIRICHLET)
    if dir_edges.size:
        p0 = mesh.vertices[mesh.edges[dir_edges, 0]]
        p1 = mesh.vertices[mesh.edges[dir_edges, 1]]
        epts = p0[:, None, :] + s[None, :, None] * (p1 - p0)[:, None, :]
        gvals = problem.g_D(epts.reshape(-1, 2)).reshape(len(dir_edges), len(s))
        rhs_full[dir_edges] -= out_sign[dir_edges] * (gvals @ ew)

    # -int_{Gamma_N} g_N v ds on the two endpoint hats
    neu_edges = np.flatnonzero(mesh.edge_tag == NEUMANN)
    if neu_edges.size:
        p0 = mesh.vertices[mesh.edges[neu_edges, 0]]
        p1 = mesh.vertices[mesh.edges[neu_edges, 1]]
        epts = p0[:, None, :] + s[None, :, None] * (p1 - p0)[:, None, :]
        normals = out_sign[neu_edges, None] * geo.edge_normal[neu_edges]
        normals = np.broadcast_to(normals[:, None, :], epts.shape)
        gvals = problem.g_N(epts.reshape(-1, 2), normals.reshape(-1, 2))
        gvals = gvals.reshape(len(neu_edges), len(s))
        elen = geo.edge_length[neu_edges]
        c0 = elen * ((gvals * (1.0 - s)[None, :]) @ ew)
        c1 = elen * ((gvals * s[None, :]) @ ew)
        np.subtract.at(rhs_full, dofmap.n_edges + mesh.edges[neu_edges, 0], c0)
        np.subtract.at(rhs_full, dofmap.n_edges + mesh.edges[neu_edges, 1], c1)

    return rhs_full[dofmap.free_to_full()]


def _check_not_singular(mesh, problem):
    if not problem.reactive and not np.any(mesh.edge_tag == DIRICHLET):
        raise SingularSystemError(
            "reactionless problem without Dirichlet boundary is singular")


def assemble_system(mesh: Mesh, dofmap: DofMap, problem,
                    geo: GeometryCache | None = None,
                    tri_degree: int = TRI_QUAD_DEGREE,
                    edge_degree: int = EDGE_QUAD_DEGREE) -> LinearSystem:
    """Assemble the LL* system from the expanded (term-by-term) bilinear form.

    In reactionless mode the factored a=0 form is the defining one and is
    used directly.
    """
    _check_not_singular(mesh, problem)
    geo = geo or geometry(mesh)
    blocks = _element_blocks(mesh, geo, problem, _kernels.FORM_EXPANDED, tri_degree)
    K = _scatter(mesh, dofmap, blocks)
    rhs = assemble_rhs(mesh, dofmap, problem, geo, tri_degree, edge_degree)
    return LinearSystem(matrix=K, rhs=rhs, dofmap=dofmap)


def assemble_factored(mesh: Mesh, dofmap: DofMap, problem,
                      geo: GeometryCache | None = None,
                      tri_degree: int = TRI_QUAD_DEGREE,
                      edge_degree: int = EDGE_QUAD_DEGREE) -> LinearSystem:
    """Assemble the LL* system by quadrature on the factored residual products."""
    _check_not_singular(mesh, problem)
    geo = geo or geometry(mesh)
    blocks = _element_blocks(mesh, geo, problem, _kernels.FORM_FACTORED, tri_degree)
    K = _scatter(mesh, dofmap, blocks)
    rhs = assemble_rhs(mesh, dofmap, problem, geo, tri_degree, edge_degree)
    return LinearSystem(matrix=K, rhs=rhs, dofmap=dofmap)


def assemble_gram(mesh: Mesh, dofmap: DofMap, problem,
                  geo: GeometryCache | None = None,
                  tri_degree: int = TRI_QUAD_DEGREE) -> sp.csr_matrix:
    """Gram matrix of the weighted product norm |||(tau, v)||| on free DOFs."""
    geo = geo or geometry(mesh)
    blocks = _element_blocks(mesh, geo, problem, _kernels.FORM_GRAM, tri_degree)
    return _scatter(mesh, dofmap, blocks)


def write_matrix_market(system: LinearSystem, path, comment=""):
    """Export the reduced matrix in MatrixMarket coordinate format."""
    from scipy.io import mmwrite

    mmwrite(str(path), system.matrix.tocoo(), comment=comment, symmetry="symmetric")
