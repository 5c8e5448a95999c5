"""Conforming triangular meshes with newest-vertex bisection refinement.

Conventions used throughout the package:

* triangles are stored counterclockwise;
* global edges are oriented from the smaller to the larger vertex index,
  the unit tangent t_e follows that orientation and the unit normal is
  n_e = rot(-90) t_e = (t_y, -t_x);
* local edge j of a triangle is the edge opposite local vertex j, and the
  incidence sign is +1 exactly when the triangle's outward normal on that
  edge coincides with the global n_e;
* the refinement vertex of a triangle is the local index of its newest
  vertex; the refinement edge is the edge opposite to it.

Mesh and GeometryCache arrays are frozen after construction (refinement
returns a new mesh), so instances can be shared across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# boundary tags
INTERIOR = 0
DIRICHLET = 1
NEUMANN = 2


def _signed_areas(vertices, triangles):
    p0 = vertices[triangles[:, 0]]
    p1 = vertices[triangles[:, 1]]
    p2 = vertices[triangles[:, 2]]
    u = p1 - p0
    v = p2 - p0
    return 0.5 * (u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])


class Mesh:
    """Conforming triangulation of a polygonal 2D domain.

    Parameters
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array
        Counterclockwise vertex triples.
    boundary_tags : callable or dict or None
        Tags for the boundary edges. A callable receives the midpoints of
        the boundary edges, shape (nb, 2), and returns a tag array; a dict
        maps frozenset vertex pairs to tags (used by refinement to inherit
        tags). None tags every boundary edge DIRICHLET.
    refinement_vertex : (nt,) int array or None
        Local index of the newest vertex per triangle. None picks the
        vertex opposite the longest edge.
    generation : (nt,) int array or None
        Bisection generation counter, zero by default.
    """

    def __init__(self, vertices, triangles, boundary_tags=None,
                 refinement_vertex=None, generation=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise ValueError("vertices must have shape (nv, 2)")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise ValueError("triangles must have shape (nt, 3)")
        if self.triangles.min(initial=0) < 0 or \
                self.triangles.max(initial=-1) >= len(self.vertices):
            raise ValueError("triangle vertex index out of range")

        areas = _signed_areas(self.vertices, self.triangles)
        if np.any(areas <= 0.0):
            bad = int(np.argmin(areas))
            raise ValueError(
                f"triangle {bad} is not counterclockwise (signed area {areas[bad]:g})")

        self._build_edges()
        self._apply_boundary_tags(boundary_tags)

        if refinement_vertex is None:
            self.refinement_vertex = self._longest_edge_opposite()
        else:
            self.refinement_vertex = np.ascontiguousarray(refinement_vertex, dtype=np.int8)
            if self.refinement_vertex.shape != (len(self.triangles),):
                raise ValueError("refinement_vertex has wrong shape")

        if generation is None:
            self.generation = np.zeros(len(self.triangles), dtype=np.int32)
        else:
            self.generation = np.ascontiguousarray(generation, dtype=np.int32)

        for arr in (self.vertices, self.triangles, self.edges, self.tri_edges,
                    self.tri_edge_sign, self.edge_tag, self.edge_tris,
                    self.refinement_vertex, self.generation):
            arr.setflags(write=False)

    # ------------------------------------------------------------------

    def _build_edges(self):
        tris = self.triangles
        # local edge j is opposite local vertex j
        raw = np.stack([tris[:, [1, 2]], tris[:, [2, 0]], tris[:, [0, 1]]], axis=1)
        lo = raw.min(axis=2)
        hi = raw.max(axis=2)
        keys = lo.astype(np.int64) * len(self.vertices) + hi
        uniq, inverse = np.unique(keys.ravel(), return_inverse=True)
        self.edges = np.column_stack([uniq // len(self.vertices),
                                      uniq % len(self.vertices)]).astype(np.int64)
        self.tri_edges = inverse.reshape(len(tris), 3).astype(np.int64)
        # sign +1 iff the CCW traversal of the edge goes small -> large index
        self.tri_edge_sign = np.where(raw[:, :, 0] < raw[:, :, 1], 1, -1).astype(np.int8)

        counts = np.bincount(self.tri_edges.ravel(), minlength=len(self.edges))
        if counts.max(initial=0) > 2:
            raise ValueError("non-manifold mesh: edge shared by more than two triangles")
        self.edge_tag = np.where(counts == 1, DIRICHLET, INTERIOR).astype(np.uint8)

        # adjacent triangles per edge; column 0 is the triangle whose outward
        # normal coincides with the global edge normal, column 1 (or -1) the other
        self.edge_tris = np.full((len(self.edges), 2), -1, dtype=np.int64)
        t_idx = np.repeat(np.arange(len(tris)), 3)
        e_idx = self.tri_edges.ravel()
        s_idx = self.tri_edge_sign.ravel()
        self.edge_tris[e_idx[s_idx > 0], 0] = t_idx[s_idx > 0]
        self.edge_tris[e_idx[s_idx < 0], 1] = t_idx[s_idx < 0]

    def _apply_boundary_tags(self, boundary_tags):
        if boundary_tags is None:
            return
        b = np.flatnonzero(self.edge_tag != INTERIOR)
        if isinstance(boundary_tags, dict):
            tags = np.empty(len(b), dtype=np.uint8)
            for k, e in enumerate(b):
                key = frozenset(int(x) for x in self.edges[e])
                try:
                    tags[k] = boundary_tags[key]
                except KeyError:
                    raise ValueError("boundary edge without a tag entry")
        elif callable(boundary_tags):
            mids = 0.5 * (self.vertices[self.edges[b, 0]] + self.vertices[self.edges[b, 1]])
            tags = np.asarray(boundary_tags(mids), dtype=np.uint8)
            if tags.shape != (len(b),):
                raise ValueError("boundary tag callable returned wrong shape")
        else:
            raise TypeError("boundary_tags must be None, a callable or a dict")
        if np.any(tags == INTERIOR):
            raise ValueError("boundary edges must be tagged dirichlet or neumann")
        self.edge_tag[b] = tags

    def _longest_edge_opposite(self):
        p = self.vertices[self.triangles]  # (nt, 3, 2)
        lengths = np.stack([
            np.linalg.norm(p[:, 2] - p[:, 1], axis=1),
            np.linalg.norm(p[:, 0] - p[:, 2], axis=1),
            np.linalg.norm(p[:, 1] - p[:, 0], axis=1),
        ], axis=1)
        return np.argmax(lengths, axis=1).astype(np.int8)

    # ------------------------------------------------------------------

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def n_edges(self):
        return len(self.edges)

    def boundary_edges(self):
        return np.flatnonzero(self.edge_tag != INTERIOR)

    def refinement_edges(self):
        """Global edge id of the refinement edge of every triangle."""
        return self.tri_edges[np.arange(self.n_triangles),
                              self.refinement_vertex.astype(np.int64)]

    def total_area(self):
        return float(_signed_areas(self.vertices, self.triangles).sum())

    def __repr__(self):
        return (f"Mesh({self.n_vertices} vertices, {self.n_triangles} triangles, "
                f"{self.n_edges} edges)")


@dataclass(frozen=True)
class GeometryCache:
    """Per-entity geometric quantities derived from a mesh.

    tri_coords : (nt, 3, 2) vertex coordinates per triangle
    area : (nt,) triangle areas
    h_T : (nt,) triangle diameters (longest edge)
    tri_edge_length : (nt, 3) edge lengths in local slot order
    edge_length : (ne,) edge lengths h_e
    edge_normal : (ne, 2) unit normals n_e (smaller->larger orientation)
    edge_tangent : (ne, 2) unit tangents t_e
    """

    tri_coords: np.ndarray
    area: np.ndarray
    h_T: np.ndarray
    tri_edge_length: np.ndarray
    edge_length: np.ndarray
    edge_normal: np.ndarray
    edge_tangent: np.ndarray

    def __post_init__(self):
        for arr in self.__dict__.values():
            arr.setflags(write=False)


def geometry(mesh: Mesh) -> GeometryCache:
    """Compute the geometric cache for a mesh."""
    coords = mesh.vertices[mesh.triangles]
    area = _signed_areas(mesh.vertices, mesh.triangles)
    lengths = np.stack([
        np.linalg.norm(coords[:, 2] - coords[:, 1], axis=1),
        np.linalg.norm(coords[:, 0] - coords[:, 2], axis=1),
        np.linalg.norm(coords[:, 1] - coords[:, 0], axis=1),
    ], axis=1)
    vec = mesh.vertices[mesh.edges[:, 1]] - mesh.vertices[mesh.edges[:, 0]]
    elen = np.linalg.norm(vec, axis=1)
    tangent = vec / elen[:, None]
    normal = np.column_stack([tangent[:, 1], -tangent[:, 0]])
    return GeometryCache(
        tri_coords=coords,
        area=area,
        h_T=lengths.max(axis=1),
        tri_edge_length=lengths,
        edge_length=elen,
        edge_normal=normal,
        edge_tangent=tangent,
    )


# ----------------------------------------------------------------------
# mesh builders


def unit_square_mesh(n: int) -> Mesh:
    """Uniform triangulation of (0,1)^2 with 2*n^2 triangles.

    Every cell is split by its lower-left -> upper-right diagonal; all
    boundary edges are tagged Dirichlet; the refinement vertex is the
    right-angle vertex (opposite the diagonal).
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError("n must be a positive integer")
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(ix, iy):
        return iy * (n + 1) + ix

    tris = []
    rv = []
    for iy in range(n):
        for ix in range(n):
            v00, v10 = vid(ix, iy), vid(ix + 1, iy)
            v01, v11 = vid(ix, iy + 1), vid(ix + 1, iy + 1)
            tris.append((v00, v10, v11))  # diagonal v00-v11; right angle at v10
            rv.append(1)
            tris.append((v00, v11, v01))  # right angle at v01
            rv.append(2)
    return Mesh(vertices, np.array(tris), refinement_vertex=np.array(rv, dtype=np.int8))


def l_shape_mesh() -> Mesh:
    """Coarse triangulation of (-1,1)^2 minus the closed fourth quadrant.

    The three remaining unit quadrants are tiled by 12 half-unit squares,
    each split by its lower-left -> upper-right diagonal: 24 triangles and
    21 vertices, all boundary edges Dirichlet.
    """
    xs = np.array([-1.0, -0.5, 0.0, 0.5, 1.0])
    vert_id = {}
    vertices = []
    for y in xs:
        for x in xs:
            if x > 0.0 and y < 0.0:
                continue  # removed quadrant
            vert_id[(x, y)] = len(vertices)
            vertices.append((x, y))
    tris = []
    rv = []
    for y0 in xs[:-1]:
        for x0 in xs[:-1]:
            x1, y1 = x0 + 0.5, y0 + 0.5
            if x0 >= 0.0 and y1 <= 0.0:
                continue  # cell inside the removed quadrant
            v00, v10 = vert_id[(x0, y0)], vert_id[(x1, y0)]
            v01, v11 = vert_id[(x0, y1)], vert_id[(x1, y1)]
            tris.append((v00, v10, v11))
            rv.append(1)
            tris.append((v00, v11, v01))
            rv.append(2)
    return Mesh(np.array(vertices), np.array(tris),
                refinement_vertex=np.array(rv, dtype=np.int8))


# ----------------------------------------------------------------------
# newest-vertex bisection


def bisect_refine(mesh: Mesh, marked) -> Mesh:
    """Bisect the marked triangles and close the mesh.

    Marked triangles are split through the edge opposite their newest
    vertex; further bisections are applied until no hanging node remains.
    Returns a new conforming mesh (the input is never mutated); an empty
    marking returns the input mesh unchanged.
    """
    marked = np.asarray(sorted(set(int(t) for t in marked)), dtype=np.int64)
    if marked.size == 0:
        return mesh
    if marked.min() < 0 or marked.max() >= mesh.n_triangles:
        raise ValueError("marked triangle index out of range")

    refine_edge = mesh.refinement_edges()

    # closure: an edge to be bisected forces the refinement edge of every
    # triangle containing it into the set
    bisect = np.zeros(mesh.n_edges, dtype=bool)
    bisect[refine_edge[marked]] = True
    while True:
        needs = bisect[mesh.tri_edges].any(axis=1)
        grown = refine_edge[needs]
        if bisect[grown].all():
            break
        bisect[grown] = True

    # midpoint vertices, created in edge-id order
    cut_edges = np.flatnonzero(bisect)
    midpoint = {}
    for k, e in enumerate(cut_edges):
        midpoint[frozenset(int(x) for x in mesh.edges[e])] = mesh.n_vertices + k
    mids = 0.5 * (mesh.vertices[mesh.edges[cut_edges, 0]] +
                  mesh.vertices[mesh.edges[cut_edges, 1]])
    vertices = np.vstack([mesh.vertices, mids])

    def mid(u, v):
        return midpoint.get(frozenset((u, v)))

    tris_out = []
    rv_out = []
    gen_out = []

    def emit(tri, rv, gen):
        tris_out.append(tri)
        rv_out.append(rv)
        gen_out.append(gen)

    for t in range(mesh.n_triangles):
        if not bisect[mesh.tri_edges[t]].any():
            emit(tuple(int(x) for x in mesh.triangles[t]),
                 int(mesh.refinement_vertex[t]), int(mesh.generation[t]))
            continue
        r = int(mesh.refinement_vertex[t])
        v = mesh.triangles[t]
        p, a, b = int(v[r]), int(v[(r + 1) % 3]), int(v[(r + 2) % 3])
        gen = int(mesh.generation[t])
        m = mid(a, b)
        # child 1: (p, a, m), newest vertex m (local 2), refinement edge (p, a)
        q = mid(p, a)
        if q is None:
            emit((p, a, m), 2, gen + 1)
        else:
            emit((m, p, q), 2, gen + 2)
            emit((m, q, a), 1, gen + 2)
        # child 2: (p, m, b), newest vertex m (local 1), refinement edge (p, b)
        q = mid(p, b)
        if q is None:
            emit((p, m, b), 1, gen + 1)
        else:
            emit((m, b, q), 2, gen + 2)
            emit((m, q, p), 1, gen + 2)

    # child boundary edges are either old boundary edges or their halves
    tag_map = {}
    for e in np.flatnonzero(mesh.edge_tag != INTERIOR):
        u, v = (int(x) for x in mesh.edges[e])
        tag = int(mesh.edge_tag[e])
        m = mid(u, v)
        if m is None:
            tag_map[frozenset((u, v))] = tag
        else:
            tag_map[frozenset((u, m))] = tag
            tag_map[frozenset((m, v))] = tag

    return Mesh(vertices, np.array(tris_out, dtype=np.int64),
                boundary_tags=tag_map,
                refinement_vertex=np.array(rv_out, dtype=np.int8),
                generation=np.array(gen_out, dtype=np.int32))


# ----------------------------------------------------------------------
# VTK legacy export


def write_vtk(mesh: Mesh, path, cell_data=None, point_data=None, title="fosll mesh"):
    """Write the mesh as a legacy ASCII VTK (version 2.0) unstructured grid.

    cell_data / point_data are dicts mapping field names to per-triangle /
    per-vertex float arrays, emitted as SCALARS.
    """
    lines = [
        "# vtk DataFile Version 2.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.n_vertices} double",
    ]
    for x, y in mesh.vertices:
        lines.append(f"{x:.16g} {y:.16g} 0")
    lines.append(f"CELLS {mesh.n_triangles} {4 * mesh.n_triangles}")
    for a, b, c in mesh.triangles:
        lines.append(f"3 {a} {b} {c}")
    lines.append(f"CELL_TYPES {mesh.n_triangles}")
    lines.extend(["5"] * mesh.n_triangles)
    if cell_data:
        lines.append(f"CELL_DATA {mesh.n_triangles}")
        for name, values in cell_data.items():
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(f"{v:.16g}" for v in np.asarray(values, dtype=float))
    if point_data:
        lines.append(f"POINT_DATA {mesh.n_vertices}")
        for name, values in point_data.items():
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(f"{v:.16g}" for v in np.asarray(values, dtype=float))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
