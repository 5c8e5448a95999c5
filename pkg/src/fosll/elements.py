"""Local RT0 / P1 shape functions and quadrature rules.

The lowest-order Raviart-Thomas basis is indexed by the triangle's local
edges (edge j opposite vertex j) and Kronecker-normalized against the
*global* edge normals, int_{e'} phi_j . n_{e'} ds = delta_{j e'}, so that
adjacent triangles see one consistent degree of freedom:

    phi_j(x) = s_j / (2|K|) * (x - p_j),   div phi_j = s_j / |K|,

with p_j the opposite vertex and s_j the incidence sign of the triangle on
that edge (phi_j . n is the constant s_j / l_j on its own edge).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateElementError, UnsupportedDegreeError

_DEGENERATE_REL_TOL = 1e-14


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature points and weights on a reference element.

    For triangles the points are barycentric, shape (nq, 3), and the weights
    sum to the reference area 1/2. For edges the points are parameters in
    [0, 1] and the weights sum to 1.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __post_init__(self):
        self.points.setflags(write=False)
        self.weights.setflags(write=False)


def _tri_rule(bary_orbits, weight_per_orbit):
    pts = []
    wts = []
    for orbit, w in zip(bary_orbits, weight_per_orbit):
        seen = []
        a, b, c = orbit
        for perm in ((a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)):
            if perm not in seen:
                seen.append(perm)
        for perm in seen:
            pts.append(perm)
            wts.append(w)
    pts = np.array(pts, dtype=np.float64)
    wts = np.array(wts, dtype=np.float64)
    wts *= 0.5 / wts.sum()  # normalize to the reference area
    return pts, wts


_SQRT15 = np.sqrt(15.0)

# positive-weight symmetric rules; the stated degree is exact
_TRIANGLE_RULES = {
    1: _tri_rule([(1 / 3, 1 / 3, 1 / 3)], [1.0]),
    2: _tri_rule([(2 / 3, 1 / 6, 1 / 6)], [1 / 3]),
    4: _tri_rule(
        [(0.108103018168070, 0.445948490915965, 0.445948490915965),
         (0.816847572980459, 0.091576213509771, 0.091576213509771)],
        [0.223381589678011, 0.109951743655322]),
    5: _tri_rule(
        [(1 / 3, 1 / 3, 1 / 3),
         ((6 - _SQRT15) / 21, (9 + 2 * _SQRT15) / 21, (6 - _SQRT15) / 21),
         ((6 + _SQRT15) / 21, (9 - 2 * _SQRT15) / 21, (6 + _SQRT15) / 21)],
        [9 / 40, (155 - _SQRT15) / 1200, (155 + _SQRT15) / 1200]),
    6: _tri_rule(
        [(0.501426509658179, 0.249286745170910, 0.249286745170910),
         (0.873821971016996, 0.063089014491502, 0.063089014491502),
         (0.053145049844816, 0.310352451033785, 0.636502499121399)],
        [0.116786275726379, 0.050844906370207, 0.082851075618374]),
}
_TRIANGLE_RULES[3] = _TRIANGLE_RULES[4]  # no positive 4-point degree-3 rule


def triangle_quadrature(degree: int) -> QuadratureRule:
    """Symmetric positive rule on the reference triangle, exact to `degree`."""
    if degree not in range(1, 7):
        raise UnsupportedDegreeError(f"triangle quadrature degree {degree} not in 1..6")
    pts, wts = _TRIANGLE_RULES[degree]
    return QuadratureRule(points=pts.copy(), weights=wts.copy(), degree=degree)


def edge_quadrature(degree: int) -> QuadratureRule:
    """Gauss-Legendre rule on [0, 1], exact to `degree` (1..9)."""
    if degree not in range(1, 10):
        raise UnsupportedDegreeError(f"edge quadrature degree {degree} not in 1..9")
    npts = (degree + 2) // 2
    xi, w = np.polynomial.legendre.leggauss(npts)
    return QuadratureRule(points=(xi + 1.0) / 2.0, weights=w / 2.0, degree=degree)


# ----------------------------------------------------------------------
# local bases


def _triangle_area(coords):
    u = coords[1] - coords[0]
    v = coords[2] - coords[0]
    return 0.5 * (u[0] * v[1] - u[1] * v[0])


def _check_degenerate(coords, area):
    scale = np.abs(coords).max() ** 2 + 1.0
    if abs(area) <= _DEGENERATE_REL_TOL * scale:
        raise DegenerateElementError(f"triangle area {area:g} is numerically zero")
    if area < 0:
        raise DegenerateElementError("triangle is clockwise")


def _perp(v):
    return np.array([-v[1], v[0]])


@dataclass(frozen=True)
class LocalBasisP1:
    """Vertex-associated barycentric shape functions on one triangle."""

    coords: np.ndarray  # (3, 2)
    grads: np.ndarray   # (3, 2), constant per shape function

    def __call__(self, points):
        """Evaluate (lambda_0, lambda_1, lambda_2) at points, shape (..., 3)."""
        pts = np.asarray(points, dtype=float)
        area2 = 2.0 * _triangle_area(self.coords)
        lam = np.empty(pts.shape[:-1] + (3,))
        for i in range(3):
            a = self.coords[(i + 1) % 3]
            b = self.coords[(i + 2) % 3]
            lam[..., i] = ((b[0] - a[0]) * (pts[..., 1] - a[1])
                           - (b[1] - a[1]) * (pts[..., 0] - a[0])) / area2
        return lam


@dataclass(frozen=True)
class LocalBasisRT0:
    """Edge-associated lowest-order Raviart-Thomas shape functions.

    divs[j] is the (constant) divergence of shape function j.
    """

    coords: np.ndarray  # (3, 2)
    signs: np.ndarray   # (3,)
    divs: np.ndarray    # (3,)

    def __call__(self, points):
        """Evaluate the three shape functions at points, shape (..., 3, 2)."""
        pts = np.asarray(points, dtype=float)
        area = _triangle_area(self.coords)
        out = np.empty(pts.shape[:-1] + (3, 2))
        for j in range(3):
            out[..., j, :] = self.signs[j] / (2.0 * area) * (pts - self.coords[j])
        return out


def p1_local_basis(coords) -> LocalBasisP1:
    """P1 basis on a (counterclockwise) triangle given by its vertex coords."""
    coords = np.asarray(coords, dtype=float).reshape(3, 2)
    area = _triangle_area(coords)
    _check_degenerate(coords, area)
    grads = np.stack([_perp(coords[(i + 2) % 3] - coords[(i + 1) % 3]) / (2.0 * area)
                      for i in range(3)])
    return LocalBasisP1(coords=coords, grads=grads)


def rt0_local_basis(coords, signs=(1, 1, 1)) -> LocalBasisRT0:
    """RT0 basis on a triangle; signs are the global-edge incidence signs."""
    coords = np.asarray(coords, dtype=float).reshape(3, 2)
    signs = np.asarray(signs, dtype=float).reshape(3)
    area = _triangle_area(coords)
    _check_degenerate(coords, area)
    divs = signs / area
    return LocalBasisRT0(coords=coords, signs=signs, divs=divs)
