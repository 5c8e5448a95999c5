import subprocess
import sys

import numpy as np
import pytest

from fosll import _kernels
from fosll._kernels import FORM_EXPANDED, FORM_FACTORED, FORM_GRAM, fallback
from fosll.mesh import bisect_refine, geometry, unit_square_mesh
from fosll.model import manufactured_from_expressions


def kernel_inputs(mesh, problem, degree=4):
    from fosll.elements import triangle_quadrature

    geo = geometry(mesh)
    rule = triangle_quadrature(degree)
    bary = np.ascontiguousarray(rule.points)
    wref = np.ascontiguousarray(rule.weights)
    pts = np.einsum("qi,tik->tqk", bary, geo.tri_coords)
    flat = pts.reshape(-1, 2)
    A = np.ascontiguousarray(problem.A(flat).reshape(pts.shape[:-1] + (2, 2)))
    Ainv = np.ascontiguousarray(np.linalg.inv(A))
    b = np.ascontiguousarray(problem.b(flat).reshape(pts.shape[:-1] + (2,)))
    a = np.ascontiguousarray(problem.a(flat).reshape(pts.shape[:-1]))
    if not problem.reactive:
        a = np.ones_like(a)
    return (np.ascontiguousarray(geo.tri_coords), np.ascontiguousarray(geo.area),
            np.ascontiguousarray(mesh.tri_edge_sign, dtype=np.float64),
            np.ascontiguousarray(geo.tri_edge_length), bary, wref,
            A, Ainv, b, a, problem.reactive)


compiled = pytest.mark.skipif(_kernels.BACKEND != "cython",
                              reason="compiled kernels not available")


@compiled
class TestBackendEquivalence:
    @pytest.mark.parametrize("form", [FORM_FACTORED, FORM_EXPANDED, FORM_GRAM])
    @pytest.mark.parametrize("spec", [
        dict(u="sin(x)*y", b=(3, 2), a=2),
        dict(u="x*y", a=0),
        dict(u="x+y", A=[["1 + x**2", "0.1"], ["0.1", "1 + y**2"]],
             b=("y", "x"), a="2 + x"),
    ])
    def test_blocks_match_fallback(self, form, spec):
        problem, _ = manufactured_from_expressions(**spec)
        mesh = bisect_refine(unit_square_mesh(2), [0, 3, 5])
        args = kernel_inputs(mesh, problem)
        ours = _kernels.element_blocks(*args, form)
        ref = fallback.element_blocks(*args, form)
        scale = np.abs(ref).max()
        assert np.max(np.abs(ours - ref)) <= 1e-13 * scale

    def test_backend_reports_cython(self):
        assert _kernels.BACKEND == "cython"


def test_pure_python_env_forces_fallback():
    code = ("import os; os.environ['FOSLL_PURE_PYTHON'] = '1'; "
            "import fosll; print(fosll.kernel_backend)")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True,
                         text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_fallback_symmetry():
    problem, _ = manufactured_from_expressions("x*y", b=(1, 2), a=3)
    mesh = unit_square_mesh(2)
    args = kernel_inputs(mesh, problem)
    blocks = fallback.element_blocks(*args, FORM_FACTORED)
    assert np.max(np.abs(blocks - np.swapaxes(blocks, 1, 2))) == 0.0
