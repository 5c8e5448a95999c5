#!/usr/bin/env python3
"""Benchmark the compiled element kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--sizes 16 32 64] [--repeat 5]

Times the 6x6 element-block computation (the assembly hot loop) for the
factored, expanded and Gram forms on uniform meshes, using both backends,
and reports the speedup plus the maximum entrywise deviation.
"""

import argparse
import time

import numpy as np

from fosll import _kernels
from fosll._kernels import FORM_EXPANDED, FORM_FACTORED, FORM_GRAM, fallback
from fosll.elements import triangle_quadrature
from fosll.mesh import geometry, unit_square_mesh
from fosll.model import make_table61_problem

FORMS = {"factored": FORM_FACTORED, "expanded": FORM_EXPANDED, "gram": FORM_GRAM}


def kernel_args(n, problem):
    mesh = unit_square_mesh(n)
    geo = geometry(mesh)
    rule = triangle_quadrature(4)
    bary = np.ascontiguousarray(rule.points)
    wref = np.ascontiguousarray(rule.weights)
    pts = np.einsum("qi,tik->tqk", bary, geo.tri_coords)
    flat = pts.reshape(-1, 2)
    A = np.ascontiguousarray(problem.A(flat).reshape(pts.shape[:-1] + (2, 2)))
    return (np.ascontiguousarray(geo.tri_coords),
            np.ascontiguousarray(geo.area),
            np.ascontiguousarray(mesh.tri_edge_sign, dtype=np.float64),
            np.ascontiguousarray(geo.tri_edge_length), bary, wref,
            A, np.ascontiguousarray(np.linalg.inv(A)),
            np.ascontiguousarray(problem.b(flat).reshape(pts.shape[:-1] + (2,))),
            np.ascontiguousarray(problem.a(flat).reshape(pts.shape[:-1])),
            True)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", type=int, nargs="+", default=[16, 32, 64])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    if _kernels.BACKEND != "cython":
        print("warning: compiled kernels unavailable; benchmarking the "
              "fallback against itself")
    problem, _ = make_table61_problem()

    header = f"{'n':>4} {'elements':>9} {'form':>9} {'numpy':>10} " \
             f"{'compiled':>10} {'speedup':>8} {'max rel diff':>13}"
    print(header)
    print("-" * len(header))
    for n in args.sizes:
        ka = kernel_args(n, problem)
        nt = ka[0].shape[0]
        for name, form in FORMS.items():
            t_np, ref = best_of(lambda: fallback.element_blocks(*ka, form),
                                args.repeat)
            t_cy, out = best_of(lambda: _kernels.element_blocks(*ka, form),
                                args.repeat)
            diff = float(np.max(np.abs(out - ref)) / np.max(np.abs(ref)))
            print(f"{n:>4} {nt:>9} {name:>9} {t_np * 1e3:>9.2f}ms "
                  f"{t_cy * 1e3:>9.2f}ms {t_np / t_cy:>7.1f}x {diff:>13.2e}")


if __name__ == "__main__":
    main()
