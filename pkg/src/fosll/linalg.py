"""Sparse SPD solves: Jacobi-preconditioned conjugate gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass
class SolveReport:
    iterations: int
    relative_residual: float
    converged: bool
    residual_norms: list = field(default_factory=list)


def validate_spd_operator(matrix, sym_tol=1e-10):
    """Check the structural contract: square, finite, symmetric storage."""
    if matrix.shape[0] != matrix.shape[1]:
        raise ValueError("operator must be square")
    data = matrix.data if sp.issparse(matrix) else np.asarray(matrix)
    if not np.all(np.isfinite(data)):
        raise ValueError("operator contains non-finite entries")
    skew = abs(matrix - matrix.T)
    max_skew = skew.max() if sp.issparse(matrix) else np.max(skew)
    scale = abs(matrix).max() if sp.issparse(matrix) else np.max(abs(matrix))
    if max_skew > sym_tol * max(scale, 1e-300):
        raise ValueError("operator is not symmetric")


def solve_spd(matrix, rhs, rel_tol: float = 1e-10, max_iter: int | None = None,
              callback=None):
    """Solve an SPD system with Jacobi-preconditioned CG.

    Returns (x, SolveReport). Convergence is declared when the Euclidean
    residual satisfies ||rhs - A x|| <= rel_tol * ||rhs||; non-convergence
    within max_iter (default 10 * dimension) is reported, not raised.
    The optional callback receives (iteration, x, r) after every step.
    """
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.shape[0]
    if not 0.0 < rel_tol < 1.0:
        raise ValueError("rel_tol must lie in (0, 1)")
    if max_iter is None:
        max_iter = 10 * n
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, True, [0.0])

    diag = matrix.diagonal() if sp.issparse(matrix) else np.diagonal(matrix).copy()
    if np.any(diag <= 0.0):
        raise ValueError("operator has a non-positive diagonal entry; not SPD")

    x = np.zeros(n)
    r = rhs.copy()
    z = r / diag
    p = z.copy()
    rz = float(r @ z)
    history = [1.0]
    report = SolveReport(0, 1.0, False, history)

    for k in range(1, max_iter + 1):
        Ap = matrix @ p
        alpha = rz / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        res = float(np.linalg.norm(r) / bnorm)
        history.append(res)
        if callback is not None:
            callback(k, x, r)
        if res <= rel_tol:
            report.iterations = k
            report.relative_residual = res
            report.converged = True
            return x, report
        z = r / diag
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new

    report.iterations = max_iter
    report.relative_residual = history[-1]
    report.converged = False
    return x, report
