# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled element kernels; mirrors fallback.element_blocks exactly."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"

FORM_FACTORED = 0
FORM_EXPANDED = 1
FORM_GRAM = 2


def element_blocks(const double[:, :, ::1] coords, const double[::1] area,
                   const double[:, ::1] signs, const double[:, ::1] lengths,
                   const double[:, ::1] bary, const double[::1] wref,
                   const double[:, :, :, ::1] A, const double[:, :, :, ::1] Ainv,
                   const double[:, :, ::1] bvec, const double[:, ::1] avals,
                   bint reactive, int form):
    cdef Py_ssize_t nt = coords.shape[0]
    cdef Py_ssize_t nq = bary.shape[0]
    out_arr = np.zeros((nt, 6, 6), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr

    cdef Py_ssize_t t, q, m, n, i, j
    cdef double ar, ptx, pty, wq, aq, inv_a_int, bb, sym
    cdef double scale[3]
    cdef double divphi[3]
    cdef double gl[3][2]
    cdef double X[6][2]
    cdef double Y[6]
    cdef double AX[6][2]
    cdef double bAinv[2]
    cdef double aw

    for t in range(nt):
        ar = area[t]
        for j in range(3):
            scale[j] = signs[t, j] / (2.0 * ar)
            divphi[j] = 2.0 * scale[j]
        for i in range(3):
            # grad(lambda_i) = perp(p_{i+2} - p_{i+1}) / (2 |K|)
            gl[i][0] = -(coords[t, (i + 2) % 3, 1] - coords[t, (i + 1) % 3, 1]) / (2.0 * ar)
            gl[i][1] = (coords[t, (i + 2) % 3, 0] - coords[t, (i + 1) % 3, 0]) / (2.0 * ar)

        if form == FORM_EXPANDED and reactive:
            inv_a_int = 0.0
            for q in range(nq):
                inv_a_int += 2.0 * ar * wref[q] / avals[t, q]
            for m in range(3):
                for n in range(3):
                    out[t, m, n] += divphi[m] * divphi[n] * inv_a_int
        elif form == FORM_GRAM:
            if reactive:
                inv_a_int = 0.0
                for q in range(nq):
                    inv_a_int += 2.0 * ar * wref[q] / avals[t, q]
            else:
                inv_a_int = ar
            for m in range(3):
                for n in range(3):
                    out[t, m, n] += divphi[m] * divphi[n] * inv_a_int

        for q in range(nq):
            wq = 2.0 * ar * wref[q]
            aq = avals[t, q]
            ptx = 0.0
            pty = 0.0
            for i in range(3):
                ptx += bary[q, i] * coords[t, i, 0]
                pty += bary[q, i] * coords[t, i, 1]
            for j in range(3):
                X[j][0] = scale[j] * (ptx - coords[t, j, 0])
                X[j][1] = scale[j] * (pty - coords[t, j, 1])

            if form == FORM_FACTORED or (form == FORM_EXPANDED and not reactive):
                for i in range(3):
                    X[3 + i][0] = -(A[t, q, 0, 0] * gl[i][0] + A[t, q, 0, 1] * gl[i][1]
                                    + bvec[t, q, 0] * bary[q, i])
                    X[3 + i][1] = -(A[t, q, 1, 0] * gl[i][0] + A[t, q, 1, 1] * gl[i][1]
                                    + bvec[t, q, 1] * bary[q, i])
                if reactive:
                    for j in range(3):
                        Y[j] = divphi[j] / aq
                    for i in range(3):
                        Y[3 + i] = -bary[q, i]
                    aw = aq * wq
                else:
                    for j in range(3):
                        Y[j] = divphi[j]
                    for i in range(3):
                        Y[3 + i] = 0.0
                    aw = wq
                for m in range(6):
                    AX[m][0] = Ainv[t, q, 0, 0] * X[m][0] + Ainv[t, q, 0, 1] * X[m][1]
                    AX[m][1] = Ainv[t, q, 1, 0] * X[m][0] + Ainv[t, q, 1, 1] * X[m][1]
                for m in range(6):
                    for n in range(6):
                        out[t, m, n] += wq * (X[m][0] * AX[n][0] + X[m][1] * AX[n][1]) \
                            + aw * Y[m] * Y[n]

            elif form == FORM_EXPANDED:
                # flux-flux mass (A^-1 eta, tau)
                for m in range(3):
                    AX[m][0] = Ainv[t, q, 0, 0] * X[m][0] + Ainv[t, q, 0, 1] * X[m][1]
                    AX[m][1] = Ainv[t, q, 1, 0] * X[m][0] + Ainv[t, q, 1, 1] * X[m][1]
                for m in range(3):
                    for n in range(3):
                        out[t, m, n] += wq * (X[m][0] * AX[n][0] + X[m][1] * AX[n][1])
                # scalar-scalar terms
                bb = (bvec[t, q, 0] * (Ainv[t, q, 0, 0] * bvec[t, q, 0]
                                       + Ainv[t, q, 0, 1] * bvec[t, q, 1])
                      + bvec[t, q, 1] * (Ainv[t, q, 1, 0] * bvec[t, q, 0]
                                         + Ainv[t, q, 1, 1] * bvec[t, q, 1]))
                for m in range(3):
                    for n in range(3):
                        out[t, 3 + m, 3 + n] += wq * (
                            gl[m][0] * (A[t, q, 0, 0] * gl[n][0] + A[t, q, 0, 1] * gl[n][1])
                            + gl[m][1] * (A[t, q, 1, 0] * gl[n][0] + A[t, q, 1, 1] * gl[n][1])
                            + aq * bary[q, m] * bary[q, n]
                            + (bvec[t, q, 0] * gl[m][0] + bvec[t, q, 1] * gl[m][1]) * bary[q, n]
                            + (bvec[t, q, 0] * gl[n][0] + bvec[t, q, 1] * gl[n][1]) * bary[q, m]
                            + bb * bary[q, m] * bary[q, n])
                # -(b w, A^-1 tau) / -(A^-1 eta, b v)
                bAinv[0] = bvec[t, q, 0] * Ainv[t, q, 0, 0] + bvec[t, q, 1] * Ainv[t, q, 1, 0]
                bAinv[1] = bvec[t, q, 0] * Ainv[t, q, 0, 1] + bvec[t, q, 1] * Ainv[t, q, 1, 1]
                for m in range(3):
                    for n in range(3):
                        out[t, m, 3 + n] -= wq * bary[q, n] * (
                            bAinv[0] * X[m][0] + bAinv[1] * X[m][1])
                        out[t, 3 + n, m] -= wq * bary[q, n] * (
                            bAinv[0] * X[m][0] + bAinv[1] * X[m][1])

            elif form == FORM_GRAM:
                for m in range(3):
                    AX[m][0] = Ainv[t, q, 0, 0] * X[m][0] + Ainv[t, q, 0, 1] * X[m][1]
                    AX[m][1] = Ainv[t, q, 1, 0] * X[m][0] + Ainv[t, q, 1, 1] * X[m][1]
                for m in range(3):
                    for n in range(3):
                        out[t, m, n] += wq * (X[m][0] * AX[n][0] + X[m][1] * AX[n][1])
                for m in range(3):
                    for n in range(3):
                        out[t, 3 + m, 3 + n] += wq * (
                            gl[m][0] * (A[t, q, 0, 0] * gl[n][0] + A[t, q, 0, 1] * gl[n][1])
                            + gl[m][1] * (A[t, q, 1, 0] * gl[n][0] + A[t, q, 1, 1] * gl[n][1]))
                        if reactive:
                            out[t, 3 + m, 3 + n] += wq * aq * bary[q, m] * bary[q, n]

        for m in range(6):
            for n in range(m + 1, 6):
                sym = 0.5 * (out[t, m, n] + out[t, n, m])
                out[t, m, n] = sym
                out[t, n, m] = sym

    return out_arr
