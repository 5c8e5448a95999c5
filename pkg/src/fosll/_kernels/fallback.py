"""Pure-numpy element kernels (fallback for the compiled extension).

All kernels return the (nt, 6, 6) local blocks of the first-order-system
LL* bilinear form on RT0 x P1, with local degrees of freedom ordered as
[flux edge 0..2, scalar vertex 0..2] (edge j opposite vertex j).
"""

import numpy as np

BACKEND = "numpy"

FORM_FACTORED = 0
FORM_EXPANDED = 1
FORM_GRAM = 2


def _basis_data(coords, area, signs, lengths, bary):
    """Physical quadrature points and RT0/P1 basis values.

    Returns pts (nt,nq,2), phi (nt,3,nq,2), divphi (nt,3), gradlam (nt,3,2).
    The RT0 functions are Kronecker-normalized: int_e phi_j . n_e ds = 1 on
    the own edge (lengths is unused but kept for signature stability).
    """
    pts = np.einsum("qi,tik->tqk", bary, coords)
    scale = signs / (2.0 * area[:, None])  # (nt, 3)
    diff = pts[:, None, :, :] - coords[:, :, None, :]  # (nt, 3, nq, 2)
    phi = scale[:, :, None, None] * diff
    divphi = 2.0 * scale
    edge_vec = coords[:, [2, 0, 1], :] - coords[:, [1, 2, 0], :]  # p_{i+2} - p_{i+1}
    gradlam = np.stack([-edge_vec[..., 1], edge_vec[..., 0]], axis=-1)
    gradlam /= (2.0 * area)[:, None, None]
    return pts, phi, divphi, gradlam


def element_blocks(coords, area, signs, lengths, bary, wref,
                   A, Ainv, bvec, avals, reactive, form):
    """Local 6x6 blocks for the requested bilinear form.

    coords (nt,3,2), area (nt,), signs/lengths (nt,3): element geometry;
    bary (nq,3), wref (nq,) (reference weights summing to 1/2);
    A, Ainv (nt,nq,2,2), bvec (nt,nq,2), avals (nt,nq): coefficients at the
    physical quadrature points; reactive selects the a != 0 formulation.
    """
    nt = coords.shape[0]
    nq = bary.shape[0]
    _, phi, divphi, gradlam = _basis_data(coords, area, signs, lengths, bary)
    w = 2.0 * area[:, None] * wref[None, :]  # (nt, nq)
    lam = bary.T  # (3, nq) -> lam[i, q]

    if form == FORM_FACTORED:
        X = np.empty((nt, 6, nq, 2))
        X[:, :3] = phi
        Agrad = np.einsum("tqij,tmj->tmqi", A, gradlam)
        X[:, 3:] = -(Agrad + bvec[:, None, :, :] * lam[None, :, :, None])
        Y = np.zeros((nt, 6, nq))
        if reactive:
            Y[:, :3] = divphi[:, :, None] / avals[:, None, :]
            Y[:, 3:] = -lam[None, :, :]
            aw = avals * w
        else:
            Y[:, :3] = divphi[:, :, None]
            aw = w
        M = np.einsum("tmqi,tqij,tnqj,tq->tmn", X, Ainv, X, w, optimize=True)
        M += np.einsum("tmq,tnq,tq->tmn", Y, Y, aw, optimize=True)

    elif form == FORM_EXPANDED:
        if not reactive:
            # only the factored a=0 variant exists
            return element_blocks(coords, area, signs, lengths, bary, wref,
                                  A, Ainv, bvec, avals, reactive, FORM_FACTORED)
        M = np.zeros((nt, 6, 6))
        # (A^-1 eta, tau)
        M[:, :3, :3] = np.einsum("tmqi,tqij,tnqj,tq->tmn", phi, Ainv, phi, w,
                                 optimize=True)
        # (a^-1 div eta, div tau)
        inv_a_int = np.einsum("tq,tq->t", w, 1.0 / avals)
        M[:, :3, :3] += divphi[:, :, None] * divphi[:, None, :] * inv_a_int[:, None, None]
        # (A grad w, grad v) + (a w, v)
        M[:, 3:, 3:] = np.einsum("tmi,tqij,tnj,tq->tmn", gradlam, A, gradlam, w,
                                 optimize=True)
        M[:, 3:, 3:] += np.einsum("mq,nq,tq->tmn", lam, lam, avals * w, optimize=True)
        # (b w, grad v) + (grad w, b v)
        bgrad = np.einsum("tqi,tmi->tmq", bvec, gradlam)  # b . grad(lam_m)
        cross = np.einsum("tmq,nq,tq->tmn", bgrad, lam, w, optimize=True)
        M[:, 3:, 3:] += cross + np.swapaxes(cross, 1, 2)
        # (A^-1 b w, b v)
        bAinvb = np.einsum("tqi,tqij,tqj->tq", bvec, Ainv, bvec)
        M[:, 3:, 3:] += np.einsum("mq,nq,tq->tmn", lam, lam, bAinvb * w, optimize=True)
        # -(b w, A^-1 tau) and -(A^-1 eta, b v)
        bAinvphi = np.einsum("tqi,tqij,tmqj->tmq", bvec, Ainv, phi)
        coupling = -np.einsum("tmq,nq,tq->tmn", bAinvphi, lam, w, optimize=True)
        M[:, :3, 3:] = coupling
        M[:, 3:, :3] = np.swapaxes(coupling, 1, 2)

    elif form == FORM_GRAM:
        M = np.zeros((nt, 6, 6))
        M[:, :3, :3] = np.einsum("tmqi,tqij,tnqj,tq->tmn", phi, Ainv, phi, w,
                                 optimize=True)
        div_weight = np.einsum("tq,tq->t", w, 1.0 / avals) if reactive else area
        M[:, :3, :3] += divphi[:, :, None] * divphi[:, None, :] * div_weight[:, None, None]
        M[:, 3:, 3:] = np.einsum("tmi,tqij,tnj,tq->tmn", gradlam, A, gradlam, w,
                                 optimize=True)
        if reactive:
            M[:, 3:, 3:] += np.einsum("mq,nq,tq->tmn", lam, lam, avals * w,
                                      optimize=True)
    else:
        raise ValueError(f"unknown form {form}")

    return 0.5 * (M + np.swapaxes(M, 1, 2))
