"""Pure numpy versions of the compiled kernels.

Same signatures and same arithmetic as ``_impl``; used when the extension
is unavailable or disabled via SNFPRUNE_NO_EXT=1.
"""

import math

import numpy as np


def _offdiag_norm(a):
    n = a.shape[0]
    mask = ~np.eye(n, dtype=bool)
    return float(np.sqrt(np.sum(a[mask] ** 2)))


def jacobi_sweeps(a, v, tol, max_sweeps):
    """Diagonalize the symmetric matrix ``a`` in place by cyclic Jacobi rotations.

    ``v`` must be the identity on entry; it accumulates the eigenvectors as
    columns. Convergence is reached when the off-diagonal Frobenius norm drops
    to ``tol`` or below. Returns the number of completed sweeps, or -1 when
    still unconverged after ``max_sweeps``.
    """
    n = a.shape[0]
    # The matrix stays symmetric throughout, so the rotations can run on
    # contiguous rows (with the columns mirrored afterwards) instead of
    # strided columns; ``vt`` likewise holds the eigenvector columns as rows.
    vt = np.ascontiguousarray(v.T)
    buf_p = np.empty(n, dtype=np.float64)
    buf_q = np.empty(n, dtype=np.float64)
    converged_sweeps = -1
    for sweep in range(max_sweeps):
        if _offdiag_norm(a) <= tol:
            converged_sweeps = sweep
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = float(a[p, q])
                if apq == 0.0:
                    continue
                app = float(a[p, p])
                aqq = float(a[q, q])
                theta = (aqq - app) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + math.sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + math.sqrt(1.0 + theta * theta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                tau = s / (1.0 + c)

                row_p = a[p]
                row_q = a[q]
                # buf_p = row_p - s * (row_q + tau * row_p)
                np.multiply(row_p, tau, out=buf_p)
                np.add(row_q, buf_p, out=buf_p)
                np.multiply(buf_p, s, out=buf_p)
                np.subtract(row_p, buf_p, out=buf_p)
                # buf_q = row_q + s * (row_p - tau * row_q)
                np.multiply(row_q, tau, out=buf_q)
                np.subtract(row_p, buf_q, out=buf_q)
                np.multiply(buf_q, s, out=buf_q)
                np.add(row_q, buf_q, out=buf_q)
                row_p[:] = buf_p
                row_q[:] = buf_q
                # The rotation formula above is only valid for entries outside
                # rows/columns p and q; those four entries have closed forms.
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[:, p] = row_p
                a[:, q] = row_q

                vrow_p = vt[p]
                vrow_q = vt[q]
                np.multiply(vrow_p, tau, out=buf_p)
                np.add(vrow_q, buf_p, out=buf_p)
                np.multiply(buf_p, s, out=buf_p)
                np.subtract(vrow_p, buf_p, out=buf_p)
                np.multiply(vrow_q, tau, out=buf_q)
                np.subtract(vrow_p, buf_q, out=buf_q)
                np.multiply(buf_q, s, out=buf_q)
                np.add(vrow_q, buf_q, out=buf_q)
                vrow_p[:] = buf_p
                vrow_q[:] = buf_q
    else:
        if _offdiag_norm(a) <= tol:
            converged_sweeps = max_sweeps
    v[:, :] = vt.T
    return converged_sweeps


def conv2d_fill(x, w, out, sy, sx, py, px):
    """Direct cross-correlation of ``x`` (C,H,W) with ``w`` (O,C,kh,kw).

    Zero padding, no kernel flip. ``out`` must be preallocated with the
    conv output shape; bias is the caller's business.
    """
    cin, h, width = x.shape
    cout, _, kh, kw = w.shape
    _, oh, ow = out.shape
    xp = np.zeros((cin, h + 2 * py, width + 2 * px), dtype=x.dtype)
    xp[:, py:py + h, px:px + width] = x
    for oy in range(oh):
        for ox in range(ow):
            patch = xp[:, oy * sy:oy * sy + kh, ox * sx:ox * sx + kw]
            out[:, oy, ox] = np.tensordot(w, patch, axes=([1, 2, 3], [0, 1, 2]))
    return None
