# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: cyclic Jacobi eigensolver sweeps and direct 2-D convolution.

Both functions mutate their output arguments in place and mirror the
signatures of ``snfprune._kernels._fallback`` exactly; the package selects
one implementation at import time.
"""

from libc.math cimport fabs, sqrt


def jacobi_sweeps(double[:, ::1] a, double[:, ::1] v, double tol, int max_sweeps):
    """Diagonalize the symmetric matrix ``a`` in place by cyclic Jacobi rotations.

    ``v`` must be the identity on entry; it accumulates the eigenvectors as
    columns. Convergence is reached when the off-diagonal Frobenius norm drops
    to ``tol`` or below. Returns the number of completed sweeps, or -1 when
    still unconverged after ``max_sweeps``.
    """
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t p, q, i, sweep
    cdef double off, apq, app, aqq, theta, t, c, s, tau, aip, aiq, vip, viq

    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += a[p, q] * a[p, q]
        off = sqrt(2.0 * off)
        if off <= tol:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                # Rotation angle chosen to zero a[p,q]; the theta/t form is
                # the numerically stable Rutishauser variant.
                theta = (aqq - app) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + sqrt(1.0 + theta * theta))
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                tau = s / (1.0 + c)
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for i in range(n):
                    if i == p or i == q:
                        continue
                    aip = a[i, p]
                    aiq = a[i, q]
                    a[i, p] = aip - s * (aiq + tau * aip)
                    a[i, q] = aiq + s * (aip - tau * aiq)
                    a[p, i] = a[i, p]
                    a[q, i] = a[i, q]
                for i in range(n):
                    vip = v[i, p]
                    viq = v[i, q]
                    v[i, p] = vip - s * (viq + tau * vip)
                    v[i, q] = viq + s * (vip - tau * viq)

    off = 0.0
    for p in range(n - 1):
        for q in range(p + 1, n):
            off += a[p, q] * a[p, q]
    off = sqrt(2.0 * off)
    if off <= tol:
        return max_sweeps
    return -1


def conv2d_fill(double[:, :, ::1] x, double[:, :, :, ::1] w,
                double[:, :, ::1] out,
                Py_ssize_t sy, Py_ssize_t sx, Py_ssize_t py, Py_ssize_t px):
    """Direct cross-correlation of ``x`` (C,H,W) with ``w`` (O,C,kh,kw).

    Zero padding, no kernel flip. ``out`` must be preallocated with the
    conv output shape; bias is the caller's business.
    """
    cdef Py_ssize_t cin = x.shape[0], h = x.shape[1], width = x.shape[2]
    cdef Py_ssize_t cout = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t oh = out.shape[1], ow = out.shape[2]
    cdef Py_ssize_t co, oy, ox, ci, ky, kx, iy, ix
    cdef double acc

    for co in range(cout):
        for oy in range(oh):
            for ox in range(ow):
                acc = 0.0
                for ci in range(cin):
                    for ky in range(kh):
                        iy = oy * sy + ky - py
                        if iy < 0 or iy >= h:
                            continue
                        for kx in range(kw):
                            ix = ox * sx + kx - px
                            if ix < 0 or ix >= width:
                                continue
                            acc += w[co, ci, ky, kx] * x[ci, iy, ix]
                out[co, oy, ox] = acc
