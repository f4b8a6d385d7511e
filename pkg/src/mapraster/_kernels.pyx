# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-pixel kernels. Mirrors mapraster._fallback exactly."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, INFINITY

cnp.import_array()

cdef double BOUNDARY_EPS = 1e-12


def distance_field(const double[:, ::1] pts, Py_ssize_t height, Py_ssize_t width, bint closed):
    """Nearest-segment distance, segment index, foot parameter and even-odd
    sign for every pixel center, all in pixel units."""
    cdef Py_ssize_t n = pts.shape[0]
    cdef Py_ssize_t nseg = n if closed else n - 1
    dist_a = np.empty((height, width), dtype=np.float64)
    seg_a = np.empty((height, width), dtype=np.int32)
    t_a = np.empty((height, width), dtype=np.float64)
    sign_a = np.ones((height, width), dtype=np.int8)
    ex_a = np.empty(nseg, dtype=np.float64)
    ey_a = np.empty(nseg, dtype=np.float64)
    inv_a = np.empty(nseg, dtype=np.float64)
    cdef double[:, ::1] dist = dist_a
    cdef int[:, ::1] seg = seg_a
    cdef double[:, ::1] tt = t_a
    cdef signed char[:, ::1] sign = sign_a
    cdef double[::1] ex = ex_a
    cdef double[::1] ey = ey_a
    cdef double[::1] inv = inv_a
    cdef Py_ssize_t r, c, k, k1
    cdef double qx, qy, ax, ay, t, fx, fy, d2, best, best_t, ll, bx, by
    cdef int best_k
    cdef bint inside

    for k in range(nseg):
        k1 = k + 1
        if k1 == n:
            k1 = 0
        ex[k] = pts[k1, 0] - pts[k, 0]
        ey[k] = pts[k1, 1] - pts[k, 1]
        ll = ex[k] * ex[k] + ey[k] * ey[k]
        inv[k] = 1.0 / ll if ll > 0.0 else 0.0

    with nogil:
        for r in range(height):
            qy = r + 0.5
            for c in range(width):
                qx = c + 0.5
                best = INFINITY
                best_k = 0
                best_t = 0.0
                for k in range(nseg):
                    ax = pts[k, 0]
                    ay = pts[k, 1]
                    t = ((qx - ax) * ex[k] + (qy - ay) * ey[k]) * inv[k]
                    if t < 0.0:
                        t = 0.0
                    elif t > 1.0:
                        t = 1.0
                    fx = qx - (ax + t * ex[k])
                    fy = qy - (ay + t * ey[k])
                    d2 = fx * fx + fy * fy
                    if d2 < best:
                        best = d2
                        best_k = <int>k
                        best_t = t
                best = sqrt(best)
                dist[r, c] = best
                seg[r, c] = best_k
                tt[r, c] = best_t
                if closed and best > BOUNDARY_EPS:
                    inside = False
                    for k in range(n):
                        k1 = k + 1
                        if k1 == n:
                            k1 = 0
                        ay = pts[k, 1]
                        by = pts[k1, 1]
                        if (ay > qy) != (by > qy):
                            ax = pts[k, 0]
                            bx = pts[k1, 0]
                            if qx < ax + (qy - ay) * (bx - ax) / (by - ay):
                                inside = not inside
                    sign[r, c] = 1 if inside else -1
    return dist_a, seg_a, t_a, sign_a


def backward_points(const double[:, ::1] pts, const int[:, ::1] seg, const double[:, ::1] tt,
                    const double[:, ::1] dist, const double[:, ::1] weight, bint closed):
    """Accumulate weight * dD/dP into per-point gradients, row-major order."""
    cdef Py_ssize_t n = pts.shape[0]
    cdef Py_ssize_t height = dist.shape[0], width = dist.shape[1]
    grad_a = np.zeros((n, 2), dtype=np.float64)
    cdef double[:, ::1] grad = grad_a
    cdef Py_ssize_t r, c, k, k1
    cdef double w, d, t, qx, qy, ux, uy, ax, ay

    with nogil:
        for r in range(height):
            qy = r + 0.5
            for c in range(width):
                w = weight[r, c]
                d = dist[r, c]
                if w == 0.0 or d <= 0.0:
                    continue
                qx = c + 0.5
                k = seg[r, c]
                k1 = k + 1
                if k1 == n:
                    k1 = 0
                t = tt[r, c]
                ax = pts[k, 0]
                ay = pts[k, 1]
                ux = (ax + t * (pts[k1, 0] - ax) - qx) / d * w
                uy = (ay + t * (pts[k1, 1] - ay) - qy) / d * w
                grad[k, 0] += (1.0 - t) * ux
                grad[k, 1] += (1.0 - t) * uy
                grad[k1, 0] += t * ux
                grad[k1, 1] += t * uy
    return grad_a
