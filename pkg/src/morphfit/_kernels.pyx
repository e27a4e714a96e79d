# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot numerical kernels.

Function-for-function mirror of `morphfit._kernels_py`; see that module
for the contracts. Zero-weight landmarks are skipped without reading
their observed coordinates.
"""

import numpy as np


def project_points(const double[:, ::1] pts, const double[:, ::1] R, const double[::1] t, double f):
    """Weak-perspective projection f * pi * R * (p + t) of K 3D points."""
    cdef Py_ssize_t K = pts.shape[0]
    out = np.empty((K, 2))
    cdef double[:, ::1] o = out
    cdef double x, y, z
    cdef Py_ssize_t j
    for j in range(K):
        x = pts[j, 0] + t[0]
        y = pts[j, 1] + t[1]
        z = pts[j, 2] + t[2]
        o[j, 0] = f * (R[0, 0] * x + R[0, 1] * y + R[0, 2] * z)
        o[j, 1] = f * (R[1, 0] * x + R[1, 1] * y + R[1, 2] * z)
    return out


def pose_residual_jacobian(
    const double[:, ::1] pts,
    const double[:, ::1] obs,
    const double[::1] w,
    const double[:, ::1] R,
    const double[:, ::1] dRp,
    const double[:, ::1] dRy,
    const double[:, ::1] dRr,
    double f,
    double a,
    double b,
):
    """Weighted residuals (2K,) and Jacobian (2K, 6) of the pose subproblem."""
    cdef Py_ssize_t K = pts.shape[0]
    r_arr = np.zeros(2 * K)
    J_arr = np.zeros((2 * K, 6))
    cdef double[::1] r = r_arr
    cdef double[:, ::1] J = J_arr
    cdef double px, py, pz, bx, by, wj
    cdef Py_ssize_t j, u, v
    for j in range(K):
        wj = w[j]
        if wj == 0.0:
            continue
        px = pts[j, 0]
        py = pts[j, 1]
        pz = pts[j, 2]
        u = 2 * j
        v = u + 1
        bx = R[0, 0] * px + R[0, 1] * py + R[0, 2] * pz + a
        by = R[1, 0] * px + R[1, 1] * py + R[1, 2] * pz + b
        r[u] = wj * (f * bx - obs[j, 0])
        r[v] = wj * (f * by - obs[j, 1])
        J[u, 0] = wj * bx
        J[v, 0] = wj * by
        J[u, 1] = wj * f * (dRp[0, 0] * px + dRp[0, 1] * py + dRp[0, 2] * pz)
        J[v, 1] = wj * f * (dRp[1, 0] * px + dRp[1, 1] * py + dRp[1, 2] * pz)
        J[u, 2] = wj * f * (dRy[0, 0] * px + dRy[0, 1] * py + dRy[0, 2] * pz)
        J[v, 2] = wj * f * (dRy[1, 0] * px + dRy[1, 1] * py + dRy[1, 2] * pz)
        J[u, 3] = wj * f * (dRr[0, 0] * px + dRr[0, 1] * py + dRr[0, 2] * pz)
        J[v, 3] = wj * f * (dRr[1, 0] * px + dRr[1, 1] * py + dRr[1, 2] * pz)
        J[u, 4] = wj * f
        J[v, 5] = wj * f
    return r_arr, J_arr


def weighted_ssd(
    const double[:, ::1] pts,
    const double[:, ::1] obs,
    const double[::1] w,
    const double[:, ::1] R,
    double f,
    double a,
    double b,
):
    """Weighted sum of squared reprojection errors at a candidate pose."""
    cdef Py_ssize_t K = pts.shape[0]
    cdef double acc = 0.0
    cdef double px, py, pz, dx, dy, wj
    cdef Py_ssize_t j
    for j in range(K):
        wj = w[j]
        if wj == 0.0:
            continue
        px = pts[j, 0]
        py = pts[j, 1]
        pz = pts[j, 2]
        dx = f * (R[0, 0] * px + R[0, 1] * py + R[0, 2] * pz + a) - obs[j, 0]
        dy = f * (R[1, 0] * px + R[1, 1] * py + R[1, 2] * pz + b) - obs[j, 1]
        acc += wj * wj * (dx * dx + dy * dy)
    return acc
