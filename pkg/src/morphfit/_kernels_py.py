"""Pure-numpy implementations of the hot numerical kernels.

Mirrors the compiled extension `morphfit._kernels` function-for-function;
the active implementation is chosen in `morphfit._backend`. All functions
take C-contiguous float64 arrays and must stay numerically interchangeable
with the compiled versions (same operation order per point).

Landmarks with zero weight are skipped entirely: their residual and
Jacobian rows are exact zeros and their observed coordinates are never
read, so garbage coordinates on invisible landmarks cannot leak in.
"""

import numpy as np


def project_points(pts, R, t, f):
    """Weak-perspective projection f * pi * R * (p + t) of K 3D points.

    pts: (K, 3), R: (3, 3), t: (3,), f: scalar. Returns (K, 2).
    """
    return f * ((pts + t) @ R[:2].T)


def pose_residual_jacobian(pts, obs, w, R, dRp, dRy, dRr, f, a, b):
    """Weighted residuals and Jacobian of the pose subproblem.

    The model point j projects to f * (pi * R * p_j + (a, b)); the residual
    row pair is w_j * (projection - obs_j). Columns of the (2K, 6) Jacobian
    are derivatives w.r.t. (f, pitch, yaw, roll, a, b); dRp/dRy/dRr are the
    rotation-matrix derivatives for the three angles.
    """
    K = pts.shape[0]
    active = w != 0.0
    obs_safe = np.where(active[:, None], obs, 0.0)

    base = pts @ R[:2].T
    base[:, 0] += a
    base[:, 1] += b

    resid = f * base - obs_safe
    resid[~active] = 0.0
    ww = np.where(active, w, 0.0)[:, None]

    J = np.empty((K, 2, 6))
    J[:, :, 0] = base
    J[:, :, 1] = f * (pts @ dRp[:2].T)
    J[:, :, 2] = f * (pts @ dRy[:2].T)
    J[:, :, 3] = f * (pts @ dRr[:2].T)
    J[:, 0, 4] = f
    J[:, 1, 4] = 0.0
    J[:, 0, 5] = 0.0
    J[:, 1, 5] = f
    J *= ww[:, :, None]

    return (ww * resid).reshape(2 * K), J.reshape(2 * K, 6)


def weighted_ssd(pts, obs, w, R, f, a, b):
    """Weighted sum of squared reprojection errors at a candidate pose.

    Same model as pose_residual_jacobian; returns sum_j w_j^2 * |r_j|^2.
    """
    active = w != 0.0
    obs_safe = np.where(active[:, None], obs, 0.0)
    base = pts @ R[:2].T
    base[:, 0] += a
    base[:, 1] += b
    diff = f * base - obs_safe
    diff[~active] = 0.0
    return float(np.einsum("k,kc,kc->", w * w, diff, diff))
