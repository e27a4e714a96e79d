"""Weak-perspective camera: Euler rotations, projection, visibility.

Conventions (fixed here and relied on everywhere else):

* right-handed frame, x right, y up, z toward the viewer;
* rotation composed as R = Rz(roll) @ Ry(yaw) @ Rx(pitch);
* a landmark p projects to f * pi * R * (p + t) where pi drops the z row;
* translation along the rotated viewing axis (third row of R) is
  unobservable under this camera. Solvers fix the gauge by reporting t
  with zero component in that direction.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import InvalidArgumentError
from .model import landmarks_3d, synthesize_shape

__all__ = [
    "Pose",
    "LandmarkSet",
    "wrap_angle",
    "rotation_from_euler",
    "rotation_derivatives",
    "project",
    "estimate_visibility",
]

_TWO_PI = 2.0 * math.pi


def wrap_angle(x):
    """Normalize an angle to (-pi, pi]; identity for angles already there."""
    r = math.remainder(x, _TWO_PI)
    if r <= -math.pi:
        r += _TWO_PI
    return r


@dataclass(frozen=True)
class Pose:
    """Weak-perspective pose: scale f > 0, Euler angles, 3D translation.

    Angles are normalized to (-pi, pi] on construction. The translation is
    applied before rotation (p + t), matching the projection model.
    """

    f: float
    pitch: float
    yaw: float
    roll: float
    t: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("f", "pitch", "yaw", "roll"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise InvalidArgumentError(f"pose field {name} must be finite")
            object.__setattr__(self, name, v)
        if self.f <= 0:
            raise InvalidArgumentError("scale factor f must be strictly positive")
        for name in ("pitch", "yaw", "roll"):
            object.__setattr__(self, name, wrap_angle(getattr(self, name)))
        t = np.array(self.t, dtype=np.float64)
        if t.shape != (3,) or not np.all(np.isfinite(t)):
            raise InvalidArgumentError("t must be a finite 3-vector")
        t.setflags(write=False)
        object.__setattr__(self, "t", t)

    def rotation(self):
        return rotation_from_euler(self.pitch, self.yaw, self.roll)


@dataclass(frozen=True)
class LandmarkSet:
    """K 2D points with a per-point visibility mask.

    Invisible points may hold arbitrary values (they are ignored by all
    consumers); visible points must be finite. Empty sets are rejected.
    """

    points: np.ndarray
    visibility: np.ndarray = field(default=None)

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, order="C")
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
            raise InvalidArgumentError("points must be a (K, 2) array with K >= 1")
        if self.visibility is None:
            vis = np.ones(pts.shape[0], dtype=bool)
        else:
            vis = np.array(self.visibility, dtype=bool)
        if vis.shape != (pts.shape[0],):
            raise InvalidArgumentError("visibility length must match point count")
        if not np.all(np.isfinite(pts[vis])):
            raise InvalidArgumentError("visible points must be finite")
        pts.setflags(write=False)
        vis.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "visibility", vis)

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def n_visible(self):
        return int(np.count_nonzero(self.visibility))


def rotation_from_euler(pitch, yaw, roll):
    """3x3 rotation Rz(roll) @ Ry(yaw) @ Rx(pitch), right-handed."""
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    cr, sr = math.cos(roll), math.sin(roll)
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]])
    ry = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    rz = np.array([[cr, -sr, 0.0], [sr, cr, 0.0], [0.0, 0.0, 1.0]])
    return rz @ ry @ rx


def rotation_derivatives(pitch, yaw, roll):
    """R plus its partial derivatives w.r.t. (pitch, yaw, roll).

    Returns (R, dR_dpitch, dR_dyaw, dR_droll), each 3x3.
    """
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    cr, sr = math.cos(roll), math.sin(roll)
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]])
    ry = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    rz = np.array([[cr, -sr, 0.0], [sr, cr, 0.0], [0.0, 0.0, 1.0]])
    drx = np.array([[0.0, 0.0, 0.0], [0.0, -sp, -cp], [0.0, cp, -sp]])
    dry = np.array([[-sy, 0.0, cy], [0.0, 0.0, 0.0], [-cy, 0.0, -sy]])
    drz = np.array([[-sr, -cr, 0.0], [cr, -sr, 0.0], [0.0, 0.0, 0.0]])
    return rz @ ry @ rx, rz @ ry @ drx, rz @ dry @ rx, drz @ ry @ rx


def project(model, coeffs, pose):
    """Project the model landmarks under the pose; all points marked visible.

    Projection itself does not occlude; use estimate_visibility for that.
    """
    pts = np.ascontiguousarray(landmarks_3d(model, coeffs))
    uv = _backend.impl.project_points(pts, pose.rotation(), pose.t, pose.f)
    return LandmarkSet(uv)


def estimate_visibility(model, coeffs, pose):
    """Per-landmark self-occlusion mask for star-shaped models.

    The outward normal at a landmark vertex is approximated by the unit
    vector from the shape centroid to the vertex; the landmark is visible
    when the rotated normal does not point away from the viewer (z >= 0).
    """
    verts = synthesize_shape(model, coeffs).reshape(-1, 3)
    centroid = verts.mean(axis=0)
    normals = verts[model.landmark_indices] - centroid
    norms = np.linalg.norm(normals, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    normals = normals / safe[:, None]
    rotated_z = normals @ pose.rotation()[2]
    return rotated_z >= 0.0
