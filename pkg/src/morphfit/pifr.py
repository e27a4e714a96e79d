"""Pose-invariant dual-fit pipeline.

Large-pose landmark sets self-occlude, so a single fit loses shape
information. The pipeline here fits the observed set, synthesizes a
frontal (zero-rotation) landmark set from that fit -- making every
landmark visible to a second fit -- and then blends the two parameter
vectors with weights derived from the two fit losses: the fit that
explains its landmarks better contributes more.
"""

import math
from dataclasses import dataclass

import numpy as np

from .camera import LandmarkSet, Pose, project, wrap_angle
from .errors import InvalidArgumentError
from .fitter import ANGLE_INDICES, POSE_SIZE, FitConfig, ParamVector, fit
from .model import landmarks_3d

__all__ = ["FusionResult", "frontalize", "fuse", "pifr_fit"]

MODES = ("full", "shape-only")


@dataclass(frozen=True)
class FusionResult:
    """Fused parameters plus the two contributing fits for diagnostics."""

    fused: ParamVector
    w1: float
    w2: float
    frontal_fit: object = None
    original_fit: object = None


def frontalize(model, initial):
    """Zero-rotation reprojection of a fit's recovered face.

    Keeps the fit's scale and expression, zeroes the rotation, and places
    the frontal projection so its centroid matches the initial fit's
    projected centroid. Every landmark in the output is visible.
    """
    params = initial.params
    coeffs = params.coeffs()
    reference = project(model, coeffs, params.pose()).points
    center = reference.mean(axis=0)

    f = params.f
    mean_xy = landmarks_3d(model, coeffs)[:, :2].mean(axis=0)
    ab = center / f - mean_xy
    frontal_pose = Pose(f, 0.0, 0.0, 0.0, np.array([ab[0], ab[1], 0.0]))
    return project(model, coeffs, frontal_pose)


def fuse(p1, loss1, p2, loss2, mode="full"):
    """Loss-weighted blend of two parameter vectors.

    Weights: w1 = 1 - loss1/(loss1+loss2) and symmetrically for w2, so the
    lower-loss fit dominates; both 0.5 when the losses vanish. Mode "full"
    blends every entry; "shape-only" blends the coefficient entries and
    copies the pose block from p2. Angles are blended after moving p1's
    angle onto the unwrapped representative nearest p2's, then renormalized.
    """
    if mode not in MODES:
        raise InvalidArgumentError(f"unknown fusion mode {mode!r}; expected one of {MODES}")
    for name, value in (("loss1", loss1), ("loss2", loss2)):
        if not math.isfinite(value) or value < 0:
            raise InvalidArgumentError(f"{name} must be finite and non-negative")
    if p1.d_id != p2.d_id or p1.d_exp != p2.d_exp:
        raise InvalidArgumentError("parameter vectors have mismatched dimensions")

    total = loss1 + loss2
    if total < 1e-12:
        w1 = w2 = 0.5
    else:
        w1 = 1.0 - loss1 / total
        w2 = 1.0 - loss2 / total

    v1, v2 = p1.values, p2.values
    fused = w1 * v1 + w2 * v2
    for i in ANGLE_INDICES:
        nearest = v2[i] + wrap_angle(v1[i] - v2[i])
        fused[i] = wrap_angle(w1 * nearest + w2 * v2[i])
    if mode == "shape-only":
        fused[:POSE_SIZE] = v2[:POSE_SIZE]

    return FusionResult(fused=ParamVector(fused, p1.d_id, p1.d_exp), w1=w1, w2=w2)


def pifr_fit(model, observed, config=None, mode="full", jitter_sigma=0.0, jitter_seed=None):
    """Fit, frontalize, refit, fuse.

    The original-image fit supplies the face used to synthesize the frontal
    landmark set; both fits' unweighted RMS losses drive the fusion. An
    optional Gaussian jitter on the frontal set (off by default) mimics an
    imperfect landmark detector for sensitivity studies.
    """
    if config is None:
        config = FitConfig()
    original = fit(model, observed, config)
    frontal_set = frontalize(model, original)
    if jitter_sigma > 0.0:
        rng = np.random.default_rng(jitter_seed)
        frontal_set = LandmarkSet(
            frontal_set.points + rng.normal(0.0, jitter_sigma, frontal_set.points.shape)
        )
    frontal = fit(model, frontal_set, config)

    result = fuse(frontal.params, frontal.loss, original.params, original.loss, mode)
    return FusionResult(
        fused=result.fused,
        w1=result.w1,
        w2=result.w2,
        frontal_fit=frontal,
        original_fit=original,
    )
