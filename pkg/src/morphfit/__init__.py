"""Morphable-model landmark fitting with pose-invariant dual-fit fusion.

Reconstructs 3D face shape, expression, and weak-perspective pose from 2D
landmarks. Hot numerical kernels run in a compiled extension when it is
available, with a pure-numpy fallback selected at import time
(`morphfit.get_backend()` tells you which).
"""

__version__ = "0.1.0"

from ._backend import get_backend, set_backend
from .bench import BenchReport, SynthInstance, mem, mem_normalized, run_benchmark, synth_instance
from .camera import (
    LandmarkSet,
    Pose,
    estimate_visibility,
    project,
    rotation_from_euler,
    wrap_angle,
)
from .errors import (
    InfeasibleInputError,
    InvalidArgumentError,
    MorphfitError,
    ParseError,
    ValidationError,
)
from .fitter import FitConfig, FitResult, ParamVector, fit, pose_init, update_weights
from .model import (
    Coefficients,
    MorphableModel,
    landmarks_3d,
    load_model,
    make_synthetic_model,
    save_model,
    synthesize_shape,
)
from .pifr import FusionResult, frontalize, fuse, pifr_fit

__all__ = [
    "__version__",
    "get_backend",
    "set_backend",
    "MorphableModel",
    "Coefficients",
    "synthesize_shape",
    "landmarks_3d",
    "make_synthetic_model",
    "save_model",
    "load_model",
    "Pose",
    "LandmarkSet",
    "wrap_angle",
    "rotation_from_euler",
    "project",
    "estimate_visibility",
    "FitConfig",
    "FitResult",
    "ParamVector",
    "fit",
    "pose_init",
    "update_weights",
    "FusionResult",
    "frontalize",
    "fuse",
    "pifr_fit",
    "SynthInstance",
    "BenchReport",
    "mem",
    "mem_normalized",
    "synth_instance",
    "run_benchmark",
    "MorphfitError",
    "InvalidArgumentError",
    "InfeasibleInputError",
    "ParseError",
    "ValidationError",
]
