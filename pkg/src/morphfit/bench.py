"""Synthetic benchmark: ground-truth generation, error metric, reports.

The benchmark generates faces from the model itself, projects them at
sampled poses binned by absolute yaw ([0,30), [30,60), [60,90] degrees),
corrupts the landmarks with isotropic Gaussian noise, optionally marks
self-occluded landmarks invisible, and compares three backends:

* ``unweighted``  -- plain landmark fit (reweighting disabled)
* ``weighted``    -- residual-reweighted landmark fit
* ``pifr``        -- the dual-fit fusion pipeline

Reconstruction error is the root of the per-face summed squared landmark
distance averaged over faces (no division by the landmark count; see
``mem``). Each backend's recovered parameters are reprojected over all K
landmarks -- occluded ones included -- so information lost to occlusion
shows up directly in the score. The fusion backend runs in shape-only
mode by default: literal full fusion averages the pose toward frontal,
which is never what a reconstruction benchmark should score.

Trials are independent and seeded as master_seed + trial index, so results
are reproducible for any worker count.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .camera import LandmarkSet, Pose, estimate_visibility, project, rotation_from_euler
from .errors import InvalidArgumentError
from .fitter import FitConfig, ParamVector, fit
from .model import Coefficients
from .pifr import pifr_fit

__all__ = [
    "YAW_BINS_DEG",
    "METHODS",
    "SynthInstance",
    "BenchRow",
    "BenchReport",
    "mem",
    "mem_normalized",
    "synth_instance",
    "run_benchmark",
]

YAW_BINS_DEG = ((0.0, 30.0), (30.0, 60.0), (60.0, 90.0))
METHODS = ("unweighted", "weighted", "pifr")

_DEFAULT_PITCH = math.radians(10.0)
_DEFAULT_ROLL = math.radians(5.0)


def _pair_sq_sum(ground, estimated):
    if ground.n != estimated.n:
        raise InvalidArgumentError("landmark sets in a pair must have equal K")
    d = ground.points - estimated.points
    return float(np.sum(d * d))


def mem(ground, estimated):
    """Root mean (over faces) of summed squared landmark distances.

    sqrt( (1/N) * sum_i sum_j |U_ij - V_ij|^2 ). The inner sum over the K
    landmarks is deliberately not averaged; use mem_normalized for the
    per-landmark variant.
    """
    if len(ground) != len(estimated):
        raise InvalidArgumentError("ground and estimated lists must have equal length")
    if len(ground) == 0:
        raise InvalidArgumentError("need at least one landmark-set pair")
    total = sum(_pair_sq_sum(g, e) for g, e in zip(ground, estimated))
    return math.sqrt(total / len(ground))


def mem_normalized(ground, estimated):
    """Like mem but with the inner landmark sum divided by each face's K."""
    if len(ground) != len(estimated):
        raise InvalidArgumentError("ground and estimated lists must have equal length")
    if len(ground) == 0:
        raise InvalidArgumentError("need at least one landmark-set pair")
    total = sum(_pair_sq_sum(g, e) / g.n for g, e in zip(ground, estimated))
    return math.sqrt(total / len(ground))


@dataclass(frozen=True)
class SynthInstance:
    """One synthetic test face: generating parameters plus observations."""

    truth: ParamVector
    truth_landmarks: LandmarkSet
    observed: LandmarkSet
    seed: int


def synth_instance(
    model,
    seed,
    yaw_range,
    pitch_range=(-_DEFAULT_PITCH, _DEFAULT_PITCH),
    noise_sigma_frac=0.0,
    occlude=False,
    roll_range=(-_DEFAULT_ROLL, _DEFAULT_ROLL),
    f_range=(0.7, 1.6),
    shift_range=0.3,
):
    """Deterministically sample one ground-truth face and its observation.

    Coefficients are zero-mean Gaussian with the model's per-mode sigma;
    the yaw magnitude is uniform in yaw_range (radians) with random sign;
    pitch and roll are uniform in small ranges. Scale f and the in-plane
    translation are uniform in f_range / [-shift_range, shift_range]. The
    observed points are the truth projection plus isotropic Gaussian noise
    with standard deviation noise_sigma_frac times the truth bounding-box
    diagonal; with occlude=True, self-occluded landmarks are marked
    invisible.
    """
    lo, hi = float(yaw_range[0]), float(yaw_range[1])
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo < 0 or hi < lo:
        raise InvalidArgumentError("yaw_range must satisfy 0 <= lo <= hi (radians)")
    if noise_sigma_frac < 0 or not math.isfinite(noise_sigma_frac):
        raise InvalidArgumentError("noise_sigma_frac must be non-negative")

    rng = np.random.default_rng(seed)
    alpha_id = rng.normal(size=model.d_id) * model.id_sigma
    alpha_exp = rng.normal(size=model.d_exp) * model.exp_sigma
    coeffs = Coefficients(alpha_id, alpha_exp)

    yaw = rng.uniform(lo, hi) * (1.0 if rng.integers(2) else -1.0)
    pitch = rng.uniform(*pitch_range)
    roll = rng.uniform(*roll_range)
    f = rng.uniform(*f_range)
    a, b = rng.uniform(-shift_range, shift_range, size=2)

    R = rotation_from_euler(pitch, yaw, roll)
    t = R.T @ np.array([a, b, 0.0])
    pose = Pose(f, pitch, yaw, roll, t)

    truth_landmarks = project(model, coeffs, pose)
    span = truth_landmarks.points.max(axis=0) - truth_landmarks.points.min(axis=0)
    diag = math.hypot(span[0], span[1])
    noise = rng.normal(0.0, noise_sigma_frac * diag, size=truth_landmarks.points.shape)

    visibility = estimate_visibility(model, coeffs, pose) if occlude else None
    observed = LandmarkSet(truth_landmarks.points + noise, visibility)
    truth = ParamVector.from_parts(pose, coeffs)
    return SynthInstance(truth=truth, truth_landmarks=truth_landmarks, observed=observed, seed=seed)


@dataclass(frozen=True)
class BenchRow:
    method: str
    bin_label: str
    trials: int
    mem_mean: float
    mem_std: float
    mem_shape: float
    mem_exp: float


@dataclass(frozen=True)
class BenchReport:
    """Per-method, per-yaw-bin metric table, plus an overall row each."""

    rows: tuple

    def row(self, method, bin_label):
        for r in self.rows:
            if r.method == method and r.bin_label == bin_label:
                return r
        raise KeyError(f"no row for {method!r} / {bin_label!r}")

    def to_csv(self):
        lines = ["method,bin,trials,mem_mean,mem_std,mem_shape,mem_exp"]
        for r in self.rows:
            lines.append(
                f"{r.method},{r.bin_label},{r.trials},"
                f"{_fmt(r.mem_mean)},{_fmt(r.mem_std)},{_fmt(r.mem_shape)},{_fmt(r.mem_exp)}"
            )
        return "\n".join(lines) + "\n"


def _fmt(x):
    return f"{x:.6g}"


def _scores(model, truth, est_params):
    """Total/shape/expression reconstruction error of one estimate.

    Each side is reprojected at its own parameters (truth at the truth
    pose, the estimate at its recovered pose) over all K landmarks; the
    shape and expression columns zero the other coefficient block on both
    sides.
    """
    tpose, epose = truth.pose(), est_params.pose()
    t_id, t_exp = truth.alpha_id, truth.alpha_exp
    e_id, e_exp = est_params.alpha_id, est_params.alpha_exp
    zid, zexp = np.zeros_like(t_id), np.zeros_like(t_exp)

    def score(truth_c, est_c):
        u = project(model, truth_c, tpose)
        v = project(model, est_c, epose)
        return mem([u], [v])

    total = score(Coefficients(t_id, t_exp), Coefficients(e_id, e_exp))
    shape = score(Coefficients(t_id, zexp), Coefficients(e_id, zexp))
    expr = score(Coefficients(zid, t_exp), Coefficients(zid, e_exp))
    return total, shape, expr


def _run_trial(model, seed, yaw_range_rad, noise_sigma_frac, occlude, config, mode):
    inst = synth_instance(
        model,
        seed,
        yaw_range_rad,
        noise_sigma_frac=noise_sigma_frac,
        occlude=occlude,
    )
    out = {}
    unweighted = fit(model, inst.observed, replace(config, reweight=False))
    out["unweighted"] = _scores(model, inst.truth, unweighted.params)
    weighted = fit(model, inst.observed, replace(config, reweight=True))
    out["weighted"] = _scores(model, inst.truth, weighted.params)
    fused = pifr_fit(model, inst.observed, replace(config, reweight=True), mode=mode)
    out["pifr"] = _scores(model, inst.truth, fused.fused)
    return out


_POOL_CTX = {}


def _pool_init(model, noise, occlude, config, mode, bins_rad, trials_per_bin):
    _POOL_CTX.update(
        model=model,
        noise=noise,
        occlude=occlude,
        config=config,
        mode=mode,
        bins_rad=bins_rad,
        trials_per_bin=trials_per_bin,
    )


def _pool_run(args):
    index, seed = args
    c = _POOL_CTX
    yaw_range = c["bins_rad"][index // c["trials_per_bin"]]
    return index, _run_trial(
        c["model"], seed, yaw_range, c["noise"], c["occlude"], c["config"], c["mode"]
    )


def run_benchmark(
    model,
    trials_per_bin,
    noise_sigma_frac,
    config=None,
    occlude=True,
    master_seed=0,
    mode="shape-only",
    workers=1,
):
    """Run all three backends over the three yaw bins and aggregate.

    Per-bin rows carry the mean and sample std of the per-trial scores;
    each method's "overall" row aggregates its three bin means (mean and
    sample std across bins, mirroring the usual report layout). The report
    depends only on master_seed, not on the worker count.
    """
    if trials_per_bin < 1:
        raise InvalidArgumentError("trials_per_bin must be >= 1")
    if config is None:
        config = FitConfig()

    bins_rad = tuple((math.radians(lo), math.radians(hi)) for lo, hi in YAW_BINS_DEG)
    total_trials = trials_per_bin * len(bins_rad)
    tasks = [(i, master_seed + i) for i in range(total_trials)]

    results = [None] * total_trials
    if workers > 1:
        init_args = (model, noise_sigma_frac, occlude, config, mode, bins_rad, trials_per_bin)
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_pool_init, initargs=init_args
        ) as pool:
            chunk = max(1, total_trials // (workers * 4))
            for index, out in pool.map(_pool_run, tasks, chunksize=chunk):
                results[index] = out
    else:
        for index, seed in tasks:
            yaw_range = bins_rad[index // trials_per_bin]
            results[index] = _run_trial(
                model, seed, yaw_range, noise_sigma_frac, occlude, config, mode
            )

    rows = []
    for method in METHODS:
        bin_means = []
        bin_shapes = []
        bin_exps = []
        for bi, (lo, hi) in enumerate(YAW_BINS_DEG):
            chunk = results[bi * trials_per_bin : (bi + 1) * trials_per_bin]
            totals = np.array([r[method][0] for r in chunk])
            shapes = np.array([r[method][1] for r in chunk])
            exps = np.array([r[method][2] for r in chunk])
            std = float(np.std(totals, ddof=1)) if totals.size > 1 else 0.0
            label = f"{lo:g}-{hi:g}"
            rows.append(
                BenchRow(method, label, totals.size, float(totals.mean()), std,
                         float(shapes.mean()), float(exps.mean()))
            )
            bin_means.append(float(totals.mean()))
            bin_shapes.append(float(shapes.mean()))
            bin_exps.append(float(exps.mean()))
        rows.append(
            BenchRow(
                method,
                "overall",
                total_trials,
                float(np.mean(bin_means)),
                float(np.std(bin_means, ddof=1)),
                float(np.mean(bin_shapes)),
                float(np.mean(bin_exps)),
            )
        )
    return BenchReport(rows=tuple(rows))
