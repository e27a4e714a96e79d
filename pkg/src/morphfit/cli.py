"""Command-line interface and the text file formats it speaks.

Subcommands: synth-model, synth-data, fit, pifr, bench, eval, export-obj.
Fit-style results go to stdout as JSON; reports and meshes go to files
(written atomically: temp file + rename). Exit codes: 0 success, 1 usage
error, 2 data or validation error.

The .pts landmark format stores y pointing down; everything internal is
y-up, so the sign of y is flipped at this boundary (and flipped back on
write). Grammar: `version: 1`, `n_points: <K>`, `{`, K lines of two
numbers, `}`.
"""

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from ._backend import get_backend
from ._fileio import atomic_write_text
from .bench import run_benchmark, mem, mem_normalized, synth_instance
from .camera import LandmarkSet
from .errors import (
    InfeasibleInputError,
    InvalidArgumentError,
    MorphfitError,
    ParseError,
    ValidationError,
)
from .fitter import FitConfig, fit
from .model import Coefficients, load_model, make_synthetic_model, save_model, synthesize_shape
from .pifr import pifr_fit

__all__ = ["parse_pts", "write_pts", "export_obj", "main", "entry"]


# ---------------------------------------------------------------------------
# .pts landmark files


def parse_pts(text):
    """Parse a .pts landmark document into a LandmarkSet (all visible)."""
    lines = text.splitlines()

    def stripped(i):
        return lines[i].strip() if i < len(lines) else None

    head = stripped(0)
    if head is None or not head.startswith("version:"):
        raise ParseError("line 1: expected 'version: <v>' header")
    count_line = stripped(1)
    if count_line is None or not count_line.startswith("n_points:"):
        raise ParseError("line 2: expected 'n_points: <K>'")
    try:
        k = int(count_line.split(":", 1)[1].strip())
    except ValueError:
        raise ParseError("line 2: n_points value is not an integer") from None
    if k < 1:
        raise ParseError("line 2: n_points must be >= 1")
    if stripped(2) != "{":
        raise ParseError("line 3: expected '{'")

    pts = np.empty((k, 2))
    for j in range(k):
        lineno = 4 + j
        raw = stripped(3 + j)
        if raw is None or raw == "}":
            raise ParseError(f"line {lineno}: expected a point, file has fewer than n_points={k}")
        tokens = raw.split()
        if len(tokens) != 2:
            raise ParseError(f"line {lineno}: expected two coordinates, got {len(tokens)} tokens")
        try:
            x, y = float(tokens[0]), float(tokens[1])
        except ValueError:
            raise ParseError(f"line {lineno}: non-numeric coordinate {raw!r}") from None
        pts[j] = (x, -y)  # file is y-down; internal convention is y-up

    closing = stripped(3 + k)
    if closing != "}":
        found = "end of file" if closing is None else repr(lines[3 + k].strip())
        raise ParseError(f"line {4 + k}: expected '}}', found {found} (point count mismatch?)")
    for extra in range(4 + k, len(lines)):
        if lines[extra].strip():
            raise ParseError(f"line {extra + 1}: unexpected content after '}}'")
    return LandmarkSet(pts)


def write_pts(landmarks):
    """Render a LandmarkSet as .pts text (y flipped back to file convention)."""
    rows = [f"{p[0]:.6f} {-p[1]:.6f}" for p in landmarks.points]
    return "\n".join(["version: 1", f"n_points: {landmarks.n}", "{", *rows, "}"]) + "\n"


# ---------------------------------------------------------------------------
# OBJ export


def export_obj(model, coeffs, path):
    """Write the synthesized shape as a Wavefront OBJ (v records, then f)."""
    verts = synthesize_shape(model, coeffs).reshape(-1, 3)
    lines = [f"v {v[0]:.6f} {v[1]:.6f} {v[2]:.6f}" for v in verts]
    if model.faces is not None:
        lines.extend(f"f {a + 1} {b + 1} {c + 1}" for a, b, c in model.faces)
    try:
        atomic_write_text(path, "\n".join(lines) + "\n")
    except OSError as e:
        raise OSError(f"cannot write {path}: {e}") from e


# ---------------------------------------------------------------------------
# argument plumbing


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _bool_flag(value):
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {value!r}")


def _add_fit_flags(sp):
    sp.add_argument("--no-reweight", action="store_true", help="disable landmark reweighting")
    sp.add_argument("--lambda-id", type=float, default=1e-3, metavar="F")
    sp.add_argument("--lambda-exp", type=float, default=1e-3, metavar="F")
    sp.add_argument("--max-outer", type=int, default=5, metavar="N")
    sp.add_argument("--max-pose-iters", type=int, default=10, metavar="N")


def _config_from(args):
    return FitConfig(
        max_outer=args.max_outer,
        max_pose_iters=args.max_pose_iters,
        lambda_id=args.lambda_id,
        lambda_exp=args.lambda_exp,
        reweight=not args.no_reweight,
    )


def _build_parser():
    parser = _Parser(prog="morphfit", description="Morphable-model landmark fitting tools")
    parser.add_argument("--version", action="version", version=f"morphfit {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("synth-model", parser_class=_Parser, help="generate a synthetic model")
    p.add_argument("-o", "--out", required=True, metavar="PATH")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-vertices", type=int, default=500)
    p.add_argument("--d-id", type=int, default=40)
    p.add_argument("--d-exp", type=int, default=10)
    p.add_argument("--n-landmarks", type=int, default=68)
    p.set_defaults(func=_cmd_synth_model)

    p = sub.add_parser("synth-data", parser_class=_Parser, help="generate synthetic landmarks")
    p.add_argument("-m", "--model", required=True, metavar="PATH")
    p.add_argument("-o", "--out", required=True, metavar="PATH", help="observed .pts output")
    p.add_argument("--truth-out", metavar="PATH", help="also write the noiseless truth .pts")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--yaw-min", type=float, default=0.0, metavar="DEG")
    p.add_argument("--yaw-max", type=float, default=90.0, metavar="DEG")
    p.add_argument("--noise", type=float, default=0.02, metavar="F")
    p.add_argument("--occlude", type=_bool_flag, default=False, metavar="BOOL")
    p.set_defaults(func=_cmd_synth_data)

    p = sub.add_parser("fit", parser_class=_Parser, help="fit a model to landmarks")
    p.add_argument("-m", "--model", required=True, metavar="PATH")
    p.add_argument("-l", "--landmarks", required=True, metavar="PATH")
    _add_fit_flags(p)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("pifr", parser_class=_Parser, help="dual-fit fusion pipeline")
    p.add_argument("-m", "--model", required=True, metavar="PATH")
    p.add_argument("-l", "--landmarks", required=True, metavar="PATH")
    p.add_argument("--mode", choices=("full", "shape-only"), default="full")
    _add_fit_flags(p)
    p.set_defaults(func=_cmd_pifr)

    p = sub.add_parser("bench", parser_class=_Parser, help="run the synthetic benchmark")
    p.add_argument("-m", "--model", required=True, metavar="PATH")
    p.add_argument("-o", "--out", metavar="PATH", help="CSV output path (default: stdout)")
    p.add_argument("--trials", type=int, default=200, metavar="INT", help="trials per yaw bin")
    p.add_argument("--noise", type=float, default=0.02, metavar="F")
    p.add_argument("--occlude", type=_bool_flag, default=True, metavar="BOOL")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("full", "shape-only"), default="shape-only",
                   help="fusion mode for the pifr backend")
    p.add_argument("--workers", type=int, default=1, metavar="INT")
    _add_fit_flags(p)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("eval", parser_class=_Parser, help="score estimated landmarks against truth")
    p.add_argument("--truth", required=True, metavar="PATH")
    p.add_argument("--est", required=True, metavar="PATH")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("export-obj", parser_class=_Parser, help="export a shape as OBJ")
    p.add_argument("-m", "--model", required=True, metavar="PATH")
    p.add_argument("-o", "--out", required=True, metavar="PATH")
    p.add_argument("--params", metavar="PATH", help="JSON with alpha_id/alpha_exp (e.g. fit output)")
    p.set_defaults(func=_cmd_export_obj)

    return parser


def _params_json(pv):
    return {
        "f": pv.f,
        "pitch": pv.pitch,
        "yaw": pv.yaw,
        "roll": pv.roll,
        "t": pv.t.tolist(),
        "alpha_id": pv.alpha_id.tolist(),
        "alpha_exp": pv.alpha_exp.tolist(),
    }


def _read_pts_file(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise OSError(f"cannot read {path}: {e}") from e
    try:
        return parse_pts(text)
    except ParseError as e:
        raise ParseError(f"{path}: {e}") from None


def _cmd_synth_model(args):
    model = make_synthetic_model(
        args.seed,
        n_vertices=args.n_vertices,
        d_id=args.d_id,
        d_exp=args.d_exp,
        K=args.n_landmarks,
    )
    save_model(model, args.out)
    return 0


def _cmd_synth_data(args):
    model = load_model(args.model)
    inst = synth_instance(
        model,
        args.seed,
        (math.radians(args.yaw_min), math.radians(args.yaw_max)),
        noise_sigma_frac=args.noise,
        occlude=args.occlude,
    )
    atomic_write_text(args.out, write_pts(inst.observed))
    if args.truth_out:
        atomic_write_text(args.truth_out, write_pts(inst.truth_landmarks))
    summary = {
        "seed": inst.seed,
        "yaw_deg": math.degrees(inst.truth.yaw),
        "pitch_deg": math.degrees(inst.truth.pitch),
        "roll_deg": math.degrees(inst.truth.roll),
        "f": inst.truth.f,
        "visible": int(np.count_nonzero(inst.observed.visibility)),
        "n_landmarks": inst.observed.n,
    }
    print(json.dumps(summary, indent=2))
    return 0


def _cmd_fit(args):
    model = load_model(args.model)
    observed = _read_pts_file(args.landmarks)
    result = fit(model, observed, _config_from(args))
    out = {
        "params": _params_json(result.params),
        "loss": result.loss,
        "weighted_loss": result.weighted_loss,
        "iterations": result.iterations,
        "converged": result.converged,
        "backend": get_backend(),
    }
    print(json.dumps(out, indent=2))
    return 0


def _cmd_pifr(args):
    model = load_model(args.model)
    observed = _read_pts_file(args.landmarks)
    result = pifr_fit(model, observed, _config_from(args), mode=args.mode)
    out = {
        "mode": args.mode,
        "w1": result.w1,
        "w2": result.w2,
        "fused": _params_json(result.fused),
        "frontal_loss": result.frontal_fit.loss,
        "original_loss": result.original_fit.loss,
        "backend": get_backend(),
    }
    print(json.dumps(out, indent=2))
    return 0


def _cmd_bench(args):
    model = load_model(args.model)
    report = run_benchmark(
        model,
        args.trials,
        args.noise,
        _config_from(args),
        occlude=args.occlude,
        master_seed=args.seed,
        mode=args.mode,
        workers=args.workers,
    )
    csv = report.to_csv()
    if args.out:
        atomic_write_text(args.out, csv)
    else:
        sys.stdout.write(csv)
    return 0


def _cmd_eval(args):
    truth = _read_pts_file(args.truth)
    est = _read_pts_file(args.est)
    out = {
        "mem": mem([truth], [est]),
        "mem_normalized": mem_normalized([truth], [est]),
        "n_landmarks": truth.n,
    }
    print(json.dumps(out, indent=2))
    return 0


def _cmd_export_obj(args):
    model = load_model(args.model)
    if args.params:
        try:
            with open(args.params, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as e:
            raise OSError(f"cannot read {args.params}: {e}") from e
        except json.JSONDecodeError as e:
            raise ParseError(f"{args.params}: invalid JSON at line {e.lineno}: {e.msg}") from None
        if isinstance(doc, dict) and "params" in doc:
            doc = doc["params"]
        try:
            coeffs = Coefficients(np.asarray(doc["alpha_id"]), np.asarray(doc["alpha_exp"]))
        except (KeyError, TypeError, ValueError):
            raise ParseError(f"{args.params}: expected alpha_id and alpha_exp arrays") from None
    else:
        coeffs = Coefficients.zeros(model)
    export_obj(model, coeffs, args.out)
    return 0


def main(argv=None):
    """Dispatch a command line; returns the process exit status."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    if getattr(args, "func", None) is None:
        parser.print_help(sys.stderr)
        return 1
    try:
        return args.func(args)
    except (ParseError, ValidationError, InvalidArgumentError, InfeasibleInputError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except MorphfitError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def entry():
    raise SystemExit(main(sys.argv[1:]))
