"""Command-line entry point: ``snowflake-embed <subcommand> ...``.

Exit status: 0 success, 1 invalid input or flags, 2 certification budget
exhausted, 3 internal invariant violation.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .audit import llr_bound
from .embedder import certify, derive_params, holder_check, measure_distortion
from .exceptions import DegenerateImage, InvariantViolation, SnowflakeError, ValidationError
from .heisenberg import (
    HeisSample,
    image_doubling,
    lattice_ball,
    lower_bound_series,
    random_sample,
    sample_embed,
)
from .metric import estimate_doubling, greedy_net, load_space, resolve_doubling
from .partitions import BETA_MAX, padding_audit

EXIT_OK, EXIT_INVALID, EXIT_BUDGET, EXIT_INTERNAL = 0, 1, 2, 3

# Flags that never change results and are kept out of recorded configs.
_UNRECORDED = {"threads", "func", "out", "report"}


def _env_seed():
    raw = os.environ.get("SNOWFLAKE_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ValidationError(f"SNOWFLAKE_SEED must be an integer, got {raw!r}") from None


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _emit(doc, path):
    text = _dump(doc)
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _config(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in _UNRECORDED}


def _header(args):
    return {"version": __version__, "config": _config(args)}


def _k_provenance(est):
    return {"value": est.K_est, "method": est.method, "probes": est.samples}


def _require(cond, message):
    if not cond:
        raise ValidationError(message)


def cmd_embed(args):
    _require(0 < args.epsilon < 0.5, f"--epsilon must lie in (0, 1/2), got {args.epsilon}")
    _require(0 < args.theta <= 1, f"--theta must lie in (0, 1], got {args.theta}")
    _require(args.K is None or args.K >= 2, f"--K must be at least 2, got {args.K}")
    _require(args.budget >= 0, "--budget must be nonnegative")
    _require(args.dim is None or args.dim >= 1, "--dim must be positive")
    _require(0 < args.tail_tol < 1, "--tail-tol must lie in (0, 1)")
    _require(args.c > 0 and args.c_star > 0, "--c and --c-star must be positive")

    space = load_space(args.input)
    est = resolve_doubling(space, args.K)
    params = derive_params(
        est.K_est,
        args.epsilon,
        args.theta,
        c=args.c,
        c_star=args.c_star,
        d_min=space.d_min,
        tail_tol=args.tail_tol,
        dimension_override=args.dim,
    )
    result, cert = certify(space, params, seed=args.seed, budget=args.budget, threads=args.threads)
    holder = holder_check(result)
    try:
        distortion = measure_distortion(result).to_dict()
    except DegenerateImage as exc:
        distortion = {"error": str(exc), "distortion": math.inf}

    if args.out:
        np.savetxt(args.out, result.F, fmt="%.17g", delimiter=",")
    report = _header(args)
    report.update(
        {
            "K": _k_provenance(est),
            "params": params.to_dict(),
            "certification": cert.to_dict(),
            "holder": holder.to_dict(),
            "distortion": distortion,
            "truncation_error": result.truncation_error,
            "n_points": space.n,
            "scale_factor": space.scale_factor,
        }
    )
    _emit(report, args.report)
    return EXIT_OK if cert.certified else EXIT_BUDGET


def _parse_subset(text):
    if text is None:
        return None
    text = text.strip()
    try:
        if text.startswith("["):
            return [int(x) for x in json.loads(text)]
        return [int(x) for x in text.split(",") if x.strip()]
    except (ValueError, json.JSONDecodeError):
        raise ValidationError(f"--subset must be a comma-separated index list, got {text!r}") from None


def cmd_audit(args):
    subset = _parse_subset(args.subset)
    qpath = Path(args.Q)
    _require(qpath.is_file(), f"Q file not found: {qpath}")
    try:
        Q = json.loads(qpath.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{qpath}: invalid JSON ({exc.msg})") from None
    if isinstance(Q, dict):
        Q = Q.get("Q")
    space = load_space(args.input)
    doc = _header(args)
    try:
        cert = llr_bound(space, subset, Q)
    except ValidationError as exc:
        doc.update({"bound": None, "valid": False, "details": str(exc)})
        _emit(doc, args.out)
        return EXIT_INVALID
    doc.update({"bound": cert.bound, "valid": True, "details": cert.to_dict()})
    _emit(doc, args.out)
    return EXIT_OK


def cmd_partition_demo(args):
    _require(args.scale > 0, f"--scale must be positive, got {args.scale}")
    _require(0 < args.beta < BETA_MAX, f"--beta must lie in (0, 1/40), got {args.beta}")
    _require(args.K is None or args.K >= 2, f"--K must be at least 2, got {args.K}")
    _require(args.trials >= 1, "--trials must be positive")
    space = load_space(args.input)
    rep = padding_audit(space, args.scale / space.scale_factor, args.K, args.beta, args.trials, args.seed)
    doc = _header(args)
    doc.update(rep.to_dict())
    doc["scale"] = args.scale
    doc["K"] = {"value": rep.K, "method": rep.K_method}
    _emit(doc, args.out)
    return EXIT_OK


def cmd_heisenberg(args):
    _require(args.n >= 1, "--n must be positive")
    _require(0 < args.epsilon < 0.5, f"--epsilon must lie in (0, 1/2), got {args.epsilon}")
    _require(args.sample_size >= 2, "--sample-size must be at least 2")
    _require(args.m >= 1, "--m must be positive")
    pts = random_sample(args.sample_size, args.n, args.seed)
    emb = sample_embed(HeisSample(pts, args.epsilon))
    doc = _header(args)
    doc.update(
        {
            "ratios": {"min": emb.ratio_min, "max": emb.ratio_max},
            "ratio_floor": args.epsilon ** ((1 - args.epsilon) / 2),
            "kernel_min_eig": emb.kernel_min_eig,
            "kernel_trace": emb.kernel_trace,
            "max_distance_error": emb.max_distance_error,
            "doubling_estimate": image_doubling(emb),
            "doubling_ceiling": 2.0 ** (16 * (args.n + 1)),
            "series_value": lower_bound_series(args.epsilon, args.m),
            "lattice_ball_size": len(lattice_ball(args.m)),
        }
    )
    _emit(doc, args.out)
    return EXIT_OK


def cmd_net(args):
    _require(args.delta > 0, f"--delta must be positive, got {args.delta}")
    space = load_space(args.input)
    net = greedy_net(space, args.delta / space.scale_factor)
    doc = _header(args)
    doc.update(
        {
            "members": [int(m) for m in net.members],
            "size": len(net),
            "separated": net.is_separated(),
            "covering": net.is_covering(),
        }
    )
    _emit(doc, args.out)
    return EXIT_OK


def cmd_doubling(args):
    _require(args.budget is None or args.budget >= 1, "--budget must be positive")
    space = load_space(args.input)
    est = estimate_doubling(space, args.budget)
    doc = _header(args)
    doc.update(
        {
            "K_est": est.K_est,
            "method": est.method,
            "samples": est.samples,
            "witness": None if est.witness is None else {"center": est.witness[0], "radius": est.witness[1] * space.scale_factor},
        }
    )
    _emit(doc, args.out)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="snowflake-embed",
        description="Low-dimensional embeddings of snowflaked doubling metrics, with audits.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        if seed:
            p.add_argument("--seed", type=int, default=None, help="default: $SNOWFLAKE_SEED or 0")

    p = sub.add_parser("embed", help="certified snowflake embedding")
    p.add_argument("--input", required=True)
    p.add_argument("--epsilon", type=float, default=0.25)
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--K", type=float, default=None, help="doubling constant (default: estimated)")
    p.add_argument("--c", type=float, default=8.0)
    p.add_argument("--c-star", dest="c_star", type=float, default=4096.0)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--budget", type=int, default=10_000)
    p.add_argument("--tail-tol", dest="tail_tol", type=float, default=1e-6)
    p.add_argument("--report", help="JSON report path (default: stdout)")
    common(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("audit", help="LLR distortion lower bound")
    p.add_argument("--input", required=True)
    p.add_argument("--Q", required=True, help="JSON file holding the matrix")
    p.add_argument("--subset", default=None, help="comma-separated point indices")
    common(p, seed=False)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("partition-demo", help="padding probability of random partitions")
    p.add_argument("--input", required=True)
    p.add_argument("--scale", type=float, required=True, help="s, in input distance units")
    p.add_argument("--K", type=float, default=None)
    p.add_argument("--beta", type=float, default=1 / 64)
    p.add_argument("--trials", type=int, default=10_000)
    common(p)
    p.set_defaults(func=cmd_partition_demo)

    p = sub.add_parser("heisenberg", help="Heisenberg snowflake sample")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--epsilon", type=float, default=0.25)
    p.add_argument("--sample-size", dest="sample_size", type=int, default=64)
    p.add_argument("--m", type=int, default=10)
    common(p)
    p.set_defaults(func=cmd_heisenberg)

    p = sub.add_parser("net", help="greedy net")
    p.add_argument("--input", required=True)
    p.add_argument("--delta", type=float, required=True, help="mesh, in input distance units")
    common(p, seed=False)
    p.set_defaults(func=cmd_net)

    p = sub.add_parser("doubling", help="greedy doubling-constant estimate")
    p.add_argument("--input", required=True)
    p.add_argument("--budget", type=int, default=None, help="maximum number of probes")
    common(p, seed=False)
    p.set_defaults(func=cmd_doubling)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _require(args.threads >= 1, "--threads must be positive")
        if hasattr(args, "seed") and args.seed is None:
            args.seed = _env_seed()
        return args.func(args)
    except InvariantViolation as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SnowflakeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
