"""Command-line entry point: ``sketchtrack <command> [options]``.

Exit codes: 0 on success, 1 on configuration or input errors, 2 when the
property suite reports a failure.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .array_model import ArrayGeometry, build_grid
from .channel import (ScatteringProfile, read_batch, read_matrix, simulate_batch, snr_to_sigma,
                      true_covariance, write_batch, write_matrix)
from .errors import OutputUnwritable, SketchTrackError
from .experiments import ExperimentConfig, fmt, run_experiment
from .metrics import subspace_gamma
from .selftest import run_checks
from .solver import CovarianceEstimate, SolverConfig, reconstruct_covariance, run_fbs, run_fista
from .svt import SvtConfig, svt_complete_batch, svt_subspace
from .tracking import SubspaceTracker, TrackerConfig, dominant_support

EXIT_OK, EXIT_CONFIG, EXIT_PROPERTY = 0, 1, 2


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=None, help="random seed")
    p.add_argument("--out", default=None, help="output file or directory")
    p.add_argument("--threads", type=int, default=1, help="worker processes for trials")
    p.add_argument("--full-fidelity", action="store_true",
                   help="use 100 trials per cell instead of the config value")
    return p


def _grid_args(p: argparse.ArgumentParser):
    p.add_argument("--G", type=int, default=None, help="grid size (default 2M)")
    p.add_argument("--theta-max-deg", type=float, default=60.0)


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="sketchtrack", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="draw a sketch batch to a file")
    s.add_argument("--M", type=int, default=64)
    s.add_argument("--theta-max-deg", type=float, default=60.0)
    s.add_argument("--m", type=int, default=16)
    s.add_argument("--T", type=int, default=100)
    s.add_argument("--snr-db", type=float, default=10.0)
    s.add_argument("--band-deg", type=float, nargs=2, default=[10.0, 30.0])
    s.add_argument("--sampler", choices=["binary", "phase"], default="binary")
    s.add_argument("--bits", type=int, default=5)
    s.add_argument("--cov-out", default=None, help="also write the true covariance matrix")

    e = sub.add_parser("estimate", parents=[common], help="batch estimate from a sketch file")
    e.add_argument("batch")
    _grid_args(e)
    e.add_argument("--algorithm", choices=["fista", "fbs"], default="fista")
    e.add_argument("--max-iters", type=int, default=500)
    e.add_argument("--rel-tol", type=float, default=1e-6)
    e.add_argument("--truth", default=None, help="true covariance matrix file, reports gamma")

    t = sub.add_parser("track", parents=[common], help="stream a sketch file through the tracker")
    t.add_argument("batch")
    _grid_args(t)
    t.add_argument("--window", type=int, default=100)
    t.add_argument("--k-inner", type=int, default=1)
    t.add_argument("--q", type=int, default=4)
    t.add_argument("--truth", default=None)
    t.add_argument("--strengths", default=None, help="wide CSV of per-row strengths")

    v = sub.add_parser("svt", parents=[common], help="SVT completion of a sketch file")
    v.add_argument("batch")
    v.add_argument("--tau", type=float, default=None)
    v.add_argument("--delta", type=float, default=None)
    v.add_argument("--max-iters", type=int, default=1000)
    v.add_argument("--tol", type=float, default=1e-4)
    v.add_argument("--truth", default=None)

    x = sub.add_parser("experiment", parents=[common], help="run a YAML experiment config")
    x.add_argument("config")

    sub.add_parser("selftest", parents=[common], help="run the property suite")
    return ap


def _grid_for(M: int, args):
    geom = ArrayGeometry.ula(M, math.radians(args.theta_max_deg))
    return build_grid(geom, args.G or 2 * M)


def _out_dir(args, default: str) -> Path:
    out = Path(args.out or default)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputUnwritable(f"cannot create {out}: {exc}") from None
    return out


def _writer(path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fh = path.open("w", encoding="utf-8", newline="")
    except OSError as exc:
        raise OutputUnwritable(f"cannot write {path}: {exc}") from None
    return fh, csv.writer(fh, lineterminator="\n")


def cmd_simulate(args) -> int:
    geom = ArrayGeometry.ula(args.M, math.radians(args.theta_max_deg))
    lo, hi = (math.radians(v) for v in args.band_deg)
    prof = ScatteringProfile.uniform_band(lo, hi)
    rng = np.random.default_rng(args.seed or 0)
    batch, _ = simulate_batch(prof, geom, args.T, args.m, snr_to_sigma(args.snr_db), rng,
                              sampler=args.sampler, bits=args.bits)
    out = Path(args.out or "sketches.skch")
    write_batch(out, batch)
    if args.cov_out:
        write_matrix(args.cov_out, true_covariance(prof, geom))
    print(f"wrote {out} (m={batch.m}, M={batch.M}, T={batch.T})")
    return EXIT_OK


def cmd_estimate(args) -> int:
    batch = read_batch(args.batch)
    grid = _grid_for(batch.M, args)
    cfg = SolverConfig(max_iters=args.max_iters, rel_tol=args.rel_tol, track_kkt=True)
    res = (run_fista if args.algorithm == "fista" else run_fbs)(batch, grid, cfg)
    est = reconstruct_covariance(res.W, grid, batch.m, batch.T)
    out = _out_dir(args, "estimate")
    write_matrix(out / "W.cmat", res.W)
    fh, w = _writer(out / "trace.csv")
    with fh:
        w.writerow(["iter", "objective", "kkt_residual"])
        for k, (f, r) in enumerate(zip(res.objective_trace, res.kkt_trace), start=1):
            w.writerow([k, fmt(f), fmt(r)])
    fh, w = _writer(out / "weights.csv")
    with fh:
        w.writerow(["index", "angle_deg", "weight"])
        for i, (a, s) in enumerate(zip(grid.angles, est.weights)):
            w.writerow([i, fmt(math.degrees(a)), fmt(s)])
    msg = f"iters={res.iters} converged={res.converged} kkt_residual={res.kkt_residual:.3g}"
    if args.truth:
        msg += f" gamma={subspace_gamma(read_matrix(args.truth), est):.6f}"
    print(msg)
    return EXIT_OK


def cmd_track(args) -> int:
    batch = read_batch(args.batch)
    grid = _grid_for(batch.M, args)
    truth = read_matrix(args.truth) if args.truth else None
    tracker = SubspaceTracker(args.window, grid, TrackerConfig(args.k_inner))
    fh, w = _writer(Path(args.out or "track.csv"))
    sfh = sw = None
    if args.strengths:
        sfh, sw = _writer(Path(args.strengths))
        sw.writerow(["t"] + [f"s{i}" for i in range(grid.G)])
    with fh:
        w.writerow(["t", "gamma", "kkt_residual", "support"])
        for t, op in enumerate(batch.operators):
            weights = tracker.push(batch.X[:, t], op)
            g = None
            if truth is not None:
                g = subspace_gamma(truth, CovarianceEstimate(grid, weights))
            idx, strengths = dominant_support(tracker.W[:, : tracker.count], args.q)
            w.writerow([t + 1, fmt(g), fmt(tracker.kkt_residual()),
                        ";".join(str(int(i)) for i in idx)])
            if sw is not None:
                sw.writerow([t + 1] + [fmt(s) for s in strengths])
    if sfh is not None:
        sfh.close()
    return EXIT_OK


def cmd_svt(args) -> int:
    batch = read_batch(args.batch)
    info = svt_complete_batch(batch, SvtConfig(args.tau, args.delta, args.max_iters, args.tol),
                              return_info=True)
    out = _out_dir(args, "svt")
    S = svt_subspace(info.X)
    write_matrix(out / "completed.cmat", info.X)
    write_matrix(out / "covariance.cmat", S)
    msg = f"iters={info.iters} residual={info.residual:.3g}"
    if args.truth:
        msg += f" gamma={subspace_gamma(read_matrix(args.truth), S):.6f}"
    print(msg)
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.full_fidelity:
        cfg = cfg.with_full_fidelity()
    report = run_experiment(cfg, args.out, args.threads)
    for f in report.files:
        print(f"wrote {f}")
    if not report.passed:
        for r in report.details:
            if not r.passed:
                print(f"FAIL {r.name}: {r.detail}", file=sys.stderr)
        return EXIT_PROPERTY
    return EXIT_OK


def cmd_selftest(args) -> int:
    results = run_checks(seed=args.seed or 0)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    if args.out:
        fh, w = _writer(Path(args.out))
        with fh:
            w.writerow(["check", "passed", "detail"])
            for r in results:
                w.writerow([r.name, r.passed, r.detail])
    return EXIT_OK if all(r.passed for r in results) else EXIT_PROPERTY


COMMANDS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "track": cmd_track,
            "svt": cmd_svt, "experiment": cmd_experiment, "selftest": cmd_selftest}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except SketchTrackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
