"""Declarative simulation experiments and their CSV reports.

A config is a YAML mapping (schema in ``docs/config.md``).  Every
``(cell, trial)`` pair draws from its own generator,
``SeedSequence(seed, spawn_key=(cell, trial))``, so results do not depend on
how trials are scheduled across worker processes.
"""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .array_model import ArrayGeometry, AngularGrid, build_grid
from .channel import (ScatteringProfile, draw_operator, make_sketch, sample_channel,
                      simulate_batch, snr_to_sigma, true_covariance)
from .errors import ConfigInvalid, ConfigParse, OutputUnwritable, SketchTrackError
from .metrics import power_profile, subspace_gamma
from .solver import CovarianceEstimate, SolverConfig, reconstruct_covariance, run_fista
from .svt import SvtConfig, svt_complete_batch, svt_subspace
from .tracking import SubspaceTracker, TrackerConfig, band_rows, dominant_support, recovery_time

EXPERIMENTS = ("GammaVsSnr", "SvtCompare", "Tracking", "SupportImage", "PropertySuite")
FULL_FIDELITY_TRIALS = 100
GAMMA_HEADER = ("sampler", "T", "snr_db", "trial", "gamma", "iters", "runtime_ms")


def fmt(x) -> str:
    """CSV cell: floats with 9 significant digits, everything else via ``str``."""
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.9g}"
    return str(x)


def rng_for(seed: int, cell: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(cell, trial)))


# --- config -------------------------------------------------------------------

def _take(d: dict, cls, where: str) -> dict:
    if d is None:
        return {}
    if not isinstance(d, dict):
        raise ConfigParse(f"{where} must be a mapping")
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ConfigParse(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")
    return dict(d)


@dataclass
class ProfileSpec:
    """Either a band ``[lo, hi]`` in degrees or explicit ``[angle_deg, power]`` pairs."""

    band_deg: list | None = field(default_factory=lambda: [10.0, 30.0])
    components: list | None = None
    total_power: float = 1.0
    n_points: int = 100

    @classmethod
    def from_dict(cls, d, where="profile") -> "ProfileSpec":
        d = _take(d, cls, where)
        if "components" in d and "band_deg" not in d:
            d["band_deg"] = None
        spec = cls(**d)
        spec.validate(where)
        return spec

    def validate(self, where="profile"):
        if self.components:
            for c in self.components:
                if len(c) != 2 or float(c[1]) < 0:
                    raise ConfigInvalid(f"{where}.components entries are [angle_deg, power >= 0]")
        elif self.band_deg is None or len(self.band_deg) != 2:
            raise ConfigInvalid(f"{where} needs band_deg: [lo, hi] or components")
        elif float(self.band_deg[0]) > float(self.band_deg[1]):
            raise ConfigInvalid(f"{where}.band_deg is reversed")
        if self.n_points < 1 or self.total_power < 0:
            raise ConfigInvalid(f"{where}: n_points >= 1 and total_power >= 0 required")

    def build(self) -> ScatteringProfile:
        if self.components:
            ang = [math.radians(float(a)) for a, _ in self.components]
            return ScatteringProfile.discrete(ang, [float(p) for _, p in self.components])
        lo, hi = (math.radians(float(v)) for v in self.band_deg)
        return ScatteringProfile.uniform_band(lo, hi, self.total_power, self.n_points)

    def rows(self, grid: AngularGrid, slack: int = 0) -> np.ndarray:
        if self.components:
            ang = np.radians([float(a) for a, _ in self.components])
            return band_rows(grid, ang.min(), ang.max(), slack)
        lo, hi = (math.radians(float(v)) for v in self.band_deg)
        return band_rows(grid, lo, hi, slack)


@dataclass
class TrackingSpec:
    t_tr: int = 200
    horizon: int = 400
    snr_db: float = 10.0
    k_inner: int = 1
    q: int = 4
    log_kkt: bool = True
    strengths: bool = False
    after: ProfileSpec = field(default_factory=lambda: ProfileSpec(band_deg=[-40.0, -20.0]))

    @classmethod
    def from_dict(cls, d) -> "TrackingSpec":
        d = _take(d, cls, "tracking")
        if "after" in d:
            d["after"] = ProfileSpec.from_dict(d["after"], "tracking.after")
        spec = cls(**d)
        if not 1 <= spec.t_tr <= spec.horizon:
            raise ConfigInvalid("tracking needs 1 <= t_tr <= horizon")
        if spec.k_inner < 1 or spec.q < 1:
            raise ConfigInvalid("tracking.k_inner and tracking.q must be >= 1")
        return spec


@dataclass
class SvtSpec:
    T: list = field(default_factory=lambda: [400, 800, 1600])
    m: int = 32
    solver_T: int = 100
    solver_m: int = 16
    tau: float | None = None
    delta: float | None = None
    max_iters: int = 1000
    tol: float = 1e-4

    @classmethod
    def from_dict(cls, d) -> "SvtSpec":
        spec = cls(**_take(d, cls, "svt"))
        spec.config()
        return spec

    def config(self) -> SvtConfig:
        return SvtConfig(self.tau, self.delta, self.max_iters, self.tol)


@dataclass
class ExperimentConfig:
    experiment: str = "GammaVsSnr"
    geometry: dict = field(default_factory=lambda: {"kind": "ula", "M": 64, "theta_max_deg": 60.0})
    G: int | list = 128
    profile: ProfileSpec = field(default_factory=ProfileSpec)
    snr_db: list = field(default_factory=lambda: [-10.0, 0.0, 10.0, 20.0])
    T: list = field(default_factory=lambda: [50, 100, 200])
    m: int = 16
    samplers: list = field(default_factory=lambda: ["binary", "phase"])
    bits: int = 5
    trials: int = 20
    seed: int = 0
    solver: dict = field(default_factory=dict)
    tracking: TrackingSpec = field(default_factory=TrackingSpec)
    svt: SvtSpec = field(default_factory=SvtSpec)
    output: str = "results"
    record_runtime: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = _take(d, cls, "config")
        if "profile" in d:
            d["profile"] = ProfileSpec.from_dict(d["profile"])
        if "tracking" in d:
            d["tracking"] = TrackingSpec.from_dict(d["tracking"])
        if "svt" in d:
            d["svt"] = SvtSpec.from_dict(d["svt"])
        try:
            cfg = cls(**d)
        except TypeError as exc:
            raise ConfigParse(str(exc)) from None
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigParse(f"cannot read config {path}: {exc}") from None
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigParse(f"invalid YAML in {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigParse("config must be a mapping at top level")
        return cls.from_dict(data)

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigInvalid(f"experiment must be one of {', '.join(EXPERIMENTS)}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigInvalid("trials must be a positive integer")
        if any(int(t) != t or t < 1 for t in self.T):
            raise ConfigInvalid("every T must be a positive integer")
        for s in self.samplers:
            if s not in ("binary", "phase"):
                raise ConfigInvalid(f"unknown sampler {s!r}")
        if self.bits < 1:
            raise ConfigInvalid("bits must be >= 1")
        try:
            self.solver_config()
            grid = self.grid()
        except SketchTrackError as exc:
            raise ConfigInvalid(str(exc)) from None
        except (TypeError, KeyError) as exc:
            raise ConfigParse(f"bad geometry/solver section: {exc}") from None
        if not grid.geometry.is_ula:
            raise ConfigInvalid("experiments are defined for ULA geometries")
        sizes = [self.m]
        if self.experiment == "SvtCompare":
            sizes += [self.svt.m, self.svt.solver_m]
        if not all(1 <= m <= grid.geometry.M for m in sizes):
            raise ConfigInvalid("sketch sizes must satisfy 1 <= m <= M")
        for spec in (self.profile, self.tracking.after):
            try:
                spec.build().check_range(grid.geometry)
            except SketchTrackError as exc:
                raise ConfigInvalid(str(exc)) from None

    def geometry_obj(self) -> ArrayGeometry:
        return ArrayGeometry.from_dict(self.geometry)

    def grid(self) -> AngularGrid:
        G = tuple(self.G) if isinstance(self.G, (list, tuple)) else int(self.G)
        return build_grid(self.geometry_obj(), G)

    def solver_config(self) -> SolverConfig:
        extra = {"track_objective": False, **self.solver}
        return SolverConfig(**extra)

    def with_full_fidelity(self) -> "ExperimentConfig":
        return replace(self, trials=max(self.trials, FULL_FIDELITY_TRIALS))


# --- parallel map -------------------------------------------------------------

def _pmap(fn, tasks: list, threads: int) -> list:
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * threads))))


# --- GammaVsSnr ---------------------------------------------------------------

def gamma_trial(task) -> dict:
    """One solve: simulate, run FISTA, score the reconstructed covariance."""
    cfg, cell, trial, sampler, T, snr = task
    geom, grid = cfg.geometry_obj(), cfg.grid()
    prof = cfg.profile.build()
    S = true_covariance(prof, geom)
    rng = rng_for(cfg.seed, cell, trial)
    batch, _ = simulate_batch(prof, geom, T, cfg.m, snr_to_sigma(snr, prof.total_power), rng,
                              sampler=sampler, bits=cfg.bits)
    t0 = time.perf_counter()
    res = run_fista(batch, grid, cfg.solver_config())
    elapsed = (time.perf_counter() - t0) * 1e3
    g = subspace_gamma(S, reconstruct_covariance(res.W, grid, cfg.m, T), power_profile(S))
    return {"sampler": sampler, "T": T, "snr_db": float(snr), "trial": trial, "gamma": g,
            "iters": res.iters, "runtime_ms": elapsed if cfg.record_runtime else None}


def run_gamma_vs_snr(cfg: ExperimentConfig, threads: int = 1) -> list[dict]:
    cells = [(s, int(T), float(snr)) for s in cfg.samplers for T in cfg.T for snr in cfg.snr_db]
    tasks = [(cfg, c, k, *cell) for c, cell in enumerate(cells) for k in range(cfg.trials)]
    return _pmap(gamma_trial, tasks, threads)


def summarize(rows: list[dict], keys: tuple[str, ...]) -> list[dict]:
    """Mean and standard error of ``gamma`` per distinct ``keys`` tuple (first-seen order)."""
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault(tuple(r[k] for k in keys), []).append(r)
    out = []
    for key, rs in groups.items():
        g = np.array([r["gamma"] for r in rs])
        se = float(g.std(ddof=1) / math.sqrt(g.size)) if g.size > 1 else 0.0
        out.append({**dict(zip(keys, key)), "trials": g.size, "gamma_mean": float(g.mean()),
                    "gamma_stderr": se,
                    "iters_mean": float(np.mean([r["iters"] for r in rs]))})
    return out


# --- SvtCompare ---------------------------------------------------------------

SVT_HEADER = ("method", "T", "m", "snr_db", "trial", "gamma", "iters", "runtime_ms")


def svt_trial(task) -> dict:
    cfg, cell, trial, method, T, m, snr = task
    geom, grid = cfg.geometry_obj(), cfg.grid()
    prof = cfg.profile.build()
    S = true_covariance(prof, geom)
    rng = rng_for(cfg.seed, cell, trial)
    batch, _ = simulate_batch(prof, geom, T, m, snr_to_sigma(snr, prof.total_power), rng,
                              sampler="binary", bits=cfg.bits)
    t0 = time.perf_counter()
    if method == "fista":
        res = run_fista(batch, grid, cfg.solver_config())
        est, iters = reconstruct_covariance(res.W, grid, m, T), res.iters
    else:
        info = svt_complete_batch(batch, cfg.svt.config(), return_info=True)
        # the completion lives in the noise-normalised domain; scaling is immaterial to gamma
        est, iters = svt_subspace(info.X), info.iters
    elapsed = (time.perf_counter() - t0) * 1e3
    g = subspace_gamma(S, est, power_profile(S))
    return {"method": method, "T": T, "m": m, "snr_db": float(snr), "trial": trial,
            "gamma": g, "iters": iters, "runtime_ms": elapsed if cfg.record_runtime else None}


def run_svt_compare(cfg: ExperimentConfig, threads: int = 1) -> list[dict]:
    sv = cfg.svt
    cells = [("fista", sv.solver_T, sv.solver_m, float(s)) for s in cfg.snr_db]
    cells += [("svt", int(T), sv.m, float(s)) for T in sv.T for s in cfg.snr_db]
    tasks = [(cfg, c, k, *cell) for c, cell in enumerate(cells) for k in range(cfg.trials)]
    return _pmap(svt_trial, tasks, threads)


# --- Tracking / SupportImage ----------------------------------------------------

@dataclass
class TrackingTrace:
    T: int
    trial: int
    gamma: np.ndarray
    kkt: np.ndarray | None
    support: np.ndarray
    strengths: np.ndarray | None

    def phase(self, t_tr: int) -> np.ndarray:
        """0 before the switch, 1 from step ``t_tr`` on (steps are 1-based)."""
        return (np.arange(1, self.gamma.size + 1) >= t_tr).astype(int)


def tracking_trial(task) -> TrackingTrace:
    """Stream ``horizon`` sketches; the profile switches at step ``t_tr``."""
    cfg, cell, trial, T = task
    tr = cfg.tracking
    geom, grid = cfg.geometry_obj(), cfg.grid()
    profiles = (cfg.profile.build(), tr.after.build())
    covs = [true_covariance(p, geom) for p in profiles]
    pps = [power_profile(S) for S in covs]
    sigma = snr_to_sigma(tr.snr_db, profiles[0].total_power)
    sampler = cfg.samplers[0]
    rng = rng_for(cfg.seed, cell, trial)
    tracker = SubspaceTracker(T, grid, TrackerConfig(tr.k_inner))

    gam = np.empty(tr.horizon)
    kkt = np.empty(tr.horizon) if tr.log_kkt else None
    sup = np.empty((tr.horizon, tr.q), dtype=int)
    strengths = np.empty((tr.horizon, grid.G)) if tr.strengths else None
    for step in range(1, tr.horizon + 1):
        ph = int(step >= tr.t_tr)
        op = draw_operator(sampler, cfg.m, geom.M, rng, cfg.bits, slot=step)
        h = sample_channel(profiles[ph], geom, rng)
        w = tracker.push(make_sketch(h, op, sigma, rng), op)
        i = step - 1
        gam[i] = subspace_gamma(covs[ph], CovarianceEstimate(grid, w), pps[ph])
        if kkt is not None:
            kkt[i] = tracker.kkt_residual()
        idx, s = dominant_support(tracker.W[:, : tracker.count], tr.q)
        sup[i] = idx
        if strengths is not None:
            strengths[i] = s
    return TrackingTrace(T, trial, gam, kkt, sup, strengths)


def run_tracking(cfg: ExperimentConfig, threads: int = 1) -> list[TrackingTrace]:
    tasks = [(cfg, c, k, int(T)) for c, T in enumerate(cfg.T) for k in range(cfg.trials)]
    return _pmap(tracking_trial, tasks, threads)


def tracking_summary(cfg: ExperimentConfig, traces: list[TrackingTrace]) -> list[dict]:
    t_tr = cfg.tracking.t_tr
    out = []
    for tr in traces:
        post = tr.gamma[t_tr - 1: t_tr + 9]
        out.append({"T": tr.T, "trial": tr.trial,
                    "recovery_delay": recovery_time(tr.gamma, t_tr),
                    "steady_gamma": float(np.median(tr.gamma[max(0, t_tr - 51): t_tr - 1]))
                    if t_tr > 1 else None,
                    "min_gamma_after_switch": float(post.min()) if post.size else None})
    return out


def support_hit_rate(cfg: ExperimentConfig, trace: TrackingTrace, slack: int = 0) -> tuple[float, float]:
    """Fraction of post-convergence steps whose top-q support lies in the true band rows.

    A phase counts as converged ``T`` steps after it starts (one full window
    of its own sketches).  Returns the rate for each phase.
    """
    grid = cfg.grid()
    t_tr, horizon = cfg.tracking.t_tr, cfg.tracking.horizon
    rows = (cfg.profile.rows(grid, slack), cfg.tracking.after.rows(grid, slack))
    starts = (1, t_tr)
    ends = (t_tr - 1, horizon)
    rates = []
    for ph in (0, 1):
        steps = range(starts[ph] + trace.T, ends[ph] + 1)
        hits = [np.isin(trace.support[s - 1], rows[ph]).all() for s in steps]
        rates.append(float(np.mean(hits)) if hits else math.nan)
    return rates[0], rates[1]


# --- writers --------------------------------------------------------------------

def _open_out(path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return path.open("w", encoding="utf-8", newline="")
    except OSError as exc:
        raise OutputUnwritable(f"cannot write {path}: {exc}") from None


def write_csv(path: Path, header, rows) -> Path:
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            vals = [r[h] for h in header] if isinstance(r, dict) else list(r)
            w.writerow([fmt(v) for v in vals])
    return path


def _write_tracking(cfg, traces, out: Path) -> list[Path]:
    q = cfg.tracking.q
    files = []
    log = out / "tracking.csv"
    with _open_out(log) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["T", "trial", "t", "phase", "gamma", "kkt_residual", "support"])
        for tr in traces:
            ph = tr.phase(cfg.tracking.t_tr)
            for i in range(tr.gamma.size):
                w.writerow([tr.T, tr.trial, i + 1, ph[i], fmt(tr.gamma[i]),
                            fmt(tr.kkt[i]) if tr.kkt is not None else "",
                            ";".join(str(int(v)) for v in tr.support[i, :q])])
    files.append(log)
    summ = tracking_summary(cfg, traces)
    files.append(write_csv(out / "tracking_summary.csv",
                           ("T", "trial", "recovery_delay", "steady_gamma",
                            "min_gamma_after_switch"), summ))
    if any(tr.strengths is not None for tr in traces):
        files.append(_write_strengths(cfg, traces, out / "tracking_strengths.csv"))
    return files


def _write_strengths(cfg, traces, path: Path) -> Path:
    G = cfg.grid().G
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["T", "trial", "t", "phase"] + [f"s{i}" for i in range(G)])
        for tr in traces:
            ph = tr.phase(cfg.tracking.t_tr)
            for i in range(tr.gamma.size):
                w.writerow([tr.T, tr.trial, i + 1, ph[i]] + [fmt(v) for v in tr.strengths[i]])
    return path


# --- entry point ------------------------------------------------------------------

@dataclass
class ExperimentReport:
    files: list
    passed: bool = True
    details: list = field(default_factory=list)


def run_experiment(cfg: ExperimentConfig, out_dir=None, threads: int = 1) -> ExperimentReport:
    """Run ``cfg`` and write its CSV files under ``out_dir`` (default ``cfg.output``)."""
    out = Path(out_dir if out_dir is not None else cfg.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputUnwritable(f"cannot create {out}: {exc}") from None
    if not os.access(out, os.W_OK):
        raise OutputUnwritable(f"{out} is not writable")
    threads = max(1, int(threads))
    kind = cfg.experiment

    if kind == "GammaVsSnr":
        rows = run_gamma_vs_snr(cfg, threads)
        summ = summarize(rows, ("sampler", "T", "snr_db"))
        return ExperimentReport([
            write_csv(out / "gamma_vs_snr.csv", GAMMA_HEADER, rows),
            write_csv(out / "gamma_vs_snr_summary.csv",
                      ("sampler", "T", "snr_db", "trials", "gamma_mean", "gamma_stderr",
                       "iters_mean"), summ)])
    if kind == "SvtCompare":
        rows = run_svt_compare(cfg, threads)
        summ = summarize(rows, ("method", "T", "m", "snr_db"))
        return ExperimentReport([
            write_csv(out / "svt_compare.csv", SVT_HEADER, rows),
            write_csv(out / "svt_compare_summary.csv",
                      ("method", "T", "m", "snr_db", "trials", "gamma_mean", "gamma_stderr",
                       "iters_mean"), summ)])
    if kind == "Tracking":
        return ExperimentReport(_write_tracking(cfg, run_tracking(cfg, threads), out))
    if kind == "SupportImage":
        tr = replace(cfg.tracking, strengths=True)
        img = replace(cfg, tracking=tr, T=[int(cfg.T[0])], trials=1)
        traces = run_tracking(img, threads)
        return ExperimentReport([_write_strengths(img, traces, out / "support_image.csv")])
    # PropertySuite
    from .selftest import run_checks

    results = run_checks(seed=cfg.seed)
    path = write_csv(out / "property_suite.csv", ("check", "passed", "detail"),
                     [(r.name, r.passed, r.detail) for r in results])
    return ExperimentReport([path], all(r.passed for r in results), results)
