"""Config-driven experiments comparing simulated local times to limit laws.

Each experiment samples environments and diffusions in the unit-valley
frame: the potential is multiplied by alpha, the horizon is exp(alpha) /
alpha^4, and space/local-time statistics map back through the exact
alpha^2 scalings.  Replicas start at the valley bottom; the travel phase
from the origin is asymptotically negligible for every statistic tested
here but costs exp(2*alpha*|W(m)|) driving steps under a fixed-dt
time-change simulation, which no desk-scale budget survives.

Replica seeds derive as SeedSequence(master_seed, spawn_key=(kind,
alpha_index, replica_index, stream)), so reports are reproducible at any
worker count, and experiments with identical sampling parameters share
replica computations within a process.
"""

from __future__ import annotations

import dataclasses
import json
import math
import multiprocessing
import os
import time

import numpy as np

from . import bessel
from .environment import (
    ShiftedPotential,
    WindowCapExceeded,
    crossing_points,
    find_valley_with_widening,
    gibbs_weight_integral,
    sample_environment,
)
from .diffusion import (
    ScaleMap,
    StepBudgetExceeded,
    profile_value_at,
    simulate_localtime_summary,
)
from .stats import SampleSet, bootstrap_mean_ci, ks_one_sample, ks_two_sample, trend_check

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "run_identity_check",
    "run_sup_localtime",
    "run_profile_marginals",
    "run_env_functional_approx",
    "run_exponent_law",
    "run_position_density",
    "run_all",
    "exponent_reference_cdf",
]

_KIND_REPLICA = 0
_KIND_REFERENCE = 1
_KIND_ALIAS = 2
_KIND_BOOT = 3


def _rng(master_seed, *key):
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=tuple(key)))


def default_dt(alpha):
    """Per-alpha driving step targeting a roughly constant step count.

    The driving time to burn grows like (e^alpha / alpha^2)^2; the clip
    keeps fine resolution where it is cheap and caps coarsening where the
    statistic laws were measured stable.
    """
    ell = math.exp(alpha) / (3.2 * alpha * alpha)
    return float(np.clip(2.2 * ell * ell / 2.3e6, 1e-4, 5e-3))


def default_step_budget(alpha, dt):
    ell = math.exp(alpha) / (3.2 * alpha * alpha)
    return int(np.clip(55 * 2.2 * ell * ell / dt, 4e7, 4.5e8))


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of one experiment run; everything that affects sampling."""

    experiment: str = "all"
    alphas: tuple = (5.0, 8.0, 11.0)
    replicas: tuple = (300, 300, 300)
    r: float = 0.5
    K: float = 2.0
    dt: tuple | None = None              # per-alpha driving step
    dx: float = 1e-3                     # environment grid spacing
    bin_scale: float = 0.5               # occupation bin width = bin_scale/alpha^2
    epsilon_scale: float = 2.0           # transfer-estimator band, in sqrt(dt) units
    seed: int = 20240601
    workers: int = 1
    out: str | None = None
    reference_samples: int = 2000
    identity_samples: int = 5000
    window_bins: int = 3                 # bins per comparison window (sup/marginals)
    profile_xs: tuple = (-1.0, 0.0, 1.0)
    deltas: tuple = (0.25, 0.5, 1.0)
    delta_main: float = 0.5
    slack: float = 1.1
    ks_threshold: float = 0.15
    fraction_threshold: float = 0.6
    bessel_dt: float = 1e-2
    bessel_level: float = 20000.0
    tau_dt: float = 2.5e-5
    step_budgets: tuple | None = None
    valley_extent_cap: float = 256.0
    sim_extent_cap: float = 512.0
    init_extent: float = 6.0

    def __post_init__(self):
        if not 0.0 < self.r < 1.0:
            raise ValueError("r must lie strictly in (0, 1)")
        alphas = tuple(float(a) for a in self.alphas)
        if any(a <= 0 for a in alphas) or any(b <= a for a, b in zip(alphas, alphas[1:])):
            raise ValueError("alphas must be positive and strictly increasing")
        object.__setattr__(self, "alphas", alphas)
        reps = self.replicas
        if isinstance(reps, int):
            reps = tuple(reps for _ in alphas)
        else:
            reps = tuple(int(r) for r in reps)
        if len(reps) != len(alphas) or any(r < 1 for r in reps):
            raise ValueError("need at least one replica per alpha")
        object.__setattr__(self, "replicas", reps)
        dts = self.dt
        if dts is None:
            dts = tuple(default_dt(a) for a in alphas)
        elif isinstance(dts, (int, float)):
            dts = tuple(float(dts) for _ in alphas)
        else:
            dts = tuple(float(d) for d in dts)
        if len(dts) != len(alphas) or any(d <= 0 for d in dts):
            raise ValueError("need a positive dt per alpha")
        object.__setattr__(self, "dt", dts)
        budgets = self.step_budgets
        if budgets is None:
            budgets = tuple(default_step_budget(a, d) for a, d in zip(alphas, dts))
        else:
            budgets = tuple(int(b) for b in budgets)
        object.__setattr__(self, "step_budgets", budgets)

    @classmethod
    def from_json(cls, path, **overrides):
        with open(path) as fh:
            data = json.load(fh)
        data.update({k: v for k, v in overrides.items() if v is not None})
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for key in ("alphas", "replicas", "dt", "profile_xs", "deltas", "step_budgets"):
            if key in data and isinstance(data[key], list):
                data[key] = tuple(data[key])
        return cls(**data)

    def echo(self):
        rec = dataclasses.asdict(self)
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in rec.items()}

    def sim_key(self, alpha_idx):
        """Sampling-relevant parameters for the replica cache."""
        return (self.seed, alpha_idx, self.alphas[alpha_idx], self.dt[alpha_idx],
                self.step_budgets[alpha_idx], self.dx, self.bin_scale, self.r,
                self.K, self.profile_xs, self.init_extent, self.valley_extent_cap,
                self.sim_extent_cap)

    def ref_key(self):
        return (self.seed, self.bessel_dt, self.bessel_level, self.profile_xs,
                self.bin_scale)


@dataclasses.dataclass
class ExperimentReport:
    experiment: str
    config: dict
    rng_scheme: str
    per_alpha: list
    summary: dict
    verdicts: dict
    overall_pass: bool
    wall_clock_seconds: float

    def to_dict(self):
        return {
            "experiment": self.experiment,
            "config": self.config,
            "rng": {"scheme": self.rng_scheme, "master_seed": self.config["seed"]},
            "per_alpha": self.per_alpha,
            "summary": self.summary,
            "verdicts": self.verdicts,
            "overall_pass": self.overall_pass,
            "wall_clock_seconds": self.wall_clock_seconds,
        }

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, "report.json")
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
        return path


_RNG_SCHEME = ("SeedSequence(master_seed, spawn_key=(kind, alpha_index, "
               "replica_index, stream)); kinds: 0=diffusion replica, "
               "1=reference path, 2=alias draw, 3=bootstrap")


# ---------------------------------------------------------------------------
# replica workers
# ---------------------------------------------------------------------------

def _travel_deposit(a, rng, resolution=200, cap_mult=32, chunk=16384):
    """Local time at 0 of a driving Brownian path up to first passage of a.

    This is the local time the diffusion leaves at the origin while
    travelling from its start to the valley bottom (whose scale image is
    a); simulating that phase inside the time-changed run would cost
    exp(2*alpha*drop) steps, while here the walk is scale-free: the step
    is a/resolution, so the first passage needs about resolution^2 steps
    regardless of a.  Runs exceeding cap_mult*resolution^2 steps are
    truncated, which under-counts a small fraction of deposits by an
    O(1) factor -- harmless for the log-scale exponent statistic.
    """
    if a == 0.0:
        return 0.0
    sd = abs(a) / resolution
    dt = sd * sd
    band = 2.0 * sd
    b = 0.0
    count = 0
    steps = 0
    cap = cap_mult * resolution * resolution
    while steps < cap:
        walk = b + np.cumsum(rng.standard_normal(chunk) * sd)
        hit = np.nonzero(walk >= a)[0] if a > 0 else np.nonzero(walk <= a)[0]
        cut = int(hit[0]) if len(hit) else chunk - 1
        mids = 0.5 * (np.concatenate([[b], walk[:cut]]) + walk[:cut + 1])
        count += int(np.sum(np.abs(mids) <= band))
        steps += cut + 1
        b = walk[cut]
        if len(hit):
            break
    return count * dt / (2.0 * band)


def _diffusion_replica(args):
    """One diffusion replica: simulate in the unit-valley frame and reduce
    the occupation profile to the statistics every experiment consumes."""
    (master_seed, alpha_idx, alpha, rep_idx, dt, budget, dx, bin_scale, r, K,
     profile_xs, init_extent, valley_cap, sim_cap) = args
    env_rng = _rng(master_seed, _KIND_REPLICA, alpha_idx, rep_idx, 0)
    drive_rng = _rng(master_seed, _KIND_REPLICA, alpha_idx, rep_idx, 1)
    t_target = math.exp(alpha) / alpha ** 4
    try:
        env = sample_environment(dx, -init_extent, init_extent, env_rng)
        valley, env = find_valley_with_widening(env, 1.0, env_rng, max_extent=valley_cap)
        vm = float(env.value_at(valley.m))
        shifted = ShiftedPotential(env, valley.m)
        pair = crossing_points(shifted, r)
        gibbs = gibbs_weight_integral(shifted, alpha, pair.a, pair.b)
        width = bin_scale / alpha ** 2
        sim_args = dict(center=vm, start=valley.m, env_rng=env_rng, bin_width=width,
                        escape_bounds=(valley.p, valley.q), step_budget=budget,
                        max_extent=sim_cap)
        retried = False
        try:
            summary = simulate_localtime_summary(env, alpha, drive_rng, dt, t_target,
                                                 **sim_args)
        except StepBudgetExceeded:
            # One retry with a 4x coarser step, a fresh driving stream, and
            # the same environment: a fair redraw of the replica's law.
            retried = True
            retry_rng = _rng(master_seed, _KIND_REPLICA, alpha_idx, rep_idx, 2)
            summary = simulate_localtime_summary(env, alpha, retry_rng, 4 * dt,
                                                 t_target, **sim_args)
    except (StepBudgetExceeded, WindowCapExceeded) as err:
        return {"ok": False, "error": type(err).__name__, "message": str(err)}

    prof = summary.profile
    a2t = alpha ** 2 * t_target
    lstar = float(prof.values.max()) / a2t
    marginals = {}
    for x in profile_xs:
        marginals[x] = profile_value_at(prof, valley.m + x / alpha ** 2) / a2t
    # local time at the origin: deposit left while travelling to the
    # bottom (exactly samplable from a plain driving walk) plus the
    # returns accumulated by the main run
    scale0 = ScaleMap(env, alpha, center=0.0, origin=0.0)
    travel_rng = _rng(master_seed, _KIND_REPLICA, alpha_idx, rep_idx, 3)
    deposit = _travel_deposit(float(scale0.evaluate(valley.m)), travel_rng)
    l_origin = profile_value_at(prof, 0.0) + deposit
    exponent_raw = None
    if l_origin > 0.0:
        exponent_raw = math.log(alpha ** 2 * l_origin) / alpha

    # limL discrepancy: bin local times against bin-averaged Gibbs weight
    width = bin_scale / alpha ** 2
    window = K / alpha ** 2
    lo_bin = math.floor((valley.m - window) / width)
    hi_bin = math.floor((valley.m + window) / width)
    sup_disc = 0.0
    for b in range(lo_bin, hi_bin + 1):
        lo_x, hi_x = b * width - valley.m, (b + 1) * width - valley.m
        seg = gibbs_weight_integral(shifted, alpha, lo_x, hi_x)
        log_avg_weight = seg.log_value - math.log(width)
        lval = profile_value_at(prof, (b + 0.5) * width)
        if lval <= 0.0:
            sup_disc = max(sup_disc, 1.0)
            continue
        log_ratio = math.log(lval / t_target) + gibbs.log_value - log_avg_weight
        sup_disc = max(sup_disc, abs(math.expm1(log_ratio)))

    # normalized local-time values of the bins covering the rescaled
    # window xi = alpha^2 (x - m) in [-12.5, 12.5]; window statistics are
    # derived from this block at aggregation time
    n_side = int(math.ceil(12.5 / bin_scale))
    jm = math.floor(valley.m / width)
    lo_idx = int(round(prof.bin_centers[0] / width - 0.5))
    block = np.zeros(2 * n_side + 1)
    for off in range(-n_side, n_side + 1):
        j = jm + off - lo_idx
        if 0 <= j < len(prof.values):
            block[off + n_side] = prof.values[j] / a2t
    block_xi = (((jm + np.arange(-n_side, n_side + 1)) + 0.5) * width
                - valley.m) * alpha ** 2

    return {
        "ok": True,
        "lstar": lstar,
        "peak_block": block.tolist(),
        "peak_block_xi": block_xi.tolist(),
        "marginals": marginals,
        "exponent_raw": exponent_raw,
        "offset": alpha ** 2 * (summary.endpoint - valley.m),
        "normalization": float(np.sum(prof.values)) * width * alpha ** 2 / a2t,
        "sup_disc": sup_disc,
        "m": valley.m,
        "depth": valley.depth,
        "ascent": valley.ascent,
        "bottom_value": vm,
        "log_gibbs": gibbs.log_value,
        "escaped": summary.escaped,
        "steps": summary.steps,
        "retried": retried,
    }


def _reference_replica(args):
    """One two-sided Bessel draw reduced to every reference statistic.

    The sup and marginal references are averaged over windows of the same
    relative width as the simulation's occupation bins (with the grid
    offset uniformly random, mirroring where the valley bottom falls
    inside a bin), so both sides of each comparison carry the same
    smoothing; the windowed laws converge to the pointwise ones as the
    bin scale shrinks.
    """
    master_seed, ref_idx, bessel_dt, level, profile_xs, bin_scale = args
    rng = _rng(master_seed, _KIND_REFERENCE, 0, ref_idx, 0)
    rule = bessel.LevelHorizon(level=level)
    two = bessel.sample_two_sided(bessel_dt, rng, rule)
    func = bessel.functional_sample(two)
    draw = bessel.sample_profile_point(two, rng)

    xs_grid = np.concatenate([-two.left.sample_times[::-1], two.right.sample_times[1:]])
    dens = np.exp(-np.concatenate([two.left.values[::-1], two.right.values[1:]]))
    seg = 0.5 * (dens[:-1] + dens[1:]) * np.diff(xs_grid)
    cum = np.concatenate([[0.0], np.cumsum(seg)])

    w = bin_scale
    offset = float(rng.uniform(0.0, w))
    span = min(25.0, -xs_grid[0], xs_grid[-1])
    lo_idx = math.floor((-span - offset) / w)
    edges = offset + w * np.arange(lo_idx, math.ceil((span - offset) / w) + 1)
    cut = np.interp(np.clip(edges, xs_grid[0], xs_grid[-1]), xs_grid, cum)
    bin_values = (np.diff(cut) / w / func.value)
    return {
        "functional": func.value,
        "truncation_bound": func.truncation_bound,
        "bin_values": bin_values,
        "xi_lo_edge": float(edges[0]),
        "bin_width": w,
        "draw": draw,
    }


def _windowed_max(values, k):
    """Maximum over k-bin averages of a nonnegative profile."""
    v = np.asarray(values, dtype=float)
    if len(v) == 0:
        return 0.0
    if k <= 1:
        return float(np.max(v))
    if len(v) < k:
        return float(np.mean(v))
    kernel = np.ones(k) / k
    return float(np.max(np.convolve(v, kernel, mode="valid")))


def _windowed_at(values, lo_edge, width, x, k):
    """Average of the k bins centered on the bin containing x (k odd)."""
    v = np.asarray(values, dtype=float)
    j = int(math.floor((x - lo_edge) / width))
    half = (k - 1) // 2
    lo = j - half
    hi = j + half + 1
    if lo < 0 or hi > len(v):
        lo = max(0, min(lo, len(v) - k))
        hi = lo + k
    if lo < 0 or hi > len(v) or len(v) == 0:
        return 0.0
    return float(np.mean(v[lo:hi]))


def _ref_sup(ref, k):
    return _windowed_max(ref["bin_values"], k)


def _ref_marginal(ref, x, k):
    return _windowed_at(ref["bin_values"], ref["xi_lo_edge"], ref["bin_width"], x, k)


def _alias_replica(args):
    master_seed, idx, tau_dt = args
    rng = _rng(master_seed, _KIND_ALIAS, 0, idx, 0)
    return bessel.rayknight_alias_sample(tau_dt, rng)


_CACHE: dict = {}


def _run_tasks(worker, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [worker(t) for t in tasks]
    with multiprocessing.Pool(processes=workers) as pool:
        return pool.map(worker, tasks, chunksize=1)


def _replica_results(config, alpha_idx, count):
    """Per-replica statistics, computed once per (seed, alpha, params)."""
    base_key = config.sim_key(alpha_idx)
    have = _CACHE.setdefault(("diff", base_key), {})
    missing = [i for i in range(count) if i not in have]
    if missing:
        alpha = config.alphas[alpha_idx]
        tasks = [(config.seed, alpha_idx, alpha, i, config.dt[alpha_idx],
                  config.step_budgets[alpha_idx], config.dx, config.bin_scale,
                  config.r, config.K, config.profile_xs, config.init_extent,
                  config.valley_extent_cap, config.sim_extent_cap)
                 for i in missing]
        results = _run_tasks(_diffusion_replica, tasks, config.workers)
        for i, res in zip(missing, results):
            have[i] = res
    return [have[i] for i in range(count)]


def _reference_results(config, count):
    base_key = config.ref_key()
    have = _CACHE.setdefault(("ref", base_key), {})
    missing = [i for i in range(count) if i not in have]
    if missing:
        tasks = [(config.seed, i, config.bessel_dt, config.bessel_level,
                  config.profile_xs, config.bin_scale) for i in missing]
        results = _run_tasks(_reference_replica, tasks, config.workers)
        for i, res in zip(missing, results):
            have[i] = res
    return [have[i] for i in range(count)]


def _alias_results(config, count):
    base_key = (config.seed, config.tau_dt)
    have = _CACHE.setdefault(("alias", base_key), {})
    missing = [i for i in range(count) if i not in have]
    if missing:
        tasks = [(config.seed, i, config.tau_dt) for i in missing]
        results = _run_tasks(_alias_replica, tasks, config.workers)
        for i, res in zip(missing, results):
            have[i] = res
    return [have[i] for i in range(count)]


def clear_cache():
    _CACHE.clear()


def _failure_stats(results):
    failures = [r for r in results if not r["ok"]]
    rate = len(failures) / len(results) if results else 0.0
    kinds = {}
    for f in failures:
        kinds[f["error"]] = kinds.get(f["error"], 0) + 1
    return rate, kinds


def _guarded_trend(points, **kw):
    """trend_check that simply fails when some alpha produced no data."""
    if any(v is None or (isinstance(v, float) and math.isnan(v)) for _, v in points):
        return False
    return trend_check(points, **kw)


def _ks_or_none(vals, ref):
    vals = np.asarray(vals, dtype=float)
    if len(vals) == 0 or len(ref) == 0:
        return None
    return ks_two_sample(vals, ref)


def _save_samples(config, out_dir, name, values, meta):
    if out_dir is None:
        return
    os.makedirs(out_dir, exist_ok=True)
    meta = dict(meta)
    meta.setdefault("seed", config.seed)
    SampleSet.from_values(values, meta).to_csv(os.path.join(out_dir, f"samples_{name}.csv"))


def _finalize(config, experiment, per_alpha, summary, verdicts, t0, out=None):
    rates_ok = all(rec.get("failure_rate", 0.0) < 0.05 for rec in per_alpha)
    verdicts = dict(verdicts)
    verdicts["failure_rates_ok"] = rates_ok
    overall = bool(all(verdicts.values()))
    report = ExperimentReport(
        experiment=experiment,
        config=config.echo(),
        rng_scheme=_RNG_SCHEME,
        per_alpha=per_alpha,
        summary=summary,
        verdicts=verdicts,
        overall_pass=overall,
        wall_clock_seconds=time.time() - t0,
    )
    out_dir = out if out is not None else config.out
    if out_dir is not None:
        report.write(os.path.join(out_dir, experiment))
    return report


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def run_identity_check(config):
    """Distributional identity: integral(exp(-R)) vs 4 tau(1) + 4 tau~(1)."""
    t0 = time.time()
    n = config.identity_samples
    refs = _reference_results(config, n)
    functional = np.array([r["functional"] for r in refs])
    alias = np.array([a for a in _alias_results(config, n)])
    ks = ks_two_sample(functional, alias)
    boot_rng = _rng(config.seed, _KIND_BOOT, 0, 0, 0)
    ci_func = bootstrap_mean_ci(functional, 0.99, 2000, boot_rng)
    ci_alias = bootstrap_mean_ci(alias, 0.99, 2000, boot_rng)
    checks = {}
    for name, vals in (("functional", functional), ("alias", alias)):
        se = float(np.std(vals) / math.sqrt(len(vals)))
        checks[name] = {"mean": float(np.mean(vals)), "se": se,
                        "within_3se_of_4": bool(abs(np.mean(vals) - 4.0) <= 3 * se)}
    verdicts = {
        "ks_identity": bool(ks.p_value_bound > 0.01),
        "functional_mean": checks["functional"]["within_3se_of_4"],
        "alias_mean": checks["alias"]["within_3se_of_4"],
    }
    summary = {
        "ks": {"D": ks.statistic, "n": ks.n, "m": ks.m, "p_bound": ks.p_value_bound},
        "means": checks,
        "bootstrap_ci_99": {"functional": ci_func, "alias": ci_alias},
        "truncation_bound": refs[0]["truncation_bound"] if refs else None,
    }
    out_dir = config.out and os.path.join(config.out, "identity")
    _save_samples(config, out_dir, "functional", functional,
                  {"dt": config.bessel_dt, "cutoff": config.bessel_level})
    _save_samples(config, out_dir, "alias", alias, {"dt": config.tau_dt})
    return _finalize(config, "identity", [], summary, verdicts, t0)


def _per_alpha_records(config):
    for idx, (alpha, count) in enumerate(zip(config.alphas, config.replicas)):
        results = _replica_results(config, idx, count)
        ok = [r for r in results if r["ok"]]
        rate, kinds = _failure_stats(results)
        yield idx, alpha, ok, {"alpha": alpha, "replicas": count,
                               "failures": count - len(ok),
                               "failure_rate": rate, "failure_kinds": kinds,
                               "escape_rate": float(np.mean([r["escaped"] for r in ok])) if ok else None,
                               "retry_rate": float(np.mean([r["retried"] for r in ok])) if ok else None}


def run_sup_localtime(config, reference="bessel"):
    """Normalized sup of local time vs the reciprocal Bessel functional."""
    t0 = time.time()
    k = config.window_bins
    refs = _reference_results(config, config.reference_samples)
    if reference == "bessel":
        ref_vals = np.array([_ref_sup(r, k) for r in refs])
    else:
        # the alias gives the unsmoothed functional; scale each draw by the
        # paired smoothing ratio so the window treatment matches
        smooth_ratio = np.array([_ref_sup(r, k) * r["functional"] for r in refs])
        alias = np.array(_alias_results(config, config.reference_samples))
        ref_vals = smooth_ratio / alias
    per_alpha = []
    ks_by_alpha = []
    for idx, alpha, ok, rec in _per_alpha_records(config):
        vals = np.array([_windowed_max(r["peak_block"], k) for r in ok])
        ks = _ks_or_none(vals, ref_vals)
        rec.update({"ks_distance": ks.statistic if ks else None,
                    "ks_p_bound": ks.p_value_bound if ks else None,
                    "median": float(np.median(vals)) if len(vals) else None,
                    "mean": float(np.mean(vals)) if len(vals) else None,
                    "reference_median": float(np.median(ref_vals))})
        per_alpha.append(rec)
        ks_by_alpha.append((alpha, ks.statistic if ks else None))
        out_dir = config.out and os.path.join(config.out, "sup-localtime")
        _save_samples(config, out_dir, f"lstar_alpha{alpha:g}", vals,
                      {"alpha": alpha, "dt": config.dt[idx]})
    trend = _guarded_trend(ks_by_alpha, slack=config.slack, threshold=config.ks_threshold)
    summary = {"ks_by_alpha": ks_by_alpha, "reference": reference,
               "final_ks": ks_by_alpha[-1][1] if ks_by_alpha else None}
    out_dir = config.out and os.path.join(config.out, "sup-localtime")
    _save_samples(config, out_dir, "reference_lstar", ref_vals,
                  {"dt": config.bessel_dt, "cutoff": config.bessel_level})
    return _finalize(config, "sup-localtime",
                     per_alpha, summary, {"ks_trend": trend}, t0)


def _sim_marginal(res, x, k):
    """Windowed local-time marginal at rescaled offset x from one replica."""
    xi = res["peak_block_xi"]
    if k > 1 and len(xi) > 1 and xi[0] <= x <= xi[-1]:
        width = xi[1] - xi[0]
        return _windowed_at(res["peak_block"], xi[0] - width / 2.0, width, x, k)
    return res["marginals"][x]


def run_profile_marginals(config):
    """Finite-dimensional marginals of the normalized local-time profile."""
    t0 = time.time()
    k = config.window_bins
    refs = _reference_results(config, config.reference_samples)
    per_alpha = []
    trends = {}
    ks_table = {x: [] for x in config.profile_xs}
    norms = []
    for idx, alpha, ok, rec in _per_alpha_records(config):
        rec["ks_by_x"] = {}
        for x in config.profile_xs:
            vals = np.array([_sim_marginal(r, x, k) for r in ok])
            ref_vals = np.array([_ref_marginal(r, x, k) for r in refs])
            ks = _ks_or_none(vals, ref_vals)
            rec["ks_by_x"][str(x)] = ks.statistic if ks else None
            ks_table[x].append((alpha, ks.statistic if ks else None))
            out_dir = config.out and os.path.join(config.out, "profile")
            _save_samples(config, out_dir, f"profile_x{x:g}_alpha{alpha:g}", vals,
                          {"alpha": alpha, "x": x})
        rec["normalization_mean"] = float(np.mean([r["normalization"] for r in ok])) \
            if ok else None
        norms.append(rec["normalization_mean"])
        rec["median_x0"] = float(np.median([_sim_marginal(r, 0.0, k) for r in ok])) \
            if ok and 0.0 in config.profile_xs else None
        rec["median_lstar"] = float(np.median([_windowed_max(r["peak_block"], k)
                                               for r in ok])) if ok else None
        per_alpha.append(rec)
    verdicts = {}
    for x in config.profile_xs:
        trends[str(x)] = _guarded_trend(ks_table[x], slack=config.slack, threshold=None)
        verdicts[f"ks_trend_x{x:g}"] = trends[str(x)]
    verdicts["normalization_within_2pc"] = bool(
        all(nm is not None and abs(nm - 1.0) <= 0.02 for nm in norms))
    bottom_gap = None
    if per_alpha and per_alpha[-1].get("median_x0"):
        bottom_gap = abs(per_alpha[-1]["median_x0"] / per_alpha[-1]["median_lstar"] - 1.0)
    summary = {"ks_trends": {str(x): ks_table[x] for x in config.profile_xs},
               "favorite_vs_bottom_gap_top_alpha": bottom_gap}
    return _finalize(config, "profile", per_alpha, summary, verdicts, t0)


def run_env_functional_approx(config):
    """Fraction of replicas whose windowed local-time/Gibbs-weight ratio
    stays within delta of one, per alpha."""
    t0 = time.time()
    per_alpha = []
    fractions_main = []
    for idx, alpha, ok, rec in _per_alpha_records(config):
        discs = np.array([r["sup_disc"] for r in ok])
        has = len(discs) > 0
        rec["fractions"] = {str(d): float(np.mean(discs <= d)) if has else None
                            for d in config.deltas}
        rec["fraction_inf"] = float(np.mean(discs <= math.inf)) if has else None
        rec["median_disc"] = float(np.median(discs)) if has else None
        fractions_main.append((alpha, float(np.mean(discs <= config.delta_main)) if has else None))
        per_alpha.append(rec)
        out_dir = config.out and os.path.join(config.out, "env-approx")
        _save_samples(config, out_dir, f"supdisc_alpha{alpha:g}", discs,
                      {"alpha": alpha, "r": config.r, "K": config.K})
    trend = _guarded_trend(fractions_main, slack=config.slack,
                           threshold=config.fraction_threshold, direction="increasing")
    summary = {"fractions_by_alpha": fractions_main, "delta_main": config.delta_main}
    return _finalize(config, "env-approx", per_alpha, summary,
                     {"fraction_trend": trend}, t0)


def exponent_reference_cdf(u):
    """CDF of min(U, U~) for independent uniforms: 2u - u^2 on [0, 1]."""
    if u < 0.0:
        return 0.0
    if u > 1.0:
        return 1.0
    return 2.0 * u - u * u


def run_exponent_law(config):
    """log local time at the origin over log t against the min-uniform law."""
    t0 = time.time()
    per_alpha = []
    ks_by_alpha = []
    clamp_rates = []
    for idx, alpha, ok, rec in _per_alpha_records(config):
        raw = [r["exponent_raw"] for r in ok]
        clamped = np.array([min(1.0, max(0.0, v)) if v is not None else 0.0 for v in raw])
        n_clamped = sum(1 for v in raw if v is None or v < 0.0 or v > 1.0)
        ks = ks_one_sample(clamped, exponent_reference_cdf) if raw else None
        rec.update({"ks_distance": ks.statistic if ks else None,
                    "clamp_rate": n_clamped / len(raw) if raw else None,
                    "zero_local_time": sum(1 for v in raw if v is None)})
        per_alpha.append(rec)
        ks_by_alpha.append((alpha, ks.statistic if ks else None))
        clamp_rates.append((alpha, rec["clamp_rate"]))
        out_dir = config.out and os.path.join(config.out, "exponent")
        _save_samples(config, out_dir, f"exponent_alpha{alpha:g}", clamped,
                      {"alpha": alpha})
    trend = _guarded_trend(ks_by_alpha, slack=config.slack, threshold=None)
    top_rate = clamp_rates[-1][1] if clamp_rates else None
    verdicts = {"ks_trend": trend,
                "clamp_rate_top": bool(top_rate is not None and top_rate < 0.10)}
    summary = {"ks_by_alpha": ks_by_alpha, "clamp_rates": clamp_rates}
    return _finalize(config, "exponent", per_alpha, summary, verdicts, t0)


def run_position_density(config):
    """Law of the endpoint offset from the valley bottom vs the profile law."""
    t0 = time.time()
    refs = _reference_results(config, config.reference_samples)
    draws = np.array([r["draw"] for r in refs])
    per_alpha = []
    ks_by_alpha = []
    for idx, alpha, ok, rec in _per_alpha_records(config):
        offsets = np.array([r["offset"] for r in ok])
        ks = _ks_or_none(offsets, draws)
        rec.update({"ks_distance": ks.statistic if ks else None,
                    "offset_median": float(np.median(offsets)) if len(offsets) else None})
        per_alpha.append(rec)
        ks_by_alpha.append((alpha, ks.statistic if ks else None))
        out_dir = config.out and os.path.join(config.out, "position")
        _save_samples(config, out_dir, f"offsets_alpha{alpha:g}", offsets,
                      {"alpha": alpha})
    trend = _guarded_trend(ks_by_alpha, slack=config.slack, threshold=None)
    summary = {"ks_by_alpha": ks_by_alpha}
    out_dir = config.out and os.path.join(config.out, "position")
    _save_samples(config, out_dir, "reference_draws", draws,
                  {"dt": config.bessel_dt})
    return _finalize(config, "position", per_alpha, summary, {"ks_trend": trend}, t0)


_RUNNERS = {
    "identity": run_identity_check,
    "sup-localtime": run_sup_localtime,
    "profile": run_profile_marginals,
    "env-approx": run_env_functional_approx,
    "exponent": run_exponent_law,
    "position": run_position_density,
}


def run_all(config):
    """Every experiment under one master seed, sharing replica work."""
    reports = {}
    for name, runner in _RUNNERS.items():
        reports[name] = runner(config)
    return reports
