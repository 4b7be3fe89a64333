"""Acceptance suite: one test per criterion, each printing a verdict line.

The distributional experiments run at their production configuration
(alphas 5, 8, 11; 300 replicas each; 5000-sample identity check).  All
experiments share one master seed and the in-process replica cache, so
the whole suite performs each simulation once.

Runtime budgets are stated for a commodity 8-core machine; assertions
normalize by the available cores (wall * cores <= budget * 8).
"""

import json
import math
import os
import time

import numpy as np
import pytest

from oracles import brute_h_extrema, brute_standard_valley

import broxsim.experiments as exps
from broxsim.bessel import besq2_hitting_time
from broxsim.diffusion import local_time_occupation, simulate_path
from broxsim.environment import (
    EnvironmentPath,
    ValleyNotContained,
    WindowCapExceeded,
    find_valley_with_widening,
    sample_environment,
    standard_valley,
    find_h_extrema,
)
from broxsim.experiments import (
    ExperimentConfig,
    clear_cache,
    run_env_functional_approx,
    run_exponent_law,
    run_identity_check,
    run_profile_marginals,
    run_sup_localtime,
)

_CORES = os.cpu_count() or 1


def _within_budget(wall_seconds, budget_minutes):
    return wall_seconds * _CORES <= budget_minutes * 60 * 8


def _verdict(number, name, passed, detail=""):
    line = f"[ACCEPTANCE] criterion {number} ({name}): {'PASS' if passed else 'FAIL'}"
    if detail:
        line += f"  -- {detail}"
    print(line)
    return passed


@pytest.fixture(scope="module")
def config():
    return ExperimentConfig(workers=min(_CORES, 4))


@pytest.fixture(scope="module")
def reports(config):
    """Lazily computed production reports, shared by the criteria below."""
    cache = {}

    def get(name):
        if name not in cache:
            runner = {
                "identity": run_identity_check,
                "sup": run_sup_localtime,
                "env": run_env_functional_approx,
                "profile": run_profile_marginals,
                "exponent": run_exponent_law,
            }[name]
            cache[name] = runner(config)
        return cache[name]

    return get


def test_criterion_1_identity(reports):
    rep = reports("identity")
    ks_ok = rep.verdicts["ks_identity"]
    means_ok = rep.verdicts["functional_mean"] and rep.verdicts["alias_mean"]
    time_ok = _within_budget(rep.wall_clock_seconds, 5)
    detail = (f"KS D={rep.summary['ks']['D']:.4f} p={rep.summary['ks']['p_bound']:.3f}, "
              f"means {rep.summary['means']['functional']['mean']:.3f}/"
              f"{rep.summary['means']['alias']['mean']:.3f}, "
              f"wall {rep.wall_clock_seconds:.0f}s on {_CORES} cores")
    assert _verdict(1, "Bessel-functional identity", ks_ok and means_ok and time_ok, detail)


def test_criterion_2_besq2_mean():
    rng = np.random.default_rng(555)
    n = 10_000
    fine = np.array([besq2_hitting_time(2.5e-5, rng, chunk=4096) for _ in range(n)])
    se = np.std(fine) / math.sqrt(n)
    mean_ok = abs(np.mean(fine) - 0.5) <= 3 * se
    halved = np.array([besq2_hitting_time(1.25e-5, rng, chunk=4096) for _ in range(4000)])
    ci_width = 6 * se
    shift_ok = abs(np.mean(halved) - np.mean(fine)) < ci_width
    detail = (f"mean {np.mean(fine):.5f} +- {se:.5f}, halved-dt shift "
              f"{abs(np.mean(halved) - np.mean(fine)):.5f} vs CI width {ci_width:.5f}")
    assert _verdict(2, "squared-Bessel hitting-time mean", mean_ok and shift_ok, detail)


def test_criterion_3_degenerate_reduction():
    n = 48
    env = EnvironmentPath(0.5, np.zeros(2 * n + 1), n)
    worst = 0.0
    for rep in range(100):
        rng = np.random.default_rng(9000 + rep)
        path, _ = simulate_path(env, alpha=1.0 + rep % 3, rng=rng, dt=1e-3, t_target=1.0)
        assert np.array_equal(path.positions, path.driving.values)
        prof = local_time_occupation(path, bin_width=0.126, t=1.0)
        mass = float(np.sum(prof.values)) * 0.126
        worst = max(worst, abs(mass - 1.0))
    assert _verdict(3, "flat-potential reduction", worst <= 1e-2,
                    f"bit-exact on 100 replicas, worst occupation gap {worst:.2e}")


def test_criterion_4_sup_localtime(reports):
    rep = reports("sup")
    trend_ok = rep.verdicts["ks_trend"]
    final = rep.summary["final_ks"]
    rates_ok = rep.verdicts["failure_rates_ok"]
    time_ok = _within_budget(rep.wall_clock_seconds, 20)
    detail = (f"KS by alpha {[(a, round(d, 3)) for a, d in rep.summary['ks_by_alpha']]}, "
              f"failure rates {[round(r['failure_rate'], 3) for r in rep.per_alpha]}, "
              f"wall {rep.wall_clock_seconds:.0f}s on {_CORES} cores")
    assert _verdict(4, "normalized sup local time", trend_ok and final < 0.15
                    and rates_ok and time_ok, detail)


def test_criterion_5_env_functional_approx(reports):
    rep = reports("env")
    fracs = rep.summary["fractions_by_alpha"]
    trend_ok = rep.verdicts["fraction_trend"]
    top_ok = fracs[-1][1] is not None and fracs[-1][1] >= 0.6
    rates_ok = rep.verdicts["failure_rates_ok"]
    detail = f"fractions(delta=0.5) {[(a, round(f, 3)) for a, f in fracs]}"
    assert _verdict(5, "environment-functional approximation",
                    trend_ok and top_ok and rates_ok, detail)


def test_criterion_6_profile_marginals(reports):
    rep = reports("profile")
    trends_ok = all(v for k, v in rep.verdicts.items() if k.startswith("ks_trend"))
    norm_ok = rep.verdicts["normalization_within_2pc"]
    rates_ok = rep.verdicts["failure_rates_ok"]
    detail = (f"trends {[k for k in rep.verdicts if k.startswith('ks_trend')]} all "
              f"{'ok' if trends_ok else 'FAIL'}, normalization "
              f"{[round(r['normalization_mean'], 4) for r in rep.per_alpha]}")
    assert _verdict(6, "profile marginals", trends_ok and norm_ok and rates_ok, detail)


def test_criterion_7_exponent_law(reports):
    rep = reports("exponent")
    trend_ok = rep.verdicts["ks_trend"]
    clamp_ok = rep.verdicts["clamp_rate_top"]
    rates_ok = rep.verdicts["failure_rates_ok"]
    detail = (f"KS {[(a, round(d, 3)) for a, d in rep.summary['ks_by_alpha']]}, "
              f"clamp rates {[(a, round(c, 3)) for a, c in rep.summary['clamp_rates']]}")
    assert _verdict(7, "local-time exponent law", trend_ok and clamp_ok and rates_ok,
                    detail)


def test_criterion_8_valley_machinery():
    rng = np.random.default_rng(8080)
    mismatches = 0
    for _ in range(200):
        n = int(rng.integers(8, 200))
        n_left = int(rng.integers(1, n - 1))
        vals = np.cumsum(rng.standard_normal(n)) * float(rng.uniform(0.3, 1.5))
        vals -= vals[n_left]
        env = EnvironmentPath(1.0, vals, n_left)
        h = float(rng.uniform(0.3, 2.0))
        if find_h_extrema(env, h) != brute_h_extrema(env, h):
            mismatches += 1
            continue
        expected = brute_standard_valley(env, h)
        if expected is None:
            try:
                standard_valley(env, h)
                mismatches += 1
            except ValleyNotContained:
                pass
        else:
            got = standard_valley(env, h)
            if (got.p, got.m, got.q) != expected:
                mismatches += 1
    oracle_ok = mismatches == 0

    brox_ok = 0
    total = 500
    for rep in range(total):
        env_rng = np.random.default_rng(70_000 + rep)
        env = sample_environment(1e-3, -6.0, 6.0, env_rng)
        try:
            valley, env = find_valley_with_widening(env, 1.0, env_rng, max_extent=256.0)
        except WindowCapExceeded:
            continue
        if valley.ascent < 1.0 < valley.depth:
            brox_ok += 1
    rate = brox_ok / total
    assert _verdict(8, "valley machinery", oracle_ok and rate >= 0.99,
                    f"{mismatches} oracle mismatches on 200 grids, "
                    f"ascent<1<depth rate {rate:.3f} on 500 environments")


def test_criterion_9_determinism():
    base = dict(alphas=(3.0, 4.0, 5.0), replicas=(8, 8, 8), reference_samples=60,
                identity_samples=0, seed=606, bessel_level=2000.0)
    outs = []
    for workers in (1, 2):
        clear_cache()
        cfg = ExperimentConfig(workers=workers, **base)
        rep1 = run_sup_localtime(cfg)
        rep2 = run_env_functional_approx(cfg)
        d1, d2 = rep1.to_dict(), rep2.to_dict()
        for d in (d1, d2):
            d.pop("wall_clock_seconds")
            d["config"].pop("workers")
        outs.append(json.dumps([d1, d2], sort_keys=True))
    clear_cache()
    same = outs[0] == outs[1]
    assert _verdict(9, "determinism across worker counts", same,
                    "reports byte-identical modulo wall clock")
