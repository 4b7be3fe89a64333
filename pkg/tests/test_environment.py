import math

import numpy as np
import pytest

from broxsim.environment import (
    EnvironmentPath,
    ShiftedPotential,
    ThresholdNotReached,
    ValleyNotContained,
    WindowCapExceeded,
    barrier,
    crossing_points,
    environment_profile,
    extend_environment,
    find_h_extrema,
    find_valley_with_widening,
    gibbs_weight_integral,
    laplace_equivalence_check,
    sample_environment,
    standard_valley,
)


def env_from_values(values, n_left, step=1.0):
    return EnvironmentPath(step, np.asarray(values, dtype=float), n_left)


# Zigzag path from the worked examples: knots (-3,3),(0,0),(1,2),(2,-1),(4,3)
# realized on a unit grid (linear interpolation adds knots at -2,-1,3).
ZIGZAG = env_from_values([3, 2, 1, 0, 2, -1, 1, 3], n_left=3)


def abs_env(half=3, step=1.0):
    n = int(round(half / step))
    vals = np.abs(np.arange(-n, n + 1)) * step
    return env_from_values(vals, n_left=n, step=step)


from oracles import brute_barrier, brute_h_extrema, brute_standard_valley


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def test_single_knot_path():
    env = sample_environment(0.01, 0.0, 0.0, np.random.default_rng(0))
    assert env.n_knots == 1
    assert env.value_at(0.0) == 0.0


def test_origin_pinned():
    env = sample_environment(0.05, -3.0, 4.0, np.random.default_rng(7))
    assert env.value_at(0.0) == 0.0
    assert env.values[env.n_left] == 0.0


def test_variance_at_unit_distance():
    # Var W(1) = 1 for standard two-sided Brownian motion.
    rng = np.random.default_rng(42)
    vals = [sample_environment(0.01, -1.0, 1.0, rng).value_at(1.0) for _ in range(10_000)]
    var = np.var(vals)
    # 3-sigma band for a variance estimate from 1e4 Gaussian samples.
    assert abs(var - 1.0) < 0.05


def test_increment_variance_matches_step():
    rng = np.random.default_rng(3)
    env = sample_environment(0.02, -40.0, 40.0, rng)
    incs = np.diff(env.values)
    assert abs(np.var(incs) / 0.02 - 1.0) < 0.1


def test_sampling_validation():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        sample_environment(-0.1, -1.0, 1.0, rng)
    with pytest.raises(ValueError):
        sample_environment(0.1, 1.0, 2.0, rng)
    with pytest.raises(ValueError):
        sample_environment(0.1, -1.0, -0.5, rng)


def test_extend_noop_identity():
    rng = np.random.default_rng(5)
    env = sample_environment(0.1, -2.0, 2.0, rng)
    again = extend_environment(env, env.left_extent, env.right_extent, rng)
    assert np.array_equal(again.values, env.values)


def test_extend_preserves_prefix_bitexact():
    rng = np.random.default_rng(5)
    env = sample_environment(0.1, -2.0, 2.0, rng)
    wide = extend_environment(env, -2.0, 3.0, rng)
    assert np.array_equal(wide.values[wide.n_left - env.n_left:][:env.n_knots], env.values)
    assert wide.right_extent == pytest.approx(3.0)


def test_extend_deterministic_given_seed():
    env = sample_environment(0.1, -1.0, 1.0, np.random.default_rng(9))
    a = extend_environment(env, -4.0, 4.0, np.random.default_rng(123))
    b = extend_environment(env, -4.0, 4.0, np.random.default_rng(123))
    assert np.array_equal(a.values, b.values)


def test_extend_cannot_shrink():
    env = sample_environment(0.1, -1.0, 1.0, np.random.default_rng(1))
    with pytest.raises(ValueError):
        extend_environment(env, -0.5, 1.0, np.random.default_rng(2))


# ---------------------------------------------------------------------------
# barrier
# ---------------------------------------------------------------------------

def test_barrier_monotone_stretch():
    env = env_from_values([0, 1, 2, 3], n_left=0)
    assert barrier(env, 0.0, 3.0) == pytest.approx(3.0)


def test_barrier_absolute_value():
    env = abs_env(3)
    assert barrier(env, -1.0, 1.0) == pytest.approx(1.0)


def test_barrier_zigzag_derived():
    assert barrier(ZIGZAG, 0.0, 4.0) == pytest.approx(4.0)
    assert barrier(ZIGZAG, 0.0, 4.0) == pytest.approx(brute_barrier(ZIGZAG, 0.0, 4.0))


def test_barrier_properties_random():
    rng = np.random.default_rng(11)
    env = sample_environment(0.25, -5.0, 5.0, rng)
    xs = env.positions()
    for _ in range(200):
        x, y = rng.choice(xs, 2)
        b = barrier(env, x, y)
        assert b >= max(0.0, env.value_at(y) - env.value_at(x)) - 1e-12
        assert barrier(env, x, x) == 0.0
        assert b == pytest.approx(brute_barrier(env, x, y), abs=1e-9)


def test_barrier_domain_check():
    env = abs_env(2)
    with pytest.raises(ValueError):
        barrier(env, -1.0, 5.0)


# ---------------------------------------------------------------------------
# h-extrema
# ---------------------------------------------------------------------------

def test_h_extrema_absolute_value():
    got = find_h_extrema(abs_env(3), 1.0)
    assert got == [(0.0, "min")]


def test_h_extrema_monotone_path_empty():
    env = env_from_values([0, 1, 2, 3, 4, 5], n_left=0)
    assert find_h_extrema(env, 1.0) == []


def test_h_extrema_zigzag_derived():
    got = find_h_extrema(ZIGZAG, 1.0)
    assert got == [(0.0, "min"), (1.0, "max"), (2.0, "min")]
    assert got == brute_h_extrema(ZIGZAG, 1.0)


def test_h_extrema_alternate_and_match_oracle():
    rng = np.random.default_rng(17)
    for trial in range(60):
        n = int(rng.integers(3, 60))
        n_left = int(rng.integers(0, n))
        vals = np.cumsum(rng.standard_normal(n))
        vals -= vals[n_left]
        env = env_from_values(vals, n_left=n_left)
        h = float(rng.uniform(0.2, 2.5))
        got = find_h_extrema(env, h)
        kinds = [k for _, k in got]
        assert all(a != b for a, b in zip(kinds, kinds[1:]))
        assert got == brute_h_extrema(env, h)


def test_h_extrema_flat_tie_leftmost():
    env = env_from_values([2, 0, 0, 0, 2], n_left=2)
    assert find_h_extrema(env, 1.0) == [(-1.0, "min")]
    assert brute_h_extrema(env, 1.0) == [(-1.0, "min")]


def test_h_extrema_monotone_in_h():
    rng = np.random.default_rng(23)
    for _ in range(20):
        vals = np.cumsum(rng.standard_normal(80))
        n_left = 40
        vals -= vals[n_left]
        env = env_from_values(vals, n_left=n_left)
        coarse = set(find_h_extrema(env, 2.0))
        fine = set(find_h_extrema(env, 0.7))
        assert coarse <= fine


# ---------------------------------------------------------------------------
# standard valley
# ---------------------------------------------------------------------------

def test_valley_not_contained_absolute_value():
    with pytest.raises(ValleyNotContained):
        standard_valley(abs_env(3), 1.0)


def test_valley_zigzag_not_contained():
    # The zigzag window has no interior (max, min, max) triple, so the
    # valley machinery must ask for an extension instead of fabricating
    # boundary walls.
    with pytest.raises(ValleyNotContained):
        standard_valley(ZIGZAG, 1.0)


def test_valley_matches_brute_force_on_random_grids():
    rng = np.random.default_rng(31)
    found = 0
    for _ in range(120):
        n = int(rng.integers(10, 200))
        n_left = int(rng.integers(1, n - 1))
        vals = np.cumsum(rng.standard_normal(n)) * float(rng.uniform(0.3, 1.5))
        vals -= vals[n_left]
        env = env_from_values(vals, n_left=n_left)
        h = float(rng.uniform(0.3, 2.0))
        expected = brute_standard_valley(env, h)
        if expected is None:
            with pytest.raises(ValleyNotContained):
                standard_valley(env, h)
            continue
        got = standard_valley(env, h)
        assert (got.p, got.m, got.q) == expected
        found += 1
        wp, wm, wq = (env.value_at(v) for v in expected)
        assert got.depth == pytest.approx(min(wp, wq) - wm)
        assert got.ascent <= got.depth + 1e-12
        assert wp >= wm + h and wq >= wm + h
    assert found > 10


def test_valley_widening_reaches_valley():
    rng = np.random.default_rng(71)
    env = sample_environment(0.01, -0.5, 0.5, rng)
    valley, wide = find_valley_with_widening(env, 1.0, rng, max_extent=512.0)
    valley.validate(wide)
    assert wide.left_extent <= valley.p and valley.q <= wide.right_extent


def test_valley_widening_cap_is_hard_error():
    env = EnvironmentPath(0.5, np.zeros(5), 2)
    rng = np.random.default_rng(0)

    class ZeroRng:
        def standard_normal(self, n):
            return np.zeros(n)

    with pytest.raises(WindowCapExceeded):
        find_valley_with_widening(env, 1.0, ZeroRng(), max_extent=8.0)


def test_valley_brox_property_sampled():
    # A(valley) < 1 < D(valley) for the standard 1-valley, checked on a
    # modest sample here; the acceptance suite runs the full-size version.
    rng = np.random.default_rng(2024)
    ok = 0
    trials = 60
    for _ in range(trials):
        env = sample_environment(0.005, -8.0, 8.0, rng)
        try:
            valley, env = find_valley_with_widening(env, 1.0, rng, max_extent=256.0)
        except WindowCapExceeded:
            continue
        if valley.ascent < 1.0 < valley.depth:
            ok += 1
    assert ok / trials >= 0.9


# ---------------------------------------------------------------------------
# crossing points
# ---------------------------------------------------------------------------

def test_crossing_exact_absolute_value():
    env = abs_env(3)
    pair = crossing_points(ShiftedPotential(env, 0.0), 2.0)
    assert pair.a == pytest.approx(-2.0)
    assert pair.b == pytest.approx(2.0)


def test_crossing_threshold_not_reached():
    env = abs_env(3)
    with pytest.raises(ThresholdNotReached) as err:
        crossing_points(ShiftedPotential(env, 0.0), 5.0)
    assert err.value.side in ("left", "right")


def test_crossing_interpolated_segment():
    # W(1) = 1.5, W(1.01) = 2.5 -> crossing of level 2 at 1.005.
    step = 0.01
    n = 120
    xs = np.arange(-n, n + 1) * step
    vals = np.where(np.abs(xs) <= 1.0, 1.5 * np.abs(xs), 1.5 + 100.0 * (np.abs(xs) - 1.0))
    env = env_from_values(vals, n_left=n, step=step)
    pair = crossing_points(ShiftedPotential(env, 0.0), 2.0)
    assert pair.b == pytest.approx(1.005, abs=1e-9)
    assert pair.a == pytest.approx(-1.005, abs=1e-9)


def test_crossing_first_crossing_property():
    rng = np.random.default_rng(13)
    env = sample_environment(0.02, -30.0, 30.0, rng)
    shifted = ShiftedPotential(env, 0.0)
    pair = crossing_points(shifted, 1.2)
    assert shifted.evaluate(pair.a) >= 1.2 - 1e-9
    assert shifted.evaluate(pair.b) >= 1.2 - 1e-9
    inner = np.linspace(pair.a + 1e-9, pair.b - 1e-9, 500)
    vals = shifted.evaluate(inner)
    assert np.all(vals < 1.2 + 1e-9)


# ---------------------------------------------------------------------------
# Gibbs weight integral
# ---------------------------------------------------------------------------

def riemann_gibbs(shifted, alpha, a, b, n=200_001):
    ys = np.linspace(a, b, n)
    vals = np.exp(-alpha * shifted.evaluate(ys))
    return np.trapezoid(vals, ys)


def test_gibbs_alpha_zero_is_length():
    env = abs_env(3)
    g = gibbs_weight_integral(ShiftedPotential(env, 0.0), 0.0, -1.5, 2.5)
    assert g.value == pytest.approx(4.0)


def test_gibbs_closed_form_absolute_value():
    # integral over [-c, c] of exp(-alpha*|y|) = 2(1 - exp(-alpha*c))/alpha.
    alpha, r = 3.0, 0.7
    c = alpha * r
    env = abs_env(half=4.0, step=0.001)
    g = gibbs_weight_integral(ShiftedPotential(env, 0.0), alpha, -c, c)
    expected = 2.0 * (1.0 - math.exp(-alpha * alpha * r)) / alpha
    assert g.value == pytest.approx(expected, rel=1e-10)
    assert g.value == pytest.approx(riemann_gibbs(ShiftedPotential(env, 0.0), alpha, -c, c), rel=1e-6)


def test_gibbs_lower_bound_and_degenerate():
    rng = np.random.default_rng(37)
    env = sample_environment(0.05, -4.0, 4.0, rng)
    sh = ShiftedPotential(env, 0.0)
    g = gibbs_weight_integral(sh, 2.0, -3.0, 3.5)
    ys = np.linspace(-3.0, 3.5, 2000)
    bound = 6.5 * math.exp(-2.0 * np.max(sh.evaluate(ys)))
    assert g.value >= bound
    assert gibbs_weight_integral(sh, 2.0, 1.0, 1.0).value == 0.0


def test_gibbs_log_and_direct_agree():
    rng = np.random.default_rng(41)
    for _ in range(25):
        env = sample_environment(0.05, -5.0, 5.0, rng)
        sh = ShiftedPotential(env, 0.0)
        alpha = float(rng.uniform(0.0, 8.0))
        a = float(rng.uniform(-4.9, -0.1))
        b = float(rng.uniform(0.1, 4.9))
        g = gibbs_weight_integral(sh, alpha, a, b)
        assert math.isfinite(g.value)
        assert g.value == pytest.approx(math.exp(g.log_value), rel=1e-12)


def test_gibbs_log_survives_huge_exponents():
    # alpha*W around 10^3: direct value overflows, the log form must not.
    n = 100
    vals = -np.abs(np.arange(-n, n + 1)) * 0.1
    env = env_from_values(vals, n_left=n, step=0.1)
    g = gibbs_weight_integral(ShiftedPotential(env, 0.0), 200.0, -10.0, 10.0)
    assert math.isinf(g.value)
    # W(y) = -|y|, so the integrand is exp(200*|y|) over [-10, 10]:
    # 2*(e^2000 - 1)/200.
    expected_log = math.log(2.0 / 200.0) + 2000.0
    assert g.log_value == pytest.approx(expected_log, abs=1e-6)


# ---------------------------------------------------------------------------
# environment profile
# ---------------------------------------------------------------------------

def test_profile_center_value_is_reciprocal_integral():
    rng = np.random.default_rng(53)
    env = sample_environment(0.02, -20.0, 20.0, rng)
    sh = ShiftedPotential(env, 0.0)
    alpha, r = 2.0, 0.5
    pair = crossing_points(sh, alpha * r)
    g = gibbs_weight_integral(sh, alpha, pair.a, pair.b)
    prof = environment_profile(sh, alpha, r, [0.0])
    assert prof[0] == pytest.approx(1.0 / g.value, rel=1e-12)


def test_profile_closed_form_absolute_value():
    alpha, r = 2.5, 0.4
    env = abs_env(half=4.0, step=0.0005)
    prof = environment_profile(ShiftedPotential(env, 0.0), alpha, r, [0.0])
    expected = alpha / (2.0 * (1.0 - math.exp(-alpha * alpha * r)))
    assert prof[0] == pytest.approx(expected, rel=1e-9)


def test_profile_normalization():
    rng = np.random.default_rng(59)
    env = sample_environment(0.01, -30.0, 30.0, rng)
    sh = ShiftedPotential(env, 0.0)
    alpha, r = 3.0, 0.5
    pair = crossing_points(sh, alpha * r)
    xs = np.linspace(pair.a, pair.b, 20_001)
    dens = environment_profile(sh, alpha, r, xs)
    mass = np.trapezoid(dens, xs)
    assert abs(mass - 1.0) < 1e-4  # trapezoid error only; exact by construction


# ---------------------------------------------------------------------------
# Laplace equivalence diagnostic
# ---------------------------------------------------------------------------

def test_laplace_gap_zero_on_full_window():
    rng = np.random.default_rng(61)
    env = sample_environment(0.02, -20.0, 20.0, rng)
    sh = ShiftedPotential(env, 0.0)
    pair = crossing_points(sh, 0.5)
    gap = laplace_equivalence_check(sh, 4.0, pair.a, pair.b, 0.5)
    assert abs(gap) < 1e-12


def test_laplace_gap_uniform_integrand():
    rng = np.random.default_rng(67)
    env = sample_environment(0.02, -20.0, 20.0, rng)
    sh = ShiftedPotential(env, 0.0)
    pair = crossing_points(sh, 0.5)
    a = pair.a / 2.0
    b = pair.b / 2.0
    gap = laplace_equivalence_check(sh, 0.0, a, b, 0.5)
    expected = 1.0 - (b - a) / (pair.b - pair.a)
    assert gap == pytest.approx(expected, rel=1e-9)


def test_laplace_gap_decreases_in_alpha():
    # Centered at a valley bottom the Gibbs weight concentrates at 0, so
    # any fixed sub-interval around 0 captures the mass as alpha grows.
    rng = np.random.default_rng(1001)
    shrunk = 0
    trials = 25
    for _ in range(trials):
        env = sample_environment(0.01, -10.0, 10.0, rng)
        valley, env = find_valley_with_widening(env, 1.0, rng, max_extent=512.0)
        sh = ShiftedPotential(env, valley.m)
        pair = crossing_points(sh, 0.5)
        a, b = pair.a * 0.6, pair.b * 0.6
        gaps = [laplace_equivalence_check(sh, al, a, b, 0.5) for al in (5.0, 10.0, 20.0)]
        if gaps[0] >= gaps[1] >= gaps[2]:
            shrunk += 1
    assert shrunk / trials >= 0.8


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_env_csv_and_spec_record(tmp_path):
    rng = np.random.default_rng(5)
    env = sample_environment(0.5, -1.0, 1.5, rng,
                             provenance={"seed": 5, "stream": 0})
    out = tmp_path / "env.csv"
    env.to_csv(out)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "x,W"
    assert len(lines) == env.n_knots + 1
    rec = env.spec_record()
    assert '"seed": 5' in rec and '"step": 0.5' in rec
