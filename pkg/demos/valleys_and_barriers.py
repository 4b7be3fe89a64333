"""Walk through the environment machinery on one sampled potential.

Samples a two-sided Brownian potential, locates its h-extrema and the
standard valley around the origin, and evaluates the barrier, crossing,
and Gibbs-weight quantities that the limit theorems are built from.

Run:  python demos/valleys_and_barriers.py
"""

import numpy as np

from broxsim import (
    ShiftedPotential,
    ThresholdNotReached,
    barrier,
    crossing_points,
    environment_profile,
    extend_environment,
    find_h_extrema,
    find_valley_with_widening,
    gibbs_weight_integral,
    sample_environment,
)

rng = np.random.default_rng(42)

# A potential on [-10, 10] at millistep resolution, pinned to 0 at the origin.
env = sample_environment(step=1e-3, left_extent=-10.0, right_extent=10.0, rng=rng)
print(f"sampled {env.n_knots} knots on [{env.left_extent}, {env.right_extent}]")
print(f"W(0) = {env.value_at(0.0)},  W(1) = {env.value_at(1.0):+.3f}")

# h-extrema alternate between minima and maxima; coarser h keeps fewer.
for h in (0.5, 1.0, 2.0):
    extrema = find_h_extrema(env, h)
    kinds = "".join("m" if k == "min" else "M" for _, k in extrema)
    print(f"h = {h}: {len(extrema):3d} extrema, pattern {kinds[:40]}")

# The standard 1-valley around the origin, widening the window on demand.
valley, env = find_valley_with_widening(env, 1.0, rng)
print(f"\nstandard 1-valley: p = {valley.p:+.3f}, m = {valley.m:+.3f}, "
      f"q = {valley.q:+.3f}")
print(f"depth D = {valley.depth:.3f} (> 1), inner ascent A = {valley.ascent:.3f} (< 1)")
print(f"barrier from p to m: {barrier(env, valley.p, valley.m):.3f}")
print(f"barrier from q to m: {barrier(env, valley.q, valley.m):.3f}")

# Re-center the potential at the bottom: crossing points and the
# normalized Gibbs weight of the re-centered landscape.  A crossing level
# above the valley walls may sit outside the window; widen until it fits.
alpha, r = 5.0, 0.5
while True:
    shifted = ShiftedPotential(env, valley.m)
    try:
        pair = crossing_points(shifted, theta=alpha * r)
        break
    except ThresholdNotReached:
        half = 2.0 * max(abs(env.left_extent), env.right_extent)
        env = extend_environment(env, -half, half, rng)
        print(f"widened the window to +-{half:g} for the level-{alpha * r} crossing")
g = gibbs_weight_integral(shifted, alpha, pair.a, pair.b)
print(f"\nalpha = {alpha}, level {alpha * r}: crossings a = {pair.a:+.3f}, "
      f"b = {pair.b:+.3f}")
print(f"Gibbs weight integral = {g.value:.4g} (log form {g.log_value:+.3f})")

xs = np.linspace(pair.a, pair.b, 2001)
dens = environment_profile(shifted, alpha, r, xs)
mass = np.trapezoid(dens, xs)
print(f"normalized profile: peak {dens.max():.3f}, mass over the window {mass:.6f}")
