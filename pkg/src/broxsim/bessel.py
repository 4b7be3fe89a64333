"""Limit objects built from Bessel processes.

A two-sided process glued from two independent 3-d Bessel paths drives the
reference laws: the functional integral(exp(-R)), its normalized profile,
and the equivalent representation 4*tau(1) + 4*tau~(1) through hitting
times of a squared 2-d Bessel process.

Bessel paths are sampled as norms of Gaussian random walks, which is exact
in law at the sample points for any step schedule and avoids the singular
drift of the radial SDE at 0.  Far above the integrand's support the walk
takes geometrically coarser steps (still exact in law), so the path can be
run to a high stopping level cheaply: stopping at level c leaves an
expected unaccounted mass of about 2*Gamma(3)/c per side -- the process
returns below any level y < c with probability y/c, so naive e^{-c}-style
truncation bounds are wrong and c must be large, not deep lookaheads.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

__all__ = [
    "BesselPath",
    "TwoSidedBessel",
    "FunctionalSample",
    "LevelHorizon",
    "FixedHorizon",
    "HorizonNotReached",
    "sample_bessel3",
    "sample_two_sided",
    "functional_sample",
    "profile_sample",
    "sample_profile_point",
    "besq2_hitting_time",
    "rayknight_alias_sample",
]

_SQRT2 = math.sqrt(2.0)


class HorizonNotReached(RuntimeError):
    """The stopping rule did not fire within the step budget."""


@dataclasses.dataclass(frozen=True)
class LevelHorizon:
    """Stop at the first passage of `level`.

    Steps stay at the caller's dt while R <= fine_level (where exp(-R)
    carries mass) and coarsen geometrically above it.  The mass beyond the
    stopping time has expectation about 2*Gamma(3)/level per side; the
    recorded bound carries a 1.5x allowance on that.
    """

    level: float = 20000.0
    fine_level: float = 15.0
    max_time: float = 1e12

    def tail_bound(self):
        return 6.0 / self.level


@dataclasses.dataclass(frozen=True)
class FixedHorizon:
    """Plain fixed-length horizon; no tail control (bound is infinite)."""

    t_end: float = 1.0

    def tail_bound(self):
        return math.inf


@dataclasses.dataclass(frozen=True)
class BesselPath:
    """Samples of a 3-d Bessel process started at 0.

    `values[k]` sits at time k*dt while the path stays in the fine zone;
    when step coarsening engaged, `times` carries the exact sample times.
    """

    dt: float
    values: np.ndarray
    horizon: object
    dimension: int = 3
    start: float = 0.0
    times: np.ndarray | None = None

    @property
    def sample_times(self):
        if self.times is not None:
            return self.times
        return np.arange(len(self.values)) * self.dt

    @property
    def t_end(self):
        return float(self.sample_times[-1])

    def interp(self, ts):
        ts = np.asarray(ts, dtype=float)
        if np.any(ts < 0) or np.any(ts > self.t_end + 1e-12):
            raise ValueError("query beyond the simulated window")
        return np.interp(ts, self.sample_times, self.values)


_ZONE_TOP = 1e9


def _zone_table(dt0, fine_level):
    """(lower_edge, upper_edge, dt) ladder of coarsening zones above fine_level.

    dt grows 4x per sqrt(2)-zone (super-diffusive, so high zones cost a
    vanishing share) but never exceeds lower_edge^2/12, which keeps a
    single step from jumping across a zone.  The ladder is independent of
    the stopping level so that runs with different levels but a shared
    generator consume identical draws until the lower one stops.
    """
    zones = []
    j = 0
    lo = fine_level
    while lo < _ZONE_TOP:
        hi = lo * _SQRT2
        dt = min(dt0 * 4.0 ** (j + 1), lo * lo / 12.0)
        zones.append((lo, hi, dt))
        lo = hi
        j += 1
    return zones


def sample_bessel3(dt, horizon_rule, rng, chunk=4096):
    """Sample R = |3-d Gaussian walk| until the horizon rule fires.

    With a FixedHorizon the walk is uniform at the given dt.  With a
    LevelHorizon it runs at dt in the fine zone and coarsens above, until
    the first sample at or above the stopping level.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if isinstance(horizon_rule, FixedHorizon):
        n = int(round(horizon_rule.t_end / dt))
        steps = rng.standard_normal((n, 3)) * math.sqrt(dt)
        walk = np.vstack([np.zeros(3), np.cumsum(steps, axis=0)])
        return BesselPath(dt, np.linalg.norm(walk, axis=1), horizon_rule)

    rule = horizon_rule
    zones = _zone_table(dt, rule.fine_level)
    edges = np.array([z[0] for z in zones])
    pos = np.zeros(3)
    t = 0.0
    coarsened = False
    val_parts = [np.zeros(1)]
    time_parts = [np.zeros(1)]
    zone = 0  # 0 = fine zone; j >= 1 indexes zones[j-1]
    while True:
        if zone == 0:
            lo, hi, dtz = 0.0, zones[0][0], dt
        else:
            lo, hi, dtz = zones[zone - 1]
            coarsened = True
        span = hi - lo if zone else hi
        n = int(np.clip(span * span / dtz / 4.0, 64, chunk))
        steps = rng.standard_normal((n, 3)) * math.sqrt(dtz)
        walk = pos + np.cumsum(steps, axis=0)
        radii = np.linalg.norm(walk, axis=1)
        exits = radii >= min(hi, rule.level)
        if zone:
            exits |= radii < 0.8 * lo
        hit = np.nonzero(exits)[0]
        cut = int(hit[0]) if len(hit) else n - 1
        val_parts.append(radii[:cut + 1])
        time_parts.append(t + dtz * np.arange(1, cut + 2))
        pos = walk[cut]
        t = t + dtz * (cut + 1)
        r = radii[cut]
        if r >= rule.level:
            values = np.concatenate(val_parts)
            times = np.concatenate(time_parts)
            return BesselPath(dt, values, rule, times=times if coarsened else None)
        if t > rule.max_time:
            raise HorizonNotReached(
                f"level rule did not fire within {rule.max_time} time units")
        if r >= hi:
            zone += 1
        elif zone and r < 0.8 * lo:
            zone = int(np.searchsorted(edges, r, side="right"))


@dataclasses.dataclass(frozen=True)
class TwoSidedBessel:
    """R(x) = R1(x) for x >= 0 and R2(-x) for x < 0, independent sides."""

    right: BesselPath
    left: BesselPath

    def evaluate(self, xs):
        xs = np.asarray(xs, dtype=float)
        out = np.empty_like(xs)
        pos = xs >= 0
        out[pos] = self.right.interp(xs[pos])
        out[~pos] = self.left.interp(-xs[~pos])
        return out


def sample_two_sided(dt, rng, horizon_rule=None):
    """Two independent sides from child streams of ``rng``.

    Spawned streams keep the sides' draws decoupled: a change to one
    side's stopping level cannot shift the other side's sample path.
    """
    rule = horizon_rule or LevelHorizon()
    stream_r, stream_l = rng.spawn(2)
    right = sample_bessel3(dt, rule, stream_r)
    left = sample_bessel3(dt, rule, stream_l)
    return TwoSidedBessel(right=right, left=left)


@dataclasses.dataclass(frozen=True)
class FunctionalSample:
    """One draw of integral(exp(-R)) with its recorded truncation bound.

    The bound caps the expected mass beyond the stopping level, not an
    almost-sure remainder.
    """

    value: float
    truncation_bound: float
    half_right: float = 0.0
    half_left: float = 0.0


def _half_integral(path):
    return float(np.trapezoid(np.exp(-path.values), x=path.sample_times))


def functional_sample(two_sided, dt=None):
    """Trapezoidal integral of exp(-R) over both sides plus tail bound."""
    for side in (two_sided.right, two_sided.left):
        if math.isinf(side.horizon.tail_bound()):
            raise ValueError("side sampled without a tail-controlling horizon rule")
    right = _half_integral(two_sided.right)
    left = _half_integral(two_sided.left)
    bound = two_sided.right.horizon.tail_bound() + two_sided.left.horizon.tail_bound()
    return FunctionalSample(value=right + left, truncation_bound=bound,
                            half_right=right, half_left=left)


def profile_sample(two_sided, xs):
    """Normalized profile exp(-R(x)) / integral(exp(-R)) at the queried xs."""
    func = functional_sample(two_sided)
    return np.exp(-two_sided.evaluate(xs)) / func.value


def sample_profile_point(two_sided, rng):
    """One draw from the density exp(-R)/integral over the simulated window.

    Inverse-CDF sampling on the trapezoid-interpolated weight.
    """
    right, left = two_sided.right, two_sided.left
    xs = np.concatenate([-left.sample_times[::-1], right.sample_times[1:]])
    dens = np.exp(-np.concatenate([left.values[::-1], right.values[1:]]))
    seg = 0.5 * (dens[:-1] + dens[1:]) * np.diff(xs)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    u = rng.uniform(0.0, cum[-1])
    k = int(np.searchsorted(cum, u, side="right") - 1)
    k = min(k, len(seg) - 1)
    frac = (u - cum[k]) / seg[k] if seg[k] > 0 else 0.0
    return float(xs[k] + frac * (xs[k + 1] - xs[k]))


def besq2_hitting_time(dt, rng, max_steps=20_000_000, chunk=65536):
    """First time the squared norm of planar Brownian motion reaches 1.

    Linear interpolation of |B|^2 across the crossing step corrects the
    first-order overshoot bias.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    sd = math.sqrt(dt)
    last = np.zeros(2)
    prev_sq = 0.0
    done_steps = 0
    while done_steps < max_steps:
        steps = rng.standard_normal((chunk, 2)) * sd
        walk = last + np.cumsum(steps, axis=0)
        sq = walk[:, 0] ** 2 + walk[:, 1] ** 2
        hits = np.nonzero(sq >= 1.0)[0]
        if len(hits):
            k = int(hits[0])
            before = prev_sq if k == 0 else sq[k - 1]
            frac = (1.0 - before) / (sq[k] - before)
            return (done_steps + k + frac) * dt
        last = walk[-1]
        prev_sq = sq[-1]
        done_steps += chunk
    raise HorizonNotReached("squared Bessel walk never reached 1 within budget")


def rayknight_alias_sample(dt, rng):
    """One draw of 4*tau(1) + 4*tau~(1) from two independent hitting times."""
    return 4.0 * besq2_hitting_time(dt, rng) + 4.0 * besq2_hitting_time(dt, rng)
