"""Diffusion in a potential via the scale-function / time-change construction.

The process is X = S^{-1}(B(T^{-1}(t))) for a driving Brownian path B,
where S(x) is the integral of exp(alpha*W) from 0 to x and the clock T
accumulates dt * exp(-2*alpha*W) along the way.  No Euler scheme on the
formal SDE is ever used: the potential has no derivative to put in a drift
term.

The scale map is segment-exact on the piecewise-linear potential, and all
per-step quantities reduce to one table lookup plus a few flops: with
u = (b - S_i)*alpha*s_i*exp(-alpha*(w_i - w0)) for a driving value b in
segment i,

    x    = x_i + log1p(u)/(alpha*s_i)
    exp(-2*alpha*(W(x) - w0)) = exp(-2*alpha*(w_i - w0)) / (1 + u)^2

so the clock quadrature never calls exp during stepping.

A constant `center` subtracted from the potential before exponentiation
leaves the law of X unchanged (the generator is invariant under additive
shifts) but renormalizes driving time; experiments center at the valley
bottom to keep exponents near zero where the process lives.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .environment import WindowCapExceeded, extend_environment

__all__ = [
    "DrivingPath",
    "ScaleMap",
    "DiffusionPath",
    "LocalTimeProfile",
    "LocalTimeSummary",
    "RangeExceeded",
    "StepBudgetExceeded",
    "build_scale_map",
    "invert_scale",
    "simulate_path",
    "simulate_localtime_summary",
    "local_time_occupation",
    "local_time_transfer",
    "hitting_time",
    "inverse_local_time",
    "favorite_point",
    "rescale_to_unit_valley",
]

INFINITE_TIME = math.inf


class RangeExceeded(RuntimeError):
    """Driving value outside the represented range of the scale map."""


class StepBudgetExceeded(RuntimeError):
    """Simulation ran out of steps; carries partial diagnostics."""

    def __init__(self, message, clock, steps, extents):
        super().__init__(message)
        self.clock = clock
        self.steps = steps
        self.extents = extents


@dataclasses.dataclass(frozen=True)
class DrivingPath:
    """Brownian driving path samples B(k*dt) with B(0) = 0."""

    dt: float
    values: np.ndarray

    def __post_init__(self):
        if len(self.values) < 2:
            raise ValueError("driving path needs at least two samples")
        if self.values[0] != 0.0:
            raise ValueError("driving path must start at 0")


class ScaleMap:
    """S(x) = integral of exp(alpha*(W - center)) from 0, segment-exact.

    Stores the knot values both directly (possibly overflowing to inf) and
    as signed log magnitudes, so evaluation and inversion survive
    arbitrarily large exponents.
    """

    __slots__ = ("env", "alpha", "center", "origin", "breaks", "log_absbreaks",
                 "seg_rate", "seg_scale", "seg_decay", "seg_decay2",
                 "seg_log_scale", "_origin", "_xs")

    def __init__(self, env, alpha, center=0.0, origin=0.0):
        if alpha < 0:
            raise ValueError("alpha must be nonnegative")
        self.env = env
        self.alpha = float(alpha)
        self.center = float(center)
        origin_idx, origin_frac = env.index_frac(origin)
        if origin_frac != 0.0:
            raise ValueError("scale-map origin must be grid-aligned")
        self.origin = env.position(int(origin_idx))
        xs = env.positions()
        w = env.values - self.center
        widths = np.diff(xs)
        slopes = np.diff(env.values) / widths
        rate = alpha * slopes                      # d(alpha W)/dx per segment
        u = rate * widths
        # segment integral: width * exp(alpha*w_i) * phi(u), phi = (e^u-1)/u
        log_seg = alpha * w[:-1] + np.log(widths) + _log_phi(u)
        with np.errstate(over="ignore"):
            seg = np.exp(log_seg)
        i0 = int(origin_idx)
        breaks = np.empty(len(xs))
        breaks[i0] = 0.0
        with np.errstate(over="ignore", invalid="ignore"):
            breaks[i0 + 1:] = np.cumsum(seg[i0:])
            breaks[:i0] = -np.cumsum(seg[:i0][::-1])[::-1]
        self.breaks = breaks
        log_abs = np.full(len(xs), -math.inf)
        if i0 < len(xs) - 1:
            log_abs[i0 + 1:] = _log_cumsum(log_seg[i0:])
        if i0 > 0:
            log_abs[:i0] = _log_cumsum(log_seg[:i0][::-1])[::-1]
        self.log_absbreaks = log_abs
        self.seg_rate = rate
        with np.errstate(over="ignore"):
            self.seg_scale = np.exp(alpha * w[:-1])        # e^{alpha w_i}
            self.seg_decay = np.exp(-alpha * w[:-1])       # e^{-alpha w_i}
            self.seg_decay2 = np.exp(-2.0 * alpha * w[:-1])
        self.seg_log_scale = alpha * w[:-1]
        self._origin = i0
        self._xs = xs

    @property
    def lo(self):
        return self.breaks[0]

    @property
    def hi(self):
        return self.breaks[-1]

    def evaluate(self, x):
        """S(x), exact on knots, closed form inside segments."""
        idx, frac = self.env.index_frac(x)
        idx = np.atleast_1d(idx)
        frac = np.atleast_1d(frac)
        seg = np.minimum(idx, len(self.seg_rate) - 1)
        delta = frac * (self.env.position(seg + 1) - self.env.position(seg))
        u = self.seg_rate[seg] * delta
        term = delta * self.seg_scale[seg] * _phi(u)
        bad = ~np.isfinite(term) & (frac > 0)
        if np.any(bad):
            log_term = (self.seg_log_scale[seg[bad]] + np.log(delta[bad])
                        + _log_phi(u[bad]))
            term = term.copy()
            term[bad] = np.exp(log_term)
        out = self.breaks[idx] + np.where(frac > 0, term, 0.0)
        return out if out.ndim and np.ndim(x) else float(out[0])

    def segment_of(self, v):
        """Segment indices for driving values v; raises off the range."""
        v = np.atleast_1d(v)
        if np.any(v < self.lo) or np.any(v > self.hi):
            raise RangeExceeded("driving value escaped the represented environment")
        idx = np.searchsorted(self.breaks, v, side="right") - 1
        return np.clip(idx, 0, len(self.seg_rate) - 1)

    def invert(self, v):
        """x with S(x) = v, exact on breakpoints.

        Falls back to log-space arithmetic when the direct segment factors
        overflow or underflow.
        """
        scalar = np.ndim(v) == 0
        v = np.atleast_1d(np.asarray(v, dtype=float))
        idx = self.segment_of(v)
        rel = v - self.breaks[idx]
        rate = self.seg_rate[idx]
        u = rel * rate * self.seg_decay[idx]
        xs = self._xs
        decay = self.seg_decay[idx]
        # identity segments reassociate so the flat-potential inversion is
        # bit-exact: (x_i - S_i) + v with x_i == S_i returns v itself
        flat = np.where(decay == 1.0,
                        (xs[idx] - self.breaks[idx]) + v,
                        xs[idx] + rel * decay)
        with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
            out = np.where(rate != 0.0,
                           xs[idx] + np.log1p(u) / np.where(rate == 0, 1.0, rate),
                           flat)
        bad = ~np.isfinite(out) | (~np.isfinite(u) & (rel > 0))
        if np.any(bad):
            out = out.copy()
            for j in np.nonzero(bad)[0]:
                out[j] = self._invert_log(float(rel[j]), int(idx[j]))
        return float(out[0]) if scalar else out

    def _invert_log(self, rel, i):
        xs = self._xs
        if rel <= 0.0:
            return xs[i]
        rate = self.seg_rate[i]
        log_u = math.log(rel) + math.log(abs(rate)) - self.seg_log_scale[i]
        if rate > 0:
            # x = x_i + log(1 + u)/rate with u = exp(log_u)
            if log_u > 50.0:
                return xs[i] + log_u / rate
            return xs[i] + math.log1p(math.exp(log_u)) / rate
        u = -math.exp(log_u)
        return xs[i] + math.log1p(u) / rate

    def clock_factor(self, v, idx=None):
        """exp(-2*alpha*(W(S^{-1}(v)) - center)) without calling exp."""
        v = np.atleast_1d(v)
        if idx is None:
            idx = self.segment_of(v)
        u = (v - self.breaks[idx]) * self.seg_rate[idx] * self.seg_decay[idx]
        denom = (1.0 + u) ** 2
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            out = self.seg_decay2[idx] / denom
        return np.where(np.isfinite(out), out, 0.0)


def _phi(u):
    u = np.asarray(u, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.where(np.abs(u) < 1e-12, 1.0,
                       np.expm1(u) / np.where(u == 0, 1.0, u))
    return out


def _log_phi(u):
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    tiny = np.abs(u) < 1e-12
    big = u > 30.0
    neg = u < -30.0
    mid = ~(tiny | big | neg)
    out[tiny] = u[tiny] / 2.0
    out[big] = u[big] - np.log(u[big])
    out[neg] = -np.log(-u[neg])
    um = u[mid]
    out[mid] = np.log(np.expm1(um) / um)
    return out


def _log_cumsum(log_terms):
    """log of the running sum of exp(log_terms), stable."""
    return np.logaddexp.accumulate(log_terms)


def build_scale_map(env, alpha, center=0.0, origin=0.0):
    """Scale map of the potential; `center` shifts W before exponentiation.

    `origin` anchors S(origin) = 0, which starts the diffusion there (the
    shifted-potential construction for processes started off 0).
    """
    return ScaleMap(env, alpha, center, origin)


def invert_scale(scale_map, v):
    return scale_map.invert(v)


@dataclasses.dataclass(frozen=True)
class DiffusionPath:
    """Simulated trajectory with its driving path and clock.

    positions[k] = S^{-1}(B(k*dt)) at clock[k]; mid_positions[k] is the
    within-step position S^{-1} of the driving midpoint, the point charged
    by the clock quadrature and the occupation estimator.
    """

    driving: DrivingPath
    clock: np.ndarray
    positions: np.ndarray
    mid_positions: np.ndarray
    alpha: float
    center: float

    @property
    def dt(self):
        return self.driving.dt

    @property
    def total_time(self):
        return float(self.clock[-1])

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("t,x\n")
            for t, x in zip(self.clock, self.positions):
                fh.write(f"{float(t)!r},{float(x)!r}\n")


@dataclasses.dataclass(frozen=True)
class LocalTimeProfile:
    """Binned estimate of the local time x -> L(t, x)."""

    t: float
    bin_centers: np.ndarray
    values: np.ndarray

    def validate(self):
        if np.any(self.values < 0):
            raise ValueError("negative local time")
        width = self.bin_centers[1] - self.bin_centers[0] if len(self.bin_centers) > 1 else 1.0
        mass = float(np.sum(self.values) * width)
        if self.t > 0 and abs(mass - self.t) / self.t > 1e-2:
            raise ValueError("occupation identity violated")
        return self

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("x,L\n")
            for x, v in zip(self.bin_centers, self.values):
                fh.write(f"{float(x)!r},{float(v)!r}\n")


class _Accumulator:
    """Origin-aligned occupation histogram that survives window extension."""

    def __init__(self, bin_width):
        self.width = bin_width
        self.lo_idx = 0
        self.masses = np.zeros(0)

    def _ensure(self, lo_idx, hi_idx):
        if len(self.masses) == 0:
            self.lo_idx = lo_idx
            self.masses = np.zeros(hi_idx - lo_idx + 1)
            return
        if lo_idx < self.lo_idx:
            self.masses = np.concatenate([np.zeros(self.lo_idx - lo_idx), self.masses])
            self.lo_idx = lo_idx
        if hi_idx >= self.lo_idx + len(self.masses):
            extra = hi_idx - (self.lo_idx + len(self.masses)) + 1
            self.masses = np.concatenate([self.masses, np.zeros(extra)])

    def add(self, bin_indices, weights):
        lo = int(bin_indices.min())
        hi = int(bin_indices.max())
        self._ensure(lo, hi)
        self.masses += np.bincount(bin_indices - self.lo_idx, weights=weights,
                                   minlength=len(self.masses))

    def profile(self, t):
        centers = (self.lo_idx + np.arange(len(self.masses)) + 0.5) * self.width
        return LocalTimeProfile(t, centers, self.masses / self.width)

    def mass_at(self, x):
        idx = int(np.floor(x / self.width)) - self.lo_idx
        if idx < 0 or idx >= len(self.masses):
            return 0.0
        return float(self.masses[idx])


@dataclasses.dataclass
class LocalTimeSummary:
    """Streaming product of one simulation: everything the experiments use."""

    alpha: float
    dt: float
    t_target: float
    center: float
    profile: LocalTimeProfile
    endpoint: float
    steps: int
    extents: tuple
    escaped: bool
    driving_end: float


def _extend_for(env, scale, alpha, center, origin, lo_needed, hi_needed, env_rng,
                max_extent):
    """Widen the environment until the scale map covers [lo, hi]."""
    while scale.lo > lo_needed or scale.hi < hi_needed:
        half = max(abs(env.left_extent), env.right_extent, env.step)
        new_half = 2.0 * half
        if new_half > max_extent:
            raise WindowCapExceeded("environment extent cap hit during simulation")
        n_half = math.ceil(new_half / env.step)
        env = extend_environment(env, -n_half * env.step, n_half * env.step, env_rng)
        scale = ScaleMap(env, alpha, center, origin)
    return env, scale


def _simulate(env, alpha, drive_rng, dt, t_target, *, center=0.0, start=0.0,
              env_rng=None, step_budget=200_000_000, max_extent=1024.0,
              chunk=131_072, bin_width=None, escape_bounds=None, store_path=False):
    """Shared stepping core for stored-path and streaming simulation.

    Draws the driving path in chunks, converts to positions through the
    scale map, accumulates the clock quadrature, and stops at the first
    step whose clock reaches t_target.  The occupation histogram charges
    each step's dT to the bin of the driving-midpoint position, truncating
    the final step exactly at t_target.
    """
    if dt <= 0 or t_target <= 0:
        raise ValueError("dt and t_target must be positive")
    env_rng = env_rng if env_rng is not None else drive_rng
    scale = ScaleMap(env, alpha, center, start)
    width = bin_width if bin_width is not None else 4.0 * math.sqrt(dt)
    acc = _Accumulator(width)
    sd = math.sqrt(dt)
    b_last = 0.0
    clock = 0.0
    steps = 0
    escaped = False
    if escape_bounds is not None:
        esc_lo, esc_hi = (scale.evaluate(escape_bounds[0]), scale.evaluate(escape_bounds[1]))
    drv_parts, pos_parts, clk_parts, mid_parts = [], [], [], []
    if store_path:
        drv_parts.append(np.zeros(1))
        pos_parts.append(np.array([scale.origin]))
        clk_parts.append(np.zeros(1))
    endpoint = None
    while True:
        if steps >= step_budget:
            raise StepBudgetExceeded("step budget exceeded before reaching the horizon",
                                     clock, steps, (env.left_extent, env.right_extent))
        # clock gains at most dt per step wherever W >= center, so the
        # remaining-time guess below keeps short runs from drawing far
        # beyond their horizon (and needlessly widening the window)
        guess = int(1.25 * (t_target - clock) / dt) + 16
        n = int(min(chunk, step_budget - steps, max(4096, guess)))
        b = b_last + np.cumsum(drive_rng.standard_normal(n) * sd)
        lo_needed = min(b.min(), b_last)
        hi_needed = max(b.max(), b_last)
        if lo_needed < scale.lo or hi_needed > scale.hi:
            env, scale = _extend_for(env, scale, alpha, center, scale.origin,
                                     lo_needed, hi_needed, env_rng, max_extent)
            if escape_bounds is not None:
                esc_lo = scale.evaluate(escape_bounds[0])
                esc_hi = scale.evaluate(escape_bounds[1])
        b_full = np.concatenate([[b_last], b])
        b_mid = 0.5 * (b_full[:-1] + b_full[1:])
        idx = scale.segment_of(b_mid)
        dT = dt * scale.clock_factor(b_mid, idx)
        cum = clock + np.cumsum(dT)
        if escape_bounds is not None and not escaped:
            escaped = bool(b_mid.min() < esc_lo or b_mid.max() > esc_hi)
        done = cum[-1] >= t_target
        cut = int(np.searchsorted(cum, t_target)) if done else n - 1
        weights = dT[:cut + 1].copy()
        if done:
            weights[cut] = t_target - (cum[cut - 1] if cut else clock)
        mid_chunk = scale.invert(b_mid[:cut + 1])
        acc.add(np.floor(mid_chunk / width).astype(np.int64), weights)
        if store_path:
            drv_parts.append(b_full[1:cut + 2])
            pos_parts.append(scale.invert(b_full[1:cut + 2]))
            clk_parts.append(cum[:cut + 1])
            mid_parts.append(mid_chunk)
        steps += cut + 1
        if done:
            before = cum[cut - 1] if cut else clock
            x_lo = scale.invert(b_full[cut])
            x_hi = scale.invert(b_full[cut + 1])
            frac = (t_target - before) / dT[cut] if dT[cut] > 0 else 1.0
            endpoint = x_lo + (x_hi - x_lo) * frac
            b_last = b_full[cut + 1]
            clock = cum[cut]
            break
        b_last = b_full[-1]
        clock = cum[-1]
    summary = LocalTimeSummary(
        alpha=alpha, dt=dt, t_target=t_target, center=center,
        profile=acc.profile(t_target), endpoint=float(endpoint), steps=steps,
        extents=(env.left_extent, env.right_extent), escaped=escaped,
        driving_end=float(b_last),
    )
    if not store_path:
        return summary, env
    driving = DrivingPath(dt, np.concatenate(drv_parts))
    path = DiffusionPath(
        driving=driving,
        clock=np.concatenate(clk_parts),
        positions=np.concatenate(pos_parts),
        mid_positions=np.concatenate(mid_parts) if mid_parts else np.zeros(0),
        alpha=alpha,
        center=center,
    )
    return summary, env, path


def simulate_path(env, alpha, rng, dt, t_target, center=0.0, step_budget=50_000_000,
                  max_extent=1024.0, chunk=131_072):
    """Simulate to clock >= t_target, returning the full trajectory.

    The same generator drives both the Brownian path and any on-demand
    widening of the environment, so results are reproducible from
    (seed, arguments) alone.  Returns (path, env) with the possibly
    widened environment.
    """
    _, env, path = _simulate(env, alpha, rng, dt, t_target, center=center,
                             step_budget=step_budget, max_extent=max_extent,
                             chunk=chunk, store_path=True)
    return path, env


def simulate_localtime_summary(env, alpha, drive_rng, dt, t_target, *, center=0.0,
                               start=0.0, env_rng=None, bin_width=None,
                               escape_bounds=None, step_budget=200_000_000,
                               max_extent=1024.0, chunk=131_072):
    """Streaming simulation keeping only occupation aggregates.

    Identical stepping to simulate_path without storing the trajectory, so
    long horizons run in constant memory.  `start` launches the diffusion
    at a grid point other than 0 (the shifted-potential construction)."""
    summary, _ = _simulate(env, alpha, drive_rng, dt, t_target, center=center,
                           start=start, env_rng=env_rng, step_budget=step_budget,
                           max_extent=max_extent, chunk=chunk, bin_width=bin_width,
                           escape_bounds=escape_bounds, store_path=False)
    return summary


def local_time_occupation(path, bin_width, t):
    """Histogram local-time estimate at time t from a stored path.

    Charges each step's clock increment to the bin of its mid position,
    truncating the final straddling step exactly at t, so the values sum
    to t / bin_width exactly.
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    if t > path.total_time:
        raise ValueError("t beyond the simulated horizon")
    dT = np.diff(path.clock)
    cut = int(np.searchsorted(path.clock[1:], t))
    weights = dT[:cut + 1].copy()
    weights[cut] = t - path.clock[cut]
    acc = _Accumulator(bin_width)
    acc.add(np.floor(path.mid_positions[:cut + 1] / bin_width).astype(np.int64), weights)
    return acc.profile(t)


def local_time_transfer(path, scale_map, x, t, band=None):
    """Local time at x via the driving path: exp(-alpha*(W(x)-c)) times the
    band-occupation density of B at S(x) up to the driving time T^{-1}(t).

    Returns 0 when no driving sample falls in the band (a valid estimate).
    """
    if t > path.total_time:
        raise ValueError("t beyond the simulated horizon")
    band = band if band is not None else 2.0 * math.sqrt(path.dt)
    target = scale_map.evaluate(x)
    k = int(np.searchsorted(path.clock, t, side="right"))
    b = path.driving.values
    mids = 0.5 * (b[:-1] + b[1:])[:max(k - 1, 0)]
    count = int(np.sum(np.abs(mids - target) <= band))
    lb_density = count * path.dt / (2.0 * band)
    prefactor = transfer_prefactor(scale_map, x)
    return prefactor * lb_density


def transfer_prefactor(scale_map, x):
    """The exp(-alpha*(W(x) - center)) factor of the transfer estimator."""
    w = scale_map.env.value_at(x) - scale_map.center
    return math.exp(-scale_map.alpha * w)


def hitting_time(path, x):
    """First clock time the interpolated trajectory crosses x; inf if never."""
    pos = path.positions
    if pos[0] == x:
        return 0.0
    sign = pos - x
    cross = np.nonzero(sign[:-1] * sign[1:] <= 0.0)[0]
    if len(cross) == 0:
        return INFINITE_TIME
    k = int(cross[0])
    if pos[k + 1] == pos[k]:
        return float(path.clock[k + 1])
    frac = (x - pos[k]) / (pos[k + 1] - pos[k])
    return float(path.clock[k] + (path.clock[k + 1] - path.clock[k]) * frac)


def inverse_local_time(path, r, x, bin_width=None):
    """Smallest clock time whose occupation estimate at x reaches r."""
    if r < 0:
        raise ValueError("r must be nonnegative")
    if r == 0:
        return 0.0
    width = bin_width if bin_width is not None else 4.0 * math.sqrt(path.dt)
    bin_idx = math.floor(x / width)
    in_bin = np.floor(path.mid_positions / width).astype(np.int64) == bin_idx
    occ = np.cumsum(np.diff(path.clock) * in_bin) / width
    hits = np.nonzero(occ >= r)[0]
    if len(hits) == 0:
        return INFINITE_TIME
    return float(path.clock[int(hits[0]) + 1])


def favorite_point(profile):
    """Leftmost bin center attaining the maximal local time, with the value."""
    if len(profile.values) == 0:
        raise ValueError("empty profile")
    k = int(np.argmax(profile.values))
    return float(profile.bin_centers[k]), float(profile.values[k])


def profile_value_at(profile, x):
    """Local-time value of the bin containing x; 0 outside the histogram."""
    if len(profile.bin_centers) == 0:
        return 0.0
    width = profile.bin_centers[1] - profile.bin_centers[0] \
        if len(profile.bin_centers) > 1 else 1.0
    lo_idx = int(round(profile.bin_centers[0] / width - 0.5))
    j = int(np.floor(x / width)) - lo_idx
    if j < 0 or j >= len(profile.values):
        return 0.0
    return float(profile.values[j])


@dataclasses.dataclass(frozen=True)
class UnitValleyScaling:
    """Mappings from the rescaled frame back to the original one."""

    alpha: float

    def time_to_unscaled(self, t):
        return self.alpha ** 4 * t

    def space_to_unscaled(self, x):
        return self.alpha ** 2 * x

    def localtime_to_unscaled(self, ell):
        return self.alpha ** 2 * ell


def rescale_to_unit_valley(env, alpha):
    """Potential rescaling x -> x/alpha^2, W -> W/alpha.

    Simulating in the rescaled potential (multiplied back by alpha) up to
    time t/alpha^4 reproduces, in law, the original diffusion at time t
    with space contracted by alpha^2 and local time by alpha^2.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    from .environment import EnvironmentPath
    scaled = EnvironmentPath(env.step / alpha ** 2, env.values / alpha,
                             env.n_left, provenance=env.provenance)
    return scaled, UnitValleyScaling(alpha)
