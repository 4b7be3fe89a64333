"""Two-sided Brownian potentials on a uniform grid.

The environment is a piecewise-linear path W with W(0) = 0, sampled with
independent Gaussian increments on each side of the origin.  All analysis
(barriers, h-extrema, standard valleys, crossing points, Gibbs weights) is
exact on the piecewise-linear interpolant: extrema sit at knots and every
integral of exp(+-alpha*W) has a closed form per segment.
"""

from __future__ import annotations

import dataclasses
import json
import math

import numpy as np

__all__ = [
    "EnvironmentPath",
    "ShiftedPotential",
    "Valley",
    "CrossingPair",
    "GibbsIntegral",
    "ValleyNotContained",
    "ThresholdNotReached",
    "WindowCapExceeded",
    "sample_environment",
    "extend_environment",
    "barrier",
    "find_h_extrema",
    "standard_valley",
    "find_valley_with_widening",
    "crossing_points",
    "gibbs_weight_integral",
    "environment_profile",
    "laplace_equivalence_check",
]


class ValleyNotContained(RuntimeError):
    """The current window holds no standard h-valley; widen and retry."""


class WindowCapExceeded(RuntimeError):
    """Geometric widening hit the configured extent cap without a valley."""


class ThresholdNotReached(RuntimeError):
    """The shifted potential never reaches the crossing level on one side."""

    def __init__(self, side: str, theta: float):
        super().__init__(f"potential never reaches {theta} on the {side} side")
        self.side = side
        self.theta = theta


class EnvironmentPath:
    """Piecewise-linear potential on a uniform grid containing the origin.

    Immutable after construction.  Knot i sits at (i - n_left) * step and
    the origin knot carries the exact value 0.0.
    """

    __slots__ = ("step", "n_left", "n_right", "values", "provenance")

    def __init__(self, step, values, n_left, provenance=None):
        values = np.array(values, dtype=float)
        if step <= 0:
            raise ValueError("step must be positive")
        if values.ndim != 1 or len(values) < 1:
            raise ValueError("values must be a nonempty 1-d sequence")
        if not 0 <= n_left < len(values):
            raise ValueError("origin knot outside the grid")
        if values[n_left] != 0.0:
            raise ValueError("value at the origin must be exactly 0")
        self.step = float(step)
        self.n_left = int(n_left)
        self.n_right = len(values) - n_left - 1
        values.flags.writeable = False
        self.values = values
        self.provenance = dict(provenance) if provenance else None

    @property
    def left_extent(self):
        return -self.n_left * self.step

    @property
    def right_extent(self):
        return self.n_right * self.step

    @property
    def n_knots(self):
        return len(self.values)

    def positions(self):
        """Knot abscissae as an array."""
        return (np.arange(self.n_knots) - self.n_left) * self.step

    def position(self, index):
        return (index - self.n_left) * self.step

    def index_frac(self, x):
        """Grid index and in-segment fraction for positions x (vectorized)."""
        x = np.asarray(x, dtype=float)
        fid = x / self.step + self.n_left
        idx = np.floor(fid).astype(np.int64)
        frac = fid - idx
        snap_hi = frac > 1.0 - 1e-9
        idx = np.where(snap_hi, idx + 1, idx)
        frac = np.where(snap_hi | (frac < 1e-9), 0.0, frac)
        if np.any(idx < 0) or np.any(idx > self.n_knots - 1):
            raise ValueError("position outside the environment extents")
        if np.any((idx == self.n_knots - 1) & (frac > 0)):
            raise ValueError("position outside the environment extents")
        return idx, frac

    def value_at(self, x):
        """W(x) by linear interpolation; exact at knots."""
        idx, frac = self.index_frac(x)
        base = self.values[idx]
        upper = self.values[np.minimum(idx + 1, self.n_knots - 1)]
        out = np.where(frac == 0.0, base, base * (1.0 - frac) + upper * frac)
        return out if out.ndim else float(out)

    def contains(self, x):
        return self.left_extent <= x <= self.right_extent

    def to_csv(self, path):
        xs = self.positions()
        with open(path, "w") as fh:
            fh.write("x,W\n")
            for x, w in zip(xs, self.values):
                fh.write(f"{float(x)!r},{float(w)!r}\n")

    def spec_record(self):
        """Seeded-spec JSON record; requires sampling provenance."""
        if self.provenance is None:
            raise ValueError("environment carries no sampling provenance")
        rec = {
            "seed": self.provenance.get("seed"),
            "stream": self.provenance.get("stream"),
            "step": self.step,
            "left": self.left_extent,
            "right": self.right_extent,
        }
        return json.dumps(rec)


def _grid_count(extent, step, name):
    k = abs(extent) / step
    n = int(round(k))
    if abs(k - n) > 1e-6:
        raise ValueError(f"{name} must be a grid multiple of step")
    return n


def sample_environment(step, left_extent, right_extent, rng, provenance=None):
    """Sample a two-sided Brownian potential on [left_extent, right_extent].

    Increments between adjacent knots are independent N(0, step) on each
    side of the origin; the right side is drawn before the left side.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if left_extent > 0 or right_extent < 0:
        raise ValueError("extents must satisfy left <= 0 <= right")
    n_left = _grid_count(left_extent, step, "left_extent")
    n_right = _grid_count(right_extent, step, "right_extent")
    sd = math.sqrt(step)
    right = np.cumsum(rng.standard_normal(n_right)) * sd if n_right else np.empty(0)
    left = np.cumsum(rng.standard_normal(n_left)) * sd if n_left else np.empty(0)
    values = np.concatenate([left[::-1], [0.0], right])
    return EnvironmentPath(step, values, n_left, provenance=provenance)


def extend_environment(env, new_left, new_right, rng):
    """Widen the window; existing knot values are preserved bit-exactly.

    Fresh increments are drawn from ``rng`` (right side first), so the
    result is deterministic given the generator state.
    """
    if new_left > env.left_extent or new_right < env.right_extent:
        raise ValueError("extension must not shrink the domain")
    add_left = _grid_count(new_left, env.step, "new_left") - env.n_left
    add_right = _grid_count(new_right, env.step, "new_right") - env.n_right
    sd = math.sqrt(env.step)
    right = env.values[-1] + np.cumsum(rng.standard_normal(add_right)) * sd if add_right else np.empty(0)
    left = env.values[0] + np.cumsum(rng.standard_normal(add_left)) * sd if add_left else np.empty(0)
    values = np.concatenate([left[::-1], env.values, right])
    prov = None
    if env.provenance is not None:
        prov = dict(env.provenance)
        prov["left"] = new_left
        prov["right"] = new_right
    return EnvironmentPath(env.step, values, env.n_left + add_left, provenance=prov)


def _path_between(env, x, y):
    """Knot samples of W from x to y inclusive, in travel order."""
    lo, hi = (x, y) if x <= y else (y, x)
    i_lo, f_lo = env.index_frac(lo)
    i_hi, f_hi = env.index_frac(hi)
    first = int(i_lo) + (1 if f_lo > 0 else 0)
    last = int(i_hi)
    inner = env.values[first:last + 1]
    vals = [env.value_at(lo)] if f_lo > 0 else []
    vals = np.concatenate([vals, inner, [env.value_at(hi)] if f_hi > 0 else []])
    if x > y:
        vals = vals[::-1]
    return vals


def barrier(env, x, y):
    """Largest potential barrier crossed going from x to y.

    max over z between x and y of W(z) minus the running minimum of W
    between x and z.  Exact on the interpolant (extrema sit at knots).
    """
    if not (env.contains(x) and env.contains(y)):
        raise ValueError("barrier endpoints outside the environment")
    vals = _path_between(env, x, y)
    running_min = np.minimum.accumulate(vals)
    return float(np.max(vals - running_min))


def find_h_extrema(env, h):
    """Interior h-extrema of the path, position-sorted with alternating kinds.

    A point is an h-minimum when the path, scanned from it in each
    direction, rises by at least h before dipping below the point's value;
    h-maxima are the mirror notion.  Both witnesses must lie inside the
    window, so domain endpoints never qualify.  Ties on flat stretches
    resolve to the leftmost knot at the extreme value.

    Returns a list of (position, kind) with kind in {"min", "max"}.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    w = env.values
    n = len(w)
    if n < 3:
        return []
    confirmed = []  # (index, kind)

    def emit_first(idx, kind):
        # The first confirmed extremum needs an explicit outer witness on
        # the left; later ones inherit one from the previous extremum.
        if idx == 0:
            return
        prefix = w[: idx + 1]
        if kind == "min":
            ok = np.max(prefix) >= w[idx] + h
        else:
            ok = np.min(prefix) <= w[idx] - h
        if ok:
            confirmed.append((idx, kind))

    mode = None  # None until the first trigger; then the kind sought next
    vmin = vmax = w[0]
    imin = imax = 0
    for i in range(1, n):
        wi = w[i]
        if mode is None:
            if wi < vmin:
                vmin, imin = wi, i
            if wi > vmax:
                vmax, imax = wi, i
            fire_min = wi >= vmin + h
            fire_max = wi <= vmax - h
            if fire_min and fire_max:
                # Giant increment: both extrema confirmed at once, in
                # position order.
                if imax < imin:
                    emit_first(imax, "max")
                    confirmed.append((imin, "min"))
                    mode = "max"
                    vmax, imax = np.max(w[imin:i + 1]), imin + int(np.argmax(w[imin:i + 1]))
                else:
                    emit_first(imin, "min")
                    confirmed.append((imax, "max"))
                    mode = "min"
                    vmin, imin = np.min(w[imax:i + 1]), imax + int(np.argmin(w[imax:i + 1]))
            elif fire_min:
                emit_first(imin, "min")
                mode = "max"
                seg = w[imin:i + 1]
                vmax, imax = np.max(seg), imin + int(np.argmax(seg))
            elif fire_max:
                emit_first(imax, "max")
                mode = "min"
                seg = w[imax:i + 1]
                vmin, imin = np.min(seg), imax + int(np.argmin(seg))
        elif mode == "max":
            if wi > vmax:
                vmax, imax = wi, i
            if wi <= vmax - h:
                confirmed.append((imax, "max"))
                mode = "min"
                seg = w[imax:i + 1]
                vmin, imin = np.min(seg), imax + int(np.argmin(seg))
        else:
            if wi < vmin:
                vmin, imin = wi, i
            if wi >= vmin + h:
                confirmed.append((imin, "min"))
                mode = "max"
                seg = w[imin:i + 1]
                vmax, imax = np.max(seg), imin + int(np.argmax(seg))
    return [(env.position(i), kind) for i, kind in confirmed]


@dataclasses.dataclass(frozen=True)
class Valley:
    """Standard h-valley: successive extrema (p, m, q) around the origin."""

    p: float
    m: float
    q: float
    h: float
    depth: float
    ascent: float
    multiple_candidates: bool = False

    def validate(self, env):
        if not (self.p < self.m < self.q):
            raise ValueError("valley vertices out of order")
        if not (self.p <= 0.0 <= self.q):
            raise ValueError("valley does not contain the origin")
        wp, wm, wq = (env.value_at(v) for v in (self.p, self.m, self.q))
        if wp < wm + self.h or wq < wm + self.h:
            raise ValueError("valley walls shallower than h")
        if self.ascent > self.depth + 1e-12:
            raise ValueError("inner ascent exceeds depth")


def standard_valley(env, h):
    """The standard h-valley: a (max, min, max) triple of successive
    h-extrema with the bottom and the origin between the walls.

    Raises ValleyNotContained when the window does not yet hold one; the
    caller should widen via extend_environment and retry.  If several
    triples qualify at the discrete level, the one whose bottom is closest
    to the origin wins and the result is flagged.
    """
    extrema = find_h_extrema(env, h)
    candidates = []
    for j in range(len(extrema) - 2):
        (p, kp), (m, km), (q, kq) = extrema[j:j + 3]
        if (kp, km, kq) == ("max", "min", "max") and p <= 0.0 <= q:
            candidates.append((p, m, q))
    if not candidates:
        raise ValleyNotContained(f"no standard {h}-valley in the current window")
    best = min(candidates, key=lambda t: (abs(t[1]), t[1]))
    p, m, q = best
    wp, wm, wq = (float(env.value_at(v)) for v in (p, m, q))
    depth = min(wp - wm, wq - wm)
    ascent = max(barrier(env, p, m), barrier(env, q, m))
    valley = Valley(p, m, q, h, depth, ascent, multiple_candidates=len(candidates) > 1)
    valley.validate(env)
    return valley


def find_valley_with_widening(env, h, rng, max_extent=1024.0):
    """standard_valley with the geometric widening policy.

    Doubles the window per ValleyNotContained retry; breaching max_extent
    is a hard error.  Returns (valley, env) with the possibly-widened path.
    """
    while True:
        try:
            return standard_valley(env, h), env
        except ValleyNotContained:
            half = max(abs(env.left_extent), env.right_extent, env.step)
            new_half = 2.0 * half
            if new_half > max_extent:
                raise WindowCapExceeded(
                    f"no standard {h}-valley within extent cap {max_extent}")
            n_half = math.ceil(new_half / env.step)
            env = extend_environment(env, -n_half * env.step, n_half * env.step, rng)


class ShiftedPotential:
    """Potential re-centered at a grid-aligned point: W_c(x) = W(c+x) - W(c)."""

    __slots__ = ("base", "center", "center_index", "center_value")

    def __init__(self, base, center):
        idx, frac = base.index_frac(center)
        if frac != 0.0:
            raise ValueError("shift center must be grid-aligned")
        self.base = base
        self.center_index = int(idx)
        self.center = base.position(self.center_index)
        self.center_value = float(base.values[self.center_index])

    @property
    def left_extent(self):
        return self.base.left_extent - self.center

    @property
    def right_extent(self):
        return self.base.right_extent - self.center

    def evaluate(self, x):
        return self.base.value_at(np.asarray(x) + self.center) - self.center_value

    def knot_values(self):
        """Shifted values at the underlying knots (exact, no interpolation)."""
        return self.base.values - self.center_value

    def knot_positions(self):
        return self.base.positions() - self.center


def crossing_points(shifted, theta):
    """First up-crossings of level theta on each side of the center.

    a = sup{x <= 0 : W_c(x) >= theta}, b = inf{x >= 0 : W_c(x) >= theta},
    refined by linear interpolation inside the crossing segment.
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    vals = shifted.knot_values()
    step = shifted.base.step
    c = shifted.center_index

    right = vals[c:]
    hits = np.nonzero(right >= theta)[0]
    if len(hits) == 0:
        raise ThresholdNotReached("right", theta)
    k = hits[0]
    if k == 0:
        b = 0.0
    else:
        v0, v1 = right[k - 1], right[k]
        b = (k - 1) * step + step * (theta - v0) / (v1 - v0)

    left = vals[c::-1]
    hits = np.nonzero(left >= theta)[0]
    if len(hits) == 0:
        raise ThresholdNotReached("left", theta)
    k = hits[0]
    if k == 0:
        a = 0.0
    else:
        v0, v1 = left[k - 1], left[k]
        a = -((k - 1) * step + step * (theta - v0) / (v1 - v0))
    return CrossingPair(float(a), float(b), float(theta))


@dataclasses.dataclass(frozen=True)
class CrossingPair:
    a: float
    b: float
    theta: float


def _log_phi(u):
    """log((exp(u) - 1)/u), the exponential-segment factor, stably."""
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


@dataclasses.dataclass(frozen=True)
class GibbsIntegral:
    """Integral of exp(-alpha * W_c) over an interval, in log and linear form."""

    log_value: float
    value: float


def _segment_samples(shifted, a, b):
    """Breakpoints (positions, values) of W_c restricted to [a, b]."""
    base = shifted.base
    lo = a + shifted.center
    hi = b + shifted.center
    i_lo, f_lo = base.index_frac(lo)
    i_hi, f_hi = base.index_frac(hi)
    first = int(i_lo) + (1 if f_lo > 0 else 0)
    last = int(i_hi)
    xs_mid = base.positions()[first:last + 1]
    vs_mid = base.values[first:last + 1]
    xs = np.concatenate([[lo] if f_lo > 0 else [], xs_mid, [hi] if f_hi > 0 else []])
    vs = np.concatenate([[base.value_at(lo)] if f_lo > 0 else [], vs_mid,
                         [base.value_at(hi)] if f_hi > 0 else []])
    return xs - shifted.center, vs - shifted.center_value


def gibbs_weight_integral(shifted, alpha, a, b):
    """Integral over [a, b] of exp(-alpha * W_c(y)) dy, segment-exact.

    Each linear segment integrates in closed form; segments accumulate by
    log-sum-exp so the log value survives arbitrarily large exponents.  The
    linear value is a plain direct sum (inf when not representable).
    """
    if a > b:
        raise ValueError("integration bounds out of order")
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if a == b:
        return GibbsIntegral(-math.inf, 0.0)
    xs, vs = _segment_samples(shifted, a, b)
    lengths = np.diff(xs)
    keep = lengths > 0
    lengths = lengths[keep]
    w0 = vs[:-1][keep]
    w1 = vs[1:][keep]
    u = -alpha * (w1 - w0)
    log_terms = -alpha * w0 + np.log(lengths) + _log_phi(u)
    peak = np.max(log_terms)
    log_value = peak + math.log(np.sum(np.exp(log_terms - peak)))
    with np.errstate(over="ignore"):
        value = float(np.sum(np.exp(log_terms)))
    return GibbsIntegral(float(log_value), value)


def environment_profile(shifted, alpha, r, xs):
    """Normalized environment weight exp(-alpha*W_c(x)) / integral.

    The integration window is bounded by the first crossings of level
    alpha*r on each side; the returned density integrates to one over that
    window by construction.
    """
    if not 0.0 < r < 1.0:
        raise ValueError("r must lie in (0, 1)")
    pair = crossing_points(shifted, alpha * r)
    g = gibbs_weight_integral(shifted, alpha, pair.a, pair.b)
    xs = np.asarray(xs, dtype=float)
    log_num = -alpha * shifted.evaluate(xs)
    return np.exp(log_num - g.log_value)


def laplace_equivalence_check(shifted, alpha, a, b, r):
    """Relative mass of [a_r, b_r] outside [a, b] for the Gibbs weight.

    Diagnostic for the Laplace-method concentration: the gap tends to zero
    as alpha grows for potentials that stay positive off the center.
    """
    pair = crossing_points(shifted, r)
    if not (pair.a <= a < 0.0 < b <= pair.b):
        raise ValueError("need a_r <= a < 0 < b <= b_r")
    g_full = gibbs_weight_integral(shifted, alpha, pair.a, pair.b)
    g_sub = gibbs_weight_integral(shifted, alpha, a, b)
    return float(-math.expm1(g_sub.log_value - g_full.log_value))
