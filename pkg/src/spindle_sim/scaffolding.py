"""Truncated stable scaffolding: jump skeletons, first passage, clades.

The scaffolding is the spectrally positive Stable(1+alpha) process whose jumps
carry spindles.  Under the small-jump truncation at ``eps`` it is a compound
Poisson process (jump rate lambda_eps, Pareto-tailed sizes) plus the
compensating drift -c_eps, which makes every path question exact: passage
times solve linearly on drift segments and jumps are the only upward moves.

Two layers live here.  The rich layer (``sample_prm``, ``sample_clade``,
``reflected_clades`` ...) builds full point-measure objects and suits moderate
path sizes.  The streaming layer (``scan_scaffolding``/``straddle_values``)
generates the same skeletons blockwise, keeping only level-straddling jumps
and per-excursion aggregates; it is what the measure-valued simulations and
the validation catalog run on, because a single deep path can hold billions
of jumps and must never be stored whole.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from spindle_sim.besq import besq_neg_spindle, excursion_by_lifetime, nu_tails
from spindle_sim.randcore import ParameterError, _gen

__all__ = [
    "ConsistencyError",
    "ScaffoldingPath",
    "MarkedPointMeasure",
    "Clade",
    "ScanResult",
    "trunc_rate",
    "trunc_drift",
    "sample_jump_sizes",
    "psi",
    "phi",
    "small_jump_correction",
    "psi_trunc",
    "phi_trunc",
    "scale_function",
    "len_tail_coeff",
    "xi",
    "first_passage",
    "sample_prm",
    "sample_clade",
    "scale_clade",
    "reflected_clades",
    "sample_reflected_clade_conditioned",
    "scan_scaffolding",
    "straddle_values",
    "DEFAULT_EPS",
]

DEFAULT_EPS = 1e-3


class ConsistencyError(ValueError):
    """Point measure and truncation parameters disagree."""


# ---------------------------------------------------------------------------
# truncation constants and transforms


def trunc_rate(alpha, eps):
    """Jump rate of the eps-truncated scaffolding per unit time."""
    nt = nu_tails(alpha)
    return nt.density_coeff / (1.0 + alpha) * eps ** (-1.0 - alpha)


def trunc_drift(alpha, eps):
    """Compensation c_eps; the truncated path has drift -c_eps."""
    nt = nu_tails(alpha)
    return nt.density_coeff / alpha * eps ** (-alpha)


def sample_jump_sizes(alpha, eps, gen, n):
    """Sizes from the truncated lifetime density ~ z^(-2-alpha) on (eps, inf)."""
    return eps * gen.random(n) ** (-1.0 / (1.0 + alpha))


def psi(alpha, c):
    """Laplace exponent of the untruncated scaffolding."""
    return 2.0 ** (-alpha) * c ** (1.0 + alpha) / math.gamma(1.0 + alpha)


def phi(alpha, q):
    """Laplace exponent of the first-passage subordinator (inverse of psi)."""
    return (2.0**alpha * math.gamma(1.0 + alpha) * q) ** (1.0 / (1.0 + alpha))


def small_jump_correction(alpha, eps, q):
    """int_0^eps (e^{-qz} - 1 + qz) Lambda(dz): the truncation deficit of psi.

    Term-by-term integration of the entire series sum_{k>=2} (-qz)^k / k!
    against the singular density; converges for every q*eps and avoids the
    cancellation that defeats numerical quadrature near zero.
    """
    nt = nu_tails(alpha)
    total = 0.0
    coeff = -q  # (-q)^k / k!, starting at k = 1
    for k in range(2, 200):
        coeff *= -q / k
        contrib = coeff * eps ** (k - 1.0 - alpha) / (k - 1.0 - alpha)
        total += contrib
        if abs(contrib) < 1e-16 * max(abs(total), 1e-300) and k > 3:
            break
    return nt.density_coeff * total


def psi_trunc(alpha, eps, c):
    """Laplace exponent of the eps-truncated scaffolding."""
    return psi(alpha, c) - small_jump_correction(alpha, eps, c)


def phi_trunc(alpha, eps, q):
    """Inverse of psi_trunc, for exact truncated first-passage transforms."""
    hi = phi(alpha, q) * 2.0 + 1.0
    return optimize.brentq(lambda c: psi_trunc(alpha, eps, c) - q, 1e-12, hi)


def scale_function(alpha, z):
    """W(z) = 2^alpha z^alpha; reaching y before 0 from a has odds W(a)/W(y)."""
    return 2.0**alpha * np.asarray(z) ** alpha


def len_tail_coeff(alpha):
    """Coefficient of the reflected-clade length tail x^(-1/(1+alpha))."""
    return (2.0**alpha * math.gamma(1.0 + alpha)) ** (1.0 / (1.0 + alpha)) / math.gamma(
        alpha / (1.0 + alpha)
    )


# ---------------------------------------------------------------------------
# path containers


@dataclass
class ScaffoldingPath:
    """Piecewise-linear-with-jumps path: start + jumps + constant drift."""

    start: float
    times: np.ndarray
    sizes: np.ndarray
    drift: float  # negative: -c_eps
    horizon: float

    def value(self, t):
        s = self.sizes[self.times <= t].sum()
        return self.start + s + self.drift * t

    def value_before(self, t):
        s = self.sizes[self.times < t].sum()
        return self.start + s + self.drift * t

    def after_jump_values(self):
        return self.start + np.cumsum(self.sizes) + self.drift * self.times

    def zeta_plus(self):
        a = self.after_jump_values()
        return float(max(self.start, a.max())) if a.size else self.start

    def first_passage(self, level):
        """Exact first time the path goes strictly below `level`, or None."""
        if self.start < level:
            return 0.0
        c = -self.drift
        a = np.concatenate([[self.start], self.after_jump_values()])
        t = np.concatenate([[0.0], self.times])
        seg_end_t = np.concatenate([self.times, [self.horizon]])
        end_vals = a - c * (seg_end_t - t)
        hit = end_vals < level
        if not hit.any():
            return None
        i = int(np.argmax(hit))
        tau = t[i] + (a[i] - level) / c
        return float(tau) if tau <= self.horizon else None


def first_passage(path, level):
    return path.first_passage(level)


@dataclass
class MarkedPointMeasure:
    """Finite set of (time, spindle, type) points, times strictly increasing."""

    times: np.ndarray
    spindles: list
    types: np.ndarray

    def __len__(self):
        return self.times.size


def xi(points, eps):
    """The compensated-jump scaffolding of a point measure (deterministic)."""
    sizes = np.array([sp.lifetime for sp in points.spindles])
    if np.any(sizes < eps):
        raise ConsistencyError("point measure holds spindles below the truncation")
    if not points.spindles:
        raise ConsistencyError("cannot infer alpha from an empty point measure")
    alpha = points.spindles[0].alpha
    c = trunc_drift(alpha, eps)
    horizon = float(points.times[-1]) if len(points) else 0.0
    return ScaffoldingPath(0.0, np.asarray(points.times, float), sizes, -c, horizon)


@dataclass
class Clade:
    """A spindle-marked scaffolding descending from one ancestor.

    ``origin`` is ("atom", b, x) for clades grown from an initial atom and
    ("depth", z) for excursion clades of the reflected process.  Birth levels
    cache X(t-) per point, in the clade's own level coordinates.
    """

    points: MarkedPointMeasure
    scaffolding: ScaffoldingPath
    origin: tuple
    birth_levels: np.ndarray
    zeta_plus: float
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# streaming scan engine


@dataclass
class ScanResult:
    passage_time: float
    end_time: float
    end_value: float
    zeta_plus: float
    n_jumps: int
    pruned: bool
    # level-straddling jumps, in time order
    str_time: np.ndarray
    str_birth: np.ndarray
    str_size: np.ndarray
    str_lo: np.ndarray
    str_hi: np.ndarray
    str_exc: np.ndarray
    # reflected-excursion aggregates (reflect mode)
    exc_depth: np.ndarray
    exc_height: np.ndarray
    exc_len: np.ndarray
    exc_complete: np.ndarray
    # full skeleton (collect_jumps mode)
    jump_times: np.ndarray = None
    jump_sizes: np.ndarray = None


def scan_scaffolding(alpha, eps, rng, *, start=0.0, stop_below=None, horizon=None,
                     levels=None, reflect=False, first_jump_time=None,
                     prune_above=None, collect_jumps=False, block=1 << 16,
                     max_events=None):
    """Blockwise simulation of the truncated scaffolding skeleton.

    Runs from `start` until first passage strictly below `stop_below` (exact,
    on a drift segment) or until `horizon`, whichever comes first.  If
    `levels` (sorted ascending) is given, jumps whose level interval straddles
    grid levels are recorded with the straddled index range; in reflect mode
    (requires start == 0) the interval is taken in immigration coordinates,
    i.e. depth of the running infimum plus height above it, and per-excursion
    (depth, height, length) aggregates are collected.

    `prune_above` excises every sojourn of the (immigration-coordinate) path
    above that barrier: the process is spectrally positive, so it re-enters
    the observed region exactly at the barrier and nothing born above can
    straddle a level below it -- the excision is law-exact for all level
    statistics by the strong Markov property.  It removes the heavy tail of
    simulated excursion durations, at the price of unfaithful elapsed times
    and censored maxima/heights (both still exact as lower bounds, and the
    censor sits above every observed level by construction).  Pruned results
    carry ``pruned=True``.

    Memory stays O(block + straddles + excursions) unless collect_jumps is set.
    """
    if stop_below is None and horizon is None:
        raise ParameterError("need a stop rule: stop_below and/or horizon")
    if stop_below is not None and start <= stop_below:
        raise ParameterError("start must lie above stop_below")
    if reflect and start != 0.0:
        raise ParameterError("reflected decomposition assumes start = 0")
    if prune_above is not None and collect_jumps:
        raise ParameterError("pruning discards jumps; collect_jumps needs the "
                             "full skeleton")
    if prune_above is not None and horizon is not None:
        raise ParameterError("pruning makes elapsed time unfaithful; use a "
                             "passage stop instead of a horizon")
    if eps <= 0:
        raise ParameterError(f"eps must be > 0, got {eps}")
    if levels is not None:
        levels = np.asarray(levels, dtype=float)
        if levels.size > 1 and np.any(np.diff(levels) <= 0):
            raise ParameterError("levels must be strictly increasing")
    g = _gen(rng)
    lam = trunc_rate(alpha, eps)
    c = trunc_drift(alpha, eps)

    t0 = 0.0
    x0 = float(start)
    pruned = False
    if prune_above is not None and not reflect and x0 > prune_above:
        x0 = float(prune_above)
        pruned = True
    run_min = x0
    zmax = float(start)
    n_jumps = 0
    passage_time = None
    end_time = end_value = None

    # open-excursion carry (reflect mode)
    exc_open = False
    exc_min = 0.0
    exc_height = 0.0
    exc_start_t = 0.0
    exc_last_t = 0.0
    exc_last_after = 0.0
    exc_count = 0

    str_parts = {k: [] for k in ("time", "birth", "size", "lo", "hi", "exc")}
    exc_parts = {k: [] for k in ("depth", "height", "len", "complete")}
    jump_parts = {"t": [], "z": []} if collect_jumps else None

    first_block = True
    cur_block = min(32, block)  # grow geometrically: most clades die in a few jumps
    while True:
        if max_events is not None and n_jumps > max_events:
            raise RuntimeError(f"scan exceeded max_events={max_events}")
        m = cur_block
        cur_block = min(cur_block * 4, block)
        dt = g.standard_exponential(m) / lam
        if first_block and first_jump_time is not None:
            dt[0] = first_jump_time
        first_block = False
        sz = sample_jump_sizes(alpha, eps, g, m)
        ct = np.cumsum(dt)
        t_jump = t0 + ct
        x_before = x0 + (np.cumsum(sz) - sz) - c * ct
        x_after = x_before + sz

        # provisional reflect bookkeeping; entries before the first prune
        # teleport are exact, and the block is cut there
        if reflect:
            prev_min = np.minimum.accumulate(
                np.concatenate([[run_min], x_before]))[:-1]
            new_exc = x_before < prev_min
            start_idx = np.maximum.accumulate(
                np.where(new_exc, np.arange(m), -1))
            jmin = np.where(start_idx >= 0,
                            x_before[np.maximum(start_idx, 0)], exc_min)
            trigger_coord = x_after - 2.0 * jmin
        else:
            jmin = None
            trigger_coord = x_after

        # exact stop: passage on the segment leading into jump i
        cut = m
        done = False
        teleport = None
        if stop_below is not None:
            hit = x_before < stop_below
            if hit.any():
                i = int(np.argmax(hit))
                prev_after = x0 if i == 0 else x_after[i - 1]
                prev_t = t0 if i == 0 else t_jump[i - 1]
                cand = prev_t + (prev_after - stop_below) / c
                if horizon is None or cand <= horizon:
                    passage_time = cand
                    cut = i
                    done = True
        if prune_above is not None:
            trig = trigger_coord > prune_above
            if reflect:
                trig &= -jmin < prune_above  # never teleport below the exc min
            if trig.any():
                it = int(np.argmax(trig))
                if it < cut:  # passage at cut == it means passage came first
                    cut = it + 1
                    done = False
                    passage_time = None
                    if reflect:
                        teleport = prune_above + 2.0 * float(jmin[it])
                    else:
                        teleport = float(prune_above)
        if not done and teleport is None and horizon is not None:
            beyond = t_jump > horizon
            if beyond.any():
                cut = int(np.argmax(beyond))
                done = True

        t_jump = t_jump[:cut]
        x_before = x_before[:cut]
        x_after = x_after[:cut]
        sz = sz[:cut]
        n_jumps += cut
        if cut:
            zmax = max(zmax, float(x_after.max()))
            if collect_jumps:
                jump_parts["t"].append(t_jump)
                jump_parts["z"].append(sz)

        if reflect and cut:
            new_exc = new_exc[:cut]
            jmin_c = jmin[:cut]
            run_min = min(run_min, float(x_before.min()))
            starts = np.nonzero(new_exc)[0]
            rel_h = x_after - jmin_c
            eid = (exc_count - 1) + np.cumsum(new_exc)

            if starts.size == 0:
                exc_height = max(exc_height, float(rel_h.max()))
                exc_last_t = float(t_jump[-1])
                exc_last_after = float(x_after[-1])
            else:
                s0 = starts[0]
                if exc_open and s0 > 0:
                    exc_height = max(exc_height, float(rel_h[:s0].max()))
                    exc_last_t = float(t_jump[s0 - 1])
                    exc_last_after = float(x_after[s0 - 1])
                if exc_open:
                    end_t = exc_last_t + (exc_last_after - exc_min) / c
                    exc_parts["depth"].append(-exc_min)
                    exc_parts["height"].append(exc_height)
                    exc_parts["len"].append(end_t - exc_start_t)
                    exc_parts["complete"].append(True)
                hmax = np.maximum.reduceat(rel_h, starts)
                if starts.size > 1:
                    g_first = starts[:-1]
                    g_last = starts[1:] - 1
                    mins = x_before[g_first]
                    end_t = t_jump[g_last] + (x_after[g_last] - mins) / c
                    exc_parts["depth"].append(-mins)
                    exc_parts["height"].append(hmax[:-1])
                    exc_parts["len"].append(end_t - t_jump[g_first])
                    exc_parts["complete"].append(np.ones(g_first.size, bool))
                gl = starts[-1]
                exc_open = True
                exc_min = float(x_before[gl])
                exc_height = float(hmax[-1])
                exc_start_t = float(t_jump[gl])
                exc_last_t = float(t_jump[-1])
                exc_last_after = float(x_after[-1])
                exc_count += int(starts.size)
            births = x_before - 2.0 * jmin_c
        else:
            births = x_before
            eid = np.full(cut, -1, dtype=np.int64)

        if levels is not None and cut:
            lo = np.searchsorted(levels, births, side="right")
            hi = np.searchsorted(levels, births + sz, side="left")
            rec = lo < hi
            if rec.any():
                str_parts["time"].append(t_jump[rec])
                str_parts["birth"].append(births[rec])
                str_parts["size"].append(sz[rec])
                str_parts["lo"].append(lo[rec].astype(np.int64))
                str_parts["hi"].append(hi[rec].astype(np.int64))
                str_parts["exc"].append(eid[rec])

        if done:
            if passage_time is not None:
                end_time, end_value = passage_time, float(stop_below)
            else:
                end_time = float(horizon)
                last_after = float(x_after[-1]) if cut else x0
                last_t = float(t_jump[-1]) if cut else t0
                end_value = last_after - c * (horizon - last_t)
            break
        if teleport is not None:
            pruned = True
            t0 = float(t_jump[-1])
            x0 = float(teleport)
            cur_block = min(256, block)  # teleports come in bursts near the barrier
        else:
            t0 = float(t_jump[-1])
            x0 = float(x_after[-1])

    if reflect and exc_open:
        # at exact passage the open excursion has already closed; at a horizon
        # stop it may still be running, flagged incomplete
        complete = passage_time is not None
        end_t = (exc_last_t + (exc_last_after - exc_min) / c
                 if complete else end_time)
        exc_parts["depth"].append(-exc_min)
        exc_parts["height"].append(exc_height)
        exc_parts["len"].append(end_t - exc_start_t)
        exc_parts["complete"].append(complete)

    def _cat(parts, dtype=float):
        arrs = [np.atleast_1d(np.asarray(p, dtype=dtype)) for p in parts]
        return np.concatenate(arrs) if arrs else np.empty(0, dtype=dtype)

    return ScanResult(
        passage_time=passage_time,
        end_time=end_time,
        end_value=end_value,
        zeta_plus=zmax,
        n_jumps=n_jumps,
        pruned=pruned,
        str_time=_cat(str_parts["time"]),
        str_birth=_cat(str_parts["birth"]),
        str_size=_cat(str_parts["size"]),
        str_lo=_cat(str_parts["lo"], np.int64),
        str_hi=_cat(str_parts["hi"], np.int64),
        str_exc=_cat(str_parts["exc"], np.int64),
        exc_depth=_cat(exc_parts["depth"]),
        exc_height=_cat(exc_parts["height"]),
        exc_len=_cat(exc_parts["len"]),
        exc_complete=_cat(exc_parts["complete"], bool),
        jump_times=_cat(jump_parts["t"]) if collect_jumps else None,
        jump_sizes=_cat(jump_parts["z"]) if collect_jumps else None,
    )


def straddle_values(alpha, births, sizes, lo, hi, levels, rng):
    """Spindle values at every straddled grid level, batched across jumps.

    Each jump's spindle is a lifetime-conditioned excursion; its values at the
    levels it straddles are sampled by exact forward bridge steps, vectorized
    column-by-column over jumps.  Returns (flat, ptr): values for jump j sit
    in flat[ptr[j]:ptr[j+1]], aligned with levels[lo[j]:hi[j]].
    """
    g = _gen(rng)
    counts = hi - lo
    ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    n = births.size
    flat = np.zeros(int(ptr[-1]))
    if n == 0:
        return flat, ptr
    delta = 4.0 + 2.0 * alpha
    s_cur = np.zeros(n)
    y_cur = np.zeros(n)
    for k in range(int(counts.max())):
        live = np.nonzero(counts > k)[0]
        offs = levels[lo[live] + k] - births[live]
        u = offs / sizes[live]
        s_new = u / (1.0 - u)
        dts = s_new - s_cur[live]
        lam = y_cur[live] / (2.0 * dts)
        nn = g.poisson(lam)
        y_new = g.gamma(delta / 2.0 + nn, 2.0 * dts)
        flat[ptr[live] + k] = sizes[live] * (1.0 - u) ** 2 * y_new
        s_cur[live] = s_new
        y_cur[live] = y_new
    return flat, ptr


# ---------------------------------------------------------------------------
# rich point-measure API


def _spindles_for_jumps(alpha, births, sizes, level_grid, rng):
    g = _gen(rng)
    spindles = []
    grid = None if level_grid is None else np.asarray(level_grid, dtype=float)
    for b, z in zip(births, sizes):
        offs = ()
        if grid is not None:
            offs = grid[(grid > b) & (grid < b + z)] - b
        spindles.append(excursion_by_lifetime(alpha, float(z), offs, g))
    return spindles


def sample_prm(alpha, eps, stop, level_grid, rng, max_events=10_000_000):
    """Marked Poisson scaffolding with full point-measure output.

    `stop` is ("horizon", T) or ("first_passage", ell) for passage below -ell.
    Spindle offsets are derived from the level grid and each jump's birth
    level at creation, so later superskewer reads stay exact.
    """
    g = _gen(rng)
    kind, val = stop
    if kind == "horizon":
        res = scan_scaffolding(alpha, eps, g, start=0.0, horizon=float(val),
                               collect_jumps=True, max_events=max_events)
        horizon = float(val)
    elif kind == "first_passage":
        res = scan_scaffolding(alpha, eps, g, start=0.0, stop_below=-float(val),
                               collect_jumps=True, max_events=max_events)
        horizon = res.passage_time
    else:
        raise ParameterError(f"unknown stop rule {stop!r}")
    times, sizes = res.jump_times, res.jump_sizes
    c = trunc_drift(alpha, eps)
    births = np.cumsum(sizes) - sizes - c * times
    spindles = _spindles_for_jumps(alpha, births, sizes, level_grid, g)
    types = g.random(times.size)
    points = MarkedPointMeasure(times, spindles, types)
    path = ScaffoldingPath(0.0, times, sizes, -c, horizon)
    return points, path


def sample_clade(alpha, b, x, eps, level_grid, rng, max_events=10_000_000):
    """One clade grown from an atom of size b and type x.

    Initial spindle at time 0, then marked scaffolding run from the spindle's
    lifetime to first passage at 0; the clade lifetime is the maximum level.
    """
    if b <= 0:
        raise ParameterError(f"b must be > 0, got {b}")
    g = _gen(rng)
    grid = None if level_grid is None else np.asarray(level_grid, dtype=float)
    f0 = besq_neg_spindle(alpha, b, () if grid is None else grid, g)
    zeta0 = f0.lifetime
    res = scan_scaffolding(alpha, eps, g, start=zeta0, stop_below=0.0,
                           collect_jumps=True, max_events=max_events)
    c = trunc_drift(alpha, eps)
    births = zeta0 + np.cumsum(res.jump_sizes) - res.jump_sizes - c * res.jump_times
    spindles = _spindles_for_jumps(alpha, births, res.jump_sizes, grid, g)
    types = g.random(res.jump_times.size)
    times = np.concatenate([[0.0], res.jump_times])
    points = MarkedPointMeasure(times, [f0] + spindles,
                                np.concatenate([[x], types]))
    path = ScaffoldingPath(zeta0, res.jump_times, res.jump_sizes, -c,
                           res.passage_time)
    birth_levels = np.concatenate([[0.0], births])
    return Clade(points, path, ("atom", float(b), float(x)), birth_levels,
                 float(res.zeta_plus), {"eps": eps, "alpha": alpha})


def scale_clade(c, clade):
    """The scaling operator: times by c^(1+alpha), spindles and levels by c.

    Clade lifetime scales by c and length by c^(1+alpha); a clade of law
    Q_{b,x} becomes one of law Q_{cb,x}.
    """
    if c <= 0:
        raise ParameterError(f"scaling factor must be > 0, got {c}")
    alpha = clade.meta.get("alpha")
    if alpha is None:
        alpha = clade.points.spindles[0].alpha
    tfac = c ** (1.0 + alpha)
    spindles = [sp.scaled(c) for sp in clade.points.spindles]
    points = MarkedPointMeasure(clade.points.times * tfac, spindles,
                                clade.points.types.copy())
    sc = clade.scaffolding
    path = ScaffoldingPath(sc.start * c, sc.times * tfac, sc.sizes * c,
                           sc.drift * c ** (-alpha), sc.horizon * tfac)
    kind = clade.origin[0]
    if kind == "atom":
        origin = ("atom", clade.origin[1] * c, clade.origin[2])
    else:
        origin = ("depth", clade.origin[1] * c)
    meta = dict(clade.meta)
    if "eps" in meta:
        meta["eps"] = meta["eps"] * c  # the truncation floor scales with the jumps
    return Clade(points, path, origin, clade.birth_levels * c,
                 clade.zeta_plus * c, meta)


def reflected_clades(points, X):
    """Decompose a marked scaffolding from 0 by its running infimum.

    Each excursion above the infimum becomes a clade at depth equal to minus
    the infimum where it starts; spindle objects are shared, times and levels
    shift into the clade's own coordinates.  The final incomplete stretch
    below the last completed excursion carries no clade.
    """
    times, sizes = X.times, X.sizes
    c = -X.drift
    after = X.after_jump_values()
    before = after - sizes
    out = []
    run_min = X.start
    i = 0
    n = times.size
    while i < n:
        if before[i] < run_min:
            m = before[i]
            j = i
            while j + 1 < n and before[j + 1] >= m:
                j += 1
            t_shift = times[i]
            end_t = times[j] + (after[j] - m) / c
            sub_times = times[i:j + 1] - t_shift
            sub_sizes = sizes[i:j + 1]
            path = ScaffoldingPath(0.0, sub_times, sub_sizes, X.drift,
                                   end_t - t_shift)
            sub_points = MarkedPointMeasure(
                sub_times, points.spindles[i:j + 1], points.types[i:j + 1])
            births = before[i:j + 1] - m
            zeta = float((after[i:j + 1] - m).max())
            alpha = points.spindles[i].alpha
            out.append((-m, Clade(sub_points, path, ("depth", -m), births,
                                  zeta, {"alpha": alpha})))
            run_min = m
            i = j + 1
        else:
            i += 1
    return out


def sample_reflected_clade_conditioned(alpha, y, eps, a0, level_grid, rng,
                                       max_attempts=10_000_000):
    """Approximate draw from the reflected-clade measure conditioned to reach y.

    Small-start rejection: open with a jump to a0 (spindle of lifetime a0),
    run to passage at 0, accept when the maximum reaches y.  Acceptance
    probability per attempt is near W(a0)/W(y) = (a0/y)^alpha, so keep a0
    well below y; failed attempts die almost immediately and cost little.
    """
    if not 0 < a0 < y:
        raise ParameterError("need 0 < a0 < y")
    g = _gen(rng)
    grid = None if level_grid is None else np.asarray(level_grid, dtype=float)
    attempts = 0
    while attempts < max_attempts:
        attempts += 1
        res = scan_scaffolding(alpha, eps, g, start=a0, stop_below=0.0,
                               collect_jumps=True)
        if res.zeta_plus >= y:
            break
    else:
        raise RuntimeError("conditioned clade rejection exceeded max_attempts")
    c = trunc_drift(alpha, eps)
    f0 = excursion_by_lifetime(
        alpha, a0, () if grid is None else grid[(grid > 0) & (grid < a0)], g)
    births = a0 + np.cumsum(res.jump_sizes) - res.jump_sizes - c * res.jump_times
    spindles = _spindles_for_jumps(alpha, births, res.jump_sizes, grid, g)
    types = g.random(res.jump_times.size)
    times = np.concatenate([[0.0], res.jump_times])
    points = MarkedPointMeasure(times, [f0] + spindles,
                                np.concatenate([[g.random()], types]))
    path = ScaffoldingPath(a0, res.jump_times, res.jump_sizes, -c,
                           res.passage_time)
    birth_levels = np.concatenate([[0.0], births])
    return Clade(points, path, ("depth", 0.0), birth_levels,
                 float(res.zeta_plus),
                 {"eps": eps, "alpha": alpha, "attempts": attempts,
                  "conditioned_level": y, "a0": a0})
