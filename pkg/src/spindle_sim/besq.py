"""Squared Bessel path machinery.

Exact BESQ transitions (Poisson-Gamma mixtures), absorbed BESQ(-2a) spindles,
bridges via the space-time transform, and the excursion-measure samplers with
their tail formulas.

A spindle is one atom-size evolution: it starts at its birth mass, stays
positive on the interior of its lifetime and is absorbed at the end.  Given
the lifetime, the interior path is realized as a BESQ(4+2a) bridge to zero,
the classical conjugate-dimension description of the conditioned excursion;
the Euler-Maruyama sampler below is the independent oracle that validates it.
"""

import math
from dataclasses import dataclass

import numpy as np

from spindle_sim.randcore import ParameterError, _gen

__all__ = [
    "EvaluationError",
    "Spindle",
    "besq_transition",
    "besq_bridge",
    "besq_neg_spindle",
    "excursion_by_lifetime",
    "excursion_by_amplitude",
    "nu_tails",
    "NuTails",
    "sample_neg_lifetime",
    "euler_neg_marginal",
    "bridge_clock",
    "bridge_advance",
]


class EvaluationError(RuntimeError):
    """A spindle was asked for an offset its exact skeleton cannot answer."""


def bridge_delta(alpha):
    """Bridge dimension conjugate to -2*alpha."""
    return 4.0 + 2.0 * alpha


# ---------------------------------------------------------------------------
# exact transitions and the bridge transform


def besq_transition(delta, x, dt, rng, size=None):
    """Exact draw of BESQ(delta) at time dt from state x.

    N ~ Poisson(x/(2 dt)), then Gamma(delta/2 + N, rate 1/(2 dt)).  delta = 0
    is allowed (the absorbing Feller case: N = 0 gives exactly 0).
    """
    if delta < 0:
        raise ParameterError("besq_transition needs delta >= 0; negative "
                             "dimensions are spindles (besq_neg_spindle)")
    if dt <= 0:
        raise ParameterError(f"dt must be > 0, got {dt}")
    g = _gen(rng)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    scalar = size is None and np.asarray(x).ndim == 0
    n = g.poisson(xs / (2.0 * dt), size if size is not None else xs.shape)
    shape = delta / 2.0 + n
    if delta > 0:
        out = g.gamma(shape, 2.0 * dt)
    else:
        out = np.zeros(shape.shape)
        pos = shape > 0
        if np.any(pos):
            out[pos] = g.gamma(shape[pos], 2.0 * dt)
    return float(out[0]) if scalar else out


def bridge_clock(offset, length):
    """Internal clock of the bridge transform: s = u/(1-u), u = offset/length."""
    u = offset / length
    return u / (1.0 - u)


def bridge_advance(delta, s0, y0, s1, gen):
    """One exact BESQ(delta) step of the free process driving a bridge."""
    dt = s1 - s0
    n = gen.poisson(y0 / (2.0 * dt))
    return gen.gamma(delta / 2.0 + n, 2.0 * dt)


def besq_bridge(delta, start, length, offsets, rng):
    """BESQ(delta) bridge from `start` to 0 over [0, length] at increasing offsets.

    Uses the transform Z(t) = length (1-t/length)^2 Y(s(t)) with Y a free
    BESQ(delta) from start/length on the clock s(t) = (t/length)/(1-t/length);
    exact, forward-only (offsets must be declared together and increasing).
    """
    if delta <= 0:
        raise ParameterError("bridge dimension must be > 0")
    if length <= 0:
        raise ParameterError("bridge length must be > 0")
    offs = np.asarray(offsets, dtype=float)
    if offs.size and (offs.min() < 0 or offs.max() > length):
        raise ParameterError("bridge offsets must lie in [0, length]")
    if offs.size > 1 and np.any(np.diff(offs) <= 0):
        raise ParameterError("bridge offsets must be strictly increasing")
    g = _gen(rng)
    out = np.empty(offs.size)
    s_cur, y_cur = 0.0, start / length
    for i, t in enumerate(offs):
        if t == 0.0:
            out[i] = start
            continue
        if t == length:
            out[i] = 0.0
            continue
        s_new = bridge_clock(t, length)
        y_cur = bridge_advance(delta, s_cur, y_cur, s_new, g)
        s_cur = s_new
        u = t / length
        out[i] = length * (1.0 - u) ** 2 * y_cur
    return out


# ---------------------------------------------------------------------------
# spindles


class Spindle:
    """One excursion path: birth mass at offset 0, zero at and after `lifetime`.

    Interior values are sampled exactly and forward-only through the bridge
    transform; sampled offsets are cached, so re-reading an old offset is free
    and extending with later offsets never changes earlier values.  With
    ``dense_step_frac`` set, the whole path is sampled up front on a grid of
    that relative step and arbitrary (non-forward) offsets are answered by
    grid lookup -- the fallback for callers that cannot declare offsets.
    """

    __slots__ = ("alpha", "lifetime", "birth_mass", "_delta", "_s", "_y",
                 "_offsets", "_values", "_gen", "_dense")

    def __init__(self, alpha, lifetime, birth_mass, rng, offsets=(),
                 dense_step_frac=None):
        if lifetime <= 0:
            raise ParameterError("spindle lifetime must be > 0")
        if birth_mass < 0:
            raise ParameterError("spindle birth mass must be >= 0")
        self.alpha = alpha
        self.lifetime = float(lifetime)
        self.birth_mass = float(birth_mass)
        self._delta = bridge_delta(alpha)
        self._gen = _gen(rng)
        self._s = 0.0
        self._y = self.birth_mass / self.lifetime
        self._offsets = [0.0]
        self._values = [self.birth_mass]
        self._dense = None
        if dense_step_frac is not None:
            grid = np.arange(0.0, 1.0, dense_step_frac)[1:] * self.lifetime
            self.extend(grid)
            self._dense = (np.asarray(self._offsets), np.asarray(self._values))
        if len(offsets):
            self.extend(offsets)

    def extend(self, offsets):
        """Sample values at further offsets (values outside (0, lifetime) are fixed)."""
        for t in np.asarray(offsets, dtype=float):
            self.value_at(float(t))

    def value_at(self, offset):
        if offset <= 0.0:
            return self.birth_mass if offset == 0.0 else 0.0
        if offset >= self.lifetime:
            return 0.0
        if self._dense is not None:
            grid, vals = self._dense
            return float(vals[np.searchsorted(grid, offset, side="right") - 1])
        last = self._offsets[-1]
        if offset < last:
            idx = np.searchsorted(self._offsets, offset)
            if idx < len(self._offsets) and self._offsets[idx] == offset:
                return self._values[idx]
            raise EvaluationError(
                f"offset {offset:g} precedes the sampled skeleton (last {last:g}); "
                "declare offsets up front or build the spindle with dense_step_frac"
            )
        if offset == last:
            return self._values[-1]
        s_new = bridge_clock(offset, self.lifetime)
        self._y = bridge_advance(self._delta, self._s, self._y, s_new, self._gen)
        self._s = s_new
        u = offset / self.lifetime
        val = self.lifetime * (1.0 - u) ** 2 * self._y
        self._offsets.append(offset)
        self._values.append(val)
        return val

    @property
    def skeleton(self):
        """Sampled (offset, value) pairs in increasing offset order."""
        return list(zip(self._offsets, self._values))

    def scaled(self, c):
        """The spindle (c f(y/c)): lifetime and values scale by c, exactly.

        The bridge clock is scale-free, so the generator state carries over
        and the scaled spindle can keep extending exactly.
        """
        if c <= 0:
            raise ParameterError("scaling factor must be > 0")
        out = Spindle.__new__(Spindle)
        out.alpha = self.alpha
        out.lifetime = self.lifetime * c
        out.birth_mass = self.birth_mass * c
        out._delta = self._delta
        out._gen = self._gen
        out._s = self._s
        out._y = self._y
        out._offsets = [o * c for o in self._offsets]
        out._values = [v * c for v in self._values]
        out._dense = None
        if self._dense is not None:
            out._dense = (self._dense[0] * c, self._dense[1] * c)
        return out

    def __repr__(self):
        return (f"Spindle(alpha={self.alpha}, lifetime={self.lifetime:.6g}, "
                f"birth={self.birth_mass:.6g})")


def sample_neg_lifetime(alpha, b, rng, size=None):
    """Lifetime of BESQ_b(-2a): the reciprocal is Gamma(1+alpha, rate b/2)."""
    if not 0 < alpha < 1:
        raise ParameterError(f"alpha must lie in (0,1), got {alpha}")
    if np.any(np.asarray(b) <= 0):
        raise ParameterError("b must be > 0")
    g = _gen(rng)
    return 1.0 / g.gamma(1.0 + alpha, 2.0 / np.asarray(b, dtype=float), size)


def besq_neg_spindle(alpha, b, offsets, rng, dense_step_frac=None):
    """Absorbed BESQ_b(-2a) as a spindle, evaluated at the requested offsets."""
    g = _gen(rng)
    zeta = float(sample_neg_lifetime(alpha, b, g))
    needed = [t for t in np.asarray(offsets, dtype=float) if 0.0 < t < zeta]
    return Spindle(alpha, zeta, b, g, offsets=needed, dense_step_frac=dense_step_frac)


def excursion_by_lifetime(alpha, v, offsets, rng, dense_step_frac=None):
    """A draw from the excursion measure conditioned on lifetime v.

    Realized as a BESQ(4+2a) bridge from 0 to 0 over [0, v]; the scaling
    disintegration makes this one sampler serve every lifetime.
    """
    if v <= 0:
        raise ParameterError(f"lifetime must be > 0, got {v}")
    g = _gen(rng)
    needed = [t for t in np.asarray(offsets, dtype=float) if 0.0 < t < v]
    return Spindle(alpha, v, 0.0, g, offsets=needed, dense_step_frac=dense_step_frac)


def excursion_by_amplitude(alpha, m, offsets, rng, coarse_steps=64):
    """A draw from the excursion measure conditioned on amplitude > m.

    First phase: BESQ_0(4+2a) stepped exactly until it first exceeds m (steps
    shrink 64-fold near the barrier, keeping the overshoot below ~1% of m);
    second phase: independent absorbed BESQ(-2a) from the hit value.  The
    result carries a dense skeleton and answers offsets by grid lookup.
    """
    if m <= 0:
        raise ParameterError(f"amplitude threshold must be > 0, got {m}")
    g = _gen(rng)
    delta = bridge_delta(alpha)
    dt = m / (delta * coarse_steps)
    t, x = 0.0, 0.0
    ts, xs = [0.0], [0.0]
    while x < m:
        step = dt if x < 0.7 * m else dt / 64.0
        n = g.poisson(x / (2.0 * step)) if x > 0 else 0
        x = g.gamma(delta / 2.0 + n, 2.0 * step)
        t += step
        ts.append(t)
        xs.append(x)
    hit_t, hit_x = t, x
    tail = besq_neg_spindle(alpha, hit_x, [], g, dense_step_frac=1.0 / 512)
    tail_offs, tail_vals = tail._dense
    grid = np.concatenate([ts, hit_t + tail_offs[1:]])
    vals = np.concatenate([xs, tail_vals[1:]])
    out = Spindle.__new__(Spindle)
    out.alpha = alpha
    out.lifetime = hit_t + tail.lifetime
    out.birth_mass = 0.0
    out._delta = delta
    out._gen = g
    out._s, out._y = 0.0, 0.0
    out._offsets = list(grid)
    out._values = list(vals)
    out._dense = (grid, vals)
    out.extend(offsets)
    return out


# ---------------------------------------------------------------------------
# excursion-measure tails


@dataclass(frozen=True)
class NuTails:
    """Evaluable tails of the spindle excursion measure: the lifetime tail,
    the amplitude tail, and the lifetime (Levy) density."""

    alpha: float
    zeta_coeff: float
    amp_coeff: float
    density_coeff: float

    def zeta_tail(self, y):
        return self.zeta_coeff * y ** (-1.0 - self.alpha)

    def amp_tail(self, m):
        return self.amp_coeff * m ** (-1.0 - self.alpha)

    def lambda_density(self, z):
        return self.density_coeff * z ** (-2.0 - self.alpha)


def nu_tails(alpha):
    if not 0 < alpha < 1:
        raise ParameterError(f"alpha must lie in (0,1), got {alpha}")
    g1m, g1p = math.gamma(1.0 - alpha), math.gamma(1.0 + alpha)
    zeta_coeff = alpha / (2.0**alpha * g1m * g1p)
    amp_coeff = 2.0 * alpha * (1.0 + alpha) / g1m
    density_coeff = alpha * (1.0 + alpha) / (2.0**alpha * g1m * g1p)
    return NuTails(alpha, zeta_coeff, amp_coeff, density_coeff)


# ---------------------------------------------------------------------------
# Euler-Maruyama oracle (full truncation, absorption at the first nonpositive step)


def euler_neg_marginal(alpha, b, t, step, rng, n):
    """Marginal at time t of absorbed BESQ_b(-2a), by Euler-Maruyama.

    Independent of the bridge construction; used to validate it.
    """
    g = _gen(rng)
    z = np.full(n, float(b))
    alive = np.ones(n, dtype=bool)
    steps = int(round(t / step))
    sqdt = math.sqrt(step)
    for _ in range(steps):
        dw = g.standard_normal(n) * sqdt
        z = np.where(alive, z - 2.0 * alpha * step + 2.0 * np.sqrt(np.maximum(z, 0.0)) * dw, 0.0)
        alive &= z > 0.0
        z = np.where(alive, z, 0.0)
    return z
