"""Poisson-Dirichlet mass samplers and Pitman-Yor random measures.

PD(alpha, theta) masses are sampled by residual allocation (stick breaking):
W_i ~ Beta(1-alpha, theta + i*alpha) independent, P_i = W_i prod_{j<i}(1-W_j).
The random measure places the sticks at i.i.d. Uniform[0,1] locations.  The
discarded remainder beyond the truncation decays polynomially for alpha > 0,
like trunc^(-(1-alpha)/alpha); `gem_expected_remainder` gives the exact mean.
"""

from dataclasses import dataclass

import numpy as np

from spindle_sim.measures import AtomicMeasure
from spindle_sim.randcore import ParameterError, _gen

__all__ = [
    "GemSample",
    "gem_sample",
    "gem_expected_remainder",
    "pdrm_sample",
    "pdrm_decompose",
    "fragmentation_sample",
    "DEFAULT_TRUNC",
]

DEFAULT_TRUNC = 200


def _check(alpha, theta, allow_alpha0=False):
    lo_ok = alpha > 0 or (allow_alpha0 and alpha == 0)
    if not (lo_ok and alpha < 1):
        raise ParameterError(f"alpha must lie in (0,1), got {alpha}")
    if theta < 0:
        # theta in (-alpha, 0) is deliberately out of scope
        raise ParameterError(f"theta must be >= 0, got {theta}")
    if alpha == 0 and theta == 0:
        raise ParameterError("alpha = theta = 0 has no stick-breaking law")


@dataclass
class GemSample:
    """Stick masses P_1..P_trunc plus the untouched remainder.

    masses and remainder sum to 1 exactly up to float roundoff (telescoping).
    """

    masses: np.ndarray
    remainder: float
    truncation: int


def gem_sample(alpha, theta, trunc, rng):
    _check(alpha, theta, allow_alpha0=True)
    if trunc < 1:
        raise ParameterError(f"trunc must be >= 1, got {trunc}")
    g = _gen(rng)
    i = np.arange(1, trunc + 1)
    w = g.beta(1.0 - alpha, theta + alpha * i)
    stick_left = np.cumprod(1.0 - w)
    masses = w * np.concatenate([[1.0], stick_left[:-1]])
    return GemSample(masses=masses, remainder=float(stick_left[-1]), truncation=trunc)


def gem_expected_remainder(alpha, theta, trunc):
    """E[prod_{j<=trunc} (1-W_j)] = prod (theta+j*alpha)/(theta+j*alpha+1-alpha)."""
    j = np.arange(1, trunc + 1)
    return float(np.prod((theta + j * alpha) / (theta + j * alpha + 1.0 - alpha)))


def pdrm_sample(alpha, theta, trunc, rng):
    """Truncated PDRM(alpha, theta): stick masses at i.i.d. uniform locations.

    The remainder is discarded; callers needing it for diagnostics should use
    `gem_sample` directly.
    """
    g = _gen(rng)
    gem = gem_sample(alpha, theta, trunc, g)
    locs = g.random(trunc)
    return AtomicMeasure(gem.masses, locs, floor_frac=0.0)


def pdrm_decompose(alpha, theta, rng, trunc=DEFAULT_TRUNC):
    """The classical decomposition of PDRM(alpha, theta) for theta > 0.

    Returns (B, prime, base) with B ~ Beta(theta, 1), prime ~ PDRM(alpha,
    theta) and base ~ PDRM(alpha, 0) independent; B*prime + (1-B)*base is
    again PDRM(alpha, theta).
    """
    _check(alpha, theta)
    if theta == 0:
        raise ParameterError("the decomposition needs theta > 0")
    g = _gen(rng)
    b = float(g.beta(theta, 1.0))
    prime = pdrm_sample(alpha, theta, trunc, g)
    base = pdrm_sample(alpha, 0.0, trunc, g)
    return b, prime, base


def fragmentation_sample(alpha, theta, trunc_outer, trunc_inner, rng):
    """Fragmentation of a PD(0, theta) measure by independent PD(alpha, 0) laws.

    Coarse sticks A'_i at locations U'_i; each is split into A'_i * B_ij at
    fresh locations.  Returns (coarse, fine, parent_map) where parent_map[j]
    is the coarse index of fine atom j; the fine measure is PDRM(alpha, theta).
    """
    _check(alpha, theta)
    if theta == 0:
        raise ParameterError("fragmentation needs theta > 0")
    g = _gen(rng)
    coarse_gem = gem_sample(0.0, theta, trunc_outer, g)
    coarse_locs = g.random(trunc_outer)
    fine_masses = []
    fine_locs = []
    parents = []
    for i, a in enumerate(coarse_gem.masses):
        inner = gem_sample(alpha, 0.0, trunc_inner, g)
        fine_masses.append(a * inner.masses)
        fine_locs.append(g.random(trunc_inner))
        parents.append(np.full(trunc_inner, i, dtype=np.int64))
    coarse = AtomicMeasure(coarse_gem.masses, coarse_locs, floor_frac=0.0)
    fine = AtomicMeasure(
        np.concatenate(fine_masses), np.concatenate(fine_locs), floor_frac=0.0
    )
    return coarse, fine, np.concatenate(parents)
