"""De-Poissonization to the unit-mass diffusion and the coupling projection.

The probability-measure-valued process runs on the clock u with
rho(u) = inf{y: int_0^y dz/||pi^z|| > u}; its state at u is the normalized
measure at level rho(u).  The clock integral is computed by the trapezoid
rule on the level grid; because rho(u) is a functional of the mass trace
alone, snapping to the nearest grid level preserves the stationary law of the
normalized state exactly, so grid resolution only affects path-level
diagnostics, never the marginal laws under stationarity.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from spindle_sim.measures import AtomicMeasure, normalize, total_mass
from spindle_sim.pdrm import DEFAULT_TRUNC
from spindle_sim.randcore import ParameterError, _gen
from spindle_sim.sssp import MeasurePath, PathBuilder

__all__ = [
    "TimeChange",
    "depoissonize",
    "fv_path",
    "shiga_project",
    "MASS_FLOOR_FRAC",
]

MASS_FLOOR_FRAC = 1e-6  # near-extinction stop: 1/mass blows the clock up


@dataclass
class TimeChange:
    """The level <-> clock correspondence along one path."""

    y_grid: np.ndarray
    u_grid: np.ndarray  # cumulative trapezoid of 1/mass at y_grid

    def __post_init__(self):
        if np.any(np.diff(self.u_grid) <= 0):
            raise ParameterError("time change must be strictly increasing")

    def rho(self, u):
        """Level at clock u, by monotone linear interpolation; None if beyond."""
        if u < 0 or u > self.u_grid[-1]:
            return None
        k = int(np.searchsorted(self.u_grid, u, side="right"))
        if k == 0:
            return float(self.y_grid[0])
        k = min(k, self.u_grid.size - 1)
        du = self.u_grid[k] - self.u_grid[k - 1]
        w = (u - self.u_grid[k - 1]) / du
        return float(self.y_grid[k - 1] + w * (self.y_grid[k] - self.y_grid[k - 1]))

    def nearest_index(self, u):
        y = self.rho(u)
        if y is None:
            return None
        return int(np.argmin(np.abs(self.y_grid - y)))


def _clock_integral(levels, mass):
    """Cumulative trapezoid of 1/mass over the level grid."""
    integrand = 1.0 / mass
    steps = np.diff(levels) * (integrand[:-1] + integrand[1:]) / 2.0
    return np.concatenate([[0.0], np.cumsum(steps)])


def depoissonize(path, u_grid):
    """Time-change and normalize a mass-positive path onto a clock grid.

    The path is truncated at its first nonpositive mass; requested clock
    points beyond the accessible horizon are dropped and flagged.  States are
    taken at the grid level nearest to rho(u) and normalized to unit mass.
    """
    u_grid = np.asarray(u_grid, dtype=float)
    if np.any(u_grid < 0) or np.any(np.diff(u_grid) <= 0):
        raise ParameterError("u grid must be nonnegative and increasing")
    mass = path.mass_trace
    if mass[0] <= 0:
        raise ParameterError("zero mass at level 0: nothing to normalize")
    npos = int(np.argmax(mass <= 0)) if np.any(mass <= 0) else mass.size
    levels = path.levels[:npos]
    mass = mass[:npos]
    u_of_y = _clock_integral(levels, mass)
    tc = TimeChange(levels, u_of_y)
    states, covered = [], []
    for u in u_grid:
        idx = tc.nearest_index(u)
        if idx is None:
            break
        states.append(normalize(path.states[idx]))
        covered.append(u)
    meta = dict(path.meta)
    meta.update({
        "u_horizon": float(u_of_y[-1]),
        "partial": len(covered) < u_grid.size,
        "y_levels_used": levels,
    })
    fv = MeasurePath(np.asarray(covered), states,
                     np.ones(len(covered)), meta)
    return fv, tc


def fv_path(alpha, theta, pibar, u_grid, eps, rng, trunc=DEFAULT_TRUNC,
            level_step=0.04, imm_chunk=1.5, y_cap=48.0):
    """Unit-mass path at the requested clock points.

    Simulates the mass-valued process from `pibar` on a fixed forward level
    grid, extends the immigration depth in chunks while the clock still needs
    covering, and stops early once the clock passes the last requested u or
    the mass falls below the extinction floor (partial path, flagged).
    """
    if abs(total_mass(pibar) - 1.0) > 1e-9:
        raise ParameterError("fv paths start from a unit-mass measure")
    if theta < 0:
        raise ParameterError(f"theta must be >= 0, got {theta}")
    u_grid = np.asarray(u_grid, dtype=float)
    u_max = float(u_grid.max())
    g = _gen(rng)
    n_lin = int(round(2.4 / level_step))
    levels = np.concatenate([
        np.arange(0.0, n_lin + 1) * level_step,
        2.4 + np.arange(1, int((y_cap - 2.4) / 0.1) + 1) * 0.1,
    ])
    pb = PathBuilder(alpha, eps, levels, g)
    pb.add_atom_clades(pibar.masses, pibar.locations)
    if theta > 0:
        pb.add_immigration(theta, imm_chunk)
    states = [pb.state0()]
    masses = [total_mass(states[0])]
    used_levels = [0.0]
    u_cum = [0.0]
    floor = MASS_FLOOR_FRAC * masses[0]
    died = False
    while pb.n_levels_remaining():
        y_next = pb.peek_next_level()
        while theta > 0 and y_next > pb.imm_depth:
            pb.add_immigration(theta, pb.imm_depth + imm_chunk)
        _, vals, typ, _ = pb.eval_next_level()
        m = float(vals.sum())
        states.append(AtomicMeasure(vals, typ, floor_frac=0.0))
        masses.append(m)
        used_levels.append(y_next)
        if m <= floor:
            died = True
            break
        du = (used_levels[-1] - used_levels[-2]) * 0.5 * (
            1.0 / masses[-2] + 1.0 / m)
        u_cum.append(u_cum[-1] + du)
        if u_cum[-1] > u_max:
            break
    if died:
        states.pop()
        masses.pop()
        used_levels.pop()
    raw = MeasurePath(np.asarray(used_levels), states, np.asarray(masses),
                      {"alpha": alpha, "theta": theta, "eps": eps,
                       "mass_died": died})
    fv, tc = depoissonize(raw, u_grid)
    fv.meta["mass_died"] = died
    return fv, tc, raw


def shiga_project(path):
    """Aggregate each clade to a single atom carrying the clade's whole mass.

    Needs the per-clade bookkeeping (`keep_clades=True` when building the
    path).  Total mass is preserved level by level up to summation roundoff;
    atom counts can only drop.
    """
    if path.clades is None:
        raise ParameterError("shiga projection needs per-clade bookkeeping; "
                             "build the path with keep_clades=True")
    reps = np.array([c.rep_type for c in path.clades])
    stack = (np.vstack([c.masses for c in path.clades])
             if path.clades else np.zeros((0, path.levels.size)))
    states = []
    for j in range(path.levels.size):
        col = stack[:, j] if stack.size else np.empty(0)
        pos = col > 0
        states.append(AtomicMeasure(col[pos], reps[pos], floor_frac=0.0))
    mass = np.array([total_mass(s) for s in states])
    meta = dict(path.meta)
    meta["projected"] = True
    return MeasurePath(path.levels.copy(), states, mass, meta)
