"""Pathwise simulation of the self-similar measure-valued process.

A path is built from independent clades (one per atom of the initial measure)
plus, when the immigration rate theta is positive, excursion clades of the
reflected scaffolding attached at their entry depths.  The state at a level
is the superskewer: every spindle alive at that level contributes its mass at
its type location.

The builder below drives the streaming scaffolding scans level by level, so a
path costs memory proportional to the level-straddling jumps only.  Each
straddling spindle is a record carrying its own exact bridge state, advanced
only at the levels it covers; evaluation is forward-only, and the immigration
depth can be extended mid-path as long as unprocessed levels stay below the
covered depth (passage has no overshoot, so extensions glue exactly).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from spindle_sim.besq import besq_neg_spindle, sample_neg_lifetime
from spindle_sim.measures import AtomicMeasure, total_mass
from spindle_sim.randcore import ParameterError, _gen
from spindle_sim.scaffolding import scan_scaffolding, trunc_drift, trunc_rate

__all__ = [
    "CladeTrace",
    "MeasurePath",
    "PathBuilder",
    "superskewer",
    "sssp_pathwise_a0",
    "sssp_immigration",
    "sssp_path",
    "emigration_immigration_path",
    "theta_decomposition",
]


@dataclass
class CladeTrace:
    """One clade's mass at every level plus its representative type."""

    rep_type: float
    masses: np.ndarray


@dataclass
class MeasurePath:
    """A sampled path: one atomic measure per level, plus the mass trace."""

    levels: np.ndarray
    states: list
    mass_trace: np.ndarray
    meta: dict = field(default_factory=dict)
    clades: list = None

    def state_at(self, y):
        j = int(np.argmin(np.abs(self.levels - y)))
        return self.states[j]


def superskewer(y, clade):
    """Atomic measure read off a clade at level y.

    Every spindle with 0 <= y - birth < lifetime contributes its value at
    that offset, placed at its type; offsets must have been declared at
    creation (fixed level grids do this automatically).
    """
    if y < 0:
        raise ParameterError(f"level must be >= 0, got {y}")
    masses, locs = [], []
    for sp, x, birth in zip(clade.points.spindles, clade.points.types,
                            clade.birth_levels):
        off = y - birth
        if 0.0 <= off < sp.lifetime:
            v = sp.value_at(off)
            if v > 0.0:
                masses.append(v)
                locs.append(x)
    return AtomicMeasure(masses, locs, floor_frac=0.0)


def theta_decomposition(alpha, theta):
    """theta = m*alpha + theta' with theta' in (0, alpha]; m+1 copies, one thinned."""
    if theta <= 0:
        raise ParameterError(f"need theta > 0, got {theta}")
    m = math.ceil(theta / alpha) - 1
    theta_prime = theta - m * alpha
    return m, theta_prime


class PathBuilder:
    """Level-by-level superskewer evaluation for one path.

    Scaffolding sojourns above the top grid level are pruned (law-exact, see
    `scan_scaffolding`), so clade lifetimes recorded here are censored at that
    barrier; per-path cost is then bounded by the occupation below it.
    """

    def __init__(self, alpha, eps, levels, rng):
        levels = np.asarray(levels, dtype=float)
        if levels.size == 0 or levels[0] != 0.0 or np.any(np.diff(levels) <= 0):
            raise ParameterError("levels must increase strictly from 0")
        self.alpha = alpha
        self.eps = eps
        self.levels = levels
        self.levels_pos = levels[1:]
        self.prune_above = float(levels[-1])
        self.gen = _gen(rng)
        self._delta = 4.0 + 2.0 * alpha
        self._lam = trunc_rate(alpha, eps)
        self._c = trunc_drift(alpha, eps)
        n0 = 0
        self._rec = {
            "birth": np.empty(n0), "size": np.empty(n0), "s": np.empty(n0),
            "y": np.empty(n0), "typ": np.empty(n0),
            "clade": np.empty(n0, dtype=np.int64),
        }
        self._buckets = [[] for _ in self.levels_pos]
        self._next_level = 0
        self._state0_masses = []
        self._state0_locs = []
        self.clade_types = []
        self.clade_kinds = []
        self.zeta_plus = []
        self.imm_depth = 0.0
        self.imm_theta = None
        self._imm_copies = None

    # -- registration ------------------------------------------------------

    def _push_records(self, birth, size, y0, typ, clade, lo, hi):
        keep = lo < hi
        if not keep.any():
            return
        birth, size, y0 = birth[keep], size[keep], y0[keep]
        typ, clade, lo, hi = typ[keep], clade[keep], lo[keep], hi[keep]
        base = self._rec["birth"].size
        counts = (hi - lo).astype(np.int64)
        total = int(counts.sum())
        flat_lvl = np.repeat(lo, counts) + (
            np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts))
        flat_rec = base + np.repeat(np.arange(lo.size), counts)
        order = np.argsort(flat_lvl, kind="stable")
        flat_lvl, flat_rec = flat_lvl[order], flat_rec[order]
        bounds = np.searchsorted(flat_lvl, np.arange(self.levels_pos.size + 1))
        for j in range(int(flat_lvl[0]), int(flat_lvl[-1]) + 1):
            if bounds[j] < bounds[j + 1]:
                if j < self._next_level:
                    raise ParameterError("record added below a processed level")
                self._buckets[j].append(flat_rec[bounds[j]:bounds[j + 1]])
        r = self._rec
        r["birth"] = np.concatenate([r["birth"], birth])
        r["size"] = np.concatenate([r["size"], size])
        r["s"] = np.concatenate([r["s"], np.zeros(lo.size)])
        r["y"] = np.concatenate([r["y"], np.asarray(y0, dtype=float)])
        r["typ"] = np.concatenate([r["typ"], typ])
        r["clade"] = np.concatenate([r["clade"], clade])

    def add_atom_clades(self, masses, locs):
        """One clade per atom: initial spindle plus descendant scaffolding.

        Atoms whose scaffolding dies before its first jump cost a single
        exponential draw; the rest run full streaming scans.
        """
        masses = np.asarray(masses, dtype=float)
        locs = np.asarray(locs, dtype=float)
        if masses.size == 0:
            return np.empty(0)
        g = self.gen
        n = masses.size
        base = len(self.clade_types)
        zeta0 = np.atleast_1d(sample_neg_lifetime(self.alpha, masses, g, n))
        t_first = g.standard_exponential(n) / self._lam
        t_drift = zeta0 / self._c
        zeta_plus = zeta0.copy()
        for i in range(n):
            self.clade_types.append(float(locs[i]))
            self.clade_kinds.append("atom")
            if t_first[i] < t_drift[i]:
                res = scan_scaffolding(
                    self.alpha, self.eps, g, start=float(zeta0[i]),
                    stop_below=0.0, levels=self.levels_pos,
                    first_jump_time=float(t_first[i]),
                    prune_above=self.prune_above)
                zeta_plus[i] = res.zeta_plus
                m = res.str_birth.size
                if m:
                    typ = g.random(m)
                    self._push_records(res.str_birth, res.str_size,
                                       np.zeros(m), typ,
                                       np.full(m, base + i, dtype=np.int64),
                                       res.str_lo, res.str_hi)
        # initial spindles straddle the levels below their lifetimes
        hi = np.searchsorted(self.levels_pos, zeta0, side="left").astype(np.int64)
        self._push_records(np.zeros(n), zeta0, masses / zeta0, locs,
                           base + np.arange(n, dtype=np.int64),
                           np.zeros(n, dtype=np.int64), hi)
        self._state0_masses.extend(masses.tolist())
        self._state0_locs.extend(locs.tolist())
        self.zeta_plus.extend(zeta_plus.tolist())
        return zeta_plus

    def add_immigration(self, theta, depth):
        """Extend the immigration population down to `depth`.

        theta = m*alpha + theta': m+1 independent reflected scaffoldings, the
        last thinned per excursion at rate theta'/alpha.  Each call continues
        the copies from the current depth (exact: passage has no overshoot).
        """
        if self.imm_theta is not None and theta != self.imm_theta:
            raise ParameterError("immigration rate cannot change mid-path")
        self.imm_theta = theta
        depth = min(depth, self.prune_above)  # deeper clades are invisible
        if depth <= self.imm_depth:
            return
        m, theta_prime = theta_decomposition(self.alpha, theta)
        if self._imm_copies is None:
            self._imm_copies = [None] * m + [theta_prime / self.alpha]
        d0, d1 = self.imm_depth, depth
        g = self.gen
        local_levels = self.levels_pos - d0
        for thin in self._imm_copies:
            res = scan_scaffolding(self.alpha, self.eps, g, start=0.0,
                                   stop_below=-(d1 - d0), reflect=True,
                                   levels=local_levels,
                                   prune_above=self.prune_above - d0)
            n_exc = res.exc_depth.size
            keep_exc = np.ones(n_exc, dtype=bool)
            if thin is not None and n_exc:
                keep_exc = g.random(n_exc) < thin
            if res.str_birth.size == 0:
                continue
            rec_keep = keep_exc[res.str_exc]
            if not rec_keep.any():
                continue
            exc_ids = res.str_exc[rec_keep]
            used = np.unique(exc_ids)
            remap = np.full(n_exc, -1, dtype=np.int64)
            for e in used:
                remap[e] = len(self.clade_types)
                self.clade_types.append(float(g.random()))
                self.clade_kinds.append("immigration")
                self.zeta_plus.append(
                    float(d0 + res.exc_depth[e] + res.exc_height[e]))
            mrec = int(rec_keep.sum())
            typ = g.random(mrec)
            self._push_records(res.str_birth[rec_keep], res.str_size[rec_keep],
                               np.zeros(mrec), typ, remap[exc_ids],
                               res.str_lo[rec_keep], res.str_hi[rec_keep])
        self.imm_depth = depth

    # -- evaluation --------------------------------------------------------

    def state0(self):
        return AtomicMeasure(self._state0_masses, self._state0_locs,
                             floor_frac=0.0)

    def n_levels_remaining(self):
        return self.levels_pos.size - self._next_level

    def peek_next_level(self):
        return self.levels_pos[self._next_level]

    def eval_next_level(self):
        """Advance to the next positive grid level; returns (level, values,
        types, clade ids) for the atoms alive there."""
        j = self._next_level
        if j >= self.levels_pos.size:
            raise ParameterError("all levels already evaluated")
        if self._imm_copies is not None and self.levels_pos[j] > self.imm_depth:
            raise ParameterError("level beyond the covered immigration depth")
        r = self._rec
        idx = (np.concatenate(self._buckets[j])
               if self._buckets[j] else np.empty(0, dtype=np.int64))
        self._buckets[j] = None  # freed; levels are consumed once
        self._next_level = j + 1
        y = self.levels_pos[j]
        if idx.size == 0:
            return y, np.empty(0), np.empty(0), np.empty(0, dtype=np.int64)
        offs = y - r["birth"][idx]
        u = offs / r["size"][idx]
        s_new = u / (1.0 - u)
        dts = s_new - r["s"][idx]
        nn = self.gen.poisson(r["y"][idx] / (2.0 * dts))
        y_new = self.gen.gamma(self._delta / 2.0 + nn, 2.0 * dts)
        vals = r["size"][idx] * (1.0 - u) ** 2 * y_new
        r["s"][idx] = s_new
        r["y"][idx] = y_new
        return y, vals, r["typ"][idx], r["clade"][idx]

    def build(self, meta=None, keep_clades=False, max_level=None):
        """Evaluate every remaining level and assemble the MeasurePath."""
        states = [self.state0()]
        masses = [total_mass(states[0])]
        used = [0]
        n_clades = len(self.clade_types)
        traces = np.zeros((n_clades, self.levels.size)) if keep_clades else None
        if keep_clades:
            for cid, m0 in enumerate(self._state0_masses):
                traces[cid, 0] = m0
        while self.n_levels_remaining():
            jlvl = self._next_level + 1
            if max_level is not None and self.peek_next_level() > max_level:
                break
            _, vals, typ, clade = self.eval_next_level()
            states.append(AtomicMeasure(vals, typ, floor_frac=0.0))
            masses.append(float(vals.sum()))
            used.append(jlvl)
            if keep_clades and vals.size:
                traces[:, jlvl] = np.bincount(clade, weights=vals,
                                              minlength=n_clades)
        levels = self.levels[used]
        clades = None
        if keep_clades:
            clades = [CladeTrace(self.clade_types[cid], traces[cid, used])
                      for cid in range(n_clades)]
        info = {"alpha": self.alpha, "eps": self.eps}
        if meta:
            info.update(meta)
        return MeasurePath(levels, states, np.asarray(masses), info, clades)


def sssp_pathwise_a0(alpha, pi, levels, eps, rng, keep_clades=False):
    """Pathwise immigration-free process: independent clades per atom of pi."""
    pb = PathBuilder(alpha, eps, levels, rng)
    pb.add_atom_clades(pi.masses, pi.locations)
    return pb.build(meta={"theta": 0.0}, keep_clades=keep_clades)


def sssp_immigration(alpha, theta, y_max, levels, eps, rng, keep_clades=False):
    """Pathwise immigration process started from the zero measure."""
    levels = np.asarray(levels, dtype=float)
    if levels.max() > y_max:
        raise ParameterError("levels must stay within [0, y_max]")
    pb = PathBuilder(alpha, eps, levels, rng)
    pb.add_immigration(theta, y_max)
    return pb.build(meta={"theta": theta}, keep_clades=keep_clades)


def sssp_path(alpha, theta, pi, levels, eps, rng, keep_clades=False):
    """The full process: atom clades plus (for theta > 0) immigration."""
    if theta < 0:
        raise ParameterError(f"theta must be >= 0, got {theta}")
    levels = np.asarray(levels, dtype=float)
    pb = PathBuilder(alpha, eps, levels, rng)
    pb.add_atom_clades(pi.masses, pi.locations)
    if theta > 0:
        pb.add_immigration(theta, float(levels.max()))
    return pb.build(meta={"theta": theta}, keep_clades=keep_clades)


def emigration_immigration_path(alpha, b, x, levels, eps, rng):
    """The emigration-immigration construction of a single-atom path.

    One spindle of size b at fixed type x, compensated by an immigration
    process at rate alpha while the spindle lives, then continued from the
    state at the spindle's death as an immigration-free path.  Distributed
    like the single-atom process itself.
    """
    g = _gen(rng)
    levels = np.asarray(levels, dtype=float)
    if levels[0] != 0.0 or np.any(np.diff(levels) <= 0):
        raise ParameterError("levels must increase strictly from 0")
    f = besq_neg_spindle(alpha, b, levels, g)
    zeta = f.lifetime
    below = levels[(levels > 0) & (levels < zeta)]
    grid = np.concatenate([[0.0], below, [zeta]])
    pb = PathBuilder(alpha, eps, grid, g)
    pb.add_immigration(alpha, zeta)
    imm = pb.build(meta={"theta": alpha})
    lam = imm.states[-1]  # immigration state at the spindle's death level
    above = levels[levels >= zeta]
    states_above = []
    if above.size:
        shifted = np.concatenate([[0.0], above - zeta])
        cont = sssp_path(alpha, 0.0, lam, shifted, eps, g)
        states_above = cont.states[1:]
    states = []
    k_above = 0
    for y in levels:
        if y < zeta:
            j = int(np.searchsorted(imm.levels, y))
            atom = AtomicMeasure([f.value_at(y)], [x], floor_frac=0.0)
            states.append(atom + imm.states[j])
        else:
            states.append(states_above[k_above])
            k_above += 1
    mass = np.array([total_mass(s) for s in states])
    return MeasurePath(levels, states, mass,
                       {"alpha": alpha, "theta": 0.0, "eps": eps,
                        "construction": "emigration-immigration",
                        "spindle_lifetime": zeta})
