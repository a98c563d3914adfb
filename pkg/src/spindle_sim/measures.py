"""Finite purely-atomic measures on [0,1] and their observables.

The measure state of every process here is a finite list of (mass, location)
atoms.  Locations are type labels produced by uniform draws; two atoms share a
location only when they were built from the same draw, so locations are
compared exactly.
"""

import json
import math

import numpy as np

from spindle_sim.randcore import _gen

__all__ = [
    "AtomicMeasure",
    "ZERO_MEASURE",
    "total_mass",
    "ranked_masses",
    "size_biased_pick",
    "alpha_diversity",
    "tv_distance",
    "normalize",
    "write_csv",
    "read_csv",
    "to_json_array",
    "from_json_array",
]

DEFAULT_ATOM_FLOOR = 1e-12  # relative to total mass; guards against path dust


class AtomicMeasure:
    """Finite purely atomic measure on [0,1]: arrays of masses and locations.

    Atoms with mass below ``floor_frac`` of the total are dropped at
    construction (zero-mass atoms are never stored); duplicate locations are
    merged by summing their masses.
    """

    __slots__ = ("masses", "locations")

    def __init__(self, masses=(), locations=(), floor_frac=DEFAULT_ATOM_FLOOR):
        m = np.asarray(masses, dtype=float).ravel()
        x = np.asarray(locations, dtype=float).ravel()
        if m.shape != x.shape:
            raise ValueError("masses and locations must have equal length")
        if m.size and (np.any(m < 0) or not np.all(np.isfinite(m))):
            raise ValueError("atom masses must be finite and >= 0")
        if x.size and (np.any(x < 0) or np.any(x > 1)):
            raise ValueError("atom locations must lie in [0,1]")
        if x.size != np.unique(x).size:
            x, inv = np.unique(x, return_inverse=True)
            m = np.bincount(inv, weights=m, minlength=x.size)
        keep = m > floor_frac * m.sum()
        self.masses = np.ascontiguousarray(m[keep])
        self.locations = np.ascontiguousarray(x[keep])

    @property
    def n_atoms(self):
        return self.masses.size

    def __len__(self):
        return self.masses.size

    def __add__(self, other):
        return AtomicMeasure(
            np.concatenate([self.masses, other.masses]),
            np.concatenate([self.locations, other.locations]),
            floor_frac=0.0,
        )

    def __mul__(self, c):
        if c < 0:
            raise ValueError("measures scale by nonnegative factors")
        if c == 0:
            return AtomicMeasure()
        return AtomicMeasure(self.masses * c, self.locations, floor_frac=0.0)

    __rmul__ = __mul__

    def __repr__(self):
        return f"AtomicMeasure({self.n_atoms} atoms, total={total_mass(self):.6g})"


ZERO_MEASURE = AtomicMeasure()


def total_mass(pi):
    return float(pi.masses.sum())


def ranked_masses(pi, k):
    """Top-k atom masses in descending order, zero-padded."""
    if k < 1:
        raise ValueError("k must be >= 1")
    out = np.zeros(k)
    top = np.sort(pi.masses)[::-1][:k]
    out[: top.size] = top
    return out


def size_biased_pick(pi, rng):
    """(mass, location) of one atom chosen with probability mass_i / total."""
    tot = total_mass(pi)
    if tot <= 0:
        raise ValueError("size-biased pick from the zero measure")
    g = _gen(rng)
    u = g.random() * tot
    idx = int(np.searchsorted(np.cumsum(pi.masses), u, side="right"))
    idx = min(idx, pi.n_atoms - 1)
    return float(pi.masses[idx]), float(pi.locations[idx])


def alpha_diversity(pi, alpha, h):
    """Finite-h diversity estimator Gamma(1-alpha) h^alpha #{atoms > h}."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0,1)")
    if h <= 0:
        raise ValueError("h must be > 0")
    count = int(np.count_nonzero(pi.masses > h))
    return math.gamma(1.0 - alpha) * h**alpha * count


def tv_distance(pi, pi2):
    """Total variation between purely atomic measures: sum of |mass differences|
    over the union of atom locations (no factor-of-two convention)."""
    locs = np.concatenate([pi.locations, pi2.locations])
    signed = np.concatenate([pi.masses, -pi2.masses])
    uniq, inv = np.unique(locs, return_inverse=True)
    diffs = np.bincount(inv, weights=signed, minlength=uniq.size)
    return float(np.abs(diffs).sum())


def normalize(pi):
    tot = total_mass(pi)
    if tot <= 0:
        raise ValueError("cannot normalize the zero measure")
    return AtomicMeasure(pi.masses / tot, pi.locations, floor_frac=0.0)


# ---------------------------------------------------------------------------
# serialization: CSV rows and JSON arrays, 17 significant digits


def write_csv(pi, f):
    """Write atoms as ``mass,location`` rows; `f` is a path or open file."""
    close = False
    if not hasattr(f, "write"):
        f = open(f, "w")
        close = True
    try:
        f.write("mass,location\n")
        for m, x in zip(pi.masses, pi.locations):
            f.write(f"{m:.17g},{x:.17g}\n")
    finally:
        if close:
            f.close()


def read_csv(f):
    close = False
    if not hasattr(f, "read"):
        f = open(f)
        close = True
    try:
        rows = [line.strip() for line in f if line.strip()]
    finally:
        if close:
            f.close()
    if rows and rows[0].lower().startswith("mass"):
        rows = rows[1:]
    pairs = [row.split(",") for row in rows]
    return AtomicMeasure(
        [float(p[0]) for p in pairs], [float(p[1]) for p in pairs], floor_frac=0.0
    )


def to_json_array(pi):
    return json.dumps([[m, x] for m, x in zip(pi.masses, pi.locations)])


def from_json_array(s):
    pairs = json.loads(s)
    return AtomicMeasure(
        [p[0] for p in pairs], [p[1] for p in pairs], floor_frac=0.0
    )
