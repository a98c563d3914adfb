"""Distributional comparison machinery for the validation catalog.

The primary tool is the Laplace-transform sup-distance (robust against the
heavy tails the stable scaffolding produces); Kolmogorov-Smirnov statistics
are used where target CDFs are cheap.  Chinese-restaurant oracles provide the
independent route for diversity and top-mass checks.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy import stats as _sps

from spindle_sim.randcore import ParameterError, _gen

__all__ = [
    "TestReport",
    "ks_one_sample",
    "ks_two_sample",
    "laplace_distance",
    "crp_diversity_oracle",
    "crp_top_fraction",
    "chi2_two_sample_counts",
    "reports_to_json",
    "write_reports",
]


@dataclass
class TestReport:
    """One pass/fail line: a statistic against its threshold.

    `direction` is "le" when the statistic must stay at or below the
    threshold, "ge" when it must reach it.
    """

    name: str
    statistic: float
    threshold: float
    n: int
    direction: str = "le"
    diagnostics: dict = field(default_factory=dict)

    @property
    def passed(self):
        if self.direction == "le":
            return self.statistic <= self.threshold
        return self.statistic >= self.threshold

    def line(self):
        mark = "PASS" if self.passed else "FAIL"
        op = "<=" if self.direction == "le" else ">="
        return (f"[{mark}] {self.name}: stat={self.statistic:.6g} "
                f"{op} {self.threshold:.6g} (n={self.n})")


def reports_to_json(reports):
    return json.dumps([{
        "name": r.name, "statistic": r.statistic, "threshold": r.threshold,
        "n": r.n, "direction": r.direction, "passed": r.passed,
        "diagnostics": {k: (v.tolist() if isinstance(v, np.ndarray) else v)
                        for k, v in r.diagnostics.items()},
    } for r in reports], indent=2)


def write_reports(reports, path):
    with open(path, "w") as f:
        f.write(reports_to_json(reports))


def ks_one_sample(samples, cdf):
    """Sup distance between the empirical CDF and a target CDF callable."""
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size == 0:
        raise ParameterError("need at least one sample")
    n = x.size
    f = np.asarray(cdf(x), dtype=float)
    upper = np.abs(np.arange(1, n + 1) / n - f)
    lower = np.abs(f - np.arange(0, n) / n)
    return float(max(upper.max(), lower.max()))


def ks_two_sample(a, b):
    """Sup distance between two empirical CDFs."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ParameterError("both samples must be nonempty")
    return float(_sps.ks_2samp(a, b, method="asymp").statistic)


def laplace_distance(samples, lt, lam_grid):
    """max_lambda |mean e^{-lam X} - lt(lam)| with per-lambda MC errors."""
    x = np.asarray(samples, dtype=float)
    lam_grid = np.asarray(lam_grid, dtype=float)
    if np.any(lam_grid <= 0):
        raise ParameterError("lambda grid must be positive")
    errs, sigmas = [], []
    for lam in lam_grid:
        e = np.exp(-lam * x)
        errs.append(abs(e.mean() - lt(lam)))
        sigmas.append(e.std(ddof=1) / math.sqrt(x.size))
    i = int(np.argmax(errs))
    return float(errs[i]), {"lam_grid": lam_grid.tolist(),
                            "errors": [float(e) for e in errs],
                            "sigma_mc": [float(s) for s in sigmas]}


# ---------------------------------------------------------------------------
# Chinese restaurant oracles


def crp_diversity_oracle(alpha, theta, n, rng):
    """K_n / n^alpha after n customers of the two-parameter CRP.

    Only the table count is tracked: between new tables the no-new-table
    probability telescopes into gamma ratios, so the next opening is found by
    inverting that product with a binary search -- exact and O(K log n).
    """
    if n < 1:
        raise ParameterError("need n >= 1")
    g = _gen(rng)
    k = 1
    m = 1  # customers seated
    lg = special.gammaln
    while m < n:
        # -log P(no new table while customers m+1..M) for M in (m, n]
        target = g.standard_exponential()

        def neg_log_no_new(M, m=m, k=k):
            return (lg(m + theta) - lg(M + theta)
                    + lg(M - k * alpha) - lg(m - k * alpha))

        if neg_log_no_new(n) < target:
            m = n
            break
        lo_m, hi_m = m + 1, n
        while lo_m < hi_m:
            mid = (lo_m + hi_m) // 2
            if neg_log_no_new(mid) >= target:
                hi_m = mid
            else:
                lo_m = mid + 1
        m = lo_m
        k += 1
    return k / n**alpha


def _crp_sizes_python(u, alpha, theta):
    counts = np.zeros(u.size + 1)
    counts[0] = 1.0
    k = 1
    for m in range(1, u.size + 1):
        x = u[m - 1] * (m + theta)
        if x < theta + k * alpha:
            counts[k] = 1.0
            k += 1
        else:
            x -= theta + k * alpha
            acc = 0.0
            for j in range(k):
                acc += counts[j] - alpha
                if x < acc:
                    counts[j] += 1.0
                    break
            else:
                counts[k - 1] += 1.0  # float guard: last table takes it
    return counts[:k]


try:  # numba shrinks the seating loop ~100x; plain python otherwise
    import numba as _numba

    _crp_sizes_jit = _numba.njit(cache=False)(_crp_sizes_python)
except ImportError:  # pragma: no cover
    _crp_sizes_jit = _crp_sizes_python


def crp_top_fraction(alpha, theta, n, rng):
    """Largest table fraction after n customers; oracle for the top atom mass."""
    g = _gen(rng)
    u = g.random(n - 1)
    counts = _crp_sizes_jit(u, alpha, theta)
    return float(np.max(counts)) / n


def chi2_two_sample_counts(a, b, min_expected=5.0):
    """Two-sample chi-square on integer counts, bins pooled to the expected floor.

    Returns (statistic, p_value, dof)."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    hi = int(max(a.max(), b.max()))
    ca = np.bincount(a, minlength=hi + 1).astype(float)
    cb = np.bincount(b, minlength=hi + 1).astype(float)
    tot = ca + cb
    # pool adjacent count values until each bin holds enough mass
    bins_a, bins_b = [], []
    acc_a = acc_b = acc_t = 0.0
    scale = (ca.sum() + cb.sum()) / 2.0
    for j in range(hi + 1):
        acc_a += ca[j]
        acc_b += cb[j]
        acc_t += tot[j]
        if acc_t * min(ca.sum(), cb.sum()) / (ca.sum() + cb.sum()) >= min_expected:
            bins_a.append(acc_a)
            bins_b.append(acc_b)
            acc_a = acc_b = acc_t = 0.0
    if acc_t > 0:
        if bins_a:
            bins_a[-1] += acc_a
            bins_b[-1] += acc_b
        else:
            bins_a, bins_b = [acc_a], [acc_b]
    table = np.array([bins_a, bins_b])
    if table.shape[1] < 2:
        return 0.0, 1.0, 0
    stat, p, dof, _ = _sps.chi2_contingency(table)
    return float(stat), float(p), int(dof)
