"""Monte Carlo verification of convergence in probability.

The probed quantity is P(|(1/N) sum_{n<=N} f_{k_n} - D_N| > eps) across a
grid of N, estimated from R seeded replications with Wilson 99% intervals.
"Convergence in probability" is an asymptotic claim, so the verdict is a
falsifiable finite-sample reading:

* ``consistent-with-wlln``  -- final-grid-point exceedance below the pass
  threshold and no statistically significant increase across the grid
* ``violation``             -- a later grid point's lower confidence bound
  exceeds an earlier point's upper bound AND the final exceedance is above
  the pass threshold
* ``inconclusive``          -- anything else

All replications share common random numbers (derived streams keyed only by
the master seed and replication number), so estimates at different epsilon
or for different thinning patterns ride on the same paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .correctors import CorrectorSeries
from .extract import ExtractionPlan, truncate_array
from .models import SequenceModel
from .streams import path_rng

_Z99 = 2.5758293035489004


def wilson_interval(successes: int, trials: int, z: float = _Z99):
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass
class ConvergenceReport:
    n_grid: tuple
    epsilon: float
    replications: int
    p_hat: dict            # N -> exceedance fraction
    ci: dict               # N -> (lo, hi)
    verdict: str
    seed: int
    l2_hat: dict | None = None
    l2_se: dict | None = None
    markov_ok: bool | None = None
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        rows = []
        for N in self.n_grid:
            row = {"N": N, "p_hat": self.p_hat[N],
                   "ci_lo": self.ci[N][0], "ci_hi": self.ci[N][1]}
            if self.l2_hat is not None:
                row["l2_hat"] = self.l2_hat[N]
                row["l2_se"] = self.l2_se[N]
            rows.append(row)
        return {"epsilon": self.epsilon, "replications": self.replications,
                "seed": self.seed, "verdict": self.verdict,
                "markov_ok": self.markov_ok, "notes": self.notes,
                "grid": rows}


def _verdict(n_grid, p_hat, ci, pass_threshold, increase_margin):
    grid = list(n_grid)
    increase = any(
        ci[grid[b]][0] > ci[grid[a]][1] + increase_margin
        for a in range(len(grid)) for b in range(a + 1, len(grid))
    )
    final_bad = p_hat[grid[-1]] > pass_threshold
    if increase and final_bad:
        return "violation"
    if not increase and not final_bad:
        return "consistent-with-wlln"
    return "inconclusive"


def wlln_probe(model: SequenceModel, indices, D: CorrectorSeries,
               epsilon: float, n_grid, R: int, seed: int,
               pass_threshold: float = 0.05, increase_margin: float = 0.0,
               compute_l2: bool = False) -> ConvergenceReport:
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if R < 1:
        raise ValueError("R must be positive")
    n_grid = tuple(sorted(int(N) for N in n_grid))
    idx = np.asarray(indices, dtype=int)
    if np.any(np.diff(idx) <= 0):
        raise ValueError("indices must be strictly increasing")
    if len(idx) < n_grid[-1]:
        raise ValueError("index sequence shorter than the largest grid point")
    sel = idx[: n_grid[-1]]

    exceed = {N: 0 for N in n_grid}
    sq_sum = {N: [] for N in n_grid} if compute_l2 else None
    needs_factor = D.kind == "conditional"
    for r in range(R):
        path = model.sample_at(sel, seed, replication=r)
        vals = path.values
        cs = np.cumsum(vals)
        for N in n_grid:
            if needs_factor:
                if path.factor_value is None:
                    raise ValueError(
                        "conditional corrector needs a model exposing the factor")
                d = D.value(N, factor=path.factor_value)
            else:
                d = D.value(N)
            if abs(cs[N - 1] / N - d) > epsilon:
                exceed[N] += 1
            if compute_l2:
                head = vals[:N]
                t = float(np.sum(truncate_array(head, float(N)))) - N * d
                sq_sum[N].append((t / N) ** 2)

    p_hat = {N: exceed[N] / R for N in n_grid}
    ci = {N: wilson_interval(exceed[N], R) for N in n_grid}
    verdict = _verdict(n_grid, p_hat, ci, pass_threshold, increase_margin)
    report = ConvergenceReport(n_grid, float(epsilon), R, p_hat, ci, verdict,
                               int(seed))
    if compute_l2:
        report.l2_hat = {N: float(np.mean(sq_sum[N])) for N in n_grid}
        report.l2_se = {N: float(np.std(sq_sum[N], ddof=1)) / math.sqrt(R)
                        for N in n_grid}
        p_se = {N: math.sqrt(max(p_hat[N] * (1 - p_hat[N]), 1.0 / R) / R)
                for N in n_grid}
        report.markov_ok = all(
            p_hat[N] <= report.l2_hat[N] / epsilon ** 2
            + 3.0 * (p_se[N] + report.l2_se[N] / epsilon ** 2)
            for N in n_grid)
    return report


def l2_probe(model: SequenceModel, indices, D: CorrectorSeries, n_grid,
             R: int, seed: int, epsilon: float = 0.25) -> ConvergenceReport:
    """wlln_probe augmented with the L2-criterion estimate
    N^-2 E(sum (f^{[-N,N]} - D_N))^2 and the Markov cross-check."""
    return wlln_probe(model, indices, D, epsilon, n_grid, R, seed,
                      compute_l2=True)


@dataclass
class GapReport:
    n_grid: tuple
    epsilon: float
    replications: int
    p_hat: dict
    union_bound: dict
    se: dict
    dominated: bool
    seed: int

    def to_json(self) -> dict:
        return {"epsilon": self.epsilon, "replications": self.replications,
                "seed": self.seed, "dominated": self.dominated,
                "grid": [{"N": N, "p_hat": self.p_hat[N],
                          "union_bound": self.union_bound[N],
                          "se": self.se[N]} for N in self.n_grid]}


def truncation_gap_probe(model: SequenceModel, indices, n_grid, R: int,
                         seed: int, epsilon: float = 0.25) -> GapReport:
    """Estimates P(|(1/N) sum_{n<=N} f_{k_n} 1{|f_{k_n}| > N}| > eps) and
    compares with the exact union bound N * max_{n<=N} P(|f_{k_n}| > N)."""
    if R < 100:
        raise ValueError("R must be at least 100")
    n_grid = tuple(sorted(int(N) for N in n_grid))
    idx = np.asarray(indices, dtype=int)
    if len(idx) < n_grid[-1]:
        raise ValueError("index sequence shorter than the largest grid point")
    sel = idx[: n_grid[-1]]

    exceed = {N: 0 for N in n_grid}
    for r in range(R):
        path = model.sample_at(sel, seed, replication=r)
        vals = path.values
        for N in n_grid:
            head = vals[:N]
            gap = np.sum(head[np.abs(head) > N]) / N
            if abs(gap) > epsilon:
                exceed[N] += 1
    p_hat = {N: exceed[N] / R for N in n_grid}
    bound = {}
    for N in n_grid:
        bound[N] = N * max(model.marginal_dist(int(k)).survival(float(N))
                           for k in idx[:N])
    se = {N: math.sqrt(max(p_hat[N] * (1 - p_hat[N]), 1.0 / R) / R)
          for N in n_grid}
    dominated = all(p_hat[N] <= bound[N] + 3.0 * se[N] for N in n_grid)
    return GapReport(n_grid, float(epsilon), R, p_hat, bound, se,
                     dominated, int(seed))


# -------------------------------------------------------------------------
# hereditary behavior
# -------------------------------------------------------------------------

PATTERNS = ("every-2nd", "every-3rd", "random-thinning", "prefix-shift")


def thin_indices(indices, pattern: str, seed: int = 0) -> np.ndarray:
    idx = np.asarray(indices, dtype=int)
    if pattern == "every-2nd":
        return idx[::2]
    if pattern == "every-3rd":
        return idx[::3]
    if pattern == "random-thinning":
        rng = path_rng(seed, replication=2**32 + 17)  # off the replication range
        keep = rng.random(len(idx)) < 0.5
        keep[0] = True
        return idx[keep]
    if pattern == "prefix-shift":
        return idx[1:]
    raise ValueError(f"unknown pattern {pattern!r}")


@dataclass
class HereditaryReport:
    reports: dict          # pattern -> ConvergenceReport
    all_consistent: bool
    notes: list

    def to_json(self) -> dict:
        return {"all_consistent": self.all_consistent, "notes": self.notes,
                "patterns": {p: r.to_json() for p, r in self.reports.items()}}


def hereditary_suite(model: SequenceModel, indices, D: CorrectorSeries,
                     epsilon: float, n_grid, R: int, seed: int,
                     patterns=PATTERNS,
                     pass_threshold: float = 0.05) -> HereditaryReport:
    """Runs the WLLN probe on derived subsequences with the SAME corrector
    series, indexed by the new position count."""
    n_grid = tuple(sorted(int(N) for N in n_grid))
    reports = {}
    notes = []
    for pattern in patterns:
        sub = thin_indices(indices, pattern, seed)
        grid = tuple(N for N in n_grid if N <= len(sub))
        if grid != n_grid:
            notes.append(f"{pattern}: grid truncated to {grid} "
                         f"(subsequence length {len(sub)})")
        if not grid:
            notes.append(f"{pattern}: subsequence too short for any grid point")
            continue
        reports[pattern] = wlln_probe(model, sub, D, epsilon, grid, R, seed,
                                      pass_threshold=pass_threshold)
    all_ok = bool(reports) and all(r.verdict == "consistent-with-wlln"
                                   for r in reports.values())
    return HereditaryReport(reports, all_ok, notes)
