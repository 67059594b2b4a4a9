"""Truncation and greedy near-orthogonal subsequence extraction.

The selection rule mirrors the inductive argument behind the hereditary
WLLN: having chosen k_1 < ... < k_{n-1}, accept the smallest candidate
k > k_{n-1} such that for every already-chosen index and every admissible
level N the centered truncated inner product

    E[(f_{k_j} 1{|f_{k_j}|<=N} - D_N)(f_k 1{|f_k|<=N} - D_N)]

is at most eps_n = max(exp(-n^2), eps_floor) in absolute value.  A level N
is admissible at step n when N <= exp(n^2); the level grid is finite, which
is a documented surrogate for the unbounded family of levels in the
asymptotic argument.

Exact mode requires a joint-moment oracle (independent coordinates, the
single-draw tail-vanishing model, the latent-shift factorization, or the
comonotone coupling); sample mode uses common-random-number Monte Carlo
estimates with 99% half-widths and accepts only when |estimate| +
half-width clears the threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .correctors import CorrectorSeries
from .distributions import UnsupportedOracleError, example41_constant_c
from .models import (
    Example41Model,
    IIDModel,
    IndependentArrayModel,
    LatentShiftModel,
    SequenceModel,
    TailVanishingModel,
)

_Z99 = 2.5758293035489004  # two-sided 99% normal quantile


def truncate(x: float, N: float) -> float:
    """f^{[-N,N]}: the value if it lies in the band, else zero (not clipping)."""
    return x if abs(x) <= N else 0.0


def truncate_array(x: np.ndarray, N: float) -> np.ndarray:
    return np.where(np.abs(x) <= N, x, 0.0)


@dataclass
class TruncationLevel:
    N: float

    def __post_init__(self):
        if self.N <= 0:
            raise ValueError("truncation level must be positive")


class ExtractionFailure(Exception):
    def __init__(self, step, eps, search_cap, best_candidate, best_violation):
        self.step = step
        self.eps = eps
        self.search_cap = search_cap
        self.best_candidate = best_candidate
        self.best_violation = best_violation
        super().__init__(
            f"candidate pool exhausted at step {step}: threshold {eps:.3e}, "
            f"best candidate {best_candidate} violated by {best_violation:.3e} "
            f"(search_cap {search_cap})")


def _is_independent(model: SequenceModel) -> bool:
    if isinstance(model, (IIDModel, IndependentArrayModel)):
        return True
    return isinstance(model, Example41Model) and model.joint_law == "independent"


def _constant_value(D: CorrectorSeries, N: int) -> float:
    if D.kind == "conditional":
        raise UnsupportedOracleError(
            "conditional correctors are only supported on latent-shift models")
    return D.value(N)


# -------------------------------------------------------------------------
# exact centered inner products
# -------------------------------------------------------------------------

def _comonotone_intervals(model: Example41Model, i: int, N: float):
    """u-intervals of the shared uniform mapping to nonzero values <= N."""
    rho = model.rho(i)
    two_c = 2.0 * example41_constant_c()
    out = []
    lo = rho
    for k in range(2, int(math.floor(N)) + 1):
        q = (1.0 - rho) * two_c / (k * k * math.log(k))
        if model.symmetric:
            out.append((lo, lo + q / 2.0, float(k)))
            out.append((lo + q / 2.0, lo + q, float(-k)))
        else:
            out.append((lo, lo + q, float(k)))
        lo += q
    return out


def _comonotone_product(model: Example41Model, j: int, k: int, N: float) -> float:
    """E[f_j^t f_k^t] under the shared-uniform coupling, by exact overlap
    integration of the two quantile partitions."""
    a = _comonotone_intervals(model, j, N)
    b = _comonotone_intervals(model, k, N)
    total = 0.0
    ia = ib = 0
    while ia < len(a) and ib < len(b):
        lo = max(a[ia][0], b[ib][0])
        hi = min(a[ia][1], b[ib][1])
        if hi > lo:
            total += (hi - lo) * a[ia][2] * b[ib][2]
        if a[ia][1] <= b[ib][1]:
            ia += 1
        else:
            ib += 1
    return total


def exact_centered_inner_product(model: SequenceModel, j: int, k: int,
                                 N: float, D: CorrectorSeries) -> float:
    """E[(f_j^{[-N,N]} - D_N)(f_k^{[-N,N]} - D_N)] via the model's joint
    oracle."""
    Nlev = int(N)
    if isinstance(model, LatentShiftModel):
        total = 0.0
        for b, p in model.factor_dist.atoms:
            d = D.value(Nlev, factor=b) if D.kind == "conditional" else D.value(Nlev)
            m1 = model.conditional_trunc_moment(b, N, 1)
            if j == k:
                m2 = model.conditional_trunc_moment(b, N, 2)
                total += p * (m2 - 2.0 * d * m1 + d * d)
            else:
                total += p * (m1 - d) ** 2
        return total
    d = _constant_value(D, Nlev)
    if _is_independent(model):
        mu_j = model.marginal_dist(j).trunc_moment(N, 1)
        if j == k:
            m2 = model.marginal_dist(j).trunc_moment(N, 2)
            return m2 - 2.0 * d * mu_j + d * d
        mu_k = model.marginal_dist(k).trunc_moment(N, 1)
        return (mu_j - d) * (mu_k - d)
    if isinstance(model, TailVanishingModel):
        g = model.g_dist
        cross = g.band_moment(float(max(j, k)), N, 2)
        mu_j = g.band_moment(float(j), N, 1)
        mu_k = g.band_moment(float(k), N, 1)
        return cross - d * (mu_j + mu_k) + d * d
    if isinstance(model, Example41Model):  # comonotone
        mu_j = model.marginal_dist(j).trunc_moment(N, 1)
        if j == k:
            m2 = model.marginal_dist(j).trunc_moment(N, 2)
            return m2 - 2.0 * d * mu_j + d * d
        mu_k = model.marginal_dist(k).trunc_moment(N, 1)
        cross = _comonotone_product(model, j, k, N)
        return cross - d * (mu_j + mu_k) + d * d
    raise UnsupportedOracleError(
        f"model kind {model.kind!r} has no exact joint-moment oracle")


# -------------------------------------------------------------------------
# sampled centered inner products (common random numbers)
# -------------------------------------------------------------------------

class _SampleBank:
    """R seeded paths up to a fixed horizon, shared by every estimate."""

    def __init__(self, model: SequenceModel, horizon: int, R: int, seed: int):
        if R < 100:
            raise ValueError("sample mode requires R >= 100")
        self.R = int(R)
        self.seed = int(seed)
        idx = np.arange(1, horizon + 1, dtype=np.int64)
        paths = [model.sample_at(idx, seed, replication=r)
                 for r in range(self.R)]
        self.values = np.stack([p.values for p in paths])
        self.factors = [p.factor_value for p in paths]

    def _centering(self, D: CorrectorSeries, N: int) -> np.ndarray:
        if D.kind != "conditional":
            return np.full(self.R, D.value(N))
        return np.array([D.value(N, factor=f) for f in self.factors])

    def estimate(self, j: int, k: int, N: float, D: CorrectorSeries):
        d = self._centering(D, int(N))
        x = truncate_array(self.values[:, j - 1], N) - d
        y = truncate_array(self.values[:, k - 1], N) - d
        prod = x * y
        est = float(np.mean(prod))
        hw = _Z99 * float(np.std(prod, ddof=1)) / math.sqrt(self.R)
        return est, hw


def centered_inner_product(model: SequenceModel, j: int, k: int, N: float,
                           D: CorrectorSeries, mode: str = "exact",
                           R: int = 400, seed: int = 0):
    """Returns (value, half_width); half_width is 0.0 in exact mode."""
    if mode == "exact":
        return exact_centered_inner_product(model, j, k, N, D), 0.0
    if mode == "sample":
        bank = _SampleBank(model, max(j, k), R, seed)
        return bank.estimate(j, k, N, D)
    raise ValueError(f"unknown mode {mode!r}")


# -------------------------------------------------------------------------
# the greedy plan
# -------------------------------------------------------------------------

@dataclass
class ExtractionPlan:
    indices: tuple          # selected indices k_1 < k_2 < ...
    n_grid: tuple           # truncation levels
    thresholds: dict        # step -> eps_n
    achieved: dict          # (j_step, n_step, N) -> value or (estimate, hw)
    mode: str
    seed: int
    eps_floor: float
    search_cap: int
    detail_steps: int
    corrector_ref: str
    sample_R: int = 0

    def eps_for_step(self, n: int) -> float:
        return self.thresholds[n]

    def to_json(self) -> dict:
        entries = []
        for (j, n, N), v in sorted(self.achieved.items()):
            e = {"j": j, "n": n, "N": N}
            if self.mode == "exact":
                e["value"] = v
            else:
                e["estimate"], e["half_width"] = v
            entries.append(e)
        return {
            "indices": list(self.indices),
            "n_grid": list(self.n_grid),
            "thresholds": {str(k): v for k, v in sorted(self.thresholds.items())},
            "achieved": entries,
            "mode": self.mode,
            "seed": self.seed,
            "eps_floor": self.eps_floor,
            "search_cap": self.search_cap,
            "detail_steps": self.detail_steps,
            "corrector": self.corrector_ref,
            "sample_R": self.sample_R,
        }


def step_epsilon(n: int, eps_floor: float) -> float:
    raw = math.exp(-float(n) * n) if n * n < 700 else 0.0
    return max(raw, eps_floor)


def admissible_levels(n: int, n_grid) -> list:
    # N <= exp(n^2), enforced literally (step 1 admits only N <= e)
    return [N for N in n_grid if math.log(N) <= float(n) * n]


class _FastExact:
    """Per-model shortcuts for max_j |ip(j, candidate, N)| over predecessors.

    Exploits that for every hosted joint oracle the dependence on the
    predecessor j is monotone or absent, so the maximum is attained at a
    known predecessor; the recorded value is always a genuine inner product
    at that predecessor, re-verifiable by the direct routine.
    """

    def __init__(self, model, D):
        self.model = model
        self.D = D
        self.kind = ("latent" if isinstance(model, LatentShiftModel) else
                     "independent" if _is_independent(model) else
                     "tailvan" if isinstance(model, TailVanishingModel) else
                     "generic")
        self._max_centered: dict = {}   # N -> (max |mu_j - d|, j_step)

    def note_accept(self, step: int, index: int, all_levels) -> None:
        if self.kind != "independent":
            return
        for N in all_levels:
            d = _constant_value(self.D, int(N))
            v = abs(self.model.marginal_dist(index).trunc_moment(float(N), 1) - d)
            cur = self._max_centered.get(N)
            if cur is None or v > cur[0]:
                self._max_centered[N] = (v, step)

    def max_over_predecessors(self, pred_indices, pred_steps, k, N):
        """Returns (value, j_step) with |value| = max over predecessors."""
        if self.kind == "independent":
            # every accepted index has been noted for every grid level
            jstar = self._max_centered[N][1]
            idx = pred_indices[pred_steps.index(jstar)]
            return exact_centered_inner_product(self.model, idx, k, N, self.D), jstar
        if self.kind == "latent":
            st = pred_steps[-1]
            idx = pred_indices[-1]
            return exact_centered_inner_product(self.model, idx, k, N, self.D), st
        if self.kind == "tailvan":
            # mu_j is monotone in j, so the extremes are at the first and
            # last predecessor
            best = None
            for pos in (0, len(pred_indices) - 1):
                v = exact_centered_inner_product(
                    self.model, pred_indices[pos], k, N, self.D)
                if best is None or abs(v) > abs(best[0]):
                    best = (v, pred_steps[pos])
            return best
        best = None
        for idx, st in zip(pred_indices, pred_steps):
            v = exact_centered_inner_product(self.model, idx, k, N, self.D)
            if best is None or abs(v) > abs(best[0]):
                best = (v, st)
        return best


def greedy_extract(model: SequenceModel, target_length: int, n_grid,
                   D: CorrectorSeries, mode: str = "exact",
                   eps_floor: float | None = None,
                   search_cap: int | None = None, seed: int = 0,
                   R: int = 400, detail_steps: int = 16,
                   min_index: int = 1) -> ExtractionPlan:
    """``min_index`` restricts the candidate pool to indices >= min_index;
    the zero-corrector route starts the search deep enough along the
    sequence that the truncated energies have already decayed."""
    if target_length < 1:
        raise ValueError("target_length must be >= 1")
    n_grid = tuple(sorted(int(N) for N in n_grid))
    if eps_floor is None:
        eps_floor = 0.0 if mode == "exact" else 1e-2
    if search_cap is None:
        search_cap = min(model.index_cap,
                         min_index - 1 + target_length + 2 * max(n_grid) + 64)
    if search_cap > model.index_cap:
        raise ValueError("search_cap exceeds the model's index_cap")

    bank = _SampleBank(model, search_cap, R, seed) if mode == "sample" else None
    fast = _FastExact(model, D) if mode == "exact" else None

    indices: list[int] = []
    thresholds: dict[int, float] = {}
    achieved: dict = {}

    for step in range(1, target_length + 1):
        eps = step_epsilon(step, eps_floor)
        thresholds[step] = eps
        levels = admissible_levels(step, n_grid)
        start = max(int(min_index), (indices[-1] + 1) if indices else 1)
        best_candidate, best_violation = None, math.inf
        chosen = None
        for k in range(start, search_cap + 1):
            worst = 0.0
            records = {}
            feasible = True
            pred_steps = list(range(1, step))
            for N in levels:
                if not indices:
                    break
                if mode == "exact":
                    val, jstar = fast.max_over_predecessors(
                        indices, pred_steps, k, N)
                    amount = abs(val)
                    records[(jstar, step, N)] = val
                else:
                    amount = 0.0
                    for jstep, jidx in zip(pred_steps, indices):
                        est, hw = bank.estimate(jidx, k, N, D)
                        records[(jstep, step, N)] = (est, hw)
                        amount = max(amount, abs(est) + hw)
                worst = max(worst, amount)
                if amount > eps:
                    feasible = False
                    break
            if feasible:
                chosen = k
                if mode == "exact" and step <= detail_steps and indices:
                    for N in levels:
                        for jstep, jidx in zip(pred_steps, indices):
                            records[(jstep, step, N)] = \
                                exact_centered_inner_product(model, jidx, k, N, D)
                achieved.update(records)
                break
            if worst < best_violation:
                best_violation, best_candidate = worst, k
        if chosen is None:
            raise ExtractionFailure(step, eps, search_cap,
                                    best_candidate, best_violation)
        indices.append(chosen)
        if fast is not None:
            fast.note_accept(step, chosen, n_grid)

    return ExtractionPlan(tuple(indices), n_grid, thresholds, achieved,
                          mode, int(seed), float(eps_floor), int(search_cap),
                          int(detail_steps), D.provenance,
                          R if mode == "sample" else 0)


def verify_plan(plan: ExtractionPlan, model: SequenceModel,
                D: CorrectorSeries) -> dict:
    """Recompute every stored inner product from scratch and check the
    recorded constraints; the direct routine, not the search shortcuts."""
    bank = None
    if plan.mode == "sample":
        bank = _SampleBank(model, plan.search_cap, plan.sample_R, plan.seed)
    max_diff = 0.0
    violations = []
    for (jstep, nstep, N), stored in plan.achieved.items():
        jidx = plan.indices[jstep - 1]
        kidx = plan.indices[nstep - 1]
        eps = plan.thresholds[nstep]
        if plan.mode == "exact":
            fresh = exact_centered_inner_product(model, jidx, kidx, N, D)
            max_diff = max(max_diff, abs(fresh - stored))
            if abs(stored) > eps:
                violations.append((jstep, nstep, N))
        else:
            est, hw = bank.estimate(jidx, kidx, N, D)
            max_diff = max(max_diff, abs(est - stored[0]))
            if abs(stored[0]) + stored[1] > eps:
                violations.append((jstep, nstep, N))
    return {"checked": len(plan.achieved), "max_abs_diff": max_diff,
            "violations": violations, "ok": not violations}


def check_plan_subsequence(plan: ExtractionPlan, keep_steps) -> dict:
    """Hereditary closure at the plan level: the retained steps, checked
    against the ORIGINAL step thresholds, still satisfy every recorded
    constraint involving only retained steps."""
    keep = set(keep_steps)
    checked = 0
    violations = []
    for (jstep, nstep, N), stored in plan.achieved.items():
        if jstep not in keep or nstep not in keep:
            continue
        checked += 1
        amount = abs(stored) if plan.mode == "exact" else abs(stored[0]) + stored[1]
        if amount > plan.thresholds[nstep]:
            violations.append((jstep, nstep, N))
    return {"checked": checked, "violations": violations, "ok": not violations}


# -------------------------------------------------------------------------
# proof-side bookkeeping: cross products and sums of squares
# -------------------------------------------------------------------------

@dataclass
class CrossProductBudget:
    N: int
    head_sum: float
    tail_sum: float
    total: float
    head_bound: float
    tail_bound: float
    ok: bool


def _sigma_sup(model, indices, N: float) -> float:
    return max(model.marginal_dist(int(i)).trunc_moment(N, 2) / N
               for i in indices)


def cross_product_budget(plan: ExtractionPlan, model: SequenceModel,
                         D: CorrectorSeries, N: int,
                         tolerance: float = 1e-9) -> CrossProductBudget:
    if len(plan.indices) < N:
        raise ValueError("plan shorter than the requested level")
    split = math.sqrt(math.log(N))
    head = tail = 0.0
    for n in range(2, N + 1):
        for j in range(1, n):
            v = abs(exact_centered_inner_product(
                model, plan.indices[j - 1], plan.indices[n - 1], float(N), D))
            if n <= split:
                head += 2.0 * v
            else:
                tail += 2.0 * v
    sig = _sigma_sup(model, plan.indices[:N], float(N))
    head_bound = N * sig * math.log(N) * (1.0 + tolerance) + tolerance
    tail_bound = sum(2.0 * (n - 1) * step_epsilon(n, plan.eps_floor)
                     for n in range(2, N + 1) if n > split) + tolerance
    total = head + tail
    ok = head <= head_bound and tail <= tail_bound
    return CrossProductBudget(N, head, tail, total, head_bound, tail_bound, ok)


@dataclass
class SumOfSquaresCheck:
    N: int
    lhs: float
    split_bound: float       # 2 sum E(f^t)^2 + 2 N E(D^2)
    sigma_bound: float       # 4 N^2 sigma_sup(N)
    corrector_second_moment: float
    corrector_moment_bound: float  # N * sigma_sup(N)
    ok: bool


def sum_of_squares_check(model: SequenceModel, D: CorrectorSeries, N: int,
                         index_window, tol: float = 1e-9) -> SumOfSquaresCheck:
    window = [int(i) for i in index_window]
    lhs = math.fsum(
        exact_centered_inner_product(model, i, i, float(N), D) for i in window)
    sum_sq = math.fsum(model.marginal_dist(i).trunc_moment(float(N), 2)
                       for i in window)
    factor_probs = None
    if isinstance(model, LatentShiftModel):
        factor_probs = dict(model.factor_dist.atoms)
    d2 = D.second_moment(N, factor_probs) if D.kind == "conditional" \
        else D.second_moment(N)
    sig = _sigma_sup(model, window, float(N))
    split_bound = 2.0 * sum_sq + 2.0 * N * d2
    sigma_bound = 4.0 * N * N * sig
    ok = (lhs <= split_bound + tol and lhs <= sigma_bound + tol
          and d2 <= N * sig + tol)
    return SumOfSquaresCheck(N, lhs, split_bound, sigma_bound, d2,
                             N * sig, ok)
