"""Centering sequences ("correctors") for the truncated sample averages.

A corrector series assigns to each level N a centering value D_N with
|D_N| <= N in every realization.  Three kinds exist:

* ``constant``    -- one real number per level (classical formulas)
* ``conditional`` -- a map from the latent factor value to a real, for
                     conditionally-iid models where the natural centering
                     is itself random
* ``estimated``   -- a sample-based Cesaro surrogate with an uncertainty
                     half-width, fitted on a pilot prefix so the verifier
                     never scores the corrector on its own fitting data
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import Distribution, UnsupportedOracleError
from .models import (
    Example41Model,
    IIDModel,
    IndependentArrayModel,
    LatentShiftModel,
    SamplePath,
    SequenceModel,
    TailVanishingModel,
)


@dataclass
class CorrectorSeries:
    n_grid: tuple
    kind: str  # "constant" | "conditional" | "estimated"
    values: dict  # N -> float, or N -> {factor_value: float}
    provenance: str
    uncertainty: dict | None = None

    def __post_init__(self):
        self.n_grid = tuple(int(N) for N in self.n_grid)
        for N in self.n_grid:
            if self.kind == "conditional":
                worst = max(abs(v) for v in self.values[N].values())
            else:
                worst = abs(self.values[N])
            if worst > N:
                raise ValueError(f"corrector magnitude {worst} exceeds level {N}")

    def value(self, N: int, factor: float | None = None) -> float:
        if self.kind != "conditional":
            return float(self.values[N])
        if factor is None:
            raise ValueError("conditional corrector needs the factor value")
        table = self.values[N]
        if factor in table:
            return float(table[factor])
        # factor realizations are exact atoms; tolerate float round-off
        best = min(table, key=lambda b: abs(b - factor))
        if abs(best - factor) > 1e-9:
            raise KeyError(f"factor {factor} not in corrector table")
        return float(table[best])

    def second_moment(self, N: int, factor_probs: dict | None = None) -> float:
        """E(D_N^2); conditional kind averages over the factor law."""
        if self.kind != "conditional":
            return float(self.values[N]) ** 2
        if factor_probs is None:
            raise ValueError("conditional corrector needs the factor law")
        return math.fsum(p * self.values[N][b] ** 2
                         for b, p in factor_probs.items())

    def is_zero(self) -> bool:
        if self.kind == "conditional":
            return all(v == 0.0 for N in self.n_grid
                       for v in self.values[N].values())
        return all(self.values[N] == 0.0 for N in self.n_grid)

    def to_json(self) -> dict:
        out = {"kind": self.kind, "provenance": self.provenance, "series": []}
        for N in self.n_grid:
            entry: dict = {"N": N}
            if self.kind == "conditional":
                entry["table"] = [[b, v] for b, v in sorted(self.values[N].items())]
            else:
                entry["value"] = self.values[N]
            if self.uncertainty is not None:
                entry["uncertainty"] = self.uncertainty[N]
            out["series"].append(entry)
        return out


def zero_corrector(n_grid, provenance: str = "zero") -> CorrectorSeries:
    return CorrectorSeries(tuple(n_grid), "constant",
                           {int(N): 0.0 for N in n_grid}, provenance)


def corrector_iid(dist: Distribution, n_grid) -> CorrectorSeries:
    """D_N = E(f 1{|f| <= N}) for identically distributed coordinates."""
    values = {int(N): dist.trunc_moment(float(N), 1) for N in n_grid}
    return CorrectorSeries(tuple(n_grid), "constant", values, "iid-truncated-mean")


def corrector_independent(model: SequenceModel, n_grid,
                          indices=None) -> CorrectorSeries:
    """D_N = (1/N) sum_{n<=N} E(f_{k_n} 1{|f_{k_n}| <= N}) for independent
    coordinates; ``indices`` defaults to 1, 2, ..., N."""
    values = {}
    for N in n_grid:
        N = int(N)
        ks = list(indices[:N]) if indices is not None else range(1, N + 1)
        values[N] = math.fsum(
            model.marginal_dist(int(k)).trunc_moment(float(N), 1) for k in ks
        ) / N
    return CorrectorSeries(tuple(n_grid), "constant", values,
                           "independent-average-truncated-mean")


def corrector_weak_l2(model: SequenceModel, n_grid) -> CorrectorSeries:
    """Exact weak-L2 limits of the truncated coordinates, where the model
    structure pins them down."""
    n_grid = tuple(int(N) for N in n_grid)
    if isinstance(model, IIDModel):
        series = corrector_iid(model.dist, n_grid)
        series.provenance = "weak-l2/iid"
        return series
    if isinstance(model, TailVanishingModel):
        # truncated moments vanish once the index passes the level, so the
        # weak limit is zero at every level
        return zero_corrector(n_grid, "weak-l2/tail-vanishing")
    if isinstance(model, Example41Model):
        if model.symmetric:
            return zero_corrector(n_grid, "weak-l2/symmetric-marginals")
        raise UnsupportedOracleError(
            "one-sided heavy-log marginals have no model-pinned weak-L2 limit")
    if isinstance(model, LatentShiftModel):
        values = {
            N: {b: model.conditional_trunc_moment(b, float(N), 1)
                for b, _ in model.factor_dist.atoms}
            for N in n_grid
        }
        return CorrectorSeries(n_grid, "conditional", values,
                               "weak-l2/conditional-truncated-mean "
                               "(test family: bounded functions of the factor)")
    if isinstance(model, IndependentArrayModel):
        values = {}
        for N in n_grid:
            means = [model.marginal_dist(n).trunc_moment(float(N), 1)
                     for n in range(1, model.index_cap + 1)]
            tail = means[len(means) // 2:]
            if max(tail) - min(tail) > 1e-9:
                raise UnsupportedOracleError(
                    "truncated means do not stabilize over the array")
            values[N] = tail[-1]
        return CorrectorSeries(n_grid, "constant", values,
                               "weak-l2/stabilized-truncated-mean")
    raise UnsupportedOracleError(
        f"model kind {model.kind!r} unsupported for weak-L2 correctors")


def corrector_cesaro_estimate(path_family, n_grid,
                              pilot_fraction: float = 0.2) -> CorrectorSeries:
    """Finite-sample surrogate: per path, average the truncated values over
    the pilot prefix; aggregate across paths.  Heuristic by construction and
    labeled as such in the provenance."""
    paths = list(path_family)
    if len(paths) < 2:
        raise ValueError("need at least two paths")
    if not 0.0 < pilot_fraction < 1.0:
        raise ValueError("pilot_fraction must lie in (0, 1)")
    n_grid = tuple(int(N) for N in n_grid)
    values, spread = {}, {}
    for N in n_grid:
        per_path = []
        for p in paths:
            pilot_len = int(pilot_fraction * len(p.values))
            if pilot_len < 1:
                raise ValueError("pilot prefix is empty")
            pilot = p.values[:pilot_len]
            trunc = np.where(np.abs(pilot) <= N, pilot, 0.0)
            per_path.append(float(np.mean(trunc)))
        est = float(np.clip(np.mean(per_path), -N, N))
        values[N] = est
        spread[N] = float(np.std(per_path, ddof=1))
    return CorrectorSeries(n_grid, "estimated", values,
                           f"cesaro-estimate(pilot={pilot_fraction}, "
                           f"paths={len(paths)}) [heuristic]", spread)
