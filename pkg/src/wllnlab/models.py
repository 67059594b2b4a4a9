"""Sequence models: generative sampling plus exact marginal oracles.

A model describes the joint law of a random sequence f_1, f_2, ...  Five
kinds are supported:

* ``iid``               -- independent copies of one law
* ``independent_array`` -- independent with a per-index law
* ``tail_vanishing``    -- f_n = g * 1{|g| > n} for a single draw g
* ``example41``         -- heavy-tailed integer marginals with per-index
                           zero mass rho_n, coordinates either independent
                           or comonotone (driven by one shared uniform)
* ``latent_shift``      -- f_n = B + eta_n with B drawn once per path and
                           eta_n conditionally iid; the model whose natural
                           centering is a random variable, not a constant

Marginal tail probabilities and truncated moments are exact (closed form or
atom enumeration with a remainder below 1e-12), so every sampled estimate
in the package can be audited against an oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import (
    Distribution,
    FiniteDiscrete,
    HeavyLogLaw,
    Pareto1,
    UnsupportedOracleError,
    convolve,
)
from .streams import path_rng


class CapacityError(Exception):
    """Requested index exceeds the model's index_cap."""


@dataclass(frozen=True)
class SamplePath:
    seed: int
    replication: int
    values: np.ndarray
    factor_value: float | None = None


class SequenceModel:
    kind = "abstract"
    index_cap: int = 0

    def marginal_dist(self, n: int) -> Distribution:
        raise NotImplementedError

    def _check_index(self, n: int) -> None:
        if not 1 <= n <= self.index_cap:
            raise CapacityError(f"index {n} outside 1..{self.index_cap}")

    def _check_length(self, length: int) -> None:
        if length < 1:
            raise ValueError("length must be positive")
        if length > self.index_cap:
            raise CapacityError(f"length {length} exceeds index_cap {self.index_cap}")

    def sample_path(self, length: int, seed: int, replication: int = 0) -> SamplePath:
        raise NotImplementedError

    def sample_at(self, indices, seed: int, replication: int = 0) -> SamplePath:
        """Realize (f_{i})_{i in indices} for one path.

        The dependence structure (shared factor, shared uniform, single g)
        is honored exactly; coordinate-level noise is drawn by position
        within the request, so the same (seed, replication) pair always
        regenerates identical values for the same index set.
        """
        raise NotImplementedError

    def _checked_indices(self, indices) -> np.ndarray:
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size == 0:
            raise ValueError("empty index set")
        if idx.min() < 1 or np.any(np.diff(idx) <= 0):
            raise ValueError("indices must be strictly increasing and >= 1")
        if idx.max() > self.index_cap:
            raise CapacityError(
                f"indices outside 1..{self.index_cap}")
        return idx

    # index in n_range whose tail functional dominates pointwise, if the
    # family is pointwise ordered; None otherwise
    def pointwise_sup_index(self, n_range) -> int | None:
        return None

    # analytic facts for the condition checkers (all optional) ----------

    def tau_sup_envelope(self):
        return None

    def tau_sup_positive_limsup(self):
        return None

    def tau_limit_envelope(self):
        """Optional (description, fn) bounding lim_n tau_n(M) with fn -> 0."""
        return None

    def energy_liminf_witness(self, M: float, n_range):
        """Optional (description, indices) witnessing small truncated energy."""
        return None

    def to_spec(self) -> dict:
        raise NotImplementedError


# -------------------------------------------------------------------------


class IIDModel(SequenceModel):
    kind = "iid"

    def __init__(self, dist: Distribution, index_cap: int = 10**9):
        self.dist = dist
        self.index_cap = int(index_cap)

    def marginal_dist(self, n: int) -> Distribution:
        self._check_index(n)
        return self.dist

    def sample_path(self, length, seed, replication=0):
        self._check_length(length)
        rng = path_rng(seed, replication)
        return SamplePath(seed, replication, self.dist.sample(rng, length))

    def sample_at(self, indices, seed, replication=0):
        idx = self._checked_indices(indices)
        rng = path_rng(seed, replication)
        return SamplePath(seed, replication, self.dist.sample(rng, len(idx)))

    def pointwise_sup_index(self, n_range):
        return int(n_range[0])

    def tau_sup_envelope(self):
        return self.dist.tau_envelope()

    def tau_sup_positive_limsup(self):
        return self.dist.tau_positive_limsup()

    def tau_limit_envelope(self):
        # constant in n: the limit equals tau_1, so an envelope for tau_1
        # is an envelope for the limit
        return self.dist.tau_envelope()

    def to_spec(self):
        return {"kind": "iid", "params": {"dist": dist_to_spec(self.dist)},
                "index_cap": self.index_cap}


class IndependentArrayModel(SequenceModel):
    kind = "independent_array"

    def __init__(self, dists):
        self.dists = list(dists)
        if not self.dists:
            raise ValueError("need at least one coordinate law")
        self.index_cap = len(self.dists)

    def marginal_dist(self, n):
        self._check_index(n)
        return self.dists[n - 1]

    def sample_path(self, length, seed, replication=0):
        self._check_length(length)
        rng = path_rng(seed, replication)
        u = rng.random(length)
        vals = np.array([self.dists[i].quantile(u[i]) for i in range(length)])
        return SamplePath(seed, replication, vals)

    def sample_at(self, indices, seed, replication=0):
        idx = self._checked_indices(indices)
        rng = path_rng(seed, replication)
        u = rng.random(len(idx))
        vals = np.array([self.dists[i - 1].quantile(ui)
                         for i, ui in zip(idx, u)])
        return SamplePath(seed, replication, vals)

    def to_spec(self):
        return {"kind": "independent_array",
                "params": {"dists": [dist_to_spec(d) for d in self.dists]}}


class _TailRestricted(Distribution):
    """Law of G * 1{|G| > n}: the base law outside a central band, with the
    remaining mass collapsed onto zero."""

    def __init__(self, base: Distribution, n: int):
        self.base = base
        self.n = int(n)
        self.max_abs_value = base.max_abs_value

    def survival(self, t):
        return self.base.survival(max(float(t), float(self.n)))

    def trunc_moment(self, M, order):
        if M <= self.n:
            return 0.0
        return self.base.band_moment(float(self.n), float(M), order)

    def tau_integral(self, M):
        n = float(self.n)
        if M <= n:
            return self.base.survival(n) * M * M / 2.0
        head = self.base.survival(n) * n * n / 2.0
        return head + self.base.tau_integral(M) - self.base.tau_integral(n)

    def survival_breakpoints(self, M):
        pts = self.base.survival_breakpoints(M)
        if pts is None:
            return None
        return pts[pts > self.n]


class TailVanishingModel(SequenceModel):
    """f_n = g * 1{|g| > n} for one draw of g per path.

    Each marginal tail vanishes as n grows even when g itself is so heavy
    that sup_n of the tail functional stays bounded away from zero; the
    standard counterexample separating the sup-form and limit-form tail
    conditions.
    """

    kind = "tail_vanishing"

    def __init__(self, g_dist: Distribution, index_cap: int = 10**9):
        self.g_dist = g_dist
        self.index_cap = int(index_cap)

    def marginal_dist(self, n):
        self._check_index(n)
        return _TailRestricted(self.g_dist, n)

    def sample_path(self, length, seed, replication=0):
        self._check_length(length)
        rng = path_rng(seed, replication)
        g = float(self.g_dist.sample(rng, 1)[0])
        n = np.arange(1, length + 1)
        vals = np.where(np.abs(g) > n, g, 0.0)
        return SamplePath(seed, replication, vals, factor_value=g)

    def sample_at(self, indices, seed, replication=0):
        idx = self._checked_indices(indices)
        rng = path_rng(seed, replication)
        g = float(self.g_dist.sample(rng, 1)[0])
        vals = np.where(np.abs(g) > idx, g, 0.0)
        return SamplePath(seed, replication, vals, factor_value=g)

    def pointwise_sup_index(self, n_range):
        return int(min(n_range))

    def tau_sup_envelope(self):
        # sup over n of tau_n(M) equals the tau of g itself
        return self.g_dist.tau_envelope()

    def tau_sup_positive_limsup(self):
        return self.g_dist.tau_positive_limsup()

    def tau_limit_envelope(self):
        def env(M):
            return 0.0

        return ("lim_n tau_n(M) = M * P(|g| > n) -> 0 for every fixed M", env)

    def energy_liminf_witness(self, M, n_range):
        n0 = int(math.ceil(M))
        return (f"E(f_n^2 1{{|f_n|<=M}}) = 0 exactly for n >= {n0}",
                [n for n in n_range if n >= n0] or [n0])

    def to_spec(self):
        return {"kind": "tail_vanishing",
                "params": {"g": dist_to_spec(self.g_dist)},
                "index_cap": self.index_cap}


class Example41Model(SequenceModel):
    """Heavy-tailed integer marginals with zero mass rho_n per index.

    ``joint_law`` is "independent" (coordinates independent) or "comonotone"
    (every coordinate is the quantile transform of one shared uniform; the
    maximally dependent coupling).
    """

    kind = "example41"

    def __init__(self, rho, index_cap: int = 10**7,
                 joint_law: str = "independent", symmetric: bool = True,
                 rho_sup_is_one: bool | None = None, rho_spec=None):
        if joint_law not in ("independent", "comonotone"):
            raise ValueError(f"unknown joint_law {joint_law!r}")
        self._rho = rho  # callable index -> rho_n in (0, 1)
        self.joint_law = joint_law
        self.symmetric = bool(symmetric)
        self.index_cap = int(index_cap)
        self.rho_sup_is_one = rho_sup_is_one
        self._rho_spec = rho_spec
        self._rho_idx: np.ndarray | None = None
        self._rho_vals: np.ndarray | None = None

    def rho(self, n: int) -> float:
        return float(self._rho(n))

    def rho_values(self, idx: np.ndarray) -> np.ndarray:
        # probes reuse one index set across thousands of replications
        if self._rho_idx is None or not np.array_equal(self._rho_idx, idx):
            self._rho_idx = idx.copy()
            self._rho_vals = np.array([self._rho(int(n)) for n in idx])
        return self._rho_vals

    def rho_array(self, length: int) -> np.ndarray:
        return self.rho_values(np.arange(1, length + 1, dtype=np.int64))

    def marginal_dist(self, n):
        self._check_index(n)
        return HeavyLogLaw(self.rho(n), symmetric=self.symmetric)

    def _realize(self, rho: np.ndarray, rng) -> tuple[np.ndarray, float | None]:
        proto = HeavyLogLaw(0.0, symmetric=self.symmetric)
        if self.joint_law == "independent":
            u = rng.random(len(rho))
            factor = None
        else:
            shared = float(rng.random())
            u = np.full(len(rho), shared)
            factor = shared
        # map u through each coordinate's quantile; the conditional law
        # shared by all coordinates makes this a single table lookup
        vals = np.zeros(len(rho))
        nz = u >= rho
        if np.any(nz):
            v = (u[nz] - rho[nz]) / (1.0 - rho[nz])
            vals[nz] = proto.quantile_array(v)
        return vals, factor

    def sample_path(self, length, seed, replication=0):
        self._check_length(length)
        rng = path_rng(seed, replication)
        vals, factor = self._realize(self.rho_array(length), rng)
        return SamplePath(seed, replication, vals, factor_value=factor)

    def sample_at(self, indices, seed, replication=0):
        idx = self._checked_indices(indices)
        rng = path_rng(seed, replication)
        vals, factor = self._realize(self.rho_values(idx), rng)
        return SamplePath(seed, replication, vals, factor_value=factor)

    def pointwise_sup_index(self, n_range):
        rhos = [self.rho(n) for n in n_range]
        return int(n_range[int(np.argmin(rhos))])

    def tau_sup_envelope(self):
        from .distributions import example41_constant_c

        two_c = 2.0 * example41_constant_c()

        def env(M):
            return two_c / math.log(M) if M > 1 else float("inf")

        return ("M*P(|f_n|>M) <= 2c(1-rho_n)/log M <= 2c/log M for integer M >= 2",
                env)

    def tau_limit_envelope(self):
        if self.rho_sup_is_one:
            def env(M):
                return 0.0

            return ("liminf_n tau_n(M) = 0 since 1 - rho_n -> 0 along a "
                    "subsequence (sup_n rho_n = 1)", env)
        return None

    def energy_liminf_witness(self, M, n_range):
        if not self.rho_sup_is_one:
            return None
        ranked = sorted(n_range, key=lambda n: 1.0 - self.rho(n))
        return ("E(f_n^2 1{|f_n|<=M}) <= 2cM(1-rho_n)/log 2 -> 0 along "
                "indices with rho_n -> 1", ranked[: min(8, len(ranked))])

    def to_spec(self):
        return {"kind": "example41",
                "params": {"rho": self._rho_spec or {"family": "unspecified"},
                           "symmetric": self.symmetric},
                "joint_law": self.joint_law,
                "index_cap": self.index_cap}


class LatentShiftModel(SequenceModel):
    """f_n = B + eta_n: one latent factor B per path plus conditionally iid
    noise.  Conditionally on B the sequence is iid, so the natural centering
    at every level is a function of B, i.e. a genuinely random corrector.
    """

    kind = "latent_shift"

    def __init__(self, factor_dist: FiniteDiscrete, noise_dist: FiniteDiscrete,
                 index_cap: int = 10**9):
        self.factor_dist = factor_dist
        self.noise_dist = noise_dist
        self.index_cap = int(index_cap)
        self._marginal = convolve(factor_dist, noise_dist)

    def marginal_dist(self, n):
        self._check_index(n)
        return self._marginal

    def sample_path(self, length, seed, replication=0):
        self._check_length(length)
        rng = path_rng(seed, replication)
        b = float(self.factor_dist.sample(rng, 1)[0])
        eta = self.noise_dist.sample(rng, length)
        return SamplePath(seed, replication, b + eta, factor_value=b)

    def sample_at(self, indices, seed, replication=0):
        idx = self._checked_indices(indices)
        rng = path_rng(seed, replication)
        b = float(self.factor_dist.sample(rng, 1)[0])
        eta = self.noise_dist.sample(rng, len(idx))
        return SamplePath(seed, replication, b + eta, factor_value=b)

    def pointwise_sup_index(self, n_range):
        return int(n_range[0])

    def tau_sup_envelope(self):
        return self._marginal.tau_envelope()

    def tau_limit_envelope(self):
        return self._marginal.tau_envelope()

    def conditional_trunc_moment(self, b: float, N: float, order: int) -> float:
        """E((b + eta)^order 1{|b + eta| <= N})."""
        total = 0.0
        for e, p in self.noise_dist.atoms:
            v = b + e
            if abs(v) <= N:
                total += p * v ** order
        return total

    def to_spec(self):
        return {"kind": "latent_shift",
                "params": {"factor": dist_to_spec(self.factor_dist),
                           "noise": dist_to_spec(self.noise_dist)},
                "index_cap": self.index_cap}


# -------------------------------------------------------------------------
# module-level operations
# -------------------------------------------------------------------------

def sample_path(model: SequenceModel, length: int, seed: int,
                replication: int = 0) -> SamplePath:
    return model.sample_path(length, seed, replication)


def marginal_tail_prob(model: SequenceModel, n: int, M: float) -> float:
    if M <= 0:
        raise ValueError("M must be positive")
    return model.marginal_dist(n).survival(M)


def truncated_moment(model: SequenceModel, n: int, M: float, order: int) -> float:
    if M <= 0:
        raise ValueError("M must be positive")
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    return model.marginal_dist(n).trunc_moment(M, order)


def conditional_truncated_mean(model: SequenceModel, N: float):
    """Map from factor value to E(f 1{|f| <= N} | factor); constant map for
    iid models, where the factor is trivial."""
    if isinstance(model, LatentShiftModel):
        return {b: model.conditional_trunc_moment(b, N, 1)
                for b, _ in model.factor_dist.atoms}
    if isinstance(model, IIDModel):
        return {None: model.dist.trunc_moment(N, 1)}
    raise UnsupportedOracleError(
        f"model kind {model.kind!r} has no conditional-independence structure"
    )


# -------------------------------------------------------------------------
# JSON model specifications
# -------------------------------------------------------------------------

def dist_from_spec(spec: dict) -> Distribution:
    spec = dict(spec)
    family = spec.pop("family", None)
    if family == "finite":
        atoms = spec.pop("atoms")
        _reject_unknown(spec, "finite distribution")
        return FiniteDiscrete(atoms)
    if family == "pareto1":
        scale = spec.pop("scale", 1.0)
        _reject_unknown(spec, "pareto1 distribution")
        return Pareto1(scale)
    if family == "heavy_log":
        rho = spec.pop("rho")
        symmetric = spec.pop("symmetric", True)
        _reject_unknown(spec, "heavy_log distribution")
        return HeavyLogLaw(rho, symmetric=symmetric)
    raise ValueError(f"unknown distribution family {family!r}")


def dist_to_spec(dist: Distribution) -> dict:
    if isinstance(dist, FiniteDiscrete):
        return {"family": "finite", "atoms": [[v, p] for v, p in dist.atoms]}
    if isinstance(dist, Pareto1):
        return {"family": "pareto1", "scale": dist.scale}
    if isinstance(dist, HeavyLogLaw):
        return {"family": "heavy_log", "rho": dist.rho, "symmetric": dist.symmetric}
    raise ValueError(f"cannot serialize {type(dist).__name__}")


def _rho_from_spec(spec: dict):
    spec = dict(spec)
    family = spec.pop("family", None)
    if family == "constant":
        value = float(spec.pop("value"))
        _reject_unknown(spec, "rho spec")
        return (lambda n: value), False, {"family": "constant", "value": value}
    if family == "one-minus-one-over-log":
        _reject_unknown(spec, "rho spec")
        return (lambda n: 1.0 - 1.0 / math.log(n + 2)), True, {
            "family": "one-minus-one-over-log"}
    if family == "explicit":
        values = [float(v) for v in spec.pop("values")]
        _reject_unknown(spec, "rho spec")
        return (lambda n: values[n - 1]), None, {"family": "explicit",
                                                 "values": values}
    raise ValueError(f"unknown rho family {family!r}")


def _reject_unknown(leftover: dict, where: str) -> None:
    if leftover:
        raise ValueError(f"unknown fields in {where}: {sorted(leftover)}")


def model_from_spec(spec: dict) -> SequenceModel:
    spec = dict(spec)
    kind = spec.pop("kind", None)
    params = dict(spec.pop("params", {}))
    index_cap = spec.pop("index_cap", None)
    joint_law = spec.pop("joint_law", None)
    _reject_unknown(spec, "model spec")

    if kind == "iid":
        dist = dist_from_spec(params.pop("dist"))
        _reject_unknown(params, "iid params")
        return IIDModel(dist, index_cap or 10**9)
    if kind == "independent_array":
        dists = [dist_from_spec(d) for d in params.pop("dists")]
        _reject_unknown(params, "independent_array params")
        return IndependentArrayModel(dists)
    if kind == "tail_vanishing":
        g = dist_from_spec(params.pop("g"))
        _reject_unknown(params, "tail_vanishing params")
        return TailVanishingModel(g, index_cap or 10**9)
    if kind == "example41":
        rho_fn, sup_one, rho_spec = _rho_from_spec(params.pop("rho"))
        symmetric = params.pop("symmetric", True)
        _reject_unknown(params, "example41 params")
        return Example41Model(rho_fn, index_cap or 10**7,
                              joint_law or "independent", symmetric,
                              rho_sup_is_one=sup_one, rho_spec=rho_spec)
    if kind == "latent_shift":
        factor = dist_from_spec(params.pop("factor"))
        noise = dist_from_spec(params.pop("noise"))
        _reject_unknown(params, "latent_shift params")
        if not isinstance(factor, FiniteDiscrete) or not isinstance(noise, FiniteDiscrete):
            raise ValueError("latent_shift requires finite factor and noise laws")
        return LatentShiftModel(factor, noise, index_cap or 10**9)
    raise ValueError(f"unknown model kind {kind!r}")
