"""One-dimensional laws with exact tail-probability and truncated-moment oracles.

Every distribution here answers three queries exactly (to ~1e-12 absolute):

* ``survival(t)``       -- P(|X| > t)
* ``trunc_moment(M, r)`` -- E(X^r 1{|X| <= M}) for r in {1, 2}
* ``tau_integral(M)``    -- integral_0^M t * P(|X| > t) dt

The last one is what makes the Feller relation between the normalized
truncated second moment and the tail functional checkable to 1e-9 without
any step-size dependence: for step-function survivals the integrand is
piecewise linear, so the integral is a finite sum of trapezoid pieces;
for the inverse-law tail it has a closed form.
"""

from __future__ import annotations

import math
from bisect import bisect_right

import numpy as np
from scipy.special import exp1


class UnsupportedOracleError(Exception):
    """The requested exact computation is not available for this law."""


class Distribution:
    """Base class; subclasses provide exact oracles and inverse-CDF sampling."""

    #: largest |value| carrying mass, or None for unbounded support
    max_abs_value: float | None = None

    def survival(self, t: float) -> float:
        raise NotImplementedError

    def trunc_moment(self, M: float, order: int) -> float:
        raise NotImplementedError

    def band_moment(self, a: float, b: float, order: int) -> float:
        """E(X^order 1{a < |X| <= b})."""
        if b <= a:
            return 0.0
        return self.trunc_moment(b, order) - self.trunc_moment(a, order)

    def tau_integral(self, M: float) -> float:
        raise NotImplementedError

    def quantile_array(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def quantile(self, u: float) -> float:
        return float(self.quantile_array(np.asarray([u]))[0])

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.quantile_array(rng.random(size))

    # breakpoints of the survival step function on [0, M]; None means the
    # survival is not a step function (continuous laws)
    def survival_breakpoints(self, M: float) -> np.ndarray | None:
        return None

    # optional analytic facts consumed by the condition checkers ---------

    def tau_envelope(self):
        """Optional (description, fn) with M*survival(M) <= fn(M), fn -> 0."""
        return None

    def tau_positive_limsup(self):
        """Optional (description, value) with limsup_M M*survival(M) >= value > 0."""
        return None


class FiniteDiscrete(Distribution):
    """Finitely many atoms (value, probability); probabilities sum to one."""

    def __init__(self, atoms):
        atoms = [(float(v), float(p)) for v, p in atoms if p != 0.0]
        if not atoms:
            raise ValueError("need at least one atom with positive mass")
        for _, p in atoms:
            if p < 0.0:
                raise ValueError("negative probability")
        total = math.fsum(p for _, p in atoms)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        # canonical order: increasing |value|, negative sign first on ties
        atoms.sort(key=lambda vp: (abs(vp[0]), vp[0]))
        self.atoms = tuple(atoms)
        self._values = np.array([v for v, _ in self.atoms])
        self._probs = np.array([p for _, p in self.atoms])
        self._cum = np.cumsum(self._probs)
        self._cum[-1] = 1.0
        # aggregate mass per distinct |value|
        self._abs_vals = np.unique(np.abs(self._values))
        mass = np.zeros_like(self._abs_vals)
        idx = np.searchsorted(self._abs_vals, np.abs(self._values))
        np.add.at(mass, idx, self._probs)
        self._abs_mass = mass
        # survival just beyond each |value|: P(|X| > abs_vals[i])
        tail = np.concatenate([np.cumsum(mass[::-1])[::-1][1:], [0.0]])
        self._abs_tail = tail
        self.max_abs_value = float(self._abs_vals[-1])

    def survival(self, t: float) -> float:
        if t < 0:
            return 1.0
        i = np.searchsorted(self._abs_vals, t, side="right")
        if i == 0:
            return 1.0
        return float(self._abs_tail[i - 1])

    def trunc_moment(self, M: float, order: int) -> float:
        keep = np.abs(self._values) <= M
        return float(math.fsum(self._probs[keep] * self._values[keep] ** order))

    def tau_integral(self, M: float) -> float:
        if M <= 0:
            return 0.0
        pts = [0.0] + [float(a) for a in self._abs_vals if a < M] + [M]
        total = 0.0
        for lo, hi in zip(pts[:-1], pts[1:]):
            total += self.survival(lo) * (hi * hi - lo * lo) / 2.0
        return total

    def survival_breakpoints(self, M: float) -> np.ndarray:
        return self._abs_vals[self._abs_vals < M]

    def quantile_array(self, u: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self._cum, u, side="right")
        idx = np.clip(idx, 0, len(self._values) - 1)
        return self._values[idx]

    def tau_envelope(self):
        b = self.max_abs_value

        def env(M):
            return 0.0 if M >= b else M

        return (f"bounded support |X| <= {b:g}: tau(M) = 0 for M >= {b:g}", env)


class Pareto1(Distribution):
    """Positive law with P(X > t) = min(1, scale/t): the inverse-law tail.

    Supported on [scale, oo); the canonical heavy tail with
    M * P(X > M) = scale for every M >= scale, so the weak-L1 condition
    fails for it by a constant margin.
    """

    def __init__(self, scale: float = 1.0):
        if scale <= 0:
            raise ValueError("scale must be positive")
        self.scale = float(scale)
        self.max_abs_value = None

    def survival(self, t: float) -> float:
        if t <= self.scale:
            return 1.0
        return self.scale / t

    def trunc_moment(self, M: float, order: int) -> float:
        s = self.scale
        if M < s:
            return 0.0
        if order == 1:
            return s * math.log(M / s)
        if order == 2:
            return s * (M - s)
        raise UnsupportedOracleError(f"order {order}")

    def tau_integral(self, M: float) -> float:
        s = self.scale
        if M <= s:
            return M * M / 2.0
        return s * s / 2.0 + s * (M - s)

    def quantile_array(self, u: np.ndarray) -> np.ndarray:
        return self.scale / (1.0 - u)

    def tau_positive_limsup(self):
        return (
            f"M * P(X > M) = {self.scale:g} for every M >= {self.scale:g}",
            self.scale,
        )


# --------------------------------------------------------------------------
# The heavy-tailed integer law P(|X| = k) proportional to 1/(k^2 log k)
# --------------------------------------------------------------------------

def _h(k: float) -> float:
    return 1.0 / (k * k * math.log(k))


def _h_prime(k: float) -> float:
    lg = math.log(k)
    return -(2.0 / lg + 1.0 / (lg * lg)) / (k ** 3)


_EM_CUTOFF = 50_000


def _series_total() -> float:
    """sum_{k>=2} 1/(k^2 log k), via direct summation plus an
    Euler-Maclaurin tail anchored at the exponential integral
    int_K^oo dx/(x^2 log x) = E1(log K)."""
    head = math.fsum(_h(k) for k in range(2, _EM_CUTOFF))
    K = float(_EM_CUTOFF)
    tail = exp1(math.log(K)) + _h(K) / 2.0 - _h_prime(K) / 12.0
    return head + float(tail)


_SERIES_TOTAL = _series_total()

# prefix caches over k = 2..n for h(k), 1/(k log k), 1/log k
_prefix_cache: dict[str, np.ndarray] = {}
_prefix_upto = 0


def _ensure_prefixes(upto: int) -> None:
    global _prefix_upto
    if upto <= _prefix_upto:
        return
    upto = max(upto, 4096, 2 * _prefix_upto)
    k = np.arange(2, upto + 1, dtype=float)
    lg = np.log(k)
    _prefix_cache["h"] = np.cumsum(1.0 / (k * k * lg))
    _prefix_cache["inv_klogk"] = np.cumsum(1.0 / (k * lg))
    _prefix_cache["inv_logk"] = np.cumsum(1.0 / lg)
    _prefix_upto = upto


def _prefix(name: str, m: int) -> float:
    """sum over 2 <= k <= m of the named term."""
    if m < 2:
        return 0.0
    _ensure_prefixes(m)
    return float(_prefix_cache[name][m - 2])


def _series_tail(m: float) -> float:
    """sum_{k > m} 1/(k^2 log k) for real m >= 0."""
    m_int = int(math.floor(m))
    if m_int < 2:
        return _SERIES_TOTAL
    return _SERIES_TOTAL - _prefix("h", m_int)


def example41_constant_c() -> float:
    """Normalizer c with 2c * sum_{k>=2} 1/(k^2 log k) = 1."""
    return 0.5 / _SERIES_TOTAL


def heavy_series_partial(m: int) -> float:
    """sum_{k=2..m} 1/(k^2 log k); exposed for oracle cross-checks."""
    return _prefix("h", m)


# inverse-CDF table for the law conditioned on being nonzero; the
# conditional law does not depend on the zero-mass parameter, so one table
# serves every marginal in the family
_TABLE_K = 1 << 19
_table_cache: dict[bool, tuple[np.ndarray, np.ndarray]] = {}


def _cond_table(symmetric: bool) -> tuple[np.ndarray, np.ndarray]:
    if symmetric not in _table_cache:
        c = example41_constant_c()
        k = np.arange(2, _TABLE_K + 1, dtype=float)
        q = 2.0 * c / (k * k * np.log(k))  # conditional P(|X| = k)
        if symmetric:
            vals = np.empty(2 * len(k))
            vals[0::2] = k
            vals[1::2] = -k
            masses = np.repeat(q / 2.0, 2)
        else:
            vals = k
            masses = q
        cum = np.cumsum(masses)
        _table_cache[symmetric] = (vals, cum)
    return _table_cache[symmetric]


class HeavyLogLaw(Distribution):
    """Integer law with a point mass at zero and polynomial-log tails:

    P(X = 0) = rho, and for k = 2, 3, ...
      symmetric:  P(X = +k) = P(X = -k) = (1 - rho) * c / (k^2 log k)
      one-sided:  P(X = +k) = (1 - rho) * 2c / (k^2 log k)

    with 2c = (sum_{k>=2} k^-2 / log k)^-1, so total mass is exactly one.
    The tail functional satisfies M * P(|X| > M) <= 2c (1 - rho) / log M
    for integer M >= 2.
    """

    def __init__(self, rho: float, symmetric: bool = True):
        if not 0.0 <= rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        self.rho = float(rho)
        self.symmetric = bool(symmetric)
        self.max_abs_value = None

    @property
    def _scale(self) -> float:
        # (1 - rho) * 2c
        return (1.0 - self.rho) * 2.0 * example41_constant_c()

    def survival(self, t: float) -> float:
        if t < 0:
            return 1.0
        return self._scale * _series_tail(t)

    def trunc_moment(self, M: float, order: int) -> float:
        m = int(math.floor(M))
        if m < 2:
            return 0.0
        if order == 2:
            return self._scale * _prefix("inv_logk", m)
        if order == 1:
            if self.symmetric:
                return 0.0
            return self._scale * _prefix("inv_klogk", m)
        raise UnsupportedOracleError(f"order {order}")

    def tau_integral(self, M: float) -> float:
        if M <= 0:
            return 0.0
        top = int(math.floor(M))
        pts = [0.0] + [float(k) for k in range(2, top + 1) if k < M] + [M]
        total = 0.0
        for lo, hi in zip(pts[:-1], pts[1:]):
            total += self.survival(lo) * (hi * hi - lo * lo) / 2.0
        return total

    def survival_breakpoints(self, M: float) -> np.ndarray:
        return np.arange(2.0, M, 1.0) if M > 2 else np.empty(0)

    def quantile_array(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        nz = u >= self.rho
        if self.rho < 1.0 and np.any(nz):
            v = (u[nz] - self.rho) / (1.0 - self.rho)
            vals, cum = _cond_table(self.symmetric)
            idx = np.searchsorted(cum, v, side="right")
            over = idx >= len(vals)
            picked = np.where(over, 0.0, vals[np.minimum(idx, len(vals) - 1)])
            if np.any(over):
                picked = picked.copy()
                for pos in np.nonzero(over)[0]:
                    picked[pos] = self._quantile_beyond_table(v[pos])
            out[nz] = picked
        return out

    def _quantile_beyond_table(self, v: float) -> float:
        c = example41_constant_c()
        vals, cum = _cond_table(self.symmetric)
        acc = float(cum[-1])
        k = _TABLE_K + 1
        while True:
            q = 2.0 * c * _h(k)
            if self.symmetric:
                if v < acc + q / 2.0:
                    return float(k)
                if v < acc + q:
                    return float(-k)
            else:
                if v < acc + q:
                    return float(k)
            acc += q
            k += 1
            if k > _TABLE_K + 10_000_000:  # pragma: no cover - u astronomically close to 1
                return float(k)

    def tau_envelope(self):
        s = self._scale

        def env(M):
            return s / math.log(M) if M > 1 else float("inf")

        return (
            f"M*P(|X|>M) <= {s:.6g}/log M  (= 2c(1-rho)/log M) for integer M >= 2",
            env,
        )


def convolve(a: FiniteDiscrete, b: FiniteDiscrete) -> FiniteDiscrete:
    """Law of A + B for independent finite discrete A, B."""
    acc: dict[float, float] = {}
    for va, pa in a.atoms:
        for vb, pb in b.atoms:
            v = va + vb
            acc[v] = acc.get(v, 0.0) + pa * pb
    return FiniteDiscrete(sorted(acc.items()))
