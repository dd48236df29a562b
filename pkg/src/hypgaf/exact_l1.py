"""Exact law of the zero count in the determinantal case L = 1.

The number of zeros of the L = 1 series in |z| <= r is distributed as a
sum of independent Bernoulli variables X_k with success probabilities
p_k = r^(2k), k >= 1 (a determinantal point process fact).  Hence

    mean      mu_r   = sum_k r^(2k)            = r^2 / (1 - r^2)
    variance  v_1(r) = sum_k r^(2k)(1 - r^(2k)) = r^2 / (1 - r^4)

Truncating at K Bernoullis costs at most tv = r^(2(K+1)) / (1 - r^2) in
total variation (union bound over the omitted variables).  The pmf is an
exact dynamic-programming convolution; deep-tail queries run in the log
domain, where probabilities far below 1e-300 remain representable.

The centered log-MGF sum_k [log(1 + p_k (e^s - 1)) - p_k s] and its
deviation scaling eps_r * Lambda_r(lambda / eps_r) with
eps_r = v_1(r)^-(2 alpha - 1) feed the rate-function checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PoissonBinomialModel",
    "Pmf",
    "ResourceLimitError",
    "NumericRangeError",
    "build_model",
    "truncated_model",
    "pmf",
    "log_pmf",
    "tail_exact",
    "sample_count",
    "log_mgf_centered",
    "scaled_log_mgf",
]

K_HARD_CAP = 10**8
K_PMF_CAP = 10**6


class ResourceLimitError(RuntimeError):
    """Truncation index or pmf length exceeds a configured cap."""


class NumericRangeError(ArithmeticError):
    """A log-MGF evaluation left the representable range."""


@dataclass(frozen=True)
class PoissonBinomialModel:
    """Bernoulli sum with p_k = r^(2k), k = 1..K, plus its TV truncation bound."""

    r: float
    probs: np.ndarray
    K: int
    tv_bound: float

    def __post_init__(self):
        if not (0.0 < self.r < 1.0):
            raise ValueError(f"r must lie in (0, 1), got {self.r!r}")
        if len(self.probs) != self.K:
            raise ValueError("probs length must equal K")
        if self.K and np.any(np.diff(self.probs) >= 0.0):
            raise ValueError("success probabilities must be strictly decreasing")

    @property
    def mean(self) -> float:
        return float(self.probs.sum())

    @property
    def variance(self) -> float:
        return float((self.probs * (1.0 - self.probs)).sum())


@dataclass(frozen=True)
class Pmf:
    """Probabilities of counts 0..K for the truncated model."""

    values: np.ndarray
    tv_bound: float

    def __post_init__(self):
        if np.any(self.values < 0.0):
            raise ValueError("pmf entries must be nonnegative")
        total = float(self.values.sum())
        if not (1.0 - 1e-12 <= total <= 1.0 + 1e-12):
            raise ValueError(f"pmf must sum to 1 within 1e-12, got {total!r}")


def truncated_model(r: float, K: int) -> PoissonBinomialModel:
    """Model truncated at an explicit index K."""
    if K > K_HARD_CAP:
        raise ResourceLimitError(f"truncation index {K} exceeds cap {K_HARD_CAP}")
    k = np.arange(1, K + 1, dtype=np.float64)
    probs = np.exp(2.0 * k * math.log(r)) if K else np.empty(0)
    tv = r ** (2 * (K + 1)) / (1.0 - r * r)
    if tv == 0.0:
        tv = math.exp(2.0 * (K + 1) * math.log(r) - math.log1p(-r * r))
    return PoissonBinomialModel(r=float(r), probs=probs, K=int(K), tv_bound=tv)


def build_model(r: float, epsilon_tv: float) -> PoissonBinomialModel:
    """Smallest truncation whose total-variation bound fits epsilon_tv."""
    if not (0.0 < r < 1.0):
        raise ValueError(f"r must lie in (0, 1), got {r!r}")
    if not (0.0 < epsilon_tv < 1.0):
        raise ValueError(f"epsilon_tv must lie in (0, 1), got {epsilon_tv!r}")
    # r^(2(K+1)) / (1 - r^2) <= eps  <=>  K + 1 >= log(eps (1-r^2)) / (2 log r)
    k1 = math.log(epsilon_tv * (1.0 - r * r)) / (2.0 * math.log(r))
    K = max(0, math.ceil(k1) - 1)
    while r ** (2 * (K + 1)) / (1.0 - r * r) > epsilon_tv:
        K += 1
    while K > 0 and r ** (2 * K) / (1.0 - r * r) <= epsilon_tv:
        K -= 1
    if K > K_HARD_CAP:
        raise ResourceLimitError(f"required truncation {K} exceeds cap {K_HARD_CAP}")
    return truncated_model(r, K)


def pmf(model: PoissonBinomialModel) -> Pmf:
    """Exact pmf by folding in one Bernoulli at a time."""
    if model.K > K_PMF_CAP:
        raise ResourceLimitError(f"pmf length {model.K + 1} exceeds cap {K_PMF_CAP}")
    v = np.zeros(model.K + 1)
    v[0] = 1.0
    for k, p in enumerate(model.probs, start=1):
        v[1 : k + 1] = v[1 : k + 1] * (1.0 - p) + v[0:k] * p
        v[0] *= 1.0 - p
    return Pmf(values=v, tv_bound=model.tv_bound)


def log_pmf(model: PoissonBinomialModel) -> np.ndarray:
    """log of the exact pmf, convolved entirely in the log domain.

    Entries far below the double-precision floor (deep deviation tails)
    stay finite here; this is the backend for every deep-tail query.
    """
    if model.K > K_PMF_CAP:
        raise ResourceLimitError(f"pmf length {model.K + 1} exceeds cap {K_PMF_CAP}")
    lp = np.full(model.K + 1, -np.inf)
    lp[0] = 0.0
    logp = np.log(model.probs)
    log1mp = np.log1p(-model.probs)
    for k in range(1, model.K + 1):
        lo, l1 = logp[k - 1], log1mp[k - 1]
        lp[1 : k + 1] = np.logaddexp(lp[1 : k + 1] + l1, lp[0:k] + lo)
        lp[0] += l1
    return lp


def _log_sum_far_in(terms: np.ndarray) -> float:
    """log sum exp, accumulated from the far (smallest) end with compensation."""
    if terms.size == 0:
        return -math.inf
    m = float(np.max(terms))
    if m == -math.inf:
        return -math.inf
    return m + math.log(math.fsum(math.exp(t - m) for t in terms[::-1]))


def tail_exact(model: PoissonBinomialModel, V: int, *, log_pmf_values=None) -> float:
    """log P[count >= V] for the truncated model.

    Returns 0.0 for V <= 0 and -inf for V > K.  Pass a precomputed
    log_pmf array to amortize repeated queries.
    """
    if V <= 0:
        return 0.0
    if V > model.K:
        return -math.inf
    lp = log_pmf(model) if log_pmf_values is None else log_pmf_values
    return _log_sum_far_in(lp[V:])


def head_exact(model: PoissonBinomialModel, V: int, *, log_pmf_values=None) -> float:
    """log P[count <= V]; -inf for V < 0."""
    if V < 0:
        return -math.inf
    if V >= model.K:
        return 0.0
    lp = log_pmf(model) if log_pmf_values is None else log_pmf_values
    return _log_sum_far_in(lp[: V + 1])


def sample_count(model: PoissonBinomialModel, seed: int) -> int:
    """One draw of the Bernoulli sum, deterministic in (model, seed)."""
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    return int(np.sum(rng.random(model.K) < model.probs))


def log_mgf_centered(model: PoissonBinomialModel, s: float) -> float:
    """sum_k [log(1 + p_k (e^s - 1)) - p_k s], the centered log-MGF at s.

    Stable at both ends: log1p(p expm1(s)) for tilts where p e^s is small,
    and s + log(p + (1-p) e^(-s)) for strongly positive tilts.
    """
    s = float(s)
    if not math.isfinite(s):
        raise NumericRangeError(f"log-MGF requires finite s, got {s!r}")
    if s == 0.0:
        return 0.0
    p = model.probs
    if s <= 33.0:
        growth = np.log1p(p * math.expm1(s))
    else:
        # e^(-s) < 1e-14 here, so log(p(e^s - 1)) == log p + s to full precision
        t = np.log(p) + s
        with np.errstate(divide="ignore"):
            big = s + np.log(p + (1.0 - p) * math.exp(-s))
        growth = np.where(t < -30.0, np.exp(np.minimum(t, 0.0)), big)
    total = float(np.sum(growth - p * s))
    if not math.isfinite(total):
        raise NumericRangeError(f"log-MGF overflowed at s = {s}")
    return total


def _variance_l1(r: float) -> float:
    return r * r / (1.0 - r**4)


def scaled_log_mgf(model: PoissonBinomialModel, alpha: float, lam: float) -> float:
    """Deviation-scaled log-MGF eps_r * Lambda_r(lambda / eps_r).

    With eps_r = v^-(2 alpha - 1) this equals
    v^-(2 alpha - 1) * log_mgf_centered(model, v^(alpha - 1) * lambda),
    v = r^2/(1 - r^4); it converges to the closed-form limit as r -> 1.
    """
    if not alpha > 0.5:
        raise ValueError(f"alpha must exceed 1/2, got {alpha!r}")
    v = _variance_l1(model.r)
    return v ** -(2.0 * alpha - 1.0) * log_mgf_centered(model, v ** (alpha - 1.0) * lam)
