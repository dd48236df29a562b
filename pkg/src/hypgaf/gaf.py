"""Hyperbolic Gaussian analytic function model.

The random series f(z) = sum_n xi_n a_n z^n on the unit disk, where the
xi_n are independent standard complex Gaussians (E|xi|^2 = 1, so |xi|^2 is
Exp(1)) and a_n^2 = L(L+1)...(L+n-1)/n! for an intensity parameter L > 0.
The zero set of f is invariant under disk isometries; the expected number
of zeros in |z| <= r is L r^2/(1 - r^2) and the pointwise variance is
E|f(z)|^2 = (1 - |z|^2)^(-L).

Sampling truncates the series at a degree N chosen so the omitted tail
variance sum_{n>N} a_n^2 r^(2n) stays below a caller-supplied fraction of
(1 - r^2)^(-L); the bound is certified analytically from the geometric
coefficient ratio, never estimated.  The covariance matrix of f on N
equispaced points of a circle is circulant, with eigenvalues given by the
modular sums N * sum_{n = m mod N} a_n^2 r^(2n).
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GafParams",
    "GafSample",
    "EigSpectrum",
    "SpectrumBounds",
    "VarianceRegime",
    "ResourceLimitError",
    "DegenerateSpectrumError",
    "EvaluationDomainError",
    "coefficient_sq",
    "coefficient_sq_prefix",
    "sample_gaf",
    "evaluate",
    "expected_zero_count",
    "variance_regime",
    "variance_l1",
    "eigen_spectrum",
    "spectrum_bounds_check",
]

TRUNCATION_CAP = 10**6


class ResourceLimitError(RuntimeError):
    """A truncation or size cap was exceeded."""


class DegenerateSpectrumError(RuntimeError):
    """A covariance eigenvalue was nonpositive."""


class EvaluationDomainError(ValueError):
    """Evaluation point outside the sample's certified radius."""


@dataclass(frozen=True)
class GafParams:
    """Model parameters: intensity L, evaluation radius r, tail budget."""

    L: float
    r: float
    epsilon_tail: float = 1e-10

    def __post_init__(self):
        if not (self.L > 0.0 and math.isfinite(self.L)):
            raise ValueError(f"L must be positive, got {self.L!r}")
        if not (0.0 < self.r < 1.0):
            raise ValueError(f"r must lie in (0, 1), got {self.r!r}")
        if not (0.0 < self.epsilon_tail < 1.0):
            raise ValueError(f"epsilon_tail must lie in (0, 1), got {self.epsilon_tail!r}")


@dataclass(frozen=True)
class GafSample:
    """Truncated realization: coefficients xi_n * a_n plus generation metadata.

    tail_sigma2 bounds the omitted tail variance sum_{n>N} a_n^2 r^(2n) at
    the generating radius; it is valid (conservatively) at any |z| <= r.
    """

    coeffs: np.ndarray
    truncation_degree: int
    seed: int
    tail_sigma2: float
    params: GafParams

    def __post_init__(self):
        if len(self.coeffs) != self.truncation_degree + 1:
            raise ValueError("coefficient vector length must be truncation_degree + 1")
        if not np.all(np.isfinite(self.coeffs.view(np.float64))):
            raise ValueError("coefficients must be finite")


@dataclass(frozen=True)
class EigSpectrum:
    """Eigenvalues of the circulant covariance of f on N circle points."""

    lambdas: np.ndarray
    N: int
    r0: float
    L: float


@dataclass(frozen=True)
class SpectrumBounds:
    lambda_ok: bool
    logdet: float
    logdet_lower: float


class VarianceRegime(enum.Enum):
    SUPER = "super"  # L > 1/2: variance ~ c_L / (1-r)
    CRITICAL = "critical"  # L = 1/2: extra log(1/(1-r)) factor
    SUB = "sub"  # L < 1/2: variance ~ c_L / (1-r)^(2-2L)


def coefficient_sq(L: float, n: int) -> float:
    """a_n^2 = L(L+1)...(L+n-1)/n! via the ratio recurrence."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    a2 = 1.0
    for k in range(1, n + 1):
        a2 *= (L + k - 1.0) / k
    return a2


def coefficient_sq_prefix(L: float, N: int) -> np.ndarray:
    """Array of a_n^2 for n = 0..N."""
    if N < 0:
        raise ValueError("N must be nonnegative")
    n = np.arange(1, N + 1, dtype=np.float64)
    ratios = (L + n - 1.0) / n
    out = np.empty(N + 1)
    out[0] = 1.0
    np.cumprod(ratios, out=out[1:])
    return out


@functools.lru_cache(maxsize=4096)
def _truncation(L: float, r: float, epsilon_tail: float, cap: int = TRUNCATION_CAP):
    """Smallest N whose certified tail bound fits the variance budget.

    The tail sum_{n>N} a_n^2 r^(2n) is bounded by its first term times the
    geometric series in q = r^2 * sup_{n>N} (L+n)/(n+1); the sup is r^2
    itself for L <= 1 and the n = N+1 ratio for L > 1.
    """
    budget = epsilon_tail * (1.0 - r * r) ** (-L)
    r2 = r * r
    term = 1.0  # a_n^2 r^(2n) at n = 0
    for n in range(cap + 1):
        term_next = term * ((L + n) / (n + 1.0)) * r2
        q = r2 * max(1.0, (L + n + 1.0) / (n + 2.0))
        if q < 1.0:
            bound = term_next / (1.0 - q)
            if bound <= budget:
                return n, bound
        term = term_next
    raise ResourceLimitError(
        f"truncation degree exceeds cap {cap} for (L={L}, r={r}, eps={epsilon_tail})"
    )


def _open_uniform(rng: np.random.Generator, n: int) -> np.ndarray:
    # Uniform on the open interval (0, 1): 53-bit integers offset by 1/2.
    return (rng.integers(0, 1 << 53, size=n).astype(np.float64) + 0.5) * 2.0**-53


def standard_complex_gaussians(rng: np.random.Generator, n: int) -> np.ndarray:
    """n iid standard complex Gaussians (E|xi|^2 = 1) via Box-Muller."""
    u1 = _open_uniform(rng, n)
    u2 = _open_uniform(rng, n)
    return np.sqrt(-np.log(u1)) * np.exp(2j * np.pi * u2)


def _philox(seed: int) -> np.random.Generator:
    # Counter-based generator: reproducible, coordination-free streams.
    return np.random.Generator(np.random.Philox(key=int(seed)))


def sample_gaf(params: GafParams, seed: int) -> GafSample:
    """Draw a truncated realization, deterministic in (params, seed)."""
    N, tail = _truncation(params.L, params.r, params.epsilon_tail)
    rng = _philox(seed)
    xi = standard_complex_gaussians(rng, N + 1)
    amps = np.sqrt(coefficient_sq_prefix(params.L, N))
    return GafSample(
        coeffs=xi * amps,
        truncation_degree=N,
        seed=int(seed),
        tail_sigma2=tail,
        params=params,
    )


def horner(coeffs: np.ndarray, z):
    """Evaluate sum_n coeffs[n] z^n by Horner's scheme (z scalar or array)."""
    acc = np.full_like(np.asarray(z, dtype=np.complex128), coeffs[-1])
    for c in coeffs[-2::-1]:
        acc *= z
        acc += c
    return acc


def evaluate(sample: GafSample, z):
    """Value of the truncated series at z; requires |z| <= generating r."""
    zarr = np.asarray(z, dtype=np.complex128)
    rmax = float(np.max(np.abs(zarr))) if zarr.size else 0.0
    if rmax > sample.params.r * (1.0 + 1e-12):
        raise EvaluationDomainError(
            f"|z| = {rmax} exceeds the certified radius r = {sample.params.r}"
        )
    out = horner(sample.coeffs, zarr)
    return out if zarr.shape else complex(out)


def expected_zero_count(L: float, r: float) -> float:
    """Mean number of zeros in the closed disk of radius r: L r^2/(1-r^2)."""
    return L * r * r / (1.0 - r * r)


def variance_regime(L: float):
    """Asymptotic variance regime of the zero count as r -> 1.

    Returns (regime, exponent) with variance growing like (1-r)^(-exponent),
    up to the logarithmic factor in the critical case L = 1/2.
    """
    if L > 0.5:
        return VarianceRegime.SUPER, 1.0
    if L == 0.5:
        return VarianceRegime.CRITICAL, 1.0
    return VarianceRegime.SUB, 2.0 - 2.0 * L


def variance_l1(r: float) -> float:
    """Variance of the zero count in the determinantal case L = 1."""
    return r * r / (1.0 - r**4)


def eigen_spectrum(L: float, r0: float, N: int) -> EigSpectrum:
    """Eigenvalues lambda_m = N * sum_{n = m mod N} a_n^2 r0^(2n), m = 0..N-1.

    Modular tails are accumulated blockwise until the increments stagnate at
    machine precision.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if not (0.0 < r0 < 1.0):
        raise ValueError("r0 must lie in (0, 1)")
    lam = np.zeros(N)
    r2 = r0 * r0
    term = 1.0
    n = 0
    total = 0.0
    while True:
        block = np.empty(N)
        for m in range(N):
            block[m] = term
            term *= ((L + n) / (n + 1.0)) * r2
            n += 1
        lam += block
        total = lam.sum()
        if block.max() < 1e-16 * total and n > N:
            break
        if n > 100 * TRUNCATION_CAP:
            raise ResourceLimitError("modular eigenvalue sums failed to stagnate")
    return EigSpectrum(lambdas=N * lam, N=N, r0=r0, L=L)


def spectrum_bounds_check(
    spec: EigSpectrum,
    delta: float,
    *,
    lambda_const: float = 10.0,
    margin_const: float = 10.0,
) -> SpectrumBounds:
    """Check the max-eigenvalue bound and the log-determinant lower bound.

    lambda_ok tests max lambda_m <= lambda_const * N * max(1, delta^(1-L));
    the determinant bound is log det >= -4 delta N^2 + L N log N - margin*N.
    """
    if abs(delta - (1.0 - spec.r0)) > 1e-12:
        raise ValueError(f"delta = {delta} inconsistent with spectrum r0 = {spec.r0}")
    lam = spec.lambdas
    if np.any(lam <= 0.0):
        raise DegenerateSpectrumError("covariance spectrum has a nonpositive eigenvalue")
    N = spec.N
    lambda_ok = bool(lam.max() <= lambda_const * N * max(1.0, delta ** (1.0 - spec.L)))
    logdet = float(np.log(lam).sum())
    logdet_lower = -4.0 * delta * N * N + spec.L * N * math.log(N) - margin_const * N
    return SpectrumBounds(lambda_ok=lambda_ok, logdet=logdet, logdet_lower=logdet_lower)
