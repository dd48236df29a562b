"""Real special functions needed by the closed-form rate expressions.

Self-contained implementations of the two real branches of the Lambert W
function (the inverse of w -> w*exp(w)) and of the real dilogarithm
Li2(x) = -int_0^x log(1-u)/u du on (-inf, 1].  Evaluation stays inside
geometrically convergent series: W uses regime-dependent initial guesses
polished by Halley iteration; Li2 uses the defining power series on
|x| <= 1/2 and reflection / inversion / Landen identities elsewhere.
"""

from __future__ import annotations

import enum
import math

__all__ = [
    "BranchTag",
    "SpecialDomainError",
    "lambert_w",
    "dilog",
    "dilog_asymptotic_check",
]

# Branch point of the real Lambert W function, -1/e.  Computed as -exp(-1)
# so that arguments produced as -u*exp(-u) with u == 1.0 hit it exactly.
BRANCH_POINT = -math.exp(-1.0)
_BRANCH_CLAMP = 1e-14
_PI2_6 = math.pi**2 / 6.0
_MAX_HALLEY = 50


class BranchTag(enum.Enum):
    """Selector for the two real branches of Lambert W."""

    PRINCIPAL = "principal"  # W0: domain [-1/e, inf), values >= -1
    LOWER = "lower"  # W-1: domain [-1/e, 0), values <= -1


class SpecialDomainError(ValueError):
    """Argument outside the real domain of a special function."""

    def __init__(self, message: str, *, x: float, branch: BranchTag | None = None):
        super().__init__(message)
        self.x = x
        self.branch = branch


def _w_branch_series(x: float, sign: float) -> float:
    # Series about the branch point in p = +-sqrt(2(e*x + 1)); sign picks
    # the branch (+ for principal, - for lower).
    p = sign * math.sqrt(max(2.0 * (math.e * x + 1.0), 0.0))
    return -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0 - p * 43.0 / 540.0)))


def _halley_w(x: float, w: float) -> float:
    for _ in range(_MAX_HALLEY):
        ew = math.exp(w)
        f = w * ew - x
        if abs(f) <= 1e-15 * max(abs(x), 1e-290):
            break
        wp1 = w + 1.0
        if abs(wp1) < 1e-12:
            # Halley denominator degenerates at the branch point; the
            # series start is already accurate there.
            break
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        step = f / denom
        w -= step
        if abs(step) <= 5e-16 * (1.0 + abs(w)):
            break
    return w


def lambert_w(branch: BranchTag, x: float) -> float:
    """Real Lambert W on the requested branch.

    Satisfies w*exp(w) == x to relative residual <= 1e-13.  Arguments up to
    1e-14 below the branch point -1/e are clamped onto it.
    """
    x = float(x)
    if not math.isfinite(x):
        raise SpecialDomainError("lambert_w requires a finite argument", x=x, branch=branch)
    if x < BRANCH_POINT:
        if x >= BRANCH_POINT - _BRANCH_CLAMP:
            x = BRANCH_POINT
        else:
            raise SpecialDomainError(
                f"lambert_w({branch.value}) undefined for x={x!r} < -1/e", x=x, branch=branch
            )
    if x == BRANCH_POINT:
        return -1.0

    if branch is BranchTag.PRINCIPAL:
        if x == 0.0:
            return 0.0
        if x < -0.25:
            w0 = _w_branch_series(x, +1.0)
        elif x < 8.0:
            # Crude but inside the Halley basin on [-0.25, 8).
            w0 = math.log1p(x) if x > 0.0 else x * (1.0 - x)
        else:
            lx = math.log(x)
            w0 = lx - math.log(lx)
        w = _halley_w(x, w0)
        return max(w, -1.0)

    if branch is BranchTag.LOWER:
        if x >= 0.0:
            raise SpecialDomainError(
                f"lambert_w(lower) undefined for x={x!r} >= 0", x=x, branch=branch
            )
        if x > -0.25 / math.e:
            ly = math.log(-x)
            w0 = ly - math.log(-ly)
        else:
            w0 = _w_branch_series(x, -1.0)
        w = _halley_w(x, w0)
        return min(w, -1.0)

    raise SpecialDomainError(f"unknown branch {branch!r}", x=x, branch=branch)


def _dilog_series(x: float) -> float:
    # Defining power series sum_{n>=1} x^n / n^2, geometric for |x| <= 1/2.
    total = 0.0
    power = 1.0
    for n in range(1, 200):
        power *= x
        term = power / (n * n)
        total += term
        if abs(term) <= 1e-17 * max(abs(total), 1e-30):
            break
    return total


def _dilog_inner(x: float) -> float:
    if -0.5 <= x <= 0.5:
        return _dilog_series(x)
    if x > 0.5:
        # Reflection onto 1-x in [0, 1/2):
        #   Li2(x) + Li2(1-x) = pi^2/6 - log(x) log(1-x)
        return _PI2_6 - math.log(x) * math.log1p(-x) - _dilog_series(1.0 - x)
    if x >= -1.0:
        # Landen map x -> x/(x-1) lands in (1/3, 1/2] for x in [-1, -1/2):
        #   Li2(x) = -Li2(x/(x-1)) - log^2(1-x)/2
        return -_dilog_series(x / (x - 1.0)) - 0.5 * math.log1p(-x) ** 2
    # Inversion for x < -1:
    #   Li2(x) + Li2(1/x) = -pi^2/6 - log^2(-x)/2, with 1/x in (-1, 0)
    return -_PI2_6 - 0.5 * math.log(-x) ** 2 - _dilog_inner(1.0 / x)


def dilog(x: float) -> float:
    """Real dilogarithm Li2(x) for x <= 1."""
    x = float(x)
    if math.isnan(x) or x > 1.0:
        raise SpecialDomainError(f"dilog undefined for x={x!r} > 1", x=x)
    if x == 1.0:
        return _PI2_6
    return _dilog_inner(x)


def dilog_asymptotic_check(T: float) -> float:
    """Residual dilog(-T) + log(T)^2 / 2.

    For T >> 1 this residual tends to -pi^2/6 (the inversion identity with a
    vanishing Li2(-1/T) correction), confirming the deep-argument asymptotic
    regime Li2(-T) ~ -log(T)^2 / 2.
    """
    return dilog(-float(T)) + 0.5 * math.log(T) ** 2
