"""Closed-form deviation rate functions for the L = 1 zero count.

Under the scaling eps_r = v^-(2 alpha - 1), v = v_1(r), the limiting
log-MGF of the normalized centered count is

    Lambda(lambda) = lambda^2 / 2                      for 1/2 < alpha < 1
    Lambda(lambda) = -2 lambda - 2 Li2(1 - e^lambda)   for alpha = 1
    Lambda(lambda) = lambda^2 for lambda > 0, else 0   for alpha > 1

and the rate function is its Legendre-Fenchel transform
Lambda*(x) = sup_lambda { lambda x - Lambda(lambda) }.  For alpha = 1 the
supremum has the closed form

    Lambda*(x) = +inf                      x < -2
                 pi^2 / 3                  x = -2
                 h(lam_-1(x), x)           -2 < x < 0
                 h(lam_0(x), x)            x >= 0

with h(y, x) = y (x + 2) + 2 Li2(1 - e^y) and the stationary points
lam_j(x) = (x+2)/2 + W_j(-((x+2)/2) e^-((x+2)/2)) on the two real Lambert
branches.  The same expression evaluated at the principal-branch point
gives the deviation constant c(t) for t > 0.  A golden-section maximizer
of the defining supremum serves as an independent numerical oracle.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .specials import BranchTag, dilog, lambert_w

__all__ = [
    "RateRegime",
    "RateBranch",
    "RateResult",
    "limiting_log_mgf",
    "rate_function",
    "c_of_t",
    "legendre_numeric",
]

_PI2_3 = math.pi**2 / 3.0
_BRANCH_WINDOW = 1e-9
_DIVERGENCE_CAP = 1e12
_LAMBDA_CAP = 1e4


class RateRegime(enum.Enum):
    ALPHA_LOW = "alpha_low"  # 1/2 < alpha < 1
    ALPHA_ONE = "alpha_one"
    ALPHA_HIGH = "alpha_high"  # alpha > 1


class RateBranch(enum.Enum):
    W0 = "w0"
    WM1 = "wm1"
    BRANCH_POINT = "branch_point"
    NOT_APPLICABLE = "n/a"


@dataclass(frozen=True)
class RateResult:
    value: float
    regime: RateRegime
    branch: RateBranch


def _regime(alpha: float) -> RateRegime:
    if not alpha > 0.5:
        raise ValueError(f"alpha must exceed 1/2, got {alpha!r}")
    if alpha < 1.0:
        return RateRegime.ALPHA_LOW
    if alpha == 1.0:
        return RateRegime.ALPHA_ONE
    return RateRegime.ALPHA_HIGH


def _dilog_one_minus_exp(y: float) -> float:
    """Li2(1 - e^y) for any real y, without forming e^y when it overflows.

    For large y the inversion identity gives
    Li2(1 - e^y) = -pi^2/6 - log^2(e^y - 1)/2 - Li2(1/(1 - e^y)).
    """
    if y <= 33.0:
        return dilog(-math.expm1(y))
    log_em1 = y + math.log1p(-math.exp(-y))
    inv = -math.exp(-y) / (1.0 - math.exp(-y))
    return -math.pi**2 / 6.0 - 0.5 * log_em1**2 - dilog(inv)


def limiting_log_mgf(alpha: float, lam: float) -> float:
    """The limiting log-MGF Lambda(lambda) in the regime selected by alpha."""
    regime = _regime(alpha)
    if regime is RateRegime.ALPHA_LOW:
        return 0.5 * lam * lam
    if regime is RateRegime.ALPHA_ONE:
        return -2.0 * lam - 2.0 * _dilog_one_minus_exp(lam)
    return lam * lam if lam > 0.0 else 0.0


def _h(y: float, x: float) -> float:
    return y * (x + 2.0) + 2.0 * _dilog_one_minus_exp(y)


def _stationary_lambda(x: float, branch: BranchTag) -> float:
    u = 0.5 * (x + 2.0)
    return u + lambert_w(branch, -u * math.exp(-u))


def rate_function(alpha: float, x: float) -> RateResult:
    """Closed-form Lambda*(x), with regime and Lambert-branch tags.

    +inf is a legitimate value on the half-lines where the transform
    diverges, never an error.
    """
    regime = _regime(alpha)
    if regime is RateRegime.ALPHA_LOW:
        return RateResult(0.5 * x * x, regime, RateBranch.NOT_APPLICABLE)
    if regime is RateRegime.ALPHA_HIGH:
        if x < 0.0:
            return RateResult(math.inf, regime, RateBranch.NOT_APPLICABLE)
        return RateResult(0.25 * x * x, regime, RateBranch.NOT_APPLICABLE)
    # alpha = 1
    if x + 2.0 < -_BRANCH_WINDOW:
        return RateResult(math.inf, regime, RateBranch.NOT_APPLICABLE)
    if abs(x + 2.0) <= _BRANCH_WINDOW:
        # Both Lambert branches collapse to -1 here; the direct formula
        # loses every digit, the limit is exactly 2 Li2(1) = pi^2/3.
        return RateResult(_PI2_3, regime, RateBranch.BRANCH_POINT)
    if x < 0.0:
        lam = _stationary_lambda(x, BranchTag.LOWER)
        return RateResult(_h(lam, x), regime, RateBranch.WM1)
    lam = _stationary_lambda(x, BranchTag.PRINCIPAL)
    return RateResult(_h(lam, x), regime, RateBranch.W0)


def c_of_t(alpha: float, t: float) -> float:
    """Deviation constant c(t): -log P[|count - mean| >= t v^alpha] ~ c(t) v^(2 alpha - 1)."""
    if not t > 0.0:
        raise ValueError(f"t must be positive, got {t!r}")
    regime = _regime(alpha)
    if regime is RateRegime.ALPHA_LOW:
        return 0.5 * t * t
    if regime is RateRegime.ALPHA_HIGH:
        return 0.25 * t * t
    u = 0.5 * (t + 2.0)
    w = lambert_w(BranchTag.PRINCIPAL, -(t + 2.0) / (2.0 * math.exp(u)))
    return 0.5 * (t + 2.0) ** 2 + 2.0 * _dilog_one_minus_exp(u + w) + (t + 2.0) * w


def _golden_max(g, lo: float, hi: float, tol: float = 1e-12):
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    gc, gd = g(c), g(d)
    while b - a > tol:
        if gc >= gd:
            b, d, gd = d, c, gc
            c = b - inv_phi * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + inv_phi * (b - a)
            gd = g(d)
    m = 0.5 * (a + b)
    return m, g(m)


def legendre_numeric(alpha: float, x: float) -> float:
    """Numerical Legendre-Fenchel transform sup_lambda {lambda x - Lambda(lambda)}.

    Golden-section search on an adaptively expanded bracket; returns +inf
    when the objective is still growing at the bracket cap (a divergent
    transform), so infinite closed-form values are reproduced as flags.
    """
    _regime(alpha)

    def g(lam: float) -> float:
        return lam * x - limiting_log_mgf(alpha, lam)

    lo, hi = -50.0, 50.0
    # expand a side while the objective keeps rising toward its edge
    for sign in (-1.0, 1.0):
        edge = lo if sign < 0 else hi
        while True:
            inner = edge / 2.0
            g_edge, g_inner = g(edge), g(inner)
            if g_edge > _DIVERGENCE_CAP:
                return math.inf
            if g_edge < g_inner:
                break
            if abs(edge) >= _LAMBDA_CAP:
                # still rising at the cap: diverging unless the growth has
                # flattened to a plateau
                if g_edge - g_inner > 1e-9 * max(1.0, abs(g_edge)):
                    return math.inf
                break
            edge *= 2.0
        if sign < 0:
            lo = edge
        else:
            hi = edge
    _, value = _golden_max(g, lo, hi)
    return value
