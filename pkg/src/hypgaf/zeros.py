"""Zero counting for truncated random series in centered disks.

Two independent routes: winding-number integration of the phase of f
around |z| = r (the argument principle on an adaptively refined grid),
and simultaneous polynomial root finding (Aberth-Ehrlich with a
Durand-Kerner fallback).  A count of the truncated polynomial stands in
for the count of the full series only when the minimum of |f| on the
contour dominates the certified tail amplitude; otherwise the contour is
reported unreliable so the caller can resample or shrink the radius.

Jensen's formula and the boundary-average inequality
    n(r) log(R/r) <= log max_{|z|=R} |f| - avg_{|z|=r} log|f|,  R = (1+r)/2,
are exposed as numerical diagnostics on the same samples.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .gaf import GafSample, horner

__all__ = [
    "CountConfig",
    "CountResult",
    "CountMethod",
    "IntegralCheck",
    "UnreliableContour",
    "NonConvergent",
    "BoundaryAmbiguous",
    "count_winding",
    "count_roots",
    "polynomial_roots",
    "jensen_residual",
    "integral_inequality_check",
]

_STRIP_EPS = 1e-300
_BOUNDARY_BAND = 1e-9
_COUNT_WIDEN = 1e-12


class UnreliableContour(RuntimeError):
    """min |f| on the contour does not dominate the truncation tail."""

    def __init__(self, message, *, min_modulus: float, tail_amplitude: float):
        super().__init__(message)
        self.min_modulus = min_modulus
        self.tail_amplitude = tail_amplitude


class NonConvergent(RuntimeError):
    """An iteration or refinement budget was exhausted."""


class BoundaryAmbiguous(RuntimeError):
    """Roots sit within the ambiguity band of the counting contour."""

    def __init__(self, message, *, roots):
        super().__init__(message)
        self.roots = roots


class CountMethod(enum.Enum):
    WINDING = "winding"
    ROOTS = "roots"


@dataclass(frozen=True)
class CountConfig:
    """Counting radius plus refinement and reliability knobs."""

    r: float
    initial_nodes: int = 512
    max_nodes: int = 2**20
    min_modulus_factor: float = 10.0

    def __post_init__(self):
        if not (0.0 < self.r < 1.0):
            raise ValueError(f"count radius must lie in (0, 1), got {self.r!r}")
        if self.initial_nodes < 16:
            raise ValueError("initial_nodes must be >= 16")
        if self.max_nodes < self.initial_nodes:
            raise ValueError("max_nodes must be >= initial_nodes")
        if not self.min_modulus_factor > 1.0:
            raise ValueError("min_modulus_factor must exceed 1")


@dataclass(frozen=True)
class CountResult:
    count: int
    method: CountMethod
    nodes_used: int
    contour_min_modulus: float


class IntegralCheck(NamedTuple):
    lhs: float
    rhs: float
    ok: bool


def _contour_values(coeffs: np.ndarray, r: float, nodes: int) -> np.ndarray:
    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    return horner(coeffs, r * np.exp(1j * theta))


def count_winding(sample: GafSample, cfg: CountConfig) -> CountResult:
    """Zero count in |z| <= cfg.r from the accumulated phase of f.

    The grid is doubled until no single-step phase change exceeds pi/2 and
    the total phase is within 0.01 turns of an integer.
    """
    if cfg.r >= sample.params.r:
        raise ValueError(
            f"count radius {cfg.r} must be strictly inside the sample radius {sample.params.r}"
        )
    tail_amp = math.sqrt(sample.tail_sigma2)
    nodes = cfg.initial_nodes
    while True:
        values = _contour_values(sample.coeffs, cfg.r, nodes)
        min_mod = float(np.min(np.abs(values)))
        if min_mod <= cfg.min_modulus_factor * tail_amp:
            raise UnreliableContour(
                f"min |f| = {min_mod:g} on |z| = {cfg.r} is within factor "
                f"{cfg.min_modulus_factor} of the tail amplitude {tail_amp:g}",
                min_modulus=min_mod,
                tail_amplitude=tail_amp,
            )
        steps = np.angle(np.roll(values, -1) / values)
        if float(np.max(np.abs(steps))) <= 0.5 * np.pi:
            turns = float(steps.sum()) / (2.0 * np.pi)
            count = int(round(turns))
            if abs(turns - count) <= 0.01:
                return CountResult(
                    count=count,
                    method=CountMethod.WINDING,
                    nodes_used=nodes,
                    contour_min_modulus=min_mod,
                )
        if nodes >= cfg.max_nodes:
            raise NonConvergent(f"winding grid exceeded {cfg.max_nodes} nodes at r = {cfg.r}")
        nodes *= 2


def _horner_pair(coeffs: np.ndarray, z: np.ndarray):
    # p(z), p'(z) and the backward-error scale sum |c_n| |z|^n by Horner.
    p = np.full_like(z, coeffs[-1])
    dp = np.zeros_like(z)
    s = np.full(z.shape, abs(coeffs[-1]))
    az = np.abs(z)
    for c in coeffs[-2::-1]:
        dp = dp * z + p
        p = p * z + c
        s = s * az + abs(c)
    return p, dp, s


def _newton_and_residual(coeffs: np.ndarray, z: np.ndarray):
    """Newton correction p/p' and relative backward error |p| / sum|c_n||z|^n.

    For |z| > 1 both are formed from the reversed polynomial q(u) = u^d p(1/u)
    at u = 1/z, so no power of |z| is ever materialized and the evaluation
    cannot overflow at any iterate.
    """
    d = len(coeffs) - 1
    corr = np.zeros_like(z)
    ratio = np.zeros(z.shape)
    inner = np.abs(z) <= 1.0
    if inner.any():
        zi = z[inner]
        p, dp, s = _horner_pair(coeffs, zi)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = p / dp
        w[~np.isfinite(w)] = 0.1
        corr[inner] = w
        ratio[inner] = np.abs(p) / np.maximum(s, 1e-290)
    if not inner.all():
        zo = z[~inner]
        u = 1.0 / zo
        rev = coeffs[::-1]
        q, dq, s = _horner_pair(rev, u)
        # p/p' = z q(u) / (d q(u) - u q'(u))
        denom = d * q - u * dq
        with np.errstate(divide="ignore", invalid="ignore"):
            w = zo * q / denom
        w[~np.isfinite(w)] = 0.1
        corr[~inner] = w
        ratio[~inner] = np.abs(q) / np.maximum(s, 1e-290)
    return corr, ratio


def _log_polar_p(coeffs: np.ndarray, z: np.ndarray):
    """(log|p(z)|, arg p(z)) using the reversed polynomial outside |z| = 1."""
    d = len(coeffs) - 1
    logmag = np.empty(z.shape)
    phase = np.empty(z.shape)
    inner = np.abs(z) <= 1.0
    if inner.any():
        p, _, _ = _horner_pair(coeffs, z[inner])
        with np.errstate(divide="ignore"):
            logmag[inner] = np.log(np.abs(p))
        phase[inner] = np.angle(p)
    if not inner.all():
        zo = z[~inner]
        u = 1.0 / zo
        q, _, _ = _horner_pair(coeffs[::-1], u)
        with np.errstate(divide="ignore"):
            logmag[~inner] = d * np.log(np.abs(zo)) + np.log(np.abs(q))
        phase[~inner] = d * np.angle(zo) + np.angle(q)
    return logmag, phase


def _dk_steps(coeffs: np.ndarray, z: np.ndarray) -> np.ndarray:
    # Durand-Kerner correction p / (lead * prod_{j!=k}(z_k - z_j)), assembled
    # in log-polar form so widely spread iterates cannot overflow.
    n = len(z)
    logp, argp = _log_polar_p(coeffs, z)
    lead_log = math.log(abs(coeffs[-1]))
    lead_arg = float(np.angle(coeffs[-1]))
    step = np.empty_like(z)
    for k in range(n):
        diffs = np.delete(z - z[k], k)
        with np.errstate(divide="ignore"):
            logmag = logp[k] - lead_log - float(np.sum(np.log(np.abs(diffs))))
        ang = argp[k] - lead_arg - float(np.sum(np.angle(diffs))) + np.pi * (n - 1)
        cap = math.log1p(abs(z[k]))  # trust region: no step beyond 1 + |z|
        step[k] = math.exp(min(logmag, cap)) * complex(math.cos(ang), math.sin(ang))
    return step


def _aberth_sweeps(coeffs: np.ndarray, z: np.ndarray, max_sweeps: int):
    """Simultaneous iteration; returns (roots, sweeps_used) or raises.

    No per-root freezing: the mutual repulsion term must keep acting until
    the whole configuration settles, otherwise two iterates can claim one
    root and silently drop another.
    """
    eps = 1e-13
    prev_move = math.inf
    stagnant = 0
    mode_dk = False
    for sweep in range(1, max_sweeps + 1):
        w, ratio = _newton_and_residual(coeffs, z)
        if mode_dk:
            step = _dk_steps(coeffs, z)
        else:
            # pairwise sums in row chunks to cap memory at O(chunk * n)
            n = len(z)
            sums = np.zeros_like(z)
            chunk = max(1, min(n, 2**22 // max(n, 1)))
            for lo in range(0, n, chunk):
                hi = min(lo + chunk, n)
                diff = z[lo:hi, None] - z[None, :]
                np.fill_diagonal(diff[:, lo:hi], np.inf)
                sums[lo:hi] = (1.0 / diff).sum(axis=1)
            denom = 1.0 - w * sums
            small = np.abs(denom) < 1e-290
            denom[small] = 1.0
            step = w / denom
            # trust region: no single sweep may move a point past ~its scale
            cap = 1.0 + np.abs(z)
            mags = np.abs(step)
            too_big = mags > cap
            if too_big.any():
                step[too_big] *= cap[too_big] / mags[too_big]
        z = z - step
        rel_move = float(np.max(np.abs(step) / (1.0 + np.abs(z))))
        if np.all(ratio <= eps) and rel_move <= 1e-12:
            return z, sweep
        if rel_move > 0.7 * prev_move:
            stagnant += 1
        else:
            stagnant = 0
        if stagnant >= 30:
            mode_dk = not mode_dk
            stagnant = 0
        prev_move = rel_move
    raise NonConvergent(f"root iteration stagnated beyond {max_sweeps} sweeps")


def polynomial_roots(coeffs: np.ndarray, max_sweeps: int = 1000):
    """All roots of sum c_n z^n.

    Returns (roots, origin_multiplicity, sweeps).  Trailing coefficients
    below 1e-300 are stripped; leading near-zero coefficients become exact
    roots at the origin.
    """
    c = np.asarray(coeffs, dtype=np.complex128)
    mags = np.abs(c)
    keep = np.nonzero(mags > _STRIP_EPS)[0]
    if keep.size == 0:
        raise ValueError("zero polynomial has no well-defined root set")
    lead0 = int(keep[0])
    deg_hi = int(keep[-1])
    c = c[lead0 : deg_hi + 1]
    d = len(c) - 1
    if d == 0:
        return np.empty(0, dtype=np.complex128), lead0, 0
    if d == 1:
        return np.array([-c[0] / c[1]]), lead0, 0
    if d == 2:
        a, b, cc = c[2], c[1], c[0]
        disc = np.sqrt(b * b - 4.0 * a * cc + 0j)
        q = -0.5 * (b + disc) if abs(b + disc) >= abs(b - disc) else -0.5 * (b - disc)
        r1 = q / a
        r2 = cc / q if q != 0 else 0.0
        return np.array([r1, r2]), lead0, 0
    roots, sweeps = _aberth_sweeps(c, _initial_points(c), max_sweeps)
    roots = _newton_polish(c, roots)
    return roots, lead0, sweeps


def _initial_points(coeffs: np.ndarray) -> np.ndarray:
    """Starting configuration from the Newton polygon of the coefficients.

    Each edge of the upper convex hull of (i, log|c_i|) contributes one
    jittered circle whose radius balances the edge's end coefficients, so
    iterates start at the natural magnitude of every root group.  For
    balanced coefficients this degenerates to the usual single circle of
    radius (|c_0|/|c_d|)^(1/d).
    """
    d = len(coeffs) - 1
    mags = np.abs(coeffs)
    support = np.nonzero(mags > 0.0)[0]
    pts = [(int(i), math.log(mags[i])) for i in support]
    hull: list[tuple[int, float]] = []
    for x3, y3 in pts:
        while len(hull) >= 2:
            x1, y1 = hull[-2]
            x2, y2 = hull[-1]
            if (x2 - x1) * (y3 - y1) - (y2 - y1) * (x3 - x1) >= 0.0:
                hull.pop()
            else:
                break
        hull.append((x3, y3))
    z0 = np.empty(d, dtype=np.complex128)
    pos = 0
    for (x1, y1), (x2, y2) in zip(hull, hull[1:]):
        k = x2 - x1
        radius = math.exp(min(max((y1 - y2) / k, -345.0), 345.0))
        angles = 2.0 * np.pi * (np.arange(k) + 0.37) / k + 0.5 * (pos + 1) / d
        z0[pos : pos + k] = radius * np.exp(1j * angles)
        pos += k
    return z0


def _newton_polish(coeffs: np.ndarray, roots: np.ndarray, max_steps: int = 10) -> np.ndarray:
    # Raw-residual target |p(z)| <= 1e-10 max|c_n| for roots inside the unit
    # disk (the ones that get counted); backward-relative target outside,
    # where |p| itself is not representable.
    max_c = float(np.max(np.abs(coeffs)))
    z = roots.copy()
    for _ in range(max_steps):
        step, ratio = _newton_and_residual(coeffs, z)
        az = np.abs(z)
        scale = np.ones_like(az)
        inner = az <= 1.0
        if inner.any():
            _, _, s = _horner_pair(coeffs, z[inner])
            scale[inner] = s
        raw = ratio * scale  # |p(z)| for inner points, relative error outside
        bad = np.where(inner, raw > 1e-10 * max_c, ratio > 1e-14)
        if not bad.any():
            break
        z = z - np.where(bad, step, 0.0)
    return z


def count_roots(sample: GafSample, cfg: CountConfig) -> CountResult:
    """Zero count in |z| <= cfg.r from the full root set of the polynomial."""
    roots, origin_mult, sweeps = polynomial_roots(sample.coeffs)
    mods = np.abs(roots)
    near = np.abs(mods - cfg.r) <= _BOUNDARY_BAND
    if near.any():
        raise BoundaryAmbiguous(
            f"{int(near.sum())} root(s) within {_BOUNDARY_BAND} of |z| = {cfg.r}",
            roots=roots[near],
        )
    count = origin_mult + int(np.sum(mods <= cfg.r * (1.0 + _COUNT_WIDEN)))
    margin = float(np.min(np.abs(mods - cfg.r))) if mods.size else math.inf
    return CountResult(
        count=count,
        method=CountMethod.ROOTS,
        nodes_used=sweeps,
        contour_min_modulus=margin,
    )


def _circle_log_average(
    coeffs: np.ndarray,
    r: float,
    tol: float = 1e-11,
    start_nodes: int = 512,
    max_nodes: int = 2**20,
) -> float:
    """Mean of log|f| over |z| = r by node-doubling periodic trapezoid.

    Doubling reuses previous nodes; the final value carries one Richardson
    refinement step of the last doubling.
    """
    nodes = start_nodes
    values = _contour_values(coeffs, r, nodes)
    with np.errstate(divide="ignore"):
        prev = float(np.mean(np.log(np.abs(values))))
    total = float(np.sum(np.log(np.abs(values)))) if math.isfinite(prev) else math.nan
    while nodes < max_nodes:
        theta = 2.0 * np.pi * (np.arange(nodes) + 0.5) / nodes
        new_vals = horner(coeffs, r * np.exp(1j * theta))
        with np.errstate(divide="ignore"):
            new_total = float(np.sum(np.log(np.abs(new_vals))))
        nodes *= 2
        cur = (total + new_total) / nodes if math.isfinite(total) else math.nan
        total = total + new_total
        if math.isfinite(cur) and math.isfinite(prev) and abs(cur - prev) <= tol:
            return cur + (cur - prev) / 3.0
        prev = cur
    raise NonConvergent(f"boundary average of log|f| did not settle below {max_nodes} nodes")


def jensen_residual(sample: GafSample, r: float) -> float:
    """|LHS - RHS| of Jensen's identity at radius r.

    LHS = log|f(0)| + sum_{|root| <= r} log(r/|root|), with roots from the
    simultaneous root finder; RHS is the boundary average of log|f|.
    """
    c0 = abs(complex(sample.coeffs[0]))
    if c0 <= 1e-12:
        raise ValueError("Jensen residual requires f(0) != 0 (|coeffs[0]| > 1e-12)")
    roots, origin_mult, _ = polynomial_roots(sample.coeffs)
    if origin_mult:
        raise ValueError("Jensen residual requires f(0) != 0 (root at the origin)")
    mods = np.abs(roots)
    near = np.abs(mods - r) <= _BOUNDARY_BAND
    if near.any():
        raise BoundaryAmbiguous(
            f"{int(near.sum())} root(s) within {_BOUNDARY_BAND} of |z| = {r}",
            roots=roots[near],
        )
    inside = mods <= r * (1.0 + _COUNT_WIDEN)
    lhs = math.log(c0) + float(np.sum(np.log(r / mods[inside])))
    rhs = _circle_log_average(sample.coeffs, r)
    return abs(lhs - rhs)


def integral_inequality_check(sample: GafSample, r: float) -> IntegralCheck:
    """Check n(r) log(R/r) <= log M_f(R) - avg_{|z|=r} log|f| with R = (1+r)/2.

    The maximum is taken on a fixed 4096-node grid of |z| = R; the sample
    must be valid out to R.
    """
    R = 0.5 * (1.0 + r)
    if R > sample.params.r * (1.0 + 1e-12):
        raise ValueError(f"sample radius {sample.params.r} does not reach R = {R}")
    roots, origin_mult, _ = polynomial_roots(sample.coeffs)
    mods = np.abs(roots)
    count = origin_mult + int(np.sum(mods <= r * (1.0 + _COUNT_WIDEN)))
    lhs = count * math.log(R / r)
    grid_vals = _contour_values(sample.coeffs, R, 4096)
    max_mod = float(np.max(np.abs(grid_vals)))
    if max_mod == 0.0:
        raise ValueError("sample is identically zero on the outer grid")
    rhs = math.log(max_mod) - _circle_log_average(sample.coeffs, r)
    return IntegralCheck(lhs=lhs, rhs=rhs, ok=bool(lhs <= rhs + 1e-6))
