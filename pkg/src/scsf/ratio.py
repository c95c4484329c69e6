"""Distance ratios on closed curves.

``d/psi`` compares the chord between two curve points with the chord of a
round circle of the same length whose arc between the points is equally
long.  ``I`` restricts it to mirror-image pairs ``(s, -s)`` measured from a
plane crossing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .curve import Curve, PeriodicInterpolant
from .symmetry import SymmetricPairing

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
# gaps evaluated per vectorized block in the pair scan
_GAP_BLOCK = 64


def compute_psi(L, l):
    """``(L/pi) sin(pi l / L)``; symmetric under ``l -> L - l``."""
    l = np.asarray(l, dtype=float)
    if not L > 0:
        raise ValueError("L must be positive")
    slack = 1e-12 * L
    if np.any(l < -slack) or np.any(l > L + slack):
        raise ValueError("intrinsic distance outside [0, L]")
    l = np.clip(l, 0.0, L)
    # fold onto [0, L/2] so psi(l) and psi(L - l) round identically
    l = np.minimum(l, L - l)
    out = (L / np.pi) * np.sin(np.pi * l / L)
    return float(out) if out.ndim == 0 else out


def golden_section(f, a: float, b: float, tol: float = 1e-13, max_iter: int = 200):
    """Minimize a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x))``."""
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)


# -- Huisken's ratio -----------------------------------------------------------

def _cyclic_gap(s_p, s_q, L):
    return np.mod(np.asarray(s_q) - np.asarray(s_p), L)


def huisken_ratio(curve: Curve, s_p: float, s_q: float,
                  spline: PeriodicInterpolant | None = None) -> float:
    """``d/psi`` between the points at arclengths ``s_p`` and ``s_q``."""
    L = curve.length
    l = float(_cyclic_gap(s_p, s_q, L))
    if l <= 1e-14 * L or l >= L * (1 - 1e-14):
        raise ValueError("coincident parameters")
    spline = spline or curve.interpolant()
    d = float(np.linalg.norm(spline(s_p) - spline(s_q)))
    return d / compute_psi(L, l)


@dataclass(frozen=True)
class RatioReport:
    value: float
    s_p: float
    s_q: float
    d: float
    l: float
    psi: float
    alpha: float
    # True when the diagonal limit value 1 is the minimum
    diagonal: bool = False


def _pair_scan(points: np.ndarray, s: np.ndarray, L: float):
    """Smallest vertex-pair ratio; returns ``(value, i, gap)``."""
    n = len(points)
    best = (np.inf, 0, 1)
    idx = np.arange(n)
    for g0 in range(1, n // 2 + 1, _GAP_BLOCK):
        gaps = np.arange(g0, min(g0 + _GAP_BLOCK, n // 2 + 1))
        j = (idx[None, :] + gaps[:, None]) % n
        d2 = np.zeros(j.shape)
        for c in range(points.shape[1]):
            col = points[:, c]
            d2 += (col[j] - col[None, :]) ** 2
        l = np.mod(s[j] - s[None, :], L)
        ratio = np.sqrt(d2) / compute_psi(L, l)
        k = int(np.argmin(ratio))
        if ratio.flat[k] < best[0]:
            gi, i = divmod(k, n)
            best = (float(ratio.flat[k]), int(i), int(gaps[gi]))
    return best


def min_huisken_ratio(curve: Curve, refine: bool = True) -> RatioReport:
    """Global minimum of ``d/psi`` over pairs of curve points.

    Exhaustive scan over all vertex pairs, then golden-section line searches
    inside the cell around the winning pair.  The diagonal limit
    value 1 is always a candidate.
    """
    pts, s, L = curve.points, curve.s, curve.length
    n = len(curve)
    value, i, gap = _pair_scan(pts, s, L)
    if value >= 1.0:
        return RatioReport(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, diagonal=True)
    j = (i + gap) % n
    sp, sq = float(s[i]), float(s[j])
    if refine and gap > 1 and value > 0.0:
        spline = curve.interpolant()
        h_max = float(curve.segment_lengths.max())

        def ratio(a, b):
            return huisken_ratio(curve, a, b, spline)

        # the valley of d/psi is often diagonal in (s_p, s_q): search along
        # both axes and both diagonals
        directions = ((1.0, 0.0), (0.0, 1.0), (1.0, -1.0), (1.0, 1.0))
        for _ in range(12):
            prev = value
            for dp, dq in directions:
                p0, q0 = sp, sq
                t, v = golden_section(lambda x: ratio(p0 + dp * x, q0 + dq * x), -h_max, h_max)
                if v < value:
                    sp, sq, value = p0 + dp * t, q0 + dq * t, v
            if prev - value <= 1e-15:
                break
        sp, sq = sp % L, sq % L
        d = float(np.linalg.norm(spline(sp) - spline(sq)))
    else:
        d = float(np.linalg.norm(pts[i] - pts[j]))
    l = float(_cyclic_gap(sp, sq, L))
    psi = compute_psi(L, l)
    return RatioReport(value, sp, sq, d, l, psi, np.pi * l / L)


# -- symmetric ratio -----------------------------------------------------------

def symmetric_ratio(pairing: SymmetricPairing, s) -> np.ndarray | float:
    """``I(s) = 2 y(s) / psi(L, 2 s)`` for ``s`` in ``[0, L/2]``.

    ``y(s)`` is taken as the half gap ``(y(s) - y(-s)) / 2`` so that a
    crossing located to rounding accuracy does not spoil the 0/0 near s = 0.

    The endpoints are removable 0/0: ``I(0) = 1`` and ``I(L/2)`` is
    extrapolated quadratically from the interior.
    """
    L = pairing.length
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(s_arr < 0) or np.any(s_arr > 0.5 * L * (1 + 1e-14)):
        raise ValueError("s must lie in [0, L/2]")
    out = np.empty_like(s_arr)
    h = L / len(pairing.curve)
    edge = 1e-9 * L
    lo = s_arr <= edge
    hi = s_arr >= 0.5 * L - edge
    mid = ~(lo | hi)
    out[lo] = 1.0
    if np.any(mid):
        out[mid] = 2.0 * pairing.half_gap(s_arr[mid]) / compute_psi(L, 2.0 * s_arr[mid])
    if np.any(hi):
        back = 0.5 * L - h * np.arange(1, 4)
        i1, i2, i3 = 2.0 * pairing.half_gap(back) / compute_psi(L, 2.0 * back)
        out[hi] = 3.0 * i1 - 3.0 * i2 + i3
    return float(out[0]) if np.ndim(s) == 0 else out


@dataclass
class SymmetricRatioReport:
    """Minimum of ``I`` over ``(0, L/2]`` and the diagnostics at its argmin.

    ``value`` includes the boundary limit 1; ``interior_value`` is the best
    interior candidate.  ``s0`` is normalized into ``(0, L/4]`` and measured
    in ``pairing``, which is anchored at B when ``swapped`` is set.
    """

    value: float
    interior_value: float
    s0: float
    alpha0: float
    swapped: bool
    at_boundary: bool
    pairing: SymmetricPairing = field(repr=False)
    s_grid: np.ndarray = field(repr=False)
    profile: np.ndarray = field(repr=False)
    r1: float = float("nan")
    r2: float = float("nan")
    geo_slack: float = float("nan")
    rate_bound: float = float("nan")


def min_symmetric_ratio(pairing: SymmetricPairing, diagnostics: bool = False) -> SymmetricRatioReport:
    L = pairing.length
    n = len(pairing.curve)
    h = L / n
    m = n // 2
    s_grid = h * np.arange(1, m + 1)
    s_grid[-1] = 0.5 * L
    profile = symmetric_ratio(pairing, s_grid)
    j = int(np.argmin(profile[:-1]))
    s0, v0 = golden_section(lambda x: float(symmetric_ratio(pairing, x)),
                            max(s_grid[j] - h, 1e-6 * h), min(s_grid[j] + h, 0.5 * L - 1e-6 * h))
    if v0 > profile[j]:
        s0, v0 = float(s_grid[j]), float(profile[j])
    swapped = s0 > 0.25 * L
    frame = pairing.swapped() if swapped else pairing
    if swapped:
        s0 = 0.5 * L - s0
    report = SymmetricRatioReport(
        value=min(v0, 1.0), interior_value=v0, s0=s0, alpha0=2 * np.pi * s0 / L,
        swapped=swapped, at_boundary=v0 >= 1.0, pairing=frame,
        s_grid=s_grid, profile=profile)
    if diagnostics and not report.at_boundary:
        report.r1, report.r2 = variation_diagnostics(frame, s0)
        report.geo_slack = geodesic_bound_check(frame, s0)
        report.rate_bound = rate_lower_bound(frame, s0)
    return report


def _y_derivatives(pairing: SymmetricPairing, s0: float, delta: float | None = None):
    delta = delta or 0.25 * pairing.length / len(pairing.curve)
    ym, y0, yp = pairing.half_gap(np.array([s0 - delta, s0, s0 + delta]))
    return y0, (yp - ym) / (2 * delta), (yp - 2 * y0 + ym) / delta ** 2


def variation_diagnostics(pairing: SymmetricPairing, s0: float) -> tuple[float, float]:
    """First- and second-variation residuals of ``I`` at an interior argmin.

    ``r1 = y_s - 2 (y/psi) cos(alpha)`` vanishes at critical points and
    ``r2 = y_ss psi + (4 pi / L) y sin(alpha)`` is non-negative at minima.
    """
    L = pairing.length
    if not 0 < s0 < 0.5 * L:
        raise ValueError("diagnostics need an interior s0")
    y, ys, yss = _y_derivatives(pairing, s0)
    alpha = 2 * np.pi * s0 / L
    psi = compute_psi(L, 2 * s0)
    r1 = ys - 2 * (y / psi) * np.cos(alpha)
    r2 = yss * psi + (4 * np.pi / L) * y * np.sin(alpha)
    return float(r1), float(r2)


def total_turning_between(pairing: SymmetricPairing, s_end: float, per_cell: int = 8) -> float:
    """``int_0^s_end k ds``: length of the unit-tangent path on the sphere."""
    h = pairing.length / len(pairing.curve)
    m = max(16, int(np.ceil(abs(s_end) / h)) * per_cell)
    u = pairing.curve_s(np.linspace(0.0, s_end, m + 1))
    tan = pairing._spline(u, 1)
    tan /= np.linalg.norm(tan, axis=1)[:, None]
    a, b = tan[:-1], tan[1:]
    return float(np.sum(2 * np.arctan2(np.linalg.norm(a - b, axis=1), np.linalg.norm(a + b, axis=1))))


def geodesic_bound_check(pairing: SymmetricPairing, s0: float) -> float:
    """Slack ``int_0^s0 k ds - alpha0``; non-negative at argmins with I <= 1."""
    return total_turning_between(pairing, s0) - 2 * np.pi * s0 / pairing.length


def rate_lower_bound(pairing: SymmetricPairing, s0: float) -> float:
    """Lower bound for the time derivative of ``I`` at its argmin ``s0``."""
    L = pairing.length
    alpha = 2 * np.pi * s0 / L
    y = float(pairing.half_gap(s0))
    psi = compute_psi(L, 2 * s0)
    turning = total_turning_between(pairing, s0)
    return float(4 * y * np.cos(alpha) / (psi ** 2 * s0) * (turning ** 2 - alpha ** 2))


def rate_tolerance(bound: float, tol: float = 1e-3) -> float:
    return tol * max(1.0, abs(bound))


def ratio_rate_bound(pairing: SymmetricPairing, s0: float, i_t_observed: float,
                     tol: float = 1e-3) -> tuple[bool, float]:
    """Check an observed ``dI/dt`` against the lower bound; returns ``(ok, bound)``."""
    bound = rate_lower_bound(pairing, s0)
    return bool(i_t_observed >= bound - rate_tolerance(bound, tol)), bound
