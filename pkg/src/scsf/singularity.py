"""Blow-up time estimation, Type I/II classification and rescaled roundness."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .curve import Curve
from .ratio import min_huisken_ratio

TYPE_I = "Type I"
TYPE_II = "Type II"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class BlowupFit:
    T: float | None
    residual: float
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.T is not None


def estimate_blowup_time(t, k_max, tail_fraction: float = 0.2, min_records: int = 20) -> BlowupFit:
    """Fit ``1/k_max^2 = a (T - t)`` on the tail of a trace.

    The tail is the last ``tail_fraction`` of the records, but at least
    ``min_records`` of them.  ``residual`` is the relative L2 misfit.
    """
    t = np.asarray(t, dtype=float)
    k = np.asarray(k_max, dtype=float)
    if len(t) < min_records:
        return BlowupFit(None, np.nan, "inconclusive: too few records")
    m = max(min_records, int(np.ceil(tail_fraction * len(t))))
    tt, kk = t[-m:], k[-m:]
    if not kk[-1] > kk[0]:
        return BlowupFit(None, np.nan, "inconclusive: k_max not increasing")
    y = 1.0 / kk ** 2
    slope, intercept = np.polyfit(tt, y, 1)
    if slope >= 0:
        return BlowupFit(None, np.nan, "inconclusive: 1/k_max^2 not decreasing")
    T = -intercept / slope
    residual = float(np.linalg.norm(y - (intercept + slope * tt)) / np.linalg.norm(y))
    if T <= tt[-1]:
        return BlowupFit(None, residual, "inconclusive: fitted T precedes the last record")
    return BlowupFit(float(T), residual)


@dataclass(frozen=True)
class Classification:
    verdict: str
    Q: np.ndarray = field(repr=False)
    tail: np.ndarray = field(repr=False)
    q_min: float = np.nan
    q_max: float = np.nan


def classify_type(t, k_max, T_est: float | None, q_lo: float = 0.1, q_hi: float = 10.0,
                  drift: float = 3.0, min_tail: int = 5, min_records: int = 10) -> Classification:
    """Classify by ``Q = k_max^2 (T_est - t)`` over the final decade of ``T_est - t``.

    Type I when Q stays inside ``[q_lo, q_hi]`` with ``max Q / min Q < drift``;
    Type II when Q grows monotonically past ``q_hi``; otherwise inconclusive.
    """
    t = np.asarray(t, dtype=float)
    k = np.asarray(k_max, dtype=float)
    if T_est is None or len(t) < min_records:
        return Classification(INCONCLUSIVE, np.array([]), np.array([], dtype=bool))
    gap = T_est - t
    Q = k ** 2 * gap
    if gap[-1] <= 0:
        return Classification(INCONCLUSIVE, Q, np.zeros(len(t), bool))
    tail = (gap > 0) & (gap <= 10.0 * gap[-1])
    if tail.sum() < min_tail:
        return Classification(INCONCLUSIVE, Q, tail)
    qt = Q[tail]
    q_min, q_max = float(qt.min()), float(qt.max())
    if q_lo <= q_min and q_max <= q_hi and q_max / q_min < drift:
        verdict = TYPE_I
    elif np.all(np.diff(qt) >= 0) and qt[-1] > q_hi:
        verdict = TYPE_II
    else:
        verdict = INCONCLUSIVE
    return Classification(verdict, Q, tail, q_min, q_max)


def rescale_curve(curve: Curve, t: float, T_est: float) -> Curve:
    """Parabolic rescaling ``(gamma - centroid) / sqrt(2 (T - t))``."""
    gap = T_est - t
    if gap <= 0:
        raise ValueError("rescaling needs t < T_est")
    pts = curve.points
    return Curve((pts - pts.mean(axis=0)) / np.sqrt(2.0 * gap))


@dataclass(frozen=True)
class Roundness:
    roundness: float
    min_dpsi: float
    planarity_defect: float


def roundness(curve: Curve, with_ratio: bool = True) -> Roundness:
    """Max/min distance to the centroid, min d/psi and a planarity defect.

    The planarity defect is the third singular value of the centred point
    cloud relative to the first (0 in the plane).
    """
    pts = curve.points - curve.points.mean(axis=0)
    r = np.linalg.norm(pts, axis=1)
    if r.min() <= 1e-12 * curve.length:
        raise ValueError("a vertex sits at the centroid")
    sv = np.linalg.svd(pts, compute_uv=False)
    planarity = float(sv[2] / sv[0]) if len(sv) > 2 else 0.0
    ratio = min_huisken_ratio(curve).value if with_ratio else np.nan
    return Roundness(float(r.max() / r.min()), ratio, planarity)


@dataclass
class SingularityReport:
    fit: BlowupFit
    classification: Classification
    times: np.ndarray = field(repr=False)
    roundness: np.ndarray = field(repr=False)
    final_min_dpsi: float = np.nan
    final_rescaled_min_dpsi: float = np.nan
    final_min_I: float = np.nan

    @property
    def verdict(self) -> str:
        return self.classification.verdict

    def tail_roundness(self) -> np.ndarray:
        """Roundness over the classification tail (final decade of ``T - t``)."""
        tail = self.classification.tail
        if len(self.roundness) == 0 or len(tail) != len(self.roundness):
            return np.array([])
        return self.roundness[tail]

    def roundness_monotone(self, jitter: float = 0.02, tail_only: bool = True) -> bool:
        """Roundness never rises more than ``jitter`` (relative) above its running minimum.

        By default only the classification tail is inspected.
        """
        r = self.tail_roundness() if tail_only else self.roundness
        if len(r) == 0:
            return False
        return bool(np.all(r <= np.minimum.accumulate(r) * (1 + jitter)))

    def monotone_since(self, jitter: float = 0.02) -> float:
        """Earliest time from which roundness decreases up to ``jitter``."""
        r = self.roundness
        if len(r) == 0:
            return np.nan
        start = len(r) - 1
        while start > 0:
            seg = r[start - 1:]
            if np.all(seg <= np.minimum.accumulate(seg) * (1 + jitter)):
                start -= 1
            else:
                break
        return float(self.times[start])


def analyze(t, k_max, snapshots=(), min_I=None, q_window=(0.1, 10.0), drift: float = 3.0,
            ) -> SingularityReport:
    """Blow-up fit, classification and roundness of the rescaled snapshots."""
    t = np.asarray(t, dtype=float)
    fit = estimate_blowup_time(t, k_max)
    cls = classify_type(t, k_max, fit.T, q_window[0], q_window[1], drift)
    rt, rr = [], []
    final_rescaled = np.nan
    if fit.ok and len(snapshots):
        for ti, curve in zip(t, snapshots):
            rt.append(ti)
            rr.append(roundness(rescale_curve(curve, ti, fit.T), with_ratio=False).roundness)
        final_rescaled = min_huisken_ratio(rescale_curve(snapshots[-1], t[-1], fit.T)).value
    final_dpsi = min_huisken_ratio(snapshots[-1]).value if len(snapshots) else np.nan
    final_I = float(np.asarray(min_I)[-1]) if min_I is not None and len(min_I) else np.nan
    return SingularityReport(fit, cls, np.array(rt), np.array(rr), final_dpsi, final_rescaled, final_I)
