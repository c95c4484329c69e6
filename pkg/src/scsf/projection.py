"""Orthogonal projection onto the first two coordinates and its predicates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curve import Curve

INJECTIVE_TOL = 1e-9
TURN_TOL = 1e-12
_GAP_BLOCK = 64


class ProjectionError(ValueError):
    pass


def project_xy(curve: Curve) -> np.ndarray:
    return np.array(curve.points[:, :2])


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _point_segment_distance(p, a, b):
    ab = b - a
    denom = np.einsum("...i,...i->...", ab, ab)
    with np.errstate(invalid="ignore", divide="ignore"):
        lam = np.clip(np.einsum("...i,...i->...", p - a, ab) / denom, 0.0, 1.0)
    lam = np.where(denom > 0, lam, 0.0)
    return np.linalg.norm(p - a - lam[..., None] * ab, axis=-1)


def closest_approach(poly: np.ndarray) -> tuple[float, int, int]:
    """Smallest distance between two non-adjacent edges of a closed polygon.

    Returns ``(distance, i, j)`` for edges ``(i, i+1)`` and ``(j, j+1)``.
    """
    n = len(poly)
    if n < 4:
        return np.inf, -1, -1
    nxt = np.roll(poly, -1, axis=0)
    idx = np.arange(n)
    best = (np.inf, -1, -1)
    for g0 in range(2, n // 2 + 1, _GAP_BLOCK):
        gaps = np.arange(g0, min(g0 + _GAP_BLOCK, n // 2 + 1))
        j = (idx[None, :] + gaps[:, None]) % n
        p0, p1 = poly[None, :, :], nxt[None, :, :]
        q0, q1 = poly[j], nxt[j]
        o1 = _cross(p1 - p0, q0 - p0)
        o2 = _cross(p1 - p0, q1 - p0)
        o3 = _cross(q1 - q0, p0 - q0)
        o4 = _cross(q1 - q0, p1 - q0)
        hit = (o1 * o2 <= 0) & (o3 * o4 <= 0)
        dist = np.minimum.reduce([
            _point_segment_distance(q0, p0, p1), _point_segment_distance(q1, p0, p1),
            _point_segment_distance(p0, q0, q1), _point_segment_distance(p1, q0, q1)])
        dist = np.where(hit, 0.0, dist)
        k = int(np.argmin(dist))
        if dist.flat[k] < best[0]:
            gi, i = divmod(k, n)
            best = (float(dist.flat[k]), int(i), int(j[gi, i]))
    return best


def signed_turning(poly: np.ndarray) -> tuple[np.ndarray, bool]:
    """Signed exterior angles of a closed planar polygon.

    Returns the angles and whether a cusp (anti-parallel consecutive edges)
    was met; cusp angles are capped at pi.
    """
    edges = np.roll(poly, -1, axis=0) - poly
    prev = np.roll(edges, 1, axis=0)
    cross = _cross(prev, edges)
    dot = np.einsum("ij,ij->i", prev, edges)
    ang = np.arctan2(cross, dot)
    scale = np.linalg.norm(prev, axis=1) * np.linalg.norm(edges, axis=1)
    cusp = (dot < 0) & (np.abs(cross) <= TURN_TOL * scale)
    ang = np.where(cusp, np.pi, ang)
    return ang, bool(np.any(cusp))


@dataclass(frozen=True)
class TurningReport:
    signed: float
    absolute: float
    cusp: bool


def projection_total_curvature(curve: Curve) -> TurningReport:
    """Total turning (signed) and total absolute curvature of the projection."""
    poly = project_xy(curve)
    edges = np.linalg.norm(np.roll(poly, -1, axis=0) - poly, axis=1)
    if np.any(edges <= 1e-12 * curve.length):
        raise ProjectionError("projection has a zero-length edge")
    ang, cusp = signed_turning(poly)
    return TurningReport(float(ang.sum()), float(np.abs(ang).sum()), cusp)


@dataclass(frozen=True)
class ProjectionReport:
    polygon: np.ndarray
    injective: bool
    closest_approach: float
    convex: bool
    min_turn: float
    total_turning: float

    @property
    def ok(self) -> bool:
        return self.injective and self.convex


def is_one_to_one_convex_projection(curve: Curve) -> ProjectionReport:
    """Whether the xy-projection is injective with convex image.

    Injective: non-adjacent projected edges stay more than ``1e-9 L`` apart.
    Convex: all turning increments share a sign (increments within
    ``1e-12`` count as zero) and the total turning is one full turn.
    """
    poly = project_xy(curve)
    centred = poly - poly.mean(axis=0)
    if np.linalg.svd(centred, compute_uv=False)[-1] <= 1e-12 * curve.length:
        raise ProjectionError("degenerate projection: points are collinear")
    dist, _, _ = closest_approach(poly)
    injective = dist > INJECTIVE_TOL * curve.length
    edges = np.roll(poly, -1, axis=0) - poly
    if np.any(np.linalg.norm(edges, axis=1) <= 1e-12 * curve.length):
        # a vertical segment maps two points to one
        injective = False
    ang, _ = signed_turning(poly)
    total = float(ang.sum())
    orient = 1.0 if total >= 0 else -1.0
    min_turn = float(np.min(orient * ang))
    convex = bool(min_turn >= -TURN_TOL and abs(abs(total) - 2 * np.pi) < 1e-6)
    return ProjectionReport(poly, bool(injective), float(dist), convex, min_turn, total)
