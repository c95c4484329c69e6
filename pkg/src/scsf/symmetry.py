"""Reflection hyperplanes, plane crossings and the symmetric point pairing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .curve import IMMERSION_TOL, Curve, PeriodicInterpolant


class TangentialContactError(ValueError):
    """A polygon segment lies inside the plane; the crossing count is ill defined."""


class SymmetryError(ValueError):
    """The curve is not (close enough to) symmetric two-crossing."""


@dataclass(frozen=True)
class Hyperplane:
    """The plane ``<x, normal> = offset``; ``normal`` is normalized on creation."""

    normal: tuple
    offset: float = 0.0

    def __post_init__(self):
        nrm = np.asarray(self.normal, dtype=float)
        size = np.linalg.norm(nrm)
        if nrm.ndim != 1 or not size > 0:
            raise ValueError("plane normal must be a nonzero vector")
        object.__setattr__(self, "normal", tuple(nrm / size))
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def coordinate(cls, axis: int, dim: int, offset: float = 0.0) -> "Hyperplane":
        """The plane ``x_axis = offset`` in R^dim."""
        nrm = np.zeros(dim)
        nrm[axis] = 1.0
        return cls(tuple(nrm), offset)

    def _normal_for(self, points: np.ndarray) -> np.ndarray:
        nrm = np.asarray(self.normal)
        if len(nrm) != points.shape[-1]:
            raise ValueError(f"plane lives in R^{len(nrm)}, points in R^{points.shape[-1]}")
        return nrm

    def signed_distance(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts @ self._normal_for(pts) - self.offset

    def reflect(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        nrm = self._normal_for(pts)
        dist = pts @ nrm - self.offset
        return pts - 2.0 * dist[..., None] * nrm


def reflect_curve(curve: Curve, plane: Hyperplane) -> Curve:
    return Curve(plane.reflect(curve.points))


@dataclass(frozen=True)
class Crossing:
    segment: int  # crossing lies on segment (segment, segment + 1)
    s: float
    position: np.ndarray


@dataclass(frozen=True)
class CrossingSet:
    crossings: tuple

    @property
    def count(self) -> int:
        return len(self.crossings)


def _signs(dist: np.ndarray) -> np.ndarray:
    # points on the plane count as positive so the count stays deterministic
    return np.where(dist >= 0.0, 1, -1)


def count_plane_crossings(curve: Curve, plane: Hyperplane) -> CrossingSet:
    """Transversal crossings of the closed polygon with ``plane``.

    Raises
    ------
    TangentialContactError
        If some segment has both endpoints on the plane.
    """
    dist = plane.signed_distance(curve.points)
    nxt = np.roll(dist, -1)
    on_plane = np.abs(dist) <= IMMERSION_TOL * curve.length
    if np.any(on_plane & np.roll(on_plane, -1)):
        i = int(np.flatnonzero(on_plane & np.roll(on_plane, -1))[0])
        raise TangentialContactError(f"segment {i} lies in the plane")
    sg = _signs(dist)
    idx = np.flatnonzero(sg != np.roll(sg, -1))
    seg = curve.segment_lengths
    out = []
    for i in idx:
        lam = dist[i] / (dist[i] - nxt[i])
        p0 = curve.points[i]
        p1 = curve.points[(i + 1) % len(curve)]
        out.append(Crossing(int(i), float(curve.s[i] + lam * seg[i]), p0 + lam * (p1 - p0)))
    return CrossingSet(tuple(out))


def symmetry_defect(curve: Curve, plane: Hyperplane) -> float:
    """Max distance from a vertex to the reflected polygon, divided by L.

    Candidate segments are those adjacent to the few nearest reflected
    vertices, which is exact once the polygon is resolved at the scale of
    its segment length.
    """
    pts = curve.points
    ref = plane.reflect(pts)
    n = len(pts)
    k = min(4, n)
    _, near = cKDTree(ref).query(pts, k=k)
    best = np.full(n, np.inf)
    for col in range(k):
        for start in (near[:, col], (near[:, col] - 1) % n):
            a = ref[start]
            b = ref[(start + 1) % n]
            ab = b - a
            lam = np.clip(np.einsum("ij,ij->i", pts - a, ab) / np.einsum("ij,ij->i", ab, ab), 0.0, 1.0)
            best = np.minimum(best, np.linalg.norm(pts - a - lam[:, None] * ab, axis=1))
    return float(best.max() / curve.length)


@dataclass(frozen=True)
class SymmetryVerdict:
    ok: bool
    defect: float
    crossings: int


def is_symmetric_two_crossing(curve: Curve, plane: Hyperplane, tol: float = 1e-6) -> SymmetryVerdict:
    """Reflection invariant (defect < tol) and exactly two plane crossings."""
    count = count_plane_crossings(curve, plane).count
    defect = symmetry_defect(curve, plane)
    return SymmetryVerdict(bool(defect < tol and count == 2), defect, count)


class SymmetricPairing:
    """Arclength frame centred at a plane crossing A.

    ``position(s)`` is the curve point at signed arclength ``s`` from A,
    measured in the orientation along which the signed distance ``y``
    increases through A.  The point paired with ``s`` is ``-s``.
    """

    def __init__(self, curve: Curve, plane: Hyperplane, anchor_s: float,
                 orientation: int, interpolant: PeriodicInterpolant | None = None):
        self.curve = curve
        self.plane = plane
        self.length = curve.length
        self.anchor_s = float(anchor_s) % self.length
        self.orientation = 1 if orientation >= 0 else -1
        self._spline = interpolant or curve.interpolant()

    def curve_s(self, s) -> np.ndarray:
        """Location in the curve's own arclength parameter."""
        return np.mod(self.anchor_s + self.orientation * np.asarray(s, dtype=float), self.length)

    def position(self, s) -> np.ndarray:
        return self._spline(self.curve_s(s))

    def y(self, s) -> np.ndarray:
        return self.plane.signed_distance(self.position(s))

    def half_gap(self, s) -> np.ndarray:
        """``(y(s) - y(-s)) / 2``; equals ``y(s)`` on symmetric curves and
        cancels any offset of the anchor from the plane."""
        s = np.asarray(s, dtype=float)
        return 0.5 * (self.y(s) - self.y(-s))

    def pair(self, s):
        return np.mod(-np.asarray(s, dtype=float), self.length)

    @property
    def anchor(self) -> np.ndarray:
        return self.position(0.0)

    def swapped(self) -> "SymmetricPairing":
        """The same pairing anchored at the other crossing B (s -> L/2 - s)."""
        return SymmetricPairing(self.curve, self.plane, self.curve_s(0.5 * self.length),
                                -self.orientation, self._spline)


def _refine_crossing(spline: PeriodicInterpolant, plane: Hyperplane, curve: Curve,
                     crossing: Crossing) -> float:
    i = crossing.segment
    a = curve.s[i]
    b = a + curve.segment_lengths[i]

    def f(s):
        return float(plane.signed_distance(spline(s)))

    fa, fb = f(a), f(b)
    if fa == 0.0:
        return float(a % curve.length)
    if fb == 0.0:
        return float(b % curve.length)
    if fa * fb > 0:
        return crossing.s
    return float(brentq(f, a, b, xtol=1e-15 * curve.length, rtol=4 * np.finfo(float).eps) % curve.length)


def plane_crossing_locations(curve: Curve, plane: Hyperplane,
                             spline: PeriodicInterpolant | None = None) -> list[float]:
    """Crossing arclengths refined to roots of the spline's signed distance."""
    spline = spline or curve.interpolant()
    return [_refine_crossing(spline, plane, curve, c)
            for c in count_plane_crossings(curve, plane).crossings]


def build_symmetric_pairing(curve: Curve, plane: Hyperplane, previous_anchor=None,
                            tol: float = 1e-6) -> SymmetricPairing:
    """Anchor the symmetric frame at one of the two plane crossings.

    Without ``previous_anchor`` the crossing where y increases along the
    curve's own orientation is used; otherwise the crossing nearest to the
    previous anchor position, with the orientation flipped if needed.
    """
    verdict = is_symmetric_two_crossing(curve, plane, tol)
    if not verdict.ok:
        raise SymmetryError(f"not symmetric two-crossing (crossings={verdict.crossings}, "
                            f"defect={verdict.defect:.3e})")
    spline = curve.interpolant()
    locs = plane_crossing_locations(curve, plane, spline)
    nrm = np.asarray(plane.normal)
    slopes = [float(spline(s, 1) @ nrm) for s in locs]
    if previous_anchor is None:
        pick = int(np.argmax(slopes))
    else:
        prev = np.asarray(previous_anchor, dtype=float)
        pick = int(np.argmin([np.linalg.norm(spline(s) - prev) for s in locs]))
    return SymmetricPairing(curve, plane, locs[pick], 1 if slopes[pick] > 0 else -1, spline)


def _index_involution(curve: Curve, plane: Hyperplane) -> np.ndarray:
    """Vertex map j -> c - j (mod N) best matching the reflection."""
    n = len(curve)
    c = count_plane_crossings(curve, plane).crossings[0]
    lam = (c.s - curve.s[c.segment]) / curve.segment_lengths[c.segment]
    shift = int(round(2 * (c.segment + lam))) % n
    return (shift - np.arange(n)) % n


def symmetrize_curve(curve: Curve, planes, max_defect: float = 1e-3) -> Curve:
    """Average the vertices with their mirror images, plane by plane.

    Vertices are matched by index (j <-> c - j), which is exact for the
    anchored uniform samplings used by the flow.
    """
    pts = np.array(curve.points)
    for plane in planes:
        cur = Curve(pts)
        if count_plane_crossings(cur, plane).count == 0:
            raise SymmetryError("curve does not meet the symmetry plane")
        mirror = _index_involution(cur, plane)
        ref = plane.reflect(pts[mirror])
        if np.max(np.linalg.norm(ref - pts, axis=1)) >= max_defect * cur.length:
            raise SymmetryError("symmetry defect too large to symmetrize")
        pts = 0.5 * (pts + ref)
    return Curve(pts)
