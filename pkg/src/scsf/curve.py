"""Closed discrete curves in R^n.

A curve is a cyclic polygon: vertex ``N-1`` connects back to vertex 0 and the
closing segment counts towards the length.  All geometric quantities are
computed from the vertices alone, so a :class:`Curve` is an immutable value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline

MIN_POINTS = 8
# consecutive points closer than this fraction of L count as coincident
IMMERSION_TOL = 1e-12


class ImmersionError(ValueError):
    """Raised when a discrete curve has (numerically) coincident neighbours."""


def _segments(points: np.ndarray) -> np.ndarray:
    out = np.empty_like(points)
    np.subtract(points[1:], points[:-1], out=out[:-1])
    np.subtract(points[0], points[-1], out=out[-1])
    return out


def row_norms(v: np.ndarray) -> np.ndarray:
    """Euclidean norm of each row."""
    return np.sqrt(np.einsum("ij,ij->i", v, v))


def _arclength(pts: np.ndarray):
    vec = _segments(pts)
    seg = row_norms(vec)
    L = float(seg.sum())
    if not L > 0 or np.any(seg <= IMMERSION_TOL * L):
        bad = int(np.argmin(seg))
        raise ImmersionError(f"vertices {bad} and {(bad + 1) % len(pts)} coincide")
    s = np.concatenate(([0.0], np.cumsum(seg[:-1])))
    return s, L, vec, seg


def arclength_table(points) -> tuple[np.ndarray, float]:
    """Cumulative arclength of a closed polygon.

    Parameters
    ----------
    points : array-like, shape (N, n)
        Vertices, interpreted cyclically.

    Returns
    -------
    s : ndarray, shape (N,)
        ``s[i]`` is the length of the polygon from vertex 0 to vertex i.
    L : float
        Total length including the closing segment.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) < 3:
        raise ValueError("need an (N, n) array with N >= 3")
    s, L, _, _ = _arclength(pts)
    return s, L


@dataclass(frozen=True, eq=False)
class Curve:
    """Closed immersed polygon with cached arclength data.

    Parameters
    ----------
    points : array-like, shape (N, n)
        Vertex positions, N >= 8 and n >= 2.
    """

    points: np.ndarray
    s: np.ndarray = field(init=False, repr=False)
    length: float = field(init=False)
    _seg_vectors: np.ndarray = field(init=False, repr=False)
    _seg_lengths: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] < 2:
            raise ValueError(f"points must have shape (N, n>=2), got {pts.shape}")
        if len(pts) < MIN_POINTS:
            raise ValueError(f"a Curve needs at least {MIN_POINTS} points, got {len(pts)}")
        if not np.all(np.isfinite(pts)):
            raise ImmersionError("non-finite vertex coordinates")
        pts.setflags(write=False)
        s, L, vec, seg = _arclength(pts)
        for arr in (s, vec, seg):
            arr.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "length", L)
        object.__setattr__(self, "_seg_vectors", vec)
        object.__setattr__(self, "_seg_lengths", seg)

    def __len__(self):
        return len(self.points)

    @property
    def ambient_dim(self) -> int:
        return self.points.shape[1]

    @property
    def segment_lengths(self) -> np.ndarray:
        """Length of segment ``(i, i+1)``."""
        return self._seg_lengths

    @property
    def segment_vectors(self) -> np.ndarray:
        """Vector from vertex ``i`` to vertex ``i+1``."""
        return self._seg_vectors

    def interpolant(self) -> "PeriodicInterpolant":
        return PeriodicInterpolant(self)


class PeriodicInterpolant:
    """Periodic C2 cubic spline through the vertices, parametrized by the
    polygon's cumulative arclength.  Evaluation wraps modulo ``L``."""

    def __init__(self, curve: Curve):
        self.length = curve.length
        knots = np.append(curve.s, curve.length)
        values = np.vstack([curve.points, curve.points[:1]])
        self._spline = CubicSpline(knots, values, bc_type="periodic", axis=0)

    def __call__(self, s, nu: int = 0) -> np.ndarray:
        return self._spline(np.mod(s, self.length), nu)


# -- synthesis ---------------------------------------------------------------

@dataclass(frozen=True)
class FourierSpec:
    """Trigonometric coordinate series sampled at ``u_j = 2 pi j / n``.

    ``terms[c]`` is a sequence of ``(frequency, cos_coef, sin_coef)`` for
    coordinate ``c``; coordinate c(u) = sum a cos(k u) + b sin(k u).
    """

    terms: tuple
    n: int

    def __post_init__(self):
        terms = tuple(tuple((int(k), float(a), float(b)) for k, a, b in coord)
                      for coord in self.terms)
        object.__setattr__(self, "terms", terms)
        if len(terms) < 2:
            raise ValueError("need at least two coordinates")
        if any(k < 0 for coord in terms for k, _, _ in coord):
            raise ValueError("frequencies must be non-negative")
        if all(a == 0 and b == 0 for coord in terms for _, a, b in coord):
            raise ValueError("degenerate Fourier spec: all coefficients are zero")
        if not any(k == 1 and (a != 0 or b != 0) for coord in terms for k, a, b in coord):
            raise ValueError("Fourier spec needs a nonzero frequency-1 term")
        if self.n < MIN_POINTS:
            raise ValueError(f"sample count must be >= {MIN_POINTS}")

    @property
    def ambient_dim(self) -> int:
        return len(self.terms)

    def evaluate(self, u, derivative: int = 0) -> np.ndarray:
        """Coordinates (or their u-derivatives) at parameters ``u``."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        out = np.zeros((len(u), self.ambient_dim))
        for c, coord in enumerate(self.terms):
            for k, a, b in coord:
                # m-th derivative shifts the phase by m pi/2
                phase = k * u + derivative * np.pi / 2
                out[:, c] += k ** derivative * (a * np.cos(phase) + b * np.sin(phase))
        return out


def synthesize_fourier_curve(spec: FourierSpec) -> Curve:
    u = 2 * np.pi * np.arange(spec.n) / spec.n
    return Curve(spec.evaluate(u))


def circle(n: int, radius: float = 1.0, center=(0.0, 0.0), dim: int = 2) -> Curve:
    """Regular n-gon inscribed in a circle in the first coordinate plane."""
    u = 2 * np.pi * np.arange(n) / n
    pts = np.zeros((n, dim))
    pts[:, 0] = center[0] + radius * np.cos(u)
    pts[:, 1] = center[1] + radius * np.sin(u)
    return Curve(pts)


# -- local geometry ----------------------------------------------------------

def tangents(curve: Curve) -> np.ndarray:
    """Unit tangents from the normalized chord between the two neighbours."""
    pts = curve.points
    chord = np.roll(pts, -1, axis=0) - np.roll(pts, 1, axis=0)
    norm = np.linalg.norm(chord, axis=1)
    if np.any(norm <= IMMERSION_TOL * curve.length):
        raise ImmersionError("neighbour chord vanishes (cusp)")
    return chord / norm[:, None]


def tangent_at(curve: Curve, index: int) -> np.ndarray:
    return tangents(curve)[index % len(curve)]


def curvature_vectors(curve: Curve) -> np.ndarray:
    """Discrete gamma_ss at every vertex (three-point nonuniform stencil)."""
    fwd = curve.segment_vectors
    h_plus = curve.segment_lengths
    unit = fwd / h_plus[:, None]
    unit_bwd = np.concatenate((unit[-1:], unit[:-1]))
    h_minus = np.concatenate((h_plus[-1:], h_plus[:-1]))
    return 2.0 * (unit - unit_bwd) / (h_plus + h_minus)[:, None]


def curvature_vector(curve: Curve, index: int) -> np.ndarray:
    return curvature_vectors(curve)[index % len(curve)]


def curvatures(curve: Curve) -> np.ndarray:
    return row_norms(curvature_vectors(curve))


def dual_lengths(curve: Curve) -> np.ndarray:
    """Arclength weight of each vertex: half the two adjacent segments."""
    seg = curve.segment_lengths
    return 0.5 * (seg + np.concatenate((seg[-1:], seg[:-1])))


def integral_k2(curve: Curve) -> float:
    """Discrete integral of k^2 ds with vertex weights ``dual_lengths``."""
    return float(np.sum(curvatures(curve) ** 2 * dual_lengths(curve)))


def turning_angles(points: np.ndarray) -> np.ndarray:
    """Unsigned exterior angle at each vertex of a closed polygon."""
    seg = _segments(points)
    unit = seg / np.linalg.norm(seg, axis=1)[:, None]
    prev = np.roll(unit, 1, axis=0)
    # atan2 form stays accurate for nearly parallel edges
    return 2.0 * np.arctan2(np.linalg.norm(unit - prev, axis=1),
                            np.linalg.norm(unit + prev, axis=1))


def total_curvature(curve: Curve) -> float:
    """Sum of exterior angles; at least 2 pi for every closed polygon."""
    return float(turning_angles(curve.points).sum())


# -- resampling --------------------------------------------------------------

def resample_uniform(curve: Curve, n: int, anchor: float | None = None,
                     tol: float = 1e-13, max_iter: int = 60) -> Curve:
    """Equal-chord resampling on the periodic spline through ``curve``.

    Parameters
    ----------
    curve : Curve
    n : int
        New vertex count, >= 8.
    anchor : float, optional
        Arclength location (in ``curve``'s parametrization) that becomes
        vertex 0.  Defaults to the current vertex 0.
    tol : float
        Relative tolerance on the spread of the new segment lengths.
    """
    if n < MIN_POINTS:
        raise ValueError(f"cannot resample to fewer than {MIN_POINTS} points")
    spline = curve.interpolant()
    L = curve.length
    start = 0.0 if anchor is None else float(anchor) % L
    u = start + L * np.arange(n) / n
    for _ in range(max_iter):
        pts = spline(u)
        chords = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
        total = chords.sum()
        if np.ptp(chords) <= tol * total:
            break
        # invert the chord-length map of the current sample, keep u[0] fixed
        cum = np.concatenate(([0.0], np.cumsum(chords)))
        knots = np.append(u, u[0] + L)
        u = np.interp(total * np.arange(n) / n, cum, knots)
    pts = spline(u)
    if anchor is not None:
        pts[0] = spline(start)
    return Curve(pts)
