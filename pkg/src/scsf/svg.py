"""Byte-deterministic SVG snapshots of a curve projected onto a coordinate pair."""

from __future__ import annotations

from pathlib import Path

import numpy as np

AXES = "xyz"
MARGIN = 1.1
WIDTH = 400


def view_axes(view: str, dim: int) -> tuple[int, int]:
    """``"xz"`` -> ``(0, 2)``; rejects repeated or out-of-range axes."""
    if len(view) != 2 or view[0] == view[1] or any(c not in AXES[:dim] for c in view):
        raise ValueError(f"bad view {view!r}: need two distinct axes among {AXES[:dim]}")
    return AXES.index(view[0]), AXES.index(view[1])


def view_box(points: np.ndarray, view: str) -> tuple[float, float, float, float]:
    """Bounding box of the projected points, scaled by 1.1 about its centre.

    Returns ``(xmin, ymin, width, height)`` in curve coordinates.  A flat
    extent borrows the other axis' size so the box never collapses.
    """
    i, j = view_axes(view, points.shape[1])
    lo = np.array([points[:, i].min(), points[:, j].min()])
    hi = np.array([points[:, i].max(), points[:, j].max()])
    centre = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    if not half.max() > 0:
        raise ValueError("curve projects to a single point")
    half = np.where(half > 1e-9 * half.max(), half, half.max())
    half = MARGIN * half
    return (float(centre[0] - half[0]), float(centre[1] - half[1]),
            float(2 * half[0]), float(2 * half[1]))


def _num(v: float) -> str:
    text = f"{v:.6f}"
    return "0.000000" if text == "-0.000000" else text


def render_svg(points: np.ndarray, view: str, box, label: str = "") -> str:
    """SVG text of the closed projected polyline inside ``box``.

    The vertical axis is flipped so that the second coordinate points up.
    """
    points = np.asarray(points, dtype=float)
    i, j = view_axes(view, points.shape[1])
    x0, y0, w, h = box
    px = points[:, i]
    py = (2 * y0 + h) - points[:, j]  # mirror about the box centre line
    height = max(1, int(round(WIDTH * h / w)))
    coords = " ".join(f"{_num(a)},{_num(b)}" for a, b in zip(px, py))
    stroke = _num(w / WIDTH)
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" '
        f'viewBox="{_num(x0)} {_num(y0)} {_num(w)} {_num(h)}">',
    ]
    if label:
        parts.append(f"<title>{label}</title>")
    parts.append(f'<polygon points="{coords}" fill="none" stroke="black" stroke-width="{stroke}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_snapshot_svg(points, view: str, path, box=None, label: str = "") -> Path:
    """Write one snapshot; ``box`` defaults to this curve's own bounding box."""
    pts = np.asarray(points, dtype=float)
    if box is None:
        box = view_box(pts, view)
    path = Path(path)
    path.write_text(render_svg(pts, view, box, label))
    return path
