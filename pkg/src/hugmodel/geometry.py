"""Planar convex hulls, shoelace areas and hull containment counts.

Everything here works on 2-D projections of sources and samples.  These are
the reference implementations; the sampler uses jitted copies in
``hugmodel._kernels`` that are tested against them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

# Absolute tolerance on cross products for the on-boundary case.
BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class Hull2:
    """Convex hull as counter-clockwise vertices, no repeated endpoint.

    Fewer than three vertices means a degenerate hull (a point or a segment).
    """

    vertices: np.ndarray

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def degenerate(self) -> bool:
        return len(self.vertices) < 3


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1 and pts.size == 0:
        pts = pts.reshape(0, 2)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"expected an (n, 2) array of points, got shape {pts.shape}")
    return pts


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def monotone_chain_hull(points) -> Hull2:
    """Andrew's monotone chain.  Collinear boundary points are dropped."""
    pts = _as_points(points)
    if len(pts) == 0:
        raise DomainError("convex hull of an empty point set is undefined")
    if not np.all(np.isfinite(pts)):
        raise DomainError("points must have finite coordinates")

    order = np.lexsort((pts[:, 1], pts[:, 0]))
    p = [tuple(pts[i]) for i in order]
    # drop exact duplicates (they are adjacent after sorting)
    uniq = [p[0]]
    for q in p[1:]:
        if q != uniq[-1]:
            uniq.append(q)
    if len(uniq) < 3:
        return Hull2(np.array(uniq, dtype=float).reshape(-1, 2))

    lower: list = []
    for q in uniq:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], q) <= 0:
            lower.pop()
        lower.append(q)
    upper: list = []
    for q in reversed(uniq):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], q) <= 0:
            upper.pop()
        upper.append(q)
    verts = lower[:-1] + upper[:-1]
    return Hull2(np.array(verts, dtype=float).reshape(-1, 2))


def hull_area(h: Hull2) -> float:
    """Shoelace area; zero for degenerate hulls."""
    v = h.vertices
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    s = 0.0
    for i in range(len(v)):
        j = (i + 1) % len(v)
        s += x[i] * y[j] - x[j] * y[i]
    return abs(s) / 2.0


def inside_mask(h: Hull2, points, tol: float = BOUNDARY_TOL) -> np.ndarray:
    """Boolean mask of points inside or on the boundary of ``h``."""
    pts = _as_points(points)
    v = h.vertices
    if len(pts) == 0:
        return np.zeros(0, dtype=bool)
    if len(v) >= 3:
        ok = np.ones(len(pts), dtype=bool)
        for i in range(len(v)):
            a, b = v[i], v[(i + 1) % len(v)]
            cr = (b[0] - a[0]) * (pts[:, 1] - a[1]) - (b[1] - a[1]) * (pts[:, 0] - a[0])
            ok &= cr >= -tol
        return ok
    if len(v) == 2:
        a, b = v[0], v[1]
        d = b - a
        cr = d[0] * (pts[:, 1] - a[1]) - d[1] * (pts[:, 0] - a[0])
        t = d[0] * (pts[:, 0] - a[0]) + d[1] * (pts[:, 1] - a[1])
        return (np.abs(cr) <= tol) & (t >= -tol) & (t <= d @ d + tol)
    a = v[0]
    return (np.abs(pts[:, 0] - a[0]) <= tol) & (np.abs(pts[:, 1] - a[1]) <= tol)


def count_inside(h: Hull2, points, tol: float = BOUNDARY_TOL) -> int:
    """Number of points inside ``h``; points on the boundary count as inside."""
    return int(inside_mask(h, points, tol).sum())
