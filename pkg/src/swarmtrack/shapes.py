"""Alpha-shape outlines of particle clouds and their rasterization.

The alpha shape keeps the Delaunay triangles whose circumradius is
below alpha; its boundary is the set of edges belonging to exactly one
kept triangle. With alpha large enough this degenerates to the convex
hull, with alpha small the shape falls apart into nothing.

Rasterization marks pixels whose center is inside the boundary under
the even-odd rule, so holes and disjoint components come out right
without tracing rings explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay, cKDTree


class ShapeError(ValueError):
    """Point set unusable for outline extraction."""


@dataclass
class BinaryMask:
    """Boolean occupancy grid, shape (height, width)."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        self.bits = np.asarray(self.bits)
        if self.bits.ndim != 2 or self.bits.size == 0:
            raise ValueError(f"bits must be a non-empty 2-D array, got {self.bits.shape}")
        if self.bits.dtype != bool:
            uniq = np.unique(self.bits)
            if not np.all(np.isin(uniq, (0, 1))):
                raise ValueError("bits must be boolean or 0/1 valued")
            self.bits = self.bits.astype(bool)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]


@dataclass
class AlphaShape:
    """Alpha shape of a planar point set.

    triangles: (m, 3, 2) vertex coordinates of the kept triangles.
    boundary: (k, 2, 2) segments that belong to exactly one triangle.
    area: total area of the kept triangles.
    """

    alpha: float
    triangles: np.ndarray
    boundary: np.ndarray
    area: float

    @property
    def is_empty(self) -> bool:
        return self.triangles.shape[0] == 0


def _circumradius(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Circumradius per triangle, inf for degenerate ones.

    Inputs are (m, 2) arrays of the three vertices.
    """
    la = np.linalg.norm(b - c, axis=1)
    lb = np.linalg.norm(a - c, axis=1)
    lc = np.linalg.norm(a - b, axis=1)
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (
        c[:, 0] - a[:, 0]
    )
    area2 = np.abs(cross)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = la * lb * lc / (2.0 * area2)
    r[area2 == 0.0] = np.inf
    return r


def _dedup(points: np.ndarray) -> np.ndarray:
    """Collapse points that coincide within 1e-6 in either coordinate."""
    rounded = np.round(points / 1e-6) * 1e-6
    _, idx = np.unique(rounded, axis=0, return_index=True)
    return points[np.sort(idx)]


def alpha_shape(points: np.ndarray, alpha: float) -> AlphaShape:
    """Alpha shape of an (n, 2) point set.

    Duplicate points (within 1e-6) are collapsed first. Fewer than 3
    distinct points or a collinear set raise ShapeError; an alpha below
    every circumradius yields an empty shape (the alpha -> 0 limit).
    """
    if not (math.isfinite(alpha) and alpha > 0):
        raise ShapeError(f"alpha must be positive and finite, got {alpha!r}")
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ShapeError(f"expected an (n, 2) point array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ShapeError("points contain non-finite coordinates")
    pts = _dedup(pts)
    empty = AlphaShape(
        alpha=alpha,
        triangles=np.empty((0, 3, 2)),
        boundary=np.empty((0, 2, 2)),
        area=0.0,
    )
    if pts.shape[0] < 3:
        raise ShapeError(
            f"need at least 3 distinct points for an alpha shape, got {pts.shape[0]}"
        )
    try:
        tri = Delaunay(pts)
    except Exception as exc:
        raise ShapeError("points are collinear; no 2-D triangulation exists") from exc
    simplices = tri.simplices
    a = pts[simplices[:, 0]]
    b = pts[simplices[:, 1]]
    c = pts[simplices[:, 2]]
    keep = _circumradius(a, b, c) < alpha
    kept = simplices[keep]
    if kept.shape[0] == 0:
        return empty
    tri_coords = pts[kept]
    cross = (
        (tri_coords[:, 1, 0] - tri_coords[:, 0, 0])
        * (tri_coords[:, 2, 1] - tri_coords[:, 0, 1])
        - (tri_coords[:, 1, 1] - tri_coords[:, 0, 1])
        * (tri_coords[:, 2, 0] - tri_coords[:, 0, 0])
    )
    area = float(np.abs(cross).sum() / 2.0)
    # Boundary = edges used by exactly one kept triangle.
    edges = np.concatenate([kept[:, [0, 1]], kept[:, [1, 2]], kept[:, [2, 0]]])
    edges_sorted = np.sort(edges, axis=1)
    _, first_idx, counts = np.unique(
        edges_sorted, axis=0, return_index=True, return_counts=True
    )
    boundary_idx = edges_sorted[first_idx[counts == 1]]
    boundary = pts[boundary_idx]
    return AlphaShape(alpha=alpha, triangles=tri_coords, boundary=boundary, area=area)


def default_alpha(points: np.ndarray) -> float:
    """3x the median nearest-neighbour distance of the point set.

    Scales with cloud density so sparse and dense clouds both produce
    a connected outline without hand tuning.
    """
    pts = _dedup(np.asarray(points, dtype=float))
    if pts.shape[0] < 2:
        raise ShapeError("need at least 2 distinct points for a default alpha")
    tree = cKDTree(pts)
    dist, _ = tree.query(pts, k=2)
    med = float(np.median(dist[:, 1]))
    if med <= 0:
        raise ShapeError("degenerate point set: zero nearest-neighbour spacing")
    return 3.0 * med


def support_points(xy: np.ndarray, weights: np.ndarray, rel_threshold: float = 0.01) -> np.ndarray:
    """Particles whose weight is at least rel_threshold of the maximum.

    A freshly initialized or momentarily confused filter carries many
    particles with vanishing weight; an outline over raw positions
    would span them all. Restricting to the posterior support keeps
    the outline tied to where the belief actually lives.
    """
    xy = np.asarray(xy, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if xy.ndim != 2 or xy.shape[1] != 2 or weights.shape != (xy.shape[0],):
        raise ShapeError(
            f"positions {xy.shape} and weights {weights.shape} do not match"
        )
    if not 0.0 <= rel_threshold <= 1.0:
        raise ShapeError(f"rel_threshold must be in [0, 1], got {rel_threshold}")
    top = weights.max() if weights.size else 0.0
    if top <= 0:
        return xy[:0]
    return xy[weights >= rel_threshold * top]


def rasterize(shape: AlphaShape, width: int, height: int) -> BinaryMask:
    """Fill the alpha-shape boundary onto a (height, width) pixel grid.

    A pixel is set when its center (integer coordinates) is inside the
    boundary under the even-odd rule. Crossings are counted along each
    pixel row against every boundary segment with the usual half-open
    rule on y, so shared vertices are not double counted.
    """
    if width <= 0 or height <= 0:
        raise ShapeError(f"target size must be positive, got {width}x{height}")
    bits = np.zeros((height, width), dtype=bool)
    if shape.boundary.shape[0] == 0:
        return BinaryMask(bits)
    crossings = _row_crossings(shape.boundary, height)
    xs = np.arange(width)
    for row, cx in crossings.items():
        if not cx:
            continue
        cx_arr = np.sort(np.array(cx))
        # Parity of crossings strictly right of each pixel center.
        n_right = len(cx_arr) - np.searchsorted(cx_arr, xs, side="right")
        bits[row] = (n_right % 2) == 1
    return BinaryMask(bits)


def _row_crossings(boundary: np.ndarray, height: int) -> dict[int, list[float]]:
    """x-coordinates where boundary segments cross each pixel-row line."""
    out: dict[int, list[float]] = {}
    for seg in boundary:
        (x1, y1), (x2, y2) = seg
        if y1 == y2:
            continue  # horizontal segments never cross a row line transversally
        y_lo, y_hi = (y1, y2) if y1 < y2 else (y2, y1)
        row_start = max(0, int(math.ceil(y_lo)))
        row_end = min(height - 1, int(math.floor(y_hi)))
        for row in range(row_start, row_end + 1):
            # Half-open on y: the upper endpoint does not count.
            if not (y_lo <= row < y_hi):
                continue
            x_cross = x1 + (row - y1) * (x2 - x1) / (y2 - y1)
            out.setdefault(row, []).append(x_cross)
    return out
