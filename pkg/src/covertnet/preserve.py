"""Preservation regions around wardens, their clusters and expanded cell sets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .netgen import CellGrid, NetworkConfig, NetworkInstance

_TOL = 1e-9


def region_width_cells(n: float, gamma: float, c_b: float) -> int:
    """Width of a preservation region in cells, b = c_b n^-gamma sqrt(log n) rounded up."""
    side = math.sqrt(2.0 * math.log(n) / n)
    raw = c_b * n ** (-gamma) * math.sqrt(math.log(n))
    return max(1, math.ceil(raw / side - 1e-9))


@dataclass(frozen=True)
class PreservationRegion:
    center: tuple[float, float]
    width: float
    lo: tuple[float, float]
    hi: tuple[float, float]


@dataclass(frozen=True)
class RegionSet:
    """Axis-aligned squares, one per warden, stored column-wise.

    ``sq_center`` is the centre of the unclipped square; ``lo``/``hi`` are
    the clipped corners.
    """

    centers: np.ndarray
    sq_center: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    width: float
    width_cells: int

    def __len__(self) -> int:
        return int(self.lo.shape[0])

    def __getitem__(self, k: int) -> PreservationRegion:
        return PreservationRegion(
            center=(float(self.centers[k, 0]), float(self.centers[k, 1])),
            width=self.width,
            lo=(float(self.lo[k, 0]), float(self.lo[k, 1])),
            hi=(float(self.hi[k, 0]), float(self.hi[k, 1])),
        )

    def __iter__(self) -> Iterator[PreservationRegion]:
        return (self[k] for k in range(len(self)))

    def subset(self, idx: Sequence[int] | np.ndarray) -> "RegionSet":
        idx = np.asarray(idx, dtype=np.int64)
        return RegionSet(self.centers[idx], self.sq_center[idx], self.lo[idx], self.hi[idx], self.width, self.width_cells)


def place_squares(wardens: np.ndarray, width_cells: int, dim: int) -> RegionSet:
    """Squares of ``width_cells`` cells around each warden on a ``dim`` grid.

    Odd widths of three or more cells form a block aligned to the grid
    with the warden's cell at its centre. Other widths are centred on the
    warden itself, which keeps a clearance of half a width around it.
    """
    w = np.asarray(wardens, dtype=float).reshape(-1, 2)
    pitch = 1.0 / dim
    width = width_cells * pitch
    if width_cells >= 3 and width_cells % 2 == 1:
        cell = np.clip(np.floor(w * dim), 0, dim - 1)
        c = (cell + 0.5) * pitch
    else:
        c = w.copy()
    lo = np.clip(c - width / 2.0, 0.0, 1.0)
    hi = np.clip(c + width / 2.0, 0.0, 1.0)
    return RegionSet(w, c, lo, hi, width, width_cells)


def build_regions(wardens: np.ndarray, config: NetworkConfig, grid: CellGrid) -> RegionSet:
    """One preservation square per warden, clipped to the unit square."""
    cells = region_width_cells(config.n, config.gamma, config.c_b)
    return place_squares(wardens, cells, grid.dim)


def square_gap(lo1: np.ndarray, hi1: np.ndarray, lo2: np.ndarray, hi2: np.ndarray) -> np.ndarray:
    """Exact L2 gap between axis-aligned rectangles (zero when they touch)."""
    d = np.maximum(0.0, np.maximum(lo2 - hi1, lo1 - hi2))
    return np.hypot(d[..., 0], d[..., 1])


class UnionFind:
    def __init__(self, size: int) -> None:
        self.parent = list(range(size))
        self.rank = [0] * size

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1


def close_pairs(regions: RegionSet, threshold: float) -> np.ndarray:
    """Index pairs of regions whose gap is strictly below ``threshold``."""
    k = len(regions)
    if k < 2:
        return np.empty((0, 2), dtype=np.int64)
    # Clipping only shrinks squares, so unclipped centres give a superset.
    tree = cKDTree(regions.sq_center)
    cand = tree.query_pairs(regions.width + threshold + 1e-12, p=np.inf, output_type="ndarray")
    if len(cand) == 0:
        return np.empty((0, 2), dtype=np.int64)
    gap = square_gap(regions.lo[cand[:, 0]], regions.hi[cand[:, 0]], regions.lo[cand[:, 1]], regions.hi[cand[:, 1]])
    return cand[gap < threshold]


def cluster_regions(regions: RegionSet, threshold: float | None = None) -> list[np.ndarray]:
    """Union-find closure of "gap < b" over the regions.

    Clusters are returned as sorted index arrays ordered by smallest member.
    """
    k = len(regions)
    b = regions.width if threshold is None else threshold
    uf = UnionFind(k)
    for a, c in close_pairs(regions, b):
        uf.union(int(a), int(c))
    groups: dict[int, list[int]] = {}
    for i in range(k):
        groups.setdefault(uf.find(i), []).append(i)
    return sorted((np.array(g, dtype=np.int64) for g in groups.values()), key=lambda g: int(g[0]))


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Counter-clockwise hull by the monotone chain, collinear points dropped."""
    pts = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
    if len(pts) <= 2:
        return pts

    def cross(o: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[np.ndarray] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[np.ndarray] = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def cells_overlapping_polygon(hull: np.ndarray, dim: int) -> np.ndarray:
    """Flat indices of cells sharing positive area with a convex polygon.

    Uses the separating-axis test against the cell axes and every hull
    edge normal. Cells that only touch the polygon boundary are excluded.
    """
    pitch = 1.0 / dim
    tol = _TOL * pitch
    xmin, ymin = hull.min(axis=0)
    xmax, ymax = hull.max(axis=0)
    i0 = max(0, int(math.floor(xmin / pitch)) - 1)
    i1 = min(dim - 1, int(math.floor(xmax / pitch)) + 1)
    j0 = max(0, int(math.floor(ymin / pitch)) - 1)
    j1 = min(dim - 1, int(math.floor(ymax / pitch)) + 1)
    ii, jj = np.meshgrid(np.arange(i0, i1 + 1), np.arange(j0, j1 + 1))
    ii = ii.ravel()
    jj = jj.ravel()
    cx0, cy0 = ii * pitch, jj * pitch
    cx1, cy1 = cx0 + pitch, cy0 + pitch
    keep = (cx1 > xmin + tol) & (cx0 < xmax - tol) & (cy1 > ymin + tol) & (cy0 < ymax - tol)
    m = len(hull)
    if m >= 3:
        corners_x = np.stack([cx0, cx1, cx1, cx0], axis=1)
        corners_y = np.stack([cy0, cy0, cy1, cy1], axis=1)
        for e in range(m):
            p, q = hull[e], hull[(e + 1) % m]
            nx, ny = q[1] - p[1], p[0] - q[0]
            norm = math.hypot(nx, ny)
            if norm == 0.0:
                continue
            nx, ny = nx / norm, ny / norm
            proj_poly = hull[:, 0] * nx + hull[:, 1] * ny
            pmin, pmax = proj_poly.min(), proj_poly.max()
            proj = corners_x * nx + corners_y * ny
            keep &= (proj.max(axis=1) > pmin + tol) & (proj.min(axis=1) < pmax - tol)
    return np.sort(jj[keep] * dim + ii[keep]).astype(np.int64)


@dataclass(frozen=True)
class ExpandedRegion:
    member_regions: np.ndarray
    hull: np.ndarray
    cells: np.ndarray


def expand_cluster(cluster: Sequence[int] | np.ndarray, regions: RegionSet, grid: CellGrid) -> ExpandedRegion:
    """Convex closure of a cluster's squares and the cells it overlaps."""
    idx = np.asarray(cluster, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("cluster must be non-empty")
    lo, hi = regions.lo[idx], regions.hi[idx]
    corners = np.concatenate(
        [lo, hi, np.stack([lo[:, 0], hi[:, 1]], axis=1), np.stack([hi[:, 0], lo[:, 1]], axis=1)]
    )
    hull = convex_hull(corners)
    return ExpandedRegion(member_regions=idx, hull=hull, cells=cells_overlapping_polygon(hull, grid.dim))


@dataclass(frozen=True)
class ExpandedRegionSet:
    """Expanded regions with a per-cell label map (-1 for free cells)."""

    regions: tuple[ExpandedRegion, ...]
    label: np.ndarray
    dim: int

    @property
    def forbidden(self) -> np.ndarray:
        return self.label >= 0

    def __len__(self) -> int:
        return len(self.regions)

    def __iter__(self) -> Iterator[ExpandedRegion]:
        return iter(self.regions)

    @classmethod
    def from_regions(cls, regions: Sequence[ExpandedRegion], dim: int) -> "ExpandedRegionSet":
        label = np.full(dim * dim, -1, dtype=np.int64)
        for k, er in enumerate(regions):
            free = label[er.cells] < 0
            label[er.cells[free]] = k
        label.flags.writeable = False
        return cls(regions=tuple(regions), label=label, dim=dim)


def build_expanded_regions(regions: RegionSet, grid: CellGrid) -> ExpandedRegionSet:
    clusters = cluster_regions(regions)
    return ExpandedRegionSet.from_regions([expand_cluster(c, regions, grid) for c in clusters], grid.dim)


def check_cluster_bound(expanded: ExpandedRegionSet | Sequence[ExpandedRegion], config: NetworkConfig) -> bool:
    """True iff some expanded region holds more than 4 kappa log n regions."""
    limit = 4.0 * config.kappa * math.log(config.n)
    return any(len(er.member_regions) > limit for er in expanded)


def points_in_regions(points: np.ndarray, regions: RegionSet) -> np.ndarray:
    """Mask of points lying inside any (clipped) preservation square."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    mask = np.zeros(len(pts), dtype=bool)
    if len(regions) == 0 or len(pts) == 0:
        return mask
    tree = cKDTree(pts)
    for hits in tree.query_ball_point(regions.sq_center, regions.width / 2.0, p=np.inf):
        mask[hits] = True
    return mask


def preservation_setup(instance: NetworkInstance, config: NetworkConfig, grid: CellGrid) -> tuple[RegionSet, ExpandedRegionSet]:
    regions = build_regions(instance.wardens, config, grid)
    return regions, build_expanded_regions(regions, grid)
