"""Grid multi-hop routing: L-shaped data paths, detours and relay load."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .netgen import CellGrid, NetworkInstance
from .preserve import ExpandedRegionSet

# Cost of a step into the clearance band; dominates any path length.
_BAND_PENALTY = 1.0e4
MAX_DETOUR_DEPTH = 10


@dataclass(frozen=True)
class RoutePlan:
    """Per-pair cell paths, outage pairs and per-cell load.

    Outage pairs carry an empty path. ``depth[k]`` counts the detours
    applied to pair ``k``.
    """

    paths: tuple[np.ndarray, ...]
    outage: frozenset[int]
    load: np.ndarray
    dim: int
    depth: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def n_pairs(self) -> int:
        return len(self.paths)

    @property
    def served(self) -> int:
        return self.n_pairs - len(self.outage)

    @property
    def deep_detours(self) -> int:
        """Pairs whose detour chain exceeded the flagging depth."""
        return int(np.sum(self.depth > MAX_DETOUR_DEPTH)) if self.depth.size else 0

    def load_map(self) -> dict[int, int]:
        nz = np.flatnonzero(self.load)
        return {int(c): int(self.load[c]) for c in nz}


def compute_load(paths: tuple[np.ndarray, ...] | list[np.ndarray], n_cells: int) -> np.ndarray:
    nonempty = [p for p in paths if len(p)]
    if not nonempty:
        return np.zeros(n_cells, dtype=np.int64)
    return np.bincount(np.concatenate(nonempty), minlength=n_cells).astype(np.int64)


def l_path(si: int, sj: int, di: int, dj: int, dim: int) -> np.ndarray:
    """Horizontal leg along row ``sj`` then vertical leg along column ``di``."""
    step_i = 1 if di >= si else -1
    step_j = 1 if dj >= sj else -1
    row = sj * dim + np.arange(si, di + step_i, step_i)
    col = np.arange(sj + step_j, dj + step_j, step_j) * dim + di
    return np.concatenate([row, col]).astype(np.int64)


def build_direct_paths(instance: NetworkInstance, grid: CellGrid) -> RoutePlan:
    """L-shaped path for every pair (source row first, then destination column)."""
    dim = grid.dim
    pairs = instance.pairs
    cells = grid.cell_of
    paths = []
    for s, d in pairs:
        cs, cd = int(cells[s]), int(cells[d])
        paths.append(l_path(cs % dim, cs // dim, cd % dim, cd // dim, dim))
    paths_t = tuple(paths)
    return RoutePlan(
        paths=paths_t,
        outage=frozenset(),
        load=compute_load(paths_t, grid.n_cells),
        dim=dim,
        depth=np.zeros(len(paths_t), dtype=np.int64),
    )


def detour_offset(l1: float, b_cells: int) -> int:
    """Whole-cell offset floor(((L1 mod b) / 2)) with L1 and b in cells."""
    return int(math.floor((l1 % b_cells) / 2.0 + 1e-9))


def erase_loops(cells: list[int]) -> list[int]:
    out: list[int] = []
    pos: dict[int, int] = {}
    for c in cells:
        k = pos.get(c)
        if k is not None:
            for dropped in out[k + 1 :]:
                del pos[dropped]
            del out[k + 1 :]
            continue
        pos[c] = len(out)
        out.append(c)
    return out


class _Detourer:
    """Builds and caches detours around the expanded regions of one instance."""

    def __init__(self, expanded: ExpandedRegionSet, b_cells: int) -> None:
        self.dim = expanded.dim
        self.label = expanded.label
        self.forbidden = expanded.forbidden
        self.b_cells = max(1, int(b_cells))
        self.cache: dict[tuple, list[int] | None] = {}
        self.extent: dict[int, tuple[int, int, int, int]] = {}
        for k, er in enumerate(expanded.regions):
            i = er.cells % self.dim
            j = er.cells // self.dim
            self.extent[k] = (int(i.min()), int(i.max()), int(j.min()), int(j.max()))

    def reroute(self, path: np.ndarray) -> tuple[list[int] | None, int]:
        forb = self.forbidden
        cells = [int(c) for c in path]
        out = [cells[0]]
        depth = 0
        i = 1
        n = len(cells)
        while i < n:
            c = cells[i]
            if not forb[c]:
                out.append(c)
                i += 1
                continue
            j = i
            while forb[cells[j]]:
                j += 1
            seg = self.detour(out[-1], cells[i], cells[j])
            if seg is None:
                return None, depth
            out.extend(seg)
            depth += 1
            i = j + 1
        return erase_loops(out), depth

    def detour(self, a: int, first_blocked: int, b: int) -> list[int] | None:
        """Cells after ``a`` up to and including ``b`` avoiding the blockage."""
        dim = self.dim
        region = int(self.label[first_blocked])
        ai, aj = a % dim, a // dim
        fi, fj = first_blocked % dim, first_blocked // dim
        bi, bj = b % dim, b // dim
        x0, x1, y0, y1 = self.extent[region]
        vertical = fi == ai
        if vertical:
            line, lo, hi = ai, x0, x1
            straight = bi == ai
        else:
            line, lo, hi = aj, y0, y1
            straight = bj == aj
        dist_low = (line + 0.5) - lo
        dist_high = (hi + 1) - (line + 0.5)
        l1 = max(dist_low, dist_high)
        offset = detour_offset(l1, self.b_cells)
        if not straight:
            return self._cached(a, b, region, offset, vertical, line, 0)
        # Detour on the side opposite the farthest parallel edge.
        first = 1 if dist_low >= dist_high else -1
        sides = []
        for side in (first, -first):
            touches = (lo == 0) if side < 0 else (hi == dim - 1)
            if not touches:
                sides.append(side)
        for side in sides:
            seg = self._cached(a, b, region, offset, vertical, line, side)
            if seg is not None:
                return seg
        return None

    def _cached(self, a: int, b: int, region: int, offset: int, vertical: bool, line: int, side: int) -> list[int] | None:
        key = (a, b, region, offset, side)
        if key not in self.cache:
            self.cache[key] = self._search(a, b, region, offset, vertical, line, side)
        return self.cache[key]

    def _search(self, a: int, b: int, region: int, offset: int, vertical: bool, line: int, side: int) -> list[int] | None:
        dim = self.dim
        x0, x1, y0, y1 = self.extent[region]
        ai, aj, bi, bj = a % dim, a // dim, b % dim, b // dim
        margin = offset + 2 * self.b_cells + 4
        wi0 = max(0, min(x0, ai, bi) - margin)
        wi1 = min(dim - 1, max(x1, ai, bi) + margin)
        wj0 = max(0, min(y0, aj, bj) - margin)
        wj1 = min(dim - 1, max(y1, aj, bj) + margin)
        w, h = wi1 - wi0 + 1, wj1 - wj0 + 1
        jj, ii = np.mgrid[wj0 : wj1 + 1, wi0 : wi1 + 1]
        flat = jj * dim + ii
        allowed = ~self.forbidden[flat]
        if side != 0:
            coord = ii if vertical else jj
            allowed &= (coord <= line) if side < 0 else (coord >= line)
        own = self.label[flat] == region
        if offset > 0:
            band = ndimage.binary_dilation(own, structure=np.ones((3, 3), bool), iterations=offset) & ~own
        else:
            band = np.zeros_like(own)
        cost = np.where(band, 1.0 + _BAND_PENALTY, 1.0)
        node = np.arange(w * h).reshape(h, w)
        src, dst = [], []
        for a_sl, b_sl in (
            ((slice(None), slice(0, -1)), (slice(None), slice(1, None))),
            ((slice(0, -1), slice(None)), (slice(1, None), slice(None))),
        ):
            ok = allowed[a_sl] & allowed[b_sl]
            u, v = node[a_sl][ok], node[b_sl][ok]
            src.extend([u, v])
            dst.extend([v, u])
        if not src:
            return None
        src_a = np.concatenate(src)
        dst_a = np.concatenate(dst)
        weights = cost.ravel()[dst_a]
        graph = csr_matrix((weights, (src_a, dst_a)), shape=(w * h, w * h))
        start = (aj - wj0) * w + (ai - wi0)
        goal = (bj - wj0) * w + (bi - wi0)
        dist, pred = dijkstra(graph, indices=start, return_predecessors=True)
        if not np.isfinite(dist[goal]):
            return None
        seq = []
        cur = goal
        while cur != start:
            seq.append(cur)
            cur = pred[cur]
        seq.reverse()
        return [int((wj0 + s // w) * dim + (wi0 + s % w)) for s in seq]


def detour_paths(plan: RoutePlan, expanded: ExpandedRegionSet, grid: CellGrid, b_cells: int = 1) -> RoutePlan:
    """Reroute paths around expanded regions; infeasible pairs go to outage."""
    if len(expanded) == 0:
        return plan
    forb = expanded.forbidden
    det = _Detourer(expanded, b_cells)
    paths = list(plan.paths)
    outage = set(plan.outage)
    depth = plan.depth.copy() if plan.depth.size else np.zeros(len(paths), dtype=np.int64)
    for k, p in enumerate(paths):
        if k in outage or len(p) == 0:
            continue
        if forb[p[0]] or forb[p[-1]]:
            outage.add(k)
            paths[k] = np.empty(0, dtype=np.int64)
            continue
        if not forb[p].any():
            continue
        new, d = det.reroute(p)
        depth[k] = d
        if new is None:
            outage.add(k)
            paths[k] = np.empty(0, dtype=np.int64)
        else:
            paths[k] = np.asarray(new, dtype=np.int64)
    paths_t = tuple(paths)
    return replace(plan, paths=paths_t, outage=frozenset(outage), load=compute_load(paths_t, grid.n_cells), depth=depth)


def max_cell_load(plan: RoutePlan) -> int:
    return int(plan.load.max()) if plan.load.size else 0


def outage_fraction(plan: RoutePlan, instance: NetworkInstance) -> float:
    """Share of legitimate nodes belonging to outage pairs."""
    if instance.n_l == 0:
        return 0.0
    return 2.0 * len(plan.outage) / instance.n_l


def route_instance(instance: NetworkInstance, grid: CellGrid, expanded: ExpandedRegionSet, b_cells: int) -> RoutePlan:
    return detour_paths(build_direct_paths(instance, grid), expanded, grid, b_cells)
