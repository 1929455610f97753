"""Channel, rates, covert power budgets and per-warden KL evaluation.

All logarithms are natural; rates are in nats per channel use.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .netgen import NetworkConfig, grid_dim, nominal_side
from .preserve import ExpandedRegionSet, place_squares, region_width_cells

SAFETY = 0.999


@dataclass(frozen=True)
class ChannelModel:
    G: float = 1.0
    alpha: float = 3.0
    N0: float = 1.0

    def gain(self, d: np.ndarray | float) -> np.ndarray | float:
        return self.G * np.power(d, -self.alpha)

    @classmethod
    def from_config(cls, config: NetworkConfig) -> "ChannelModel":
        return cls(G=config.G, alpha=config.alpha, N0=config.N0)


def snr_hop(p: float, n: float, channel: ChannelModel, side: float | None = None) -> float:
    """Worst-case SNR between adjacent cells, distance sqrt(5) cell sides."""
    s = nominal_side(n) if side is None else side
    return channel.G * p / channel.N0 * (math.sqrt(5.0) * s) ** (-channel.alpha)


def interference_series(alpha: float, terms: int) -> float:
    """Sum over i = 1..terms of 8 i (3i - 2)^-alpha."""
    if alpha <= 2.0:
        raise ConfigurationError(f"interference sum diverges for alpha <= 2 (alpha={alpha})")
    i = np.arange(1, int(terms) + 1, dtype=float)
    return float(np.sum(8.0 * i * (3.0 * i - 2.0) ** (-alpha)))


def inr_bound_legit(p: float, n: float, channel: ChannelModel, side: float | None = None) -> float:
    """Upper bound on the INR at a receiver under the 9-TDMA schedule."""
    s = nominal_side(n) if side is None else side
    series = interference_series(channel.alpha, max(1, int(n)))
    return channel.G * p / channel.N0 * s ** (-channel.alpha) * series


def interference_constant(alpha: float, n: float) -> float:
    """K_I with inr_bound_legit = K_I * snr_hop."""
    return interference_series(alpha, max(1, int(n))) * 5.0 ** (alpha / 2.0)


def hop_rate(p: float, n: float, channel: ChannelModel, side: float | None = None) -> float:
    """Per-hop rate (1/9) log(1 + S / (N0 + I)) under 9-TDMA."""
    if p <= 0.0:
        return 0.0
    snr = snr_hop(p, n, channel, side)
    inr = inr_bound_legit(p, n, channel, side)
    return math.log1p(snr / (1.0 + inr)) / 9.0


def hop_rate_ceiling(alpha: float, n: float) -> float:
    return math.log1p(1.0 / interference_constant(alpha, n)) / 9.0


def covert_budget(delta: float, l: float, N0: float = 1.0) -> float:
    """Largest per-slot warden interference power, sqrt(2) N0 sqrt(delta/l)."""
    return math.sqrt(2.0) * N0 * math.sqrt(delta / l)


# -- worst-case geometry --------------------------------------------------

def _rect_distance(px: np.ndarray, py: np.ndarray, x0: np.ndarray, y0: np.ndarray, pitch: float) -> np.ndarray:
    dx = np.maximum(0.0, np.maximum(x0 - px, px - (x0 + pitch)))
    dy = np.maximum(0.0, np.maximum(y0 - py, py - (y0 + pitch)))
    return np.hypot(dx, dy)


def cell_distances(points: np.ndarray, dim: int) -> np.ndarray:
    """Distance from each point to the nearest point of every cell, shape (k, dim*dim)."""
    pitch = 1.0 / dim
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    c = np.arange(dim * dim)
    x0 = (c % dim) * pitch
    y0 = (c // dim) * pitch
    return _rect_distance(pts[:, :1], pts[:, 1:], x0[None, :], y0[None, :], pitch)


def tdma_phase(dim: int) -> np.ndarray:
    """9-TDMA phase (0..8) of every cell."""
    c = np.arange(dim * dim)
    return (c // dim % 3) * 3 + (c % dim % 3)


def _forbidden_for(warden: np.ndarray, width_cells: int, dim: int) -> np.ndarray:
    from .preserve import cells_overlapping_polygon

    sq = place_squares(warden.reshape(1, 2), width_cells, dim)
    lo, hi = sq.lo[0], sq.hi[0]
    poly = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
    mask = np.zeros(dim * dim, dtype=bool)
    mask[cells_overlapping_polygon(poly, dim)] = True
    return mask


@functools.lru_cache(maxsize=512)
def worst_case_sum(dim: int, width_cells: int, alpha: float, lattice: int = 9) -> float:
    """Largest sum over one 9-TDMA phase of d^-alpha seen by a warden.

    The warden sits in a central cell; its position is scanned on a
    ``lattice`` x ``lattice`` grid covering that cell including edges and
    the cell centre. Only the warden's own preservation square is
    excluded and each active cell is placed at its nearest point.
    """
    pitch = 1.0 / dim
    ci = dim // 2
    off = np.linspace(0.0, pitch, lattice)
    phases = tdma_phase(dim)
    best = 0.0
    for ox in off:
        for oy in off:
            w = np.array([ci * pitch + ox, ci * pitch + oy])
            w = np.clip(w, 0.0, 1.0)
            forb = _forbidden_for(w, width_cells, dim)
            d = cell_distances(w, dim)[0]
            ok = ~forb & (d > 0)
            if np.any(~forb & (d <= 0)):
                return math.inf
            contrib = np.where(ok, np.power(np.where(ok, d, 1.0), -alpha), 0.0)
            per_phase = np.bincount(phases, weights=contrib, minlength=9)
            best = max(best, float(per_phase.max()))
    return best


def calibration_grid(n: float, n_max: float) -> tuple[float, ...]:
    grid = {2.0**e for e in range(10, int(round(math.log2(n_max))) + 1)}
    grid.add(float(n))
    return tuple(sorted(grid))


def mh_power_shape(n: float, kappa: float, alpha: float) -> float:
    """n^((1/2-kappa/2)(alpha-2)) (sqrt(2 log n / n))^alpha, the k-free factor of P_MH."""
    return n ** ((0.5 - kappa / 2.0) * (alpha - 2.0)) * nominal_side(n) ** alpha


@functools.lru_cache(maxsize=256)
def calibrate_mh_constant(kappa: float, alpha: float, gamma: float, c_b: float, G: float, N0: float, grid: tuple[float, ...]) -> float:
    """Constant k of the MH power law, fixed over a grid of densities.

    For each n the worst-case warden interference of the law is compared
    with the covert budget; k is the smallest admissible value times a
    safety margin. The sqrt(delta/l) factor cancels from both sides.
    Densities whose regions leave no transmitting cell impose nothing.
    """
    best = math.inf
    for n in grid:
        dim = grid_dim(n)
        width = region_width_cells(n, gamma, c_b)
        s = worst_case_sum(dim, width, alpha)
        if s > 0.0:
            best = min(best, math.sqrt(2.0) * N0 / (G * mh_power_shape(n, kappa, alpha) * s))
    return SAFETY * finite_constant(best, c_b)


def finite_constant(best: float, c_b: float) -> float:
    if not math.isfinite(best):
        raise ConfigurationError(
            f"preservation regions with c_b={c_b:g} cover the whole grid at every calibration density; lower c_b"
        )
    return best


def mh_constant(config: NetworkConfig) -> float:
    return calibrate_mh_constant(
        config.kappa, config.alpha, config.gamma, config.c_b, config.G, config.N0,
        calibration_grid(config.n, config.calib_n_max),
    )


def covert_power_mh(config: NetworkConfig, k: float | None = None) -> float:
    """Per-symbol multi-hop power k n^(...) sqrt(delta/l) (sqrt(2 log n/n))^alpha."""
    if config.alpha <= 2.0:
        raise ConfigurationError("alpha must exceed 2")
    if config.delta == 0.0:
        return 0.0
    kk = mh_constant(config) if k is None else k
    return kk * math.sqrt(config.delta / config.window) * mh_power_shape(config.n, config.kappa, config.alpha)


@dataclass(frozen=True)
class PowerBudget:
    p_mh: float
    p_hc_avg: float
    mimo_scale: float

    def __post_init__(self) -> None:
        if min(self.p_mh, self.p_hc_avg, self.mimo_scale) < 0:
            raise ConfigurationError("power budget entries must be non-negative")


# -- interference at wardens -----------------------------------------------

def warden_interference(
    warden: np.ndarray,
    active_cells: np.ndarray,
    p: float,
    dim: int,
    channel: ChannelModel,
    clearance: float = 0.0,
) -> float:
    """Interference from active cells, each transmitter at its nearest point."""
    cells = np.asarray(active_cells, dtype=np.int64)
    if cells.size == 0 or p == 0.0:
        return 0.0
    d = cell_distances(np.asarray(warden, dtype=float), dim)[0][cells]
    d = np.maximum(d, clearance)
    return float(np.sum(channel.gain(d)) * p)


def phase_interference(
    wardens: np.ndarray,
    forbidden: np.ndarray,
    dim: int,
    p_cell: float,
    channel: ChannelModel,
    chunk: int = 256,
) -> np.ndarray:
    """Per-warden, per-phase interference under 9-TDMA, shape (n_w, 9).

    Every non-forbidden cell of a phase transmits with total power
    ``p_cell`` from its point nearest to the warden.
    """
    w = np.asarray(wardens, dtype=float).reshape(-1, 2)
    out = np.zeros((len(w), 9))
    if len(w) == 0 or p_cell == 0.0:
        return out
    active = np.flatnonzero(~np.asarray(forbidden, dtype=bool))
    if active.size == 0:
        return out
    phases = tdma_phase(dim)[active]
    onehot = np.zeros((active.size, 9))
    onehot[np.arange(active.size), phases] = 1.0
    for s in range(0, len(w), chunk):
        d = cell_distances(w[s : s + chunk], dim)[:, active]
        with np.errstate(divide="ignore"):
            g = channel.G * np.power(d, -channel.alpha)
        out[s : s + chunk] = p_cell * (g @ onehot)
    return out


def node_interference(
    wardens: np.ndarray,
    nodes: np.ndarray,
    power: float,
    channel: ChannelModel,
    groups: np.ndarray | None = None,
    n_groups: int = 1,
    chunk: int = 128,
) -> np.ndarray:
    """Interference at each warden from nodes transmitting with ``power``.

    With ``groups`` the result is split per group, shape (n_w, n_groups).
    """
    w = np.asarray(wardens, dtype=float).reshape(-1, 2)
    x = np.asarray(nodes, dtype=float).reshape(-1, 2)
    g_ids = np.zeros(len(x), dtype=np.int64) if groups is None else np.asarray(groups, dtype=np.int64)
    out = np.zeros((len(w), n_groups))
    if len(w) == 0 or len(x) == 0 or power == 0.0:
        return out
    for s in range(0, len(w), chunk):
        d = np.hypot(w[s : s + chunk, None, 0] - x[None, :, 0], w[s : s + chunk, None, 1] - x[None, :, 1])
        with np.errstate(divide="ignore"):
            g = channel.G * np.power(d, -channel.alpha)
        for r in range(g.shape[0]):
            out[s + r] = np.bincount(g_ids, weights=g[r], minlength=n_groups)
    return out * power


# -- KL accounting --------------------------------------------------------

@dataclass(frozen=True)
class CovertnessReport:
    """Per-warden detectability bounds.

    ``kl_sum`` is half the sum of squared INRs over the worst window;
    ``kl_max`` is (l/2) times the squared peak INR. ``bound`` is the
    quantity compared with ``delta``.
    """

    interference: np.ndarray
    kl_sum: np.ndarray
    kl_max: np.ndarray
    delta: float
    window: float

    @property
    def bound(self) -> np.ndarray:
        return self.kl_sum

    @property
    def passed(self) -> np.ndarray:
        return self.bound <= self.delta * (1.0 + 1e-9)

    @property
    def ok(self) -> bool:
        return bool(np.all(self.passed))

    @property
    def worst(self) -> int:
        return int(np.argmax(self.bound)) if self.bound.size else -1

    @property
    def worst_bound(self) -> float:
        return float(self.bound.max()) if self.bound.size else 0.0

    @property
    def violations(self) -> int:
        return int(np.sum(~self.passed))

    def summary(self) -> dict[str, float | int | bool]:
        return {
            "wardens": int(self.bound.size),
            "worst_warden": self.worst,
            "worst_kl": self.worst_bound,
            "worst_kl_peak": float(self.kl_max.max()) if self.kl_max.size else 0.0,
            "delta": self.delta,
            "violations": self.violations,
            "passed": self.ok,
        }


def window_sum_periodic(x: np.ndarray, window: float) -> np.ndarray:
    """Maximum over placements of the sum of ``window`` consecutive entries.

    Each row of ``x`` is one period of a periodic trace. Windows longer
    than the period wrap around.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    period = x.shape[1]
    if period == 0:
        return np.zeros(x.shape[0])
    L = max(1, int(round(window)))
    full, rem = divmod(L, period)
    total = x.sum(axis=1)
    if rem == 0:
        return full * total
    ext = np.concatenate([x, x[:, :rem]], axis=1)
    c = np.concatenate([np.zeros((x.shape[0], 1)), np.cumsum(ext, axis=1)], axis=1)
    part = (c[:, rem : rem + period] - c[:, :period]).max(axis=1)
    return full * total + part


def kl_report(traces: np.ndarray, config: NetworkConfig | None = None, *, delta: float | None = None,
              window: float | None = None, N0: float | None = None) -> CovertnessReport:
    """KL bounds from per-warden per-slot interference powers.

    ``traces`` has shape (n_wardens, period) and is read as periodic; a
    single column is a stationary per-slot level.
    """
    dl = config.delta if delta is None else delta
    win = config.window if window is None else window
    n0 = config.N0 if N0 is None else N0
    t = np.asarray(traces, dtype=float)
    if t.ndim == 1:
        t = t[:, None]
    if t.shape[0] == 0:
        empty = np.zeros(0)
        return CovertnessReport(empty, empty, empty, dl, win)
    inr2 = (t / n0) ** 2
    kl_sum = 0.5 * window_sum_periodic(inr2, win)
    peak = t.max(axis=1)
    kl_max = 0.5 * win * (peak / n0) ** 2
    return CovertnessReport(peak, kl_sum, kl_max, dl, win)


def kl_rayleigh_closed_form(inr: float) -> float:
    """KL between exponential powers of means I+N0 and N0, in units of N0."""
    return inr - math.log1p(inr)


@functools.lru_cache(maxsize=512)
def worst_case_node_sum(dim: int, width_cells: int, alpha: float, lattice: int = 9) -> float:
    """Largest sum over every cell of max(d, clearance)^-alpha seen by a warden.

    Bounds the interference when all nodes outside the warden's square
    transmit at once. Cells cut by the square contribute from the square's
    boundary, at the warden's clearance.
    """
    pitch = 1.0 / dim
    ci = dim // 2
    off = np.linspace(0.0, pitch, lattice)
    best = 0.0
    for ox in off:
        for oy in off:
            w = np.array([ci * pitch + ox, ci * pitch + oy])
            sq = place_squares(w.reshape(1, 2), width_cells, dim)
            clearance = float(min(w[0] - sq.lo[0, 0], sq.hi[0, 0] - w[0], w[1] - sq.lo[0, 1], sq.hi[0, 1] - w[1]))
            if clearance <= 0.0:
                return math.inf
            d = np.maximum(cell_distances(w, dim)[0], clearance)
            best = max(best, float(np.sum(d ** (-alpha))))
    return best
