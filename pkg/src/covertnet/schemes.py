"""The three covert schemes: detoured multi-hop, modified hierarchical
cooperation and the hybrid of both."""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import ConfigurationError, CovertnessViolation, ScheduleError
from .netgen import CellGrid, NetworkConfig, NetworkInstance, build_cell_grid, grid_dim, nominal_side
from .phy import (
    SAFETY,
    ChannelModel,
    CovertnessReport,
    calibration_grid,
    covert_budget,
    covert_power_mh,
    finite_constant,
    hop_rate,
    kl_report,
    mh_constant,
    node_interference,
    phase_interference,
    worst_case_node_sum,
    worst_case_sum,
)
from .preserve import build_expanded_regions, place_squares, points_in_regions, region_width_cells
from .route import RoutePlan, max_cell_load, outage_fraction, route_instance

SCHEMES = ("mh", "hc", "hybrid")


class RegimeWarning(UserWarning):
    """A scheme was run outside the regime it is designed for."""


@dataclass(frozen=True)
class SchemeResult:
    """Outcome of one scheme on one instance.

    ``throughput`` is ``rate`` times the number of served pairs.
    """

    scheme: str
    rate: float
    throughput: float
    outage: float
    served: int
    n_pairs: int
    covertness: CovertnessReport
    params: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "scheme": self.scheme,
            "rate": self.rate,
            "throughput": self.throughput,
            "outage": self.outage,
            "served": self.served,
            "n_pairs": self.n_pairs,
            "covertness": self.covertness.summary(),
            "params": dict(self.params),
        }


def _assert_covert(report: CovertnessReport, scheme: str, config: NetworkConfig) -> None:
    if not report.ok:
        raise CovertnessViolation(
            f"{scheme}: warden {report.worst} KL bound {report.worst_bound:.6g} exceeds delta={config.delta} "
            f"(config={config.to_dict()})"
        )


# -- detoured multi-hop ------------------------------------------------------

def _multihop(
    scheme: str,
    config: NetworkConfig,
    instance: NetworkInstance,
    grid: CellGrid,
    width_cells: int,
    p_cell: float,
    array: float,
    efficiency: float,
    check: bool,
    extra: dict[str, Any],
) -> SchemeResult:
    channel = ChannelModel.from_config(config)
    regions = place_squares(instance.wardens, width_cells, grid.dim)
    expanded = build_expanded_regions(regions, grid)
    plan: RoutePlan = route_instance(instance, grid, expanded, width_cells)
    traces = phase_interference(instance.wardens, expanded.forbidden, grid.dim, p_cell, channel)
    report = kl_report(traces, config)
    if check:
        _assert_covert(report, scheme, config)
    per_hop = array * hop_rate(p_cell, config.n, channel, side=grid.pitch)
    load = max_cell_load(plan)
    served = plan.served
    rate = efficiency * per_hop / load if served > 0 and load > 0 else 0.0
    params = {
        "cell_power": p_cell,
        "hop_rate": per_hop,
        "max_load": load,
        "grid_dim": grid.dim,
        "region_cells": width_cells,
        "expanded_regions": len(expanded),
        "deep_detours": plan.deep_detours,
        "max_detour_depth": int(plan.depth.max()) if plan.depth.size else 0,
    }
    params.update(extra)
    return SchemeResult(
        scheme=scheme,
        rate=rate,
        throughput=rate * served,
        outage=outage_fraction(plan, instance),
        served=served,
        n_pairs=plan.n_pairs,
        covertness=report,
        params=params,
    )


def run_detoured_mh(config: NetworkConfig, instance: NetworkInstance, *, check: bool = True) -> SchemeResult:
    """Multi-hop over cells with detours around expanded preservation regions."""
    grid = build_cell_grid(instance, config.n)
    width = region_width_cells(config.n, config.gamma, config.c_b)
    p = covert_power_mh(config)
    return _multihop("mh", config, instance, grid, width, p, 1.0, 1.0, check, {"p_mh": p, "k": mh_constant(config)})


# -- hierarchical cooperation: exponents and schedules --------------------

def hc_map(b: float, gamma_p: float) -> float:
    return gamma_p / (2.0 - b) + 1.0 - gamma_p


def hc_scaled_map(b: float, gamma_p: float) -> float:
    """One cooperation level with MIMO power scaled by sqrt(M/n).

    Balancing the local phases against the MIMO phase gives
    M = n^((1 + 2 gamma_p)/(5 - 2b)); for gamma_p = 1 this is
    M = n^(3/(5-2b)) with exponent 9/(10-4b) - 1/2.
    """
    return 3.0 * (1.0 + 2.0 * gamma_p) / (2.0 * (5.0 - 2.0 * b)) + 0.5 - gamma_p


def hc_exponent_recursion(b0: float, gamma_p: float, iterations: int, *, scaled: bool = False) -> list[float]:
    """Throughput exponents b_0, b_1, ... of successive cooperation levels."""
    if b0 >= 1.0:
        raise ConfigurationError(f"starting exponent must be below 1, got {b0}")
    if gamma_p < 1.0:
        raise ConfigurationError(f"gamma_p must be at least 1, got {gamma_p}")
    step = hc_scaled_map if scaled else hc_map
    seq = [float(b0)]
    for _ in range(int(iterations)):
        seq.append(step(seq[-1], gamma_p))
    return seq


@dataclass(frozen=True)
class HcRecursionState:
    b: float
    gamma_p: float
    iteration: int
    M: float


@dataclass(frozen=True)
class MimoCheck:
    with_scaling: float
    without_scaling: float
    m_exponent_with: float
    m_exponent_without: float


def mimo_power_check(b: float, *, gamma_p: float = 1.0) -> MimoCheck:
    """One-level exponents with and without the sqrt(M/n) MIMO power factor."""
    if not 0.0 <= b < 1.0:
        raise ConfigurationError(f"b must lie in [0, 1), got {b}")
    return MimoCheck(
        with_scaling=hc_scaled_map(b, gamma_p),
        without_scaling=hc_map(b, gamma_p),
        m_exponent_with=(1.0 + 2.0 * gamma_p) / (5.0 - 2.0 * b),
        m_exponent_without=gamma_p / (2.0 - b),
    )


@dataclass(frozen=True)
class MimoSchedule:
    """Slots of each cluster's MIMO transmissions within ``n_slots``."""

    M: int
    n_slots: int
    window: int
    clusters: tuple[np.ndarray, ...]

    def window_counts(self, cluster: int = 0) -> tuple[int, int]:
        """(min, max) transmissions over every cyclic window of length ``window``."""
        occ = np.zeros(self.n_slots, dtype=np.int64)
        occ[self.clusters[cluster]] = 1
        return _cyclic_window_range(occ, self.window)

    def bounds(self) -> tuple[int, int]:
        ratio = self.window * self.M / self.n_slots
        return math.floor(ratio) - 1, math.ceil(ratio) + 1


def _cyclic_window_range(occ: np.ndarray, window: int) -> tuple[int, int]:
    n = occ.size
    full, rem = divmod(int(window), n)
    base = full * int(occ.sum())
    if rem == 0:
        return base, base
    ext = np.concatenate([occ, occ[:rem]])
    c = np.concatenate([[0], np.cumsum(ext)])
    sums = c[rem : rem + n] - c[:n]
    return base + int(sums.min()), base + int(sums.max())


def build_mimo_schedule(M: int, n_slots: int, l: int, n_clusters: int = 1) -> MimoSchedule:
    """Spread each cluster's M transmissions evenly over ``n_slots``.

    Cluster ``c`` uses slots floor((k + c/n_clusters) n_slots / M); with
    ``n_clusters * M == n_slots`` this is a round robin without collisions.
    """
    M, n_slots = int(M), int(n_slots)
    if M < 0 or n_slots < 1:
        raise ScheduleError("M must be non-negative and n_slots positive")
    if M > n_slots:
        raise ScheduleError(f"cannot place {M} transmissions in {n_slots} slots")
    clusters = []
    k = np.arange(M)
    for c in range(int(n_clusters)):
        slots = np.floor((k + c / n_clusters) * n_slots / max(M, 1)).astype(np.int64) % n_slots
        clusters.append(np.sort(slots))
    return MimoSchedule(M=M, n_slots=n_slots, window=int(l), clusters=tuple(clusters))


# -- modified hierarchical cooperation -------------------------------------

def hc_power_shape(n: float, kappa: float, alpha: float) -> float:
    """The constant-free average-power cap n^(...)/(2 log n) (sqrt(2 log n/n))^alpha."""
    return n ** ((0.5 - kappa / 2.0) * (alpha - 2.0)) / (2.0 * math.log(n)) * nominal_side(n) ** alpha


@functools.lru_cache(maxsize=256)
def calibrate_hc_constant(kappa: float, alpha: float, gamma: float, c_b: float, G: float, N0: float, grid: tuple[float, ...]) -> float:
    """Constant of the HC cap so that every node at the cap stays covert.

    Each cell is charged 4 log n nodes at its nearest point to the warden.
    """
    best = math.inf
    for n in grid:
        s = worst_case_node_sum(grid_dim(n), region_width_cells(n, gamma, c_b), alpha)
        if s > 0.0:
            best = min(best, math.sqrt(2.0) * N0 / (G * 4.0 * math.log(n) * hc_power_shape(n, kappa, alpha) * s))
    return SAFETY * finite_constant(best, c_b)


def hc_constant(config: NetworkConfig) -> float:
    return calibrate_hc_constant(
        config.kappa, config.alpha, config.gamma, config.c_b, config.G, config.N0,
        calibration_grid(config.n, config.calib_n_max),
    )


def hc_average_cap(config: NetworkConfig) -> float:
    if config.delta == 0.0:
        return 0.0
    return hc_constant(config) * math.sqrt(config.delta / config.window) * hc_power_shape(config.n, config.kappa, config.alpha)


def hc_throughput(n: float, cap: float, config: NetworkConfig, levels: int) -> tuple[float, list[float], float]:
    """Aggregate HC throughput for an average-power cap.

    Starts from TDMA between single pairs at distance up to sqrt(2) and
    applies ``levels`` cooperation levels with scaled MIMO power.
    Returns (throughput, exponents, gamma_p).
    """
    if cap <= 0.0:
        return 0.0, [], math.inf
    gamma_p = max(1.0, math.log(config.P / cap) / math.log(n))
    cap = min(cap, config.P / n)
    t0 = math.log1p(config.G * n * cap * 2.0 ** (-config.alpha / 2.0) / config.N0)
    seq = hc_exponent_recursion(1.0 - gamma_p, gamma_p, levels, scaled=True)
    return t0 * n ** (seq[-1] - seq[0]), seq, gamma_p


def run_modified_hc(config: NetworkConfig, instance: NetworkInstance, *, check: bool = True) -> SchemeResult:
    """Modified hierarchical cooperation, evaluated analytically.

    Nodes inside preservation squares are silent and their pairs are in
    outage. The cooperative throughput is scaled by the fraction of
    surviving nodes. Covertness is checked for the local phases (every
    surviving node at the average cap) and for the MIMO phase (round-robin
    clusters at power cap * sqrt(n/M)).
    """
    channel = ChannelModel.from_config(config)
    n = config.n
    dim = grid_dim(n)
    width = region_width_cells(n, config.gamma, config.c_b)
    regions = place_squares(instance.wardens, width, dim)
    silent = points_in_regions(instance.legit, regions)
    active = ~silent
    pairs = instance.pairs
    pair_out = silent[pairs[:, 0]] | silent[pairs[:, 1]] if len(pairs) else np.zeros(0, bool)
    served = int(len(pairs) - pair_out.sum())
    surviving = float(active.mean()) if instance.n_l else 0.0

    cap = hc_average_cap(config)
    total, seq, gamma_p = hc_throughput(n, cap, config, config.hc_levels)
    top_b = seq[-2] if len(seq) >= 2 else (seq[-1] if seq else 0.0)
    m_top = n ** ((1.0 + 2.0 * gamma_p) / (5.0 - 2.0 * top_b)) if seq else 1.0
    n_active = int(active.sum())
    m_top = float(min(max(m_top, 1.0), max(n_active, 1)))

    nodes = instance.legit[active]
    steady = node_interference(instance.wardens, nodes, cap, channel)
    dim_c = max(1, int(round(math.sqrt(n / m_top))))
    groups = CellGrid.from_dim(nodes, dim_c, n).cell_of if len(nodes) else np.zeros(0, np.int64)
    p_mimo = cap * math.sqrt(n / m_top)
    burst = node_interference(instance.wardens, nodes, p_mimo, channel, groups=groups, n_groups=dim_c * dim_c)
    r_steady = kl_report(steady, config)
    r_burst = kl_report(burst, config)
    report = CovertnessReport(
        interference=np.maximum(r_steady.interference, r_burst.interference),
        kl_sum=np.maximum(r_steady.kl_sum, r_burst.kl_sum),
        kl_max=np.maximum(r_steady.kl_max, r_burst.kl_max),
        delta=config.delta,
        window=config.window,
    )
    if check:
        _assert_covert(report, "hc", config)

    throughput = surviving * total if served > 0 else 0.0
    rate = throughput / served if served > 0 else 0.0
    outage = 2.0 * float(pair_out.sum()) / instance.n_l if instance.n_l else 0.0
    return SchemeResult(
        scheme="hc",
        rate=rate,
        throughput=rate * served,
        outage=outage,
        served=served,
        n_pairs=len(pairs),
        covertness=report,
        params={
            "p_hc_avg": cap,
            "c_hc": hc_constant(config),
            "gamma_p": gamma_p,
            "exponents": seq,
            "levels": config.hc_levels,
            "residual": (2.0 - gamma_p) - seq[-1] if seq else None,
            "M": m_top,
            "mimo_scale": math.sqrt(m_top / n),
            "surviving": surviving,
            "region_cells": width,
        },
    )


# -- hybrid -----------------------------------------------------------------

def hybrid_cluster_size(config: NetworkConfig) -> float:
    """M = s^(1/(alpha/2 - 1)), at least 1."""
    s = config.short_range_snr
    if s <= 1.0:
        return 1.0
    return s ** (1.0 / (config.alpha / 2.0 - 1.0))


def hybrid_dim(n: float, M: float) -> int:
    area = max(M, 2.0 * math.log(n)) / n
    return max(1, math.ceil(1.0 / math.sqrt(area) - 1e-9))


def hybrid_region_cells(config: NetworkConfig, M: float) -> int:
    n = config.n
    raw = config.c_b * n ** (-config.gamma) * math.sqrt(math.log(n))
    side_h = math.sqrt(max(M, 2.0 * math.log(n)) / n)
    return max(1, math.ceil(raw / side_h - 1e-9))


def local_efficiency(M: float, levels: int) -> float:
    """Share of time left for the global hop after local cooperation.

    Distributing and collecting a block inside a cluster of M nodes at
    throughput M^b takes M^(1-b) global-hop durations, twice per hop.
    """
    if M <= 1.0:
        return 1.0
    b = hc_exponent_recursion(0.0, 1.0, levels)[-1]
    return 1.0 / (1.0 + 2.0 * M ** (1.0 - b))


def hybrid_power_shape(config: NetworkConfig) -> float:
    """Constant-free total MIMO power of one hybrid cell, M times the per-node cap."""
    return hybrid_cluster_size(config) * hc_power_shape(config.n, config.kappa, config.alpha)


@functools.lru_cache(maxsize=256)
def _calibrate_hybrid(key: tuple) -> float:
    base = NetworkConfig(**dict(key))
    best = math.inf
    for n in calibration_grid(base.n, base.calib_n_max):
        cfg = base.with_(n=n)
        M = hybrid_cluster_size(cfg)
        s = worst_case_sum(hybrid_dim(n, M), hybrid_region_cells(cfg, M), cfg.alpha)
        if s > 0.0:
            best = min(best, math.sqrt(2.0) * cfg.N0 / (cfg.G * hybrid_power_shape(cfg) * s))
    return SAFETY * finite_constant(best, base.c_b)


def hybrid_constant(config: NetworkConfig) -> float:
    keep = ("n", "kappa", "alpha", "l", "l_beta", "gamma", "c_b", "G", "N0", "calib_n_max")
    return _calibrate_hybrid(tuple((k, getattr(config, k)) for k in keep))


def run_detoured_hybrid(config: NetworkConfig, instance: NetworkInstance, *, check: bool = True) -> SchemeResult:
    """Local cooperation inside cells of M nodes, multi-hop MIMO between cells."""
    if config.short_range_snr < 1.0:
        warnings.warn("hybrid scheme run with vanishing short-range SNR", RegimeWarning, stacklevel=2)
    M = hybrid_cluster_size(config)
    if M <= 1.0:
        res = run_detoured_mh(config, instance, check=check)
        return SchemeResult("hybrid", res.rate, res.throughput, res.outage, res.served, res.n_pairs,
                            res.covertness, {**res.params, "M": 1.0, "degenerate": True})
    dim = hybrid_dim(config.n, M)
    grid = CellGrid.from_dim(instance.legit, dim, config.n)
    width = hybrid_region_cells(config, M)
    p_cell = hybrid_constant(config) * math.sqrt(config.delta / config.window) * hybrid_power_shape(config)
    per_cell = config.n / (dim * dim)
    array = max(1.0, min(M, per_cell))
    eff = local_efficiency(array, config.hc_levels)
    return _multihop("hybrid", config, instance, grid, width, p_cell, array, eff, check,
                     {"M": M, "array": array, "local_efficiency": eff, "c_hybrid": hybrid_constant(config),
                      "degenerate": False})


RUNNERS = {"mh": run_detoured_mh, "hc": run_modified_hc, "hybrid": run_detoured_hybrid}


def run_scheme(name: str, config: NetworkConfig, instance: NetworkInstance, *, check: bool = True) -> SchemeResult:
    try:
        runner = RUNNERS[name]
    except KeyError:
        raise ConfigurationError(f"unknown scheme {name!r}; expected one of {SCHEMES}") from None
    return runner(config, instance, check=check)
