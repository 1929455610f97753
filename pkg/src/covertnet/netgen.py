"""Random network instances and the square cell tessellation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Any

import numpy as np

from .errors import ConfigurationError, DegenerateInstanceError


@dataclass(frozen=True)
class NetworkConfig:
    """Network, channel and covertness parameters.

    ``l`` is the warden observation window. When ``l_beta`` is given the
    window follows the law ``l = n**l_beta`` and ``l`` is ignored.
    ``gamma`` defaults to ``kappa / 2``.
    """

    n: float = 4096.0
    kappa: float = 0.5
    alpha: float = 3.5
    delta: float = 0.05
    l: float = 4096.0
    N0: float = 1.0
    G: float = 1.0
    B: float = 1.0
    P: float = 1.0
    gamma: float | None = None
    seed: int = 0
    l_beta: float | None = None
    c_b: float = 3.0 * math.sqrt(2.0)
    hc_levels: int = 5
    eps: float = 0.01
    delta_prime: float = 0.01
    calib_n_max: float = 2.0**16

    def __post_init__(self) -> None:
        if self.gamma is None:
            object.__setattr__(self, "gamma", self.kappa / 2.0)
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float) and not math.isfinite(v):
                raise ConfigurationError(f"{f.name} must be finite, got {v}")
        if not 0.0 < self.kappa < 1.0:
            raise ConfigurationError(f"kappa must lie in (0, 1), got {self.kappa}")
        if self.alpha <= 2.0:
            raise ConfigurationError(f"alpha must exceed 2, got {self.alpha}")
        if self.delta < 0.0:
            raise ConfigurationError(f"delta must be non-negative, got {self.delta}")
        if self.n < 3.0:
            raise ConfigurationError(f"n must be at least 3, got {self.n}")
        if self.l_beta is None and self.l < 1.0:
            raise ConfigurationError(f"l must be at least 1, got {self.l}")
        if self.l_beta is not None and self.l_beta < 0.0:
            raise ConfigurationError(f"l_beta must be non-negative, got {self.l_beta}")
        g = self.gamma
        if g < self.kappa / 2.0 - 1e-12 or g > 0.5 + 1e-12:
            raise ConfigurationError(f"gamma must lie in [kappa/2, 1/2], got {g}")
        if min(self.N0, self.G, self.B, self.P) <= 0.0:
            raise ConfigurationError("N0, G, B and P must be positive")
        if self.c_b <= 0.0:
            raise ConfigurationError("c_b must be positive")
        if self.hc_levels < 0:
            raise ConfigurationError("hc_levels must be non-negative")

    @property
    def window(self) -> float:
        """The resolved observation window l."""
        if self.l_beta is not None:
            return float(self.n) ** self.l_beta
        return float(self.l)

    @property
    def log_n(self) -> float:
        return math.log(self.n)

    @property
    def short_range_snr(self) -> float:
        """s(n) = n^((1/2 - kappa/2)(alpha - 2)) / sqrt(l)."""
        return self.n ** self.power_exponent / math.sqrt(self.window)

    @property
    def power_exponent(self) -> float:
        return (0.5 - self.kappa / 2.0) * (self.alpha - 2.0)

    def with_(self, **changes: Any) -> "NetworkConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["window"] = self.window
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "NetworkConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


def trial_rng(seed: int, trial: int = 0, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for substream ``(trial, stream)`` of ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(int(trial), int(stream)))
    return np.random.Generator(np.random.Philox(ss))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class NetworkInstance:
    legit: np.ndarray
    wardens: np.ndarray
    pairs: np.ndarray = field(default_factory=lambda: np.empty((0, 2), dtype=np.int64))
    unpaired: int = -1

    def __post_init__(self) -> None:
        object.__setattr__(self, "legit", _frozen(np.asarray(self.legit, dtype=float).reshape(-1, 2)))
        object.__setattr__(self, "wardens", _frozen(np.asarray(self.wardens, dtype=float).reshape(-1, 2)))
        object.__setattr__(self, "pairs", _frozen(np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)))

    @property
    def n_l(self) -> int:
        return int(self.legit.shape[0])

    @property
    def n_w(self) -> int:
        return int(self.wardens.shape[0])

    def to_dict(self) -> dict[str, Any]:
        return {
            "legit": self.legit.tolist(),
            "wardens": self.wardens.tolist(),
            "pairs": self.pairs.tolist(),
            "unpaired": self.unpaired,
        }


def sample_ppp(density: float, rng: np.random.Generator) -> np.ndarray:
    """Homogeneous Poisson points of the given density on the unit square."""
    if not math.isfinite(density):
        raise ConfigurationError(f"density must be finite, got {density}")
    if density < 0:
        raise ConfigurationError(f"density must be non-negative, got {density}")
    count = int(rng.poisson(density))
    return rng.random((count, 2))


def pair_nodes(instance: NetworkInstance, rng: np.random.Generator) -> NetworkInstance:
    """Random source-destination matching; an odd node out is left unpaired."""
    n_l = instance.n_l
    if n_l < 2:
        raise DegenerateInstanceError(f"need at least 2 legitimate nodes, got {n_l}")
    perm = rng.permutation(n_l)
    k = n_l // 2
    pairs = perm[: 2 * k].reshape(k, 2)
    unpaired = int(perm[-1]) if n_l % 2 else -1
    return replace(instance, pairs=pairs, unpaired=unpaired)


def generate_instance(config: NetworkConfig, trial: int = 0) -> NetworkInstance:
    """Sample legitimate nodes, wardens and the pairing for one trial."""
    legit = sample_ppp(config.n, trial_rng(config.seed, trial, 0))
    wardens = sample_ppp(config.n**config.kappa, trial_rng(config.seed, trial, 1))
    inst = NetworkInstance(legit=legit, wardens=wardens)
    return pair_nodes(inst, trial_rng(config.seed, trial, 2))


def nominal_side(n: float) -> float:
    """Nominal cell side sqrt(2 log n / n)."""
    if n < 3:
        raise ConfigurationError(f"n must be at least 3, got {n}")
    return math.sqrt(2.0 * math.log(n) / n)


@dataclass(frozen=True)
class CellGrid:
    """Square tessellation with ``dim`` equal-width cells per axis.

    ``side`` is the nominal sqrt(2 log n / n); ``pitch = 1/dim`` is the
    realised cell width. Cell ``(i, j)`` has column ``i`` (x) and row
    ``j`` (y); its flat index is ``j * dim + i``.
    """

    n: float
    side: float
    dim: int
    cell_of: np.ndarray
    counts: np.ndarray

    @property
    def pitch(self) -> float:
        return 1.0 / self.dim

    @property
    def n_cells(self) -> int:
        return self.dim * self.dim

    @property
    def occupancy(self) -> list[np.ndarray]:
        order = np.argsort(self.cell_of, kind="stable")
        bounds = np.concatenate([[0], np.cumsum(self.counts)])
        return [order[bounds[c] : bounds[c + 1]] for c in range(self.n_cells)]

    def cell_of_point(self, x: float, y: float) -> tuple[int, int]:
        i = min(int(math.floor(x * self.dim)), self.dim - 1)
        j = min(int(math.floor(y * self.dim)), self.dim - 1)
        return max(i, 0), max(j, 0)

    def flat(self, i: int, j: int) -> int:
        return j * self.dim + i

    def unflat(self, c: int) -> tuple[int, int]:
        return c % self.dim, c // self.dim

    def cell_indices(self, points: np.ndarray) -> np.ndarray:
        """Flat cell index of every point."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        ij = np.clip(np.floor(pts * self.dim).astype(np.int64), 0, self.dim - 1)
        return ij[:, 1] * self.dim + ij[:, 0]

    @classmethod
    def from_dim(cls, points: np.ndarray, dim: int, n: float | None = None) -> "CellGrid":
        if dim < 1:
            raise ConfigurationError("dim must be positive")
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        ij = np.clip(np.floor(pts * dim).astype(np.int64), 0, dim - 1)
        cell_of = ij[:, 1] * dim + ij[:, 0]
        counts = np.bincount(cell_of, minlength=dim * dim)
        nn = float(n) if n is not None else float(max(len(pts), 3))
        side = nominal_side(nn) if nn >= 3 else 1.0
        return cls(n=nn, side=side, dim=dim, cell_of=_frozen(cell_of), counts=_frozen(counts))


def grid_dim(n: float) -> int:
    # The tolerance keeps exact reciprocals from rounding up an extra cell.
    return max(1, math.ceil(1.0 / nominal_side(n) - 1e-9))


def build_cell_grid(instance: NetworkInstance, n: float) -> CellGrid:
    """Tessellate the unit square for density ``n``."""
    if n < 3:
        raise ConfigurationError(f"n must be at least 3, got {n}")
    return CellGrid.from_dim(instance.legit, grid_dim(n), n)


def occupancy_stats(grid: CellGrid) -> tuple[int, int, bool]:
    """(min count, max count, violation) with the 4 log n occupancy ceiling."""
    counts = grid.counts
    lo, hi = int(counts.min()), int(counts.max())
    violation = lo < 1 or hi > 4.0 * math.log(grid.n)
    return lo, hi, bool(violation)
