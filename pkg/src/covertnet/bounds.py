"""Converse analytics: necessary INR condition, cutset upper bound, regime map
and numerical checks of the KL identities."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

import numpy as np
from scipy import integrate, stats

from .errors import BoundViolation, ConfigurationError
from .netgen import NetworkConfig, nominal_side
from .phy import calibration_grid

EQUAL_POWER_ASSUMPTION = "every active node uses the same average power over any window"


def necessary_inr(delta: float, l: float) -> float:
    """Largest window-averaged INR at a warden compatible with covertness."""
    if delta < 0 or l < 1:
        raise ConfigurationError("need delta >= 0 and l >= 1")
    return math.sqrt(2.0) * math.sqrt(delta / l)


# -- converse power cap ------------------------------------------------------

def ring_limits(n: float, kappa: float) -> tuple[int, int]:
    """First and last ring index of the converse interference sum."""
    i1 = max(1, math.floor(math.sqrt(n / math.log(n))))
    i0 = max(1, math.ceil(n ** (0.5 - kappa / 2.0) - 1e-9))
    return min(i0, i1), i1


def ring_sum(n: float, kappa: float, alpha: float) -> float:
    """Sum over rings i of 16 i log n (i side)^-alpha, the per-unit-power warden INR."""
    i0, i1 = ring_limits(n, kappa)
    i = np.arange(i0, i1 + 1, dtype=float)
    return float(np.sum(16.0 * i * math.log(n) * (i * nominal_side(n)) ** (-alpha)))


def converse_power_shape(n: float, kappa: float, alpha: float) -> float:
    """n^((1/2-kappa/2)(alpha-2)) / log n * (sqrt(2 log n/n))^alpha."""
    return n ** ((0.5 - kappa / 2.0) * (alpha - 2.0)) / math.log(n) * nominal_side(n) ** alpha


def converse_power_exact(config: NetworkConfig) -> float:
    """Power at which the ring sum meets the necessary INR with equality."""
    return (config.N0 * necessary_inr(config.delta, config.window)
            / (config.G * ring_sum(config.n, config.kappa, config.alpha)))


@functools.lru_cache(maxsize=256)
def calibrate_converse_constant(kappa: float, alpha: float, G: float, N0: float, grid: tuple[float, ...]) -> float:
    """Largest ratio of the exact cap to its shape over the grid.

    Taking the maximum keeps the shape-based cap above the exact one at
    every grid point, so the cutset bound built on it stays an upper bound.
    """
    best = 0.0
    for n in grid:
        exact = math.sqrt(2.0) * N0 / (G * ring_sum(n, kappa, alpha))
        best = max(best, exact / converse_power_shape(n, kappa, alpha))
    return best


def converse_constant(config: NetworkConfig) -> float:
    return calibrate_converse_constant(
        config.kappa, config.alpha, config.G, config.N0, calibration_grid(config.n, config.calib_n_max)
    )


def converse_power_cap(config: NetworkConfig, c: float | None = None) -> float:
    """Per-node average power P_CB admitted by the converse."""
    if config.delta == 0.0:
        return 0.0
    cc = converse_constant(config) if c is None else c
    return cc * math.sqrt(config.delta / config.window) * converse_power_shape(config.n, config.kappa, config.alpha)


# -- cutset bound ------------------------------------------------------------

@dataclass(frozen=True)
class CutsetBound:
    """Upper bound on the aggregate throughput across a bisection.

    ``total`` is four times the cut bound ``miso_term + transfer_term``.
    The bound assumes equal average power at every node.
    """

    W: float
    miso_term: float
    transfer_term: float
    total: float
    p_cb: float
    p_cb_prime: float
    n: float
    assumption: str = EQUAL_POWER_ASSUMPTION

    @property
    def cut(self) -> float:
        return self.miso_term + self.transfer_term

    def to_dict(self) -> dict[str, float | str]:
        return {
            "W": self.W,
            "miso_term": self.miso_term,
            "transfer_term": self.transfer_term,
            "total": self.total,
            "p_cb": self.p_cb,
            "p_cb_prime": self.p_cb_prime,
            "assumption": self.assumption,
        }


def transfer_power(p_prime: float, n: float, alpha: float, W: float, k: float = 1.0) -> float:
    """Total power P_cut received beyond the strip of width W."""
    ln = math.log(n)
    if math.isclose(alpha, 3.0, abs_tol=1e-12):
        return k * p_prime * math.sqrt(n) * ln**3
    if alpha < 3.0:
        return k * p_prime * n ** (2.0 - alpha / 2.0) * ln**2
    return k * p_prime * n ** (2.0 - alpha / 2.0) * W ** (3.0 - alpha) * ln**2


def cutset_width(p_prime: float, n: float, alpha: float) -> float:
    """Width of the near-cut strip in unit-area lengths."""
    w_min = 1.0 / math.sqrt(n)
    if p_prime < 1.0:
        return w_min
    # P'^(1/(alpha-2)) is a length in the network scaled to area n.
    w = p_prime ** (1.0 / (alpha - 2.0)) / math.sqrt(n)
    return min(max(w, w_min), 0.5 - w_min)


def cutset_bound(config: NetworkConfig, *, p_cb: float | None = None, c1: float = 1.0, k: float = 1.0) -> CutsetBound:
    """Cutset upper bound on T with the strip width chosen from P'_CB."""
    n, alpha = config.n, config.alpha
    if alpha <= 2.0:
        raise ConfigurationError(f"cutset bound needs alpha > 2, got {alpha}")
    p = converse_power_cap(config) if p_cb is None else p_cb
    p_prime = config.G * n ** (alpha / 2.0) * p / (config.N0 * config.B)
    W = cutset_width(p_prime, n, alpha)
    w_min = 1.0 / math.sqrt(n)
    if p_prime < 1.0:
        miso = 0.0
    else:
        snr = c1 * p_prime * n ** (1.0 + alpha * (0.5 + config.delta_prime))
        miso = (W - w_min) * n * math.log(n) * math.log1p(snr)
    transfer = n**config.eps * transfer_power(p_prime, n, alpha, W, k)
    return CutsetBound(W=W, miso_term=miso, transfer_term=transfer, total=4.0 * (miso + transfer),
                       p_cb=p, p_cb_prime=p_prime, n=n)


# -- regime map --------------------------------------------------------------

REGIME_SCHEME = {
    "hc-vanishing": "hc",
    "hc-nonvanishing": "hc",
    "mh": "mh",
    "hybrid": "hybrid",
}


@dataclass(frozen=True)
class RegimeClassification:
    label: str
    exponent: float
    scheme: str
    snr_exponent: float
    vanishing: bool


def snr_exponent(config: NetworkConfig) -> float:
    """d log s / d log n under the configured window law."""
    beta = config.l_beta if config.l_beta is not None else 0.0
    return config.power_exponent - beta / 2.0


def classify_regime(config: NetworkConfig) -> RegimeClassification:
    """Operating regime, predicted throughput exponent and winning scheme.

    A fixed window ``l`` counts as ``l = n^0``.
    """
    sigma = snr_exponent(config)
    vanishing = sigma < 0.0
    alpha = config.alpha
    if alpha <= 3.0:
        label = "hc-vanishing" if vanishing else "hc-nonvanishing"
        exponent = 2.0 - alpha / 2.0 + sigma
    elif vanishing:
        label, exponent = "mh", 0.5 + sigma
    else:
        label, exponent = "hybrid", 0.5 + sigma / (alpha - 2.0)
    return RegimeClassification(label, exponent, REGIME_SCHEME[label], sigma, vanishing)


# -- KL identities -----------------------------------------------------------

def _kl_quad(logf: Callable[[float], float], logg: Callable[[float], float], lo: float, hi: float,
             breakpoints: Iterable[float]) -> float:
    def integrand(x: float) -> float:
        lf = logf(x)
        if lf == -math.inf:
            return 0.0
        lg = logg(x)
        if lg == -math.inf:
            raise ZeroDivisionError
        return math.exp(lf) * (lf - lg)

    edges = [lo, *sorted(b for b in breakpoints if lo < b < hi), hi]
    total = 0.0
    try:
        for a, b in zip(edges[:-1], edges[1:]):
            val, _ = integrate.quad(integrand, a, b, limit=400, epsabs=1e-12, epsrel=1e-10)
            total += val
    except ZeroDivisionError:
        return math.inf
    return total if math.isfinite(total) else math.inf


def kl_square_identity(f, g) -> tuple[float, float]:
    """D(f||g) and the divergence between the laws of the squares, by quadrature.

    ``f`` and ``g`` are distributions on [0, inf) with ``logpdf``,
    ``support`` and ``median`` methods, such as frozen ``scipy.stats``
    objects. The law of Z^2 has log-density logpdf(sqrt(y)) - log(2 sqrt(y)).
    Support of ``f`` outside that of ``g`` gives an infinite divergence.
    """
    lo, hi = (float(v) for v in f.support())
    if lo < 0.0:
        raise ConfigurationError("densities must be supported on [0, inf)")
    m = float(f.median())
    marks = (m / 4.0, m, 4.0 * m)

    def lf(x: float) -> float:
        return float(f.logpdf(x))

    def lg(x: float) -> float:
        return float(g.logpdf(x))

    def sq(logpdf: Callable[[float], float]) -> Callable[[float], float]:
        def h(y: float) -> float:
            if y <= 0.0:
                return -math.inf
            r = math.sqrt(y)
            return logpdf(r) - math.log(2.0 * r)
        return h

    raw = _kl_quad(lf, lg, lo, hi, marks)
    squared = _kl_quad(sq(lf), sq(lg), lo * lo, hi * hi, tuple(x * x for x in marks))
    return raw, squared


def rayleigh_magnitude(power: float):
    """Law of |Z| for circular Gaussian Z with E|Z|^2 = power."""
    return stats.rayleigh(scale=math.sqrt(power / 2.0))


# -- achievability against the converse -----------------------------------

@dataclass(frozen=True)
class BoundComparison:
    bound: float
    throughput: dict[str, float]
    gap: dict[str, float]

    @property
    def ok(self) -> bool:
        return all(t <= self.bound for t in self.throughput.values())


def achievability_vs_bound(results: Mapping[str, float] | Iterable, bound: CutsetBound) -> BoundComparison:
    """Check every throughput against the bound; gaps are bound / T.

    ``results`` maps scheme names to throughputs or is an iterable of
    objects with ``scheme`` and ``throughput`` attributes.
    """
    if isinstance(results, Mapping):
        tp = {str(k): float(v) for k, v in results.items()}
    else:
        tp = {r.scheme: float(r.throughput) for r in results}
    gap = {k: (bound.total / t if t > 0 else math.inf) for k, t in tp.items()}
    cmp = BoundComparison(bound=bound.total, throughput=tp, gap=gap)
    if not cmp.ok:
        worst = max(tp, key=lambda k: tp[k] / bound.total if bound.total > 0 else math.inf)
        raise BoundViolation(f"{worst}: throughput {tp[worst]:.6g} exceeds cutset bound {bound.total:.6g} at n={bound.n:g}")
    return cmp
