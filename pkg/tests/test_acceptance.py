"""Acceptance criteria 1-12, one summary line each at the end of the run.

Criteria that do not hold at these sizes keep their stated tolerance and
are marked xfail(strict=True), so they still run and are reported.
"""

import itertools
import math
import time

import numpy as np
import pytest
from scipy import stats

from covertnet.bounds import classify_regime, cutset_bound, kl_square_identity, rayleigh_magnitude
from covertnet.errors import InsufficientDataError
from covertnet.harness import fit_exponent
from covertnet.netgen import NetworkConfig, build_cell_grid, generate_instance, occupancy_stats
from covertnet.phy import kl_report
from covertnet.preserve import build_expanded_regions, place_squares, region_width_cells
from covertnet.route import max_cell_load, route_instance
from covertnet.schemes import SCHEMES, hc_exponent_recursion, run_scheme

pytestmark = pytest.mark.acceptance

C_B = 0.01
SWEEP = tuple(2.0**e for e in range(10, 17))
TRIALS = 10


def sweep_trials(n):
    # Small networks are cheap and nearly saturated with outage, so their
    # means need more trials to resolve the steps between sizes.
    return 200 if n <= 2.0**12 else 40


def _rows(scheme, *, kappa, alpha, l=None, l_beta=None, gamma=None, trials=sweep_trials, ns=SWEEP):
    rows = []
    for n in ns:
        cfg = NetworkConfig(n=n, kappa=kappa, alpha=alpha, l=l if l_beta is None else 1.0, l_beta=l_beta,
                            gamma=gamma, c_b=C_B, seed=7)
        for t in range(trials(n) if callable(trials) else trials):
            r = run_scheme(scheme, cfg, generate_instance(cfg, t))
            rows.append({"n": n, "scheme": scheme, "throughput": r.throughput, "outage": r.outage})
    return rows


# -- 1 and 7a share the covertness grid ---------------------------------------------

@pytest.fixture(scope="module")
def grid_runs():
    start = time.perf_counter()
    out = []
    for n, kappa, alpha in itertools.product((2.0**10, 2.0**12, 2.0**14), (0.25, 0.5, 0.75), (2.5, 3.0, 3.5, 4.0)):
        cfg = NetworkConfig(n=n, kappa=kappa, alpha=alpha, delta=0.05, l_beta=1.0, c_b=C_B, seed=1)
        for t in range(TRIALS):
            inst = generate_instance(cfg, t)
            out.append((cfg, [run_scheme(s, cfg, inst, check=False) for s in SCHEMES]))
    return out, time.perf_counter() - start


def test_criterion_01_covertness(grid_runs, acceptance):
    runs, elapsed = grid_runs
    violations = sum(r.covertness.violations for _, rs in runs for r in rs)
    worst = max(r.covertness.worst_bound for _, rs in runs for r in rs)
    ok = violations == 0 and elapsed < 600
    acceptance(1, ok, f"{len(runs)} instances x 3 schemes, {violations} violations, max KL {worst:.3g} "
                      f"(delta 0.05), {elapsed:.0f} s")
    assert ok


# -- 2 ----------------------------------------------------------------------------------

def _occupancy_violation_rate(n, trials=100):
    cfg = NetworkConfig(n=n, seed=1)
    return np.mean([occupancy_stats(build_cell_grid(generate_instance(cfg, t), n))[2] for t in range(trials)])


@pytest.mark.xfail(strict=True, reason="4 log n ceiling is exceeded in about 6% of trials at 2^16; "
                                       "the union bound over cells grows with n")
def test_criterion_02_occupancy(acceptance):
    rates = [_occupancy_violation_rate(n) for n in SWEEP]
    good = 1 - rates[-1]
    decreasing = all(b < a for a, b in zip(rates, rates[1:]))
    ok = good >= 0.95 and decreasing
    acceptance(2, ok, f"success {good:.2f} at 2^16, violation rates {[round(float(r), 2) for r in rates]}")
    assert ok


# -- 3 ----------------------------------------------------------------------------------

def _mean_load(n, kappa=0.5, trials=5):
    gamma = kappa / 2 + 0.05
    cfg = NetworkConfig(n=n, kappa=kappa, gamma=gamma, c_b=C_B, seed=3)
    loads = []
    for t in range(trials):
        inst = generate_instance(cfg, t)
        grid = build_cell_grid(inst, n)
        width = region_width_cells(n, gamma, C_B)
        expanded = build_expanded_regions(place_squares(inst.wardens, width, grid.dim), grid)
        loads.append(max_cell_load(route_instance(inst, grid, expanded, width)))
    return float(np.mean(loads))


@pytest.mark.xfail(strict=True, reason="one-cell regions of n^kappa wardens forbid most cells at small n, "
                                       "so load starts near zero and the ratio slope is about 1")
def test_criterion_03_load(acceptance):
    ratio = [_mean_load(n) / (math.sqrt(n) * math.log(n) ** 1.5) for n in SWEEP]
    pts = [(n, r) for n, r in zip(SWEEP, ratio) if r > 0]
    slope = stats.linregress(np.log([p[0] for p in pts]), np.log([p[1] for p in pts])).slope
    ok = -0.1 <= slope <= 0.05
    acceptance(3, ok, f"load-ratio slope {slope:.3f}, want [-0.1, 0.05]")
    assert ok


# -- 4, 5, 6 ----------------------------------------------------------------------

def _exponent_fit(num, scheme, theory, acceptance, **kw):
    res = fit_exponent(_rows(scheme, **kw), theory=theory, tolerance=0.15, scheme=scheme)
    acceptance(num, res.passed, f"{scheme} exponent {res.exponent:.3f} (se {res.stderr:.3f}) vs {theory} +- 0.15")
    assert res.passed


def test_criterion_04_mh(acceptance):
    _exponent_fit(4, "mh", 0.375, acceptance, kappa=0.5, alpha=3.5, l_beta=1.0)


def test_criterion_05_hc(acceptance):
    _exponent_fit(5, "hc", 0.375, acceptance, kappa=0.5, alpha=2.5, l_beta=1.0)


@pytest.mark.xfail(strict=True, reason="at l = 1 the n/M hybrid cells number n^kappa, "
                                       "as many as the wardens, so almost every pair is in outage")
def test_criterion_06_hybrid(acceptance):
    try:
        _exponent_fit(6, "hybrid", 0.75, acceptance, kappa=0.5, alpha=4.0, l=1.0)
    except InsufficientDataError as exc:
        acceptance(6, False, f"hybrid throughput zero at most n: {exc}")
        raise


# -- 7 ------------------------------------------------------------------------------

def test_criterion_07a_dominance(grid_runs, acceptance):
    runs, _ = grid_runs
    worst = 0.0
    for cfg, rs in runs:
        total = cutset_bound(cfg).total
        worst = max(worst, max(r.throughput for r in rs) / total)
    acceptance(7, worst <= 1.0, f"dominance: max T / bound {worst:.3g}")
    assert worst <= 1.0


@pytest.mark.xfail(strict=True, reason="polylog factors of the bound dominate the finite-n slope")
def test_criterion_07b_bound_exponent(acceptance):
    misses = []
    for kappa, alpha in itertools.product((0.25, 0.5, 0.75), (2.5, 3.0, 3.5, 4.0)):
        cfgs = [NetworkConfig(n=n, kappa=kappa, alpha=alpha, l_beta=1.0) for n in SWEEP]
        slope = stats.linregress(np.log(SWEEP), np.log([cutset_bound(c).total for c in cfgs])).slope
        theory = classify_regime(cfgs[-1]).exponent
        if abs(slope - theory) > 0.1:
            misses.append(f"k={kappa},a={alpha}: {slope:.2f} vs {theory:.3f}")
    acceptance(7, not misses, f"bound exponent: {12 - len(misses)}/12 within 0.1" +
               (f" (e.g. {misses[0]})" if misses else ""))
    assert not misses


# -- 8 ------------------------------------------------------------------------------

def test_criterion_08a_fixed_point(acceptance):
    errs = {(g, b0): abs(hc_exponent_recursion(b0, g, 200)[-1] - (2 - g))
            for g in (1.25, 1.5) for b0 in (0.0, 1 - g)}
    worst = max(errs.values())
    acceptance(8, worst <= 1e-6, f"gamma_p 1.25/1.5 max error {worst:.1e}")
    assert worst <= 1e-6


@pytest.mark.xfail(strict=True, reason="gamma_p = 1 is a neutral fixed point, 1 - b_k = 1/(k+1)")
def test_criterion_08b_gamma_one(acceptance):
    # both starts coincide: 1 - gamma_p = 0
    errs = [abs(hc_exponent_recursion(0.0, 1.0, 200)[-1] - 1.0)]
    acceptance(8, max(errs) <= 1e-6, f"gamma_p 1 error {max(errs):.1e} after 200")
    assert max(errs) <= 1e-6


@pytest.mark.xfail(strict=True, reason="the scaled map gives 1/(1-b_k) = 1 + 2k/3, so b_30 = 20/21")
def test_criterion_08c_scaled_map(acceptance):
    b = hc_exponent_recursion(0.0, 1.0, 30, scaled=True)[-1]
    acceptance(8, b > 0.99, f"scaled map b_30 = {b:.4f}, want > 0.99")
    assert b > 0.99


# -- 9 ------------------------------------------------------------------------------

def test_criterion_09_kl_identity(acceptance):
    worst = 0.0
    for inr in (0.01, 0.1, 0.5, 1.0, 2.0):
        raw, sq = kl_square_identity(rayleigh_magnitude(1.0 + inr), rayleigh_magnitude(1.0))
        closed = inr - math.log1p(inr)
        worst = max(worst, abs(raw - sq), abs(raw - closed), abs(sq - closed))
    acceptance(9, worst <= 1e-3, f"max deviation {worst:.1e}")
    assert worst <= 1e-3


# -- 10 -----------------------------------------------------------------------------

OUTAGE_SETTINGS = {
    "mh": dict(kappa=0.5, alpha=3.5, l_beta=1.0),
    "hc": dict(kappa=0.5, alpha=2.5, l_beta=1.0),
    "hybrid": dict(kappa=0.5, alpha=4.0, l=1.0),
}


def _outage_trend(scheme):
    rows = _rows(scheme, gamma=OUTAGE_SETTINGS[scheme]["kappa"] / 2 + 0.05, **OUTAGE_SETTINGS[scheme])
    means = [np.mean([r["outage"] for r in rows if r["n"] == n]) for n in SWEEP]
    return means, all(b < a for a, b in zip(means, means[1:]))


@pytest.mark.parametrize("scheme", [
    "mh", "hc",
    pytest.param("hybrid", marks=pytest.mark.xfail(strict=True, reason="hybrid outage is near total at l = 1")),
])
def test_criterion_10_outage(scheme, acceptance):
    means, ok = _outage_trend(scheme)
    acceptance(10, ok, f"{scheme} outage {[round(float(m), 3) for m in means]}")
    assert ok


# -- 11 -----------------------------------------------------------------------------

def test_criterion_11_bursty(acceptance):
    l, energy = 1000, 5.0
    ratios = {}
    for frac in (0.01, 0.05, 0.1, 0.2):
        k = int(round(frac * l))
        bursty = np.zeros((1, l))
        bursty[0, :k] = energy / k
        spread = np.full((1, l), energy / l)
        ratios[frac] = (kl_report(bursty, delta=1, window=l, N0=1).kl_sum[0]
                        / kl_report(spread, delta=1, window=l, N0=1).kl_sum[0])
    ok = all(r >= 5 and r == pytest.approx(1 / f) for f, r in ratios.items())
    acceptance(11, ok, "ratios " + ", ".join(f"{f}: {r:.2f}" for f, r in ratios.items()))
    assert ok


# -- 12 -----------------------------------------------------------------------------

CORNERS = {
    "hc-vanishing": dict(alpha=2.5, l_beta=2.0),
    "hc-nonvanishing": dict(alpha=2.5, l=1.0),
    "mh": dict(alpha=4.0, l_beta=3.0),
    "hybrid": dict(alpha=4.0, l=1.0),
}


def _winner(corner):
    exps = {}
    for s in SCHEMES:
        try:
            exps[s] = fit_exponent(_rows(s, kappa=0.5, trials=5, **CORNERS[corner]), scheme=s).exponent
        except InsufficientDataError:
            exps[s] = -math.inf
    # ties resolve in SCHEMES order
    return max(SCHEMES, key=lambda s: exps[s]), exps


@pytest.mark.parametrize("corner", [
    "hc-vanishing", "hc-nonvanishing", "mh",
    pytest.param("hybrid", marks=pytest.mark.xfail(strict=True, reason="hybrid serves almost no pairs at l = 1")),
])
def test_criterion_12_regime(corner, acceptance):
    kw = CORNERS[corner]
    cfg = NetworkConfig(n=SWEEP[-1], kappa=0.5, alpha=kw["alpha"], l=kw.get("l", 1.0), l_beta=kw.get("l_beta"))
    predicted = classify_regime(cfg)
    won, exps = _winner(corner)
    ok = predicted.label == corner and won == predicted.scheme
    shown = ", ".join(f"{s} {e:.2f}" for s, e in exps.items())
    acceptance(12, ok, f"{corner}: predicted {predicted.scheme}, argmax {won} ({shown})")
    assert ok
