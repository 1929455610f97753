import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from covertnet.bounds import (
    CutsetBound,
    achievability_vs_bound,
    calibrate_converse_constant,
    classify_regime,
    converse_power_cap,
    converse_power_exact,
    cutset_bound,
    kl_square_identity,
    necessary_inr,
    rayleigh_magnitude,
    ring_sum,
    transfer_power,
)
from covertnet.errors import BoundViolation, ConfigurationError
from covertnet.netgen import NetworkConfig, generate_instance, nominal_side
from covertnet.phy import covert_power_mh
from covertnet.schemes import run_detoured_mh


def test_necessary_inr_values():
    assert necessary_inr(0.0, 10) == 0.0
    assert necessary_inr(1.0, 2.0) == pytest.approx(1.0)
    assert necessary_inr(0.05, 1e300) < 1e-150


def test_necessary_inr_domain():
    with pytest.raises(ConfigurationError):
        necessary_inr(0.1, 0.5)


@given(d1=st.floats(0, 10), d2=st.floats(0, 10), l1=st.floats(1, 1e9), l2=st.floats(1, 1e9))
def test_necessary_inr_monotone(d1, d2, l1, l2):
    (da, db), (la, lb) = sorted((d1, d2)), sorted((l1, l2))
    assert necessary_inr(da, 5.0) <= necessary_inr(db, 5.0)
    assert necessary_inr(0.1, la) >= necessary_inr(0.1, lb)


def test_converse_cap_zero_delta():
    assert converse_power_cap(NetworkConfig(delta=0.0)) == 0.0


@pytest.mark.parametrize("alpha", [2.5, 3.0, 4.0])
def test_converse_cap_log_factor_below_mh(alpha):
    # P_CB / P_MH carries exactly one extra 1/log n
    vals = []
    for e in range(10, 17):
        cfg = NetworkConfig(n=2.0**e, kappa=0.5, alpha=alpha, l=float(2**e), c_b=0.01)
        vals.append(converse_power_cap(cfg) / covert_power_mh(cfg) * math.log(cfg.n))
    assert max(vals) / min(vals) == pytest.approx(1.0, abs=1e-9)


def _oracle_ring_sum(n, kappa, alpha):
    i0 = math.ceil(n ** (0.5 - kappa / 2))
    i1 = math.floor(math.sqrt(n / math.log(n)))
    side = math.sqrt(2 * math.log(n) / n)
    return sum(16 * i * math.log(n) * (i * side) ** (-alpha) for i in range(min(i0, i1), i1 + 1))


def test_converse_cap_equality_at_single_point():
    cfg = NetworkConfig(n=2.0**12, kappa=0.5, alpha=3.0, delta=0.05, l=4096.0)
    assert ring_sum(cfg.n, 0.5, 3.0) == pytest.approx(_oracle_ring_sum(cfg.n, 0.5, 3.0), rel=1e-12)
    c = calibrate_converse_constant(0.5, 3.0, 1.0, 1.0, (cfg.n,))
    p = converse_power_cap(cfg, c=c)
    inr = p * _oracle_ring_sum(cfg.n, 0.5, 3.0)
    assert inr == pytest.approx(necessary_inr(0.05, 4096.0), rel=0.01)
    assert p == pytest.approx(converse_power_exact(cfg), rel=1e-9)


@pytest.mark.parametrize("kappa,alpha", [(0.25, 2.5), (0.5, 3.0), (0.75, 4.0)])
def test_converse_cap_dominates_exact(kappa, alpha):
    for e in range(10, 17):
        cfg = NetworkConfig(n=2.0**e, kappa=kappa, alpha=alpha, l=100.0)
        inr = converse_power_cap(cfg) * ring_sum(cfg.n, kappa, alpha)
        assert inr >= necessary_inr(cfg.delta, cfg.window) * (1 - 1e-12)


def test_cutset_low_snr_branch():
    cfg = NetworkConfig(n=4096, kappa=0.5, alpha=3.5, l=4096.0**3)
    b = cutset_bound(cfg)
    assert b.p_cb_prime < 1
    assert b.W == pytest.approx(1 / 64) and b.miso_term == 0.0
    assert b.total == pytest.approx(4 * cfg.n**cfg.eps * b.transfer_term / cfg.n**cfg.eps)


def test_cutset_alpha_three_branch():
    n = 4096.0
    assert transfer_power(2.0, n, 3.0, 0.1) == pytest.approx(2.0 * math.sqrt(n) * math.log(n) ** 3)


def test_cutset_transfer_branches():
    n = 4096.0
    assert transfer_power(1.0, n, 2.5, 0.3) == pytest.approx(n**0.75 * math.log(n) ** 2)
    assert transfer_power(1.0, n, 4.0, 0.25) == pytest.approx(n**0 * 4.0 * math.log(n) ** 2)


def test_cutset_high_snr_width():
    cfg = NetworkConfig(n=4096, kappa=0.5, alpha=4.0, l=1.0)
    b = cutset_bound(cfg)
    assert b.p_cb_prime > 1
    w = b.p_cb_prime ** 0.5 / 64
    assert b.W == pytest.approx(min(max(w, 1 / 64), 0.5 - 1 / 64))
    assert b.miso_term > 0
    assert b.total == pytest.approx(4 * b.cut)


@given(p1=st.floats(1e-30, 1e3), p2=st.floats(1e-30, 1e3), alpha=st.sampled_from([2.5, 3.0, 3.5, 4.0]))
def test_cutset_monotone_in_power(p1, p2, alpha):
    cfg = NetworkConfig(n=4096, kappa=0.5, alpha=alpha)
    lo, hi = sorted((p1, p2))
    assert cutset_bound(cfg, p_cb=lo).total <= cutset_bound(cfg, p_cb=hi).total * (1 + 1e-12)


def test_cutset_domain():
    with pytest.raises(ConfigurationError):
        cutset_bound(NetworkConfig(n=4096, alpha=2.0))


def test_classify_hc_exponent():
    r = classify_regime(NetworkConfig(n=4096, kappa=0.5, alpha=2.5, l_beta=2.0))
    assert r.scheme == "hc" and r.vanishing
    assert r.exponent == pytest.approx(-0.125)


def test_classify_mh():
    r = classify_regime(NetworkConfig(n=4096, kappa=0.5, alpha=4.0, l_beta=3.0))
    assert r.label == "mh" and r.scheme == "mh"


def test_classify_hybrid():
    r = classify_regime(NetworkConfig(n=4096, kappa=0.5, alpha=4.0, l=1.0))
    assert r.label == "hybrid" and r.exponent == pytest.approx(0.75)


def test_kl_identical():
    f = rayleigh_magnitude(1.0)
    raw, sq = kl_square_identity(f, f)
    assert raw == pytest.approx(0, abs=1e-10) and sq == pytest.approx(0, abs=1e-10)


@pytest.mark.parametrize("inr", [0.01, 0.1, 0.5, 1.0, 2.0])
def test_kl_rayleigh_closed_form(inr):
    raw, sq = kl_square_identity(rayleigh_magnitude(1.0 + inr), rayleigh_magnitude(1.0))
    closed = inr - math.log1p(inr)
    assert abs(raw - closed) <= 1e-3 and abs(sq - closed) <= 1e-3 and abs(raw - sq) <= 1e-3


def test_kl_disjoint():
    raw, sq = kl_square_identity(stats.uniform(0, 1), stats.uniform(2, 1))
    assert raw == math.inf and sq == math.inf


def test_kl_negative_support():
    with pytest.raises(ConfigurationError):
        kl_square_identity(stats.norm(), stats.norm())


@given(a1=st.floats(0.5, 5), s1=st.floats(0.3, 3), a2=st.floats(0.5, 5), s2=st.floats(0.3, 3))
def test_kl_square_invariance(a1, s1, a2, s2):
    raw, sq = kl_square_identity(stats.gamma(a1 + 1, scale=s1), stats.gamma(a2 + 1, scale=s2))
    assert abs(raw - sq) <= 1e-3 * max(1.0, raw)


def test_achievability_zero():
    cfg = NetworkConfig(n=4096, alpha=3.5)
    cmp = achievability_vs_bound({"mh": 0.0}, cutset_bound(cfg))
    assert cmp.ok and cmp.gap["mh"] == math.inf


def test_achievability_violation():
    cfg = NetworkConfig(n=4096, alpha=3.5)
    b = cutset_bound(cfg)
    with pytest.raises(BoundViolation):
        achievability_vs_bound({"mh": 2 * b.total}, b)


def test_mh_gap_polylog():
    ns = [2.0**e for e in range(10, 17, 2)]
    gaps = []
    for n in ns:
        cfg = NetworkConfig(n=n, kappa=0.5, alpha=4.0, l=1.0, c_b=0.01, seed=1)
        r = run_detoured_mh(cfg, generate_instance(cfg))
        gaps.append(achievability_vs_bound([r], cutset_bound(cfg)).gap["mh"])
    assert all(g > 1 for g in gaps)
    assert gaps[-1] / gaps[0] <= (math.log(ns[-1]) / math.log(ns[0])) ** 3


@pytest.mark.xfail(strict=True, reason="polylog factors of the bound tilt the finite-n slope to about 1.06")
def test_bound_exponent_hybrid_branch():
    ns = [2.0**e for e in range(10, 17)]
    tot = [cutset_bound(NetworkConfig(n=n, kappa=0.5, alpha=4.0, l=1.0)).total for n in ns]
    slope = stats.linregress(np.log(ns), np.log(tot)).slope
    assert slope == pytest.approx(0.75, abs=0.1)


def test_bound_carries_assumption():
    b = cutset_bound(NetworkConfig(n=4096, alpha=3.0))
    assert isinstance(b, CutsetBound) and "same average power" in b.to_dict()["assumption"]
    assert nominal_side(4096) > 0
