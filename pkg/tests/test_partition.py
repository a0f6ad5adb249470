import math

import numpy as np
import pytest

from pinsim import partition as pt
from pinsim import renewal as rn
from pinsim.rng import stream


def test_constrained_trivial_cases(heavy75_small, gauss):
    om = np.zeros(16)
    assert pt.z_constrained(heavy75_small, om, gauss, 0.7, 0.3, 5, 5) == 0.0
    assert pt.z_constrained(heavy75_small, om, gauss, 0.7, 0.3, 5, 6) == pytest.approx(0.0, abs=1e-14)
    om = stream(1, "t").standard_normal(16)
    assert pt.z_constrained(heavy75_small, om, gauss, 0.0, 0.0, 2, 11) == pytest.approx(0.0, abs=1e-12)
    assert pt.z_free(heavy75_small, om, gauss, 0.0, 0.0, 12) == pytest.approx(0.0, abs=1e-12)


def test_constrained_twopoint_hand_formula(twopoint, gauss):
    om = stream(2, "t").standard_normal(4)
    x = 0.5 * om[0] - gauss.log_mgf(0.5) + 0.1
    hand = math.log((0.5 + 0.25 * math.exp(x)) / 0.75)
    val = pt.z_constrained(twopoint, om, gauss, 0.5, 0.1, 0, 2)
    assert val == pytest.approx(hand, abs=1e-14)


def test_free_single_site(heavy75_small, gauss):
    om = stream(3, "t").standard_normal(2)
    x = 0.4 * om[0] - gauss.log_mgf(0.4) + 0.2
    hand = math.log(heavy75_small.Kbar[1] + heavy75_small.K[1] * math.exp(x))
    assert pt.z_free(heavy75_small, om, gauss, 0.4, 0.2, 1) == pytest.approx(hand, abs=1e-14)


def test_psi_deterministic_law(deterministic):
    assert pt.psi_c(deterministic, 0.2, 6) == pytest.approx(math.exp(0.2 * 5), rel=1e-12)
    assert pt.psi(deterministic, 0.2, 6) == pytest.approx(math.exp(0.2 * 6), rel=1e-12)
    assert pt.psi(deterministic, 0.0, 6) == 1.0
    assert pt.psi_c(deterministic, 0.0, 0) == 1.0


def test_psi_twopoint_brute_force(twopoint, gauss):
    bf = pt.brute_force_constrained(twopoint, np.zeros(6), gauss, 0.0, 0.2, 0, 6)
    assert pt.psi_c(twopoint, 0.2, 6) == pytest.approx(bf, rel=1e-12)
    bff = pt.brute_force_free(twopoint, np.zeros(6), gauss, 0.0, 0.2, 6)
    assert pt.psi(twopoint, 0.2, 6) == pytest.approx(bff, rel=1e-12)


def test_brute_force_two_configs(twopoint, gauss):
    om = stream(4, "t").standard_normal(4)
    x = 0.3 * om[0] - gauss.log_mgf(0.3) + 0.1
    hand = (0.5 + 0.25 * math.exp(x)) / 0.75
    assert pt.brute_force_constrained(twopoint, om, gauss, 0.3, 0.1, 0, 2) == \
        pytest.approx(hand, rel=1e-14)
    assert pt.brute_force_constrained(twopoint, om, gauss, 0.3, 0.1, 3, 4) == 1.0


def test_oracle_equivalence_sample(twopoint, heavy75_small, gauss, rade):
    worst = 0.0
    for i in range(30):
        g = stream(500 + i, "bf")
        law = [twopoint, heavy75_small][i % 2]
        dl = [gauss, rade][(i // 2) % 2]
        span = int(g.integers(1, 13))
        a = int(g.integers(0, 4))
        beta = float(g.uniform(0, 0.8))
        h = float(g.uniform(-0.5, 0.5))
        om = dl.draw(a + span, g)
        dp = math.exp(pt.z_constrained(law, om, dl, beta, h, a, a + span))
        bf = pt.brute_force_constrained(law, om, dl, beta, h, a, a + span)
        worst = max(worst, abs(dp - bf) / bf)
        dpf = math.exp(pt.z_free(law, om, dl, beta, h, a + span))
        bff = pt.brute_force_free(law, om, dl, beta, h, a + span)
        worst = max(worst, abs(dpf - bff) / bff)
    assert worst < 1e-12


def test_monotone_and_logconvex_in_h(heavy75_small, gauss):
    om = stream(5, "t").standard_normal(64)
    hs = [-0.2, 0.0, 0.2, 0.4]
    vals = [pt.z_constrained(heavy75_small, om, gauss, 0.5, h, 0, 64) for h in hs]
    assert all(b - a > 0 for a, b in zip(vals, vals[1:]))
    second = np.diff(vals, n=2)
    assert (second >= -1e-9).all()
    free = [pt.z_free(heavy75_small, om, gauss, 0.5, h, 64) for h in hs]
    assert all(b - a > 0 for a, b in zip(free, free[1:]))


def test_partition_table_invariants(heavy75_small, gauss):
    om = stream(6, "t").standard_normal(128)
    tab = pt.pinned_partition_table(heavy75_small, om, gauss, 0.4, 0.1, 128)
    assert tab.log_z[0] == 0.0
    # re-verify the recursion z(n) = sum_k z(k) K(n-k) e^{x_n} on random entries
    lam = gauss.log_mgf(0.4)
    g = stream(7, "pick")
    for n in g.integers(1, 129, size=6):
        n = int(n)
        terms = tab.log_z[:n] + np.log(heavy75_small.K[n:0:-1])
        direct = np.logaddexp.reduce(terms) + (0.4 * om[n - 1] - lam + 0.1)
        assert direct == pytest.approx(tab.log_z[n], abs=1e-10)


def test_mean_identity_exact_rademacher(heavy75_small):
    bN, hN = heavy75_small.weak_coupling(1.0, 0.5, 8)
    mc, exact = pt.mean_constrained_exact_rademacher(heavy75_small, bN, hN, 8)
    assert mc == pytest.approx(exact, rel=1e-12)


def test_second_moment_exact_rademacher(heavy75_small):
    bN, _ = heavy75_small.weak_coupling(1.0, 0.0, 8)
    mc, exact = pt.second_moment_exact_rademacher(heavy75_small, bN, 6)
    assert mc == pytest.approx(exact, rel=1e-12)


def test_identity_mc_zscores(heavy75, gauss):
    rep = pt.mean_partition_identity_check(heavy75, gauss, 1.0, 0.5, 128, 1.0,
                                           replicas=800, seed=41)
    assert abs(rep.z_score) < 4.0
    rep0 = pt.mean_partition_identity_check(heavy75, gauss, 1.5, 0.0, 128, 1.0,
                                            replicas=800, seed=42)
    assert rep0.exact_value == pytest.approx(1.0, abs=1e-12)
    assert abs(rep0.z_score) < 4.0
    rep2 = pt.second_moment_check(heavy75, gauss, 1.0, 128, 1.0,
                                  replicas=1500, seed=43)
    assert abs(rep2.z_score) < 4.0


def test_beta_zero_second_moment(heavy75_small, gauss):
    rep = pt.second_moment_check(heavy75_small, gauss, 0.0, 16, 1.0,
                                 replicas=4, seed=44)
    assert rep.mc_estimate == pytest.approx(1.0, abs=1e-12)
    assert rep.exact_value == pytest.approx(1.0, abs=1e-12)


def test_span_caps(heavy75_small, gauss):
    with pytest.raises(ValueError):
        pt.brute_force_constrained(heavy75_small, np.zeros(40), gauss, 0.1, 0.0, 0, 30)
    law = rn.deterministic_law(30000)
    with pytest.raises(ValueError):
        pt.constrained_logZ(law, np.zeros((1, 25000)), 0.0, 0.0, 0.0, 0, 25000)


def test_weak_coupling_scale_signs(heavy75_small):
    sc = pt.WeakCouplingScale.for_law(heavy75_small, 2.0, -0.5, 64)
    assert sc.beta_N > 0 and sc.h_N < 0
    sc0 = pt.WeakCouplingScale.for_law(heavy75_small, 0.0, 0.0, 64)
    assert sc0.beta_N == 0.0 and sc0.h_N == 0.0


def test_moment_sup_bounded_trend(heavy75, gauss):
    vals = {}
    for p in (2.0, -2.0):
        vals[p] = [pt.moment_sup_estimate(heavy75, gauss, 1.0, 0.5, N, p,
                                          replicas=64, seed=45, s_points=4)
                   for N in (128, 256, 512)]
        seq = vals[p]
        assert seq[-1] <= 1.6 * max(seq[0], seq[1])
