import math

import numpy as np
import pytest
from scipy.special import gammaln, erfc

from pinsim import renewal as rn
from pinsim.continuum_psi import (SeriesEvaluator, PsiTruncationError,
                                  psi_hat, psi_hat_c, uconv_check)


def gamma_series_free(nu, dh, t, K=400):
    """Independent oracle: direct summation of the closed Gamma-form terms."""
    k = np.arange(1, K + 1)
    lg = k * (math.log(abs(dh)) + gammaln(nu) + nu * math.log(t)) - gammaln(k * nu + 1)
    return 1.0 + float(np.sum(np.sign(dh) ** k * np.exp(lg)))


def gamma_series_con(nu, dh, t, K=400):
    k = np.arange(1, K + 1)
    lg = k * (math.log(abs(dh)) + nu * math.log(t)) + (k + 1) * gammaln(nu) \
        - gammaln((k + 1) * nu)
    return 1.0 + float(np.sum(np.sign(dh) ** k * np.exp(lg)))


def trapezoid_chain_free(nu, t, k_max, m=640, half_steps=160):
    """Trapezoid-refinement oracle for the free chain G_k.

    Each step int_0^s f(r)(s-r)^(nu-1) dr is a trapezoid rule under the
    double-exponential substitution r = s/2 (1 + tanh((pi/2) sinh u)), which
    makes the endpoint singularities harmless; the step count is doubled and
    the two results compared (refinement).  f is carried on a geometric
    s-grid, interpolated log-log.  Returns G_k(t) for k = 1..k_max.
    """
    s = np.concatenate([[0.0], np.geomspace(t * 1e-8, t, m)])

    def interp(f, pts):
        out = np.full_like(pts, f[0])
        pos = pts > 0
        lf = np.log(np.maximum(f[1:], 1e-300))
        lp = np.log(np.clip(pts[pos], s[1], None))
        out[pos] = np.exp(np.interp(lp, np.log(s[1:]), lf))
        return out

    def de_nodes(n):
        from scipy.special import expit
        u = np.linspace(-3.6, 3.6, n + 1)
        z = np.pi * np.sinh(u)
        frac = expit(z)                  # (1 + tanh(z/2)) / 2, stable
        comp = expit(-z)                 # 1 - frac, stable near the endpoint
        w = 0.5 * np.pi * np.cosh(u) / np.cosh(0.5 * z) ** 2
        return frac, comp, 0.5 * w * (u[1] - u[0])

    def step(f):
        g = np.zeros(m + 1)
        prev = None
        for n in (half_steps, 2 * half_steps):
            frac, comp, w = de_nodes(n)
            prev = g.copy()
            for i in range(1, m + 1):
                vals = interp(f, s[i] * frac) * (s[i] * comp) ** (nu - 1.0)
                g[i] = s[i] * float(vals @ w)
        assert np.max(np.abs(g[1:] - prev[1:])) < 1e-9 * max(1.0, g.max())
        return g

    f = np.ones(m + 1)
    out = []
    for _ in range(k_max):
        f = step(f)
        out.append(f[-1])
    return out


def test_first_terms_closed_form():
    s = psi_hat(0.5, 1.0, 1.0)
    assert s.terms[0] == pytest.approx(2.0, rel=1e-10)       # t^nu / nu
    sc = psi_hat_c(0.5, 1.0, 1.0)
    assert sc.terms[0] == pytest.approx(math.pi, rel=1e-10)  # B(nu, nu) at nu=1/2
    s6 = psi_hat(0.6, 2.0, 0.5)
    assert s6.terms[0] == pytest.approx(2.0 * 0.5**0.6 / 0.6, rel=1e-10)


def test_delta_zero():
    s = psi_hat(0.6, 0.0, 1.0)
    assert s.value == 1.0 and s.k_max == 0 and s.truncation_bound == 0.0
    assert psi_hat_c(0.6, 0.0, 2.0).value == 1.0


def test_matches_gamma_series_oracle():
    for nu in (0.5, 0.6, 0.75):
        for dh in (1.0, 0.5, -0.3):
            for t in (1.0, 0.25):
                s = psi_hat(nu, dh, t)
                sc = psi_hat_c(nu, dh, t)
                assert abs(s.value - gamma_series_free(nu, dh, t)) < 1e-6
                assert abs(sc.value - gamma_series_con(nu, dh, t)) < 1e-6


def test_matches_trapezoid_refinement_oracle():
    nu, dh, t = 0.5, 1.0, 1.0
    ev = SeriesEvaluator(nu, t)
    _, _, _, terms = ev.profile(dh, [t], constrained=False)
    oracle = trapezoid_chain_free(nu, t, 6)
    for k in range(6):
        assert terms[k, 0] == pytest.approx(oracle[k], abs=1e-6)
    assert abs(terms[:6, 0].sum() - sum(oracle)) < 1e-6


def test_erfc_identity_nu_half():
    z = math.sqrt(math.pi)
    exact = math.exp(z * z) * erfc(-z)
    assert psi_hat(0.5, 1.0, 1.0).value == pytest.approx(exact, abs=1e-6)


def test_mesh_refinement_stability():
    for nu, dh in ((0.75, 1.0), (0.5, 1.0)):
        a = psi_hat(nu, dh, 1.0, panels=512).value
        b = psi_hat(nu, dh, 1.0, panels=256).value
        assert abs(a - b) < 1e-8
        ac = psi_hat_c(nu, dh, 1.0, panels=512).value
        bc = psi_hat_c(nu, dh, 1.0, panels=256).value
        assert abs(ac - bc) < 1e-8


def test_term_positivity_and_monotonicity():
    s = psi_hat_c(0.7, 0.8, 1.0)
    assert (s.terms > 0).all()
    vals = [psi_hat(0.7, d, 1.0).value for d in (0.2, 0.5, 1.0, 1.5)]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    valsc = [psi_hat_c(0.7, d, 1.0).value for d in (0.2, 0.5, 1.0, 1.5)]
    assert all(a < b for a, b in zip(valsc, valsc[1:]))


def test_continuity_in_t():
    ts = [0.5] + [0.5 + 2.0**-j for j in range(3, 9)]
    ev = SeriesEvaluator(0.6, 1.0, extra_nodes=ts)
    vals, *_ = ev.profile(1.0, sorted(ts), constrained=False)
    base = vals[0]
    gaps = np.abs(vals[1:] - base)
    assert (np.diff(gaps) > 0).all()  # closer t, smaller gap
    assert gaps[0] < 0.05


def test_envelope_majorizes_terms():
    s = psi_hat_c(0.5, 1.0, 1.0)
    c1, log_chat, c2 = s.envelope
    k = np.arange(1, s.k_max + 1, dtype=float)
    env = math.log(c1) + log_chat * k - c2 * k * np.log(np.maximum(k, 1.0))
    mags = np.abs(s.terms)
    pos = mags > 0
    assert (np.log(mags[pos]) <= env[pos] + 1e-9).all()


def test_truncation_bound_honest():
    for nu, dh in ((0.5, 1.0), (0.75, 0.8)):
        s = psi_hat(nu, dh, 1.0)
        true_tail = abs(gamma_series_free(nu, dh, 1.0) - s.value)
        assert true_tail <= s.truncation_bound + 1e-9
        assert s.truncation_bound < 1e-8


def test_scaling_change_of_variables():
    left = psi_hat_c(0.6, 1.0, 2.0).value
    right = psi_hat_c(0.6, 2.0**0.6, 1.0).value
    assert abs(left - right) < 1e-6


def test_truncation_diagnostic():
    with pytest.raises(PsiTruncationError) as exc:
        psi_hat(0.2, 1.0, 1.0)
    partial_vals, partial_terms = exc.value.partial
    assert np.isfinite(partial_vals).all()
    assert partial_terms.shape[0] == 60


def test_uconv_small_grid(heavy75_small):
    t_grid = np.arange(0, 9) / 8.0
    rep = uconv_check(heavy75_small, 0.5, t_grid, [32, 128])
    assert rep.sup_dev_free[1] < rep.sup_dev_free[0]
    assert rep.continuum_free[0] == 1.0   # t = 0
    with pytest.raises(ValueError):
        uconv_check(heavy75_small, 0.5, [0.3], [64])  # 64*0.3 not integer


def test_uconv_contact_law_fast_convergence():
    law = rn.contact_power_law(0.75, 1024)
    t_grid = np.arange(0, 9) / 8.0
    rep = uconv_check(law, 1.0, t_grid, [128, 512])
    assert rep.decreasing()
    assert rep.sup_dev_free[-1] < 0.05
