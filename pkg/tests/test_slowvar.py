import math

import numpy as np
import pytest

from pinsim.slowvar import (SlowlyVarying, const, logpow, potter_report,
                            de_bruijn_conjugate, DeBruijnError, UniversalScale)


def test_eval_examples():
    assert const(1.0)(1e6) == 1.0
    assert logpow(1.0)(0.0) == pytest.approx(1.0, abs=1e-15)
    # (log(e + n))^2 with e + n = e^2
    n = math.e**2 - math.e
    assert logpow(2.0)(n) == pytest.approx(4.0, rel=1e-14)


def test_eval_positive_and_vectorized():
    L = logpow(-1.5)
    n = np.linspace(0, 1e5, 50)
    v = L(n)
    assert v.shape == n.shape
    assert (v > 0).all()
    with pytest.raises(ValueError):
        L(-1.0)


def test_slow_variation_ratio():
    # L(floor(a n)) / L(n) -> 1 along a grid, and improves with n
    L = logpow(2.0)
    for a in (0.5, 2.0, 7.0):
        r1 = L(math.floor(a * 1e4)) / L(1e4)
        r2 = L(math.floor(a * 1e8)) / L(1e8)
        assert abs(r2 - 1) < abs(r1 - 1) < 0.6


def test_unknown_family_rejected():
    with pytest.raises(ValueError):
        SlowlyVarying("oscillating", 1.0)


def test_potter_constant_family():
    rep = potter_report(const(1.0), 0.1, range(1, 10_001))
    assert rep.c_delta == pytest.approx(1.0, rel=1e-12)
    assert rep.violations == 0


def test_potter_logpow():
    rep = potter_report(logpow(1.0), 0.1, range(1, 10_001))
    assert np.isfinite(rep.c_delta) and rep.c_delta >= 1.0
    assert rep.violations == 0


def test_potter_forced_constant_violates():
    # log grows, so with c forced to 1 and tiny delta the bound must fail
    rep = potter_report(logpow(1.0), 0.01, range(1, 10_001), c_force=1.0)
    assert rep.violations > 0


def test_potter_empty_grid():
    with pytest.raises(ValueError):
        potter_report(const(1.0), 0.1, [])


def test_potter_fitted_constant_across_families():
    for L in (const(2.0), logpow(1.0), logpow(-0.5)):
        rep = potter_report(L, 0.5, np.unique(np.geomspace(1, 1e5, 400).astype(int)))
        assert rep.violations == 0


def test_de_bruijn_constant():
    assert de_bruijn_conjugate(lambda x: 1.0, 100.0, 1e-10) == pytest.approx(1.0)
    assert de_bruijn_conjugate(lambda x: 2.0, 10.0, 1e-10) == pytest.approx(0.5)


def test_de_bruijn_residual():
    M = lambda x: 1.0 / np.log(np.e + x)
    tol = 1e-10
    y = de_bruijn_conjugate(M, 1e6, tol)
    assert abs(y * M(1e6 / y) - 1.0) < 10 * tol
    assert abs(y * M(1e6 / y) - 1.0) < 1e-9


def test_de_bruijn_nonconvergence_diagnostic():
    M = lambda x: 1.0 / np.log(np.e + x)
    with pytest.raises(DeBruijnError) as exc:
        de_bruijn_conjugate(M, 1e6, 1e-14, max_iter=1)
    assert exc.value.last_iterate > 0
    assert exc.value.residual > 0


def test_tilde_L_constant_family():
    for alpha in (0.6, 0.75):
        scale = UniversalScale(alpha, const(1.0))
        for x in (10.0, 1e3, 1e6):
            assert scale(x) == pytest.approx(1.0, rel=1e-9)
    # L = c: tilde L is constant in x (value c^(1/(2a-1)))
    scale = UniversalScale(0.75, const(2.0))
    vals = [scale(x) for x in (10.0, 1e4)]
    assert vals[0] == pytest.approx(vals[1], rel=1e-6)


def test_tilde_L_logpow_residual():
    scale = UniversalScale(0.75, logpow(1.0))
    y = scale.M_conjugate(1e4)
    resid = abs(y * scale.M(1e4 / y) - 1.0)
    assert resid < 1e-9
    assert scale(1e4) == pytest.approx(y ** (-1.0 / 0.5), rel=1e-12)
