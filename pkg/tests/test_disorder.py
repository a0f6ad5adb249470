import math

import numpy as np
import pytest

from pinsim.disorder import make_disorder, sample_disorder, left_tail_fit
from pinsim.rng import SeedRecord

ALL_KINDS = [("gaussian", None), ("uniform", None), ("rademacher", None),
             ("gammaexp", 1.5)]


@pytest.fixture(scope="module", params=ALL_KINDS, ids=lambda p: f"{p[0]}{p[1] or ''}")
def law_and_sample(request):
    kind, g = request.param
    law = make_disorder(kind, g)
    s = sample_disorder(law, 1_000_000, SeedRecord(90, (kind,)))
    return law, s.omega


def test_log_mgf_closed_forms():
    assert make_disorder("gaussian").log_mgf(0.0) == 0.0
    assert make_disorder("gaussian").log_mgf(0.3) == pytest.approx(0.045, abs=1e-15)
    assert make_disorder("rademacher").log_mgf(1.0) == pytest.approx(
        math.log(math.cosh(1.0)), rel=1e-12)
    a = math.sqrt(3.0)
    exact = math.log(math.sinh(0.3 * a) / (0.3 * a))
    assert make_disorder("uniform").log_mgf(0.3) == pytest.approx(exact, abs=1e-9)


def test_log_mgf_zero_and_convexity(law_and_sample):
    law, _ = law_and_sample
    assert abs(law.log_mgf(0.0)) < 1e-9
    grid = np.linspace(-0.8, 0.8, 9)
    vals = np.array([law.log_mgf(b) for b in grid])
    second = np.diff(vals, n=2)
    assert (second >= -1e-8).all()


def test_standardization(law_and_sample):
    law, om = law_and_sample
    n = om.size
    assert abs(om.mean()) < 4.0 / math.sqrt(n)
    assert abs(om.var() - 1.0) < 4.0 * math.sqrt(2.0 / n) + 2e-3


def test_tilt_identity(law_and_sample):
    law, om = law_and_sample
    for b in (0.1, 0.5):
        tilt = np.exp(b * om - law.log_mgf(b))
        se = tilt.std() / math.sqrt(om.size)
        assert abs(tilt.mean() - 1.0) < 4.0 * se


def test_sampling_deterministic():
    law = make_disorder("gammaexp", 1.7)
    a = sample_disorder(law, 1, SeedRecord(7, ("x",))).omega
    b = sample_disorder(law, 1, SeedRecord(7, ("x",))).omega
    assert np.array_equal(a, b)


def test_unknown_kind():
    with pytest.raises(ValueError):
        make_disorder("cauchy")
    with pytest.raises(ValueError):
        make_disorder("gammaexp", 2.5)


def test_left_tail_fit_weibull2():
    rng = np.random.default_rng(5)
    samples = -np.sqrt(rng.standard_exponential(200_000))  # P(X<=-x)=exp(-x^2)
    fit = left_tail_fit(samples)
    assert fit.gamma_hat == pytest.approx(2.0, abs=0.15)
    assert fit.diagnostic is None


def test_left_tail_fit_exponential():
    rng = np.random.default_rng(6)
    fit = left_tail_fit(-rng.standard_exponential(200_000))
    assert fit.gamma_hat == pytest.approx(1.0, abs=0.1)


def test_left_tail_fit_degenerate():
    fit = left_tail_fit(np.zeros(20_000))
    assert fit.diagnostic == "degenerate samples"
    with pytest.raises(ValueError):
        left_tail_fit(np.zeros(100))
