import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gammaln

from d2dcache.contact import (
    expected_truncated_transfer,
    poisson_pmf,
    poisson_tail,
    transfer_distribution,
)

from oracles import transfer_law, truncated_mean


def test_pmf_examples():
    assert poisson_pmf(0.0, 0) == 1.0
    assert poisson_pmf(0.0, 3) == 0.0
    assert poisson_pmf(1.0, 0) == pytest.approx(0.3678794, abs=1e-7)
    assert poisson_pmf(2.0, 1) == pytest.approx(math.exp(math.log(2.0) - 2.0 - gammaln(2)), abs=1e-15)
    assert poisson_pmf(2.0, 1) == pytest.approx(0.2706706, abs=1e-7)


def test_pmf_negative_mean_rejected():
    with pytest.raises(ValueError):
        poisson_pmf(-1.0, 0)


@pytest.mark.parametrize("mu", [0.0, 0.5, 3.0, 29.9, 31.0, 250.0, 1e4])
def test_pmf_mass_within_window(mu):
    top = math.ceil(mu + 12 * math.sqrt(mu) + 30)
    total = math.fsum(poisson_pmf(mu, m) for m in range(top + 1))
    assert total >= 1 - 1e-10
    assert total <= 1 + 1e-10


def test_pmf_log_space_matches_direct_form():
    for mu, m in [(35.0, 20), (10.0, 40), (400.0, 390)]:
        ref = math.exp(-mu + m * math.log(mu) - gammaln(m + 1))
        assert poisson_pmf(mu, m) == pytest.approx(ref, rel=1e-12)


def test_truncated_transfer_examples():
    assert expected_truncated_transfer(7.3, 2, 0) == 0.0
    assert expected_truncated_transfer(1.0, 1, 1) == pytest.approx(1 - math.exp(-1), abs=1e-12)
    ref = 4 * math.exp(-2) + 3 * (1 - 3 * math.exp(-2))
    assert expected_truncated_transfer(2.0, 2, 3) == pytest.approx(ref, abs=1e-12)
    # 3 - 5 e^-2
    assert ref == pytest.approx(3 - 5 * math.exp(-2), abs=1e-15)


def test_truncated_transfer_monte_carlo():
    rng = np.random.default_rng(11)
    m = rng.poisson(2.0, size=10**6)
    est = np.minimum(2 * m, 3).mean()
    se = np.minimum(2 * m, 3).std() / 1e3
    assert abs(est - expected_truncated_transfer(2.0, 2, 3)) < 4 * se


@settings(max_examples=200, deadline=None)
@given(mu=st.floats(0, 50), B=st.integers(1, 4), k=st.integers(0, 12))
def test_truncated_transfer_cap_and_oracle(mu, B, k):
    e = expected_truncated_transfer(mu, B, k)
    assert e <= min(B * mu, k) + 1e-12
    assert e == pytest.approx(truncated_mean(mu, B, k), abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(mu=st.floats(0, 20), d=st.floats(0, 5), B=st.integers(1, 3), k=st.integers(0, 8))
def test_truncated_transfer_monotone(mu, d, B, k):
    assert expected_truncated_transfer(mu + d, B, k) >= expected_truncated_transfer(mu, B, k) - 1e-12
    assert expected_truncated_transfer(mu, B, k + 1) >= expected_truncated_transfer(mu, B, k) - 1e-12


def test_transfer_distribution_examples():
    assert transfer_distribution(3.0, 2, 0).as_dict() == {0: 1.0}
    d = transfer_distribution(1.0, 1, 1).as_dict()
    assert d[0] == pytest.approx(math.exp(-1), abs=1e-15)
    assert d[1] == pytest.approx(1 - math.exp(-1), abs=1e-15)
    d = transfer_distribution(1.0, 2, 3).as_dict()
    assert sorted(d) == [0, 2, 3]
    assert d[0] == pytest.approx(math.exp(-1), abs=1e-15)
    assert d[2] == pytest.approx(math.exp(-1), abs=1e-15)
    assert d[3] == pytest.approx(1 - 2 * math.exp(-1), abs=1e-15)


def test_transfer_distribution_folds_coincident_point():
    # x = 4, B = 2: support {0, 2} then tail at 4 (4 = 2*2 is not below m* = 2)
    d = transfer_distribution(1.5, 2, 4)
    assert list(d.support) == [0, 2, 4]
    assert math.fsum(d.mass) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(mu=st.floats(0, 40), B=st.integers(1, 4), x=st.integers(0, 12))
def test_transfer_distribution_matches_expectation_and_oracle(mu, B, x):
    d = transfer_distribution(mu, B, x)
    assert abs(math.fsum(d.mass) - 1.0) <= 1e-12
    assert np.all(np.diff(d.support) > 0)
    assert abs(d.expectation() - expected_truncated_transfer(mu, B, x)) <= 1e-10
    ref = transfer_law(mu, B, x)
    for v, p in d.as_dict().items():
        assert p == pytest.approx(ref[v], abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(mu=st.floats(0, 20), d=st.floats(0.01, 5), B=st.integers(1, 3), x=st.integers(0, 8))
def test_transfer_distribution_stochastic_dominance(mu, d, B, x):
    lo = transfer_distribution(mu, B, x)
    hi = transfer_distribution(mu + d, B, x)
    for v in lo.support:
        cdf_lo = math.fsum(p for s, p in zip(lo.support, lo.mass) if s <= v)
        cdf_hi = math.fsum(p for s, p in zip(hi.support, hi.mass) if s <= v)
        assert cdf_hi <= cdf_lo + 1e-12


def test_tail_is_complement_of_prefix():
    for mu in [0.1, 2.0, 45.0]:
        for m in range(6):
            head = math.fsum(poisson_pmf(mu, j) for j in range(m))
            assert poisson_tail(mu, m) == pytest.approx(1 - head, abs=1e-14)
