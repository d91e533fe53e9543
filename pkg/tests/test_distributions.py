import math

import numpy as np
import pytest

from bizsel.distributions import (
    DistributionSpec,
    Family,
    InvalidMoments,
    RandomStream,
    alternative_streams,
    sample,
    sample_many,
    validate,
)

N = 10**6
FAMILIES = list(Family)


def kurtosis(spec):
    if spec.family is Family.NORMAL:
        return 3.0
    if spec.family is Family.UNIFORM:
        return 1.8
    if spec.family is Family.SHIFTED_EXPONENTIAL:
        return 9.0
    p = spec.p
    return (1 - 3 * p * (1 - p)) / (p * (1 - p))


def test_normal_mean_lln():
    x = sample_many(DistributionSpec(Family.NORMAL, 0.0, 1.0), RandomStream(11), N)
    assert abs(x.mean()) < 0.01


def test_uniform_support_and_variance():
    mu, var = 2.0, 0.5
    spec = DistributionSpec(Family.UNIFORM, mu, var)
    x = sample_many(spec, RandomStream(12), N)
    half = math.sqrt(var) * math.sqrt(3.0)
    assert x.min() >= mu - half and x.max() <= mu + half
    assert x.min() < mu - 0.999 * half and x.max() > mu + 0.999 * half
    assert abs(x.var(ddof=1) / var - 1) < 0.02


def test_shifted_exponential_skewness_and_shift():
    mu, var = 1.0, 4.0
    spec = DistributionSpec(Family.SHIFTED_EXPONENTIAL, mu, var)
    x = sample_many(spec, RandomStream(13), N)
    assert x.min() >= mu - 2.0
    d = x - x.mean()
    skew = (d**3).mean() / (d**2).mean() ** 1.5
    assert skew == pytest.approx(2.0, abs=0.05)


def test_scaled_bernoulli_symmetric_support():
    spec = DistributionSpec(Family.SCALED_BERNOULLI, 0.0, 1.0)
    assert spec.p == 0.5
    assert spec.support() == pytest.approx((-1.0, 1.0))
    x = sample_many(spec, RandomStream(14), 1000)
    assert set(np.unique(x)) == {-1.0, 1.0}


def test_scaled_bernoulli_asymmetric_support_solves_moments():
    # p = 0.2, mean 1, var 4: high = 1 + 2*sqrt(4) = 5, low = 1 - 2*sqrt(1/4) = 0
    spec = DistributionSpec(Family.SCALED_BERNOULLI, 1.0, 4.0, p=0.2)
    low, high = spec.support()
    assert (low, high) == pytest.approx((0.0, 5.0))
    assert 0.2 * high + 0.8 * low == pytest.approx(1.0)
    assert 0.2 * (high - 1) ** 2 + 0.8 * (low - 1) ** 2 == pytest.approx(4.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(family=Family.NORMAL, mean=0.0, variance=0.0),
        dict(family=Family.NORMAL, mean=0.0, variance=-1.0),
        dict(family=Family.UNIFORM, mean=math.inf, variance=1.0),
        dict(family=Family.NORMAL, mean=0.0, variance=math.nan),
        dict(family=Family.SCALED_BERNOULLI, mean=0.0, variance=1.0, p=1.0),
        dict(family=Family.SCALED_BERNOULLI, mean=0.0, variance=1.0, p=0.0),
    ],
)
def test_invalid_moments_rejected(kwargs):
    with pytest.raises(InvalidMoments):
        DistributionSpec(**kwargs)


def test_validate_accepts_standard_normal():
    assert validate(DistributionSpec(Family.NORMAL, 0.0, 1.0)) is None


def test_family_names_parse():
    assert DistributionSpec("uniform", 0.0, 1.0).family is Family.UNIFORM
    with pytest.raises(ValueError):
        Family.parse("cauchy")


_pairs = np.random.default_rng(2024)
MOMENT_CASES = [
    (fam, float(_pairs.uniform(-5, 5)), float(_pairs.uniform(0.1, 10)))
    for fam in FAMILIES
    for _ in range(2)
]


@pytest.mark.parametrize("family,mean,variance", MOMENT_CASES)
def test_moment_matching_within_four_standard_errors(family, mean, variance):
    spec = DistributionSpec(family, mean, variance, p=0.3)
    x = sample_many(spec, RandomStream(31, (int(family),)), N)
    se_mean = math.sqrt(variance / N)
    assert abs(x.mean() - mean) < 4 * se_mean
    # variance of the sample variance: (mu4 - sigma^4 (n-3)/(n-1)) / n
    mu4 = kurtosis(spec) * variance**2
    se_var = math.sqrt((mu4 - variance**2 * (N - 3) / (N - 1)) / N)
    assert abs(x.var(ddof=1) - variance) < 4 * se_var


def test_streams_reproducible():
    a = sample_many(DistributionSpec(Family.NORMAL, 0, 1), RandomStream(5, (1, 2)), 100)
    b = sample_many(DistributionSpec(Family.NORMAL, 0, 1), RandomStream(5, (1, 2)), 100)
    assert np.array_equal(a, b)


def test_distinct_streams_uncorrelated():
    s1, s2 = alternative_streams(9, 2)
    assert s1.stream_id != s2.stream_id
    spec = DistributionSpec(Family.NORMAL, 0, 1)
    a, b = sample_many(spec, s1, 10**5), sample_many(spec, s2, 10**5)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.01


def test_batching_does_not_change_sequence():
    spec = DistributionSpec(Family.SHIFTED_EXPONENTIAL, 0, 1)
    whole = sample_many(spec, RandomStream(3), 50)
    s = RandomStream(3)
    parts = np.concatenate([sample_many(spec, s, 7), [sample(spec, s)], sample_many(spec, s, 42)])
    assert np.array_equal(whole, parts)
