import numpy as np
import pytest
from scipy import stats

from kappaqkd.dynamics import IntegratorConfig, PhysicalParams, integrate_batch
from kappaqkd.sampling import (
    SeedSpec,
    StreamFactory,
    StreamLabel,
    sample_equilibrium,
    sample_equilibrium_array,
    substream,
)

P = PhysicalParams()


@pytest.fixture(scope="module")
def big_samples():
    return [sample_equilibrium_array(100_000, P, SeedSpec(s)) for s in (1, 2, 3, 4)]


def test_same_seed_same_states():
    assert sample_equilibrium(50, P, SeedSpec(9)) == sample_equilibrium(50, P, SeedSpec(9))
    assert sample_equilibrium(50, P, SeedSpec(9)) != sample_equilibrium(50, P, SeedSpec(10))


def test_n_must_be_positive():
    with pytest.raises(ValueError):
        sample_equilibrium(0, P, SeedSpec(1))


def test_moments(big_samples):
    # per seed: 3 sigma bound on the mean; the std bound is applied to the seed average
    for z in big_samples:
        assert np.all(np.abs(z.mean(axis=0)) <= 0.01)
        assert -0.01 <= np.corrcoef(z.T)[0, 1] <= 0.01
    std = np.mean([z.std(axis=0) for z in big_samples], axis=0)
    assert np.all((0.995 <= std) & (std <= 1.005))


def test_halfwidth_scales_samples():
    z = sample_equilibrium_array(200, PhysicalParams(halfwidth=3.0), SeedSpec(5))
    ref = sample_equilibrium_array(200, P, SeedSpec(5))
    np.testing.assert_allclose(z, 3.0 * ref, rtol=1e-15)
    half = sample_equilibrium_array(200, P, SeedSpec(5), std_per_halfwidth=0.5)
    np.testing.assert_allclose(half, 0.5 * ref, rtol=1e-15)


def test_marginals_gaussian(big_samples):
    z = big_samples[0]
    assert stats.kstest(z[:, 0], "norm").pvalue > 0.001
    assert stats.kstest(z[:, 1], "norm").pvalue > 0.001


class TestSubstream:
    def test_repeatable(self):
        s = SeedSpec(123, StreamLabel.EVE)
        assert np.array_equal(substream(s, 7).random(100), substream(s, 7).random(100))

    def test_neighbouring_rounds_independent(self):
        s = SeedSpec(123)
        a, b = substream(s, 7).random(10_000), substream(s, 8).random(10_000)
        assert not np.array_equal(a, b)
        assert stats.ks_2samp(a, b).pvalue > 0.001
        assert abs(np.corrcoef(a, b)[0, 1]) < 4 / np.sqrt(10_000)

    def test_labels_separate(self):
        a = substream(SeedSpec(123, StreamLabel.KEY_PHYSICS), 7).random(8)
        b = substream(SeedSpec(123, StreamLabel.BOB_KAPPA), 7).random(8)
        assert not np.array_equal(a, b)

    def test_order_independent(self):
        f = StreamFactory(SeedSpec(55))
        forward = [f(i).random(3) for i in range(50)]
        backward = [f(i).random(3) for i in reversed(range(50))][::-1]
        assert all(np.array_equal(x, y) for x, y in zip(forward, backward))

    def test_negative_round(self):
        with pytest.raises(ValueError):
            substream(SeedSpec(1), -1)

    def test_seed_range(self):
        with pytest.raises(ValueError):
            SeedSpec(-1)
        with pytest.raises(ValueError):
            SeedSpec(2**64)
        SeedSpec(2**64 - 1).key()


def test_kappa_one_outcomes_balanced(big_samples):
    z = big_samples[1]
    res = integrate_batch(z[:, 0], z[:, 1], 1.0, P, IntegratorConfig())
    a = res.outcome_alice[res.committed]
    n = a.size
    assert n > 0.99 * len(z)
    assert abs(np.mean(a == 1) - 0.5) <= 3 * np.sqrt(0.25 / n)
