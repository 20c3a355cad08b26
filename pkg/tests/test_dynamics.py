import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from kappaqkd import _kernel_py, dynamics
from kappaqkd.dynamics import (
    HiddenState,
    IntegratorConfig,
    Kappa,
    PhysicalParams,
    analytic_outcome,
    epsilon,
    integrate_batch,
    integrate_pair,
    single_particle_outcome,
    velocity,
)
from kappaqkd.errors import ConfigError, NotCommitted, TieError

UNIT = PhysicalParams(mass=1, moment=1, gradient=1, offset=0, interaction_time=1, halfwidth=1, hbar=1)
DEFAULT = PhysicalParams()
finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


def mp_velocity(z1, z2, t, kappa, m, mu, B, T, s0, hbar):
    """Term-by-term transcription of the guidance equations in 40-digit arithmetic."""
    mp.mp.dps = 40
    z1, z2, t, kappa, m, mu, B, T, s0, hbar = map(mp.mpf, (z1, z2, t, kappa, m, mu, B, T, s0, hbar))
    eps = 1 + hbar**2 * t**2 / (4 * s0**4 * m**2)
    arg = (z1 - kappa * z2) * B * mu * T * t / (m * s0**2 * eps)
    v1 = hbar**2 * t * z1 / (4 * m**2 * s0**4 * eps) + B * mu * T / (m * eps) * mp.tanh(arg)
    v2 = hbar**2 * t * z2 / (4 * m**2 * s0**4 * eps) - kappa * B * mu * T / (m * eps) * mp.tanh(arg)
    return float(v1), float(v2)


class TestEpsilon:
    def test_zero(self):
        assert epsilon(0.0, DEFAULT) == 1.0
        assert epsilon(0.0, PhysicalParams(mass=3.0, halfwidth=0.2, hbar=7.0)) == 1.0

    @pytest.mark.parametrize("t, expected", [(2.0, 2.0), (4.0, 5.0)])
    def test_unit_values(self, t, expected):
        assert epsilon(t, UNIT) == expected

    def test_increasing(self):
        t = np.linspace(0, 10, 101)
        e = epsilon(t, PhysicalParams(mass=2.0, halfwidth=0.7))
        assert np.all(np.diff(e) > 0) and np.all(e >= 1)


class TestVelocity:
    @pytest.mark.parametrize("t", [0.0, 0.3, 2.0, 17.0])
    @pytest.mark.parametrize("kappa", [Kappa(1), Kappa(100, -1), Kappa(0.5)])
    def test_origin_is_fixed(self, t, kappa):
        assert velocity((0.0, 0.0), t, kappa, DEFAULT) == (0.0, 0.0)

    def test_zero_at_t0(self):
        assert velocity(HiddenState(1.3, -2.2), 0.0, Kappa(10), DEFAULT) == (0.0, 0.0)

    def test_matches_high_precision_transcription(self):
        p = PhysicalParams(gradient=5.0)
        v = velocity((0.3, -0.2), 1.0, Kappa(1), p)
        ref = mp_velocity(0.3, -0.2, 1.0, 1.0, 1, 1, 5, 1, 1, 1)
        assert v == pytest.approx(ref, abs=1e-12)

    @given(z1=finite, z2=finite, t=st.floats(0, 10), kap=st.sampled_from([-100, -10, -1, -0.5, 0.5, 1, 10, 100]),
           m=st.floats(0.5, 2), s0=st.floats(0.5, 2), B=st.floats(-5, 5).filter(lambda b: abs(b) > 0.1))
    @settings(max_examples=200, deadline=None)
    def test_matches_transcription_general(self, z1, z2, t, kap, m, s0, B):
        p = PhysicalParams(mass=m, halfwidth=s0, gradient=B, moment=1.3, interaction_time=0.8, hbar=1.1)
        v = velocity((z1, z2), t, Kappa.from_value(kap), p)
        ref = mp_velocity(z1, z2, t, kap, m, 1.3, B, 0.8, s0, 1.1)
        scale = 1 + abs(kap) * 100
        assert v[0] == pytest.approx(ref[0], abs=1e-12 * scale)
        assert v[1] == pytest.approx(ref[1], abs=1e-12 * scale)

    def test_huge_argument_saturates(self):
        v1, v2 = velocity((1e6, -1e6), 3.0, Kappa(1e3), DEFAULT)
        assert math.isfinite(v1) and math.isfinite(v2)

    @given(z1=finite, z2=finite, t=st.floats(0.01, 10), kap=st.sampled_from([-100, -10, -1, 1, 10, 100]))
    def test_u_velocity_has_sign_of_u(self, z1, z2, t, kap):
        # d/dt (z1 - kappa z2) must point away from zero: the basis of the closed-form outcome
        u = z1 - kap * z2
        v1, v2 = velocity((z1, z2), t, Kappa.from_value(kap), DEFAULT)
        du = v1 - kap * v2
        if u > 1e-9:
            assert du > 0
        elif u < -1e-9:
            assert du < 0


class TestIntegratePair:
    @pytest.mark.parametrize("z, kappa, expected", [
        ((0.3, -0.2), Kappa(1, 1), (1, -1)),
        ((-0.1, 0.4), Kappa(1, 1), (-1, 1)),
        ((0.3, -0.2), Kappa(1, -1), (1, 1)),
    ])
    def test_examples(self, z, kappa, expected):
        res = integrate_pair(HiddenState(*z), kappa)
        assert res.committed
        assert (res.outcome_alice, res.outcome_bob) == expected
        assert (res.outcome_alice, res.outcome_bob) == analytic_outcome(HiddenState(*z), kappa)
        assert len(res.times) == len(res.z1_path) == len(res.z2_path) == 501

    def test_committed_signs_stable_over_window(self):
        cfg = IntegratorConfig()
        res = integrate_pair(HiddenState(0.3, -0.2), Kappa(1), cfg=cfg)
        w = cfg.window_start
        assert np.all(np.sign(res.z1_path[w:]) == res.outcome_alice)
        assert np.all(np.sign(res.z2_path[w:]) == res.outcome_bob)

    def test_origin_stays_put(self):
        res = integrate_pair(HiddenState(0.0, 0.0), Kappa(1))
        assert np.all(res.z1_path == 0) and np.all(res.z2_path == 0)
        assert not res.committed
        with pytest.raises(NotCommitted):
            integrate_pair(HiddenState(0.0, 0.0), Kappa(1), strict=True)

    def test_short_run_does_not_commit(self):
        res = integrate_pair(HiddenState(0.01, -0.01), Kappa(1), cfg=IntegratorConfig(t_end=0.1, n_steps=10))
        assert not res.committed

    def test_against_independent_solver(self):
        # DOP853 at tight tolerance is an independent reference for the RK4 end point
        p = DEFAULT
        for z, k, n in [((0.3, -0.2), 1.0, 1000), ((-1.2, 0.5), -1.0, 1000), ((0.7, 0.1), 10.0, 4000)]:
            cfg = IntegratorConfig(n_steps=n)
            kap = Kappa.from_value(k)
            sol = solve_ivp(lambda t, y: velocity((y[0], y[1]), t, kap, p), (0, cfg.t_end), list(z),
                            method="DOP853", rtol=1e-12, atol=1e-12)
            res = integrate_pair(HiddenState(*z), kap, p, cfg)
            tol = 1e-6 * max(1.0, abs(k))
            assert res.z1_path[-1] == pytest.approx(sol.y[0, -1], abs=tol)
            assert res.z2_path[-1] == pytest.approx(sol.y[1, -1], abs=tol)


class TestAnalyticOutcome:
    def test_examples(self):
        assert analytic_outcome(HiddenState(0.3, -0.2), Kappa(1)) == (1, -1)
        assert analytic_outcome(HiddenState(0.3, -0.2), Kappa(1, -1)) == (1, 1)

    def test_tie(self):
        with pytest.raises(TieError):
            analytic_outcome(HiddenState(0.5, 0.5), Kappa(1))
        with pytest.raises(TieError):
            analytic_outcome(HiddenState(-1.0, 0.01), Kappa(100, -1))

    @given(z1=finite, z2=finite.filter(lambda v: v != 0))
    def test_bob_bit_unchanged_when_kappa_dominates(self, z1, z2):
        if abs(100 * z2) <= abs(z1):
            return
        a_p, b_p = analytic_outcome(HiddenState(z1, z2), Kappa(100, 1))
        a_m, b_m = analytic_outcome(HiddenState(z1, z2), Kappa(100, -1))
        assert b_p == b_m
        assert a_p == -a_m

    @given(z1=finite, z2=finite, kap=st.sampled_from([-100, -10, -1, -0.5, 0.5, 1, 10, 100]))
    def test_perfect_correlation_rule(self, z1, z2, kap):
        if z1 - kap * z2 == 0:
            return
        a, b = analytic_outcome(HiddenState(z1, z2), Kappa.from_value(kap))
        assert a * b == -int(math.copysign(1, kap))


class TestSingleParticle:
    def test_certain(self):
        for z0 in (-40.0, -3.0, 0.0, 2.5, 40.0):
            assert single_particle_outcome(z0, 1.0) == 1
            assert single_particle_outcome(z0, 0.0) == -1

    def test_median_split(self):
        assert single_particle_outcome(0.7, 0.5) == 1
        assert single_particle_outcome(-0.7, 0.5) == -1

    def test_bad_probability(self):
        with pytest.raises(ValueError):
            single_particle_outcome(0.0, 1.5)

    def test_reproduces_born_rule(self):
        rng = np.random.default_rng(2024)
        n = 20_000
        ups = sum(single_particle_outcome(z, 0.3) == 1 for z in rng.standard_normal(n))
        assert abs(ups / n - 0.3) <= 3 * math.sqrt(0.3 * 0.7 / n)


class TestValidation:
    @pytest.mark.parametrize("kw", [dict(mass=0), dict(halfwidth=-1), dict(hbar=0), dict(interaction_time=0),
                                    dict(gradient=0), dict(moment=0), dict(offset=-1), dict(mass=float("nan"))])
    def test_params(self, kw):
        with pytest.raises(ConfigError):
            PhysicalParams(**kw)

    @pytest.mark.parametrize("kw", [dict(t_end=0), dict(n_steps=9), dict(commitment_window=1.0),
                                    dict(commitment_margin=0), dict(n_steps=10.5)])
    def test_integrator(self, kw):
        with pytest.raises(ConfigError):
            IntegratorConfig(**kw)

    def test_kappa(self):
        with pytest.raises(ConfigError):
            Kappa(0)
        with pytest.raises(ConfigError):
            Kappa(1, 0)
        assert Kappa.from_value(-3).value == -3


@pytest.fixture(scope="module")
def bundle():
    rng = np.random.default_rng(77)
    return rng.standard_normal((2, 2000))


@pytest.mark.parametrize("kap", [-100, -10, -1, -0.5, 0.5, 1, 10, 100])
def test_sign_conservation_along_paths(bundle, kap):
    res = integrate_batch(bundle[0], bundle[1], float(kap), DEFAULT, IntegratorConfig(), store_paths=True)
    u = res.paths[0] - kap * res.paths[1]
    assert np.all(np.sign(u) == np.sign(u[0]))


@pytest.mark.parametrize("kap", [-100, -10, -1, 1, 10, 100])
def test_oracle_equivalence_and_correlation(bundle, kap):
    res = integrate_batch(bundle[0], bundle[1], float(kap), DEFAULT, IntegratorConfig())
    a, b = dynamics.analytic_outcome_batch(bundle[0], bundle[1], float(kap))
    c = res.committed
    assert c.mean() > 0.99
    assert np.array_equal(res.outcome_alice[c], a[c])
    assert np.array_equal(res.outcome_bob[c], b[c])
    assert np.all(res.outcome_alice[c] * res.outcome_bob[c] == -np.sign(kap))


def test_kappa_one_determinism(bundle):
    res = integrate_batch(bundle[0], bundle[1], 1.0, DEFAULT, IntegratorConfig())
    c = res.committed
    assert np.array_equal(res.outcome_alice[c], np.sign(bundle[0] - bundle[1])[c])


def test_offset_has_no_effect(bundle):
    cfg = IntegratorConfig()
    runs = [integrate_batch(bundle[0], bundle[1], 10.0, PhysicalParams(offset=b0), cfg, store_paths=True).paths
            for b0 in (0.0, 1.0, 10.0)]
    assert np.array_equal(runs[0], runs[1]) and np.array_equal(runs[0], runs[2])


def test_rk4_fourth_order(bundle):
    # trajectories starting near z1 = kappa z2 grow exponentially away from it,
    # so the step pair has to resolve that growth before the 1e-6 bound holds
    kap = np.where(np.arange(bundle.shape[1]) % 2, 1.0, -1.0)

    def ends(n):
        r = integrate_batch(bundle[0], bundle[1], kap, DEFAULT, IntegratorConfig(n_steps=n))
        return np.stack([r.z1_end, r.z2_end])

    coarse, fine, ref = ends(2000), ends(4000), ends(32000)
    ratio = np.linalg.norm(coarse - ref) / np.linalg.norm(fine - ref)
    assert 12 <= ratio <= 20
    assert np.max(np.abs(coarse - fine)) < 1e-6


def test_batch_split_is_bit_identical(bundle):
    kap = np.where(np.arange(bundle.shape[1]) % 2, 100.0, -100.0)
    whole = integrate_batch(bundle[0], bundle[1], kap, DEFAULT, IntegratorConfig())
    parts = [integrate_batch(bundle[0, s], bundle[1, s], kap[s], DEFAULT, IntegratorConfig())
             for s in (slice(0, 7), slice(7, 1500), slice(1500, None))]
    assert np.array_equal(whole.z1_end, np.concatenate([p.z1_end for p in parts]))
    assert np.array_equal(whole.z2_end, np.concatenate([p.z2_end for p in parts]))


@pytest.mark.skipif(dynamics.BACKEND != "cython", reason="compiled kernel not built")
def test_backends_agree(bundle):
    p, cfg = DEFAULT, IntegratorConfig()
    kap = np.where(np.arange(bundle.shape[1]) % 3, 10.0, -1.0)
    args = (bundle[0], bundle[1], kap, *p.kernel_coefficients(), cfg.t_end, cfg.n_steps, cfg.window_start, True)
    fast = dynamics._rk4_batch(*args)
    slow = _kernel_py.rk4_batch(*args)
    np.testing.assert_allclose(fast[0], slow[0], rtol=1e-11, atol=1e-11)
    np.testing.assert_allclose(fast[1], slow[1], rtol=1e-11, atol=1e-11)
    np.testing.assert_allclose(fast[4], slow[4], rtol=1e-11, atol=1e-11)
    assert np.array_equal(fast[2], slow[2]) and np.array_equal(fast[3], slow[3])
