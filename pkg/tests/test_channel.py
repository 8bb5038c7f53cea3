"""Channel generators: spectra, factors, fading statistics, round trips."""

import numpy as np
import pytest
from scipy.special import j0

import rmoamp as rm
from rmoamp import InvalidParameterError


class TestIdentityChannel:
    def test_apply_is_identity(self):
        ch = rm.gen_identity_channel(6, sigma2=0.25)
        x = np.arange(6.0)
        assert np.array_equal(ch.apply(x), x)
        assert np.array_equal(ch.apply_t(x), x)
        assert ch.sigma2 == 0.25
        assert ch.condition_number() == 1.0

    def test_rejects_bad_dim(self):
        with pytest.raises(InvalidParameterError):
            rm.gen_identity_channel(0, sigma2=0.0)


class TestConditionedChannel:
    def test_unit_average_power(self):
        for kappa in (1.0, 3.0, 10.0, 100.0):
            for shape in ("linear", "geometric"):
                ch = rm.gen_conditioned_channel(48, kappa, shape, 0.0, seed=1)
                assert np.isclose(np.mean(ch.s ** 2), 1.0, atol=1e-12)

    def test_condition_number_matches_request(self):
        ch = rm.gen_conditioned_channel(32, 7.5, "geometric", 0.0, seed=2)
        assert np.isclose(ch.condition_number(), 7.5, rtol=1e-12)

    def test_factors_orthogonal(self):
        for method in ("haar", "fast"):
            ch = rm.gen_conditioned_channel(40, 5.0, "linear", 0.0, seed=3,
                                            factor_method=method)
            assert np.max(np.abs(ch.u.T @ ch.u - np.eye(40))) < 1e-10
            assert np.max(np.abs(ch.vt @ ch.vt.T - np.eye(40))) < 1e-10

    def test_spectrum_nonincreasing(self):
        ch = rm.gen_conditioned_channel(25, 9.0, "geometric", 0.0, seed=4)
        assert np.all(np.diff(ch.s) <= 0)

    def test_dense_consistent_with_apply(self):
        ch = rm.gen_conditioned_channel(17, 4.0, "linear", 0.0, seed=5)
        a = ch.dense()
        rng = np.random.Generator(np.random.Philox(6))
        x = rng.standard_normal(17)
        y = rng.standard_normal(17)
        assert np.allclose(ch.apply(x), a @ x, atol=1e-12)
        assert np.allclose(ch.apply_t(y), a.T @ y, atol=1e-12)

    def test_deterministic_in_seed(self):
        a = rm.gen_conditioned_channel(16, 3.0, "linear", 0.1, seed=7)
        b = rm.gen_conditioned_channel(16, 3.0, "linear", 0.1, seed=7)
        c = rm.gen_conditioned_channel(16, 3.0, "linear", 0.1, seed=8)
        assert np.array_equal(a.dense(), b.dense())
        assert not np.allclose(a.dense(), c.dense())

    def test_rejects_bad_parameters(self):
        with pytest.raises(InvalidParameterError):
            rm.gen_conditioned_channel(8, 0.5, "linear", 0.0, seed=0)
        with pytest.raises(InvalidParameterError):
            rm.gen_conditioned_channel(8, 2.0, "parabolic", 0.0, seed=0)
        with pytest.raises(InvalidParameterError):
            rm.gen_conditioned_channel(8, 2.0, "linear", 0.0, seed=0,
                                       factor_method="butterfly")


def make_profile(num_taps=3, doppler=0.1, num_symbols=4, powers=None):
    if powers is None:
        powers = np.full(num_taps, 1.0 / num_taps)
    return rm.FadingProfile(num_taps=num_taps, tap_powers=np.asarray(powers),
                            doppler_rate=doppler, num_symbols=num_symbols)


class TestFadingProfile:
    def test_valid_profile(self):
        p = make_profile(powers=(0.5, 0.3, 0.2))
        assert p.num_taps == 3

    def test_rejects_bad_powers(self):
        with pytest.raises(InvalidParameterError):
            make_profile(powers=(0.5, 0.6, 0.2))
        with pytest.raises(InvalidParameterError):
            make_profile(powers=(0.9, 0.3, -0.2))
        with pytest.raises(InvalidParameterError):
            rm.FadingProfile(num_taps=2, tap_powers=np.array([1.0]),
                             doppler_rate=0.1, num_symbols=1)

    def test_rejects_negative_doppler(self):
        with pytest.raises(InvalidParameterError):
            make_profile(doppler=-0.1)


class TestFadingTaps:
    def test_shape_and_determinism(self):
        p = make_profile(num_symbols=10)
        a = rm.sample_fading_taps(p, seed=1)
        b = rm.sample_fading_taps(p, seed=1)
        assert a.shape == (10, 3)
        assert np.array_equal(a, b)

    def test_tap_variance_matches_powers(self):
        # stationary AR(1): per-tap complex variance equals tap_powers[l]
        p = make_profile(num_taps=2, doppler=0.3828, num_symbols=20000,
                         powers=(0.7, 0.3))
        taps = rm.sample_fading_taps(p, seed=2)
        var = np.mean(np.abs(taps) ** 2, axis=0)
        assert np.allclose(var, [0.7, 0.3], rtol=0.05)

    def test_lag_one_correlation_tracks_doppler(self):
        p = make_profile(num_taps=1, doppler=0.05, num_symbols=40000,
                         powers=(1.0,))
        taps = rm.sample_fading_taps(p, seed=3)[:, 0]
        expected = j0(2 * np.pi * 0.05)
        measured = np.real(np.mean(taps[1:] * np.conj(taps[:-1]))) / np.mean(
            np.abs(taps) ** 2)
        assert abs(measured - expected) < 0.02

    def test_rayleigh_fit_statistic(self):
        p = make_profile(num_taps=8, doppler=0.3828, num_symbols=64,
                         powers=np.full(8, 1 / 8))
        ks, pv = rm.rayleigh_fit_statistic(p, num_samples=100000, seed=5)
        assert 0 < ks < 0.01
        assert pv > 0.01


class TestTdlFadingChannel:
    def test_matches_naive_convolution_oracle(self):
        # independent reconstruction: block-local causal complex convolution,
        # realified with [[a, -b], [b, a]] blocks
        p = make_profile(num_taps=2, doppler=0.1, num_symbols=2)
        ch = rm.gen_tdl_fading_channel(8, p, sigma2=0.0, seed=6)
        taps = rm.sample_fading_taps(p, seed=6)
        n_c = 4
        block = np.minimum(np.arange(n_c) * p.num_symbols // n_c,
                           p.num_symbols - 1)
        rng = np.random.Generator(np.random.Philox(7))
        xr = rng.standard_normal(8)
        xc = xr[0::2] + 1j * xr[1::2]
        yc = np.zeros(n_c, dtype=np.complex128)
        for i in range(n_c):
            for ell in range(min(p.num_taps, i + 1)):
                yc[i] += taps[block[i], ell] * xc[i - ell]
        expected = np.empty(8)
        expected[0::2] = yc.real
        expected[1::2] = yc.imag
        assert np.allclose(ch.apply(xr), expected, atol=1e-10)

    def test_rejects_odd_dim_and_excess_taps(self):
        p = make_profile(num_taps=2, num_symbols=1)
        with pytest.raises(InvalidParameterError):
            rm.gen_tdl_fading_channel(7, p, sigma2=0.0, seed=0)
        big = make_profile(num_taps=5, num_symbols=1,
                           powers=np.full(5, 0.2))
        with pytest.raises(InvalidParameterError):
            rm.gen_tdl_fading_channel(8, big, sigma2=0.0, seed=0)

    def test_svd_factors_reassemble(self):
        p = make_profile(num_taps=3, num_symbols=3)
        ch = rm.gen_tdl_fading_channel(12, p, sigma2=0.1, seed=8)
        assert np.max(np.abs(ch.u @ ch.u.T - np.eye(12))) < 1e-10
        assert np.all(np.diff(ch.s) <= 1e-12)


class TestTransmit:
    def test_noiseless_is_exact(self):
        ch = rm.gen_conditioned_channel(10, 2.0, "linear", 0.0, seed=9)
        x = np.ones(10)
        assert np.array_equal(rm.transmit(ch, x, noise_seed=1), ch.apply(x))

    def test_noise_is_seeded_and_scaled(self):
        ch = rm.gen_identity_channel(5000, sigma2=0.04)
        x = np.zeros(5000)
        y1 = rm.transmit(ch, x, noise_seed=3)
        y2 = rm.transmit(ch, x, noise_seed=3)
        y3 = rm.transmit(ch, x, noise_seed=4)
        assert np.array_equal(y1, y2)
        assert not np.array_equal(y1, y3)
        assert np.isclose(np.var(y1), 0.04, rtol=0.1)


class TestDescriptors:
    @pytest.mark.parametrize("build", [
        lambda: rm.gen_identity_channel(6, 0.2),
        lambda: rm.gen_conditioned_channel(12, 5.0, "geometric", 0.3, seed=11),
        lambda: rm.gen_tdl_fading_channel(
            8, make_profile(num_taps=2, num_symbols=2), 0.1, seed=12),
    ])
    def test_round_trip(self, build):
        ch = build()
        again = rm.channel_from_descriptor(ch.descriptor_json())
        assert np.array_equal(ch.dense(), again.dense())
        assert again.sigma2 == ch.sigma2

    def test_unknown_type_rejected(self):
        with pytest.raises(InvalidParameterError):
            rm.channel_from_descriptor({"type": "quantum"})

    def test_export_dense_round_trip(self, tmp_path):
        ch = rm.gen_conditioned_channel(9, 3.0, "linear", 0.0, seed=13)
        path = tmp_path / "chan.mat"
        ch.export_dense(path)
        assert np.array_equal(rm.read_matrix(path), ch.dense())
