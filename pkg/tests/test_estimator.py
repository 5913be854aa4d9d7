"""Slot integrators, phase-offset estimation, adjustment arithmetic."""

import math

import numpy as np
import pytest

from helperhr.estimator import (
    DegenerateObservationError,
    FrameConfig,
    SlotObservation,
    apply_adjustment,
    complex_noise,
    estimate_phase_offset,
    slot_integrals,
    wrap_phase,
)


class TestFrameConfig:
    def test_frame_duration(self):
        fc = FrameConfig(helper_count=3, slot_duration=1e-6, ranging_duration=5e-6)
        assert fc.frame_duration == pytest.approx(2e-6 + 5e-6, rel=1e-15)

    def test_sweep_covers_full_circle(self):
        fc = FrameConfig(2, 1e-6)
        assert fc.sweep_phase(0.0) == 0.0
        assert fc.sweep_phase(1e-6) == pytest.approx(2 * math.pi, rel=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            FrameConfig(0, 1e-6)
        with pytest.raises(ValueError):
            FrameConfig(2, -1.0)


class TestWrapPhase:
    def test_convention(self):
        assert wrap_phase(math.pi) == pytest.approx(math.pi)
        assert wrap_phase(-math.pi) == pytest.approx(math.pi)
        assert wrap_phase(3 * math.pi) == pytest.approx(math.pi)
        assert wrap_phase(0.3) == pytest.approx(0.3)
        assert wrap_phase(-0.3) == pytest.approx(-0.3)
        assert wrap_phase(2 * math.pi + 0.1) == pytest.approx(0.1)


ETA = 9.2e-5
TS = 1e-6


def make_obs(a_p, th_p, a_h, th_b, tau_phase=0.0, noise_psd=0.0, rng=None,
             **kw):
    return slot_integrals(a_p * np.exp(1j * th_p), a_h * np.exp(1j * th_b),
                          ETA, TS, noise_psd=noise_psd, rng=rng,
                          prop_phase=tau_phase, **kw)


class TestSlotIntegrals:
    def test_noise_free_components(self):
        a_p, th_p, a_h, th_b, chi = 0.12, 0.9, 0.064, -1.3, -0.77
        obs = make_obs(a_p, th_p, a_h, th_b, chi)
        assert obs.G0 == pytest.approx(
            ETA * TS * a_p**2 * np.exp(1j * (2 * th_p + chi)), rel=1e-12)
        assert obs.G1 == pytest.approx(
            2 * ETA * TS * a_h * a_p * np.exp(1j * (th_b + th_p + chi)), rel=1e-12)
        assert obs.G2 == pytest.approx(
            ETA * TS * a_h**2 * np.exp(1j * (2 * th_b + chi)), rel=1e-12)

    def test_sweeper_off(self):
        obs = make_obs(0.1, 0.4, 0.0, 0.0)
        assert obs.G1 == 0 and obs.G2 == 0

    def test_equal_amplitude_ratio(self):
        obs = make_obs(0.05, 0.0, 0.05, 1.0)
        assert abs(obs.G1) / abs(obs.G0) == pytest.approx(2.0, rel=1e-12)

    def test_sampled_matches_closed_form(self):
        a_p, th_p, a_h, th_b = 0.11, 0.35, 0.07, -2.0
        closed = make_obs(a_p, th_p, a_h, th_b, 0.2)
        sampled = make_obs(a_p, th_p, a_h, th_b, 0.2, mode="sampled",
                           n_samples=4096)
        for g_c, g_s in (("G0",) * 2, ("G1",) * 2, ("G2",) * 2):
            c, s = getattr(closed, g_c), getattr(sampled, g_s)
            assert s == pytest.approx(c, rel=1e-6)

    def test_sampled_minimum_resolution(self):
        with pytest.raises(ValueError):
            make_obs(0.1, 0.0, 0.1, 0.0, mode="sampled", n_samples=32)

    def test_snr_values(self):
        n0 = 1.5e-19
        obs = make_obs(0.1, 0.0, 0.05, 0.0, noise_psd=n0,
                       rng=np.random.default_rng(0))
        base = ETA**2 * TS / n0
        assert obs.gamma0 == pytest.approx(base * 0.1**4, rel=1e-12)
        assert obs.gamma1 == pytest.approx(base * 4 * 0.05**2 * 0.1**2, rel=1e-12)
        assert obs.gamma2 == pytest.approx(base * 0.05**4, rel=1e-12)
        assert obs.sigma_n2 == pytest.approx(TS * n0, rel=1e-12)


class TestPhaseOffsetEstimate:
    def test_arithmetic_example(self):
        obs = SlotObservation(np.exp(0.5j), np.exp(0.2j), 0j, 1, 1, 1, 0.0)
        assert estimate_phase_offset(obs) == pytest.approx(0.3, rel=1e-12)

    def test_noise_free_offset_with_delay(self):
        # tau-dependent propagation phase cancels in G0 G1*
        obs = make_obs(0.2, 1.0, 0.05, 0.25, tau_phase=-1.234)
        assert estimate_phase_offset(obs) == pytest.approx(0.75, abs=1e-12)

    def test_tau_invariance(self):
        rng = np.random.default_rng(17)
        base = estimate_phase_offset(make_obs(0.2, 0.7, 0.05, -0.6))
        for tau_phase in rng.uniform(-50.0, 50.0, 100):
            est = estimate_phase_offset(make_obs(0.2, 0.7, 0.05, -0.6, tau_phase))
            assert est == pytest.approx(base, abs=1e-9)

    def test_degenerate_inputs(self):
        with pytest.raises(DegenerateObservationError):
            estimate_phase_offset(SlotObservation(0j, 1 + 0j, 0j, 0, 0, 0, 0.0))

    def test_high_snr_unbiasedness(self):
        # K >= 20 dB; the mean estimation error should vanish within 3 s.e.
        rng = np.random.default_rng(99)
        n = 10000
        n0 = ETA**2 * TS * 0.1**4 / 1000.0  # gamma2 = 30 dB at a = 0.1
        errs = np.empty(n)
        for k in range(n):
            obs = make_obs(0.1, 0.8, 0.1, -0.5, noise_psd=n0, rng=rng)
            errs[k] = estimate_phase_offset(obs) - 1.3
        se = errs.std() / math.sqrt(n)
        assert abs(errs.mean()) < 3 * se

    def test_sampled_noise_basis_independence(self):
        # integrator noises must come out uncorrelated with equal variance
        rng = np.random.default_rng(123)
        n, n0 = 20000, 2.0e-13
        g = np.empty((n, 3), dtype=complex)
        for k in range(n):
            obs = make_obs(0.0, 0.0, 0.0, 0.0, noise_psd=n0, rng=rng,
                           mode="sampled", n_samples=64)
            g[k] = (obs.G0, obs.G1, obs.G2)
        cov = g.conj().T @ g / n
        sigma2 = TS * n0
        for i in range(3):
            assert cov[i, i].real == pytest.approx(sigma2, rel=0.05)
            for j in range(i + 1, 3):
                assert abs(cov[i, j]) < 0.05 * sigma2

    def test_closed_mode_noise_variance(self):
        rng = np.random.default_rng(7)
        draws = complex_noise(rng, 2.5, 100000)
        assert np.mean(np.abs(draws) ** 2) == pytest.approx(2.5, rel=0.02)
        assert abs(np.mean(draws)) < 0.02


class TestApplyAdjustment:
    def test_perfect_alignment_sums_amplitudes(self):
        a_p, th_p, a_h, th_b = 0.11, 0.9, 0.05, -2.2
        obs = make_obs(a_p, th_p, a_h, th_b, tau_phase=0.55)
        new_th = apply_adjustment(th_b, estimate_phase_offset(obs))
        total = a_p * np.exp(1j * th_p) + a_h * np.exp(1j * new_th)
        assert abs(total) == pytest.approx(a_p + a_h, rel=1e-12)

    def test_delay_bias_arithmetic(self):
        # 15 m sweep delay against a 1 us slot
        theta_d = 2 * math.pi * (15.0 / 299792458.0) / 1e-6
        assert theta_d == pytest.approx(0.3144, abs=1e-4)
        assert apply_adjustment(0.1, 0.0, theta_d=theta_d) == pytest.approx(
            0.1 + theta_d, rel=1e-12)

    def test_drift_accumulation(self):
        omega_er, k = 2 * math.pi * 9.3e3, 5
        out = apply_adjustment(0.0, 0.0, drift=k * omega_er * 1e-6)
        assert out == pytest.approx(wrap_phase(k * omega_er * 1e-6), rel=1e-12)

    def test_wrapped_output(self):
        out = apply_adjustment(3.0, 3.0)
        assert -math.pi < out <= math.pi
