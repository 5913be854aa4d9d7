"""Single-slot mechanics of the phase-adjustment protocol.

During an adjustment slot one helper sweeps its transmit phase linearly
through 2*pi while the already-aligned helpers hold their tones. Three
Fourier integrators at the sweeping helper separate the received
second-harmonic envelope into a partial-sum term, an intermodulation term
and a self term; the phase offset needed to join the partial sum falls out
of the first two.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DegenerateObservationError(ValueError):
    """Phase estimate requested from an integrator output of zero magnitude."""


def wrap_phase(phi):
    """Wrap an angle into (-pi, pi]."""
    out = np.mod(-np.asarray(phi) + np.pi, 2 * np.pi)
    return -(out - np.pi)


@dataclass(frozen=True)
class FrameConfig:
    """Slotted frame layout: M-1 adjustment slots then a ranging interval.

    Attributes:
        helper_count: number of helpers M (>= 1)
        slot_duration: adjustment slot length T_s [s]
        ranging_duration: ranging interval T_r [s]
    """

    helper_count: int
    slot_duration: float
    ranging_duration: float = 0.0

    def __post_init__(self):
        if self.helper_count < 1:
            raise ValueError("helper_count must be >= 1")
        if self.slot_duration <= 0:
            raise ValueError("slot_duration must be > 0")
        if self.ranging_duration < 0:
            raise ValueError("ranging_duration must be >= 0")

    @property
    def frame_duration(self) -> float:
        """T_f = (M - 1) T_s + T_r [s]."""
        return (self.helper_count - 1) * self.slot_duration + self.ranging_duration

    def sweep_phase(self, t):
        """Linear phase sweep phi(t) = 2 pi t / T_s on [0, T_s]."""
        return 2 * np.pi * np.asarray(t) / self.slot_duration


@dataclass(frozen=True)
class SlotObservation:
    """Outputs of the three slot integrators with their SNRs.

    G0/G1/G2 carry the constant, first and second sweep-harmonic content of
    the received envelope [V s]; sigma_n2 = T_s N_0 is the common noise
    variance of each integrator output.
    """

    G0: complex
    G1: complex
    G2: complex
    gamma0: float
    gamma1: float
    gamma2: float
    sigma_n2: float


def complex_noise(rng: np.random.Generator, variance: float, size=None):
    """Zero-mean circular complex Gaussian samples with E|n|^2 = variance."""
    s = np.sqrt(variance / 2.0)
    return s * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def slot_snrs(a_partial: float, a_sweep: float, eta: float, slot_duration: float,
              noise_psd: float):
    """Per-integrator SNRs (gamma0, gamma1, gamma2) for given amplitudes."""
    if noise_psd <= 0:
        return np.inf, np.inf, np.inf
    base = eta**2 * slot_duration / noise_psd
    return (base * a_partial**4,
            base * 4.0 * a_sweep**2 * a_partial**2,
            base * a_sweep**4)


def slot_integrals(partial, sweeper, eta: float, slot_duration: float,
                   noise_psd: float = 0.0,
                   rng: np.random.Generator | None = None,
                   mode: str = "closed", n_samples: int = 1024,
                   prop_phase: float = 0.0,
                   i2_fn=None) -> SlotObservation:
    """One slot's Fourier-integrator outputs.

    Args:
        partial: complex partial-sum envelope A_p e^{j theta_p} at the tag [V]
        sweeper: complex sweeping-helper envelope A_h e^{j theta_bar} [V]
        eta: combined link gain (with the quadratic tag law folded in)
        slot_duration: T_s [s]
        noise_psd: N_0 [V^2/Hz]; 0 for noise-free evaluation
        rng: random stream for the noise draws (required when noise_psd > 0)
        mode: "closed" evaluates the separable integrals analytically;
            "sampled" integrates a sampled slot (>= 64 samples) with
            per-sample noise of variance N_0/dt
        prop_phase: common propagation phase -2 omega_0 tau applied to all
            signal terms
        i2_fn: optional tag envelope map replacing the quadratic law v -> v^2
            in sampled mode; eta must then exclude the quadratic coefficient

    Noise-free components: G0 = eta T_s A_p^2 e^{2j theta_p},
    G1 = 2 eta T_s A_h A_p e^{j(theta_bar + theta_p)},
    G2 = eta T_s A_h^2 e^{2j theta_bar}, all times e^{j prop_phase}; each
    integrator adds independent complex Gaussian noise of variance T_s N_0.
    """
    a_p = abs(partial)
    a_h = abs(sweeper)
    common = np.exp(1j * prop_phase)
    if mode == "closed":
        if i2_fn is not None:
            raise ValueError("i2_fn requires sampled mode")
        g0 = eta * slot_duration * partial**2 * common
        g1 = 2.0 * eta * slot_duration * sweeper * partial * common
        g2 = eta * slot_duration * sweeper**2 * common
    elif mode == "sampled":
        if n_samples < 64:
            raise ValueError("sampled mode needs >= 64 samples per slot")
        phi = 2 * np.pi * np.arange(n_samples) / n_samples
        v = partial + sweeper * np.exp(1j * phi)
        resp = i2_fn(v) if i2_fn is not None else v**2
        r = eta * resp * common
        dt = slot_duration / n_samples
        if noise_psd > 0:
            if rng is None:
                raise ValueError("noisy evaluation needs an rng")
            r = r + complex_noise(rng, noise_psd / dt, n_samples)
        basis = np.exp(-1j * phi)
        g0 = np.sum(r) * dt
        g1 = np.sum(r * basis) * dt
        g2 = np.sum(r * basis**2) * dt
    else:
        raise ValueError(f"unknown mode: {mode!r}")

    sigma_n2 = slot_duration * noise_psd
    if mode == "closed" and noise_psd > 0:
        if rng is None:
            raise ValueError("noisy evaluation needs an rng")
        g0 = g0 + complex_noise(rng, sigma_n2)
        g1 = g1 + complex_noise(rng, sigma_n2)
        g2 = g2 + complex_noise(rng, sigma_n2)

    gamma0, gamma1, gamma2 = slot_snrs(a_p, a_h, eta, slot_duration, noise_psd)
    return SlotObservation(complex(g0), complex(g1), complex(g2),
                           float(gamma0), float(gamma1), float(gamma2),
                           float(sigma_n2))


def estimate_phase_offset(obs: SlotObservation) -> float:
    """Phase offset estimate arg(G0 G1*) in (-pi, pi].

    In the absence of noise this equals theta_p - theta_bar exactly; the
    propagation phase common to G0 and G1 cancels in the product.
    """
    if abs(obs.G0) == 0.0 or abs(obs.G1) == 0.0:
        raise DegenerateObservationError("zero-magnitude integrator output")
    return float(np.angle(obs.G0 * np.conj(obs.G1)))


def apply_adjustment(theta: float, phi_offset: float, theta_d: float = 0.0,
                     drift: float = 0.0) -> float:
    """New transmit phase after a slot, wrapped to (-pi, pi].

    theta_d is the sweep propagation-delay bias 2 pi tau / T_s; drift is any
    accumulated LO frequency-error phase.
    """
    return float(wrap_phase(theta + phi_offset + theta_d + drift))
