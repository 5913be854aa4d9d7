"""Nonlinear transponder tag model.

A passive harmonic tag is an antenna in series with a Schottky diode. The
diode turns the incident fundamental-band voltage into a multiband current;
the second-harmonic component is what the radar receiver listens for. This
module provides the exact diode response (principal-branch Lambert W), the
small-signal quadratic and large-signal linear envelope approximations, and
direct second-harmonic extraction from sampled bandpass waveforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ConvergenceError(RuntimeError):
    """Iterative evaluation failed to converge."""


@dataclass(frozen=True)
class TagParams:
    """Diode and tag-antenna constants.

    Attributes:
        saturation_current: diode saturation current I_s [A]
        ideality: diode ideality factor n_i (>= 1)
        thermal_voltage: thermal voltage V_T [V]
        fundamental_resistance: effective tag resistance R_F at the
            fundamental [ohm]
        harmonic_resistance: effective tag output resistance R_H at the
            second harmonic [ohm]
        input_efficiency: power transfer efficiency k_in at the fundamental
        output_efficiency: power transfer efficiency k_out at the harmonic
        gain_fundamental: tag antenna gain at the fundamental, linear
        gain_harmonic: tag antenna gain at the second harmonic, linear
    """

    saturation_current: float
    ideality: float
    thermal_voltage: float
    fundamental_resistance: float
    harmonic_resistance: float
    input_efficiency: float = 1.0
    output_efficiency: float = 1.0
    gain_fundamental: float = 1.0
    gain_harmonic: float = 1.0
    rho: float = field(init=False)

    def __post_init__(self):
        if self.saturation_current <= 0:
            raise ValueError("saturation_current must be > 0")
        if self.ideality < 1.0:
            raise ValueError("ideality must be >= 1")
        if self.thermal_voltage <= 0:
            raise ValueError("thermal_voltage must be > 0")
        for name in ("fundamental_resistance", "harmonic_resistance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("input_efficiency", "output_efficiency"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        object.__setattr__(
            self,
            "rho",
            self.saturation_current * self.fundamental_resistance
            / (self.ideality * self.thermal_voltage),
        )

    @property
    def diode_voltage_scale(self) -> float:
        """n_i * V_T [V], the voltage normalization of the diode equation."""
        return self.ideality * self.thermal_voltage


@dataclass(frozen=True)
class BandpassWaveform:
    """Real bandpass voltage record spanning an integer number of cycles.

    Attributes:
        samples: real voltage samples [V]
        sample_rate: [Hz], at least 32 samples per carrier cycle
        carrier_frequency: omega_0 [rad/s]
    """

    samples: np.ndarray
    sample_rate: float
    carrier_frequency: float

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))
        f0 = self.carrier_frequency / (2 * np.pi)
        if self.sample_rate < 32.0 * f0 * (1 - 1e-12):
            raise ValueError("sample_rate must be >= 32 samples per carrier cycle")
        n_cycles = self.duration * f0
        if abs(n_cycles - round(n_cycles)) > 1e-6 * max(n_cycles, 1.0):
            raise ValueError("duration must span an integer number of carrier cycles")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate


def lambert_w0(x):
    """Principal branch of the Lambert W function.

    Halley iteration, relative residual <= 1e-12 in w*exp(w) = x.
    Accepts scalars or arrays; defined for x >= -1/e.
    """
    x_arr = np.asarray(x, dtype=float)
    scalar = x_arr.ndim == 0
    x_arr = np.atleast_1d(x_arr)
    if np.any(x_arr < -1.0 / math.e - 1e-15):
        raise ValueError("lambert_w0 requires x >= -1/e")

    w = np.where(x_arr >= 0.0, np.log1p(x_arr), 0.0)
    neg = x_arr < 0.0
    if np.any(neg):
        # series around the branch point; adequate seed on the whole (-1/e, 0)
        p = np.sqrt(np.maximum(2.0 * (math.e * x_arr + 1.0), 0.0))
        w = np.where(neg, -1.0 + p - p * p / 3.0 + 11.0 * p**3 / 72.0, w)
        w = np.where(neg & (x_arr > -0.2), x_arr * (1.0 - x_arr), w)

    tol = 1e-12
    for _ in range(50):
        ew = np.exp(w)
        f = w * ew - x_arr
        wp1 = w + 1.0
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        step = f / denom
        w = w - step
        if np.all(np.abs(f) <= tol * np.maximum(np.abs(x_arr), 1e-300)):
            break
    else:
        resid = np.abs(w * np.exp(w) - x_arr)
        if np.any(resid > tol * np.maximum(np.abs(x_arr), 1e-300)):
            raise ConvergenceError("lambert_w0 did not converge in 50 iterations")
    return float(w[0]) if scalar else w


def diode_current(v_tilde, params: TagParams):
    """Exact multiband diode current for instantaneous voltage v_tilde [V].

    Solves the implicit series-circuit diode equation in closed form through
    the Lambert W function. Vectorized over v_tilde.
    """
    rho = params.rho
    u = np.asarray(v_tilde, dtype=float) / params.diode_voltage_scale
    w = lambert_w0(rho * np.exp(rho + u))
    return (w / rho - 1.0) * params.saturation_current


def beta_coefficient(params: TagParams, mode: str = "series") -> float:
    """Small-signal second-harmonic coefficient beta [1/V].

    mode "series" sums the alternating series until terms fall below
    1e-15 of the partial sum (capped at 60 terms); "simplified" returns
    rho / (4 n_i V_T), adequate for rho < 0.04.
    """
    rho = params.rho
    scale = 4.0 * params.diode_voltage_scale
    if mode == "simplified":
        return rho / scale
    if mode != "series":
        raise ValueError(f"unknown beta mode: {mode!r}")
    q = rho * math.exp(rho)
    total = 0.0
    prev = math.inf
    growing = 0
    for n in range(1, 61):
        term = n ** (n + 1) * (-1.0) ** (n - 1) / math.factorial(n) * q**n
        total += term
        if abs(term) > prev:
            growing += 1
            if growing >= 3:
                raise ConvergenceError("beta series diverges for these parameters")
        else:
            growing = 0
        if abs(term) < 1e-15 * abs(total):
            break
        prev = abs(term)
    return total / scale


def quadratic_envelope(v_in, params: TagParams, beta_mode: str = "series"):
    """Small-signal second-harmonic current envelope: beta * v_in^2 / R_F [A]."""
    beta = beta_coefficient(params, beta_mode)
    return beta * np.asarray(v_in) ** 2 / params.fundamental_resistance


def large_signal_envelope(v_in, params: TagParams):
    """Large-signal second-harmonic current envelope [A].

    Magnitude (2/3pi) |v_in| / R_F, phase exactly doubled.
    """
    v = np.asarray(v_in)
    mag = np.abs(v)
    out = np.zeros_like(v, dtype=complex)
    nz = mag > 0
    coeff = 2.0 / (3.0 * np.pi * params.fundamental_resistance)
    if np.ndim(v) == 0:
        if mag == 0:
            return 0j
        return coeff * mag * np.exp(2j * np.angle(v))
    out[nz] = coeff * mag[nz] * np.exp(2j * np.angle(v[nz]))
    return out


def second_harmonic_envelope(waveform: BandpassWaveform, params: TagParams) -> complex:
    """Second-harmonic current envelope a2 - j*b2 of the tag response [A].

    a2 and b2 are the cos(2 w0 t) / sin(2 w0 t) Fourier coefficients of the
    exact diode current, obtained by trapezoid quadrature over the integer
    number of carrier cycles in the waveform, scaled by 2/duration.
    """
    f0 = waveform.carrier_frequency / (2 * np.pi)
    n_cycles = waveform.duration * f0
    if abs(n_cycles - round(n_cycles)) > 1e-6 * max(n_cycles, 1.0):
        raise ValueError("waveform must span an integer number of carrier cycles")
    i_t = diode_current(waveform.samples, params)
    t = waveform.times
    # close the periodic interval so the trapezoid spans full cycles
    tc = np.concatenate([t, [waveform.duration]])
    ic = np.concatenate([i_t, [i_t[0]]])
    arg = 2.0 * waveform.carrier_frequency * tc
    a2 = 2.0 / waveform.duration * np.trapezoid(ic * np.cos(arg), tc)
    b2 = 2.0 / waveform.duration * np.trapezoid(ic * np.sin(arg), tc)
    return complex(a2, -b2)


def tone_waveform(amplitude: float, phase: float, params: TagParams,
                  carrier_frequency: float = 2 * np.pi * 1e6,
                  samples_per_cycle: int = 64, cycles: int = 8) -> BandpassWaveform:
    """Bandpass tone Re{A e^{j phase} e^{j w0 t}} sampled over whole cycles."""
    f0 = carrier_frequency / (2 * np.pi)
    rate = samples_per_cycle * f0
    n = samples_per_cycle * cycles
    t = np.arange(n) / rate
    samples = amplitude * np.cos(carrier_frequency * t + phase)
    return BandpassWaveform(samples, rate, carrier_frequency)


def tone_second_harmonic(amplitude: float, params: TagParams,
                         samples_per_cycle: int = 256, cycles: int = 1) -> float:
    """Exact second-harmonic current amplitude for a tone of amplitude A [V].

    The response to a steady tone is periodic, so a single densely sampled
    cycle suffices.
    """
    w = tone_waveform(amplitude, 0.0, params,
                      samples_per_cycle=samples_per_cycle, cycles=cycles)
    return abs(second_harmonic_envelope(w, params))


class SecondHarmonicTable:
    """Interpolation table of the exact tone response amplitude.

    Tabulates |i2|(A) on [0, a_max] for fast evaluation of the quasi-static
    envelope map i2(v) = |i2|(|v|) e^{2j arg v} inside sweeps and Monte
    Carlo slots.
    """

    def __init__(self, params: TagParams, a_max: float, n_points: int = 2048,
                 samples_per_cycle: int = 1024):
        self.params = params
        self.a_max = float(a_max)
        self.amplitudes = np.linspace(0.0, self.a_max, n_points)
        theta = (np.arange(samples_per_cycle) + 0.5) * (2 * np.pi / samples_per_cycle)
        cos_t = np.cos(theta)
        cos_2t = np.cos(2 * theta)
        rho = params.rho
        scale = params.diode_voltage_scale
        # one Lambert W sweep per table row, midpoint rule over one cycle
        u = self.amplitudes[:, None] * cos_t[None, :] / scale
        w = lambert_w0(rho * np.exp(rho + u))
        i_t = (w / rho - 1.0) * params.saturation_current
        self.values = 2.0 * np.mean(i_t * cos_2t[None, :], axis=1)

    def amplitude(self, a):
        """|i2| [A] for tone amplitude a [V] (interpolated)."""
        a = np.asarray(a, dtype=float)
        if np.any(a > self.a_max * (1 + 1e-9)):
            raise ValueError("amplitude outside tabulated range")
        return np.interp(a, self.amplitudes, self.values)

    def envelope(self, v):
        """Quasi-static second-harmonic envelope for complex input envelope v."""
        v = np.asarray(v, dtype=complex)
        mag = np.abs(v)
        out = np.zeros_like(v)
        nz = mag > 0
        out[nz] = self.amplitude(mag[nz]) * np.exp(2j * np.angle(v[nz]))
        return out


def small_signal_bound(params: TagParams) -> float:
    """Advisory upper voltage amplitude [V] of the quadratic regime."""
    rho = params.rho
    return (-1.0 - math.log(rho) - rho) * params.diode_voltage_scale


def is_small_signal(v_amplitude: float, params: TagParams) -> bool:
    """Advisory check that a tone amplitude sits in the quadratic regime."""
    return abs(v_amplitude) < small_signal_bound(params)
