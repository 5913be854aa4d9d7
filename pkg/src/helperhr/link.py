"""Uplink/downlink budget of the harmonic radar link.

Free-space amplitude gains at the fundamental and the second harmonic,
voltage amplitudes at the tag, the combined link constant, receiver noise
levels, and the three-term composition of the received envelope when helper
tones are present.

Power convention: envelope powers are |v|^2 / (2R) at the stated reference
resistance. Received powers and the noise power are quoted on an
Rx-resistance-normalized scale so that reported levels and all SNRs are
independent of R_rx.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .tag import TagParams, SecondHarmonicTable, beta_coefficient, tone_second_harmonic

SPEED_OF_LIGHT = 299792458.0  # m/s, exact
BOLTZMANN = 1.380649e-23      # J/K, exact


@dataclass(frozen=True)
class SystemParams:
    """Ranging-node and helper radio constants.

    Attributes:
        f0: fundamental carrier frequency [Hz]
        transmit_power: P_r [W]
        gain_tx: transmit antenna gain, linear
        gain_rx: receive antenna gain, linear
        r_tx: transmit antenna resistance [ohm]
        r_rx: receive antenna resistance [ohm]
        bandwidth: receiver bandwidth B_r [Hz]
        noise_figure_db: receiver noise figure [dB]
        noise_temperature: T_n [K]
        noise_figure_convention: "nf-minus-one" applies (NF-1) in the noise
            PSD; "nf" applies NF directly.
    """

    f0: float
    transmit_power: float
    gain_tx: float
    gain_rx: float
    bandwidth: float
    noise_figure_db: float
    r_tx: float = 50.0
    r_rx: float = 50.0
    noise_temperature: float = 290.0
    noise_figure_convention: str = "nf-minus-one"

    def __post_init__(self):
        if not 0.0 < self.f0 < 100e9:
            raise ValueError("f0 must lie in (0, 100 GHz)")
        for name in ("transmit_power", "gain_tx", "gain_rx", "bandwidth",
                     "r_tx", "r_rx", "noise_temperature"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.noise_figure_db < 0:
            raise ValueError("noise_figure_db must be >= 0")
        if self.noise_figure_convention not in ("nf-minus-one", "nf"):
            raise ValueError("noise_figure_convention must be 'nf-minus-one' or 'nf'")

    @property
    def omega0(self) -> float:
        return 2 * math.pi * self.f0


@dataclass(frozen=True)
class Geometry:
    """Scene geometry: tag distances and helper LO phases.

    Attributes:
        rn_distance: ranging node to tag distance d_r [m]
        helper_distances: helper-to-tag distances d_m [m]
        lo_phases: helper LO phases theta_m relative to the RN [rad]
    """

    rn_distance: float
    helper_distances: tuple = ()
    lo_phases: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "helper_distances", tuple(self.helper_distances))
        phases = tuple(self.lo_phases) if self.lo_phases else (0.0,) * len(self.helper_distances)
        object.__setattr__(self, "lo_phases", phases)
        if self.rn_distance <= 0:
            raise ValueError("rn_distance must be > 0")
        if any(d <= 0 for d in self.helper_distances):
            raise ValueError("helper_distances must be > 0")
        if len(self.lo_phases) != len(self.helper_distances):
            raise ValueError("lo_phases length must match helper_distances")

    @property
    def helper_count(self) -> int:
        return len(self.helper_distances)

    @property
    def rn_delay(self) -> float:
        """Propagation delay tau_r = d_r / c [s]."""
        return self.rn_distance / SPEED_OF_LIGHT

    @property
    def helper_delays(self) -> np.ndarray:
        return np.asarray(self.helper_distances) / SPEED_OF_LIGHT

    def rn_phase_shift(self, omega0: float) -> float:
        """theta_r = -omega0 tau_r [rad]."""
        return -omega0 * self.rn_delay

    def helper_phase_shifts(self, omega0: float) -> np.ndarray:
        """Effective tone phases at the tag, theta_m - omega0 d_m / c [rad]."""
        return np.asarray(self.lo_phases) - omega0 * self.helper_delays


def uplink_gain(d: float, sys: SystemParams, tag: TagParams):
    """Amplitude path gain at the fundamental, RN antenna to tag antenna."""
    return np.sqrt(sys.gain_tx * tag.gain_fundamental) * (
        SPEED_OF_LIGHT / (2.0 * sys.omega0 * np.asarray(d, dtype=float)))


def downlink_gain(d: float, sys: SystemParams, tag: TagParams):
    """Amplitude path gain at the second harmonic, tag antenna to RN receiver."""
    return np.sqrt(sys.gain_rx * tag.gain_harmonic) * (
        SPEED_OF_LIGHT / (4.0 * sys.omega0 * np.asarray(d, dtype=float)))


def tag_input_amplitude(d: float, sys: SystemParams, tag: TagParams):
    """Envelope amplitude A_r [V] of the RN signal at the tag input."""
    return np.sqrt(2.0 * tag.fundamental_resistance * tag.input_efficiency
                   * sys.transmit_power) * uplink_gain(d, sys, tag)


def tag_input_power(d: float, sys: SystemParams, tag: TagParams):
    """Power delivered into the tag at the fundamental, h_u^2 P_r [W]."""
    A = tag_input_amplitude(d, sys, tag)
    return A**2 / (2.0 * tag.fundamental_resistance)


def eta_link_gain(d: float, sys: SystemParams, tag: TagParams,
                  beta_mode: str = "series"):
    """Combined downlink constant eta = h_d beta sqrt(R_H R_rx k_out) / R_F."""
    beta = beta_coefficient(tag, beta_mode)
    return downlink_gain(d, sys, tag) * beta * np.sqrt(
        tag.harmonic_resistance * sys.r_rx * tag.output_efficiency
    ) / tag.fundamental_resistance


def received_power_conventional(d, sys: SystemParams, tag: TagParams,
                                model: str = "quadratic",
                                harmonic_table: SecondHarmonicTable | None = None):
    """Received second-harmonic power [W] of the helper-free link.

    P_rec = h_d^2 k_out R_H I_2^2 / 2 on the R_rx-normalized scale, with the
    second-harmonic current amplitude I_2 taken from the quadratic envelope
    model or from the exact diode response.
    """
    d = np.asarray(d, dtype=float)
    A = tag_input_amplitude(d, sys, tag)
    if model == "quadratic":
        beta = beta_coefficient(tag)
        i2 = beta * A**2 / tag.fundamental_resistance
    elif model == "exact":
        if harmonic_table is not None:
            i2 = harmonic_table.amplitude(A)
        elif d.ndim == 0:
            i2 = tone_second_harmonic(float(A), tag)
        else:
            i2 = np.array([tone_second_harmonic(a, tag) for a in np.atleast_1d(A)])
    else:
        raise ValueError(f"unknown model: {model!r}")
    hd = downlink_gain(d, sys, tag)
    return hd**2 * tag.output_efficiency * tag.harmonic_resistance * i2**2 / 2.0


def noise_psd(sys: SystemParams) -> float:
    """One-sided noise PSD N_0 = R_rx k_B T_n (NF - 1) [V^2/Hz].

    The "nf" convention applies the noise figure without the -1 term.
    """
    nf = 10.0 ** (sys.noise_figure_db / 10.0)
    factor = nf - 1.0 if sys.noise_figure_convention == "nf-minus-one" else nf
    return sys.r_rx * BOLTZMANN * sys.noise_temperature * factor


def noise_power(sys: SystemParams) -> float:
    """Receiver noise power P_n = 2 B_r N_0 [W], R_rx-normalized scale."""
    return 2.0 * sys.bandwidth * noise_psd(sys) / sys.r_rx


@dataclass(frozen=True)
class LinkGains:
    """Materialized link quantities for one geometry."""

    h_u_rn: float
    h_d_rn: float
    eta: float
    tag_amplitude: float          # A_r [V]
    helper_amplitudes: np.ndarray  # A_h,m [V]
    noise_psd: float              # N_0 [V^2/Hz]


def link_gains(sys: SystemParams, tag: TagParams, geo: Geometry,
               beta_mode: str = "series") -> LinkGains:
    """Evaluate all link constants for a scene."""
    d = geo.rn_distance
    helpers = np.asarray(geo.helper_distances, dtype=float)
    A_h = (np.sqrt(2.0 * tag.input_efficiency * tag.fundamental_resistance
                   * sys.transmit_power) * uplink_gain(helpers, sys, tag)
           if helpers.size else np.zeros(0))
    return LinkGains(
        h_u_rn=float(uplink_gain(d, sys, tag)),
        h_d_rn=float(downlink_gain(d, sys, tag)),
        eta=float(eta_link_gain(d, sys, tag, beta_mode)),
        tag_amplitude=float(tag_input_amplitude(d, sys, tag)),
        helper_amplitudes=A_h,
        noise_psd=noise_psd(sys),
    )


def compose_received(a_r: float, theta_r: float, a_h: float, theta_h: float,
                     eta: float):
    """Three-term received envelope of the helper-aided link.

    Returns the complex coefficients (ranging, intermodulation, helper) of
    the received envelope; the ranging and intermodulation terms multiply
    x^2(t - 2 tau_r) and x(t - 2 tau_r) respectively.
    """
    if a_r < 0 or a_h < 0:
        raise ValueError("amplitudes must be >= 0")
    common = np.exp(2j * theta_r)
    term_ranging = eta * a_r**2 * np.exp(2j * theta_r) * common
    term_intermod = eta * 2.0 * a_r * a_h * np.exp(1j * (theta_r + theta_h)) * common
    term_helpers = eta * a_h**2 * np.exp(2j * theta_h) * common
    return term_ranging, term_intermod, term_helpers


def intermodulation_power(a_r: float, a_h: float) -> float:
    """Instantaneous intermodulation power 4 A_h^2 A_r^2, eta-normalized."""
    return 4.0 * a_h**2 * a_r**2


def watts_to_dbm(p):
    """Power [W] to dBm."""
    return 10.0 * np.log10(np.asarray(p, dtype=float) / 1e-3)


def db_re_1w(p):
    """Power [W] to dB relative to 1 W (convention used for the reported
    tag input power)."""
    return 10.0 * np.log10(np.asarray(p, dtype=float))
