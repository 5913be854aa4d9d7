"""Harmonic radar with adaptively phase-coherent helper transmitters.

Simulation and analysis toolkit: nonlinear tag model, link budget, the
slotted phase-adjustment protocol, its closed-form statistics, and Monte
Carlo evaluation of the range extension they provide.
"""

from .config import ConfigError, ExperimentConfig, RunConfig, emit_config, load_config
from .distributions import (
    GriddedPdf,
    PhaseErrorSampler,
    alpha2_pdf,
    alpha_pdf_chain,
    alpha_pdf_recursive,
    alpha_update,
    conditional_alpha_pdf,
    incoherent_power_cdf,
    k_factor,
    phase_error_pdf,
    ref_coherent,
    ref_conventional,
    ref_distribution,
    ref_percentile,
    slot_bounds,
)
from .estimator import (
    FrameConfig,
    SlotObservation,
    apply_adjustment,
    estimate_phase_offset,
    slot_integrals,
    wrap_phase,
)
from .link import (
    Geometry,
    LinkGains,
    SystemParams,
    compose_received,
    downlink_gain,
    eta_link_gain,
    link_gains,
    noise_power,
    noise_psd,
    received_power_conventional,
    tag_input_amplitude,
    tag_input_power,
    uplink_gain,
)
from .montecarlo import (
    ImpairmentConfig,
    Scenario,
    TrialRecord,
    estimate_alpha_distribution,
    ref_cdf,
    run_adjustment_frame,
    simulate_trials,
    tag_regime_sweep,
)
from .tag import (
    BandpassWaveform,
    SecondHarmonicTable,
    TagParams,
    beta_coefficient,
    diode_current,
    lambert_w0,
    large_signal_envelope,
    quadratic_envelope,
    second_harmonic_envelope,
    tone_second_harmonic,
)

__version__ = "0.1.0"
