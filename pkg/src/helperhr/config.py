"""Experiment configuration: loading, validation, emission, presets.

Configurations live in an INI-style sectioned key/value file (gains in dBi,
converted to linear at load time) with JSON import/export for tooling.
Environment variables prefixed HELPERHR_ override individual fields, e.g.
HELPERHR_RUN_SEED=7 or HELPERHR_IMPAIRMENTS_PPM_ERROR=5.
"""

from __future__ import annotations

import configparser
import json
import math
import os
from dataclasses import dataclass
from io import StringIO

from .estimator import FrameConfig
from .link import Geometry, SystemParams
from .montecarlo import ImpairmentConfig, Scenario
from .tag import TagParams


class ConfigError(ValueError):
    """Configuration file is unreadable, incomplete, or inconsistent."""


def _db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def _linear_to_db(lin: float) -> float:
    return 10.0 * math.log10(lin)


@dataclass(frozen=True)
class RunConfig:
    """Execution knobs for the Monte Carlo subcommands."""

    trials: int = 10000
    seed: int = 1
    mode: str = "envelope"
    tag_model: str = "quadratic"
    output: str = ""

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("run.trials must be >= 1")
        if self.mode not in ("envelope", "waveform"):
            raise ConfigError("run.mode must be 'envelope' or 'waveform'")
        if self.tag_model not in ("quadratic", "exact"):
            raise ConfigError("run.tag_model must be 'quadratic' or 'exact'")


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one experiment."""

    system: SystemParams
    tag: TagParams
    geometry: Geometry
    frame: FrameConfig
    impairments: ImpairmentConfig
    run: RunConfig

    def validate(self) -> "ExperimentConfig":
        if self.frame.helper_count != self.geometry.helper_count:
            raise ConfigError(
                "frame.helper_count must match geometry.helper_distances_m "
                f"({self.frame.helper_count} vs {self.geometry.helper_count})")
        scen = self.scenario()
        if not scen.gamma2 > 0:
            raise ConfigError("derived gamma2 must be > 0")
        return self

    def scenario(self, tag_model: str | None = None) -> Scenario:
        return Scenario.from_link_budget(
            self.system, self.tag, self.geometry, self.frame.slot_duration,
            tag_model=tag_model or self.run.tag_model,
            ranging_duration=self.frame.ranging_duration)


# field tables: (ini name, attribute, parser, emitter)
_F = float
_I = int
_S = str


def _bool(s):
    if isinstance(s, bool):
        return s
    s = s.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s):
    if isinstance(s, (list, tuple)):
        return tuple(float(v) for v in s)
    return tuple(float(v) for v in s.split(",") if v.strip())


_SCHEMA = {
    "system": [
        ("f0_hz", "f0", _F),
        ("transmit_power_w", "transmit_power", _F),
        ("gain_tx_dbi", "gain_tx", "db"),
        ("gain_rx_dbi", "gain_rx", "db"),
        ("bandwidth_hz", "bandwidth", _F),
        ("noise_figure_db", "noise_figure_db", _F),
        ("r_tx_ohm", "r_tx", _F),
        ("r_rx_ohm", "r_rx", _F),
        ("noise_temperature_k", "noise_temperature", _F),
        ("noise_figure_convention", "noise_figure_convention", _S),
    ],
    "tag": [
        ("saturation_current_a", "saturation_current", _F),
        ("ideality", "ideality", _F),
        ("thermal_voltage_v", "thermal_voltage", _F),
        ("fundamental_resistance_ohm", "fundamental_resistance", _F),
        ("harmonic_resistance_ohm", "harmonic_resistance", _F),
        ("input_efficiency", "input_efficiency", _F),
        ("output_efficiency", "output_efficiency", _F),
        ("gain_fundamental_dbi", "gain_fundamental", "db"),
        ("gain_harmonic_dbi", "gain_harmonic", "db"),
    ],
    "geometry": [
        ("rn_distance_m", "rn_distance", _F),
        ("helper_distances_m", "helper_distances", _floats),
        ("lo_phases_rad", "lo_phases", _floats),
    ],
    "frame": [
        ("helper_count", "helper_count", _I),
        ("slot_duration_s", "slot_duration", _F),
        ("ranging_duration_s", "ranging_duration", _F),
    ],
    "impairments": [
        ("ppm_error", "ppm_error", _F),
        ("delay_error_enabled", "delay_error_enabled", _bool),
        ("draw", "draw", _S),
    ],
    "run": [
        ("trials", "trials", _I),
        ("seed", "seed", _I),
        ("mode", "mode", _S),
        ("tag_model", "tag_model", _S),
        ("output", "output", _S),
    ],
}

_CLASSES = {
    "system": SystemParams,
    "tag": TagParams,
    "geometry": Geometry,
    "frame": FrameConfig,
    "impairments": ImpairmentConfig,
    "run": RunConfig,
}

_OPTIONAL = {("geometry", "lo_phases_rad"), ("run", "output"),
             ("system", "noise_figure_convention"), ("impairments", "draw")}


def _build_section(section: str, raw: dict) -> object:
    kwargs = {}
    for ini_name, attr, parser in _SCHEMA[section]:
        if ini_name not in raw:
            if (section, ini_name) in _OPTIONAL:
                continue
            raise ConfigError(f"missing field [{section}] {ini_name}")
        value = raw[ini_name]
        try:
            if parser == "db":
                kwargs[attr] = _db_to_linear(float(value))
            else:
                kwargs[attr] = parser(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for [{section}] {ini_name}: {exc}") from exc
    try:
        return _CLASSES[section](**kwargs)
    except (ValueError, ConfigError) as exc:
        raise ConfigError(f"invalid [{section}] settings: {exc}") from exc


def _apply_env_overrides(sections: dict, environ=None) -> dict:
    env = os.environ if environ is None else environ
    for section, fields in _SCHEMA.items():
        for ini_name, _, _ in fields:
            key = f"HELPERHR_{section.upper()}_{ini_name.upper()}"
            if key in env:
                sections.setdefault(section, {})[ini_name] = env[key]
    return sections


def _config_from_sections(sections: dict, environ=None) -> ExperimentConfig:
    sections = _apply_env_overrides(sections, environ)
    missing = [s for s in _SCHEMA if s not in sections]
    if missing:
        raise ConfigError(f"missing section(s): {', '.join(missing)}")
    parts = {s: _build_section(s, sections[s]) for s in _SCHEMA}
    return ExperimentConfig(
        system=parts["system"], tag=parts["tag"], geometry=parts["geometry"],
        frame=parts["frame"], impairments=parts["impairments"],
        run=parts["run"]).validate()


def load_config(path: str, environ=None) -> ExperimentConfig:
    """Load and validate an experiment configuration.

    `path` may be an INI file, a JSON file (by .json suffix), or the name of
    a bundled preset ("xband-sto2020").
    """
    if path in _PRESETS:
        return _config_from_sections(
            {s: dict(v) for s, v in _PRESETS[path].items()}, environ)
    if path.endswith(".json"):
        try:
            with open(path) as fh:
                sections = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config JSON parse error at line {exc.lineno}: "
                              f"{exc.msg}") from exc
        return _config_from_sections(sections, environ)
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    sections = {s: dict(parser.items(s)) for s in parser.sections()}
    return _config_from_sections(sections, environ)


def _sections_from_config(config: ExperimentConfig) -> dict:
    def fmt(v):
        if isinstance(v, float):
            return f"{v:.17g}"
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, tuple):
            return ", ".join(f"{x:.17g}" for x in v)
        return str(v)

    out = {}
    objs = {"system": config.system, "tag": config.tag,
            "geometry": config.geometry, "frame": config.frame,
            "impairments": config.impairments, "run": config.run}
    for section, fields in _SCHEMA.items():
        obj = objs[section]
        sec = {}
        for ini_name, attr, parser in fields:
            value = getattr(obj, attr)
            if parser == "db":
                value = _linear_to_db(value)
            sec[ini_name] = fmt(value)
        out[section] = sec
    return out


def emit_config(config: ExperimentConfig, path: str | None = None) -> str:
    """Write a configuration as INI text (or JSON for .json paths).

    Floats carry 17 significant digits so load(emit(config)) round-trips
    field-exactly.
    """
    sections = _sections_from_config(config)
    if path is not None and path.endswith(".json"):
        text = json.dumps(sections, indent=2)
        with open(path, "w") as fh:
            fh.write(text + "\n")
        return text
    parser = configparser.ConfigParser()
    for section, values in sections.items():
        parser[section] = values
    buf = StringIO()
    parser.write(buf)
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


# X-band bench system: 9.3 GHz, 10 W, 15 dBi antennas, 125 kHz receiver,
# wire dipole tag with an SMS7630-040 Schottky diode, four helpers at the
# 15 m maximum detection range of the helper-free link.
_PRESETS = {
    "xband-sto2020": {
        "system": {
            "f0_hz": "9.3e9",
            "transmit_power_w": "10",
            "gain_tx_dbi": "15",
            "gain_rx_dbi": "15",
            "bandwidth_hz": "125e3",
            "noise_figure_db": "2.5",
            "r_tx_ohm": "50",
            "r_rx_ohm": "50",
            "noise_temperature_k": "290",
            "noise_figure_convention": "nf-minus-one",
        },
        "tag": {
            "saturation_current_a": "5e-6",
            "ideality": "1.05",
            "thermal_voltage_v": "26e-3",
            "fundamental_resistance_ohm": "132",
            "harmonic_resistance_ohm": "146",
            "input_efficiency": "1",
            "output_efficiency": "1",
            "gain_fundamental_dbi": "2.2",
            "gain_harmonic_dbi": "3.15",
        },
        "geometry": {
            "rn_distance_m": "15",
            "helper_distances_m": "15, 15, 15, 15",
        },
        "frame": {
            "helper_count": "4",
            "slot_duration_s": "1e-6",
            "ranging_duration_s": "0",
        },
        "impairments": {
            "ppm_error": "0",
            "delay_error_enabled": "false",
            "draw": "uniform",
        },
        "run": {
            "trials": "10000",
            "seed": "1",
            "mode": "envelope",
            "tag_model": "quadratic",
            "output": "",
        },
    },
}

PRESET_NAMES = tuple(_PRESETS)
