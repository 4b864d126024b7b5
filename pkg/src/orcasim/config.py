"""Strict TOML run configuration.

One file drives every command: sections mirror the module dataclasses
key-for-key, every key has a default equal to the reference operating
point, and unknown sections or keys fail fast with the offending name.
The merged configuration hashes to a provenance string stamped into all
outputs, so a result file always names the exact configuration that
produced it.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import replace

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import constants as const
from .detection import DetectionChain
from .errors import ConfigurationError
from .experiment import MemoryExperiment, NoiseModel, PulseSequence
from .physics import BeamGeometry, HyperfinePathwaySet, LadderScheme, VaporEnsemble
from .solver import RetrievalDirection, SolverConfig

DEFAULT_CONFIG: dict = {
    "seed": 12345,
    "output_dir": "orcasim-out",
    "scheme": {
        "lambda_signal": 1529.3e-9,
        "lambda_control": 780.3e-9,
        "delta_intermediate": 2.0 * math.pi * 6.0e9,
        "gamma_intermediate": 2.0 * math.pi * 6.07e6,
        "two_photon_detuning": const.TWO_PHOTON_DETUNING_DEFAULT,
        "tau_storage": 90e-9,
        "geometry": "counter_propagating",
    },
    "ensemble": {
        "cell_length": 0.08,
        "temperature": 393.15,
        "isotope_fraction_87": 0.969,
        "atomic_mass": const.MASS_RB87,
    },
    "solver": {
        "n_z": 400,
        "n_t": 4096,
        "n_v": 65,
        "coupling_d2": const.COUPLING_D2_DEFAULT,
        "include_doppler": True,
        "include_stark": True,
        "dispersion_phase": 0.0,
        "retrieval_direction": "forward",
        "time_span": [],
    },
    "sequence": {
        "mu_in": 0.084,
        "signal_fwhm": 350e-12,
        "energy_in": 0.57e-9,
        "energy_out": 3.6e-9,
        "storage_time": 660e-12,
        "bandwidth": 1.0e9,
        "stretch": const.CONTROL_STRETCH_DEFAULT,
        "repetition_rate_signal": 1.0e7,
        "repetition_rate_control": 8.0e7,
        "hardware_timing": False,
    },
    "pathways": {
        "offsets": [0.0, const.HYPERFINE_PATHWAY_SPLITTING],
        "weights": [0.5, 0.5],
    },
    "noise": {
        "n0": const.NOISE_FLOOR_DEFAULT,
        "n1": const.NOISE_SLOPE_PER_NJ_DEFAULT,
        "window": const.INTEGRATION_WINDOW,
    },
    "detection": {
        "eta_det": 0.80,
        "eta_trans": 0.56,
        "timing_jitter_sigma": 0.0,
        "bin_width": 1e-12,
        "acquisition_time": 120.0,
    },
    "optimizer": {
        "mode": "shape",
        "objective": "eta_mem",
        "basis": "piecewise",
        "n_knots": 8,
        "knot_span": 800e-12,
        "energy_budget": 1.2e-9,
        "budget": 300,
        "restarts": 2,
        "target": "control_in",
        "r_min": 0.5,
        "r_max": 12.0,
    },
}


def _check_keys(given: dict, allowed: dict, context: str) -> None:
    for key in given:
        if key not in allowed:
            raise ConfigurationError(
                f"unknown configuration key '{context}{key}'; "
                f"allowed: {sorted(allowed)}"
            )
        if isinstance(allowed[key], dict):
            if not isinstance(given[key], dict):
                raise ConfigurationError(f"configuration section {key!r} must be a table")
            _check_keys(given[key], allowed[key], f"{key}.")


def _merge(base: dict, override: dict) -> dict:
    out = {}
    for key, value in base.items():
        if isinstance(value, dict):
            out[key] = _merge(value, override.get(key, {}))
        elif key in override:
            out[key] = override[key]
        else:
            out[key] = value
    return out


def load_config(path=None) -> dict:
    """Defaults overlaid with a TOML file; unknown keys are rejected."""
    if path is None:
        return json.loads(json.dumps(DEFAULT_CONFIG))
    try:
        with open(path, "rb") as fh:
            user = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"configuration file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"malformed configuration file {path}: {exc}") from exc
    _check_keys(user, DEFAULT_CONFIG, "")
    return _merge(DEFAULT_CONFIG, user)


def config_hash(config: dict) -> str:
    """Stable short hash identifying a merged configuration."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def _enum(enum_cls, value, context: str):
    try:
        return enum_cls(value)
    except ValueError as exc:
        raise ConfigurationError(
            f"{context} must be one of {[e.value for e in enum_cls]}, got {value!r}"
        ) from exc


def build_scheme(config: dict) -> LadderScheme:
    section = config["scheme"]
    return LadderScheme(
        lambda_signal=section["lambda_signal"],
        lambda_control=section["lambda_control"],
        delta_intermediate=section["delta_intermediate"],
        gamma_intermediate=section["gamma_intermediate"],
        two_photon_detuning=section["two_photon_detuning"],
        tau_storage=section["tau_storage"],
        geometry=_enum(BeamGeometry, section["geometry"], "scheme.geometry"),
    )


def build_ensemble(config: dict) -> VaporEnsemble:
    return VaporEnsemble(**config["ensemble"])


def build_solver_config(config: dict) -> SolverConfig:
    section = dict(config["solver"])
    span = section.pop("time_span")
    direction = _enum(
        RetrievalDirection, section.pop("retrieval_direction"), "solver.retrieval_direction"
    )
    if span and len(span) != 2:
        raise ConfigurationError("solver.time_span must be [t_start, t_end] or empty")
    return SolverConfig(
        retrieval_direction=direction,
        time_span=tuple(span) if span else None,
        **section,
    )


def build_sequence(config: dict) -> PulseSequence:
    section = config["sequence"]
    seq = PulseSequence.standard(
        energy_in=section["energy_in"],
        energy_out=section["energy_out"],
        storage_time=section["storage_time"],
        mu_in=section["mu_in"],
        signal_fwhm=section["signal_fwhm"],
        repetition_rate_signal=section["repetition_rate_signal"],
        repetition_rate_control=section["repetition_rate_control"],
        hardware_timing=section["hardware_timing"],
    )
    return replace(
        seq,
        control_in=replace(
            seq.control_in, bandwidth=section["bandwidth"], stretch=section["stretch"]
        ),
        control_out=replace(
            seq.control_out, bandwidth=section["bandwidth"], stretch=section["stretch"]
        ),
        ratio_R=None,
    )


def build_pathways(config: dict) -> HyperfinePathwaySet:
    section = config["pathways"]
    return HyperfinePathwaySet.normalized(section["offsets"], section["weights"])


def build_noise(config: dict) -> NoiseModel:
    return NoiseModel(**config["noise"])


def build_detection(config: dict) -> DetectionChain:
    section = dict(config["detection"])
    section.pop("acquisition_time")
    return DetectionChain(**section)


def build_experiment(config: dict) -> MemoryExperiment:
    """The fully assembled experiment behind a configuration."""
    return MemoryExperiment(
        scheme=build_scheme(config),
        ensemble=build_ensemble(config),
        sequence=build_sequence(config),
        solver_config=build_solver_config(config),
        pathways=build_pathways(config),
        noise=build_noise(config),
    )
