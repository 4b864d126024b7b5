"""Composed memory experiments: sequences, sweeps and the noise model.

This layer turns single solver runs into the quantities the apparatus
actually reports.  Every efficiency quoted by the analysis chain is a
count ratio inside a fixed-width window (``constants.INTEGRATION_WINDOW``)
centred on the input or read-out arrival time, so a run yields both the
raw flux ratios of the solver and their windowed counterparts; the two
differ whenever emission leaks outside the counting window.  Retrieval
through several hyperfine storage pathways multiplies the retrieved
amplitude by the pathway beat factor before anything is counted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from . import constants as const
from .errors import CalibrationError, ConfigurationError, SolverError
from .physics import HyperfinePathwaySet, LadderScheme, VaporEnsemble
from .pulses import ControlPulse, SignalEnvelope
from .solver import MemoryRunResult, SolverConfig, run_memory


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigurationError(message)


@dataclass(frozen=True, eq=False)
class PulseSequence:
    """One storage/retrieval shot: signal, read-in and read-out pulses.

    Attributes
    ----------
    signal:
        Input signal envelope (centred at t = 0 by convention).
    control_in, control_out:
        Read-in and read-out control pulses; ``control_out.center_time -
        control_in.center_time`` must equal ``storage_time``.
    storage_time:
        Control-pulse delay in seconds.
    ratio_R:
        Read-out to read-in energy ratio.  Derived from the pulse
        energies when omitted; when supplied it must agree with them.
    repetition_rate_signal, repetition_rate_control:
        Trigger rates of the signal and control trains, Hz.
    hardware_timing:
        When true, the storage time must be an integer multiple of the
        control-laser period (delay generated by cascaded fixed delay
        lines rather than a free-space stage).
    """

    signal: SignalEnvelope
    control_in: ControlPulse
    control_out: ControlPulse
    storage_time: float
    ratio_R: float | None = None
    repetition_rate_signal: float = 1.0e7
    repetition_rate_control: float = 8.0e7
    hardware_timing: bool = False

    def __post_init__(self):
        _require(
            math.isfinite(self.storage_time) and self.storage_time >= 0.0,
            f"storage time must be >= 0, got {self.storage_time!r}",
        )
        for name, rate in (
            ("signal", self.repetition_rate_signal),
            ("control", self.repetition_rate_control),
        ):
            _require(
                math.isfinite(rate) and rate > 0,
                f"{name} repetition rate must be positive",
            )
        gap = self.control_out.center_time - self.control_in.center_time
        _require(
            abs(gap - self.storage_time) <= 1e-15 + 1e-9 * abs(self.storage_time),
            f"control pulse centres are {gap!r} s apart but storage_time={self.storage_time!r}",
        )
        if self.hardware_timing:
            period = 1.0 / self.repetition_rate_control
            multiple = self.storage_time / period
            _require(
                abs(multiple - round(multiple)) < 1e-9,
                f"hardware timing requires storage_time to be a multiple of {period} s",
            )
        derived = self._derived_ratio()
        if self.ratio_R is None:
            object.__setattr__(self, "ratio_R", derived)
        else:
            ok = (
                math.isinf(self.ratio_R) and math.isinf(derived)
                if math.isinf(derived)
                else abs(self.ratio_R - derived) <= 1e-9 * max(1.0, abs(derived))
            )
            _require(
                ok,
                f"ratio_R={self.ratio_R!r} does not match pulse energies (ratio {derived!r})",
            )

    def _derived_ratio(self) -> float:
        if self.control_in.energy > 0.0:
            return self.control_out.energy / self.control_in.energy
        return math.inf if self.control_out.energy > 0.0 else math.nan

    @property
    def total_control_energy(self) -> float:
        """Sum of both control energies, joules."""
        return self.control_in.energy + self.control_out.energy

    @classmethod
    def standard(
        cls,
        energy_in: float = 0.57e-9,
        energy_out: float = 3.6e-9,
        storage_time: float = 660e-12,
        mu_in: float = 0.084,
        signal_fwhm: float = 350e-12,
        **kwargs,
    ) -> "PulseSequence":
        """Reference operating sequence (signal at t = 0, read-out at T)."""
        return cls(
            signal=SignalEnvelope.gaussian(mu_in, fwhm=signal_fwhm),
            control_in=ControlPulse(energy=energy_in, center_time=0.0),
            control_out=ControlPulse(energy=energy_out, center_time=storage_time),
            storage_time=storage_time,
            **kwargs,
        )

    def with_energies(self, energy_in: float, energy_out: float) -> "PulseSequence":
        """Same sequence with the control energies replaced."""
        return replace(
            self,
            control_in=replace(self.control_in, energy=energy_in),
            control_out=replace(self.control_out, energy=energy_out),
            ratio_R=None,
        )

    def with_storage_time(self, storage_time: float) -> "PulseSequence":
        """Same sequence with the read-out pulse moved to a new delay."""
        return replace(
            self,
            control_out=replace(
                self.control_out,
                center_time=self.control_in.center_time + storage_time,
            ),
            storage_time=storage_time,
            ratio_R=None,
        )


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Affine noise-per-window model, N(E) = n0 + n1 * E_total[nJ].

    ``n0`` collects everything independent of the control (dark counts,
    residual pump light after the filter stack); ``n1`` the components
    scaling with total control energy (control leakage, single-photon
    scattering).  Only the sum is constrained by measurement; the split
    is a documented calibration choice.
    """

    n0: float = const.NOISE_FLOOR_DEFAULT
    n1: float = const.NOISE_SLOPE_PER_NJ_DEFAULT
    window: float = const.INTEGRATION_WINDOW

    def __post_init__(self):
        _require(self.n0 >= 0.0 and math.isfinite(self.n0), "noise floor n0 must be >= 0")
        _require(self.n1 >= 0.0 and math.isfinite(self.n1), "noise slope n1 must be >= 0")
        _require(self.window > 0.0, "integration window must be positive")

    def expected(self, control_total_energy: float) -> float:
        """Expected noise photons per window for a total control energy (J)."""
        _require(control_total_energy >= 0.0, "control energy must be >= 0")
        return self.n0 + self.n1 * (control_total_energy / 1e-9)


def noise_counts(model: NoiseModel, control_total_energy: float, n_trials: int = 1) -> float:
    """Expected noise photons in one window, accumulated over n_trials.

    With a single trial this is the per-pulse expectation (9e-7 at the
    reference 4.17 nJ total control energy under the defaults).
    """
    _require(n_trials >= 1, f"n_trials must be >= 1, got {n_trials!r}")
    return model.expected(control_total_energy) * n_trials


@dataclass(frozen=True, eq=False)
class MemoryExperiment:
    """Everything needed to run the memory at one operating point.

    The default instance is the headline operating point: calibrated
    coupling, 0.57/3.6 nJ controls 660 ps apart, two-pathway hyperfine
    retrieval.  Set ``pathways`` to ``HyperfinePathwaySet.trivial()`` (or
    ``None``) for a single storage pathway, i.e. motional dephasing only.
    """

    scheme: LadderScheme = field(default_factory=LadderScheme)
    ensemble: VaporEnsemble = field(default_factory=VaporEnsemble)
    sequence: PulseSequence = field(default_factory=PulseSequence.standard)
    solver_config: SolverConfig = field(default_factory=SolverConfig)
    pathways: HyperfinePathwaySet | None = field(
        default_factory=HyperfinePathwaySet.two_pathway_default
    )
    noise: NoiseModel = field(default_factory=NoiseModel)

    def run(self) -> "ExperimentResult":
        """One storage/retrieval shot at this operating point."""
        seq = self.sequence
        result = run_memory(
            self.scheme,
            self.ensemble,
            seq.signal,
            seq.control_in,
            seq.control_out,
            seq.storage_time,
            self.solver_config,
        )
        return self._analyze(result)

    def _analyze(self, result: MemoryRunResult) -> "ExperimentResult":
        seq = self.sequence
        retrieved = _apply_pathways(result, self.pathways)
        eta_ri_w, eta_mem_w, eta_ro_w = windowed_efficiencies(
            result,
            storage_time=seq.storage_time,
            window=self.noise.window,
            retrieved_envelope=retrieved,
        )
        raw_mem = _beat_weighted_raw_mem(result, retrieved)
        return ExperimentResult(
            experiment=self,
            run_result=result,
            retrieved_envelope=retrieved,
            eta_read_in=result.eta_read_in,
            eta_mem=raw_mem,
            eta_read_out=raw_mem / result.eta_read_in if result.eta_read_in > 0 else 0.0,
            eta_read_in_window=eta_ri_w,
            eta_mem_window=eta_mem_w,
            eta_read_out_window=eta_ro_w,
            noise_per_window=self.noise.expected(seq.total_control_energy),
        )


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    """Windowed and raw efficiencies of one composed run.

    ``eta_*`` are flux ratios over the full half-lines split at the
    storage midpoint (the solver's view, with the pathway beat folded
    into the retrieved flux); ``eta_*_window`` are the count ratios in
    the fixed integration windows (the analysis chain's view, the ones
    compared against reported numbers).
    """

    experiment: MemoryExperiment
    run_result: MemoryRunResult
    retrieved_envelope: SignalEnvelope
    eta_read_in: float
    eta_mem: float
    eta_read_out: float
    eta_read_in_window: float
    eta_mem_window: float
    eta_read_out_window: float
    noise_per_window: float


def _apply_pathways(
    result: MemoryRunResult, pathways: HyperfinePathwaySet | None
) -> SignalEnvelope:
    """Retrieved-side output envelope with the pathway beat applied.

    The medium output after the storage midpoint is multiplied pointwise
    by P(t); each retrieved instant carries the accumulated beat phase
    of the pathway superposition.  Before the midpoint (leaked input)
    the envelope is untouched.
    """
    t = result.output_envelope.times
    values = np.array(result.output_envelope.values, copy=True)
    if pathways is not None and pathways.detuning_offsets.size > 1:
        mask = t >= result.t_mid
        values[mask] = values[mask] * pathways.factor(t[mask])
    return SignalEnvelope.from_samples(t, values)


def _beat_weighted_raw_mem(result: MemoryRunResult, retrieved: SignalEnvelope) -> float:
    t = retrieved.times
    mask = t >= result.t_mid
    flux = float(np.trapezoid(np.abs(retrieved.values[mask]) ** 2, t[mask]))
    return min(1.0, flux / result.mu_in) if result.mu_in > 0 else 0.0


def windowed_efficiencies(
    result: MemoryRunResult,
    storage_time: float,
    window: float = const.INTEGRATION_WINDOW,
    retrieved_envelope: SignalEnvelope | None = None,
) -> tuple[float, float, float]:
    """Count-ratio efficiencies in windows at the input and read-out times.

    Windows are half-open, [centre - w/2, centre + w/2), centred on the
    input arrival (the signal centre) and on the read-out control.  The
    read-in efficiency is one minus the ratio of transmitted to incident
    counts in the input window; the memory efficiency is retrieved
    counts in the read-out window over incident counts; their quotient
    is the read-out efficiency.
    """
    env = retrieved_envelope if retrieved_envelope is not None else result.output_envelope
    t = env.times
    out_power = np.abs(env.values) ** 2
    in_power = np.abs(result.input_envelope.sample(t)) ** 2

    t_in = result.input_envelope.center_time
    t_ro = t_in + storage_time
    in_mask = (t >= t_in - window / 2) & (t < t_in + window / 2)
    ro_mask = (t >= t_ro - window / 2) & (t < t_ro + window / 2)
    incident = float(np.trapezoid(np.where(in_mask, in_power, 0.0), t))
    if incident <= 0.0:
        raise SolverError("input window contains no incident flux")
    leaked = float(np.trapezoid(np.where(in_mask, out_power, 0.0), t))
    retrieved = float(np.trapezoid(np.where(ro_mask, out_power, 0.0), t))

    eta_ri = min(1.0, max(0.0, 1.0 - leaked / incident))
    eta_mem = min(1.0, retrieved / incident)
    eta_ro = min(1.0, eta_mem / eta_ri) if eta_ri > 0 else 0.0
    return eta_ri, eta_mem, eta_ro


def calibrate_to_window(
    target_read_in: float,
    experiment: MemoryExperiment,
    bracket: tuple[float, float] = (0.5, 30.0),
    rtol: float = 1e-4,
) -> float:
    """Coupling that gives the target windowed read-in efficiency.

    Root-solves the windowed read-in efficiency of the experiment's
    sequence over ``coupling_d2``; this is the calibration that anchors
    the absorption depth to a measured count ratio.
    """
    _require(0.0 < target_read_in < 1.0, "target read-in efficiency must be in (0, 1)")

    def _mismatch(coupling: float) -> float:
        cfg = replace(experiment.solver_config, coupling_d2=coupling)
        exp = replace(experiment, solver_config=cfg)
        return exp.run().eta_read_in_window - target_read_in

    lo, hi = bracket
    try:
        f_lo, f_hi = _mismatch(lo), _mismatch(hi)
        if f_lo * f_hi > 0:
            raise CalibrationError(
                f"target {target_read_in} not bracketed by couplings {bracket}: "
                f"window efficiencies {f_lo + target_read_in:.4f}..{f_hi + target_read_in:.4f}"
            )
        return float(brentq(_mismatch, lo, hi, rtol=rtol))
    except (ValueError, RuntimeError) as exc:
        raise CalibrationError(f"coupling calibration failed: {exc}") from exc


@dataclass(frozen=True, eq=False)
class StorageSweepResult:
    """Storage-time sweep with its Gaussian lifetime fit."""

    times: np.ndarray
    eta_read_out: np.ndarray
    eta_mem: np.ndarray
    fit_amplitude: float
    fit_center: float
    fit_sigma: float
    fit_baseline: float
    lifetime_1e: float

    def rows(self):
        """(T, eta_read_out, eta_mem) triples in sweep order."""
        return list(zip(self.times.tolist(), self.eta_read_out.tolist(), self.eta_mem.tolist()))


def _log_parabola_guess(times: np.ndarray, etas: np.ndarray):
    """Gaussian starting point from a parabola through log efficiency.

    The sweep samples only the decaying flank (all delays positive), so
    moment-based initialization mislocates the peak; a quadratic in
    log space identifies (amplitude, center, sigma) directly.  Returns
    None when the data does not support it (non-positive values or no
    downward curvature) so the caller falls back to moments.
    """
    if times.size < 5 or np.any(etas <= 0.0):
        return None
    c2, c1, c0 = np.polyfit(times, np.log(etas), 2, w=np.sqrt(etas))
    if not c2 < 0.0:
        return None
    sigma = math.sqrt(-0.5 / c2)
    center = c1 * sigma**2
    amplitude = math.exp(c0 + 0.5 * (center / sigma) ** 2)
    return amplitude, center, sigma, 0.0


def storage_time_sweep(experiment: MemoryExperiment, times) -> StorageSweepResult:
    """Read-out efficiency against control delay, with a Gaussian fit.

    Each delay is an independent solver run of the same sequence with
    the read-out pulse moved.  The decay of the retrieved fraction
    tracks the motional dephasing envelope (times any pathway beat), so
    the sweep is fitted with a Gaussian and summarized by the 1/e time
    of the fitted efficiency envelope, sqrt(2) x sigma.
    """
    times = np.asarray(list(times), dtype=float)
    _require(times.size > 0, "storage-time sweep needs at least one delay")
    _require(bool(np.all(times >= 0.0)), "storage times must be non-negative")

    etas_ro = np.empty_like(times)
    etas_mem = np.empty_like(times)
    for i, t_s in enumerate(times):
        try:
            res = replace(
                experiment, sequence=experiment.sequence.with_storage_time(float(t_s))
            ).run()
        except SolverError as exc:
            raise SolverError(f"storage-time sweep failed at T={t_s:.3e} s: {exc}") from exc
        etas_ro[i] = res.eta_read_out
        etas_mem[i] = res.eta_mem

    from .detection import fit_gaussian_samples  # local import, avoids a cycle

    fit = fit_gaussian_samples(times, etas_ro, initial=_log_parabola_guess(times, etas_ro))
    return StorageSweepResult(
        times=times,
        eta_read_out=etas_ro,
        eta_mem=etas_mem,
        fit_amplitude=fit.amplitude,
        fit_center=fit.center,
        fit_sigma=fit.sigma,
        fit_baseline=fit.baseline,
        lifetime_1e=math.sqrt(2.0) * fit.sigma,
    )


@dataclass(frozen=True, eq=False)
class EnergySweepResult:
    """Control-energy sweep at fixed read-out/read-in ratio."""

    ratio_R: float
    total_energies: np.ndarray
    energies_in: np.ndarray
    energies_out: np.ndarray
    eta_read_in: np.ndarray
    eta_read_out: np.ndarray
    eta_mem: np.ndarray
    eta_read_in_window: np.ndarray
    eta_read_out_window: np.ndarray
    eta_mem_window: np.ndarray

    COLUMNS = (
        "e_total_j",
        "e_in_j",
        "e_out_j",
        "eta_read_in",
        "eta_read_out",
        "eta_mem",
        "eta_read_in_window",
        "eta_read_out_window",
        "eta_mem_window",
    )

    def rows(self):
        """One tuple per sweep point, ordered as ``COLUMNS``."""
        return list(
            zip(
                self.total_energies.tolist(),
                self.energies_in.tolist(),
                self.energies_out.tolist(),
                self.eta_read_in.tolist(),
                self.eta_read_out.tolist(),
                self.eta_mem.tolist(),
                self.eta_read_in_window.tolist(),
                self.eta_read_out_window.tolist(),
                self.eta_mem_window.tolist(),
            )
        )


def split_total_energy(total: float, ratio: float) -> tuple[float, float]:
    """(E_in, E_out) with E_in + E_out = total and E_out/E_in = ratio."""
    _require(total > 0.0 and math.isfinite(total), "total energy must be positive")
    _require(ratio > 0.0 and math.isfinite(ratio), "energy ratio must be positive")
    e_in = total / (1.0 + ratio)
    return e_in, total - e_in


def energy_sweep(experiment: MemoryExperiment, total_energies, ratio_R: float) -> EnergySweepResult:
    """Efficiencies against total control energy at a fixed ratio.

    Each total energy E is split as E_in = E/(1+R), E_out = E - E_in
    (sum and ratio both hold to rounding), the sequence re-run, and
    both raw and windowed efficiency triples tabulated.
    """
    totals = np.asarray(list(total_energies), dtype=float)
    _require(totals.size > 0, "energy sweep needs at least one energy")
    _require(bool(np.all(totals > 0.0)), "sweep energies must be positive")

    n = totals.size
    cols = {name: np.empty(n) for name in EnergySweepResult.COLUMNS[1:]}
    for i, total in enumerate(totals):
        e_in, e_out = split_total_energy(float(total), ratio_R)
        res = replace(experiment, sequence=experiment.sequence.with_energies(e_in, e_out)).run()
        cols["e_in_j"][i] = e_in
        cols["e_out_j"][i] = e_out
        cols["eta_read_in"][i] = res.eta_read_in
        cols["eta_read_out"][i] = res.eta_read_out
        cols["eta_mem"][i] = res.eta_mem
        cols["eta_read_in_window"][i] = res.eta_read_in_window
        cols["eta_read_out_window"][i] = res.eta_read_out_window
        cols["eta_mem_window"][i] = res.eta_mem_window

    return EnergySweepResult(
        ratio_R=ratio_R,
        total_energies=totals,
        energies_in=cols["e_in_j"],
        energies_out=cols["e_out_j"],
        eta_read_in=cols["eta_read_in"],
        eta_read_out=cols["eta_read_out"],
        eta_mem=cols["eta_mem"],
        eta_read_in_window=cols["eta_read_in_window"],
        eta_read_out_window=cols["eta_read_out_window"],
        eta_mem_window=cols["eta_mem_window"],
    )


def mu_in_series(experiment: MemoryExperiment, mu_values) -> list[dict]:
    """Input / retrieved / noise expectations against input photon number.

    The memory response is linear in the weak signal, so one solver run
    fixes the efficiencies and the series just scales the input.  Rows
    carry expectations per pulse: the input photon number, the retrieved
    photon number in the read-out window, and the (constant) noise.
    """
    mus = np.asarray(list(mu_values), dtype=float)
    _require(mus.size > 0, "photon-number series needs at least one value")
    _require(bool(np.all(mus >= 0.0)), "photon numbers must be >= 0")

    res = experiment.run()
    noise = res.noise_per_window
    return [
        {
            "mu_in": float(mu),
            "retrieved_per_pulse": float(mu * res.eta_mem_window),
            "noise_per_window": noise,
            "eta_mem_window": res.eta_mem_window,
        }
        for mu in mus
    ]
