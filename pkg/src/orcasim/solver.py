"""Velocity-resolved propagation solver for the ladder memory.

Model
-----
A weak signal field E(z, t), normalized so |E|^2 is a photon flux (1/s),
propagates through the cell in the retarded frame and exchanges
excitation with one spin-wave amplitude B_v(z, t) per thermal velocity
class (|B_v|^2 integrates to photons over z):

    dE/dz   =  i a_disp E  +  i Omega(t) sum_v w_v kappa_v B_v
    dB_v/dt =  i kappa_v conj(Omega(t)) E
               - [ 1/(2 tau)  +  i (dk v + dS(t)) ] B_v

with kappa_v the two-photon coupling of class v (Doppler-corrected
intermediate detuning), dk the spin-wave wavevector, dS(t) the AC-Stark
shift of the two-photon resonance by the control intensity, tau the
storage-state lifetime and a_disp an optional common-mode dispersive
phase.  All phase terms conserve the total excitation
int |E_out|^2 dt + sum_v w_v int |B_v|^2 dz; only 1/(2 tau) dissipates.

Numerics
--------
Classic fourth-order Runge-Kutta in time on a single continuous grid
covering read-in, storage and read-out (overlapping control pulses are
handled naturally); at each stage the signal field is reconstructed
along z by a fourth-order cumulative quadrature of the source term.
Backward retrieval mirrors the spin wave about the cell centre at the
storage midpoint and continues the same march.

Concurrency note: velocity classes are independent within a time step;
the class reduction is a fixed-order matrix-vector product, so results
are bit-reproducible.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import brentq

from . import constants as const
from .errors import CalibrationError, ConfigurationError, NumericalInstabilityError
from .physics import (
    LadderScheme,
    VaporEnsemble,
    VelocityGrid,
    build_velocity_grid,
    spinwave_wavevector,
)
from .pulses import ControlPulse, PulseShape, SignalEnvelope

#: Pulse energy at which the dimensionless coupling is defined: a matched
#: 1 nJ control pulse transfers a fraction ~coupling_d2 of a weak signal
#: in the perturbative limit.
REFERENCE_ENERGY = 1.0e-9


class RetrievalDirection(str, enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


@dataclass(frozen=True)
class SolverConfig:
    """Discretization and model-term switches for :func:`run_memory`.

    ``n_v`` must be odd so the stationary velocity class is represented;
    with ``include_doppler`` off the ensemble collapses to that single
    class.  ``time_span`` is derived from the pulse supports when not
    given.  ``dispersion_phase`` is the common-mode dispersive phase (in
    radians) accumulated across the full cell by a stationary atom;
    zero disables the term.
    """

    n_z: int = 400
    n_t: int = 4096
    n_v: int = 65
    coupling_d2: float = const.COUPLING_D2_DEFAULT
    include_doppler: bool = True
    include_stark: bool = True
    dispersion_phase: float = 0.0
    retrieval_direction: RetrievalDirection = RetrievalDirection.FORWARD
    time_span: tuple[float, float] | None = None

    def __post_init__(self):
        if self.n_z < 16:
            raise ConfigurationError(f"n_z must be >= 16, got {self.n_z}")
        if self.n_t < 256:
            raise ConfigurationError(f"n_t must be >= 256, got {self.n_t}")
        if self.n_v < 3 or self.n_v % 2 == 0:
            raise ConfigurationError(f"n_v must be odd and >= 3, got {self.n_v}")
        if not (math.isfinite(self.coupling_d2) and self.coupling_d2 > 0):
            raise ConfigurationError("coupling_d2 must be positive")
        if not isinstance(self.retrieval_direction, RetrievalDirection):
            object.__setattr__(
                self, "retrieval_direction", RetrievalDirection(self.retrieval_direction)
            )
        if self.time_span is not None:
            t0, t1 = self.time_span
            if not (math.isfinite(t0) and math.isfinite(t1) and t1 > t0):
                raise ConfigurationError(f"invalid time span {self.time_span!r}")


@dataclass(frozen=True, eq=False)
class SpinwaveState:
    """Spin-wave amplitude B(z, v) at a fixed time."""

    z: np.ndarray
    velocities: np.ndarray
    weights: np.ndarray
    amplitude: np.ndarray
    time: float

    def excitation_profile(self) -> np.ndarray:
        """Velocity-averaged excitation density sum_v w_v |B_v(z)|^2."""
        return (np.abs(self.amplitude) ** 2) @ self.weights

    def total_excitation(self) -> float:
        """Stored excitation in photons, sum_v w_v int |B_v|^2 dz."""
        return float(simpson(self.excitation_profile(), x=self.z))


@dataclass(frozen=True, eq=False)
class MemoryRunResult:
    """Full bookkeeping of one store/retrieve cycle.

    Fluxes are photon numbers on the simulation grid; ``eta_read_in`` is
    the absorbed fraction of the input, ``eta_mem`` the end-to-end
    (retrieved / input) efficiency, and ``eta_read_out`` their ratio.
    The envelope split between transmitted (leaked) and retrieved light
    happens at ``t_mid``, the midpoint of the two control pulses, where
    the spin-wave snapshot is also taken.
    """

    scheme: LadderScheme
    config: SolverConfig
    input_envelope: SignalEnvelope
    output_envelope: SignalEnvelope
    transmitted_envelope: SignalEnvelope
    retrieved_envelope: SignalEnvelope
    spinwave_snapshot: SpinwaveState
    spinwave_final: SpinwaveState
    t_mid: float
    mu_in: float
    transmitted_flux: float
    retrieved_flux: float
    stored_flux_final: float
    eta_read_in: float
    eta_read_out: float
    eta_mem: float


def stark_shift(control: ControlPulse, scheme: LadderScheme, t) -> np.ndarray:
    """AC-Stark shift of the two-photon resonance, rad/s.

    dS(t) = |Omega(t)|^2 / (4 Delta); the sign follows the sign of the
    intermediate detuning.
    """
    return control.rabi_sq(t) / (4.0 * scheme.delta_intermediate)


def _cumquad(f: np.ndarray, h: float) -> np.ndarray:
    """Cumulative integral of samples ``f`` on a uniform grid, 4th order.

    Interior intervals use the two-sided cubic rule
    h/24 (-f[k-1] + 13 f[k] + 13 f[k+1] - f[k+2]); the first and last
    intervals use its one-sided counterpart.  Exact for cubics.
    """
    n = f.size
    scale = h / 24.0
    d = np.empty(n - 1, dtype=complex)
    d[0] = (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]) * scale
    d[1:-1] = (-f[0:-3] + 13.0 * f[1:-2] + 13.0 * f[2:-1] - f[3:]) * scale
    d[-1] = (f[-4] - 5.0 * f[-3] + 19.0 * f[-2] + 9.0 * f[-1]) * scale
    out = np.empty(n, dtype=complex)
    out[0] = 0.0
    np.cumsum(d, out=out[1:])
    return out


def _pulse_window(p: ControlPulse, lo_sig: float, hi_sig: float) -> tuple[float, float]:
    """Support of a control pulse padded for span construction."""
    if p.shape is PulseShape.GAUSSIAN:
        return (p.center_time - lo_sig * p.sigma_t, p.center_time + hi_sig * p.sigma_t)
    offsets, _ = p.table
    return (p.center_time + float(offsets[0]), p.center_time + float(offsets[-1]))


def _signal_window(s: SignalEnvelope) -> tuple[float, float, float]:
    """(lo, hi, sigma-like width) of the signal support."""
    if s.is_sampled:
        width = 0.25 * (s.times[-1] - s.times[0])
        return float(s.times[0]), float(s.times[-1]), width
    return (
        s.center_time - 8.0 * s.sigma_t,
        s.center_time + 8.0 * s.sigma_t,
        s.sigma_t,
    )


def _auto_span(
    signal: SignalEnvelope, control_in: ControlPulse, control_out: ControlPulse
) -> tuple[float, float]:
    sig_lo, sig_hi, sig_w = _signal_window(signal)
    cin_lo, cin_hi = _pulse_window(control_in, 5.0, 5.0)
    cout_lo, cout_hi = _pulse_window(control_out, 5.0, 6.0)
    t0 = min(sig_lo, cin_lo, cout_lo)
    # leave room after the read-out control for the emitted pulse tail
    t1 = max(sig_hi, cin_hi, cout_hi + 3.0 * sig_w)
    return t0, t1


def _shortest_fwhm(
    signal: SignalEnvelope, control_in: ControlPulse, control_out: ControlPulse
) -> float:
    widths = []
    if not signal.is_sampled:
        widths.append(signal.fwhm)
    for p in (control_in, control_out):
        if p.energy > 0 and p.shape is PulseShape.GAUSSIAN:
            widths.append(p.fwhm)
    return min(widths) if widths else math.inf


class _Propagator:
    """Precomputed coefficients plus the RK4/quadrature march."""

    def __init__(
        self,
        scheme: LadderScheme,
        grid: VelocityGrid,
        config: SolverConfig,
        cell_length: float,
    ):
        self.config = config
        self.z = np.linspace(0.0, cell_length, config.n_z)
        self.dz = self.z[1] - self.z[0]
        self.grid = grid
        delta = scheme.delta_intermediate
        delta_eff = delta - scheme.k_signal * grid.velocities
        if np.any(delta_eff == 0):
            raise ConfigurationError("a velocity class sits exactly on the intermediate resonance")
        kappa_scale = math.sqrt(
            config.coupling_d2
            / (cell_length * const.OMEGA_SQ_INTEGRAL_PER_JOULE * REFERENCE_ENERGY)
        )
        self.kappa = kappa_scale * delta / delta_eff          # (n_v,)
        self.wk = grid.weights * self.kappa                   # (n_v,)
        dk = spinwave_wavevector(scheme)
        decay = 0.0 if math.isinf(scheme.tau_storage) else 1.0 / (2.0 * scheme.tau_storage)
        self.lam = (
            decay + 1j * (dk * grid.velocities + scheme.two_photon_detuning)
        )                                                     # (n_v,)
        if config.dispersion_phase != 0.0:
            mean_disp = float(np.sum(grid.weights * (delta / delta_eff)))
            beta = (config.dispersion_phase / cell_length) * mean_disp
            self.phase_pos = np.exp(1j * beta * self.z)
            self.phase_neg = np.conj(self.phase_pos)
        else:
            self.phase_pos = None
            self.phase_neg = None

    def rhs(self, b: np.ndarray, om: complex, ein: complex, ds: float):
        """Time derivative of B and the instantaneous field E(z)."""
        src = (1j * om) * (b @ self.wk)
        if self.phase_pos is None:
            field = ein + _cumquad(src, self.dz)
        else:
            field = self.phase_pos * (ein + _cumquad(self.phase_neg * src, self.dz))
        db = np.multiply.outer((1j * np.conj(om)) * field, self.kappa)
        db -= b * (self.lam + 1j * ds)
        return db, field

    def march(
        self,
        b0: np.ndarray,
        t: np.ndarray,
        om_nodes: np.ndarray,
        om_half: np.ndarray,
        ein_nodes: np.ndarray,
        ein_half: np.ndarray,
        ds_nodes: np.ndarray,
        ds_half: np.ndarray,
        mid_index: int | None = None,
        flip_at_mid: bool = False,
    ):
        """RK4 march over the whole grid.

        Returns the output field E(L, t), the snapshot of B at
        ``mid_index`` (state *before* any mirror flip) and the final B.
        """
        n_t = t.size
        dt = t[1] - t[0]
        b = np.array(b0, dtype=complex)
        e_out = np.empty(n_t, dtype=complex)
        snapshot = None
        for i in range(n_t - 1):
            if i == mid_index:
                snapshot = b.copy()
                if flip_at_mid:
                    b = b[::-1].copy()
            k1, field = self.rhs(b, om_nodes[i], ein_nodes[i], ds_nodes[i])
            e_out[i] = field[-1]
            k2, _ = self.rhs(b + (0.5 * dt) * k1, om_half[i], ein_half[i], ds_half[i])
            k3, _ = self.rhs(b + (0.5 * dt) * k2, om_half[i], ein_half[i], ds_half[i])
            k4, _ = self.rhs(b + dt * k3, om_nodes[i + 1], ein_nodes[i + 1], ds_nodes[i + 1])
            b += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(b)):
                bad = np.argwhere(~np.isfinite(b))[0]
                raise NumericalInstabilityError(
                    f"non-finite spin-wave amplitude after step {i} "
                    f"(t = {t[i + 1]:.6e} s) at z index {bad[0]}, velocity index {bad[1]}"
                )
        if mid_index is not None and mid_index == n_t - 1:
            snapshot = b.copy()
            if flip_at_mid:
                b = b[::-1].copy()
        k1, field = self.rhs(b, om_nodes[-1], ein_nodes[-1], ds_nodes[-1])
        e_out[-1] = field[-1]
        return e_out, snapshot, b


def _masked_envelope(t: np.ndarray, values: np.ndarray, keep: np.ndarray) -> SignalEnvelope:
    masked = np.where(keep, values, 0.0 + 0.0j)
    return SignalEnvelope.from_samples(t, masked)


def _clip_unit(x: float) -> float:
    return min(max(x, 0.0), 1.0)


def run_memory(
    scheme: LadderScheme,
    ensemble: VaporEnsemble,
    signal: SignalEnvelope,
    control_in: ControlPulse,
    control_out: ControlPulse,
    storage_time: float,
    config: SolverConfig = SolverConfig(),
) -> MemoryRunResult:
    """Simulate one full store/retrieve cycle.

    ``storage_time`` must match the spacing of the two control pulse
    centres.  The two controls share the time grid, so overlapping or
    even coincident pulses are legal; efficiencies are then split at the
    midpoint between the two centres.
    """
    if storage_time < 0:
        raise ConfigurationError("storage time must be non-negative")
    sep = control_out.center_time - control_in.center_time
    if abs(sep - storage_time) > max(1e-15, 1e-9 * abs(storage_time)):
        raise ConfigurationError(
            f"control pulse spacing {sep!r} s does not match storage time {storage_time!r} s"
        )

    span = config.time_span if config.time_span is not None else _auto_span(
        signal, control_in, control_out
    )
    t0, t1 = span
    t_mid = 0.5 * (control_in.center_time + control_out.center_time)
    if not (t0 < t_mid < t1):
        raise ConfigurationError("time span does not contain the storage interval")
    sig_lo, sig_hi, _ = _signal_window(signal)
    if sig_lo < t0 - 1e-15 or sig_hi > t1 + 1e-15:
        if config.time_span is not None:
            raise ConfigurationError("time span does not cover the signal support")

    t = np.linspace(t0, t1, config.n_t)
    dt = t[1] - t[0]
    min_fwhm = _shortest_fwhm(signal, control_in, control_out)
    if math.isfinite(min_fwhm) and min_fwhm / dt < 20.0:
        raise ConfigurationError(
            f"time grid too coarse: {min_fwhm / dt:.1f} points across the shortest "
            f"pulse fwhm, need >= 20 (raise n_t or shrink the span)"
        )

    if config.include_doppler:
        grid = build_velocity_grid(ensemble, config.n_v)
    else:
        grid = VelocityGrid(np.array([0.0]), np.array([1.0]))

    prop = _Propagator(scheme, grid, config, ensemble.cell_length)

    t_half = t[:-1] + 0.5 * dt
    om_nodes = control_in.envelope(t) + control_out.envelope(t)
    om_half = control_in.envelope(t_half) + control_out.envelope(t_half)
    if config.include_stark:
        scale = 1.0 / (4.0 * scheme.delta_intermediate)
        ds_nodes = (np.abs(om_nodes) ** 2) * scale
        ds_half = (np.abs(om_half) ** 2) * scale
    else:
        ds_nodes = np.zeros(t.size)
        ds_half = np.zeros(t_half.size)
    ein_nodes = signal.sample(t)
    ein_half = signal.sample(t_half)

    mid_index = int(np.searchsorted(t, t_mid))
    mid_index = min(max(mid_index, 0), t.size - 1)
    backward = config.retrieval_direction is RetrievalDirection.BACKWARD

    b0 = np.zeros((config.n_z, len(grid)), dtype=complex)
    e_out, b_snap, b_final = prop.march(
        b0, t, om_nodes, om_half, ein_nodes, ein_half, ds_nodes, ds_half,
        mid_index=mid_index, flip_at_mid=backward,
    )

    idx = np.arange(t.size)
    mu_in = float(np.trapezoid(np.abs(ein_nodes) ** 2, t))
    if mu_in <= 0:
        raise ConfigurationError("input signal carries no photons on the simulation grid")
    transmitted_flux = float(np.trapezoid(np.abs(e_out[: mid_index + 1]) ** 2, t[: mid_index + 1]))
    retrieved_flux = float(np.trapezoid(np.abs(e_out[mid_index:]) ** 2, t[mid_index:]))

    snapshot = SpinwaveState(
        z=prop.z, velocities=grid.velocities, weights=grid.weights,
        amplitude=b_snap, time=float(t[mid_index]),
    )
    final = SpinwaveState(
        z=prop.z, velocities=grid.velocities, weights=grid.weights,
        amplitude=b_final, time=float(t[-1]),
    )

    eta_read_in = _clip_unit(1.0 - transmitted_flux / mu_in)
    eta_mem = _clip_unit(retrieved_flux / mu_in)
    eta_read_out = eta_mem / eta_read_in if eta_read_in > 1e-12 else 0.0

    return MemoryRunResult(
        scheme=scheme,
        config=config,
        input_envelope=signal,
        output_envelope=SignalEnvelope.from_samples(t, e_out),
        transmitted_envelope=_masked_envelope(t, e_out, idx <= mid_index),
        retrieved_envelope=_masked_envelope(t, e_out, idx >= mid_index),
        spinwave_snapshot=snapshot,
        spinwave_final=final,
        t_mid=t_mid,
        mu_in=mu_in,
        transmitted_flux=transmitted_flux,
        retrieved_flux=retrieved_flux,
        stored_flux_final=final.total_excitation(),
        eta_read_in=eta_read_in,
        eta_read_out=eta_read_out,
        eta_mem=eta_mem,
    )


def run_readout(
    snapshot: SpinwaveState,
    scheme: LadderScheme,
    control_out: ControlPulse,
    config: SolverConfig,
    mirror: bool = False,
) -> tuple[SignalEnvelope, float, SpinwaveState]:
    """March a stored spin wave through a retrieval pulse alone.

    Returns the emitted envelope, the emitted photon number and the
    final spin-wave state.  With ``mirror`` the spin wave is reflected
    about the cell centre first (backward retrieval).
    """
    cell_length = float(snapshot.z[-1])
    grid = VelocityGrid(snapshot.velocities, snapshot.weights)
    prop = _Propagator(scheme, grid, config, cell_length)

    sigma = control_out.sigma_t if control_out.shape is PulseShape.GAUSSIAN else None
    lo, hi = _pulse_window(control_out, 5.0, 6.0)
    pad = 3.0 * sigma if sigma is not None else 0.25 * (hi - lo)
    t0 = snapshot.time
    t1 = max(hi + pad, t0 + 10.0 * (pad if pad > 0 else 1e-10))
    if t1 <= t0:
        raise ConfigurationError("retrieval pulse precedes the stored snapshot")
    t = np.linspace(t0, t1, config.n_t)
    dt = t[1] - t[0]
    if control_out.energy > 0 and control_out.shape is PulseShape.GAUSSIAN:
        if control_out.fwhm / dt < 20.0:
            raise ConfigurationError("time grid too coarse for the retrieval pulse")

    t_half = t[:-1] + 0.5 * dt
    om_nodes = control_out.envelope(t)
    om_half = control_out.envelope(t_half)
    if config.include_stark:
        scale = 1.0 / (4.0 * scheme.delta_intermediate)
        ds_nodes = (np.abs(om_nodes) ** 2) * scale
        ds_half = (np.abs(om_half) ** 2) * scale
    else:
        ds_nodes = np.zeros(t.size)
        ds_half = np.zeros(t_half.size)
    zeros_n = np.zeros(t.size, dtype=complex)
    zeros_h = np.zeros(t_half.size, dtype=complex)

    b0 = snapshot.amplitude[::-1] if mirror else snapshot.amplitude
    e_out, _, b_final = prop.march(
        b0, t, om_nodes, om_half, zeros_n, zeros_h, ds_nodes, ds_half
    )
    flux = float(np.trapezoid(np.abs(e_out) ** 2, t))
    final = SpinwaveState(
        z=prop.z, velocities=snapshot.velocities, weights=snapshot.weights,
        amplitude=b_final, time=float(t[-1]),
    )
    return SignalEnvelope.from_samples(t, e_out), flux, final


def retrieve_backward(
    result: MemoryRunResult,
    control_out: ControlPulse,
    config: SolverConfig,
) -> MemoryRunResult:
    """Re-run retrieval from a stored result with the spin wave mirrored.

    Backward retrieval re-emits against the read-in direction, which
    unwinds the spatial phase of the stored spin wave; for a symmetric
    coupling it always meets or beats forward retrieval.
    """
    retrieved_env, flux, final = run_readout(
        result.spinwave_snapshot, result.scheme, control_out, config, mirror=True
    )
    eta_mem = _clip_unit(flux / result.mu_in)
    eta_read_out = eta_mem / result.eta_read_in if result.eta_read_in > 1e-12 else 0.0
    return replace(
        result,
        config=config,
        retrieved_envelope=retrieved_env,
        output_envelope=retrieved_env,
        spinwave_final=final,
        retrieved_flux=flux,
        stored_flux_final=final.total_excitation(),
        eta_mem=eta_mem,
        eta_read_out=eta_read_out,
    )


@dataclass(frozen=True)
class CalibrationResult:
    coupling_d2: float
    achieved_read_in: float
    n_evaluations: int


def calibrate_coupling(
    target_read_in: float,
    scheme: LadderScheme,
    ensemble: VaporEnsemble,
    signal: SignalEnvelope,
    control_in: ControlPulse,
    control_out: ControlPulse,
    storage_time: float,
    config: SolverConfig = SolverConfig(),
    bracket: tuple[float, float] = (0.05, 30.0),
    rtol: float = 5e-4,
) -> CalibrationResult:
    """Root-find the dimensionless coupling that hits a read-in target.

    The read-in efficiency grows monotonically with the coupling; the
    target must be bracketed by the efficiencies at the ``bracket``
    endpoints, otherwise a CalibrationError reports the achievable
    range.
    """
    if not (0.0 < target_read_in < 1.0):
        raise CalibrationError(f"read-in target must lie in (0, 1), got {target_read_in!r}")
    evals = 0

    def read_in(c: float) -> float:
        nonlocal evals
        evals += 1
        res = run_memory(
            scheme, ensemble, signal, control_in, control_out, storage_time,
            replace(config, coupling_d2=c),
        )
        return res.eta_read_in

    lo, hi = bracket
    f_lo = read_in(lo) - target_read_in
    if f_lo >= 0.0:
        raise CalibrationError(
            f"target read-in {target_read_in} is below the achievable range: "
            f"coupling {lo} already gives {f_lo + target_read_in:.4f}"
        )
    f_hi = read_in(hi) - target_read_in
    if f_hi <= 0.0:
        raise CalibrationError(
            f"target read-in {target_read_in} is above the achievable range: "
            f"coupling {hi} reaches only {f_hi + target_read_in:.4f}"
        )
    c_star = brentq(
        lambda c: read_in(c) - target_read_in, lo, hi, xtol=1e-6, rtol=rtol
    )
    achieved = read_in(c_star)
    return CalibrationResult(coupling_d2=float(c_star), achieved_read_in=achieved, n_evaluations=evals)
