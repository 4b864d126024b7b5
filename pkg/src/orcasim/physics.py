"""Atomic-scheme, thermal-ensemble and spin-wave geometry primitives.

The memory stores a signal photon as a collective excitation (spin wave)
of a ladder transition in hot rubidium vapour.  This module owns the
pieces of that picture that are independent of the propagation solver:

* the beam/level geometry (two-colour ladder, signal and control
  wavevectors, spin-wave wavevector for co/counter-propagating beams),
* the Maxwell-Boltzmann velocity ensemble and its Gauss-Hermite
  discretization,
* motional dephasing of the spin wave, including multi-pathway beating
  when several storage sublevels contribute,
* vapour density from the saturated-vapour-pressure correlation.

Sign conventions: wavevector magnitudes are positive; the spin-wave
wavevector is returned *signed* as k_signal - k_control for
counter-propagating beams (the physically relevant mismatch left in the
atomic coherence) and k_signal + k_control for co-propagating beams.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite import hermgauss

from . import constants as const
from .errors import ConfigurationError, DomainError

TWO_PI = 2.0 * math.pi


class BeamGeometry(str, enum.Enum):
    """Relative propagation direction of signal and control beams."""

    COUNTER_PROPAGATING = "counter_propagating"
    CO_PROPAGATING = "co_propagating"


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise DomainError(message)


@dataclass(frozen=True)
class LadderScheme:
    """Two-colour ladder excitation scheme.

    Defaults describe a telecom-band signal driving the upper leg of the
    ladder and a near-infrared control on the lower leg, two-photon
    resonant and detuned far from the intermediate state.

    Attributes
    ----------
    lambda_signal:
        Signal vacuum wavelength in metres.
    lambda_control:
        Control vacuum wavelength in metres.
    delta_intermediate:
        Single-photon detuning from the intermediate state, rad/s.
    gamma_intermediate:
        Natural linewidth of the intermediate state, rad/s (only its
        ratio to the detuning matters in the far-detuned regime).
    two_photon_detuning:
        Static detuning of the lasers from the bare two-photon
        resonance, rad/s.  The default compensates the mean AC-Stark
        shift of the default read-in pulse -- the tuning that maximizes
        read-in efficiency at the reference operating point.  Retrieval
        is insensitive to this offset (the emitted field co-rotates
        with the atoms).
    tau_storage:
        Population lifetime of the storage state, seconds.
    geometry:
        Beam geometry, counter- or co-propagating.
    """

    lambda_signal: float = 1529.3e-9
    lambda_control: float = 780.3e-9
    delta_intermediate: float = TWO_PI * 6.0e9
    gamma_intermediate: float = TWO_PI * 6.07e6
    two_photon_detuning: float = const.TWO_PHOTON_DETUNING_DEFAULT
    tau_storage: float = 90e-9
    geometry: BeamGeometry = BeamGeometry.COUNTER_PROPAGATING

    def __post_init__(self):
        _require(
            math.isfinite(self.lambda_signal) and self.lambda_signal > 0,
            f"signal wavelength must be finite and positive, got {self.lambda_signal}",
        )
        _require(
            math.isfinite(self.lambda_control) and self.lambda_control > 0,
            f"control wavelength must be finite and positive, got {self.lambda_control}",
        )
        _require(
            math.isfinite(self.delta_intermediate) and self.delta_intermediate != 0.0,
            "intermediate detuning must be finite and non-zero",
        )
        _require(
            math.isfinite(self.two_photon_detuning),
            "two-photon detuning must be finite",
        )
        _require(self.tau_storage > 0, "storage lifetime must be positive")
        if not isinstance(self.geometry, BeamGeometry):
            object.__setattr__(self, "geometry", BeamGeometry(self.geometry))

    @property
    def k_signal(self) -> float:
        """Signal wavevector magnitude, rad/m."""
        return TWO_PI / self.lambda_signal

    @property
    def k_control(self) -> float:
        """Control wavevector magnitude, rad/m."""
        return TWO_PI / self.lambda_control


@dataclass(frozen=True)
class VaporEnsemble:
    """Thermal vapour cell parameters.

    Attributes
    ----------
    cell_length:
        Interaction length in metres.
    temperature:
        Cell temperature in kelvin.
    isotope_fraction_87:
        Fraction of the participating isotope in the vapour (enriched
        cells > natural abundance).
    atomic_mass:
        Atomic mass in kilograms.
    """

    cell_length: float = 0.08
    temperature: float = 393.15
    isotope_fraction_87: float = 0.969
    atomic_mass: float = const.MASS_RB87

    def __post_init__(self):
        _require(self.cell_length > 0, "cell length must be positive")
        _require(
            math.isfinite(self.temperature) and self.temperature > 0,
            f"temperature must be positive, got {self.temperature}",
        )
        _require(
            0.0 <= self.isotope_fraction_87 <= 1.0,
            "isotope fraction must lie in [0, 1]",
        )
        _require(self.atomic_mass > 0, "atomic mass must be positive")


@dataclass(frozen=True)
class VelocityGrid:
    """Discretized 1-D thermal velocity distribution.

    ``weights`` are the quadrature weights of each velocity class against
    the Maxwell-Boltzmann distribution; they sum to one and the grid is
    symmetric about zero so that a stationary-atom limit is always
    represented by the central class.
    """

    velocities: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.velocities, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "velocities", v)
        object.__setattr__(self, "weights", w)
        if v.ndim != 1 or v.shape != w.shape:
            raise ConfigurationError("velocity grid and weights must be 1-D and congruent")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ConfigurationError(
                f"velocity weights must sum to 1 within 1e-12, got {w.sum()!r}"
            )
        if not np.allclose(v, -v[::-1], rtol=0.0, atol=1e-9 * max(1.0, float(np.max(np.abs(v))))):
            raise ConfigurationError("velocity grid must be symmetric about zero")
        if not np.allclose(w, w[::-1], rtol=1e-12, atol=0.0):
            raise ConfigurationError("velocity weights must be symmetric about zero")

    def __len__(self) -> int:
        return self.velocities.size


@dataclass(frozen=True)
class HyperfinePathwaySet:
    """Interfering storage pathways with distinct two-photon detunings.

    When the storage manifold has resolved hyperfine structure, the spin
    wave is a superposition of components precessing at offsets
    ``detuning_offsets`` (rad/s) with complex ``amplitude_weights``.  The
    retrieved field picks up the coherent sum

        P(t) = sum_p w_p exp(i delta_p t),

    so the weights are normalized linearly, sum_p w_p = 1, which makes
    P(0) = 1 (no extra loss at zero storage time).
    """

    detuning_offsets: np.ndarray
    amplitude_weights: np.ndarray

    def __post_init__(self):
        d = np.atleast_1d(np.asarray(self.detuning_offsets, dtype=float))
        w = np.atleast_1d(np.asarray(self.amplitude_weights, dtype=complex))
        object.__setattr__(self, "detuning_offsets", d)
        object.__setattr__(self, "amplitude_weights", w)
        if d.shape != w.shape or d.ndim != 1 or d.size == 0:
            raise ConfigurationError("pathway offsets and weights must be congruent 1-D arrays")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ConfigurationError(
                f"pathway weights must sum to 1 within 1e-12, got {w.sum()!r}"
            )

    @classmethod
    def trivial(cls) -> "HyperfinePathwaySet":
        """Single pathway at zero offset -- no beating."""
        return cls(np.array([0.0]), np.array([1.0 + 0.0j]))

    @classmethod
    def normalized(cls, offsets, weights) -> "HyperfinePathwaySet":
        """Build a set with weights rescaled to unit sum."""
        w = np.atleast_1d(np.asarray(weights, dtype=complex))
        s = w.sum()
        if s == 0:
            raise ConfigurationError("pathway weights must not sum to zero")
        return cls(np.atleast_1d(np.asarray(offsets, dtype=float)), w / s)

    @classmethod
    def two_pathway_default(cls) -> "HyperfinePathwaySet":
        """Equal-weight pair split by the frozen hyperfine offset.

        The resulting beat, multiplied onto the motional envelope,
        shortens the 1/e storage lifetime from the Doppler-only value to
        the observed 1.10 ns at the default operating point.
        """
        return cls.normalized([0.0, const.HYPERFINE_PATHWAY_SPLITTING], [0.5, 0.5])

    def factor(self, t):
        """Coherent pathway sum P(t); scalar in, scalar out."""
        t_arr = np.asarray(t, dtype=float)
        phases = np.exp(1j * np.outer(t_arr.ravel(), self.detuning_offsets))
        out = phases @ self.amplitude_weights
        out = out.reshape(t_arr.shape)
        return complex(out) if np.isscalar(t) or t_arr.ndim == 0 else out


def spinwave_wavevector(scheme: LadderScheme) -> float:
    """Signed spin-wave wavevector left in the atomic coherence, rad/m.

    Counter-propagating beams nearly cancel the two optical wavevectors,
    leaving k_signal - k_control; co-propagating beams add them.  The
    magnitude sets the motional-dephasing rate, the sign only a phase
    gradient direction.
    """
    if scheme.geometry is BeamGeometry.COUNTER_PROPAGATING:
        return scheme.k_signal - scheme.k_control
    return scheme.k_signal + scheme.k_control


def thermal_velocity_sigma(ensemble: VaporEnsemble) -> float:
    """1-D rms thermal velocity sqrt(kB T / m), m/s."""
    _require(ensemble.temperature > 0, "temperature must be positive")
    return math.sqrt(const.BOLTZMANN * ensemble.temperature / ensemble.atomic_mass)


def build_velocity_grid(ensemble: VaporEnsemble, n_points: int) -> VelocityGrid:
    """Gauss-Hermite discretization of the thermal velocity distribution.

    ``n_points`` must be odd (>= 3) so the stationary class v = 0 is a
    node.  Nodes are v_k = sqrt(2) sigma_v x_k with Hermite nodes x_k;
    weights are renormalized to make the unit-sum invariant exact.
    """
    if n_points < 3 or n_points % 2 == 0:
        raise ConfigurationError(
            f"velocity grid needs an odd number of points >= 3, got {n_points}"
        )
    x, wx = hermgauss(n_points)
    sigma = thermal_velocity_sigma(ensemble)
    v = math.sqrt(2.0) * sigma * x
    # enforce the symmetry invariants exactly (hermgauss is symmetric to
    # rounding only)
    v = 0.5 * (v - v[::-1])
    w = 0.5 * (wx + wx[::-1])
    w = w / w.sum()
    return VelocityGrid(velocities=v, weights=w)


def doppler_envelope(
    delta_k: float,
    sigma_v: float,
    t,
    pathways: HyperfinePathwaySet | None = None,
):
    """Spin-wave coherence envelope A(t) after a storage time t >= 0.

    Motional dephasing of a spin wave with wavevector ``delta_k`` across
    a thermal velocity spread ``sigma_v`` gives a Gaussian decay of the
    ensemble coherence,

        A(t) = P(t) * exp(-(delta_k * sigma_v * t)^2 / 2),

    with P(t) the pathway beat factor (1 when ``pathways`` is absent or
    trivial).  The retrieved-field *efficiency* envelope is |A(t)|^2,
    whose 1/e time is 1 / (|delta_k| sigma_v).
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("storage time must be non-negative")
    _require(sigma_v >= 0, "velocity spread must be non-negative")
    gauss = np.exp(-0.5 * (delta_k * sigma_v * t_arr) ** 2)
    if pathways is None:
        out = gauss.astype(complex)
    else:
        out = pathways.factor(t_arr) * gauss
    return complex(out) if np.isscalar(t) or t_arr.ndim == 0 else out


def dephasing_time_1e(delta_k: float, sigma_v: float) -> float:
    """1/e lifetime of the efficiency envelope |A(t)|^2, seconds."""
    rate = abs(delta_k) * sigma_v
    if rate == 0.0:
        return math.inf
    return 1.0 / rate


def rubidium_number_density(temperature: float) -> float:
    """Rubidium vapour number density from the saturated-pressure
    correlation, atoms / m^3.

    Valid for 250 K <= T <= 550 K; outside that range the correlation is
    unreliable and a DomainError is raised.
    """
    if not (const.RB_VP_VALID_MIN <= temperature <= const.RB_VP_VALID_MAX):
        raise DomainError(
            "vapour-pressure correlation valid only for "
            f"{const.RB_VP_VALID_MIN:.0f}-{const.RB_VP_VALID_MAX:.0f} K, "
            f"got {temperature!r} K"
        )
    if temperature < const.RB_MELTING_POINT:
        log10_p_atm = const.RB_VP_SOLID_A - const.RB_VP_SOLID_B / temperature
    else:
        log10_p_atm = (
            const.RB_VP_LIQUID_A
            - const.RB_VP_LIQUID_B / temperature
            - const.RB_VP_LIQUID_C * math.log10(temperature)
        )
    pressure_pa = const.ATMOSPHERE_PA * 10.0 ** log10_p_atm
    return pressure_pa / (const.BOLTZMANN * temperature)


def vapor_atom_count(ensemble: VaporEnsemble, beam_area: float) -> float:
    """Number of participating atoms inside the beam volume.

    ``beam_area`` is the effective transverse mode area in m^2.  Scales
    exactly linearly with both the area and the cell length.
    """
    _require(beam_area > 0 and math.isfinite(beam_area), "beam area must be positive")
    density = rubidium_number_density(ensemble.temperature)
    return density * ensemble.isotope_fraction_87 * beam_area * ensemble.cell_length
