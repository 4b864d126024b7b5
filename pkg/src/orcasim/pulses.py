"""Control and signal pulse envelopes.

Conventions
-----------
* Control pulses are specified by *energy*; the solver works with the
  Rabi frequency Omega(t) (rad/s).  The two are linked by the frozen
  intensity scale ``OMEGA_SQ_INTEGRAL_PER_JOULE``:

      int |Omega(t)|^2 dt = OMEGA_SQ_INTEGRAL_PER_JOULE * energy,

  so the integral is exactly linear in pulse energy for any shape.
* Transform-limited Gaussians have intensity FWHM (time) x FWHM (freq)
  = 2 ln2 / pi ~ 0.441; ``bandwidth`` is the intensity FWHM in hertz.
* Signal envelopes E(t) are normalized to the mean photon number,
  int |E(t)|^2 dt = mu_in, so |E|^2 is a photon flux in 1/s.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import constants as const
from .errors import ConfigurationError


class PulseShape(str, enum.Enum):
    GAUSSIAN = "gaussian"
    USER_TABLE = "user_table"


def _intensity_sigma_from_fwhm(fwhm: float) -> float:
    return fwhm / const.FWHM_PER_SIGMA


@dataclass(frozen=True, eq=False)
class ControlPulse:
    """A control pulse addressing the second leg of the ladder.

    Attributes
    ----------
    energy:
        Pulse energy in joules (>= 0; zero gives a null envelope).
    center_time:
        Arrival time of the intensity peak, seconds.
    bandwidth:
        Intensity FWHM bandwidth in Hz; for the Gaussian shape this sets
        the transform-limited duration fwhm_t = 0.4413 / bandwidth.
    shape:
        ``gaussian`` (analytic) or ``user_table`` (interpolated samples).
    chirp_rate:
        Quadratic temporal phase coefficient c in exp(i c (t-t0)^2),
        rad/s^2.  Leaves |Omega|^2 -- and hence the energy -- unchanged.
    table:
        For ``user_table``: (offsets, amplitudes) with offsets in seconds
        relative to ``center_time``.  The stored amplitude profile is
        normalized at construction; only its shape matters.
    stretch:
        Duration stretch relative to the transform limit (>= 1 for a
        physical pulse; compression imperfections leave the default
        slightly chirp-broadened).
    rabi_sq_per_joule:
        Intensity scale linking energy to |Omega|^2 (rarely overridden).
    """

    energy: float
    center_time: float = 0.0
    bandwidth: float = 1.0e9
    shape: PulseShape = PulseShape.GAUSSIAN
    chirp_rate: float = 0.0
    table: tuple | None = None
    stretch: float = const.CONTROL_STRETCH_DEFAULT
    rabi_sq_per_joule: float = const.OMEGA_SQ_INTEGRAL_PER_JOULE

    def __post_init__(self):
        if not (math.isfinite(self.energy) and self.energy >= 0.0):
            raise ConfigurationError(f"pulse energy must be >= 0, got {self.energy!r}")
        if not isinstance(self.shape, PulseShape):
            object.__setattr__(self, "shape", PulseShape(self.shape))
        if not (math.isfinite(self.stretch) and self.stretch > 0):
            raise ConfigurationError(f"stretch must be positive, got {self.stretch!r}")
        if self.shape is PulseShape.GAUSSIAN:
            if not (math.isfinite(self.bandwidth) and self.bandwidth > 0):
                raise ConfigurationError("bandwidth must be positive and finite")
        else:
            if self.table is None:
                raise ConfigurationError("user_table shape requires a (times, amplitudes) table")
            t, a = self.table
            t = np.asarray(t, dtype=float)
            a = np.asarray(a, dtype=complex)
            if t.ndim != 1 or t.shape != a.shape or t.size < 2:
                raise ConfigurationError("pulse table must be two congruent 1-D arrays")
            if np.any(np.diff(t) <= 0):
                raise ConfigurationError("pulse table times must be strictly increasing")
            norm = np.trapezoid(np.abs(a) ** 2, t)
            if norm <= 0 and self.energy > 0:
                raise ConfigurationError("pulse table has zero power but non-zero energy")
            if norm > 0:
                a = a / math.sqrt(norm)
            object.__setattr__(self, "table", (t, a))

    @property
    def fwhm(self) -> float:
        """Intensity FWHM duration in seconds (Gaussian shape)."""
        return self.stretch * const.GAUSSIAN_TIME_BANDWIDTH / self.bandwidth

    @property
    def sigma_t(self) -> float:
        """Intensity sigma of the Gaussian shape, seconds."""
        return _intensity_sigma_from_fwhm(self.fwhm)

    @property
    def rabi_sq_integral(self) -> float:
        """int |Omega(t)|^2 dt, (rad/s)^2 s."""
        return self.rabi_sq_per_joule * self.energy

    @property
    def peak_rabi_sq(self) -> float:
        """Peak |Omega|^2 of the Gaussian shape, (rad/s)^2."""
        if self.shape is not PulseShape.GAUSSIAN:
            raise ConfigurationError("peak_rabi_sq is defined for the Gaussian shape only")
        return self.rabi_sq_integral / (math.sqrt(2.0 * math.pi) * self.sigma_t)

    def envelope(self, t) -> np.ndarray:
        """Complex Rabi frequency Omega(t) on the given times, rad/s."""
        t = np.asarray(t, dtype=float)
        if self.energy == 0.0:
            return np.zeros(t.shape, dtype=complex)
        dt = t - self.center_time
        if self.shape is PulseShape.GAUSSIAN:
            sig = self.sigma_t
            amp = math.sqrt(self.peak_rabi_sq) * np.exp(-(dt**2) / (4.0 * sig**2))
        else:
            offsets, a = self.table
            amp = math.sqrt(self.rabi_sq_integral) * (
                np.interp(dt, offsets, a.real, left=0.0, right=0.0)
                + 1j * np.interp(dt, offsets, a.imag, left=0.0, right=0.0)
            )
        if self.chirp_rate != 0.0:
            amp = amp * np.exp(1j * self.chirp_rate * dt**2)
        return np.asarray(amp, dtype=complex)

    def rabi_sq(self, t) -> np.ndarray:
        """|Omega(t)|^2 on the given times, (rad/s)^2."""
        return np.abs(self.envelope(t)) ** 2


@dataclass(frozen=True, eq=False)
class SignalEnvelope:
    """Weak signal field envelope, normalized to photon number.

    Two representations share this type: an *analytic* Gaussian input
    (``times is None``) described by (mu_in, fwhm, center_time), and a
    *sampled* envelope (solver output) holding the complex amplitude on
    an explicit time grid.  ``sample`` evaluates either on arbitrary
    times.
    """

    mu_in: float
    fwhm: float | None = 350e-12
    center_time: float = 0.0
    times: np.ndarray | None = None
    values: np.ndarray | None = None

    def __post_init__(self):
        if not (math.isfinite(self.mu_in) and self.mu_in >= 0):
            raise ConfigurationError(f"photon number must be >= 0, got {self.mu_in!r}")
        if self.times is None:
            if self.fwhm is None or not (math.isfinite(self.fwhm) and self.fwhm > 0):
                raise ConfigurationError("analytic envelope needs a positive fwhm")
        else:
            t = np.asarray(self.times, dtype=float)
            v = np.asarray(self.values, dtype=complex)
            if t.ndim != 1 or t.shape != v.shape or t.size < 2:
                raise ConfigurationError("sampled envelope needs congruent 1-D times/values")
            object.__setattr__(self, "times", t)
            object.__setattr__(self, "values", v)

    @classmethod
    def gaussian(
        cls, mu_in: float, fwhm: float = 350e-12, center_time: float = 0.0
    ) -> "SignalEnvelope":
        return cls(mu_in=mu_in, fwhm=fwhm, center_time=center_time)

    @classmethod
    def from_samples(cls, times, values) -> "SignalEnvelope":
        """Wrap a sampled field; mu_in and centroid are computed."""
        t = np.asarray(times, dtype=float)
        v = np.asarray(values, dtype=complex)
        flux = np.abs(v) ** 2
        mu = float(np.trapezoid(flux, t))
        center = float(np.trapezoid(t * flux, t) / mu) if mu > 0 else float(t[t.size // 2])
        return cls(mu_in=mu, fwhm=None, center_time=center, times=t, values=v)

    @property
    def is_sampled(self) -> bool:
        return self.times is not None

    @property
    def sigma_t(self) -> float:
        """Intensity sigma of the analytic Gaussian, seconds."""
        if self.fwhm is None:
            raise ConfigurationError("sampled envelope has no analytic width")
        return _intensity_sigma_from_fwhm(self.fwhm)

    def sample(self, t) -> np.ndarray:
        """Complex amplitude E(t); units sqrt(photons/s)."""
        t = np.asarray(t, dtype=float)
        if self.is_sampled:
            return np.interp(t, self.times, self.values.real, left=0.0, right=0.0) + 1j * np.interp(
                t, self.times, self.values.imag, left=0.0, right=0.0
            )
        if self.mu_in == 0.0:
            return np.zeros(t.shape, dtype=complex)
        sig = self.sigma_t
        peak_flux = self.mu_in / (math.sqrt(2.0 * math.pi) * sig)
        dt = t - self.center_time
        return np.asarray(
            math.sqrt(peak_flux) * np.exp(-(dt**2) / (4.0 * sig**2)), dtype=complex
        )

    def photon_number(self) -> float:
        """int |E|^2 dt; for sampled envelopes integrated on their grid."""
        if self.is_sampled:
            return float(np.trapezoid(np.abs(self.values) ** 2, self.times))
        return self.mu_in
