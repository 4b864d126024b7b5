"""Synthetic photon counting and the histogram analysis chain.

The forward model mirrors the time-tagging measurement: expected counts
per 1 ps bin are accumulated over many trigger cycles, detector and
transmission losses scale the signal (not the noise, which is referred
to the detector), optional timing jitter convolves the means, and
realized counts are Poisson draws fixed by a seed.  The analysis half
re-derives efficiencies from count ratios in fixed windows -- the same
estimator applied to the real apparatus -- so generator and analyzer can
be closed-loop tested against each other.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.optimize import least_squares

from . import constants as const
from .errors import (
    ConfigurationError,
    ExtractionError,
    FitError,
    NumericalInstabilityError,
    WindowRangeError,
)
from .pulses import SignalEnvelope


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigurationError(message)


@dataclass(frozen=True, eq=False)
class DetectionChain:
    """Losses and timing response between cell output and time tagger."""

    eta_det: float = 0.80
    eta_trans: float = 0.56
    timing_jitter_sigma: float = 0.0
    bin_width: float = 1e-12

    def __post_init__(self):
        for name, eta in (("eta_det", self.eta_det), ("eta_trans", self.eta_trans)):
            _require(0.0 <= eta <= 1.0, f"{name} must be in [0, 1], got {eta!r}")
        _require(self.timing_jitter_sigma >= 0.0, "timing jitter must be >= 0")
        _require(self.bin_width > 0.0, "bin width must be positive")

    @property
    def total_efficiency(self) -> float:
        """Combined signal survival probability, eta_det * eta_trans."""
        return self.eta_det * self.eta_trans


@dataclass(frozen=True, eq=False)
class Histogram:
    """Start-stop histogram of detector clicks.

    ``bin_edges`` has one more entry than ``counts``; bins are
    left-closed, [edge_i, edge_{i+1}).  ``trials`` is the number of
    trigger cycles accumulated (acquisition time times signal rate,
    rounded down at synthesis).
    """

    bin_edges: np.ndarray
    counts: np.ndarray
    acquisition_time: float
    trials: int
    rng_seed: int

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=float)
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "counts", counts)
        _require(edges.ndim == 1 and edges.size >= 2, "need at least one bin")
        _require(bool(np.all(np.diff(edges) > 0)), "bin edges must increase")
        _require(counts.shape == (edges.size - 1,), "counts must have one entry per bin")
        _require(bool(np.all(counts >= 0)), "counts must be non-negative")
        _require(self.acquisition_time > 0.0, "acquisition time must be positive")
        _require(self.trials >= 1, "trials must be >= 1")

    @property
    def bin_width(self) -> float:
        return float(self.bin_edges[1] - self.bin_edges[0])

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    def total_counts(self) -> int:
        return int(self.counts.sum())


def derive_seed(seed: int, stream_index: int) -> int:
    """Child seed for a parallel synthesis stream.

    The rule is fixed (SeedSequence of the pair) so that a batch of
    histograms is reproducible regardless of execution order.
    """
    return int(np.random.SeedSequence([seed, stream_index]).generate_state(1)[0])


def synthesize_histogram(
    envelope: SignalEnvelope | None,
    chain: DetectionChain,
    noise: float,
    acquisition_time: float,
    seed: int,
    span: tuple[float, float] | None = None,
    repetition_rate: float = 1.0e7,
) -> Histogram:
    """Poisson-realized start-stop histogram of a pulsed measurement.

    Per-bin expected counts are

        trials * [ eta_det * eta_trans * |E(t)|^2 * bin_width
                   + noise * bin_width / INTEGRATION_WINDOW ]

    with ``noise`` the expected noise photons per integration window as
    seen by the detector (losses already folded in).  ``envelope=None``
    synthesizes noise only.  The realized counts are independent Poisson
    draws per bin, fully determined by ``seed``.
    """
    _require(acquisition_time > 0.0, "acquisition time must be positive")
    _require(noise >= 0.0, "noise expectation must be >= 0")
    _require(repetition_rate > 0.0, "repetition rate must be positive")
    trials = int(acquisition_time * repetition_rate)
    _require(trials >= 1, "acquisition too short for a single trial")

    if span is None:
        if envelope is None:
            raise ConfigurationError("noise-only synthesis needs an explicit span")
        span = _envelope_span(envelope)
    t0, t1 = span
    _require(t1 > t0, f"invalid span {span!r}")

    width_ps = _quantize_ps(chain.bin_width)
    start_ps = _quantize_ps(t0)
    _require(width_ps > 0.0, "bin width below the 1 fs grid resolution")
    n_bins = int(math.ceil((t1 - t0) / chain.bin_width))
    edges = (start_ps + np.arange(n_bins + 1) * width_ps) * 1e-12
    centers = 0.5 * (edges[:-1] + edges[1:])

    means = np.full(n_bins, noise * chain.bin_width / const.INTEGRATION_WINDOW)
    if envelope is not None:
        power = np.abs(envelope.sample(centers)) ** 2
        means = means + chain.total_efficiency * power * chain.bin_width
    means = means * trials
    if chain.timing_jitter_sigma > 0.0:
        means = gaussian_filter1d(
            means, sigma=chain.timing_jitter_sigma / chain.bin_width, mode="constant"
        )
    if not np.all(np.isfinite(means)):
        bad = int(np.flatnonzero(~np.isfinite(means))[0])
        raise NumericalInstabilityError(
            f"expected counts non-finite at bin {bad} (t = {centers[bad]:.3e} s)"
        )

    counts = np.random.default_rng(seed).poisson(means)
    return Histogram(
        bin_edges=edges,
        counts=counts,
        acquisition_time=acquisition_time,
        trials=trials,
        rng_seed=seed,
    )


def _envelope_span(envelope: SignalEnvelope) -> tuple[float, float]:
    if envelope.times is not None:
        t = envelope.times
        return float(t[0]), float(t[-1])
    half = 5.0 * envelope.fwhm + const.INTEGRATION_WINDOW
    return envelope.center_time - half, envelope.center_time + half


@dataclass(frozen=True, eq=False)
class GaussianFit:
    """Least-squares Gaussian-plus-baseline fit result."""

    amplitude: float
    center: float
    sigma: float
    baseline: float
    covariance: np.ndarray
    chi2_dof: float
    n_points: int

    @property
    def fwhm(self) -> float:
        return const.FWHM_PER_SIGMA * self.sigma

    def params(self) -> tuple[float, float, float, float]:
        return (self.amplitude, self.center, self.sigma, self.baseline)


def _gaussian(x, amplitude, center, sigma, baseline):
    return amplitude * np.exp(-0.5 * ((x - center) / sigma) ** 2) + baseline


def fit_gaussian_samples(
    x, y, max_iterations: int = 400, initial: tuple | None = None
) -> GaussianFit:
    """Fit A exp(-(x - x0)^2 / (2 s^2)) + b to samples.

    Initialization is by moments of the baseline-subtracted samples
    (baseline from the smallest decile) unless ``initial`` supplies an
    explicit (amplitude, center, sigma, baseline) starting point —
    moments mislocate the peak badly when the samples cover only one
    flank of the curve.  Convergence is a relative parameter step below
    1e-10; failure raises with the last iterate.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape or x.size < 5:
        raise FitError(f"need >= 5 one-dimensional samples, got shape {x.shape}")

    baseline0 = float(np.mean(np.sort(y)[: max(1, y.size // 10)]))
    excess = np.clip(y - baseline0, 0.0, None)
    weight = excess.sum()
    if weight <= 0.0 or float(y.max() - y.min()) == 0.0:
        raise FitError(
            "degenerate amplitude: window has no peak above baseline",
            last_params=(0.0, float(np.mean(x)), 0.0, baseline0),
        )
    spacing = float(np.median(np.diff(np.sort(x)))) if x.size > 1 else 1.0
    if initial is not None:
        amp0, center0, sigma0, baseline0 = (float(v) for v in initial)
        if not (amp0 > 0.0 and sigma0 > 0.0):
            raise FitError(
                "initial guess needs positive amplitude and width",
                last_params=(amp0, center0, sigma0, baseline0),
            )
    else:
        center0 = float(np.sum(x * excess) / weight)
        var0 = float(np.sum((x - center0) ** 2 * excess) / weight)
        sigma0 = math.sqrt(var0) if var0 > 0 else spacing
        sigma0 = max(sigma0, spacing / 2.0)
        amp0 = float(y.max() - baseline0)
    p0 = np.array([amp0, center0, sigma0, baseline0])

    scale = np.array([max(abs(amp0), 1e-30), 1.0, max(sigma0, 1e-30), 1.0])
    scale[1] = max(sigma0, spacing)
    scale[3] = max(abs(baseline0), abs(amp0) * 1e-3, 1e-30)

    def residuals(p):
        return _gaussian(x, *p) - y

    result = least_squares(
        residuals,
        p0,
        x_scale=scale,
        xtol=1e-10,
        ftol=1e-10,
        gtol=1e-10,
        max_nfev=max_iterations * 4,
    )
    if not result.success:
        raise FitError(
            f"Gaussian fit did not converge: {result.message}",
            last_params=tuple(result.x),
        )
    amp, center, sigma, baseline = result.x
    sigma = abs(float(sigma))
    if amp <= 0.0 or sigma == 0.0:
        raise FitError(
            "degenerate amplitude: fitted peak is not positive",
            last_params=tuple(result.x),
        )

    dof = max(x.size - 4, 1)
    ss = float(2.0 * result.cost)
    jac = result.jac
    jtj = jac.T @ jac
    try:
        covariance = np.linalg.inv(jtj) * (ss / dof)
    except np.linalg.LinAlgError:
        covariance = np.full((4, 4), np.nan)
    return GaussianFit(
        amplitude=float(amp),
        center=float(center),
        sigma=sigma,
        baseline=float(baseline),
        covariance=covariance,
        chi2_dof=ss / dof,
        n_points=int(x.size),
    )


def fit_gaussian(histogram: Histogram, window: tuple[float, float]) -> GaussianFit:
    """Gaussian fit to the counts inside a time window of a histogram."""
    t0, t1 = window
    if t1 <= t0:
        raise ConfigurationError(f"invalid fit window {window!r}")
    centers = histogram.bin_centers
    mask = (centers >= t0) & (centers < t1)
    if int(mask.sum()) < 20:
        raise FitError(f"fit window contains {int(mask.sum())} bins, need >= 20")
    return fit_gaussian_samples(centers[mask], histogram.counts[mask].astype(float))


def window_integrate(
    histogram: Histogram, center: float, width: float = const.INTEGRATION_WINDOW
) -> int:
    """Counts in [center - width/2, center + width/2).

    A bin belongs to the window iff its left edge lies inside; with 1 ps
    bins the convention is numerically irrelevant but keeps sums of
    adjacent windows exactly additive.
    """
    _require(width > 0.0, "window width must be positive")
    lo = center - width / 2.0
    hi = center + width / 2.0
    edges = histogram.bin_edges
    if lo < edges[0] - 1e-15 or hi > edges[-1] + 1e-15:
        raise WindowRangeError(
            f"window [{lo:.3e}, {hi:.3e}) s outside histogram span "
            f"[{edges[0]:.3e}, {edges[-1]:.3e}] s"
        )
    left = edges[:-1]
    mask = (left >= lo) & (left < hi)
    return int(histogram.counts[mask].sum())


@dataclass(frozen=True, eq=False)
class EfficiencyExtraction:
    """Efficiencies extracted from an (input, memory, noise) triple.

    Standard errors are Poisson-propagated from the window counts; the
    ``consistent`` flag drops when any efficiency leaves [0, 1] by more
    than three standard errors (the data contradict the estimator's
    assumptions, e.g. mismatched references).
    """

    mu_in: float
    mu_in_err: float
    eta_read_in: float
    eta_read_in_err: float
    eta_read_out: float
    eta_read_out_err: float
    eta_mem: float
    eta_mem_err: float
    counts_input: int
    counts_leak: int
    counts_retrieved: int
    counts_noise: int
    consistent: bool
    flags: tuple[str, ...]


def extract_efficiencies(
    input_histogram: Histogram,
    memory_histogram: Histogram,
    noise_histogram: Histogram,
    chain: DetectionChain,
    windows: tuple[float, float],
    width: float = const.INTEGRATION_WINDOW,
) -> EfficiencyExtraction:
    """Count-ratio efficiencies from control-off / control-on / no-signal data.

    ``windows`` is the pair of window centres (input arrival, read-out
    arrival).  The input histogram is the control-off reference; the
    noise histogram (signal blocked, control on) is subtracted from the
    read-out window counts before forming the memory efficiency.
    """
    for name, h in (("memory", memory_histogram), ("noise", noise_histogram)):
        if h.bin_edges.shape != input_histogram.bin_edges.shape or not np.allclose(
            h.bin_edges, input_histogram.bin_edges, rtol=0.0, atol=1e-15
        ):
            raise ExtractionError(f"{name} histogram binning differs from the input reference")
        if h.trials != input_histogram.trials:
            raise ExtractionError(
                f"{name} histogram has {h.trials} trials, reference has "
                f"{input_histogram.trials}; efficiencies need matched accumulation"
            )

    t_in, t_ro = windows
    counts_in = window_integrate(input_histogram, t_in, width)
    counts_leak = window_integrate(memory_histogram, t_in, width)
    counts_ro = window_integrate(memory_histogram, t_ro, width)
    counts_noise = window_integrate(noise_histogram, t_ro, width)
    if counts_in <= 0:
        raise ExtractionError("input reference window has zero counts")

    trials = input_histogram.trials
    mu_in = counts_in / (chain.total_efficiency * trials)
    mu_in_err = math.sqrt(counts_in) / (chain.total_efficiency * trials)

    eta_ri = 1.0 - counts_leak / counts_in
    var_ri = counts_leak / counts_in**2 + counts_leak**2 / counts_in**3
    eta_ri_err = math.sqrt(var_ri)

    signal_ro = counts_ro - counts_noise
    eta_mem = signal_ro / counts_in
    var_mem = (counts_ro + counts_noise) / counts_in**2 + signal_ro**2 / counts_in**3
    eta_mem_err = math.sqrt(var_mem)

    if eta_ri > 0.0:
        eta_ro = eta_mem / eta_ri
        eta_ro_err = abs(eta_ro) * math.sqrt(
            (eta_mem_err / eta_mem) ** 2 + (eta_ri_err / eta_ri) ** 2
            if eta_mem != 0.0
            else (eta_ri_err / eta_ri) ** 2
        )
    else:
        eta_ro, eta_ro_err = 0.0, 0.0

    flags = []
    for name, eta, err in (
        ("eta_read_in", eta_ri, eta_ri_err),
        ("eta_mem", eta_mem, eta_mem_err),
        ("eta_read_out", eta_ro, eta_ro_err),
    ):
        if eta < -3.0 * err or eta > 1.0 + 3.0 * err:
            flags.append(f"{name}={eta:.4f} outside [0, 1] by more than 3 sigma")

    return EfficiencyExtraction(
        mu_in=mu_in,
        mu_in_err=mu_in_err,
        eta_read_in=eta_ri,
        eta_read_in_err=eta_ri_err,
        eta_read_out=eta_ro,
        eta_read_out_err=eta_ro_err,
        eta_mem=eta_mem,
        eta_mem_err=eta_mem_err,
        counts_input=counts_in,
        counts_leak=counts_leak,
        counts_retrieved=counts_ro,
        counts_noise=counts_noise,
        consistent=not flags,
        flags=tuple(flags),
    )


# --- file formats -------------------------------------------------------


def _quantize_ps(seconds: float) -> float:
    """Picoseconds snapped to the 1 fs grid.

    Time axes are generated and serialized on a regular picosecond-scale
    grid; snapping to integer femtoseconds makes the float arithmetic of
    construction and file round trip agree bit-for-bit.
    """
    return round(float(seconds) * 1e15) / 1000.0


def histogram_to_csv(histogram: Histogram, path) -> None:
    """Write a histogram as metadata comments plus (bin_start_ps, counts).

    The metadata repr-round-trips the floats so that reading the file
    back reproduces the object bit-exactly.
    """
    width_ps = _quantize_ps(histogram.bin_width)
    start_ps = _quantize_ps(histogram.bin_edges[0])
    with open(path, "w", newline="") as fh:
        fh.write(f"# trials={histogram.trials}\n")
        fh.write(f"# seed={histogram.rng_seed}\n")
        fh.write(f"# acquisition_time_s={histogram.acquisition_time!r}\n")
        fh.write(f"# bin_width_ps={width_ps!r}\n")
        fh.write(f"# start_ps={start_ps!r}\n")
        writer = csv.writer(fh)
        writer.writerow(["bin_start_ps", "counts"])
        starts = start_ps + np.arange(histogram.counts.size) * width_ps
        for s, c in zip(starts, histogram.counts):
            writer.writerow([repr(float(s)), int(c)])


def histogram_from_csv(path) -> Histogram:
    """Read a histogram written by :func:`histogram_to_csv`."""
    meta: dict[str, str] = {}
    counts = []
    with open(path, newline="") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key.strip()] = value.strip()
            elif not line.startswith("bin_start_ps"):
                try:
                    _, count = line.split(",")
                    counts.append(int(count))
                except ValueError as exc:
                    raise ExtractionError(
                        f"histogram file {path} has a malformed row: {line!r}"
                    ) from exc
    try:
        trials = int(meta["trials"])
        seed = int(meta["seed"])
        acquisition = float(meta["acquisition_time_s"])
        width_ps = float(meta["bin_width_ps"])
        start_ps = float(meta["start_ps"])
    except KeyError as exc:
        raise ExtractionError(f"histogram file {path} lacks metadata key {exc}") from exc
    n = len(counts)
    if n == 0:
        raise ExtractionError(f"histogram file {path} has no count rows")
    edges = (start_ps + np.arange(n + 1) * width_ps) * 1e-12
    return Histogram(
        bin_edges=edges,
        counts=np.asarray(counts, dtype=np.int64),
        acquisition_time=acquisition,
        trials=trials,
        rng_seed=seed,
    )


def fit_report(fit: GaussianFit) -> dict:
    """JSON-ready report of a Gaussian fit."""
    return {
        "amplitude": fit.amplitude,
        "center_s": fit.center,
        "sigma_s": fit.sigma,
        "fwhm_s": fit.fwhm,
        "baseline": fit.baseline,
        "chi2_dof": fit.chi2_dof,
        "n_points": fit.n_points,
        "covariance": [[float(v) for v in row] for row in np.asarray(fit.covariance)],
    }


def fit_report_json(fit: GaussianFit) -> str:
    return json.dumps(fit_report(fit), indent=2, sort_keys=True)
