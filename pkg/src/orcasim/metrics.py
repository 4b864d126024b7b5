"""Figures of merit computed from extracted memory quantities.

All operations are pure arithmetic on already-measured numbers.  The
noise admixture model behind the predictions treats the retrieved field
as a coherent signal of mean photon number eta_mem * mu_in mixed with a
thermal noise background of mean mu1 * eta_mem per window; its validity
rests on the noise being memory-independent, which holds because the
noise level is set by control leakage and scattering rather than by the
stored excitation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .errors import DomainError


def snr(signal_out: float, noise: float) -> float:
    """Signal-to-noise ratio of windowed counts.

    Zero noise with positive signal is reported as ``math.inf`` (the
    flagged infinite case, e.g. noise-free synthetic runs), not an error.
    """
    if signal_out < 0.0 or noise < 0.0:
        raise DomainError(f"counts must be >= 0, got signal={signal_out!r} noise={noise!r}")
    if noise == 0.0:
        return math.inf if signal_out > 0.0 else 0.0
    return signal_out / noise


def mu_one(noise: float, eta_mem: float) -> float:
    """Input photon number at which the output SNR reaches one, N/eta_mem."""
    if eta_mem <= 0.0:
        raise DomainError(f"eta_mem must be positive, got {eta_mem!r}")
    if noise < 0.0:
        raise DomainError(f"noise must be >= 0, got {noise!r}")
    return noise / eta_mem


def g2_out(mu_in: float, mu1: float) -> float:
    """Predicted intensity autocorrelation of the retrieved field.

    2 / (mu_in/mu1 + 1): a coherent signal diluted by thermal noise of
    equivalent input strength mu1.  Approaches 2 for noise-dominated
    output and 0 for noiseless output.
    """
    if mu_in < 0.0 or mu1 < 0.0:
        raise DomainError("photon numbers must be >= 0")
    if mu_in == 0.0 and mu1 == 0.0:
        raise DomainError("g2 undefined with no signal and no noise")
    if mu1 == 0.0:
        return 0.0
    return 2.0 / (mu_in / mu1 + 1.0)


def fidelity(mu_in: float, mu1: float) -> float:
    """Probability that a retrieved count originated from the input.

    (mu_in + mu1)/(mu_in + 2 mu1), between 1/2 (noise only) and 1.
    """
    if mu_in < 0.0 or mu1 < 0.0:
        raise DomainError("photon numbers must be >= 0")
    denom = mu_in + 2.0 * mu1
    if denom <= 0.0:
        raise DomainError("fidelity undefined with no signal and no noise")
    return (mu_in + mu1) / denom


def throughput(
    eta_mem: float,
    eta_trans: float,
    eta_det: float,
    errors: tuple[float, float, float] | None = None,
) -> tuple[float, float]:
    """End-to-end click probability per input photon, with uncertainty.

    Product of the three efficiencies; the uncertainty combines the
    relative errors in quadrature (first order).  ``errors`` defaults to
    zero uncertainties.
    """
    for name, eta in (("eta_mem", eta_mem), ("eta_trans", eta_trans), ("eta_det", eta_det)):
        if not 0.0 <= eta <= 1.0:
            raise DomainError(f"{name} must be in [0, 1], got {eta!r}")
    value = eta_mem * eta_trans * eta_det
    if errors is None:
        return value, 0.0
    rel_sq = 0.0
    for eta, err in zip((eta_mem, eta_trans, eta_det), errors):
        if err < 0.0:
            raise DomainError("uncertainties must be >= 0")
        if eta > 0.0:
            rel_sq += (err / eta) ** 2
    return value, value * math.sqrt(rel_sq)


@dataclass(frozen=True, eq=False)
class MemoryFigures:
    """The derived figure-of-merit set with symmetric uncertainties.

    ``g2_out_pred`` and ``fidelity_pred`` are quoted at mu_in = 1 (the
    single-photon operating point the predictions target), while ``snr``
    refers to the actual ``mu_in`` of the run.
    """

    mu_in: float
    mu_in_err: float
    noise_per_window: float
    noise_err: float
    eta_mem: float
    eta_mem_err: float
    snr: float
    snr_err: float
    snr_infinite: bool
    mu1: float
    mu1_err: float
    g2_out_pred: float
    g2_out_err: float
    fidelity_pred: float
    fidelity_err: float
    throughput: float
    throughput_err: float


def compute_figures(
    mu_in: float,
    noise_per_window: float,
    eta_mem: float,
    mu_in_err: float = 0.0,
    noise_err: float = 0.0,
    eta_mem_err: float = 0.0,
    eta_trans: float = 0.56,
    eta_trans_err: float = 0.04,
    eta_det: float = 0.80,
    eta_det_err: float = 0.08,
) -> MemoryFigures:
    """Assemble the full figure set with first-order error propagation."""
    if eta_mem < 0.0:
        raise DomainError(f"eta_mem must be >= 0, got {eta_mem!r}")

    signal_out = eta_mem * mu_in
    snr_value = snr(signal_out, noise_per_window)
    snr_inf = math.isinf(snr_value)

    def _rel(value, err):
        return (err / value) ** 2 if value != 0.0 else 0.0

    if snr_inf or snr_value == 0.0:
        snr_err = 0.0
    else:
        snr_err = snr_value * math.sqrt(
            _rel(eta_mem, eta_mem_err) + _rel(mu_in, mu_in_err) + _rel(noise_per_window, noise_err)
        )

    if eta_mem > 0.0:
        mu1 = mu_one(noise_per_window, eta_mem)
        mu1_err = mu1 * math.sqrt(_rel(noise_per_window, noise_err) + _rel(eta_mem, eta_mem_err))
        g2 = g2_out(1.0, mu1)
        g2_err = 2.0 / (1.0 + mu1) ** 2 * mu1_err
        fid = fidelity(1.0, mu1)
        fid_err = mu1_err / (1.0 + 2.0 * mu1) ** 2
    else:
        mu1, mu1_err = 0.0, 0.0
        g2, g2_err = 0.0, 0.0
        fid, fid_err = 1.0, 0.0

    thr, thr_err = throughput(
        eta_mem, eta_trans, eta_det, errors=(eta_mem_err, eta_trans_err, eta_det_err)
    )

    return MemoryFigures(
        mu_in=mu_in,
        mu_in_err=mu_in_err,
        noise_per_window=noise_per_window,
        noise_err=noise_err,
        eta_mem=eta_mem,
        eta_mem_err=eta_mem_err,
        snr=snr_value,
        snr_err=snr_err,
        snr_infinite=snr_inf,
        mu1=mu1,
        mu1_err=mu1_err,
        g2_out_pred=g2,
        g2_out_err=g2_err,
        fidelity_pred=fid,
        fidelity_err=fid_err,
        throughput=thr,
        throughput_err=thr_err,
    )


def figures_dict(figures: MemoryFigures) -> dict:
    """Flat JSON-ready mapping of value / uncertainty pairs."""
    out = {}
    for name in (
        "mu_in",
        "noise_per_window",
        "eta_mem",
        "snr",
        "mu1",
        "g2_out_pred",
        "fidelity_pred",
        "throughput",
    ):
        out[name] = getattr(figures, name)
    out["mu_in_err"] = figures.mu_in_err
    out["noise_err"] = figures.noise_err
    out["eta_mem_err"] = figures.eta_mem_err
    out["snr_err"] = figures.snr_err
    out["mu1_err"] = figures.mu1_err
    out["g2_out_err"] = figures.g2_out_err
    out["fidelity_err"] = figures.fidelity_err
    out["throughput_err"] = figures.throughput_err
    out["snr_infinite"] = figures.snr_infinite
    return out


def figures_json(figures: MemoryFigures) -> str:
    return json.dumps(figures_dict(figures), indent=2, sort_keys=True)
