"""Figure-of-merit identities, limits, and error propagation."""

import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orcasim.errors import DomainError
from orcasim.metrics import (
    compute_figures,
    fidelity,
    figures_dict,
    figures_json,
    g2_out,
    mu_one,
    snr,
    throughput,
)

positive = st.floats(min_value=1e-9, max_value=1e3)


class TestSnr:
    def test_reference_identity(self):
        # 0.209 * 0.084 / 9e-7 = 19506.67
        assert snr(0.209 * 0.084, 9e-7) == pytest.approx(19506.666, rel=1e-4)

    def test_zero_noise_with_signal_is_infinite(self):
        assert math.isinf(snr(1e-6, 0.0))

    def test_zero_signal_zero_noise(self):
        assert snr(0.0, 0.0) == 0.0

    @given(positive, positive)
    def test_scale_invariance(self, signal, noise):
        assert snr(3 * signal, 3 * noise) == pytest.approx(snr(signal, noise), rel=1e-12)


class TestMuOne:
    def test_reference_identity(self):
        # noise / eta_mem at the reference point
        assert mu_one(9e-7, 0.209) == pytest.approx(4.30622e-6, rel=1e-5)

    def test_unit_snr_property(self):
        # putting mu_in = mu1 photons in yields snr exactly 1
        mu1 = mu_one(9e-7, 0.209)
        assert snr(0.209 * mu1, 9e-7) == pytest.approx(1.0, rel=1e-12)

    def test_rejects_dead_memory(self):
        with pytest.raises(DomainError):
            mu_one(9e-7, 0.0)

    @given(positive, st.floats(min_value=1e-6, max_value=1.0))
    def test_decreases_with_efficiency(self, noise, eta):
        assert mu_one(noise, eta) >= mu_one(noise, min(1.0, 2 * eta))


class TestG2:
    def test_reference_identity(self):
        # 2 / (mu_in/mu1 + 1) at mu_in = 1, mu1 = 4.5e-6
        assert g2_out(1.0, 4.5e-6) == pytest.approx(8.99996e-6, rel=1e-5)

    def test_poissonian_limit(self):
        # mu1 >> mu_in: output is noise-dominated, g2 -> 2 (thermal-like)
        assert g2_out(1e-9, 1.0) == pytest.approx(2.0, rel=1e-6)

    def test_noiseless_limit(self):
        assert g2_out(1.0, 0.0) == 0.0

    def test_both_zero_rejected(self):
        with pytest.raises(DomainError):
            g2_out(0.0, 0.0)

    @settings(max_examples=40)
    @given(st.floats(min_value=1e-8, max_value=10.0), positive)
    def test_in_nonclassical_range(self, mu_in, mu1):
        value = g2_out(mu_in, mu1)
        assert 0.0 <= value <= 2.0

    @given(st.floats(min_value=1e-8, max_value=10.0))
    def test_monotone_in_mu1(self, mu_in):
        assert g2_out(mu_in, 1e-6) < g2_out(mu_in, 1e-3)


class TestFidelity:
    def test_reference_identity(self):
        # (1 + mu1) / (1 + 2 mu1) at mu_in = 1 -> 99.9996%
        value = fidelity(1.0, 4.30622e-6)
        assert value == pytest.approx(0.9999957, abs=1e-6)
        assert f"{value * 100:.4f}%" == "99.9996%"

    def test_perfect_when_noiseless(self):
        assert fidelity(1.0, 0.0) == 1.0

    @settings(max_examples=40)
    @given(st.floats(min_value=1e-6, max_value=10.0), positive)
    def test_bounded_below_by_half(self, mu_in, mu1):
        assert 0.5 <= fidelity(mu_in, mu1) <= 1.0

    @given(st.floats(min_value=1e-6, max_value=10.0))
    def test_monotone_decreasing_in_mu1(self, mu_in):
        assert fidelity(mu_in, 1e-6) > fidelity(mu_in, 1e-3)


class TestThroughput:
    def test_reference_identity(self):
        value, _ = throughput(0.209, 0.56, 0.80)
        assert value == pytest.approx(0.0936, abs=1e-4)

    def test_error_propagation_in_quadrature(self):
        value, err = throughput(0.209, 0.56, 0.80, errors=(0.0, 0.04, 0.08))
        rel = math.sqrt((0.04 / 0.56) ** 2 + (0.08 / 0.80) ** 2)
        assert err == pytest.approx(value * rel, rel=1e-9)

    def test_doubling_an_error_grows_total(self):
        _, err1 = throughput(0.209, 0.56, 0.80, errors=(0.01, 0.04, 0.08))
        _, err2 = throughput(0.209, 0.56, 0.80, errors=(0.02, 0.04, 0.08))
        assert err2 > err1

    @given(
        st.floats(min_value=1e-3, max_value=1.0),
        st.floats(min_value=1e-3, max_value=1.0),
        st.floats(min_value=1e-3, max_value=1.0),
    )
    def test_product_form(self, a, b, c):
        value, _ = throughput(a, b, c)
        assert value == pytest.approx(a * b * c, rel=1e-12)


class TestComputeFigures:
    def test_reference_point(self):
        figs = compute_figures(mu_in=0.084, noise_per_window=9e-7, eta_mem=0.209)
        assert figs.snr == pytest.approx(19506.67, rel=1e-4)
        assert figs.mu1 == pytest.approx(4.30622e-6, rel=1e-5)
        assert figs.g2_out_pred == pytest.approx(8.6124e-6, rel=1e-3)
        assert figs.fidelity_pred == pytest.approx(0.9999957, abs=1e-6)
        assert figs.throughput == pytest.approx(0.0936, abs=1e-4)
        assert not figs.snr_infinite

    def test_predictions_are_at_single_photon_level(self):
        # g2 / fidelity are quoted for mu_in = 1 regardless of the
        # actual weak-coherent input used for the efficiency run
        figs = compute_figures(mu_in=0.084, noise_per_window=9e-7, eta_mem=0.209)
        assert figs.g2_out_pred == pytest.approx(g2_out(1.0, figs.mu1), rel=1e-12)
        assert figs.fidelity_pred == pytest.approx(fidelity(1.0, figs.mu1), rel=1e-12)

    def test_zero_noise_flags_infinite_snr(self):
        figs = compute_figures(mu_in=0.084, noise_per_window=0.0, eta_mem=0.209)
        assert figs.snr_infinite
        assert figs.mu1 == 0.0

    def test_error_inputs_propagate(self):
        clean = compute_figures(0.084, 9e-7, 0.209)
        noisy = compute_figures(
            0.084, 9e-7, 0.209, mu_in_err=0.002, noise_err=5e-8, eta_mem_err=0.01
        )
        assert clean.snr_err == 0.0
        assert noisy.snr_err > 0.0
        assert noisy.mu1_err > 0.0
        assert noisy.throughput_err > clean.throughput_err >= 0.0

    def test_negative_efficiency_rejected(self):
        with pytest.raises(DomainError):
            compute_figures(0.084, 9e-7, -0.01)

    def test_dict_and_json_agree(self):
        figs = compute_figures(0.084, 9e-7, 0.209)
        payload = figures_dict(figs)
        assert json.loads(figures_json(figs)) == pytest.approx(payload)
        assert {"snr", "mu1", "g2_out_pred", "fidelity_pred", "throughput"} <= set(payload)
